import io

import numpy as np
import pytest

from rtesplit.cli import (EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, RunConfig, build_config,
                          cmd_check, main, make_parser)
from rtesplit.solver import SplittingSolver
from rtesplit.verification import example1, problem_for


def call(argv):
    out = io.StringIO()
    return main(argv, out=out), out.getvalue()


def test_solve_smoke(tmp_path):
    diag = tmp_path / "diag.txt"
    code, text = call(["solve", "--example", "ex1", "--level", "1", "--diagnostics", str(diag)])
    assert code == EXIT_OK
    lines = [r for r in diag.read_text().splitlines() if not r.startswith("#")]
    assert len(lines) == 2 and len(lines[0].split()) == 4
    assert "l2_final = 5.597747e-01" in text


def test_solve_matches_library(tmp_path):
    # the CLI is a thin shell over the library
    out = tmp_path / "field.txt"
    assert call(["solve", "--level", "1", "--field-out", str(out)])[0] == EXIT_OK
    sv = SplittingSolver(problem_for(example1(), level=1))
    U = sv.run().final.spatial_major()
    rows = np.loadtxt(out, comments="#")
    assert rows.shape == (U.size, 3)
    k, i = rows[:, 0].astype(int), rows[:, 1].astype(int)
    assert np.array_equal(rows[:, 2], U[i, k])
    assert "N_x 27 N_s 48" in out.read_text().splitlines()[0]


def test_rejects_large_dt(capsys):
    assert call(["solve", "--dt", "0.6"])[0] == EXIT_CONFIG
    assert "Δt ≤ 1/2" in capsys.readouterr().err


def test_rejects_eta(capsys):
    assert call(["solve", "--example", "ex2", "--eta", "1.2"])[0] == EXIT_CONFIG
    assert "η ∈ (-1, 1)" in capsys.readouterr().err


def test_rejects_large_delta(capsys):
    assert call(["solve", "--level", "2", "--delta", "0.2"])[0] == EXIT_CONFIG
    assert "δ_K ≤ Δt/4" in capsys.readouterr().err


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nexample = ex2\nlevel = 2\neta = 0.3\ncache_factorizations = no\n")
    args = make_parser().parse_args(["solve", "--config", str(cfg), "--eta", "0.4"])
    c = build_config(args)
    assert (c.example, c.level, c.eta, c.cache_factorizations) == ("ex2", 2, 0.4, False)
    assert c.sigma_t == RunConfig().sigma_t


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert call(["solve", "--config", str(bad)])[0] == EXIT_CONFIG
    bad.write_text("level = two\n")
    assert call(["solve", "--config", str(bad)])[0] == EXIT_CONFIG


def test_custom_problem_file(tmp_path):
    src = tmp_path / "prob.py"
    src.write_text(
        "import numpy as np\n"
        "def initial(x, s):\n"
        "    return np.prod(np.sin(np.pi * x), axis=-1) + 0 * s[..., 0]\n"
        "def source(x, s, t):\n"
        "    return 0.0 * x[..., 0] + 0 * s[..., 0]\n")
    code, text = call(["solve", "--example", "custom", "--custom-file", str(src),
                       "--phase", "isotropic", "--n", "3", "--angular-level", "0", "--dt", "0.5"])
    assert code == EXIT_OK and "final norm" in text
    assert call(["solve", "--example", "custom"])[0] == EXIT_CONFIG


def test_convergence_csv(tmp_path):
    path = tmp_path / "conv.csv"
    code, text = call(["convergence", "--example", "ex1", "--levels", "1,2", "--csv", str(path)])
    assert code == EXIT_OK
    assert len(path.read_text().splitlines()) == 3
    assert "order_final" in text


def test_mesh_info(tmp_path):
    sp, an = tmp_path / "s.txt", tmp_path / "a.txt"
    code, text = call(["mesh-info", "--level", "1", "--spatial-dump", str(sp), "--angular-dump", str(an)])
    assert code == EXIT_OK and "N_x = 27" in text and "N_s = 48" in text
    assert sp.exists() and an.exists()


def test_check_passes_on_fresh_build():
    out = io.StringIO()
    assert cmd_check(out=out) == EXIT_OK
    assert "8/8 checks passed" in out.getvalue()


def test_check_names_component_split_after_sign_flip():
    out = io.StringIO()

    def flip(comp):
        comp.A[1] *= -1.0

    assert cmd_check(out=out, mutate=flip) == EXIT_NUMERICAL
    text = out.getvalue()
    assert "[FAIL] component split" in text
    assert "failed: component split" in text


def test_numerical_failure_exit_code(monkeypatch):
    from rtesplit import cli
    from rtesplit.errors import NumericalError

    def boom(cfg, out):
        raise NumericalError("forced")

    monkeypatch.setattr(cli, "cmd_solve", boom)
    assert call(["solve"])[0] == EXIT_NUMERICAL


def test_unknown_level():
    assert call(["solve", "--level", "9"])[0] == EXIT_CONFIG
