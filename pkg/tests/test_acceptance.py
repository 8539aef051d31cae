"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed in the pytest
terminal summary and when this file is run as a script.
"""

import math
import sys
import time

import numpy as np
import pytest

from rtesplit.angular_mesh import build_angular_mesh
from rtesplit.checks import (check_area_sums, check_component_split, check_hg_mean_cosine,
                             check_normalization, check_scattering_symmetry,
                             splitting_differences)
from rtesplit.errors import ConfigurationError
from rtesplit.scattering import CrossSections, PhaseFunction
from rtesplit.solver import ModelProblem, SplittingSolver
from rtesplit.spatial_mesh import build_spatial_mesh
from rtesplit.verification import (PUBLISHED, angular_interpolation_error, convergence_study,
                                   example1, example2, orders, pde_residual, problem_for,
                                   spatial_interpolation_error)
from rtesplit.transport_assembly import StabilizationPolicy

RESULTS = []


def record(label, ok, detail):
    line = f"{label} {'PASS' if ok else 'FAIL'}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def fmt(values, spec=".4g"):
    return "[" + ", ".join("-" if v is None else format(v, spec) for v in values) + "]"


@pytest.fixture(scope="module")
def table1():
    t0 = time.perf_counter()
    table = convergence_study(example1(), [1, 2, 3])
    return table, time.perf_counter() - t0


@pytest.fixture(scope="module")
def table2():
    t0 = time.perf_counter()
    table = convergence_study(example2(0.5), [1, 2, 3])
    return table, time.perf_counter() - t0


def table_verdict(table, published, order_tol, order_range, factor):
    errs = [r.l2_final for r in table.rows]
    obs = [r.order_final for r in table.rows][1:]
    ref_err = published["l2_final"][:3]
    ref_ord = published["order_final"][1:3]
    monotone = all(errs[i + 1] < errs[i] for i in range(len(errs) - 1))
    orders_ok = all(abs(o - r) <= order_tol and order_range[0] <= o <= order_range[1]
                    for o, r in zip(obs, ref_ord))
    factors = [max(e / r, r / e) for e, r in zip(errs, ref_err)]
    ok = monotone and orders_ok and all(f <= factor for f in factors)
    detail = (f"errors {fmt(errs)} vs {fmt(ref_err)} (factors {fmt(factors, '.2f')}), "
              f"orders {fmt(obs, '.2f')} vs {fmt(ref_ord, '.2f')}")
    return ok, detail


def test_ac1_table1_reproduction(table1):
    table, seconds = table1
    ok, detail = table_verdict(table, PUBLISHED["ex1"], 0.5, (1.0, math.inf), 3.0)
    record("AC1", ok and seconds < 600, f"{detail}, {seconds:.0f} s")


def test_ac2_table2_reproduction(table2):
    table, seconds = table2
    ok, detail = table_verdict(table, PUBLISHED["ex2"], 0.4, (0.8, 1.6), 3.0)
    record("AC2", ok and seconds < 900, f"{detail}, {seconds:.0f} s")


def test_ac3_order_arithmetic():
    mismatches = []
    for name, table in PUBLISHED.items():
        for col in ("final", "time"):
            derived = orders(table[f"l2_{col}"])
            for level, (got, ref) in enumerate(zip(derived, table[f"order_{col}"]), 1):
                if ref is not None and round(got, 2) != round(ref, 2):
                    mismatches.append(f"{name} {col} level {level}: {got:.4f} vs {ref:.4f}")
    record("AC3", not mismatches,
           "all published orders reproduced" if not mismatches else "; ".join(mismatches))


def test_ac4_splitting_consistency():
    t0 = time.perf_counter()
    d = splitting_differences((1 / 4, 1 / 8, 1 / 16))
    seconds = time.perf_counter() - t0
    ratios = [d[i] / d[i + 1] for i in range(2)]
    ok = all(1.5 <= r <= 2.5 for r in ratios) and seconds < 120
    record("AC4", ok, f"differences {fmt(d)}, ratios {fmt(ratios, '.2f')}, {seconds:.1f} s")


def _random_field_problem(seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((2, 3))
    u0 = lambda x, s: np.cos(4 * x @ c[0] + 2 * s @ c[1]) * np.prod(x * (1 - x), axis=-1)  # noqa: E731
    return ModelProblem(1, 5, CrossSections(), PhaseFunction.henyey_greenstein(0.5),
                        initial=u0, dt=0.25, T=0.25)


def test_ac5_stability(table1, table2):
    parts, ok = [], True
    # (a) per-node angular decay on random states
    sv = SplittingSolver(_random_field_problem(0))
    rng = np.random.default_rng(7)
    worst = 0.0
    M1 = sv.ops.M1
    for _ in range(100):
        u = rng.standard_normal(sv.n_s)
        v = sv.ops.step1.solve(u)
        worst = max(worst, math.sqrt(M1 @ v**2) / math.sqrt(M1 @ u**2))
    ok &= worst <= 1 + 1e-12
    parts.append(f"(a) max ratio {worst:.4f}")
    # (b) one step without source
    growth = 0.0
    for seed in range(20):
        sv = SplittingSolver(_random_field_problem(seed))
        _, diag = sv.advance(sv.initial_field(), 1)
        growth = max(growth, diag.norm**2 / ((1 + 2 * sv.dt) * diag.norm_tilde**2))
    ok &= growth <= 1.0
    parts.append(f"(b) max ||u||^2/((1+2dt)||u~||^2) {growth:.4f}")
    # (c) global bound on the manufactured runs
    stable = [r.stable for t in (table1[0], table2[0]) for r in t.rows]
    ok &= all(stable)
    parts.append(f"(c) bound holds on {sum(stable)}/{len(stable)} runs")
    # (d) configuration rejection
    rejected = 0
    mesh = build_spatial_mesh(5)
    for problem in (ModelProblem(1, 5, dt=0.25, policy=StabilizationPolicy(fixed=0.1)),
                    ModelProblem(1, 5, dt=0.75, T=0.75)):
        try:
            problem.validate(mesh)
        except ConfigurationError:
            rejected += 1
    ok &= rejected == 2
    parts.append(f"(d) rejected {rejected}/2")
    record("AC5", ok, "; ".join(parts))


def test_ac6_geometry_and_operators():
    checks = [("areas", check_area_sums()), ("M2 symmetry", check_scattering_symmetry()),
              ("normalization", check_normalization()), ("HG mean cosine", check_hg_mean_cosine()),
              ("component split", check_component_split(samples=100))]
    ok = all(c[1][0] for c in checks)
    record("AC6", ok, "; ".join(f"{name} {'ok' if r[0] else 'FAILED'} ({r[1]})" for name, r in checks))


def test_ac7_interpolation_rates():
    f = lambda x: np.exp(x[..., 0]) * np.sin(2 * x[..., 1]) * np.cos(x[..., 2])  # noqa: E731
    g = lambda s: np.exp(s[..., 0]) * s[..., 2]  # noqa: E731
    ox = orders([spatial_interpolation_error(build_spatial_mesh(n), f) for n in (5, 9, 17)])[1:]
    os_ = orders([angular_interpolation_error(build_angular_mesh(L), g) for L in (2, 3, 4)])[1:]
    ok = all(abs(o - 2.0) <= 0.2 for o in ox) and all(abs(o - 1.0) <= 0.2 for o in os_)
    record("AC7", ok, f"spatial orders {fmt(ox, '.3f')}, angular orders {fmt(os_, '.3f')}")


def test_ac8_manufactured_residual():
    rng = np.random.default_rng(2024)
    worst = {}
    for case in (example1(), example2(0.5)):
        res = 0.0
        for _ in range(100):
            x = rng.uniform(0, 1, 3)
            s = rng.standard_normal(3)
            s /= np.linalg.norm(s)
            res = max(res, abs(pde_residual(case, x, s, rng.uniform(0, 1))))
        worst[case.name] = res
    record("AC8", all(v < 1e-6 for v in worst.values()),
           ", ".join(f"{k} max residual {v:.2e}" for k, v in worst.items()))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
