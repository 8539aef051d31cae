"""Command-line front end.

Subcommands: ``solve``, ``convergence``, ``check`` and ``mesh-info``.
Exit codes are 0 on success, 1 for configuration errors and 2 for
numerical failures.

Settings come from three places, later ones winning: built-in defaults,
a ``--config`` file and command-line flags.  The config file is flat
``key = value`` text; ``#`` starts a comment and keys are the
:class:`RunConfig` field names, for example::

    example = ex2
    level = 2
    eta = 0.5
    parallelism = 4
"""

import argparse
import importlib.util
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from .angular_mesh import build_angular_mesh, write_angular_mesh
from .checks import run_checks
from .errors import ConfigurationError, NumericalError, ResourceLimitError
from .scattering import CrossSections, PhaseFunction
from .solver import ModelProblem, SplittingSolver, stability_bound
from .spatial_mesh import build_spatial_mesh, write_spatial_mesh
from .transport_assembly import StabilizationPolicy
from .verification import (LEVELS, ErrorEvaluator, convergence_study, example1, example2,
                           time_accumulated_error)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2
EXAMPLES = ("ex1", "ex2", "custom")


@dataclass
class RunConfig:
    example: str = "ex1"
    level: int | None = None
    n: int | None = None
    angular_level: int | None = None
    dt: float | None = None
    T: float = 1.0
    sigma_t: float = 2.0
    sigma_s: float = 0.5
    eta: float = 0.5
    phase: str = "hg"  # custom problems only
    delta0: float = 0.25
    delta: float | None = None  # constant delta_K instead of delta0*min(h, dt)
    tol: float = 1e-10
    custom_file: str | None = None
    diagnostics: str | None = None
    field_out: str | None = None
    csv: str | None = None
    levels: str = "1,2,3"
    angular_refine: int = 0
    parallelism: int = 1
    cache_factorizations: bool = True

    def resolved_sizes(self):
        level = self.level if self.level is not None else 1
        if level not in LEVELS and (self.n is None or self.angular_level is None):
            raise ConfigurationError(f"unknown level {level}; choose from {sorted(LEVELS)}")
        n, ang = LEVELS.get(level, (None, None))
        return (self.n if self.n is not None else n,
                self.angular_level if self.angular_level is not None else ang)

    def level_list(self):
        try:
            return [int(v) for v in self.levels.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigurationError(f"levels must be comma-separated integers: {self.levels!r}") from exc


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(name, kind, text):
    text = text.strip()
    if text.lower() in ("", "none") and "None" in str(kind):
        return None
    try:
        if "bool" in str(kind):
            low = text.lower()
            if low not in _TRUE | _FALSE:
                raise ValueError(text)
            return low in _TRUE
        if "int" in str(kind):
            return int(text)
        if "float" in str(kind):
            return float(text)
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {name}: {text!r}") from exc
    return text


def read_config_file(path):
    kinds = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in kinds:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _convert(key, kinds[key], value)
    return values


def build_config(args):
    """Defaults, then the config file, then explicitly given flags."""
    values = {}
    if getattr(args, "config", None):
        try:
            values.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigurationError(f"cannot read config file: {exc}") from exc
    names = {f.name for f in fields(RunConfig)}
    for key, value in vars(args).items():
        if key in names and value is not None:
            values[key] = value
    cfg = RunConfig(**values)
    if cfg.example not in EXAMPLES:
        raise ConfigurationError(f"example must be one of {EXAMPLES}, got {cfg.example!r}")
    return cfg


def _load_custom(path):
    if path is None:
        raise ConfigurationError("example = custom needs custom_file (a Python file "
                                 "defining source(x, s, t) and optionally initial(x, s), exact(x, s, t))")
    spec = importlib.util.spec_from_file_location("rtesplit_custom_problem", path)
    if spec is None:
        raise ConfigurationError(f"cannot load custom problem file {path!r}")
    module = importlib.util.module_from_spec(spec)
    try:
        spec.loader.exec_module(module)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"cannot load custom problem file: {exc}") from exc
    return module


def build_problem(cfg):
    """Returns (ModelProblem, exact solution or None); validates before any assembly."""
    n, ang = cfg.resolved_sizes()
    sigma = CrossSections(cfg.sigma_t, cfg.sigma_s)
    policy = StabilizationPolicy(cfg.delta0, cfg.delta)
    if cfg.example == "ex1":
        case = example1(cfg.sigma_t, cfg.sigma_s)
    elif cfg.example == "ex2":
        case = example2(cfg.eta, cfg.sigma_t, cfg.sigma_s)
    else:
        case = None
    if case is not None:
        problem = ModelProblem(ang, n, sigma, case.phase, case.source, case.initial,
                               cfg.T, cfg.dt, policy)
        exact = case.exact
    else:
        module = _load_custom(cfg.custom_file)
        phase = {"isotropic": PhaseFunction.isotropic, "linear": PhaseFunction.linear,
                 "hg": lambda: PhaseFunction.henyey_greenstein(cfg.eta)}.get(cfg.phase)
        if phase is None:
            raise ConfigurationError(f"phase must be isotropic, linear or hg, got {cfg.phase!r}")
        problem = ModelProblem(ang, n, sigma, phase(), getattr(module, "source", None),
                               getattr(module, "initial", None), cfg.T, cfg.dt, policy)
        exact = getattr(module, "exact", None)
    if n is None or n < 2:
        raise ConfigurationError(f"spatial vertices per axis must be >= 2, got {n}")
    # parameter checks run on the mesh alone, before any operator assembly
    problem.validate(build_spatial_mesh(n))
    return problem, exact


def write_field(path, solver, field, t):
    U = field.spatial_major()  # (N_s, N_x)
    with open(path, "w") as fh:
        fh.write(f"# N_x {solver.n_x} N_s {solver.n_s} n {solver.problem.n} "
                 f"angular_level {solver.problem.angular_level} t {t:.12g}\n")
        fh.write("# k i value  (k spatial node, i angular cell)\n")
        for i in range(U.shape[0]):
            for k in range(U.shape[1]):
                fh.write(f"{k} {i} {U[i, k]:.16e}\n")


def cmd_solve(cfg, out=sys.stdout):
    problem, exact = build_problem(cfg)
    solver = SplittingSolver(problem, parallelism=cfg.parallelism,
                             cache_factorizations=cfg.cache_factorizations, tol=cfg.tol)
    observer = None
    if exact is not None:
        ev = ErrorEvaluator(solver.spatial, solver.angular, cfg.angular_refine)
        observer = lambda step, t, fld: ev.error(fld.spatial_major(), exact, t)  # noqa: E731
    diag = open(cfg.diagnostics, "w") if cfg.diagnostics else out
    try:
        diag.write("# step t norm residual\n")
        result = solver.run(observer=observer, stream=diag)
    finally:
        if diag is not out:
            diag.close()
    holds, _ = stability_bound(result, solver.dt, problem.T, float(solver.comp.deltas.max()))
    out.write(f"N_x = {solver.n_x}, N_s = {solver.n_s}, dt = {solver.dt:.6g}, "
              f"steps = {problem.n_steps}\n")
    out.write(f"final norm = {result.diagnostics[-1].norm:.6e}; stability bound "
              f"{'holds' if holds else 'VIOLATED'}\n")
    if exact is not None:
        errs = result.observations
        out.write(f"l2_final = {errs[-1]:.6e}\n")
        out.write(f"l2_time = {time_accumulated_error(errs, solver.dt):.6e}\n")
    if cfg.field_out:
        write_field(cfg.field_out, solver, result.final, problem.T)
    return EXIT_OK


def cmd_convergence(cfg, out=sys.stdout):
    if cfg.example == "custom":
        raise ConfigurationError("convergence needs a manufactured example (ex1 or ex2)")
    case = example1(cfg.sigma_t, cfg.sigma_s) if cfg.example == "ex1" else example2(
        cfg.eta, cfg.sigma_t, cfg.sigma_s)
    levels = cfg.level_list()
    for level in levels:
        if level not in LEVELS:
            raise ConfigurationError(f"unknown level {level}; choose from {sorted(LEVELS)}")
    policy = StabilizationPolicy(cfg.delta0, cfg.delta)
    table = convergence_study(case, levels, cfg.angular_refine, cfg.parallelism,
                              cfg.cache_factorizations, policy)
    out.write(table.format() + "\n")
    if cfg.csv:
        table.write_csv(cfg.csv)
    return EXIT_OK


def cmd_check(cfg=None, out=sys.stdout, mutate=None):
    results = run_checks(mutate=mutate, stream=out)
    failed = [r.name for r in results if not r.passed]
    out.write(f"{len(results) - len(failed)}/{len(results)} checks passed\n")
    if failed:
        out.write("failed: " + ", ".join(failed) + "\n")
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_mesh_info(cfg, args, out=sys.stdout):
    n, ang = cfg.resolved_sizes()
    spatial = build_spatial_mesh(n)
    angular = build_angular_mesh(ang)
    out.write(f"spatial: n = {n}, N_x = {spatial.n_nodes}, tets = {len(spatial.tets)}, "
              f"h_x = {spatial.h_x:.6g}, max tet diameter = {spatial.h_max:.6g}\n")
    out.write(f"angular: level = {ang}, N_s = {angular.n_cells}, h_s = {angular.h_s:.6g}, "
              f"sum of areas = {angular.areas.sum():.15f}\n")
    if args.spatial_dump:
        write_spatial_mesh(spatial, args.spatial_dump)
    if args.angular_dump:
        write_angular_mesh(angular, args.angular_dump)
    return EXIT_OK


def _bool(text):
    low = text.lower()
    if low not in _TRUE | _FALSE:
        raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")
    return low in _TRUE


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--example", choices=EXAMPLES)
    common.add_argument("--level", type=int, help="mesh level 1-4 (sets n and angular level)")
    common.add_argument("--n", type=int, help="spatial vertices per axis")
    common.add_argument("--angular-level", type=int)
    common.add_argument("--dt", type=float, help="time step (default h_x)")
    common.add_argument("--T", type=float, help="final time")
    common.add_argument("--sigma-t", type=float)
    common.add_argument("--sigma-s", type=float)
    common.add_argument("--eta", type=float, help="Henyey-Greenstein anisotropy")
    common.add_argument("--phase", choices=("isotropic", "linear", "hg"))
    common.add_argument("--delta0", type=float)
    common.add_argument("--delta", type=float, help="constant stabilization parameter")
    common.add_argument("--tol", type=float, help="linear solve residual tolerance")
    common.add_argument("--custom-file", help="Python file with source/initial/exact")
    common.add_argument("--angular-refine", type=int,
                        help="sub-cell refinements of the angular error quadrature")
    common.add_argument("--parallelism", type=int)
    common.add_argument("--cache-factorizations", type=_bool, metavar="BOOL")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rtesplit", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="run one simulation")
    p.add_argument("--diagnostics", help="per-step diagnostics file (default stdout)")
    p.add_argument("--field-out", help="final field dump (k i value triplets)")
    p = sub.add_parser("convergence", parents=[common], help="convergence table")
    p.add_argument("--levels", help="comma-separated levels, e.g. 1,2,3")
    p.add_argument("--csv", help="CSV output path")
    sub.add_parser("check", parents=[common], help="run the invariant suite")
    p = sub.add_parser("mesh-info", parents=[common], help="mesh statistics and dumps")
    p.add_argument("--spatial-dump")
    p.add_argument("--angular-dump")
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = build_config(args)
        if args.command == "solve":
            return cmd_solve(cfg, out)
        if args.command == "convergence":
            return cmd_convergence(cfg, out)
        if args.command == "check":
            return cmd_check(cfg, out)
        return cmd_mesh_info(cfg, args, out)
    except NumericalError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return EXIT_NUMERICAL
    except (ConfigurationError, ResourceLimitError, ValueError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
