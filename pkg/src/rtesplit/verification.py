"""Manufactured solutions, error norms and convergence studies.

Both manufactured cases use g(x) = sin(pi x1) sin(pi x2) sin(pi x3), which
vanishes on the whole boundary so the homogeneous inflow condition holds.

* ``example1``: u = e^{-alpha t} g(x) with the linear kernel (1 + s.s')/(4 pi);
  since u is isotropic and the kernel is normalized, K u = u and
  f = (sigma_t - alpha - sigma_s) u + s.grad u.
* ``example2``: u = e^{-alpha t} s3 g(x) with Henyey-Greenstein scattering;
  the kernel maps s3 to eta*s3, so f = (sigma_t - alpha - sigma_s eta) u + s.grad u.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import integrate

from .angular_mesh import subcell_quadrature
from .quadrature import DEGREE5, tet_points
from .scattering import CrossSections, PhaseFunction
from .solver import ModelProblem, SplittingSolver, stability_bound
from .transport_assembly import StabilizationPolicy

PI = math.pi

# (vertices per axis, angular level) for the mesh levels of the study
LEVELS = {1: (3, 1), 2: (5, 2), 3: (9, 3), 4: (17, 4)}

PUBLISHED = {
    "ex1": {
        "l2_final": [2.6088e-01, 6.3417e-02, 1.9910e-02, 8.1660e-03],
        "order_final": [None, 2.0404, 1.7313, 1.2259],
        "l2_time": [2.6855e-01, 8.1076e-02, 2.7095e-02, 9.6150e-03],
        "order_time": [None, 1.7278, 1.5812, 1.4947],
    },
    "ex2": {
        "l2_final": [1.8559e-01, 7.9253e-02, 3.9041e-02, 1.9017e-02],
        "order_final": [None, 1.2276, 1.0215, 1.0377],
        "l2_time": [1.8640e-01, 8.2175e-02, 3.9019e-02, 1.9381e-02],
        "order_time": [None, 1.1816, 1.0745, 1.0095],
    },
}


def _g(x):
    return np.sin(PI * x[..., 0]) * np.sin(PI * x[..., 1]) * np.sin(PI * x[..., 2])


def _sgrad_g(x, s):
    sx = np.sin(PI * x)
    cx = np.cos(PI * x)
    return PI * (s[..., 0] * cx[..., 0] * sx[..., 1] * sx[..., 2]
                 + s[..., 1] * sx[..., 0] * cx[..., 1] * sx[..., 2]
                 + s[..., 2] * sx[..., 0] * sx[..., 1] * cx[..., 2])


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    phase: PhaseFunction
    cross_sections: CrossSections
    alpha: float = 0.1
    eta: float = 0.0
    angular_factor: bool = False  # multiply by s3 (example 2)

    def _amp(self, s):
        return s[..., 2] if self.angular_factor else 1.0

    def exact(self, x, s, t):
        return np.exp(-self.alpha * t) * self._amp(s) * _g(x)

    def initial(self, x, s):
        return self.exact(x, s, 0.0)

    def source(self, x, s, t):
        sig = self.cross_sections
        scatter = sig.sigma_s * (self.phase.mean_cosine() if self.angular_factor else 1.0)
        amp = np.exp(-self.alpha * t) * self._amp(s)
        return amp * ((sig.sigma_t - self.alpha - scatter) * _g(x) + _sgrad_g(x, s))


def example1(sigma_t=2.0, sigma_s=0.5, alpha=0.1):
    return ManufacturedCase("ex1", PhaseFunction.linear(), CrossSections(sigma_t, sigma_s), alpha)


def example2(eta=0.5, sigma_t=2.0, sigma_s=0.5, alpha=0.1):
    return ManufacturedCase("ex2", PhaseFunction.henyey_greenstein(eta),
                            CrossSections(sigma_t, sigma_s), alpha, eta, angular_factor=True)


def exact_and_source(case, x, s, t):
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    return case.exact(x, s, t), case.source(x, s, t)


def problem_for(case, level=None, n=None, angular_level=None, dt=None, T=1.0,
                policy=None):
    if level is not None:
        n, angular_level = LEVELS[level]
    return ModelProblem(angular_level, n, case.cross_sections, case.phase,
                        source=case.source, initial=case.initial, T=T, dt=dt,
                        policy=policy or StabilizationPolicy())


# --- error norms -------------------------------------------------------------

class ErrorEvaluator:
    """L2(S^2_h x Omega_h) distance between a discrete field and a function.

    Space: degree-5 rule per tetrahedron.  Angle: ``angular_refine`` levels of
    sub-triangles per cell (0 is the cell-center rule).
    """

    def __init__(self, spatial, angular, angular_refine=0, rule=DEGREE5):
        pts, w = tet_points(spatial, rule)
        self.x = pts.reshape(-1, 3)
        self.wx = w.ravel()
        bary = rule[0]
        nq = len(rule[1])
        rows = np.repeat(np.arange(len(self.x)), 4)
        cols = np.repeat(spatial.tets, nq, axis=0).ravel()
        vals = np.tile(bary, (len(spatial.tets), 1)).ravel()
        self.basis = sp.csr_matrix((vals, (rows, cols)), shape=(len(self.x), spatial.n_nodes))
        self.s, self.ws = subcell_quadrature(angular, angular_refine)

    def error(self, U, func, t, chunk=2_000_000):
        """``U`` is (N_s, N_x); ``func(x, s, t)`` the reference."""
        uh = (self.basis @ U.T).T  # (N_s, n_xq)
        ns, m = self.ws.shape
        per = max(1, chunk // (m * len(self.x)))
        total = 0.0
        for i0 in range(0, ns, per):
            i1 = min(i0 + per, ns)
            s = self.s[i0:i1]  # (c, m, 3)
            ref = func(self.x[None, None, :, :], s[:, :, None, :], t)
            diff = np.broadcast_to(ref, (i1 - i0, m, len(self.x))) - uh[i0:i1, None, :]
            total += float(np.einsum("cm,cmq,q->", self.ws[i0:i1], diff**2, self.wx))
        return math.sqrt(total)


def l2_error_space_angle(U, spatial, angular, func, t, angular_refine=0):
    return ErrorEvaluator(spatial, angular, angular_refine).error(U, func, t)


def time_accumulated_error(step_errors, dt):
    """(dt * sum_n e_n^2)^(1/2) over the steps n = 1..N."""
    e = np.asarray(step_errors, dtype=float)
    return math.sqrt(dt * float(np.dot(e, e)))


def orders(errors):
    """log2 of consecutive ratios; None where either error is missing or zero."""
    out = [None]
    for a, b in zip(errors[:-1], errors[1:]):
        ok = a is not None and b is not None and a > 0 and b > 0
        out.append(math.log2(a / b) if ok else None)
    return out


# --- interpolation -----------------------------------------------------------

def spatial_interpolation_error(spatial, func):
    """L2(Omega) error of the P1 nodal interpolant of ``func(x)``."""
    pts, w = tet_points(spatial, DEGREE5)
    vals = func(spatial.nodes)
    interp = np.einsum("qi,ti->tq", DEGREE5[0], vals[spatial.tets])
    return math.sqrt(float(np.sum(w * (func(pts) - interp) ** 2)))


def angular_interpolation_error(angular, func, refine=3):
    """L2(S^2) error of the cell-center piecewise-constant interpolant of ``func(s)``."""
    pts, w = subcell_quadrature(angular, refine)
    centre = func(angular.centers)
    return math.sqrt(float(np.sum(w * (func(pts) - centre[:, None]) ** 2)))


# --- residual oracle ---------------------------------------------------------

def _frame(s):
    a = np.array([1.0, 0.0, 0.0]) if abs(s[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(s, a)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(s, e1)


def scattering_integral(case, x, s, t, tol=1e-11):
    """int Phi(s.s') u(x, s', t) ds' by adaptive quadrature around the pole s."""
    e1, e2 = _frame(s)

    def integrand(phi, mu):
        r = math.sqrt(max(0.0, 1.0 - mu * mu))
        sp_ = mu * s + r * (math.cos(phi) * e1 + math.sin(phi) * e2)
        return float(case.phase.of_cosine(mu)) * float(case.exact(x, sp_, t))

    val, _ = integrate.dblquad(integrand, -1.0, 1.0, 0.0, 2 * PI, epsabs=tol, epsrel=tol)
    return val


def pde_residual(case, x, s, t, h=1e-5):
    """du/dt + s.grad u + sigma_t u - sigma_s K u - f, derivatives by central differences."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    u = lambda xx, tt: float(case.exact(xx, s, tt))  # noqa: E731
    dudt = (u(x, t + h) - u(x, t - h)) / (2 * h)
    grad = np.array([(u(x + h * e, t) - u(x - h * e, t)) / (2 * h) for e in np.eye(3)])
    sig = case.cross_sections
    ku = scattering_integral(case, x, s, t)
    f = float(case.source(x, s, t))
    return dudt + float(np.dot(s, grad)) + sig.sigma_t * u(x, t) - sig.sigma_s * ku - f


# --- convergence study -------------------------------------------------------

@dataclass
class ConvergenceRow:
    level: int
    n_x: int
    n_s: int
    l2_final: float | None
    l2_time: float | None
    order_final: float | None = None
    order_time: float | None = None
    stable: bool | None = None


@dataclass
class ConvergenceTable:
    case: str
    rows: list = field(default_factory=list)

    def fill_orders(self):
        for key in ("final", "time"):
            vals = orders([getattr(r, f"l2_{key}") for r in self.rows])
            for r, o in zip(self.rows, vals):
                setattr(r, f"order_{key}", o)
            # orders only between consecutive levels
            for i, r in enumerate(self.rows):
                if i > 0 and self.rows[i - 1].level != r.level - 1:
                    setattr(r, f"order_{key}", None)
        return self

    HEADER = ["level", "N_x", "N_s", "l2_final", "order_final", "l2_time", "order_time"]

    def as_records(self):
        fmt = lambda v, f: "" if v is None else format(v, f)  # noqa: E731
        return [[r.level, r.n_x, r.n_s, fmt(r.l2_final, ".4e"), fmt(r.order_final, ".4f"),
                 fmt(r.l2_time, ".4e"), fmt(r.order_time, ".4f")] for r in self.rows]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.HEADER)
            w.writerows(self.as_records())

    def format(self):
        lines = ["{:>5} {:>6} {:>6} {:>11} {:>7} {:>11} {:>7}".format(*self.HEADER)]
        for rec in self.as_records():
            lines.append("{:>5} {:>6} {:>6} {:>11} {:>7} {:>11} {:>7}".format(*rec))
        return "\n".join(lines)


@dataclass
class LevelRun:
    level: int
    solver: SplittingSolver
    step_errors: list
    final_error: float
    time_error: float
    stable: bool


def run_level(case, level, angular_refine=0, parallelism=1, cache_factorizations=True,
              policy=None, stream=None):
    problem = problem_for(case, level, policy=policy)
    sv = SplittingSolver(problem, parallelism=parallelism, cache_factorizations=cache_factorizations)
    ev = ErrorEvaluator(sv.spatial, sv.angular, angular_refine)
    result = sv.run(observer=lambda step, t, fld: ev.error(fld.spatial_major(), case.exact, t),
                    stream=stream)
    errs = result.observations
    holds, _ = stability_bound(result, sv.dt, problem.T, float(sv.comp.deltas.max()))
    return LevelRun(level, sv, errs, errs[-1], time_accumulated_error(errs, sv.dt), holds)


def convergence_study(case, levels, angular_refine=0, parallelism=1, cache_factorizations=True,
                      policy=None, on_level=None):
    table = ConvergenceTable(case.name)
    for level in levels:
        run_ = run_level(case, level, angular_refine, parallelism, cache_factorizations, policy)
        table.rows.append(ConvergenceRow(level, run_.solver.n_x, run_.solver.n_s,
                                         run_.final_error, run_.time_error, stable=run_.stable))
        if on_level is not None:
            on_level(run_)
    return table.fill_orders()
