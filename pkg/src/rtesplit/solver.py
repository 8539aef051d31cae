"""Lie splitting time loop: angular sweep, transpose, transport sweep.

One step from t^n to t^{n+1} = t^n + dt:

1. angular sweep, per spatial node k:  M_s u~_k = M1 u_k;
2. transpose the coefficient array to direction-major;
3. transport sweep, per direction l:
   (B_l + dt C_l) u_l = dt (F_l + F^d_l) + B_l u~_l, with B_l = M + M^d(s_l),
   C_l = A(s_l) + A^d(s_l) and zero values forced on the inflow nodes of s_l;
4. transpose back.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .angular_mesh import build_angular_mesh
from .errors import ConfigurationError, NumericalError, ResourceLimitError
from .linalg import SparseFactorization
from .scattering import CrossSections, PhaseFunction, build_angular_operators
from .spatial_mesh import build_spatial_mesh, classify_boundary
from .transport_assembly import (StabilizationPolicy, apply_dirichlet_rows,
                                 assemble_spatial_components, convection_data,
                                 evaluate_on_load_points, rhs_mass_data)

log = logging.getLogger(__name__)

ANGULAR_MAJOR = "angular-major"
SPATIAL_MAJOR = "spatial-major"

MONOLITHIC_GUARD = 10_000

# bound on directions x load points evaluated at once
_LOAD_CHUNK = 4_000_000


@dataclass
class SolutionField:
    """Coefficients u[i, l] for angular cell i and spatial node l.

    ``data`` has shape (N_x, N_s) in angular-major layout (row k is the
    angular vector of node k) and (N_s, N_x) in spatial-major layout.
    """

    data: np.ndarray
    layout: str

    def __post_init__(self):
        if self.layout not in (ANGULAR_MAJOR, SPATIAL_MAJOR):
            raise ValueError(f"unknown layout {self.layout!r}")

    @property
    def n_s(self):
        return self.data.shape[1] if self.layout == ANGULAR_MAJOR else self.data.shape[0]

    @property
    def n_x(self):
        return self.data.shape[0] if self.layout == ANGULAR_MAJOR else self.data.shape[1]

    def spatial_major(self):
        """(N_s, N_x) array regardless of layout."""
        return self.data if self.layout == SPATIAL_MAJOR else self.data.T

    def copy(self):
        return SolutionField(self.data.copy(), self.layout)


def transpose_layout(field):
    other = SPATIAL_MAJOR if field.layout == ANGULAR_MAJOR else ANGULAR_MAJOR
    return SolutionField(np.ascontiguousarray(field.data.T), other)


def tensor_norm(U, M1, comp):
    """Discrete L2 norm over space and angle of a (N_s, N_x) coefficient array."""
    MU = (comp.mass @ U.T).T
    return math.sqrt(max(float(np.dot(M1, np.einsum("ij,ij->i", U, MU))), 0.0))


@dataclass
class ModelProblem:
    angular_level: int
    n: int
    cross_sections: CrossSections = field(default_factory=CrossSections)
    phase: PhaseFunction = field(default_factory=PhaseFunction)
    source: object = None  # f(x, s, t), broadcasting over leading axes
    initial: object = None  # u0(x, s)
    T: float = 1.0
    dt: float | None = None  # defaults to the axis spacing 1/(n-1)
    policy: StabilizationPolicy = field(default_factory=StabilizationPolicy)

    @property
    def time_step(self):
        return self.dt if self.dt is not None else 1.0 / (self.n - 1)

    @property
    def n_steps(self):
        return int(round(self.T / self.time_step))

    def validate(self, spatial_mesh=None):
        dt = self.time_step
        if not dt > 0:
            raise ConfigurationError(f"time step must be positive, got {dt}")
        if dt > 0.5:
            raise ConfigurationError(f"time step violates Δt ≤ 1/2 (dt <= 1/2): dt = {dt}")
        steps = self.T / dt
        if abs(steps - round(steps)) > 1e-12 * max(1.0, steps) or round(steps) < 1:
            raise ConfigurationError(f"dt = {dt} does not divide T = {self.T}")
        if spatial_mesh is not None:
            self.policy.check(spatial_mesh, dt)


@dataclass
class StepDiagnostics:
    step: int
    t: float
    norm: float  # ||u^{n}||_0 after the step
    norm_tilde: float  # ||u~^{n}||_0 after the angular sweep
    source_norm_sq: float  # ||f^{n}||_0^2 by the load quadrature
    residual: float  # largest relative residual of the transport solves

    def line(self):
        return f"{self.step} {self.t:.12g} {self.norm:.12e} {self.residual:.3e}"


@dataclass
class RunResult:
    final: SolutionField
    diagnostics: list
    initial_norm: float
    history: list = field(default_factory=list)
    observations: list = field(default_factory=list)


class SplittingSolver:
    """Holds meshes, assembled operators and cached per-direction factorizations."""

    def __init__(self, problem, parallelism=1, cache_factorizations=True, tol=1e-10,
                 spatial_mesh=None, angular_mesh=None):
        self.problem = problem
        self.spatial = spatial_mesh or build_spatial_mesh(problem.n)
        self.angular = angular_mesh or build_angular_mesh(problem.angular_level)
        problem.validate(self.spatial)
        self.dt = problem.time_step
        self.parallelism = max(1, int(parallelism))
        self.cache_factorizations = cache_factorizations
        self.tol = tol
        self.ops = build_angular_operators(self.angular, problem.phase, problem.cross_sections, self.dt)
        self.comp = assemble_spatial_components(self.spatial, problem.policy, self.dt)
        self.directions = self.angular.centers
        self.boundaries = [classify_boundary(self.spatial, s) for s in self.directions]
        self._factors = {}

    @property
    def n_s(self):
        return self.angular.n_cells

    @property
    def n_x(self):
        return self.spatial.n_nodes

    def step2_matrix(self, l):
        s = self.directions[l]
        data = rhs_mass_data(self.comp, s) + self.dt * convection_data(self.comp, s)
        apply_dirichlet_rows(self.comp, data, self.boundaries[l].inflow_nodes)
        return self.comp.matrix(data)

    def factorization(self, l):
        fact = self._factors.get(l)
        if fact is None:
            fact = SparseFactorization(self.step2_matrix(l), self.tol)
            if self.cache_factorizations:
                self._factors[l] = fact
        return fact

    def norm(self, U):
        return tensor_norm(U, self.ops.M1, self.comp)

    def initial_field(self):
        u0 = self.problem.initial
        if u0 is None:
            U = np.zeros((self.n_s, self.n_x))
        else:
            U = np.broadcast_to(u0(self.spatial.nodes[None, :, :], self.directions[:, None, :]),
                                (self.n_s, self.n_x)).astype(float)
        return SolutionField(np.ascontiguousarray(U.T), ANGULAR_MAJOR)

    def _map(self, fn, items):
        if self.parallelism == 1 or len(items) < 2:
            return [fn(i) for i in items]
        with ThreadPoolExecutor(self.parallelism) as pool:
            return list(pool.map(fn, items))

    def _chunks(self, n, size):
        return [range(i, min(i + size, n)) for i in range(0, n, size)]

    def angular_sweep(self, field):
        if field.layout != ANGULAR_MAJOR:
            raise ValueError("angular sweep needs an angular-major field")
        data = field.data
        out = np.empty_like(data)
        size = max(1, -(-len(data) // self.parallelism))

        def work(rows):
            sl = slice(rows.start, rows.stop)
            out[sl] = self.ops.step1.solve(data[sl].T).T

        self._map(work, self._chunks(len(data), size))
        return SolutionField(out, ANGULAR_MAJOR)

    def loads(self, t, directions):
        """dt-free load F + F^d for a subset of directions, inflow entries zeroed."""
        comp = self.comp
        S = self.directions[directions]
        vals = np.ascontiguousarray(evaluate_on_load_points(comp, self.problem.source, S, t))
        F = (comp.P @ vals.T).T
        for a in range(3):
            F += S[:, a, None] * (comp.Pd[a] @ vals.T).T
        wq = np.asarray(comp.P.sum(axis=0)).ravel()  # volume-weighted rule weights
        fnorm = float(np.dot(self.angular.areas[directions], (vals**2) @ wq))
        return F, fnorm

    def transport_sweep(self, field, t_new):
        if field.layout != SPATIAL_MAJOR:
            raise ValueError("transport sweep needs a spatial-major field")
        comp, dt = self.comp, self.dt
        Ut = field.data
        S = self.directions
        BU = (comp.mass @ Ut.T).T
        for a in range(3):
            BU += S[:, a, None] * (comp.matrix(comp.Md[a]) @ Ut.T).T
        rhs = BU
        fnorm = 0.0
        if self.problem.source is not None:
            per = max(1, _LOAD_CHUNK // len(comp.load_points))
            for rows in self._chunks(self.n_s, per):
                idx = np.arange(rows.start, rows.stop)
                F, fn = self.loads(t_new, idx)
                rhs[idx] += dt * F
                fnorm += fn
        out = np.empty_like(rhs)
        residuals = np.zeros(self.n_s)

        def work(rows):
            for l in rows:
                b = rhs[l]
                b[self.boundaries[l].inflow_nodes] = 0.0
                fact = self.factorization(l)
                try:
                    out[l] = fact.solve(b, check=False)
                except RuntimeError as exc:
                    raise NumericalError(f"transport solve failed for direction {l}: {exc}") from exc
                residuals[l] = fact.residual(out[l], b)
                if not residuals[l] <= self.tol:
                    raise NumericalError(
                        f"transport solve for direction {l} has residual {residuals[l]:.3e}")

        size = max(1, -(-self.n_s // self.parallelism))
        self._map(work, self._chunks(self.n_s, size))
        self._last_fnorm = fnorm
        self._last_residual = float(residuals.max()) if len(residuals) else 0.0
        return SolutionField(out, SPATIAL_MAJOR)

    def advance(self, field, step):
        """One splitting step from t^{step-1} to t^{step}; returns (field, diagnostics)."""
        t_new = step * self.dt
        tilde = self.angular_sweep(field)
        tilde_sm = transpose_layout(tilde)
        norm_tilde = self.norm(tilde_sm.data)
        new = self.transport_sweep(tilde_sm, t_new)
        diag = StepDiagnostics(step, t_new, self.norm(new.data), norm_tilde,
                               self._last_fnorm, self._last_residual)
        return transpose_layout(new), diag

    def run(self, observer=None, store_history=False, stream=None):
        """Run all steps; ``observer(step, t, field)`` sees each new state."""
        field = self.initial_field()
        result = RunResult(field, [], self.norm(field.spatial_major()))
        if store_history:
            result.history.append(field.copy())
        for step in range(1, self.problem.n_steps + 1):
            field, diag = self.advance(field, step)
            result.diagnostics.append(diag)
            if stream is not None:
                stream.write(diag.line() + "\n")
            log.debug("step %d t=%.4g |u|=%.6e", step, diag.t, diag.norm)
            if store_history:
                result.history.append(field.copy())
            if observer is not None:
                result.observations.append(observer(step, diag.t, field))
        result.final = field
        return result


def run(problem, **kwargs):
    opts = {k: kwargs.pop(k) for k in ("parallelism", "cache_factorizations", "tol") if k in kwargs}
    return SplittingSolver(problem, **opts).run(**kwargs)


def stability_bound(result, dt, T, delta):
    """Check ||u^n||^2 <= e^{2T} (||u^0||^2 + 2 dt (1 + 4 delta dt) sum ||f^{m+1}||^2).

    Returns (holds, list of (lhs, rhs) per step).
    """
    pairs = []
    acc = 0.0
    for d in result.diagnostics:
        acc += d.source_norm_sq
        rhs = math.exp(2 * T) * (result.initial_norm**2 + 2 * dt * (1 + 4 * delta * dt) * acc)
        pairs.append((d.norm**2, rhs))
    return all(l <= r for l, r in pairs), pairs


def monolithic_reference_solve(problem, store_history=False, solver=None):
    """Unsplit backward Euler on the full (N_s * N_x) system.

    Uses the element matrices of the split scheme.  Every term is tested
    with the streamline-augmented test function, so the removal operator
    (sigma_t M1 - sigma_s M2) couples direction l to direction j through
    the SUPG mass B_l of the test direction.  Returns (final spatial-major
    array, history list).
    """
    sv = solver or SplittingSolver(problem)
    ns, nx = sv.n_s, sv.n_x
    if ns * nx > MONOLITHIC_GUARD:
        raise ResourceLimitError(
            f"monolithic system size {ns * nx} exceeds guard {MONOLITHIC_GUARD}")
    comp, dt, M1 = sv.comp, sv.dt, sv.ops.M1
    sig = problem.cross_sections
    removal = sig.sigma_t * np.diag(M1) - sig.sigma_s * sv.ops.M2
    blocks_lhs, blocks_mass, coupling = [], [], []
    for l, s in enumerate(sv.directions):
        B = comp.matrix(rhs_mass_data(comp, s))
        C = comp.matrix(convection_data(comp, s))
        blocks_lhs.append(M1[l] * (B + dt * C))
        blocks_mass.append(M1[l] * B)
        coupling.append(sp.kron(removal[l:l + 1, :], B, format="csr"))
    big = sp.block_diag(blocks_lhs, format="csr") + dt * sp.vstack(coupling, format="csr")
    mass = sp.block_diag(blocks_mass, format="csr")
    inflow = np.concatenate([l * nx + b.inflow_nodes for l, b in enumerate(sv.boundaries)])
    big = big.tolil()
    big[inflow, :] = 0.0
    big[inflow, inflow] = 1.0
    fact = SparseFactorization(big.tocsr(), sv.tol)

    U = sv.initial_field().spatial_major().copy()
    history = [U.copy()] if store_history else []
    for step in range(1, problem.n_steps + 1):
        rhs = mass @ U.ravel()
        if problem.source is not None:
            F, _ = sv.loads(step * dt, np.arange(ns))
            rhs += dt * (M1[:, None] * F).ravel()
        rhs[inflow] = 0.0
        U = fact.solve(rhs).reshape(ns, nx)
        if store_history:
            history.append(U.copy())
    return U, history
