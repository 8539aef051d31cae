"""Phase functions, cross sections and the angular (Step-1) operators.

With the DG(0) angular basis the mass matrix is diagonal with the cell
areas, and the scattering matrix uses the cell-center rule on both
integrals: ``M2[i, j] = Phi(s_i, s_j) |K_i| |K_j|``.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import dense_factor

FOUR_PI = 4.0 * np.pi

ISOTROPIC = "isotropic"
LINEAR = "linear"
HENYEY_GREENSTEIN = "hg"


@dataclass(frozen=True)
class PhaseFunction:
    """Scattering kernel depending only on the cosine s.s'.

    ``linear`` is (1 + s.s')/(4 pi); ``hg`` is Henyey-Greenstein with
    anisotropy ``eta``.  All kinds integrate to one over the sphere.
    """

    kind: str = ISOTROPIC
    eta: float = 0.0

    def __post_init__(self):
        if self.kind not in (ISOTROPIC, LINEAR, HENYEY_GREENSTEIN):
            raise ValueError(f"unknown phase function kind {self.kind!r}")
        if self.kind == HENYEY_GREENSTEIN and not -1.0 < self.eta < 1.0:
            raise ValueError(f"anisotropy factor must satisfy η ∈ (-1, 1), got eta = {self.eta}")

    @classmethod
    def isotropic(cls):
        return cls(ISOTROPIC)

    @classmethod
    def linear(cls):
        return cls(LINEAR)

    @classmethod
    def henyey_greenstein(cls, eta):
        return cls(HENYEY_GREENSTEIN, eta)

    def of_cosine(self, mu):
        mu = np.asarray(mu, dtype=float)
        if self.kind == ISOTROPIC:
            return np.full_like(mu, 1.0 / FOUR_PI)
        if self.kind == LINEAR:
            return (1.0 + mu) / FOUR_PI
        e = self.eta
        return (1.0 - e * e) / (1.0 + e * e - 2.0 * e * mu) ** 1.5 / FOUR_PI

    def mean_cosine(self):
        return {ISOTROPIC: 0.0, LINEAR: 1.0 / 3.0, HENYEY_GREENSTEIN: self.eta}[self.kind]


def phase_eval(phase, s, sp):
    s = np.asarray(s, dtype=float)
    sp = np.asarray(sp, dtype=float)
    for v in (s, sp):
        if np.any(np.abs(np.linalg.norm(v, axis=-1) - 1.0) > 1e-10):
            raise ValueError("phase function arguments must be unit vectors")
    mu = np.clip(np.einsum("...i,...i->...", s, sp), -1.0, 1.0)
    return phase.of_cosine(mu)


@dataclass(frozen=True)
class CrossSections:
    sigma_t: float = 2.0
    sigma_s: float = 0.5

    def __post_init__(self):
        if self.sigma_s < 0:
            raise ValueError(f"scattering coefficient must be non-negative, got {self.sigma_s}")
        if self.sigma_a < 0:
            raise ValueError(
                f"absorption sigma_a = sigma_t - sigma_s must be non-negative, got {self.sigma_a}")
        if self.sigma_a < 0.125:
            warnings.warn(
                f"sigma_a = {self.sigma_a} is below 1/8; the convergence estimates assume sigma_a >= 1/8",
                stacklevel=3)

    @property
    def sigma_a(self):
        return self.sigma_t - self.sigma_s


def kernel_matrix(mesh, phase):
    mu = np.clip(mesh.centers @ mesh.centers.T, -1.0, 1.0)
    return phase.of_cosine(mu)


def assemble_angular_mass(mesh):
    """Diagonal of the DG(0) angular mass matrix (the cell areas)."""
    return np.array(mesh.areas, dtype=float)


def assemble_scattering_matrix(mesh, phase):
    a = mesh.areas
    M2 = kernel_matrix(mesh, phase) * a[:, None] * a[None, :]
    # the cosine matrix is symmetric up to rounding; make M2 exactly so
    return 0.5 * (M2 + M2.T)


def apply_scattering(mesh, phase, v):
    v = np.asarray(v, dtype=float)
    if v.shape[0] != mesh.n_cells:
        raise ValueError(f"vector length {v.shape[0]} != number of angular cells {mesh.n_cells}")
    w = v * mesh.areas.reshape((-1,) + (1,) * (v.ndim - 1))
    return kernel_matrix(mesh, phase) @ w


def normalization_defect(mesh, phase):
    """Row sums of M1^{-1} M2 minus one."""
    return kernel_matrix(mesh, phase) @ mesh.areas - 1.0


def scattering_norm_bound(M1, M2):
    """Upper bound for the M1-norm of M1^{-1} M2 (largest row sum, Schur test).

    M2 is symmetric with non-negative entries, so with weights M1 the row
    sums of M1^{-1} |M2| bound the operator norm.
    """
    return float((np.abs(M2).sum(axis=1) / M1).max())


class Step1System:
    """Factored ``M1 + dt*sigma_t*M1 - dt*sigma_s*M2`` for the angular sweep."""

    def __init__(self, M1, M2, sigma, dt):
        if dt <= 0:
            raise ValueError(f"time step must be positive, got {dt}")
        self.M1 = np.asarray(M1, dtype=float)
        self.dt = dt
        self.matrix = (np.diag(self.M1 * (1.0 + dt * sigma.sigma_t)) - dt * sigma.sigma_s * M2)
        self.scattering_bound = scattering_norm_bound(self.M1, M2)
        if sigma.sigma_s * self.scattering_bound > sigma.sigma_t * (1 + 1e-12):
            warnings.warn(
                f"discrete scattering operator bound {self.scattering_bound:.3f} exceeds "
                f"sigma_t/sigma_s = {sigma.sigma_t / max(sigma.sigma_s, 1e-300):.3f}; the angular "
                "step is not guaranteed to decrease the norm (refine the sphere mesh)",
                stacklevel=2)
        self._fact = dense_factor(self.matrix)

    def solve(self, u):
        """Angular update for columns of ``u`` (shape (N_s,) or (N_s, k))."""
        rhs = u * self.M1.reshape((-1,) + (1,) * (np.ndim(u) - 1))
        return self._fact.solve(rhs)


def build_step1_system(M1, M2, sigma, dt):
    return Step1System(M1, M2, sigma, dt)


@dataclass(frozen=True)
class AngularOperators:
    M1: np.ndarray
    M2: np.ndarray
    step1: Step1System


def build_angular_operators(mesh, phase, sigma, dt):
    M1 = assemble_angular_mass(mesh)
    M2 = assemble_scattering_matrix(mesh, phase)
    return AngularOperators(M1, M2, build_step1_system(M1, M2, sigma, dt))
