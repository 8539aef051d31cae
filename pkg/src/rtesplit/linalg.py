"""Thin wrappers over SciPy factorizations with explicit residual contracts."""

import warnings

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalError


def as_csr(A):
    """CSR copy with sorted, de-duplicated column indices."""
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    return A


def _relres(A, x, b):
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return r / nb if nb > 0 else r


class SparseFactorization:
    """Sparse LU of a general square matrix, reused across right-hand sides."""

    def __init__(self, A, tol=1e-10):
        self.A = as_csr(A)
        if self.A.shape[0] != self.A.shape[1]:
            raise ValueError(f"matrix must be square, got {self.A.shape}")
        self.tol = tol
        try:
            self._lu = spla.splu(self.A.tocsc())
        except RuntimeError as exc:
            raise NumericalError(f"sparse LU failed: {exc}") from exc

    @property
    def shape(self):
        return self.A.shape

    def solve(self, b, check=True):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.A.shape[0]:
            raise ValueError(f"rhs length {b.shape[0]} != matrix size {self.A.shape[0]}")
        x = self._lu.solve(b)
        if check:
            res = _relres(self.A, x, b)
            if not res <= self.tol:
                raise NumericalError(f"sparse solve residual {res:.3e} exceeds {self.tol:.1e}")
        return x

    def residual(self, x, b):
        return _relres(self.A, x, b)


def sparse_solve(A, b, tol=1e-10):
    return SparseFactorization(A, tol).solve(b)


class DenseFactorization:
    def __init__(self, A):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        self.A = A
        self.n = A.shape[0]
        with warnings.catch_warnings():
            # a zero pivot is reported below as NumericalError instead
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
        if np.any(np.diag(lu) == 0.0):
            raise NumericalError(
                f"singular matrix (condition number {np.linalg.cond(A):.3e})")
        self._lu = (lu, piv)

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"rhs length {b.shape[0]} != matrix size {self.n}")
        return scipy.linalg.lu_solve(self._lu, b)


def dense_factor(A):
    return DenseFactorization(A)
