"""Dense linear algebra: pseudoinverses, PSD square roots and KKT solves.

All routines are pure functions of their inputs. Singular values and
eigenvalues below ``RANK_RTOL`` times the largest one are treated as zero.
"""

import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.linalg import null_space

from lsysinfer.core.errors import InfeasibleError, InputError
from lsysinfer.core.types import Matrix, Vector, as_matrix, as_vector

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-10
NEGATIVE_EIGEN_RTOL = 1e-8
SYMMETRY_RTOL = 1e-10
KKT_RESIDUAL_TOL = 1e-6


class SpectralFactorization(BaseModel):
    """Eigendecomposition M = V diag(w) V' of a symmetric matrix, w descending."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    eigenvalues: Vector
    eigenvectors: Matrix
    tolerance: float

    @property
    def rank(self) -> int:
        return int(np.sum(np.abs(self.eigenvalues) > self.tolerance))

    def truncated(self) -> np.ndarray:
        """Eigenvalues with the sub-tolerance ones set to exactly zero."""
        w = self.eigenvalues.copy()
        w[np.abs(w) <= self.tolerance] = 0.0
        return w

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T


def _check_symmetric(M: np.ndarray) -> None:
    if M.shape[0] != M.shape[1]:
        raise InputError(f"expected a square matrix, got shape {M.shape}")
    scale = 1.0 + (np.max(np.abs(M)) if M.size else 0.0)
    if M.size and np.max(np.abs(M - M.T)) > SYMMETRY_RTOL * scale:
        raise InputError("matrix is not symmetric")


def spectral(M: np.ndarray) -> SpectralFactorization:
    """Symmetric eigendecomposition with eigenvalues in descending order."""
    M = as_matrix(M)
    _check_symmetric(M)
    if M.shape[0] == 0:
        return SpectralFactorization(eigenvalues=np.zeros(0), eigenvectors=M, tolerance=0.0)
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    tolerance = RANK_RTOL * max(float(np.max(np.abs(w))), 0.0)
    return SpectralFactorization(eigenvalues=w, eigenvectors=V, tolerance=tolerance)


def _svd(M: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD plus a mask of the singular values kept by the rank cutoff."""
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = s > RANK_RTOL * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, dtype=bool)
    return U, s, Vt, keep


def matrix_rank(M: np.ndarray) -> int:
    M = as_matrix(M)
    if M.size == 0:
        return 0
    return int(np.sum(_svd(M)[3]))


def full_row_rank(A: np.ndarray) -> bool:
    """True in the d >= p, rank(A) = p regime where Ax ranges over all of R^p."""
    A = as_matrix(A)
    p, d = A.shape
    return d >= p and matrix_rank(A) == p


def pseudoinverse_apply(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Return M†b, the minimum-norm least-squares solution of Mx = b."""
    M = as_matrix(M)
    b = as_vector(b)
    if M.shape[0] != b.shape[0]:
        raise InputError(f"dimension mismatch: matrix has {M.shape[0]} rows, vector has {b.size}")
    if M.size == 0:
        return np.zeros(M.shape[1])
    U, s, Vt, keep = _svd(M)
    coef = np.zeros_like(s)
    coef[keep] = (U[:, keep].T @ b) / s[keep]
    return Vt.T @ coef


def pseudoinverse(M: np.ndarray) -> np.ndarray:
    """Materialized Moore-Penrose pseudoinverse (same cutoff as pseudoinverse_apply)."""
    M = as_matrix(M)
    if M.size == 0:
        return np.zeros((M.shape[1], M.shape[0]))
    U, s, Vt, keep = _svd(M)
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def range_project(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Orthogonal projection of v onto range(M)."""
    M = as_matrix(M)
    v = as_vector(v)
    if M.shape[0] != v.size:
        raise InputError(f"dimension mismatch: matrix has {M.shape[0]} rows, vector has {v.size}")
    if M.size == 0:
        return np.zeros_like(v)
    U, _, _, keep = _svd(M)
    basis = U[:, keep]
    return basis @ (basis.T @ v)


def kernel_basis(M: np.ndarray) -> np.ndarray:
    """Orthonormal basis of ker(M) as columns, with none when M is nonsingular.

    For symmetric M these columns span the complement of range(M).
    """
    M = as_matrix(M)
    if M.size == 0:
        return np.zeros((M.shape[1], 0))
    return null_space(M, rcond=RANK_RTOL)


def free_kernel(M: np.ndarray, pinned: Optional[np.ndarray] = None) -> np.ndarray:
    """Kernel basis of the principal block of M on the coordinates not ``pinned``.

    The basis vectors are embedded back into R^p with zeros on the pinned
    coordinates. Without a mask this is ``kernel_basis(M)``.
    """
    M = as_matrix(M)
    p = M.shape[0]
    if pinned is None:
        return kernel_basis(M)
    pinned = np.asarray(pinned, dtype=bool).reshape(-1)
    if pinned.size != p:
        raise InputError(f"pinned mask has {pinned.size} entries, expected {p}")
    free = np.flatnonzero(~pinned)
    basis = np.zeros((p, 0))
    if free.size:
        block = kernel_basis(M[np.ix_(free, free)])
        basis = np.zeros((p, block.shape[1]))
        basis[free] = block
    return basis


def _clamped_spectrum(M: np.ndarray) -> SpectralFactorization:
    fact = spectral(M)
    if fact.eigenvalues.size == 0:
        return fact
    scale = float(np.max(np.abs(fact.eigenvalues)))
    if fact.eigenvalues[-1] < -NEGATIVE_EIGEN_RTOL * scale:
        raise InputError(
            f"matrix is not positive semidefinite (eigenvalue {fact.eigenvalues[-1]:.3e}); "
            "the covariance estimate is broken"
        )
    w = np.maximum(fact.truncated(), 0.0)
    return SpectralFactorization(
        eigenvalues=w, eigenvectors=fact.eigenvectors, tolerance=fact.tolerance
    )


def psd_sqrt(M: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root S with S @ S = M and range(S) = range(M)."""
    fact = _clamped_spectrum(M)
    if fact.eigenvalues.size == 0:
        return np.zeros((0, 0))
    V = fact.eigenvectors
    return (V * np.sqrt(fact.eigenvalues)) @ V.T


def psd_pinv_sqrt(M: np.ndarray) -> np.ndarray:
    """Pseudoinverse of psd_sqrt(M)."""
    fact = _clamped_spectrum(M)
    if fact.eigenvalues.size == 0:
        return np.zeros((0, 0))
    w = fact.eigenvalues
    inv = np.zeros_like(w)
    positive = w > 0
    inv[positive] = 1.0 / np.sqrt(w[positive])
    V = fact.eigenvectors
    return (V * inv) @ V.T


def kkt_solve(Q: np.ndarray, c: np.ndarray, E: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Minimize x'Qx - 2c'x subject to Ex = f.

    Solves the block system [[2Q, E'], [E, 0]] [x; mu] = [2c; f] in the
    minimum-norm sense. Any minimizer is acceptable; the returned one attains
    the minimal objective and satisfies the constraints.

    Raises:
        InputError: On non-conforming shapes.
        InfeasibleError: If Ex = f has no solution.
    """
    Q = as_matrix(Q)
    c = as_vector(c)
    d = c.size
    E = as_matrix(E, cols=d)
    f = np.asarray(f, dtype=float).reshape(-1)
    if Q.shape != (d, d):
        raise InputError(f"Q must be {d}x{d}, got {Q.shape}")
    if E.shape[1] != d or E.shape[0] != f.size:
        raise InputError(f"constraint block has shape {E.shape} and rhs length {f.size}")
    _check_symmetric(Q)

    m = E.shape[0]
    K = np.zeros((d + m, d + m))
    K[:d, :d] = 2.0 * Q
    K[:d, d:] = E.T
    K[d:, :d] = E
    rhs = np.concatenate([2.0 * c, f])
    x = pseudoinverse_apply(K, rhs)[:d]

    if m:
        residual = float(np.max(np.abs(E @ x - f)))
        if residual > KKT_RESIDUAL_TOL:
            raise InfeasibleError(f"inconsistent equality constraints (residual {residual:.3e})")
    return x
