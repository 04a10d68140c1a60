"""Dense linear-algebra kernels sized for desk-scale matrices (dim <= ~2000).

Matrices are C-order (row-major) float64 numpy arrays throughout the
package.  Factorizations are backed by LAPACK through numpy; the wrappers
here add the symmetry/definiteness checks and error reporting the rest of
the package relies on.  The repo-wide random generator is numpy's seeded
PCG64 via :func:`make_rng`; Gaussians come from ``standard_normal`` and
log-normal draws are taken as ``exp(s * standard_normal())``.
"""

from __future__ import annotations

import io
from typing import TextIO

import numpy as np

from . import _kernels

SYM_RTOL = 1e-10


class NotPositiveDefiniteError(ValueError):
    """Raised when a Cholesky factorization hits a non-positive pivot."""

    def __init__(self, pivot: int):
        self.pivot = pivot
        super().__init__(f"matrix not positive definite (pivot {pivot})")


class RankDeficientError(ValueError):
    pass


class AsymmetricMatrixError(ValueError):
    pass


class SingularMatrixError(ValueError):
    pass


class EigenConvergenceError(RuntimeError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    """The repo-wide seeded generator (PCG64)."""
    return np.random.default_rng(seed)


def _as_matrix(M) -> np.ndarray:
    M = np.ascontiguousarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={M.ndim}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def symmetrize(M) -> np.ndarray:
    """Check symmetry to tolerance and return (M + M^T)/2.

    Inputs assembled from solver caches carry roundoff asymmetry; anything
    beyond ``SYM_RTOL`` relative in the max norm is treated as a bug in the
    caller and raised.
    """
    M = _as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise ValueError("matrix is not square")
    scale = np.abs(M).max()
    asym = np.abs(M - M.T).max()
    if asym > SYM_RTOL * max(scale, 1.0):
        raise AsymmetricMatrixError(
            f"matrix is not symmetric: max asymmetry {asym:.3e} vs scale {scale:.3e}"
        )
    return 0.5 * (M + M.T)


def cholesky(M) -> np.ndarray:
    """Lower-triangular L with L L^T = M for symmetric positive-definite M."""
    M = symmetrize(M)
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        pivot = _kernels.chol_pivot(M)
        raise NotPositiveDefiniteError(int(pivot)) from None


def qr(M) -> tuple[np.ndarray, np.ndarray]:
    """Full QR: returns (Q, R) with Q square orthogonal, R (rows x cols) upper.

    Raises RankDeficientError when a diagonal entry of R underflows the
    rank tolerance; callers in this package all require full column rank.
    """
    M = _as_matrix(M)
    Q, R = np.linalg.qr(M, mode="complete")
    k = min(M.shape)
    diag = np.abs(np.diag(R)[:k])
    tol = max(M.shape) * np.finfo(np.float64).eps * (diag.max() if k else 0.0)
    if k == 0 or np.any(diag <= tol):
        raise RankDeficientError("matrix is rank deficient")
    return Q, R


def qr_split(M) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """QR of an m x l matrix split as (Q, P, R): Q the first l columns of the
    full orthogonal factor, P the orthogonal complement, R the square factor."""
    m, l = M.shape
    Qfull, R = qr(M)
    return Qfull[:, :l], Qfull[:, l:], R[:l, :l]


def sym_eig(M) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix: ascending values, orthonormal vectors."""
    M = symmetrize(M)
    try:
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as e:
        raise EigenConvergenceError(str(e)) from None
    return w, V


def gen_eig(M, want_vectors: bool = True) -> tuple[np.ndarray, np.ndarray | None]:
    """Eigenvalues (and unit-norm eigenvectors) of a general square real matrix.

    Values are sorted by (real, imag); complex values of a real matrix come
    in exact conjugate pairs.  Eigenvector columns are normalized to unit
    2-norm so downstream conditioning measures are well defined.
    """
    M = _as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise ValueError("matrix is not square")
    try:
        if want_vectors:
            w, V = np.linalg.eig(M)
        else:
            w = np.linalg.eigvals(M)
            V = None
    except np.linalg.LinAlgError as e:
        raise EigenConvergenceError(str(e)) from None
    order = np.lexsort((w.imag, w.real))
    w = w[order]
    if V is not None:
        V = V[:, order]
        V = V / np.linalg.norm(V, axis=0, keepdims=True)
    return w, V


def spectral_norm(M) -> float:
    """2-norm via the top eigenvalue of M^T M (no SVD)."""
    M = _as_matrix(M)
    if M.size == 0:
        return 0.0
    gram = M.T @ M
    w, _ = sym_eig(0.5 * (gram + gram.T))
    return float(np.sqrt(max(w[-1], 0.0)))


def frobenius_norm(M) -> float:
    return float(np.linalg.norm(_as_matrix(M)))


def condition_2(M) -> float:
    """2-norm condition number; accepts complex input (uses M^H M)."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix is not square")
    gram = M.conj().T @ M
    gram = 0.5 * (gram + gram.conj().T)
    w = np.linalg.eigvalsh(gram)
    lo, hi = float(w[0]), float(w[-1])
    if lo <= hi * np.finfo(np.float64).eps ** 2 or hi == 0.0:
        raise SingularMatrixError("matrix is singular to working precision")
    return float(np.sqrt(hi / lo))


def haar_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
    R-diagonal sign correction."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    G = rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def lognormal_draws(count: int, s: float, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. samples exp(s * g), g standard normal; s = 0 collapses to 1."""
    return np.exp(s * rng.standard_normal(count))


def write_matrix(f: TextIO | str, M) -> None:
    """Text format: one header line "rows cols", then rows of entries with
    full round-trip precision (17 significant digits)."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if isinstance(f, str):
        with open(f, "w") as fh:
            write_matrix(fh, M)
        return
    f.write(f"{M.shape[0]} {M.shape[1]}\n")
    for row in M:
        f.write(" ".join(f"{v:.17e}" for v in row))
        f.write("\n")


def read_matrix(f: TextIO | str) -> np.ndarray:
    if isinstance(f, str):
        with open(f) as fh:
            return read_matrix(fh)
    header = f.readline().split()
    rows, cols = int(header[0]), int(header[1])
    data = np.empty((rows, cols))
    for i in range(rows):
        vals = f.readline().split()
        if len(vals) != cols:
            raise ValueError(f"row {i}: expected {cols} entries, got {len(vals)}")
        data[i] = [float(v) for v in vals]
    return data


def matrix_to_string(M) -> str:
    buf = io.StringIO()
    write_matrix(buf, M)
    return buf.getvalue()
