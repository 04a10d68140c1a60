"""ECQP problem data, spectral constants, and instance generators.

A problem is min 0.5 x^T D x + c^T x + p^T z subject to A x + B z = d with
D symmetric positive definite (n x n), A full row rank (m x n) and B full
column rank (m x l).  The conditioning constants mu, L, kappa are the
extreme eigenvalues (and their ratio) of (A D^-1 A^T)^-1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from . import linalg


@dataclass(frozen=True)
class EcqpProblem:
    D: np.ndarray
    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    p: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        n, m, l = self.n, self.m, self.l
        if self.D.shape != (n, n):
            raise ValueError("D must be square n x n")
        if self.B.shape[0] != m:
            raise ValueError("A and B must have the same row count")
        if not (1 <= l <= m <= n):
            raise ValueError(f"need 1 <= l <= m <= n, got l={l} m={m} n={n}")
        for name, v, dim in (("c", self.c, n), ("p", self.p, l), ("d", self.d, m)):
            if v.shape != (dim,):
                raise ValueError(f"{name} must have length {dim}")
        for arr in (self.D, self.A, self.B, self.c, self.p, self.d):
            if not np.all(np.isfinite(arr)):
                raise ValueError("problem data has non-finite entries")

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def l(self) -> int:
        return self.B.shape[1]

    @property
    def dim(self) -> int:
        return self.n + self.l + self.m


@dataclass(frozen=True)
class SpectralConstants:
    """Extreme eigenvalues of (A D^-1 A^T)^-1 and its eigenvectors.

    dtilde_eigs is ascending, so mu = dtilde_eigs[0], L = dtilde_eigs[-1].
    dtilde_vecs columns are the shared eigenvectors of A D^-1 A^T and its
    inverse (cached here because every solver needs them).
    """

    mu: float
    L: float
    kappa: float
    dtilde_eigs: np.ndarray
    dtilde_vecs: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class KktSystem:
    """Dense augmented-KKT pieces H = M - N with rhs v, plus the plain
    saddle system and its rhs (-c, -p, d)."""

    H: np.ndarray
    v: np.ndarray
    M: np.ndarray
    N: np.ndarray
    saddle: np.ndarray
    saddle_rhs: np.ndarray


def spectral_constants(prob: EcqpProblem) -> SpectralConstants:
    """mu, L, kappa via Cholesky of D and a symmetric eigensolve.

    Forms G = L_D^-1 A^T so that A D^-1 A^T = G^T G, eigendecomposes that
    Gram matrix, and inverts the eigenvalues; the inverse matrix itself is
    never formed.
    """
    try:
        LD = linalg.cholesky(prob.D)
    except linalg.NotPositiveDefiniteError as e:
        raise linalg.NotPositiveDefiniteError(e.pivot) from None
    # G = L_D^-1 A^T  (n x m), Gram = A D^-1 A^T
    G = np.linalg.solve(LD, prob.A.T) if prob.n else prob.A.T
    gram = G.T @ G
    w, V = linalg.sym_eig(gram)
    if w[0] <= w[-1] * np.finfo(np.float64).eps * max(prob.m, prob.n):
        raise linalg.RankDeficientError("A is not full row rank")
    dtilde = 1.0 / w[::-1]
    V = V[:, ::-1].copy()
    mu, L = float(dtilde[0]), float(dtilde[-1])
    return SpectralConstants(mu=mu, L=L, kappa=L / mu, dtilde_eigs=dtilde, dtilde_vecs=V)


def random_problem(n: int, m: int, l: int, s: float, seed: int) -> EcqpProblem:
    """Random instance with Haar singular vectors and log-normal singular values.

    A = U_A S_A V_A^T (m x n), B = U_B S_B V_B^T (m x l), D = U_D S_D U_D^T,
    with all singular values drawn i.i.d. exp(s * N(0,1)) from one shared
    conditioning parameter s.  The right-hand sides c, p, d are standard
    Gaussian from the same stream.  Deterministic per seed.
    """
    if not (1 <= l <= m <= n):
        raise ValueError(f"need 1 <= l <= m <= n, got l={l} m={m} n={n}")
    if s < 0:
        raise ValueError("s must be >= 0")
    rng = linalg.make_rng(seed)
    UA = linalg.haar_orthogonal(m, rng)
    VA = linalg.haar_orthogonal(n, rng)
    UB = linalg.haar_orthogonal(m, rng)
    VB = linalg.haar_orthogonal(l, rng)
    UD = linalg.haar_orthogonal(n, rng)
    sigA = linalg.lognormal_draws(m, s, rng)
    sigB = linalg.lognormal_draws(l, s, rng)
    sigD = linalg.lognormal_draws(n, s, rng)
    A = (UA * sigA) @ VA[:, :m].T
    B = (UB[:, :l] * sigB) @ VB.T
    D = (UD * sigD) @ UD.T
    D = 0.5 * (D + D.T)
    c = rng.standard_normal(n)
    p = rng.standard_normal(l)
    d = rng.standard_normal(m)
    return EcqpProblem(D=D, A=A, B=B, c=c, p=p, d=d)


def worst_case_problem(m: int, kappa: float, seed: int = 0) -> EcqpProblem:
    """The sharp construction: A = I, D split between kappa^(+-1/2) blocks,
    and B stacked cosines/sines at odd multiples of pi/(2m).

    The core matrix K at beta = sqrt(mu L) becomes a scaled rotation whose
    eigenvalues sit evenly spaced on the circle of radius
    (sqrt(kappa)-1)/(sqrt(kappa)+1).
    """
    if m % 2 or m < 2:
        raise ValueError("m must be even and >= 2")
    if kappa <= 1:
        raise ValueError("kappa must be > 1")
    h = m // 2
    rk = float(np.sqrt(kappa))
    D = np.diag(np.concatenate([np.full(h, 1.0 / rk), np.full(h, rk)]))
    A = np.eye(m)
    theta = np.pi / (2 * m) * np.arange(1, m, 2, dtype=np.float64)
    B = np.vstack([np.diag(np.cos(theta)), np.diag(np.sin(theta))])
    rng = linalg.make_rng(seed)
    c = rng.standard_normal(m)
    p = rng.standard_normal(h)
    d = rng.standard_normal(m)
    return EcqpProblem(D=D, A=A, B=B, c=c, p=p, d=d)


def restart_stall_problem() -> EcqpProblem:
    """Bundled instance on which restarted GMRES(10) stalls while full GMRES
    converges: the sharp construction at m = 64, kappa = 1e8, whose spectrum
    hugs the disk boundary so each short restart cycle makes ~0.1% progress,
    while full GMRES terminates finitely near iteration m + 2."""
    return worst_case_problem(64, 1e8, seed=0)


def assemble_kkt(prob: EcqpProblem, beta: float) -> KktSystem:
    """Dense H(beta) = M(beta) - N(beta), rhs v(beta), and the saddle system."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    n, m, l = prob.n, prob.m, prob.l
    A, B, D = prob.A, prob.B, prob.D
    AtA = A.T @ A
    AtB = A.T @ B
    BtB = B.T @ B
    dim = n + l + m
    H = np.zeros((dim, dim))
    H[:n, :n] = D / beta + AtA
    H[:n, n:n + l] = AtB
    H[:n, n + l:] = A.T
    H[n:n + l, :n] = AtB.T
    H[n:n + l, n:n + l] = BtB
    H[n:n + l, n + l:] = B.T
    H[n + l:, :n] = A
    H[n + l:, n:n + l] = B

    M = np.zeros((dim, dim))
    M[:n, :n] = D / beta + AtA
    M[n:n + l, :n] = AtB.T
    M[n:n + l, n:n + l] = BtB
    M[n + l:, :n] = A
    M[n + l:, n:n + l] = B
    M[n + l:, n + l:] = -np.eye(m)

    N = M - H

    v = np.concatenate([A.T @ prob.d - prob.c / beta,
                        B.T @ prob.d - prob.p / beta,
                        prob.d])

    saddle = np.zeros((dim, dim))
    saddle[:n, :n] = D
    saddle[:n, n + l:] = A.T
    saddle[n:n + l, n + l:] = B.T
    saddle[n + l:, :n] = A
    saddle[n + l:, n:n + l] = B
    saddle_rhs = np.concatenate([-prob.c, -prob.p, prob.d])
    return KktSystem(H=H, v=v, M=M, N=N, saddle=saddle, saddle_rhs=saddle_rhs)


def save_problem(f: TextIO | str, prob: EcqpProblem) -> None:
    """Single-file text serialization: "n m l" header then D, A, B, c, p, d
    blocks in the matrix text format."""
    if isinstance(f, str):
        with open(f, "w") as fh:
            save_problem(fh, prob)
        return
    f.write(f"{prob.n} {prob.m} {prob.l}\n")
    for block in (prob.D, prob.A, prob.B):
        linalg.write_matrix(f, block)
    for vec in (prob.c, prob.p, prob.d):
        linalg.write_matrix(f, vec.reshape(-1, 1))


def load_problem(f: TextIO | str) -> EcqpProblem:
    if isinstance(f, str):
        with open(f) as fh:
            return load_problem(fh)
    n, m, l = (int(t) for t in f.readline().split())
    D = linalg.read_matrix(f)
    A = linalg.read_matrix(f)
    B = linalg.read_matrix(f)
    c = linalg.read_matrix(f).ravel()
    p = linalg.read_matrix(f).ravel()
    d = linalg.read_matrix(f).ravel()
    if D.shape != (n, n) or A.shape != (m, n) or B.shape != (m, l):
        raise ValueError("problem file header disagrees with block shapes")
    return EcqpProblem(D=D, A=A, B=B, c=c, p=p, d=d)
