"""Kronecker-structured Newton subproblems from interior-point SDP solves.

The subproblem is the ECQP

    min 0.5 s^T (W (x) W) s - xhat^T s - bhat^T y   s.t.  s + Amat y = chat

over symmetric-matrix vectorizations (svec, with sqrt(2) off-diagonal
scaling so inner products match traces).  The quadratic block never gets
formed: with W = V diag(lam) V^T cached, (W (x) W / beta + I)^-1 applied to
svec(C) is the Hadamard-product formula

    S = V [ [beta / (lam_i lam_j + beta)]_ij  o  (V^T C V) ] V^T

in O(n^3).  The specialized splitting updates below are algebraically the
generic ECQP updates for D = W (x) W, A = I, B = Amat, c = -xhat,
p = -bhat, d = chat; the conditioning constant is cond(W)^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, linalg
from .admm import solve_fixed_point
from .problem import EcqpProblem


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


def svec(S: np.ndarray) -> np.ndarray:
    """Vectorize a symmetric matrix, scaling off-diagonal entries by sqrt(2)
    so that <svec(S), svec(T)> = trace(S T)."""
    S = np.asarray(S, dtype=np.float64)
    n = S.shape[0]
    scale = np.abs(S).max() if S.size else 0.0
    if np.abs(S - S.T).max(initial=0.0) > 1e-10 * max(scale, 1.0):
        raise linalg.AsymmetricMatrixError("svec input is not symmetric")
    iu, ju = np.triu_indices(n)
    v = S[iu, ju].copy()
    v[iu != ju] *= np.sqrt(2.0)
    return v


def smat(v: np.ndarray) -> np.ndarray:
    """Inverse of svec."""
    v = np.asarray(v, dtype=np.float64)
    n = int((np.sqrt(8.0 * v.size + 1.0) - 1.0) / 2.0 + 0.5)
    if svec_dim(n) != v.size:
        raise ValueError(f"length {v.size} is not a triangular number")
    S = np.zeros((n, n))
    iu, ju = np.triu_indices(n)
    vals = v.copy()
    vals[iu != ju] /= np.sqrt(2.0)
    S[iu, ju] = vals
    S[ju, iu] = vals
    return S


def sym_kron_dense(W: np.ndarray) -> np.ndarray:
    """Dense matrix of S -> W S W in svec coordinates (test oracle; O(n^5))."""
    n = W.shape[0]
    sd = svec_dim(n)
    out = np.empty((sd, sd))
    for j in range(sd):
        e = np.zeros(sd)
        e[j] = 1.0
        out[:, j] = svec(W @ smat(e) @ W)
    return 0.5 * (out + out.T)


def kron_solve(V: np.ndarray, lam: np.ndarray, beta: float,
               C: np.ndarray) -> np.ndarray:
    """Solve (W (x) W / beta + I) S = C on the symmetric space via the
    Hadamard-product formula, given W = V diag(lam) V^T."""
    H = beta / (np.outer(lam, lam) + beta)
    return V @ (H * (V.T @ C @ V)) @ V.T


@dataclass(frozen=True)
class SdpNewtonProblem:
    W: np.ndarray = field(repr=False)
    Amat: np.ndarray = field(repr=False)
    xhat: np.ndarray = field(repr=False)
    bhat: np.ndarray = field(repr=False)
    chat: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.n
        sd = svec_dim(n)
        if self.W.shape != (n, n):
            raise ValueError("W must be square")
        if self.Amat.shape[0] != sd:
            raise ValueError("constraint matrix must have svec-dim rows")
        if self.Amat.shape[1] > sd:
            raise ValueError("more constraints than svec dimensions")
        if self.xhat.shape != (sd,) or self.chat.shape != (sd,):
            raise ValueError("xhat/chat must have svec dimension")
        if self.bhat.shape != (self.m,):
            raise ValueError("bhat must have one entry per constraint")

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def m(self) -> int:
        return self.Amat.shape[1]

    @property
    def sdim(self) -> int:
        return svec_dim(self.n)


class SdpAdmmOperator:
    """Splitting-update operator for the Newton subproblem.

    State u = [s; y; xt] where xt is the scaled multiplier of the coupling
    constraint (saddle multiplier = beta * xt).  The s-update runs through
    kron_solve; the y-update through a cached Cholesky of Amat^T Amat.
    """

    def __init__(self, prob: SdpNewtonProblem, beta: float | None = None):
        self.prob = prob
        lam, V = linalg.sym_eig(prob.W)
        if lam[0] <= 0:
            raise linalg.NotPositiveDefiniteError(0)
        self.lamW = lam
        self.VW = V
        self.mu = float(lam[0]) ** 2
        self.L = float(lam[-1]) ** 2
        self.kappa = self.L / self.mu
        # beta = sqrt(mu L) = lam_min(W) lam_max(W)
        self.beta = float(beta) if beta is not None else float(lam[0] * lam[-1])
        try:
            self.LA = linalg.cholesky(prob.Amat.T @ prob.Amat)
        except linalg.NotPositiveDefiniteError:
            raise linalg.RankDeficientError(
                "constraint matrix is not full column rank") from None
        self.LAT = np.ascontiguousarray(self.LA.T)
        self.zc = prob.xhat / self.beta + prob.chat
        self.rhs_norm = float(np.linalg.norm(
            np.concatenate([prob.xhat, prob.bhat, prob.chat])))
        if self.rhs_norm == 0.0:
            self.rhs_norm = 1.0

    @property
    def dim(self) -> int:
        return 2 * self.prob.sdim + self.prob.m

    def pack(self, s, y, xt) -> np.ndarray:
        return np.concatenate([s, y, xt])

    def unpack(self, u):
        sd, m = self.prob.sdim, self.prob.m
        return u[:sd], u[sd:sd + m], u[sd + m:]

    def _wkronw(self, s: np.ndarray) -> np.ndarray:
        return svec(self.prob.W @ smat(s) @ self.prob.W)

    def apply_T(self, u: np.ndarray) -> np.ndarray:
        s, y, xt = self.unpack(u)
        prob = self.prob
        rhs = self.zc - prob.Amat @ y - xt
        sT = svec(kron_solve(self.VW, self.lamW, self.beta, smat(rhs)))
        ry = prob.bhat / self.beta - prob.Amat.T @ (sT + xt - prob.chat)
        yT = _kernels.upper_solve(self.LAT, _kernels.lower_solve(self.LA, ry))
        xtT = xt + sT + prob.Amat @ yT - prob.chat
        return self.pack(sT, yT, xtT)

    def residual_metric(self, u: np.ndarray) -> float:
        return float(np.linalg.norm(u - self.apply_T(u)))

    def saddle_residual(self, u: np.ndarray) -> float:
        s, y, xt = self.unpack(u)
        prob = self.prob
        r1 = self._wkronw(s) + self.beta * xt - prob.xhat
        r2 = prob.Amat.T @ (self.beta * xt) - prob.bhat
        r3 = s + prob.Amat @ y - prob.chat
        res = np.sqrt(np.dot(r1, r1) + np.dot(r2, r2) + np.dot(r3, r3))
        return float(res) / self.rhs_norm

    def solve(self, u0=None, tol: float = 1e-6, max_iters: int = 1000):
        return solve_fixed_point(self, u0=u0, tol=tol, max_iters=max_iters)


def sdp_admm_step(op: SdpAdmmOperator, state: np.ndarray) -> np.ndarray:
    """One splitting update of the packed state [s; y; xt]."""
    return op.apply_T(state)


def synthetic_newton(n: int, m: int, kappa: float, seed: int) -> SdpNewtonProblem:
    """Synthetic subproblem with cond(W)^2 = kappa exactly.

    W has Haar eigenvectors and eigenvalues log-spaced on [1, sqrt(kappa)];
    constraint columns are Gaussian draws orthonormalized so the constraint
    Gram matrix stays perfectly conditioned; right-hand sides are Gaussian.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if kappa > 1 and n < 2:
        raise ValueError("n must be >= 2 for kappa > 1")
    sd = svec_dim(n)
    if not (1 <= m <= sd):
        raise ValueError(f"need 1 <= m <= {sd}")
    rng = linalg.make_rng(seed)
    V = linalg.haar_orthogonal(n, rng)
    lam = np.geomspace(1.0, np.sqrt(kappa), n) if n > 1 else np.ones(1)
    W = (V * lam) @ V.T
    W = 0.5 * (W + W.T)
    G = rng.standard_normal((sd, m))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    Amat = Q * signs
    xhat = rng.standard_normal(sd)
    bhat = rng.standard_normal(m)
    chat = rng.standard_normal(sd)
    return SdpNewtonProblem(W=W, Amat=Amat, xhat=xhat, bhat=bhat, chat=chat)


def to_ecqp(prob: SdpNewtonProblem) -> EcqpProblem:
    """The equivalent generic ECQP with the dense symmetric-Kronecker
    quadratic block (test oracle; small n only)."""
    D = sym_kron_dense(prob.W)
    sd = prob.sdim
    return EcqpProblem(D=D, A=np.eye(sd), B=prob.Amat, c=-prob.xhat,
                       p=-prob.bhat, d=prob.chat)
