"""The ADMM operator for ECQP instances: one application costs O(dim^2).

The operator realizes the affine map T(u) = G u + b implied by the
Gauss-Seidel splitting of the augmented KKT system, through cached
factorizations (Cholesky of D and B^T B, eigendecomposition of
(A D^-1 A^T)^-1).  Fixed-point and over-relaxed solves run in a fused
kernel (see _kernels); the per-iterate convergence gate is the relative
residual of the plain saddle KKT system, with the fixed-point metric
||u - T(u)|| logged alongside.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, linalg
from .problem import EcqpProblem, SpectralConstants, assemble_kkt, spectral_constants


@dataclass
class SolveReport:
    iterations: int
    residual_history: np.ndarray
    status: str  # "converged" | "max_iters" | "stalled"
    metric: str
    m_metric_history: np.ndarray | None = field(default=None, repr=False)
    final_saddle: float | None = None


def optimal_beta(constants: SpectralConstants) -> float:
    """beta = sqrt(mu L), which minimizes gamma = max(L/beta, beta/mu)."""
    return float(np.sqrt(constants.mu * constants.L))


class AdmmOperator:
    """Cached-factorization realization of the ADMM update map.

    Iterates are flat vectors u = [x; z; y] of length n + l + m, where y is
    the scaled multiplier (the saddle-system multiplier is beta * y).
    """

    def __init__(self, prob: EcqpProblem, beta: float | None = None,
                 constants: SpectralConstants | None = None):
        self.prob = prob
        self.constants = constants if constants is not None else spectral_constants(prob)
        self.beta = float(beta) if beta is not None else optimal_beta(self.constants)
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        self.gamma = max(self.constants.L / self.beta, self.beta / self.constants.mu)

        self.A = np.ascontiguousarray(prob.A)
        self.AT = np.ascontiguousarray(prob.A.T)
        self.B = np.ascontiguousarray(prob.B)
        self.BT = np.ascontiguousarray(prob.B.T)
        self.LD = linalg.cholesky(prob.D)
        self.LDT = np.ascontiguousarray(self.LD.T)
        try:
            self.LB = linalg.cholesky(prob.B.T @ prob.B)
        except linalg.NotPositiveDefiniteError:
            raise linalg.RankDeficientError("B is not full column rank") from None
        self.LBT = np.ascontiguousarray(self.LB.T)
        self.V = np.ascontiguousarray(self.constants.dtilde_vecs)
        self.VT = np.ascontiguousarray(self.V.T)
        self.lam = self.constants.dtilde_eigs
        # (beta^-1 I + A D^-1 A^T)^-1 = V diag(beta lam/(lam+beta)) V^T
        self.mid = self.beta * self.lam / (self.lam + self.beta)
        self.atd_c = self.AT @ prob.d - prob.c / self.beta
        self.btd_p = self.BT @ prob.d - prob.p / self.beta
        self.rhs_norm = float(np.linalg.norm(np.concatenate([prob.c, prob.p, prob.d])))
        if self.rhs_norm == 0.0:
            self.rhs_norm = 1.0
        self.identity_A = prob.m == prob.n and np.array_equal(prob.A, np.eye(prob.n))

    @property
    def dim(self) -> int:
        return self.prob.dim

    def pack(self, x, z, y) -> np.ndarray:
        return np.concatenate([x, z, y])

    def unpack(self, u) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n, l = self.prob.n, self.prob.l
        return u[:n], u[n:n + l], u[n + l:]

    def _dinv(self, v: np.ndarray) -> np.ndarray:
        return _kernels.upper_solve(self.LDT, _kernels.lower_solve(self.LD, v))

    def solve_xupdate_woodbury(self, rhs: np.ndarray) -> np.ndarray:
        """(beta^-1 D + A^T A)^-1 rhs via the Woodbury identity."""
        t1 = self._dinv(rhs)
        w2 = self.mid * (self.VT @ (self.A @ t1))
        t3 = self._dinv(self.AT @ (self.V @ w2))
        return self.beta * (t1 - t3)

    def solve_xupdate_eig(self, rhs: np.ndarray) -> np.ndarray:
        """(beta^-1 D + I)^-1 rhs via the eigendecomposition; valid when A = I."""
        if not self.identity_A:
            raise ValueError("eigendecomposition x-update requires A = I")
        f = self.beta / (self.lam + self.beta)
        return self.V @ (f * (self.VT @ rhs))

    def apply_T(self, u: np.ndarray) -> np.ndarray:
        x, z, y = self.unpack(u)
        rhs_x = self.atd_c - self.AT @ (self.B @ z + y)
        xT = self.solve_xupdate_woodbury(rhs_x)
        axT = self.A @ xT
        rhs_z = self.btd_p - self.BT @ (axT + y)
        zT = _kernels.upper_solve(self.LBT, _kernels.lower_solve(self.LB, rhs_z))
        yT = y + axT + self.B @ zT - self.prob.d
        return self.pack(xT, zT, yT)

    def residual_metric(self, u: np.ndarray) -> float:
        """||u - T(u)||, the fixed-point residual norm."""
        return float(np.linalg.norm(u - self.apply_T(u)))

    def saddle_residual(self, u: np.ndarray) -> float:
        """Relative residual of the plain saddle KKT system at u."""
        x, z, y = self.unpack(u)
        prob, beta = self.prob, self.beta
        r1 = prob.D @ x + beta * (self.AT @ y) + prob.c
        r2 = beta * (self.BT @ y) + prob.p
        r3 = self.A @ x + self.B @ z - prob.d
        res = np.sqrt(np.dot(r1, r1) + np.dot(r2, r2) + np.dot(r3, r3))
        return float(res) / self.rhs_norm

    def _run_sweep(self, u0, tol, max_iters, omega, warmup) -> tuple[np.ndarray, SolveReport]:
        u0 = np.zeros(self.dim) if u0 is None else np.asarray(u0, dtype=np.float64)
        s0 = self.saddle_residual(u0)
        if s0 <= tol or max_iters == 0:
            hist = np.array([s0])
            m0 = np.array([self.residual_metric(u0)])
            status = "converged" if s0 <= tol else "max_iters"
            return u0.copy(), SolveReport(0, hist, status, "saddle_rel", m0, s0)
        x, z, y = (np.ascontiguousarray(v) for v in self.unpack(u0))
        x, z, y = x.copy(), z.copy(), y.copy()
        ax = self.A @ x
        bz = self.B @ z
        dx = self.prob.D @ x
        m_hist = np.empty(max_iters)
        saddle_hist = np.empty(max_iters)
        niter, code = _kernels.admm_sweep(
            self.A, self.AT, self.B, self.BT, self.LD, self.LDT, self.LB, self.LBT,
            self.V, self.VT, self.mid, self.atd_c, self.btd_p,
            self.prob.c, self.prob.p, self.prob.d, self.beta, float(omega), warmup,
            x, z, y, ax, bz, dx, self.rhs_norm, tol, max_iters,
            m_hist, saddle_hist)
        u = self.pack(x, z, y)
        status = {0: "converged", 1: "max_iters", 2: "stalled"}[code]
        hist = np.concatenate([[s0], saddle_hist[:niter]])
        m_final = self.residual_metric(u) if np.all(np.isfinite(u)) else np.nan
        m_hist_full = np.concatenate([m_hist[:niter], [m_final]])
        return u, SolveReport(niter, hist, status, "saddle_rel", m_hist_full,
                              float(hist[-1]))

    def solve(self, u0=None, tol: float = 1e-6, max_iters: int = 1000):
        """Plain ADMM: iterate u <- T(u) until the saddle residual meets tol."""
        return self._run_sweep(u0, tol, max_iters, omega=1.0, warmup=0)

    def solve_sor(self, omega: float, u0=None, tol: float = 1e-6, max_iters: int = 1000):
        """Over-relaxed ADMM: two plain steps, then u <- (1-w) u + w T(u)."""
        if not (0 < omega <= 2):
            raise ValueError("omega must be in (0, 2]")
        return self._run_sweep(u0, tol, max_iters, omega=omega, warmup=2)


def solve_admm(op: AdmmOperator, u0=None, tol: float = 1e-6, max_iters: int = 1000):
    return op.solve(u0=u0, tol=tol, max_iters=max_iters)


def solve_sor(op: AdmmOperator, omega: float, u0=None, tol: float = 1e-6,
              max_iters: int = 1000):
    return op.solve_sor(omega, u0=u0, tol=tol, max_iters=max_iters)


def solve_fixed_point(op, u0=None, tol: float = 1e-6, max_iters: int = 1000,
                      omega: float = 1.0, warmup: int = 0):
    """Reference fixed-point loop over any operator exposing apply_T,
    saddle_residual, and dim.  Trajectory-identical to the fused kernel."""
    u = np.zeros(op.dim) if u0 is None else np.asarray(u0, dtype=np.float64).copy()
    saddle_hist = [op.saddle_residual(u)]
    m_hist = []
    status = "max_iters"
    niter = 0
    if saddle_hist[0] <= tol:
        status = "converged"
    else:
        for k in range(max_iters):
            uT = op.apply_T(u)
            m_hist.append(float(np.linalg.norm(uT - u)))
            om = 1.0 if k < warmup else omega
            u = uT if om == 1.0 else (1.0 - om) * u + om * uT
            s = op.saddle_residual(u)
            saddle_hist.append(s)
            niter = k + 1
            if not np.isfinite(s):
                status = "stalled"
                break
            if s <= tol:
                status = "converged"
                break
    m_hist.append(float(np.linalg.norm(op.apply_T(u) - u)))
    return u, SolveReport(niter, np.array(saddle_hist), status, "saddle_rel",
                          np.array(m_hist), float(saddle_hist[-1]))


def dense_splitting(prob: EcqpProblem, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Dense (G, b) with T(u) = G u + b, built from the splitting matrices.

    Test oracle; O(dim^3), for small instances only.
    """
    kkt = assemble_kkt(prob, beta)
    G = np.linalg.solve(kkt.M, kkt.N)
    b = np.linalg.solve(kkt.M, kkt.v)
    return G, b


def dense_fixed_point(prob: EcqpProblem, beta: float) -> np.ndarray:
    """u* from a dense solve of the saddle system, in operator coordinates
    (the multiplier block is divided by beta)."""
    kkt = assemble_kkt(prob, beta)
    sol = np.linalg.solve(kkt.saddle, kkt.saddle_rhs)
    n, l = prob.n, prob.l
    u = sol.copy()
    u[n + l:] /= beta
    return u


def core_subspace_basis(G: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of the invariant subspace of G carrying its nonzero
    eigenvalues (one real-imaginary column pair per conjugate pair)."""
    w, X = np.linalg.eig(G)
    cols = []
    for j in range(len(w)):
        if abs(w[j]) <= tol:
            continue
        if w[j].imag > tol:
            cols.append(X[:, j].real)
            cols.append(X[:, j].imag)
        elif abs(w[j].imag) <= tol:
            cols.append(X[:, j].real)
    Q, _ = np.linalg.qr(np.column_stack(cols))
    return Q


def slow_start(prob: EcqpProblem, beta: float, seed: int = 0) -> np.ndarray:
    """An initial point whose fixed-point residual lies inside the core
    invariant subspace of G.

    Generic starts let GMRES damp the transient directions quickly and
    transiently beat the worst-case rate; restricting the initial residual
    to the core subspace exhibits the sharp geometric decay.  Dense O(dim^3)
    construction, for worst-case studies at desk scale.
    """
    G, b = dense_splitting(prob, beta)
    N = G.shape[0]
    ustar = np.linalg.solve(np.eye(N) - G, b)
    Q = core_subspace_basis(G)
    rng = linalg.make_rng(seed)
    r0 = Q @ rng.standard_normal(Q.shape[1])
    r0 /= np.linalg.norm(r0)
    return ustar + np.linalg.solve(np.eye(N) - G, r0)
