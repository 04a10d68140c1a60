"""Classic saddle-point preconditioners over the shared factorization cache.

All four methods act on reductions of the saddle KKT system: the reduced
augmented system in (z, y),

    [[0, B^T], [B, -A D^-1 A^T]] [z; y] = [-p; d'],   d' = d + A D^-1 c,

or the l x l Schur complement system [B^T (A D^-1 A^T)^-1 B] z = -p' with
p' = p - B^T (A D^-1 A^T)^-1 d'.  Every application runs in quadratic time
through the cached Cholesky factors of D and B^T B and the eigendecomposition
of (A D^-1 A^T)^-1.  Solver pairings: Blk-Diag uses MINRES, Constr I and HSS
use GMRES, Constr II uses conjugate residuals; all drivers gate convergence
on the relative residual of the full saddle system.
"""

from __future__ import annotations

import numpy as np

from . import _kernels, linalg
from .admm import SolveReport, optimal_beta
from .krylov import KrylovConfig, LinearOperator, conjugate_residuals, gmres, minres
from .problem import EcqpProblem, SpectralConstants, spectral_constants


class SaddleWorkspace:
    """Cached factorizations plus the reduced/Schur operators built on them."""

    def __init__(self, prob: EcqpProblem, constants: SpectralConstants | None = None):
        self.prob = prob
        self.constants = constants if constants is not None else spectral_constants(prob)
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
        self.rhs_norm = float(np.linalg.norm(np.concatenate([prob.c, prob.p, prob.d])))
        if self.rhs_norm == 0.0:
            self.rhs_norm = 1.0
        self._hss_chol: tuple[float, np.ndarray, np.ndarray] | None = None
        self.dprime, self.pprime = self.forward_substitute()

    # cached actions -----------------------------------------------------
    def dinv(self, v: np.ndarray) -> np.ndarray:
        return _kernels.upper_solve(self.LDT, _kernels.lower_solve(self.LD, v))

    def btb_solve(self, v: np.ndarray) -> np.ndarray:
        return _kernels.upper_solve(self.LBT, _kernels.lower_solve(self.LB, v))

    def dtilde_apply(self, y: np.ndarray) -> np.ndarray:
        """(A D^-1 A^T)^-1 y via the eigendecomposition."""
        return self.V @ (self.lam * (self.VT @ y))

    def adinvat_apply(self, y: np.ndarray) -> np.ndarray:
        """A D^-1 A^T y via the eigendecomposition."""
        return self.V @ ((self.VT @ y) / self.lam)

    # reductions ----------------------------------------------------------
    def forward_substitute(self) -> tuple[np.ndarray, np.ndarray]:
        dprime = self.prob.d + self.A @ self.dinv(self.prob.c)
        pprime = self.prob.p - self.BT @ self.dtilde_apply(dprime)
        return dprime, pprime

    def back_substitute(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Recover (y, x) from z: y = (A D^-1 A^T)^-1 (B z - d'), then
        x = -D^-1 (A^T y + c)."""
        y = self.dtilde_apply(self.B @ z - self.dprime)
        x = -self.dinv(self.AT @ y + self.prob.c)
        return y, x

    def recover_x(self, y: np.ndarray) -> np.ndarray:
        return -self.dinv(self.AT @ y + self.prob.c)

    def reduced_operator(self) -> LinearOperator:
        l, m = self.prob.l, self.prob.m

        def matvec(w):
            z, y = w[:l], w[l:]
            return np.concatenate([self.BT @ y, self.B @ z - self.adinvat_apply(y)])

        return LinearOperator(l + m, matvec)

    def reduced_rhs(self) -> np.ndarray:
        return np.concatenate([-self.prob.p, self.dprime])

    def schur_operator(self) -> LinearOperator:
        return LinearOperator(self.prob.l,
                              lambda z: self.BT @ self.dtilde_apply(self.B @ z))

    def schur_rhs(self) -> np.ndarray:
        return -self.pprime

    # preconditioners ------------------------------------------------------
    def precond_blkdiag(self, beta: float | None = None) -> LinearOperator:
        """M1 = blkdiag(beta B^T B, A D^-1 A^T), SPD; default beta = L."""
        beta = self.constants.L if beta is None else float(beta)
        l = self.prob.l

        def apply_inv(w):
            return np.concatenate([self.btb_solve(w[:l]) / beta,
                                   self.dtilde_apply(w[l:])])

        return LinearOperator(self.prob.l + self.prob.m, apply_inv)

    def precond_constraint1(self, beta: float | None = None) -> LinearOperator:
        """M2 = [[0, B^T], [B, -beta I]] applied through its block-triangular
        factorization; default beta = sqrt(mu L)."""
        beta = optimal_beta(self.constants) if beta is None else float(beta)
        l = self.prob.l

        def apply_inv(w):
            w1 = self.btb_solve(beta * w[:l] + self.BT @ w[l:])
            w2 = (self.B @ w1 - w[l:]) / beta
            return np.concatenate([w1, w2])

        return LinearOperator(self.prob.l + self.prob.m, apply_inv)

    def precond_constraint2(self) -> LinearOperator:
        """M3 = B^T B on the Schur-complement system."""
        return LinearOperator(self.prob.l, self.btb_solve)

    def precond_hss(self, alpha: float | None = None) -> LinearOperator:
        """M4 = blkdiag(alpha I, -(A D^-1 A^T + alpha I)) * [[alpha I, B^T],
        [-B, alpha I]]; default alpha = 1/L.  The second factor is inverted
        through the Schur complement on its (1,1) block with a cached
        Cholesky of alpha^2 I + B^T B."""
        alpha = 1.0 / self.constants.L if alpha is None else float(alpha)
        if self._hss_chol is None or self._hss_chol[0] != alpha:
            L = linalg.cholesky(alpha ** 2 * np.eye(self.prob.l) + self.prob.B.T @ self.prob.B)
            self._hss_chol = (alpha, L, np.ascontiguousarray(L.T))
        _, Lh, LhT = self._hss_chol
        l = self.prob.l

        def apply_inv(w):
            t1 = w[:l] / alpha
            t2 = -self.V @ ((self.VT @ w[l:]) / (1.0 / self.lam + alpha))
            rhs1 = alpha * t1 - self.BT @ t2
            w1 = _kernels.upper_solve(LhT, _kernels.lower_solve(Lh, rhs1))
            w2 = (t2 + self.B @ w1) / alpha
            return np.concatenate([w1, w2])

        return LinearOperator(self.prob.l + self.prob.m, apply_inv)

    # dense assemblies (test oracles and spectrum checks) -------------------
    def reduced_dense(self) -> np.ndarray:
        l, m = self.prob.l, self.prob.m
        Dinv = np.linalg.inv(self.prob.D)
        H = np.zeros((l + m, l + m))
        H[:l, l:] = self.BT
        H[l:, :l] = self.B
        H[l:, l:] = -self.A @ Dinv @ self.AT
        return H

    def schur_dense(self) -> np.ndarray:
        Dt = np.linalg.inv(self.A @ np.linalg.inv(self.prob.D) @ self.AT)
        return self.BT @ Dt @ self.B

    def m1_dense(self, beta: float | None = None) -> np.ndarray:
        beta = self.constants.L if beta is None else float(beta)
        l, m = self.prob.l, self.prob.m
        M = np.zeros((l + m, l + m))
        M[:l, :l] = beta * (self.prob.B.T @ self.prob.B)
        M[l:, l:] = self.A @ np.linalg.inv(self.prob.D) @ self.AT
        return M

    def m2_dense(self, beta: float | None = None) -> np.ndarray:
        beta = optimal_beta(self.constants) if beta is None else float(beta)
        l, m = self.prob.l, self.prob.m
        M = np.zeros((l + m, l + m))
        M[:l, l:] = self.BT
        M[l:, :l] = self.B
        M[l:, l:] = -beta * np.eye(m)
        return M

    def m3_dense(self) -> np.ndarray:
        return self.prob.B.T @ self.prob.B

    def m4_dense(self, alpha: float | None = None) -> np.ndarray:
        alpha = 1.0 / self.constants.L if alpha is None else float(alpha)
        l, m = self.prob.l, self.prob.m
        F1 = np.zeros((l + m, l + m))
        F1[:l, :l] = alpha * np.eye(l)
        F1[l:, l:] = -(self.A @ np.linalg.inv(self.prob.D) @ self.AT + alpha * np.eye(m))
        F2 = np.zeros((l + m, l + m))
        F2[:l, :l] = alpha * np.eye(l)
        F2[:l, l:] = self.BT
        F2[l:, :l] = -self.B
        F2[l:, l:] = alpha * np.eye(m)
        return F1 @ F2

    # full-system residual --------------------------------------------------
    def saddle_residual_zy(self, z: np.ndarray, y: np.ndarray) -> float:
        x = self.recover_x(y)
        return self.saddle_residual(x, z, y)

    def saddle_residual(self, x: np.ndarray, z: np.ndarray, y: np.ndarray) -> float:
        prob = self.prob
        r1 = prob.D @ x + self.AT @ y + prob.c
        r2 = self.BT @ y + prob.p
        r3 = self.A @ x + self.B @ z - prob.d
        res = np.sqrt(np.dot(r1, r1) + np.dot(r2, r2) + np.dot(r3, r3))
        return float(res) / self.rhs_norm


def _reduced_driver(ws: SaddleWorkspace, solver, tol, max_iters, M):
    l = ws.prob.l
    op = ws.reduced_operator()
    rhs = ws.reduced_rhs()

    def gate(_k, w, _res):
        return ws.saddle_residual_zy(w[:l], w[l:]) <= tol

    cfg = KrylovConfig(tol=1e-13, max_iters=max_iters, callback=gate)
    if solver == "minres":
        w, rep = minres(op, rhs, cfg, precond=M)
    else:
        pre_op = LinearOperator(op.dim, lambda v: M.apply(op.apply(v)))
        w, rep = gmres(pre_op, M.apply(rhs), cfg)
    z, y = w[:l], w[l:]
    x = ws.recover_x(y)
    final = ws.saddle_residual(x, z, y)
    status = rep.status
    if status == "converged" and final > tol:
        status = "stalled"
    report = SolveReport(rep.iterations, rep.residual_history, status,
                         rep.metric, final_saddle=final)
    return x, z, y, report


def solve_blkdiag(ws: SaddleWorkspace, tol: float = 1e-6, max_iters: int = 1000,
                  beta: float | None = None):
    """Blk-Diag: MINRES on the reduced augmented system preconditioned by M1."""
    return _reduced_driver(ws, "minres", tol, max_iters, ws.precond_blkdiag(beta))


def solve_constraint1(ws: SaddleWorkspace, tol: float = 1e-6, max_iters: int = 1000,
                      beta: float | None = None):
    """Constr I: GMRES on the M2-preconditioned reduced augmented system."""
    return _reduced_driver(ws, "gmres", tol, max_iters, ws.precond_constraint1(beta))


def solve_hss(ws: SaddleWorkspace, tol: float = 1e-6, max_iters: int = 1000,
              alpha: float | None = None):
    """HSS: GMRES on the M4-preconditioned reduced augmented system."""
    return _reduced_driver(ws, "gmres", tol, max_iters, ws.precond_hss(alpha))


def solve_constraint2(ws: SaddleWorkspace, tol: float = 1e-6, max_iters: int = 1000):
    """Constr II: conjugate residuals on the Schur system preconditioned by M3."""
    op = ws.schur_operator()
    rhs = ws.schur_rhs()

    def gate(_k, z, _res):
        y, x = ws.back_substitute(z)
        return ws.saddle_residual(x, z, y) <= tol

    cfg = KrylovConfig(tol=1e-13, max_iters=max_iters, callback=gate)
    z, rep = conjugate_residuals(op, rhs, cfg, precond=ws.precond_constraint2())
    y, x = ws.back_substitute(z)
    final = ws.saddle_residual(x, z, y)
    status = rep.status
    if status == "converged" and final > tol:
        status = "stalled"
    report = SolveReport(rep.iterations, rep.residual_history, status,
                         rep.metric, final_saddle=final)
    return x, z, y, report


SOLVERS = {
    "blkdiag": solve_blkdiag,
    "constr1": solve_constraint1,
    "constr2": solve_constraint2,
    "hss": solve_hss,
}
