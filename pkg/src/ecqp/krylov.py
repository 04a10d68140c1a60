"""Matrix-free Krylov solvers over a minimal linear-operator interface.

GMRES (full and restarted) uses Arnoldi with modified Gram-Schmidt, one
optional reorthogonalization pass, and Givens rotations on the Hessenberg
least-squares problem.  MINRES and conjugate residuals are the standard
preconditioned recurrences.  All solvers report a per-iteration relative
residual history in the metric they natively minimize; an optional
callback receives the current iterate and can impose an external stop
criterion (the preconditioner drivers use it to gate on the saddle-system
residual).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels, linalg
from .admm import SolveReport


@dataclass
class KrylovConfig:
    tol: float = 1e-6
    max_iters: int = 1000
    restart: int | None = None
    callback: Callable[[int, np.ndarray, float], bool] | None = None
    reorth_threshold: float = 1e-8

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.restart is not None and self.restart < 1:
            raise ValueError("restart period must be >= 1")


class LinearOperator:
    """A square operator known only through matrix-vector products."""

    def __init__(self, dim: int, matvec: Callable[[np.ndarray], np.ndarray]):
        self.dim = dim
        self._matvec = matvec

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self._matvec(v)

    @classmethod
    def from_dense(cls, M: np.ndarray) -> "LinearOperator":
        M = np.asarray(M, dtype=np.float64)
        return cls(M.shape[0], lambda v: M @ v)


STALL_CYCLE_REDUCTION = 1e-3  # restarted GMRES: minimum relative progress per cycle


def gmres(op: LinearOperator, b: np.ndarray, cfg: KrylovConfig,
          x0: np.ndarray | None = None) -> tuple[np.ndarray, SolveReport]:
    """Full GMRES on op x = b; the iterate at step k minimizes ||b - op x||
    over the k-th Krylov subspace."""
    b = np.asarray(b, dtype=np.float64)
    n = op.dim
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(0, np.array([0.0]), "converged", "gmres_rel")
    if x0 is None:
        x0 = np.zeros(n)
        r = b.copy()
    else:
        x0 = np.asarray(x0, dtype=np.float64)
        r = b - op.apply(x0)
    rnorm = float(np.linalg.norm(r))
    history = [rnorm / bnorm]
    if history[0] <= cfg.tol:
        return x0.copy(), SolveReport(0, np.array(history), "converged", "gmres_rel")

    max_k = cfg.max_iters
    basis = np.empty((max_k + 1, n))
    basis[0] = r / rnorm
    R = np.zeros((max_k, max_k))
    g = np.zeros(max_k + 1)
    g[0] = rnorm
    cs = np.empty(max_k)
    sn = np.empty(max_k)

    def reconstruct(k: int) -> np.ndarray:
        y = _kernels.upper_solve(np.ascontiguousarray(R[:k, :k]), g[:k].copy())
        return x0 + basis[:k].T @ y

    status = "max_iters"
    k_done = 0
    for k in range(max_k):
        w = op.apply(basis[k])
        if not np.all(np.isfinite(w)):
            raise FloatingPointError(
                f"GMRES: operator returned non-finite values at iteration {k + 1}")
        wnorm0 = float(np.linalg.norm(w))
        h = _kernels.mgs_orthogonalize(basis, k + 1, w)
        # one reorthogonalization pass when orthogonality loss is visible
        corr = basis[:k + 1] @ w
        if np.abs(corr).max(initial=0.0) > cfg.reorth_threshold * max(wnorm0, 1e-300):
            w -= basis[:k + 1].T @ corr
            h = h + corr
        hk1 = float(np.linalg.norm(w))
        happy = hk1 <= 1e-14 * max(wnorm0, 1e-300)

        col = np.zeros(k + 1)
        col[:] = h
        for j in range(k):
            t = cs[j] * col[j] + sn[j] * col[j + 1]
            col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1]
            col[j] = t
        denom = float(np.hypot(col[k], hk1))
        if denom == 0.0:
            cs[k], sn[k] = 1.0, 0.0
        else:
            cs[k], sn[k] = col[k] / denom, hk1 / denom
        R[:k, k] = col[:k]
        R[k, k] = cs[k] * col[k] + sn[k] * hk1
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]

        res = abs(g[k + 1]) / bnorm
        history.append(res)
        k_done = k + 1

        if cfg.callback is not None and cfg.callback(k_done, reconstruct(k_done), res):
            status = "converged"
            break
        if res <= cfg.tol or happy:
            status = "converged"
            break
        basis[k + 1] = w / hk1

    x = reconstruct(k_done)
    return x, SolveReport(k_done, np.array(history), status, "gmres_rel")


def gmres_restarted(op: LinearOperator, b: np.ndarray,
                    cfg: KrylovConfig) -> tuple[np.ndarray, SolveReport]:
    """Restarted GMRES: cycles of cfg.restart iterations, each warm-started
    from the previous iterate.  A cycle that reduces the residual by less
    than STALL_CYCLE_REDUCTION relative flags the solve as stalled."""
    if cfg.restart is None:
        raise ValueError("cfg.restart must be set for restarted GMRES")
    x = np.zeros(op.dim)
    history: list[float] = []
    used = 0
    status = "max_iters"
    prev = None
    while used < cfg.max_iters:
        p = min(cfg.restart, cfg.max_iters - used)
        inner = KrylovConfig(tol=cfg.tol, max_iters=p, callback=cfg.callback,
                             reorth_threshold=cfg.reorth_threshold)
        x, rep = gmres(op, b, inner, x0=x)
        if not history:
            history.extend(rep.residual_history.tolist())
        else:
            history.extend(rep.residual_history[1:].tolist())
        used += rep.iterations
        res = float(rep.residual_history[-1])
        if rep.status == "converged":
            status = "converged"
            break
        if prev is not None or used >= cfg.restart:
            base = prev if prev is not None else history[0]
            if p == cfg.restart and (base - res) < STALL_CYCLE_REDUCTION * base:
                status = "stalled"
                break
        prev = res
    return x, SolveReport(used, np.array(history), status, "gmres_rel")


def _probe_symmetry(op: LinearOperator, nprobe: int = 3, rtol: float = 1e-8) -> None:
    rng = linalg.make_rng(2357)
    for _ in range(nprobe):
        u = rng.standard_normal(op.dim)
        v = rng.standard_normal(op.dim)
        au = op.apply(u)
        av = op.apply(v)
        lhs = float(np.dot(au, v))
        rhs = float(np.dot(u, av))
        scale = np.linalg.norm(au) * np.linalg.norm(v) + np.linalg.norm(u) * np.linalg.norm(av)
        if abs(lhs - rhs) > rtol * max(scale, 1e-300):
            raise ValueError("operator failed the symmetry probe")


def minres(op: LinearOperator, b: np.ndarray, cfg: KrylovConfig,
           precond: LinearOperator | None = None) -> tuple[np.ndarray, SolveReport]:
    """Preconditioned MINRES for symmetric (possibly indefinite) systems.

    The preconditioner applies the inverse of an SPD matrix; the logged
    residual is the preconditioned norm the method minimizes.
    """
    _probe_symmetry(op)
    b = np.asarray(b, dtype=np.float64)
    n = op.dim
    x = np.zeros(n)
    r1 = b.copy()
    y = precond.apply(r1) if precond is not None else r1.copy()
    beta1 = float(np.dot(r1, y))
    if beta1 < 0:
        raise ValueError("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1)
    if beta1 == 0.0:
        return x, SolveReport(0, np.array([0.0]), "converged", "minres_rel")

    history = [1.0]
    oldb, beta = 0.0, beta1
    dbar, epsln, phibar = 0.0, 0.0, beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1.copy()
    status = "max_iters"
    k_done = 0
    for itn in range(1, cfg.max_iters + 1):
        v = y / beta
        y = op.apply(v)
        if itn >= 2:
            y -= (beta / oldb) * r1
        alfa = float(np.dot(v, y))
        y -= (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = precond.apply(r2) if precond is not None else r2.copy()
        oldb = beta
        beta2 = float(np.dot(r2, y))
        if beta2 < 0:
            raise ValueError("preconditioner is not positive definite")
        beta = np.sqrt(beta2)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(float(np.hypot(gbar, beta)), 1e-300)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w

        rel = phibar / beta1
        history.append(rel)
        k_done = itn
        if cfg.callback is not None and cfg.callback(itn, x, rel):
            status = "converged"
            break
        if rel <= cfg.tol:
            status = "converged"
            break
        if not np.isfinite(rel):
            raise FloatingPointError(f"MINRES: non-finite residual at iteration {itn}")
    return x, SolveReport(k_done, np.array(history), status, "minres_rel")


def conjugate_residuals(op: LinearOperator, b: np.ndarray, cfg: KrylovConfig,
                        precond: LinearOperator | None = None
                        ) -> tuple[np.ndarray, SolveReport]:
    """Preconditioned conjugate residuals for SPD systems."""
    b = np.asarray(b, dtype=np.float64)
    n = op.dim
    x = np.zeros(n)
    r = b.copy()
    z = precond.apply(r) if precond is not None else r.copy()
    rz0 = float(np.dot(r, z))
    if rz0 < 0:
        raise ValueError("preconditioner is not positive definite")
    norm0 = np.sqrt(rz0)
    if norm0 == 0.0:
        return x, SolveReport(0, np.array([0.0]), "converged", "cr_rel")
    history = [1.0]
    pk = z.copy()
    Az = op.apply(z)
    Ap = Az.copy()
    zAz = float(np.dot(z, Az))
    status = "max_iters"
    k_done = 0
    for k in range(1, cfg.max_iters + 1):
        MAp = precond.apply(Ap) if precond is not None else Ap
        den = float(np.dot(Ap, MAp))
        if den <= 0:
            raise RuntimeError(f"conjugate residuals breakdown at iteration {k}")
        alpha = zAz / den
        x = x + alpha * pk
        r = r - alpha * Ap
        z = z - alpha * MAp
        Az = op.apply(z)
        zAz_new = float(np.dot(z, Az))
        rel = np.sqrt(max(float(np.dot(r, z if precond is not None else r)), 0.0)) / norm0
        history.append(rel)
        k_done = k
        if cfg.callback is not None and cfg.callback(k, x, rel):
            status = "converged"
            break
        if rel <= cfg.tol:
            status = "converged"
            break
        if zAz == 0.0:
            raise RuntimeError(f"conjugate residuals breakdown at iteration {k}")
        betak = zAz_new / zAz
        zAz = zAz_new
        pk = z + betak * pk
        Ap = Az + betak * Ap
    return x, SolveReport(k_done, np.array(history), status, "cr_rel")


def admm_gmres(op, cfg: KrylovConfig, u0: np.ndarray | None = None,
               gate: str = "native") -> tuple[np.ndarray, SolveReport]:
    """GMRES acceleration of the ADMM fixed-point map.

    Solves (I - G) du = r with r = u0 - T(u0), evaluating each product as
    h - [T(u0 + h) - T(u0)], and returns u0 - du.  The residual history is
    the fixed-point metric ||u_k - T(u_k)|| relative to its initial value,
    which GMRES minimizes over the Krylov subspace at every step.

    gate="native" declares convergence on that metric; gate="saddle"
    additionally reconstructs the iterate each step and stops once the
    saddle-system relative residual meets cfg.tol.
    """
    if gate not in ("native", "saddle"):
        raise ValueError("gate must be 'native' or 'saddle'")
    u0 = np.zeros(op.dim) if u0 is None else np.asarray(u0, dtype=np.float64)
    Tu0 = op.apply_T(u0)
    r = u0 - Tu0
    rnorm = float(np.linalg.norm(r))
    if rnorm == 0.0:
        rep = SolveReport(0, np.array([0.0]), "converged", "m_metric_rel",
                          np.array([0.0]), op.saddle_residual(u0))
        return u0.copy(), rep

    lin = LinearOperator(op.dim, lambda h: h - (op.apply_T(u0 + h) - Tu0))

    callback = cfg.callback
    native_tol = cfg.tol
    if gate == "saddle":
        # the callback is the real gate; the native tol only guards against
        # iterating past floating-point stagnation
        native_tol = 1e-13

        def callback(k, du, res, _user=cfg.callback):
            if _user is not None and _user(k, du, res):
                return True
            return op.saddle_residual(u0 - du) <= cfg.tol

    inner = KrylovConfig(tol=native_tol, max_iters=cfg.max_iters, restart=cfg.restart,
                         callback=callback, reorth_threshold=cfg.reorth_threshold)
    if cfg.restart is not None:
        du, rep = gmres_restarted(lin, r, inner)
    else:
        du, rep = gmres(lin, r, inner)
    u = u0 - du
    final_saddle = op.saddle_residual(u)
    status = rep.status
    if gate == "saddle" and status == "converged" and final_saddle > cfg.tol:
        # hit floating-point stagnation without meeting the saddle gate
        status = "stalled"
    report = SolveReport(rep.iterations, rep.residual_history, status,
                         "m_metric_rel", rep.residual_history * rnorm, final_saddle)
    return u, report
