"""Hot numeric kernels, numba-jitted with a pure-numpy fallback.

The numba lane is used when numba imports cleanly and the environment
variable ``ECQP_NUMBA`` is unset or truthy; setting ``ECQP_NUMBA=0``
(or ``false``/``off``/``no``) forces the pure-numpy path.  Both lanes
execute the same source, so results agree to floating-point roundoff.
``benchmarks/bench_kernels.py`` times one lane against the other.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a hard dep, but stay importable
    numba = None
    NUMBA_AVAILABLE = False


def _numba_wanted() -> bool:
    flag = os.environ.get("ECQP_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


NUMBA_ENABLED = NUMBA_AVAILABLE and _numba_wanted()

_PY_IMPLS: dict = {}
_NB_IMPLS: dict = {}


def _kernel(fn):
    """Register fn in both lanes and bind the module name per the env flag."""
    _PY_IMPLS[fn.__name__] = fn
    if NUMBA_AVAILABLE:
        _NB_IMPLS[fn.__name__] = numba.njit(cache=True)(fn)
    return _NB_IMPLS[fn.__name__] if NUMBA_ENABLED else fn


def get_impl(name: str, lane: str):
    """Fetch a kernel by lane ("numba" or "numpy"); used by the benchmark."""
    if lane == "numpy":
        return _PY_IMPLS[name]
    if lane == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("numba is not available")
        return _NB_IMPLS[name]
    raise ValueError(f"unknown lane {lane!r}")


@_kernel
def lower_solve(L, b):
    """Forward substitution: solve L x = b for lower-triangular L."""
    n = L.shape[0]
    x = b.copy()
    for i in range(n):
        s = x[i] - np.dot(L[i, :i], x[:i])
        x[i] = s / L[i, i]
    return x


@_kernel
def upper_solve(U, b):
    """Back substitution: solve U x = b for upper-triangular U."""
    n = U.shape[0]
    x = b.copy()
    for i in range(n - 1, -1, -1):
        s = x[i] - np.dot(U[i, i + 1:], x[i + 1:])
        x[i] = s / U[i, i]
    return x


@_kernel
def chol_pivot(M):
    """Run an unblocked Cholesky; return the first non-positive pivot index, or -1."""
    n = M.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = M[j, j] - np.dot(L[j, :j], L[j, :j])
        if s <= 0.0 or not math.isfinite(s):
            return j
        L[j, j] = math.sqrt(s)
        for i in range(j + 1, n):
            L[i, j] = (M[i, j] - np.dot(L[i, :j], L[j, :j])) / L[j, j]
    return -1


@_kernel
def mgs_orthogonalize(basis, nrows, w):
    """One modified Gram-Schmidt pass of w against the first nrows rows of basis.

    Mutates w in place and returns the projection coefficients.
    """
    h = np.empty(nrows)
    for j in range(nrows):
        hj = np.dot(basis[j], w)
        w -= hj * basis[j]
        h[j] = hj
    return h


@_kernel
def admm_sweep(A, AT, B, BT, LD, LDT, LB, LBT, V, VT, mid,
               atd_c, btd_p, c, p, d, beta, omega, warmup,
               x, z, y, ax, bz, dx, rhs_norm, tol, max_steps,
               m_hist, saddle_hist):
    """Run up to max_steps fused ADMM (or over-relaxed ADMM) iterations.

    State vectors x, z, y and the maintained products ax = A x, bz = B z,
    dx = D x are updated in place.  m_hist[k] records the fixed-point
    residual ||u_k - T(u_k)|| and saddle_hist[k] the relative KKT residual
    of the (k+1)-th iterate.  Returns (iterations_done, status) with
    status 0 = converged, 1 = max_steps reached, 2 = non-finite values.
    """
    for k in range(max_steps):
        om = 1.0 if k < warmup else omega

        # x-update: (D/beta + A^T A) xT = atd_c - A^T (B z + y), via
        # Woodbury with the cached eigendecomposition of (A D^-1 A^T)^-1
        rhs_x = atd_c - AT @ (bz + y)
        t1 = upper_solve(LDT, lower_solve(LD, rhs_x))
        w2 = VT @ (A @ t1)
        w2 = mid * w2
        t2 = AT @ (V @ w2)
        t3 = upper_solve(LDT, lower_solve(LD, t2))
        xT = beta * (t1 - t3)
        axT = A @ xT

        # z-update: B^T B zT = btd_p - B^T (A xT + y)
        rhs_z = btd_p - BT @ (axT + y)
        zT = upper_solve(LBT, lower_solve(LB, rhs_z))
        bzT = B @ zT

        # y-update (scaled multiplier form)
        yT = y + axT + bzT - d
        dxT = beta * (rhs_x - AT @ axT)

        m2 = 0.0
        for i in range(x.shape[0]):
            m2 += (xT[i] - x[i]) ** 2
        for i in range(z.shape[0]):
            m2 += (zT[i] - z[i]) ** 2
        for i in range(y.shape[0]):
            m2 += (yT[i] - y[i]) ** 2
        m_hist[k] = math.sqrt(m2)

        if om == 1.0:
            x[:] = xT
            z[:] = zT
            y[:] = yT
            ax[:] = axT
            bz[:] = bzT
            dx[:] = dxT
        else:
            x[:] = (1.0 - om) * x + om * xT
            z[:] = (1.0 - om) * z + om * zT
            y[:] = (1.0 - om) * y + om * yT
            ax[:] = (1.0 - om) * ax + om * axT
            bz[:] = (1.0 - om) * bz + om * bzT
            dx[:] = (1.0 - om) * dx + om * dxT

        # relative residual of the saddle KKT system at the new iterate;
        # the saddle multiplier is beta * y
        ay = AT @ y
        by = BT @ y
        s2 = 0.0
        for i in range(x.shape[0]):
            r = dx[i] + beta * ay[i] + c[i]
            s2 += r * r
        for i in range(z.shape[0]):
            r = beta * by[i] + p[i]
            s2 += r * r
        for i in range(y.shape[0]):
            r = ax[i] + bz[i] - d[i]
            s2 += r * r
        s = math.sqrt(s2) / rhs_norm
        saddle_hist[k] = s

        if not math.isfinite(s):
            return k + 1, 2
        if s <= tol:
            return k + 1, 0
    return max_steps, 1
