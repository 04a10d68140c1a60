"""Solvers and diagnostics for equality-constrained convex quadratic programs.

Subpackages:
  linalg       dense factorization/eigensolver kernels and the seeded RNG
  problem      problem data model, spectral constants, instance generators
  admm         the splitting operator, fixed-point and over-relaxed solves
  krylov       GMRES (full/restarted), MINRES, conjugate residuals, and the
               GMRES-accelerated fixed-point driver
  precond      the four classic saddle-point preconditioners
  diagnostics  K(beta) spectrum, delta, kappa_X, nu, rate curves
  sdpnewton    Kronecker-structured SDP Newton subproblems
  cli          benchmark and reproduction harness
"""

from . import admm, diagnostics, krylov, linalg, precond, problem, sdpnewton
from ._kernels import NUMBA_AVAILABLE, NUMBA_ENABLED

__all__ = [
    "admm", "diagnostics", "krylov", "linalg", "precond", "problem",
    "sdpnewton", "NUMBA_AVAILABLE", "NUMBA_ENABLED",
]

__version__ = "0.1.0"
