"""Spectral diagnostics for the m x m core matrix K(beta).

K carries all nontrivial dynamics of the splitting iteration: with
B = [Q P] [R; 0] and Dt = (A D^-1 A^T)^-1 = V diag(lam) V^T,

    K = [Q^T; -P^T] (V diag((beta - lam)/(beta + lam)) V^T) [Q P],

its 2-norm is exactly (gamma - 1)/(gamma + 1) with
gamma = max(L/beta, beta/mu), and the eigenvalues stay inside the disk of
that radius.  This module computes K, its spectrum, the outlier margin
delta with its block-norm lower bound, the eigenvector conditioning
kappa_X, the nonnormality measure nu with its dimension bound, and the
evaluable per-iteration rate curves.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .admm import optimal_beta
from .problem import EcqpProblem, SpectralConstants, spectral_constants

COMPLEX_IM_RTOL = 1e-8  # |Im| above this (times max(norm, 1)) counts as an outlier


@dataclass
class KMatrixReport:
    K: np.ndarray = field(repr=False)
    Q: np.ndarray = field(repr=False)
    P: np.ndarray = field(repr=False)
    beta: float
    gamma: float
    norm_closed_form: float
    norm_numeric: float


@dataclass
class DiagnosticsReport:
    kappa: float
    beta: float
    gamma: float
    disk_radius: float
    norm_K: float
    eigenvalues: np.ndarray = field(repr=False)
    delta: float
    delta_lb: float
    kappa_X: float
    nu: float
    nu_bound: float


def build_K(prob: EcqpProblem, beta: float | None = None,
            constants: SpectralConstants | None = None) -> KMatrixReport:
    """Assemble K(beta) from the cached eigendecomposition and the full
    orthogonal factor of B."""
    constants = constants if constants is not None else spectral_constants(prob)
    beta = optimal_beta(constants) if beta is None else float(beta)
    if beta <= 0:
        raise ValueError("beta must be positive")
    Q, P, _R = linalg.qr_split(prob.B)
    lam = constants.dtilde_eigs
    V = constants.dtilde_vecs
    f = (beta - lam) / (beta + lam)
    mid = (V * f) @ V.T
    U = np.hstack([Q, P])
    S = np.vstack([Q.T, -P.T])
    K = S @ mid @ U
    gamma = max(constants.L / beta, beta / constants.mu)
    closed = (gamma - 1.0) / (gamma + 1.0)
    return KMatrixReport(K=K, Q=Q, P=P, beta=beta, gamma=gamma,
                         norm_closed_form=closed,
                         norm_numeric=linalg.spectral_norm(K))


def k_eigenvalues(report: KMatrixReport) -> np.ndarray:
    w, _ = linalg.gen_eig(report.K, want_vectors=False)
    return w


def compute_delta(report: KMatrixReport,
                  eigenvalues: np.ndarray | None = None) -> tuple[float, float]:
    """The relative real-part margin of the complex outliers and its
    block-norm lower bound.

    delta = 1 - max(Re lam)/||K|| over eigenvalues with nonzero imaginary
    part; with no outliers the vacuous max sits at the disk's leftmost
    point, giving delta = 2.  The closed-form norm is used throughout.
    delta_lb comes from the spectral norms of K's diagonal blocks.
    """
    norm = report.norm_closed_form
    if norm <= 0.0:
        return 2.0, 2.0
    w = eigenvalues if eigenvalues is not None else k_eigenvalues(report)
    mask = np.abs(w.imag) > COMPLEX_IM_RTOL * max(norm, 1.0)
    delta = 2.0 if not np.any(mask) else 1.0 - float(w.real[mask].max()) / norm
    l = report.Q.shape[1]
    K11 = linalg.spectral_norm(0.5 * (report.K[:l, :l] + report.K[:l, :l].T))
    K22 = linalg.spectral_norm(0.5 * (report.K[l:, l:] + report.K[l:, l:].T))
    delta_lb = 1.0 - (K11 + K22) / (2.0 * norm)
    return float(delta), float(delta_lb)


def compute_kappa_X(report: KMatrixReport) -> float:
    """Condition number of the unit-column eigenvector matrix of K; inf when
    K is numerically defective."""
    if report.K.shape[0] == 0:
        return 1.0
    _w, X = linalg.gen_eig(report.K, want_vectors=True)
    try:
        return linalg.condition_2(X)
    except linalg.SingularMatrixError:
        warnings.warn("K is numerically defective; reporting kappa_X = inf")
        return float("inf")


def compute_nu(report: KMatrixReport) -> tuple[float, float]:
    """Nonnormality measure nu = ||K^T K - K K^T||_F^(1/2) / ||K||_F and its
    dimension bound (8 min(l, m - l))^(1/4) / (||K||_F / ||K||)."""
    K = report.K
    fro = linalg.frobenius_norm(K)
    if fro == 0.0:
        return 0.0, float("inf")
    comm = K.T @ K - K @ K.T
    nu = float(np.sqrt(linalg.frobenius_norm(comm))) / fro
    m = K.shape[0]
    l = report.Q.shape[1]
    bound = (8.0 * min(l, m - l)) ** 0.25 / (fro / report.norm_numeric)
    return nu, float(bound)


def diagnose(prob: EcqpProblem, beta: float | None = None,
             constants: SpectralConstants | None = None) -> DiagnosticsReport:
    constants = constants if constants is not None else spectral_constants(prob)
    report = build_K(prob, beta, constants)
    w = k_eigenvalues(report)
    delta, delta_lb = compute_delta(report, w)
    kappa_X = compute_kappa_X(report)
    nu, nu_bound = compute_nu(report)
    return DiagnosticsReport(
        kappa=constants.kappa, beta=report.beta, gamma=report.gamma,
        disk_radius=report.norm_closed_form, norm_K=report.norm_numeric,
        eigenvalues=w, delta=delta, delta_lb=delta_lb,
        kappa_X=kappa_X, nu=nu, nu_bound=nu_bound)


def fit_geometric_rate(values, start: int, stop: int) -> float:
    """Per-iteration geometric rate exp(slope) from a least-squares line
    through log(values[k]) for k in [start, stop]."""
    v = np.asarray(values, dtype=np.float64)
    stop = min(stop, len(v) - 1)
    k = np.arange(start, stop + 1)
    vals = v[start:stop + 1]
    mask = np.isfinite(vals) & (vals > 0)
    if mask.sum() < 2:
        return float("nan")
    slope = np.polyfit(k[mask], np.log(vals[mask]), 1)[0]
    return float(np.exp(slope))


def chebyshev_value(k: int, x: float) -> float:
    """T_k(x) by the three-term recurrence."""
    if k == 0:
        return 1.0
    t0, t1 = 1.0, x
    for _ in range(k - 1):
        t0, t1 = t1, 2.0 * x * t1 - t0
    return t1


def bound_curves(gamma: float, delta: float, k_max: int) -> dict[str, np.ndarray]:
    """Evaluable per-iteration rate curves, without unknown prefactors.

    Keys: "admm" (gamma/(gamma+1))^(k-2); "gmres_worst"
    ((gamma-1)/(gamma+1))^(k-2); "cheby_exact" 1/|T_k(1/a)|; "cheby_bound"
    2((sqrt(gamma)-1)/(sqrt(gamma)+1))^k; "outlier_damped"
    ((sqrt(gamma)-1)/(sqrt(gamma)+1))^(delta(k-2)/6); "disk_segment"
    (1-delta/2)^(k/2).  Entries are indexed by iteration k = 0..k_max.
    """
    if not np.isfinite(gamma) or gamma < 1:
        raise ValueError("gamma must be finite and >= 1")
    if not (0 < delta <= 2):
        raise ValueError("delta must lie in (0, 2]")
    a = (gamma - 1.0) / (gamma + 1.0)
    if a >= 1.0:
        raise ValueError("disk radius >= 1: the iteration would not contract")
    k = np.arange(k_max + 1, dtype=np.float64)
    shifted = np.maximum(k - 2.0, 0.0)
    rate_sqrt = (np.sqrt(gamma) - 1.0) / (np.sqrt(gamma) + 1.0)
    with np.errstate(over="ignore", divide="ignore"):
        cheby = np.array([1.0 / abs(chebyshev_value(int(j), 1.0 / a)) if a > 0 else
                          (1.0 if j == 0 else 0.0) for j in k])
    curves = {
        "admm": (gamma / (gamma + 1.0)) ** shifted,
        "gmres_worst": a ** shifted,
        "cheby_exact": cheby,
        "cheby_bound": 2.0 * rate_sqrt ** k,
        "outlier_damped": rate_sqrt ** (delta * shifted / 6.0),
        "disk_segment": (1.0 - delta / 2.0) ** (k / 2.0),
    }
    return curves
