"""Spatial partial-correlation estimation from node-wise regressions.

Residuals feed a debiased covariance estimate

    Phi_ii = (1/(n_l p)) sum_{k,t} e_ti^2
    Phi_ij = -(1/(n_l p)) sum_{k,t} (e_ti e_tj + e_tj^2 b_ji + e_ti^2 b_ij)

whose expectation at the true coefficients is the scaled inverse-precision
Phi_ij = Omega_ij / (Omega_ii Omega_jj); from it

    Omega_ij = Phi_ij / (Phi_ii Phi_jj)
    rho_ij   = -Phi_ij / sqrt(Phi_ii Phi_jj)

so the rho diagonal is -1 by convention and is excluded from edge sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MultiSessionDataset
from .errors import NonPositiveDiagonal, ShapeMismatch
from .grouplasso import NodewiseFit, cv_gamma, fit_all_nodes


@dataclass(frozen=True)
class SpatialFit:
    """Per-session spatial estimates plus fit diagnostics."""

    beta: np.ndarray  # (m, q, q); column i = coefficients for node i, diag 0
    residuals: tuple[np.ndarray, ...]  # per session (n_l, p, q)
    phi: np.ndarray  # (m, q, q) debiased covariance of innovations
    omega: np.ndarray  # (m, q, q) precision estimate
    rho: np.ndarray  # (m, q, q) partial correlations, diagonal -1
    gamma: np.ndarray  # (q,) penalty per node
    converged: tuple[bool, ...]
    kkt_residuals: tuple[float, ...]
    nonpositive_diag: tuple[bool, ...]  # per session


def residuals(
    dataset: MultiSessionDataset, beta: np.ndarray
) -> tuple[np.ndarray, ...]:
    """Node-wise regression residuals per trial: eps = X - X @ beta_l."""
    beta = np.asarray(beta, dtype=np.float64)
    dims = dataset.dims
    if beta.shape != (dims.m, dims.q, dims.q):
        raise ShapeMismatch(
            f"beta has shape {beta.shape}, expected {(dims.m, dims.q, dims.q)}"
        )
    out = []
    for l, arr in enumerate(dataset.sessions):
        out.append(arr - arr @ beta[l])
    return tuple(out)


def debiased_phi(
    resids: tuple[np.ndarray, ...],
    beta: np.ndarray,
) -> tuple[np.ndarray, tuple[bool, ...]]:
    """Debiased innovation covariance per session, with non-positive-diagonal flags.

    The returned matrices are exactly symmetric (asymmetry is checked against
    1e-12 before averaging).  A True flag marks a session whose estimated
    diagonal has a non-positive entry; downstream stages treat that as fatal.
    """
    beta = np.asarray(beta, dtype=np.float64)
    m = len(resids)
    q = beta.shape[2]
    phi = np.empty((m, q, q))
    flags = []
    for l in range(m):
        e = np.asarray(resids[l])
        n_l, p, _ = e.shape
        flat = e.reshape(n_l * p, q)
        cross = flat.T @ flat
        cross = (cross + cross.T) / 2.0
        ssq = np.diag(cross).copy()
        scale = 1.0 / (n_l * p)
        shift = beta[l].T * ssq[None, :]  # (i, j) -> beta[j, i] * ssq[j]
        mat = -(cross + shift + shift.T) * scale
        np.fill_diagonal(mat, ssq * scale)
        asym = float(np.max(np.abs(mat - mat.T)))
        if asym > 1e-12:
            raise AssertionError(f"phi asymmetry {asym} exceeds 1e-12")
        mat = (mat + mat.T) / 2.0
        phi[l] = mat
        flags.append(bool(np.any(np.diag(mat) <= 0.0)))
    return phi, tuple(flags)


def omega_rho(phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Precision and partial-correlation estimates from debiased covariances.

    Raises NonPositiveDiagonal if any Phi_ii <= 0; inference cannot proceed
    from a non-positive variance and no clamping is attempted.
    """
    phi = np.asarray(phi, dtype=np.float64)
    single = phi.ndim == 2
    stack = phi[None] if single else phi
    omega = np.empty_like(stack)
    rho = np.empty_like(stack)
    for l, mat in enumerate(stack):
        d = np.diag(mat)
        if np.any(d <= 0.0):
            bad = np.flatnonzero(d <= 0.0).tolist()
            raise NonPositiveDiagonal(
                f"non-positive Phi diagonal at locations {bad} (session {l})"
            )
        omega[l] = mat / np.outer(d, d)
        rt = np.sqrt(d)
        rho[l] = -mat / np.outer(rt, rt)
    if single:
        return omega[0], rho[0]
    return omega, rho


def fit_spatial(
    dataset: MultiSessionDataset,
    gamma=None,
    c0: float = 0.5,
    tol: float = 1e-8,
    kkt_tol: float = 1e-6,
    max_sweeps: int = 2000,
    normalize: bool = True,
    n_jobs: int = 1,
    cv_folds: int = 5,
    cv_grid=None,
) -> SpatialFit:
    """Full spatial pipeline: node-wise group lasso, residuals, Phi, Omega, rho.

    gamma may be None or "theory" (rate-based default), a scalar, a (q,)
    array, or "cv" for cross-validation over a log grid.
    """
    if isinstance(gamma, str) and gamma == "cv":
        gamma = cv_gamma(dataset, grid=cv_grid, folds=cv_folds, c0=c0).best_gamma
    fit: NodewiseFit = fit_all_nodes(
        dataset,
        gamma=gamma,
        c0=c0,
        tol=tol,
        kkt_tol=kkt_tol,
        max_sweeps=max_sweeps,
        normalize=normalize,
        n_jobs=n_jobs,
    )
    res = residuals(dataset, fit.beta)
    phi, flags = debiased_phi(res, fit.beta)
    omega, rho = omega_rho(phi)
    return SpatialFit(
        beta=fit.beta,
        residuals=res,
        phi=phi,
        omega=omega,
        rho=rho,
        gamma=fit.gamma,
        converged=fit.converged,
        kkt_residuals=fit.kkt_residuals,
        nonpositive_diag=flags,
    )
