"""Temporal covariance estimation via banded modified-Cholesky regressions.

Each time point t is regressed on its h_l predecessors across stacked trials
and locations, giving strictly upper-triangular coefficients (column t holds
the regression for target t) and a diagonal innovation variance Phi.  Writing
P = clip(I - beta_hat) for the singular-value truncation to [1/eta, eta], the
precision build is P Phi^{-1} P'; this is the factorization the sequential
regressions identify (residual t is column contrast t, so Cov(X)^{-1}
= (I - beta) Phi^{-1} (I - beta)').  The covariance is rescaled to trace p
to match the model's identifiability convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import MultiSessionDataset, stack_temporal
from .errors import (
    BadAlpha,
    ConfigError,
    NonPositiveDiagonal,
    ShapeMismatch,
    SingularGram,
    SvdFailure,
)

_COND_LIMIT = 1e12
_RIDGE_REL = 1e-8


def default_bandwidth(
    n_l: int, q: int, alpha: float, p: int, rule: str = "default"
) -> int:
    """Bandwidth floor((n_l q)^(1/(1+alpha))), clamped to [1, p-1].

    rule "conservative" uses the slower-growing exponent 1/(2(alpha+1)).
    """
    if alpha <= 0:
        raise BadAlpha("alpha must be > 0")
    if n_l < 1 or q < 1 or p < 2:
        raise ShapeMismatch("need n_l >= 1, q >= 1, p >= 2")
    if rule == "default":
        expo = 1.0 / (1.0 + alpha)
    elif rule == "conservative":
        expo = 1.0 / (2.0 * (alpha + 1.0))
    else:
        raise ConfigError(f"unknown bandwidth rule {rule!r}")
    h = int(math.floor((n_l * q) ** expo))
    return max(1, min(h, p - 1))


def fit_banded_regression(
    stacked: np.ndarray, h: int
) -> tuple[np.ndarray, np.ndarray]:
    """Banded least squares per time point on a stacked (n_l q, p) matrix.

    Column t of the returned (p, p) beta holds the coefficients of the
    regression of time t on times [max(0, t-h), t); rows outside that band
    are zero, and t = 0 has no predecessors so its column is zero.  The
    second output is the innovation variance Phi_tt = mean squared residual.
    Ill-conditioned Gram matrices (condition > 1e12) get a ridge
    1e-8 tr(G)/h before solving.
    """
    y = np.ascontiguousarray(stacked, dtype=np.float64)
    rows, p = y.shape
    if h < 1 or h > p - 1:
        raise ShapeMismatch(f"bandwidth {h} outside [1, {p - 1}]")
    beta = np.zeros((p, p))
    phi = np.empty(p)
    for t in range(p):
        lo = max(0, t - h)
        band = np.arange(lo, t)
        if band.size == 0:
            phi[t] = float(y[:, t] @ y[:, t]) / rows
            continue
        xb = y[:, band]
        g = xb.T @ xb
        g = (g + g.T) / 2.0
        rhs = xb.T @ y[:, t]
        if np.linalg.cond(g) > _COND_LIMIT:
            g = g + (_RIDGE_REL * np.trace(g) / h) * np.eye(band.size)
        try:
            coef = scipy.linalg.solve(g, rhs, assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
            raise SingularGram(
                f"band Gram at t={t} is singular beyond the ridge fallback: {exc}"
            ) from exc
        beta[band, t] = coef
        r = y[:, t] - xb @ coef
        phi[t] = float(r @ r) / rows
    return beta, phi


def truncate_singular(a: np.ndarray, eta: float) -> np.ndarray:
    """Clip the singular values of a square matrix to [1/eta, eta]."""
    if eta < 1.0:
        raise ConfigError(f"eta must be >= 1, got {eta}")
    a = np.asarray(a, dtype=np.float64)
    try:
        u, s, vt = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise SvdFailure(f"SVD did not converge: {exc}") from exc
    s = np.clip(s, 1.0 / eta, eta)
    return (u * s) @ vt


@dataclass(frozen=True)
class TemporalAssembly:
    omega_bar: np.ndarray
    sigma_bar: np.ndarray
    sigma_hat: np.ndarray  # trace exactly p
    omega_hat: np.ndarray  # inverse of sigma_hat
    frob_sq_over_p: float  # ||sigma_hat||_F^2 / p


def assemble_temporal(
    beta: np.ndarray, phi: np.ndarray, eta: float = 10.0
) -> TemporalAssembly:
    """Precision and trace-p covariance from banded coefficients and variances."""
    beta = np.asarray(beta, dtype=np.float64)
    p = beta.shape[0]
    phi = np.asarray(phi, dtype=np.float64)
    if phi.shape != (p,):
        raise ShapeMismatch(f"phi has shape {phi.shape}, expected ({p},)")
    if np.any(phi <= 0.0):
        bad = np.flatnonzero(phi <= 0.0).tolist()
        raise NonPositiveDiagonal(f"non-positive innovation variance at t={bad}")
    factor = truncate_singular(np.eye(p) - beta, eta)
    # column t of factor is the contrast whose variance is phi[t]
    omega_bar = (factor / phi[None, :]) @ factor.T
    omega_bar = (omega_bar + omega_bar.T) / 2.0
    sigma_bar = scipy.linalg.cho_solve(
        scipy.linalg.cho_factor(omega_bar, lower=True), np.eye(p)
    )
    sigma_bar = (sigma_bar + sigma_bar.T) / 2.0
    tr = float(np.trace(sigma_bar))
    sigma_hat = sigma_bar * (p / tr)
    omega_hat = omega_bar * (tr / p)
    frob = float(np.sum(sigma_hat * sigma_hat)) / p
    return TemporalAssembly(
        omega_bar=omega_bar,
        sigma_bar=sigma_bar,
        sigma_hat=sigma_hat,
        omega_hat=omega_hat,
        frob_sq_over_p=frob,
    )


@dataclass(frozen=True)
class TemporalFit:
    """Per-session temporal estimates."""

    h: tuple[int, ...]
    eta: float
    beta: np.ndarray  # (m, p, p)
    phi: np.ndarray  # (m, p) innovation variances
    omega_bar: np.ndarray  # (m, p, p)
    sigma_bar: np.ndarray  # (m, p, p)
    sigma_hat: np.ndarray  # (m, p, p), trace p each
    omega_hat: np.ndarray  # (m, p, p)
    frob_sq_over_p: np.ndarray  # (m,)


def fit_temporal(
    dataset: MultiSessionDataset,
    h=None,
    eta: float = 10.0,
    alpha=1.0,
    rule: str = "default",
) -> TemporalFit:
    """Banded temporal fit for every session.

    h may be None (bandwidth from the default rule and alpha), an int shared
    by all sessions, or one int per session.  alpha is scalar or per session
    and only matters when h is None.
    """
    dims = dataset.dims
    if np.isscalar(alpha) or alpha is None:
        alphas = (float(alpha),) * dims.m
    else:
        alphas = tuple(float(a) for a in alpha)
        if len(alphas) != dims.m:
            raise ConfigError("alpha must be scalar or one value per session")
    if h is None:
        hs = tuple(
            default_bandwidth(dims.n[l], dims.q, alphas[l], dims.p, rule=rule)
            for l in range(dims.m)
        )
    elif np.isscalar(h):
        hs = (int(h),) * dims.m
    else:
        hs = tuple(int(v) for v in h)
        if len(hs) != dims.m:
            raise ConfigError("h must be scalar or one value per session")
    beta = np.zeros((dims.m, dims.p, dims.p))
    phi = np.empty((dims.m, dims.p))
    omega_bar = np.empty((dims.m, dims.p, dims.p))
    sigma_bar = np.empty_like(omega_bar)
    sigma_hat = np.empty_like(omega_bar)
    omega_hat = np.empty_like(omega_bar)
    frob = np.empty(dims.m)
    for l in range(dims.m):
        stacked = stack_temporal(dataset.sessions[l])
        b, f = fit_banded_regression(stacked, hs[l])
        asm = assemble_temporal(b, f, eta=eta)
        beta[l] = b
        phi[l] = f
        omega_bar[l] = asm.omega_bar
        sigma_bar[l] = asm.sigma_bar
        sigma_hat[l] = asm.sigma_hat
        omega_hat[l] = asm.omega_hat
        frob[l] = asm.frob_sq_over_p
    return TemporalFit(
        h=hs,
        eta=float(eta),
        beta=beta,
        phi=phi,
        omega_bar=omega_bar,
        sigma_bar=sigma_bar,
        sigma_hat=sigma_hat,
        omega_hat=omega_hat,
        frob_sq_over_p=frob,
    )
