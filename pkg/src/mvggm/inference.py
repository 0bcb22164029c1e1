"""Simultaneous edge tests: pooled statistic, asymptotic covariance, bootstrap.

The pooled statistic for edge (i, j) is

    T_ij = (1/sqrt(m)) sum_l sqrt(n_l p) rho_l[i, j]

optionally sign-addressed by user-supplied per-session signs.  Its asymptotic
covariance over an edge set E is a polynomial in the partial correlations
(with rho_kk taken as 1 inside the bracket), scaled per session by
||Sigma_T||_F^2 / p.  The null distribution of the sup-norm is approximated
by B Gaussian draws from N(0, S_EE); the (1-alpha) bootstrap quantile is the
ceil((1-alpha) B)-th order statistic of their sup-norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .data import EdgeSet, MultiSessionDataset
from .errors import (
    BadAlpha,
    ConfigError,
    EmptyEdgeSet,
    NegativeC,
    NotPSD,
    ZeroVariance,
)
from .simulate import substream
from .spatial import SpatialFit, fit_spatial
from .temporal import TemporalFit, fit_temporal

_STREAM_BOOTSTRAP = 3


def scale_weight(n: tuple[int, ...], p: int) -> float:
    """w = (1/sqrt(m)) sum_l sqrt(n_l p); the statistic's per-unit-rho scale."""
    m = len(n)
    return sum(math.sqrt(n_l * p) for n_l in n) / math.sqrt(m)


@dataclass(frozen=True)
class TestStatistic:
    edges: EdgeSet
    t_hat: np.ndarray  # (|E|,)
    sup_norm: float
    weight: float  # scale_weight(n, p)


def _check_signs(signs, m: int, n_edges: int) -> np.ndarray | None:
    if signs is None:
        return None
    arr = np.asarray(signs, dtype=np.float64)
    if arr.shape != (m, n_edges):
        raise ConfigError(
            f"signs must have shape {(m, n_edges)}, got {arr.shape}"
        )
    if not np.all(np.abs(arr) == 1.0):
        raise ConfigError("signs must be +1 or -1")
    return arr


def test_statistic(
    rho: np.ndarray,
    n: tuple[int, ...],
    p: int,
    edges: EdgeSet,
    signs=None,
) -> TestStatistic:
    """Pooled (optionally sign-addressed) statistic over an edge set."""
    rho = np.asarray(rho, dtype=np.float64)
    m = rho.shape[0]
    if len(n) != m:
        raise ConfigError("n must list one trial count per session")
    if len(edges) == 0:
        raise EmptyEdgeSet("edge set is empty")
    edges.validate_for(rho.shape[1])
    ii, jj = edges.index_arrays()
    per_session = np.stack(
        [math.sqrt(n[l] * p) * rho[l][ii, jj] for l in range(m)]
    )
    sig = _check_signs(signs, m, len(edges))
    if sig is not None:
        per_session = per_session * sig
    t_hat = per_session.sum(axis=0) / math.sqrt(m)
    return TestStatistic(
        edges=edges,
        t_hat=t_hat,
        sup_norm=float(np.max(np.abs(t_hat))),
        weight=scale_weight(tuple(n), p),
    )


@dataclass(frozen=True)
class AsymptoticCovariance:
    edges: EdgeSet
    matrix: np.ndarray  # (|E|, |E|), symmetric PSD after repair
    psd_repaired: bool
    min_eigenvalue: float  # before any repair


def _session_bracket(rho: np.ndarray, ii: np.ndarray, jj: np.ndarray) -> np.ndarray:
    """Covariance polynomial for one session; rho must have unit diagonal."""
    r_ii = rho[np.ix_(ii, ii)]
    r_jj = rho[np.ix_(jj, jj)]
    r_ij = rho[np.ix_(ii, jj)]
    r_ji = r_ij.T
    rho_e = rho[ii, jj]
    col = rho_e[:, None]
    row = rho_e[None, :]
    return (
        r_ii * r_jj
        + r_ij * r_ji
        + 0.5 * col * row * (r_ii**2 + r_jj**2 + r_ij**2 + r_ji**2)
        - r_ii * row * r_ji
        - r_ii * col * r_ij
        - r_jj * row * r_ij
        - r_jj * col * r_ji
    )


def compute_S(
    rho: np.ndarray,
    frob_sq_over_p: np.ndarray,
    edges: EdgeSet,
) -> AsymptoticCovariance:
    """Asymptotic covariance of the pooled statistic over an edge set.

    rho is (m, q, q).  The bracket is a polynomial in the normalized
    residual covariance Phi_ij / sqrt(Phi_ii Phi_jj), which is -rho off the
    diagonal and 1 on it; the input's diagonal values are ignored.
    frob_sq_over_p is the per-session ||Sigma_T||_F^2 / p.  Negative
    eigenvalues of the assembled matrix are clipped to zero and flagged.
    """
    rho = np.asarray(rho, dtype=np.float64)
    if rho.ndim == 2:
        rho = rho[None]
    frob = np.atleast_1d(np.asarray(frob_sq_over_p, dtype=np.float64))
    m = rho.shape[0]
    if frob.shape != (m,):
        raise ConfigError(f"frob_sq_over_p must have shape ({m},)")
    if len(edges) == 0:
        raise EmptyEdgeSet("edge set is empty")
    edges.validate_for(rho.shape[1])
    ii, jj = edges.index_arrays()
    s = np.zeros((len(edges), len(edges)))
    for l in range(m):
        r = -rho[l]
        np.fill_diagonal(r, 1.0)
        s += frob[l] * _session_bracket(r, ii, jj)
    s /= m
    s = (s + s.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(s)
    min_eig = float(eigvals[0])
    repaired = False
    if min_eig < 0.0:
        repaired = True
        s = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
        s = (s + s.T) / 2.0
    return AsymptoticCovariance(
        edges=edges, matrix=s, psd_repaired=repaired, min_eigenvalue=min_eig
    )


def s_diagonal(rho: np.ndarray, frob_sq_over_p: np.ndarray) -> np.ndarray:
    """Closed-form edgewise variances (1/m) sum_l w_l (1 - rho_ij^2)^2.

    Returns the full (q, q) matrix; the diagonal is meaningless (rho_ii = -1
    gives 0) and is excluded from all edge sets.
    """
    rho = np.asarray(rho, dtype=np.float64)
    if rho.ndim == 2:
        rho = rho[None]
    frob = np.atleast_1d(np.asarray(frob_sq_over_p, dtype=np.float64))
    out = np.zeros(rho.shape[1:])
    for l in range(rho.shape[0]):
        out += frob[l] * (1.0 - rho[l] ** 2) ** 2
    return out / rho.shape[0]


@dataclass(frozen=True)
class BootstrapResult:
    q_hat: float
    sup_norms: np.ndarray  # (B,) in draw order
    alpha: float
    b: int
    seed: int


def order_statistic_quantile(sup_norms: np.ndarray, alpha: float) -> float:
    """ceil((1-alpha) B)-th order statistic, index clamped to [1, B]."""
    b = sup_norms.shape[0]
    if not 0.0 < alpha < 1.0:
        raise BadAlpha(f"alpha must lie in (0, 1), got {alpha}")
    rank = math.ceil((1.0 - alpha) * b)
    rank = min(max(rank, 1), b)
    return float(np.sort(sup_norms)[rank - 1])


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(matrix)
    scale = max(1.0, float(eigvals[-1]))
    if eigvals[0] < -1e-8 * scale:
        raise NotPSD(
            f"covariance has eigenvalue {eigvals[0]:.3e}; expected PSD input"
        )
    return eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))


def bootstrap_quantile(
    s_hat,
    alpha: float,
    b: int = 3000,
    seed: int = 0,
) -> BootstrapResult:
    """Sup-norm quantile of N(0, S_EE) by Monte Carlo.

    s_hat is an AsymptoticCovariance or a PSD matrix.  Draws are Philox
    substreams of the seed, so results are reproducible and independent of
    hardware parallelism.
    """
    matrix = np.asarray(getattr(s_hat, "matrix", s_hat), dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ConfigError("s_hat must be a square matrix")
    if not 0.0 < alpha < 1.0:
        raise BadAlpha(f"alpha must lie in (0, 1), got {alpha}")
    if b < 100:
        raise BadAlpha(f"bootstrap size must be >= 100, got {b}")
    root = _psd_sqrt(matrix)
    rng = substream(int(seed), _STREAM_BOOTSTRAP)
    draws = rng.standard_normal((b, matrix.shape[0]))
    sups = np.max(np.abs(draws @ root.T), axis=1)
    return BootstrapResult(
        q_hat=order_statistic_quantile(sups, alpha),
        sup_norms=sups,
        alpha=float(alpha),
        b=int(b),
        seed=int(seed),
    )


@dataclass(frozen=True)
class TestResult:
    edges: EdgeSet
    t_hat: np.ndarray
    sup_norm: float
    statistic: float  # sup_norm, or the c-shifted statistic
    c: float
    q_hat: float
    reject: bool
    p_value: float
    alpha: float
    b: int
    seed: int
    weight: float
    s_diag: np.ndarray  # (|E|,) edgewise variances from the full S matrix
    psd_repaired: bool


def c_level_test(
    rho: np.ndarray,
    n: tuple[int, ...],
    p: int,
    frob_sq_over_p: np.ndarray,
    edges: EdgeSet,
    c: float = 0.0,
    alpha: float = 0.05,
    b: int = 3000,
    seed: int = 0,
    signs=None,
) -> TestResult:
    """Test sup |rho_E| <= c via the shifted statistic max(|T_ij| - c w).

    c = 0 recovers the exact-null simultaneous test bit for bit.  The
    bootstrap quantile is unchanged by c; only the statistic shifts, which
    makes the decision conservative for composite magnitudes (each |T_ij| is
    reduced by its largest possible null mean).
    """
    if c < 0:
        raise NegativeC(f"c must be >= 0, got {c}")
    stat = test_statistic(rho, n, p, edges, signs=signs)
    cov = compute_S(rho, frob_sq_over_p, edges)
    boot = bootstrap_quantile(cov, alpha=alpha, b=b, seed=seed)
    shifted = float(np.max(np.abs(stat.t_hat) - c * stat.weight))
    reject = bool(shifted > boot.q_hat)
    p_value = float(
        (1.0 + np.count_nonzero(boot.sup_norms >= shifted)) / (boot.b + 1.0)
    )
    return TestResult(
        edges=edges,
        t_hat=stat.t_hat,
        sup_norm=stat.sup_norm,
        statistic=shifted,
        c=float(c),
        q_hat=boot.q_hat,
        reject=reject,
        p_value=p_value,
        alpha=float(alpha),
        b=int(b),
        seed=int(seed),
        weight=stat.weight,
        s_diag=np.diag(cov.matrix).copy(),
        psd_repaired=cov.psd_repaired,
    )


def simultaneous_test(
    rho: np.ndarray,
    n: tuple[int, ...],
    p: int,
    frob_sq_over_p: np.ndarray,
    edges: EdgeSet,
    alpha: float = 0.05,
    b: int = 3000,
    seed: int = 0,
    signs=None,
) -> TestResult:
    """Sup-norm bootstrap test of the exact null rho_ij = 0 for all (i,j) in E."""
    return c_level_test(
        rho,
        n,
        p,
        frob_sq_over_p,
        edges,
        c=0.0,
        alpha=alpha,
        b=b,
        seed=seed,
        signs=signs,
    )


def single_edge_pvalues(
    rho: np.ndarray,
    n: tuple[int, ...],
    p: int,
    frob_sq_over_p: np.ndarray,
) -> np.ndarray:
    """Two-sided normal p-values per edge; the (meaningless) diagonal is NaN.

    Raises ZeroVariance when an off-diagonal edge has zero asymptotic
    variance (|rho| = 1), which leaves the z-statistic undefined.
    """
    rho = np.asarray(rho, dtype=np.float64)
    if rho.ndim == 2:
        rho = rho[None]
    m, q, _ = rho.shape
    if len(n) != m:
        raise ConfigError("n must list one trial count per session")
    t_full = np.zeros((q, q))
    for l in range(m):
        t_full += math.sqrt(n[l] * p) * rho[l]
    t_full /= math.sqrt(m)
    var = s_diagonal(rho, frob_sq_over_p)
    off = ~np.eye(q, dtype=bool)
    if np.any(var[off] <= 0.0):
        raise ZeroVariance("an off-diagonal edge has zero asymptotic variance")
    pvals = np.full((q, q), np.nan)
    pvals[off] = 2.0 * norm.sf(np.abs(t_full[off]) / np.sqrt(var[off]))
    return pvals


def test_from_fits(
    spatial: SpatialFit,
    temporal: TemporalFit,
    n: tuple[int, ...],
    p: int,
    edges: EdgeSet,
    c: float = 0.0,
    alpha: float = 0.05,
    b: int = 3000,
    seed: int = 0,
    signs=None,
) -> TestResult:
    """Run the (c-level) simultaneous test from already-computed fits."""
    return c_level_test(
        spatial.rho,
        n,
        p,
        temporal.frob_sq_over_p,
        edges,
        c=c,
        alpha=alpha,
        b=b,
        seed=seed,
        signs=signs,
    )


def run_test(
    dataset: MultiSessionDataset,
    edges: EdgeSet,
    c: float = 0.0,
    alpha: float = 0.05,
    b: int = 3000,
    seed: int = 0,
    gamma=None,
    c0: float = 0.5,
    h=None,
    eta: float = 10.0,
    temporal_alpha=1.0,
    signs=None,
    n_jobs: int = 1,
) -> tuple[TestResult, SpatialFit, TemporalFit]:
    """Fit both components on a dataset and test the edge set."""
    spatial = fit_spatial(dataset, gamma=gamma, c0=c0, n_jobs=n_jobs)
    temporal = fit_temporal(dataset, h=h, eta=eta, alpha=temporal_alpha)
    result = test_from_fits(
        spatial,
        temporal,
        dataset.dims.n,
        dataset.dims.p,
        edges,
        c=c,
        alpha=alpha,
        b=b,
        seed=seed,
        signs=signs,
    )
    return result, spatial, temporal
