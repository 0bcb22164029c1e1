"""Synthetic data generation: graphs, precision matrices, temporal models.

Sampling uses a counter-based Philox generator keyed by (seed, spawn_key), so
every session and trial has its own substream and parallel generation is
reproducible regardless of evaluation order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import Dimensions, GroundTruth, MultiSessionDataset
from .errors import BadAlpha, ConfigError, DegenerateMask, NotSPD, ShapeMismatch

# stream ids keep the support / precision / trial substreams disjoint
_STREAM_SUPPORT = 0
_STREAM_PRECISION = 1
_STREAM_TRIAL = 2


def substream(seed: int, *key: int) -> np.random.Generator:
    """Philox generator for the given master seed and spawn key."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


class GraphKind(str, enum.Enum):
    RANDOM = "random"
    HUB = "hub"
    CHAIN = "chain"


@dataclass(frozen=True)
class SimulationSpec:
    """Everything needed to draw one multi-session dataset."""

    dims: Dimensions
    kind: GraphKind = GraphKind.RANDOM
    seed: int = 0
    edge_prob: float | None = None  # None -> sqrt(3/q)
    nonzero_low: float = 0.0
    nonzero_high: float = 0.3
    session_decay: float = 2.0
    kappa5: float = 0.2
    alpha: tuple[float, ...] | float = 1.0
    spd_floor: float = 0.1
    name: str = "sim"

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "kind", GraphKind(self.kind))
        except ValueError as exc:
            raise ConfigError(f"unknown graph kind {self.kind!r}") from exc
        if self.edge_prob is not None and not 0.0 <= self.edge_prob <= 1.0:
            raise ConfigError(f"edge_prob must lie in [0, 1], got {self.edge_prob}")
        if not 0.0 <= self.nonzero_low < self.nonzero_high:
            raise ConfigError("need 0 <= nonzero_low < nonzero_high")
        if self.session_decay < 1.0:
            raise ConfigError("session_decay must be >= 1")
        if self.kappa5 < 0.0:
            raise ConfigError("kappa5 must be >= 0")
        if not 0.0 < self.spd_floor < 1.0:
            raise ConfigError("spd_floor must lie in (0, 1)")
        alphas = self.alpha
        if np.isscalar(alphas):
            alphas = (float(alphas),) * self.dims.m
        else:
            alphas = tuple(float(a) for a in alphas)
        if len(alphas) != self.dims.m:
            raise ConfigError("alpha must be scalar or one value per session")
        if any(a <= 0 for a in alphas):
            raise BadAlpha("temporal decay exponent alpha must be > 0")
        object.__setattr__(self, "alpha", alphas)


def gen_support(
    kind: GraphKind | str, q: int, seed: int, edge_prob: float | None = None
) -> np.ndarray:
    """Draw a symmetric boolean support mask with a False diagonal.

    random: each pair (i, j), i < j, is an edge with probability sqrt(3/q)
            unless edge_prob overrides it.
    hub:    ceil(q / 20) contiguous node blocks of near-equal size; the lowest
            index of each block is its hub, connected to every block member.
    chain:  edges (i, i + 1).
    """
    kind = GraphKind(kind)
    if q < 2:
        raise ShapeMismatch(f"need q >= 2, got {q}")
    mask = np.zeros((q, q), dtype=bool)
    if kind is GraphKind.RANDOM:
        prob = math.sqrt(3.0 / q) if edge_prob is None else float(edge_prob)
        if not 0.0 <= prob <= 1.0:
            raise ConfigError(f"edge probability {prob} outside [0, 1]")
        rng = substream(seed, _STREAM_SUPPORT)
        iu = np.triu_indices(q, k=1)
        draws = rng.random(iu[0].size) < prob
        mask[iu] = draws
    elif kind is GraphKind.HUB:
        n_groups = math.ceil(q / 20)
        for block in np.array_split(np.arange(q), n_groups):
            hub = int(block[0])
            for node in block[1:]:
                mask[hub, int(node)] = True
    else:  # chain
        idx = np.arange(q - 1)
        mask[idx, idx + 1] = True
    return mask | mask.T


def gen_spatial_precision(
    mask: np.ndarray,
    session_index: int,
    seed: int,
    nonzero_low: float = 0.0,
    nonzero_high: float = 0.3,
    session_decay: float = 2.0,
    spd_floor: float = 0.1,
) -> np.ndarray:
    """Unit-diagonal SPD precision matrix supported on the given mask.

    Off-diagonal magnitudes are Unif(low, high / decay**session_index) with a
    0-based session index, symmetric by copying the upper triangle.  If the
    raw matrix is not positive definite enough, the smallest ridge c is added
    such that after rescaling back to a unit diagonal the minimum eigenvalue
    is at least spd_floor; the diagonal before rescaling is uniformly 1 + c,
    so the rescale is division by 1 + c and cannot zero any support entry.
    """
    mask = np.asarray(mask, dtype=bool)
    q = mask.shape[0]
    if mask.shape != (q, q) or np.any(np.diag(mask)):
        raise ShapeMismatch("mask must be square with a False diagonal")
    if session_index < 0:
        raise ConfigError("session_index is 0-based and must be >= 0")
    high = nonzero_high / session_decay**session_index
    rng = substream(seed, _STREAM_PRECISION, session_index)
    omega = np.eye(q)
    iu = np.triu_indices(q, k=1)
    sel = mask[iu]
    vals = rng.uniform(nonzero_low, high, size=int(sel.sum()))
    upper = np.zeros(iu[0].size)
    upper[sel] = vals
    omega[iu] = upper
    omega = omega + omega.T - np.eye(q)

    lam_min = float(np.linalg.eigvalsh(omega)[0])
    c = max(0.0, (spd_floor - lam_min) / (1.0 - spd_floor))
    if 1.0 + c > 100.0:
        raise DegenerateMask(
            f"mask requires diagonal inflation {1.0 + c:.1f} > 100 to reach "
            f"eigenvalue floor {spd_floor}"
        )
    if c > 0.0:
        omega = (omega + c * np.eye(q)) / (1.0 + c)
    return omega


@dataclass(frozen=True)
class TemporalModel:
    """Temporal component: regression coefficients and trace-p covariance."""

    beta: np.ndarray  # (p, p), strictly upper triangular, column t = target t
    phi: np.ndarray  # (p, p) innovation variances (identity here)
    sigma: np.ndarray  # (p, p) covariance, trace = p
    omega: np.ndarray  # (p, p) precision, inverse of sigma


def gen_temporal_model(
    p: int, alpha: float, kappa5: float = 0.2, seed: int | None = None
) -> TemporalModel:
    """Polynomial-decay autoregressive temporal model.

    beta[s, t] = kappa5 * (t - s)**(-alpha - 1) for s < t, innovations have
    identity covariance, and the implied covariance is rescaled to trace p.
    The construction is deterministic; seed is accepted for interface
    uniformity and unused.
    """
    del seed
    if alpha <= 0:
        raise BadAlpha("alpha must be > 0")
    if p < 2:
        raise ShapeMismatch(f"need p >= 2, got {p}")
    if kappa5 < 0:
        raise ConfigError("kappa5 must be >= 0")
    s, t = np.meshgrid(np.arange(p), np.arange(p), indexing="ij")
    with np.errstate(divide="ignore"):
        lag = np.where(t > s, (t - s).astype(float), np.inf)
    beta = kappa5 * lag ** (-alpha - 1.0)
    factor = np.eye(p) - beta  # unit-diagonal upper triangular
    # column contrasts are the sequential innovations, so the precision is
    # factor @ factor.T and beta is exactly the predecessor-regression matrix
    omega_raw = factor @ factor.T
    sigma_raw = scipy.linalg.cho_solve(
        scipy.linalg.cho_factor(omega_raw, lower=True), np.eye(p)
    )
    sigma_raw = (sigma_raw + sigma_raw.T) / 2.0
    scale = p / float(np.trace(sigma_raw))
    sigma = sigma_raw * scale
    omega = omega_raw / scale
    return TemporalModel(beta=beta, phi=np.eye(p), sigma=sigma, omega=omega)


def sample_matrix_normal(
    sigma_t: np.ndarray,
    sigma_s: np.ndarray,
    seed_or_rng: int | np.random.Generator,
) -> np.ndarray:
    """One draw X = A Z B' with A A' = sigma_t, B B' = sigma_s, Z iid N(0,1).

    Then Cov(X_ti, X_sj) = sigma_t[t, s] * sigma_s[i, j].
    """
    if isinstance(seed_or_rng, np.random.Generator):
        rng = seed_or_rng
    else:
        rng = substream(int(seed_or_rng), _STREAM_TRIAL)
    p = sigma_t.shape[0]
    q = sigma_s.shape[0]
    try:
        a = np.linalg.cholesky(sigma_t)
        b = np.linalg.cholesky(sigma_s)
    except np.linalg.LinAlgError as exc:
        raise NotSPD(f"covariance factor is not positive definite: {exc}") from exc
    z = rng.standard_normal((p, q))
    return a @ z @ b.T


def _spatial_ground_truth(omega: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(sigma, rho) from a precision matrix; rho diagonal is -1 by convention."""
    sigma = scipy.linalg.cho_solve(
        scipy.linalg.cho_factor(omega, lower=True), np.eye(omega.shape[0])
    )
    sigma = (sigma + sigma.T) / 2.0
    d = np.sqrt(np.diag(omega))
    rho = -omega / np.outer(d, d)
    return sigma, rho


def simulate_dataset(spec: SimulationSpec) -> MultiSessionDataset:
    """Draw a dataset with shared support and session-specific magnitudes."""
    dims = spec.dims
    mask = gen_support(spec.kind, dims.q, spec.seed, spec.edge_prob)
    omegas = [
        gen_spatial_precision(
            mask,
            l,
            spec.seed,
            nonzero_low=spec.nonzero_low,
            nonzero_high=spec.nonzero_high,
            session_decay=spec.session_decay,
            spd_floor=spec.spd_floor,
        )
        for l in range(dims.m)
    ]
    temporal = [
        gen_temporal_model(dims.p, spec.alpha[l], spec.kappa5) for l in range(dims.m)
    ]
    return _assemble_dataset(
        mask, omegas, temporal, dims, spec.seed, spec.name, spec_meta=_meta(spec)
    )


def dataset_from_models(
    omegas: list[np.ndarray],
    temporal_models: list[TemporalModel],
    n: tuple[int, ...] | list[int],
    seed: int,
    name: str = "custom",
    support: np.ndarray | None = None,
) -> MultiSessionDataset:
    """Dataset from explicit per-session precision and temporal models.

    The shared support defaults to the union of off-diagonal nonzeros across
    sessions (entries over 1e-12 in magnitude).
    """
    m = len(omegas)
    if len(temporal_models) != m or len(n) != m:
        raise ShapeMismatch("omegas, temporal_models, n must have equal length")
    q = omegas[0].shape[0]
    p = temporal_models[0].sigma.shape[0]
    dims = Dimensions(m=m, n=tuple(int(v) for v in n), p=p, q=q)
    if support is None:
        support = np.zeros((q, q), dtype=bool)
        for om in omegas:
            off = np.abs(om) > 1e-12
            np.fill_diagonal(off, False)
            support |= off
    return _assemble_dataset(support, list(omegas), temporal_models, dims, seed, name)


def _assemble_dataset(
    mask: np.ndarray,
    omegas: list[np.ndarray],
    temporal: list[TemporalModel],
    dims: Dimensions,
    seed: int,
    name: str,
    spec_meta: dict | None = None,
) -> MultiSessionDataset:
    sigma_s, rho_s = [], []
    for om in omegas:
        sig, rho = _spatial_ground_truth(om)
        sigma_s.append(sig)
        rho_s.append(rho)
    sessions = []
    for l in range(dims.m):
        b = np.linalg.cholesky(sigma_s[l])
        a = np.linalg.cholesky(temporal[l].sigma)
        trials = np.empty((dims.n[l], dims.p, dims.q))
        for k in range(dims.n[l]):
            rng = substream(seed, _STREAM_TRIAL, l, k)
            trials[k] = a @ rng.standard_normal((dims.p, dims.q)) @ b.T
        sessions.append(trials)
    gt = GroundTruth(
        support=mask,
        sigma_s=tuple(sigma_s),
        omega_s=tuple(omegas),
        rho_s=tuple(rho_s),
        sigma_t=tuple(tm.sigma for tm in temporal),
        beta_t=tuple(tm.beta for tm in temporal),
        phi_t=tuple(tm.phi for tm in temporal),
    )
    return MultiSessionDataset(
        dims=dims,
        sessions=tuple(sessions),
        name=name,
        seed=seed,
        ground_truth=gt,
        meta=spec_meta or {},
    )


def _meta(spec: SimulationSpec) -> dict:
    return {
        "kind": spec.kind.value,
        "edge_prob": spec.edge_prob,
        "nonzero_low": spec.nonzero_low,
        "nonzero_high": spec.nonzero_high,
        "session_decay": spec.session_decay,
        "kappa5": spec.kappa5,
        "alpha": list(spec.alpha),
        "spd_floor": spec.spd_floor,
    }
