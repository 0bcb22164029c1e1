"""Replicated experiments: bootstrap-coverage tables and ROC comparisons.

Each replication draws a fresh dataset from a fixed simulation spec (with a
replication-specific seed substream), fits both components, and evaluates
either confidence-set coverage of the pooled statistic or edge-ranking ROC
curves.  Workers only affect scheduling; seeds are per replication, so
results are identical for any worker count.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dimensions, EdgeSet, MultiSessionDataset
from .errors import ConfigError
from .grouplasso import default_gamma
from .inference import (
    bootstrap_quantile,
    order_statistic_quantile,
    compute_S,
    single_edge_pvalues,
    test_statistic,
)
from .simulate import SimulationSpec, simulate_dataset
from .spatial import fit_spatial
from .temporal import fit_temporal

_STREAM_REPLICATION = 4
_STREAM_REP_BOOT = 5


def _rep_seed(master: int, stream: int, r: int) -> int:
    ss = np.random.SeedSequence(int(master), spawn_key=(stream, int(r)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def config_sha256(obj) -> str:
    """Canonical hash of a run configuration (dataclasses allowed)."""

    def canon(v):
        if dataclasses.is_dataclass(v) and not isinstance(v, type):
            return {f.name: canon(getattr(v, f.name)) for f in dataclasses.fields(v)}
        if isinstance(v, (np.floating, np.integer)):
            return v.item()
        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, (list, tuple)):
            return [canon(x) for x in v]
        if isinstance(v, dict):
            return {str(k): canon(x) for k, x in sorted(v.items())}
        if hasattr(v, "value"):  # enums
            return v.value
        return v

    payload = json.dumps(canon(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CoverageSpec:
    """Configuration of one coverage experiment."""

    sim: SimulationSpec
    replications: int = 200
    levels: tuple[float, ...] = (0.9, 0.95, 0.99)
    edge_kinds: tuple[str, ...] = ("off", "zero")
    b: int = 1000
    seed: int = 0
    gamma: float | str | None = "theory"
    c0: float = 0.5
    eta: float = 10.0
    bandwidth_rule: str = "default"

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ConfigError("need at least one replication")
        for lev in self.levels:
            if not 0.0 < lev < 1.0:
                raise ConfigError(f"nominal level {lev} outside (0, 1)")
        for kind in self.edge_kinds:
            if kind not in ("off", "zero"):
                raise ConfigError(f"unknown edge kind {kind!r}")


@dataclass(frozen=True)
class CoverageRow:
    kind: str
    level: float
    covered: int
    n_effective: int
    coverage: float
    binom_se: float


@dataclass(frozen=True)
class CoverageResult:
    spec: CoverageSpec
    rows: tuple[CoverageRow, ...]
    config_hash: str


def _coverage_rep(spec: CoverageSpec, r: int) -> dict[str, dict[float, bool]]:
    sim = dataclasses.replace(
        spec.sim, seed=_rep_seed(spec.seed, _STREAM_REPLICATION, r)
    )
    ds = simulate_dataset(sim)
    gt = ds.ground_truth
    sp = fit_spatial(ds, gamma=spec.gamma, c0=spec.c0)
    tp = fit_temporal(ds, eta=spec.eta, alpha=sim.alpha, rule=spec.bandwidth_rule)
    rho_true = np.stack(gt.rho_s)
    out: dict[str, dict[float, bool]] = {}
    for kind in spec.edge_kinds:
        edges = (
            EdgeSet.off_diagonal(ds.dims.q)
            if kind == "off"
            else gt.zero_edge_set()
        )
        if len(edges) == 0:
            continue
        stat = test_statistic(sp.rho, ds.dims.n, ds.dims.p, edges)
        target = test_statistic(rho_true, ds.dims.n, ds.dims.p, edges).t_hat
        cov = compute_S(sp.rho, tp.frob_sq_over_p, edges)
        boot = bootstrap_quantile(
            cov,
            alpha=1.0 - max(spec.levels),
            b=spec.b,
            seed=_rep_seed(spec.seed, _STREAM_REP_BOOT, r),
        )
        err = float(np.max(np.abs(stat.t_hat - target)))
        per_level = {}
        for lev in spec.levels:
            q_hat = order_statistic_quantile(boot.sup_norms, 1.0 - lev)
            per_level[lev] = bool(err <= q_hat)
        out[kind] = per_level
    return out


def run_coverage(spec: CoverageSpec, n_jobs: int = 1) -> CoverageResult:
    """Empirical coverage of the simultaneous confidence set, per level and kind.

    One bootstrap sample per replication serves every nominal level, so
    coverage is monotone in the level within a replication set.
    """
    if n_jobs != 1:
        from joblib import Parallel, delayed

        reps = Parallel(n_jobs=n_jobs)(
            delayed(_coverage_rep)(spec, r) for r in range(spec.replications)
        )
    else:
        reps = [_coverage_rep(spec, r) for r in range(spec.replications)]
    rows = []
    for kind in spec.edge_kinds:
        hits = {lev: 0 for lev in spec.levels}
        n_eff = 0
        for rep in reps:
            if kind not in rep:
                continue
            n_eff += 1
            for lev in spec.levels:
                hits[lev] += int(rep[kind][lev])
        for lev in spec.levels:
            if n_eff == 0:
                rows.append(CoverageRow(kind, lev, 0, 0, math.nan, math.nan))
                continue
            cov = hits[lev] / n_eff
            se = math.sqrt(cov * (1.0 - cov) / n_eff)
            rows.append(CoverageRow(kind, lev, hits[lev], n_eff, cov, se))
    return CoverageResult(
        spec=spec, rows=tuple(rows), config_hash=config_sha256(spec)
    )


def default_threshold_grid() -> np.ndarray:
    """P-value thresholds: log-dense near zero plus a dense linear sweep."""
    lo = np.logspace(-12.0, -2.4, 25)
    hi = np.linspace(0.004, 1.0, 250)
    return np.unique(np.concatenate([[0.0], lo, hi]))


@dataclass(frozen=True)
class RocSpec:
    """Configuration of one ROC experiment."""

    sim: SimulationSpec
    replications: int = 20
    gamma: float | str | None = 1e-4
    thresholds: tuple[float, ...] = field(
        default_factory=lambda: tuple(default_threshold_grid())
    )
    seed: int = 0
    methods: tuple[str, ...] = ("multi", "per-session")
    eta: float = 10.0
    bandwidth_rule: str = "default"

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ConfigError("need at least one replication")
        thr = tuple(float(t) for t in self.thresholds)
        if any(t < 0.0 or t > 1.0 for t in thr):
            raise ConfigError("thresholds must lie in [0, 1]")
        object.__setattr__(self, "thresholds", tuple(sorted(set(thr))))
        for mth in self.methods:
            if mth not in ("multi", "per-session"):
                raise ConfigError(f"unknown method {mth!r}")


@dataclass(frozen=True)
class RocCurve:
    method: str
    fpr: np.ndarray  # mean over replications, one point per threshold
    tpr: np.ndarray
    auc_mean: float
    auc_per_rep: tuple[float, ...]


@dataclass(frozen=True)
class RocResult:
    spec: RocSpec
    curves: tuple[RocCurve, ...]
    config_hash: str


def roc_points(
    scores: np.ndarray, truth: np.ndarray, thresholds
) -> tuple[np.ndarray, np.ndarray]:
    """FPR/TPR at each threshold; a score is detected when score <= t."""
    truth = np.asarray(truth, dtype=bool)
    n_true = int(truth.sum())
    n_null = int((~truth).sum())
    if n_true == 0 or n_null == 0:
        raise ConfigError("ROC needs at least one true and one null edge")
    thr = np.asarray(thresholds, dtype=np.float64)
    det = scores[None, :] <= thr[:, None]
    fpr = (det & ~truth[None, :]).sum(axis=1) / n_null
    tpr = (det & truth[None, :]).sum(axis=1) / n_true
    return fpr, tpr


def auc_trapezoid(fpr: np.ndarray, tpr: np.ndarray) -> float:
    """Trapezoid area with (0,0) and (1,1) endpoints appended."""
    xs = np.concatenate([[0.0], np.asarray(fpr, dtype=np.float64), [1.0]])
    ys = np.concatenate([[0.0], np.asarray(tpr, dtype=np.float64), [1.0]])
    order = np.argsort(xs, kind="stable")
    return float(np.trapezoid(ys[order], xs[order]))


def _roc_rep(spec: RocSpec, r: int) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    sim = dataclasses.replace(
        spec.sim, seed=_rep_seed(spec.seed, _STREAM_REPLICATION, r)
    )
    ds = simulate_dataset(sim)
    gt = ds.ground_truth
    q = ds.dims.q
    iu = np.triu_indices(q, k=1)
    truth = gt.support[iu]
    out = {}
    if "multi" in spec.methods:
        sp = fit_spatial(ds, gamma=spec.gamma)
        tp = fit_temporal(ds, eta=spec.eta, alpha=sim.alpha, rule=spec.bandwidth_rule)
        scores = single_edge_pvalues(
            sp.rho, ds.dims.n, ds.dims.p, tp.frob_sq_over_p
        )[iu]
        out["multi"] = roc_points(scores, truth, spec.thresholds)
    if "per-session" in spec.methods:
        pmax = np.zeros(iu[0].size)
        for l in range(ds.dims.m):
            ds_l = MultiSessionDataset(
                dims=Dimensions(
                    m=1, n=(ds.dims.n[l],), p=ds.dims.p, q=ds.dims.q
                ),
                sessions=(ds.sessions[l],),
                name=f"{ds.name}-s{l}",
            )
            sp_l = fit_spatial(ds_l, gamma=spec.gamma)
            tp_l = fit_temporal(
                ds_l, eta=spec.eta, alpha=sim.alpha[l], rule=spec.bandwidth_rule
            )
            p_l = single_edge_pvalues(
                sp_l.rho, ds_l.dims.n, ds_l.dims.p, tp_l.frob_sq_over_p
            )[iu]
            pmax = np.maximum(pmax, p_l)
        out["per-session"] = roc_points(pmax, truth, spec.thresholds)
    return out


def run_roc(spec: RocSpec, n_jobs: int = 1) -> RocResult:
    """Average ROC curves and AUCs for the multi-session method and baseline.

    The baseline fits each session alone (m = 1) and combines single-edge
    p-values by their maximum across sessions; both methods are thresholded
    on the same grid against the shared support mask.
    """
    if n_jobs != 1:
        from joblib import Parallel, delayed

        reps = Parallel(n_jobs=n_jobs)(
            delayed(_roc_rep)(spec, r) for r in range(spec.replications)
        )
    else:
        reps = [_roc_rep(spec, r) for r in range(spec.replications)]
    curves = []
    for method in spec.methods:
        fprs = np.stack([rep[method][0] for rep in reps])
        tprs = np.stack([rep[method][1] for rep in reps])
        aucs = tuple(
            auc_trapezoid(fprs[i], tprs[i]) for i in range(spec.replications)
        )
        curves.append(
            RocCurve(
                method=method,
                fpr=fprs.mean(axis=0),
                tpr=tprs.mean(axis=0),
                auc_mean=float(np.mean(aucs)),
                auc_per_rep=aucs,
            )
        )
    return RocResult(spec=spec, curves=tuple(curves), config_hash=config_sha256(spec))


def coverage_rows_as_dicts(result: CoverageResult) -> list[dict]:
    return [
        {
            "kind": row.kind,
            "level": row.level,
            "covered": row.covered,
            "n_effective": row.n_effective,
            "coverage": row.coverage,
            "binom_se": row.binom_se,
        }
        for row in result.rows
    ]
