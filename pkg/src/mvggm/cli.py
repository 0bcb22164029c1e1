"""Command-line interface: simulate | fit | test | coverage | roc.

Options come from flags, optionally seeded by a JSON config file
(--config); explicit flags override the file, unknown config keys are
rejected.  MVGGM_WORKERS sets the worker count when --workers is absent.
Outputs embed the configuration hash and seed and never embed timestamps,
so identical invocations produce identical bytes.

Exit codes: 0 success, 1 user/config/data error, 2 internal error.  Errors
are emitted to stderr as one JSON object {"error": <type>, "message": ...}.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import errors
from .data import (
    Dimensions,
    EdgeSet,
    load_dataset,
    save_dataset,
)
from .errors import ConfigError, IoFailure, MalformedManifest, MvggmError
from .experiments import (
    CoverageSpec,
    RocSpec,
    config_sha256,
    coverage_rows_as_dicts,
    run_coverage,
    run_roc,
)
from .inference import single_edge_pvalues, test_from_fits
from .simulate import SimulationSpec, simulate_dataset
from .spatial import SpatialFit, fit_spatial
from .temporal import TemporalFit, fit_temporal

_FLOAT = np.dtype("<f8")


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as ConfigError (exit code 1)."""

    def error(self, message):  # noqa: A003 - argparse API
        raise ConfigError(message)


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in str(text).split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def _parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in str(text).split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated floats, got {text!r}") from exc


def _parse_gamma(text):
    if text is None or text in ("theory", "cv"):
        return text
    try:
        return float(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(
            f"gamma must be 'theory', 'cv', or a number, got {text!r}"
        ) from exc


def parse_edges(spec: str, q: int) -> EdgeSet:
    """Edge-set source: off-diagonal | cross-block:... | JSON file of pairs."""
    if spec == "off-diagonal":
        return EdgeSet.off_diagonal(q)
    if spec.startswith("cross-block:"):
        parts = spec.split(":")[1:]
        try:
            vals = [int(v) for v in parts]
        except ValueError as exc:
            raise ConfigError(f"bad cross-block spec {spec!r}") from exc
        if len(vals) == 1:
            k = vals[0]
            edges = EdgeSet.cross_block(0, k, k, q)
        elif len(vals) == 4:
            edges = EdgeSet.cross_block(*vals)
        else:
            raise ConfigError(
                "cross-block takes one split point or four range bounds"
            )
        edges.validate_for(q)
        return edges
    try:
        with open(spec, "r", encoding="utf-8") as fh:
            pairs = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read edge file {spec}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"edge file {spec} is not valid JSON: {exc}") from exc
    if not isinstance(pairs, list):
        raise ConfigError("edge file must contain a JSON list of [i, j] pairs")
    edges = EdgeSet(tuple((int(a), int(b)) for a, b in pairs))
    edges.validate_for(q)
    return edges


def _merge_config(args: argparse.Namespace, parser: _Parser) -> argparse.Namespace:
    """Fill unset options from --config JSON; flags win, unknown keys fail."""
    path = getattr(args, "config", None)
    if not path:
        return args
    try:
        with open(path, "r", encoding="utf-8") as fh:
            conf = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(conf, dict):
        raise ConfigError("config file must hold a JSON object")
    known = {a.dest for a in parser._actions}
    for key, value in conf.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("help", "config"):
            raise ConfigError(f"unknown config key {key!r}")
        if getattr(args, dest) is None:
            setattr(args, dest, value)
    return args


def _workers(args) -> int:
    w = getattr(args, "workers", None)
    if w is None:
        w = os.environ.get("MVGGM_WORKERS", "1")
    try:
        w = int(w)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"workers must be an integer, got {w!r}") from exc
    if w < 1:
        raise ConfigError("workers must be >= 1")
    return w


def _write_json(path: str, payload: dict) -> None:
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# fit serialization

_SPATIAL_MATS = ("beta", "phi", "omega", "rho")
_TEMPORAL_MATS = ("beta_t", "omega_bar", "sigma_bar", "sigma_t", "omega_t")


def save_fits(
    spatial: SpatialFit, temporal: TemporalFit, dims: Dimensions, path: str,
    dataset_name: str = "dataset", config_hash: str = "", seed=None,
) -> str:
    """Write fit matrices + manifest; residuals are recomputable and skipped."""
    try:
        os.makedirs(path, exist_ok=True)
        sessions = []
        for l in range(dims.m):
            entry = {}
            mats = {
                "beta": spatial.beta[l],
                "phi": spatial.phi[l],
                "omega": spatial.omega[l],
                "rho": spatial.rho[l],
                "beta_t": temporal.beta[l],
                "omega_bar": temporal.omega_bar[l],
                "sigma_bar": temporal.sigma_bar[l],
                "sigma_t": temporal.sigma_hat[l],
                "omega_t": temporal.omega_hat[l],
            }
            for key, mat in mats.items():
                fname = f"{key}_{l:03d}.bin"
                np.ascontiguousarray(mat, dtype=_FLOAT).tofile(
                    os.path.join(path, fname)
                )
                entry[key] = fname
            fname = f"phi_t_{l:03d}.bin"
            np.ascontiguousarray(temporal.phi[l], dtype=_FLOAT).tofile(
                os.path.join(path, fname)
            )
            entry["phi_t"] = fname
            sessions.append(entry)
        manifest = {
            "kind": "fits",
            "dataset_name": dataset_name,
            "dims": {"m": dims.m, "n": list(dims.n), "p": dims.p, "q": dims.q},
            "dtype": "float64",
            "endianness": "little",
            "gamma": [float(g) for g in spatial.gamma],
            "converged": [bool(c) for c in spatial.converged],
            "kkt_residuals": [float(k) for k in spatial.kkt_residuals],
            "nonpositive_diag": [bool(f) for f in spatial.nonpositive_diag],
            "h": list(temporal.h),
            "eta": temporal.eta,
            "frob_sq_over_p": [float(v) for v in temporal.frob_sq_over_p],
            "sessions": sessions,
            "config_hash": config_hash,
        }
        if seed is not None:
            manifest["seed"] = int(seed)
        manifest_path = os.path.join(path, "manifest.json")
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return manifest_path
    except OSError as exc:
        raise IoFailure(f"cannot write fits to {path}: {exc}") from exc


def load_fits(path: str) -> tuple[SpatialFit, TemporalFit, Dimensions]:
    """Load fits written by save_fits (residuals come back empty)."""
    manifest_path = path
    if os.path.isdir(path):
        manifest_path = os.path.join(path, "manifest.json")
    base = os.path.dirname(manifest_path)
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            man = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read fits manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedManifest(f"fits manifest is not valid JSON: {exc}") from exc
    if man.get("kind") != "fits":
        raise MalformedManifest("not a fits manifest (kind != 'fits')")
    try:
        d = man["dims"]
        dims = Dimensions(
            m=int(d["m"]), n=tuple(int(v) for v in d["n"]), p=int(d["p"]),
            q=int(d["q"]),
        )
        sessions = man["sessions"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedManifest(f"bad fits manifest: {exc}") from exc
    if len(sessions) != dims.m:
        raise MalformedManifest("fits manifest session count mismatch")

    def read(fname: str, shape: tuple[int, ...]) -> np.ndarray:
        raw = np.fromfile(os.path.join(base, fname), dtype=_FLOAT)
        if raw.size != int(np.prod(shape)):
            raise errors.ShapeMismatch(f"{fname} has wrong payload size")
        return raw.reshape(shape)

    q, p, m = dims.q, dims.p, dims.m
    spa = {k: np.empty((m, q, q)) for k in _SPATIAL_MATS}
    tmp = {k: np.empty((m, p, p)) for k in _TEMPORAL_MATS}
    phi_t = np.empty((m, p))
    for l, entry in enumerate(sessions):
        for k in _SPATIAL_MATS:
            spa[k][l] = read(entry[k], (q, q))
        for k in _TEMPORAL_MATS:
            tmp[k][l] = read(entry[k], (p, p))
        phi_t[l] = read(entry["phi_t"], (p,))
    spatial = SpatialFit(
        beta=spa["beta"],
        residuals=(),
        phi=spa["phi"],
        omega=spa["omega"],
        rho=spa["rho"],
        gamma=np.asarray(man["gamma"], dtype=np.float64),
        converged=tuple(bool(c) for c in man["converged"]),
        kkt_residuals=tuple(float(k) for k in man["kkt_residuals"]),
        nonpositive_diag=tuple(bool(f) for f in man["nonpositive_diag"]),
    )
    temporal = TemporalFit(
        h=tuple(int(v) for v in man["h"]),
        eta=float(man["eta"]),
        beta=tmp["beta_t"],
        phi=phi_t,
        omega_bar=tmp["omega_bar"],
        sigma_bar=tmp["sigma_bar"],
        sigma_hat=tmp["sigma_t"],
        omega_hat=tmp["omega_t"],
        frob_sq_over_p=np.asarray(man["frob_sq_over_p"], dtype=np.float64),
    )
    return spatial, temporal, dims


# ---------------------------------------------------------------------------
# subcommands


def _add_sim_flags(sub: _Parser) -> None:
    sub.add_argument("--graph", default=None, help="random | hub | chain")
    sub.add_argument("--m", type=int, default=None)
    sub.add_argument("--n", default=None, help="trials per session, int or comma list")
    sub.add_argument("--p", type=int, default=None)
    sub.add_argument("--q", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--edge-prob", type=float, default=None)
    sub.add_argument("--nonzero-high", type=float, default=None)
    sub.add_argument("--decay", type=float, default=None)
    sub.add_argument("--kappa5", type=float, default=None)
    sub.add_argument("--alpha", default=None, help="temporal decay, float or comma list")
    sub.add_argument("--spd-floor", type=float, default=None)


def _sim_spec_from_args(args) -> SimulationSpec:
    required = {"m": args.m, "p": args.p, "q": args.q, "n": args.n}
    missing = [k for k, v in required.items() if v is None]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join(sorted(missing))}")
    n = _parse_int_list(args.n)
    if len(n) == 1:
        n = n * args.m
    alpha = 1.0 if args.alpha is None else _parse_float_list(args.alpha)
    if isinstance(alpha, tuple) and len(alpha) == 1:
        alpha = alpha[0]
    kwargs = dict(
        dims=Dimensions(m=args.m, n=n, p=args.p, q=args.q),
        kind=args.graph or "random",
        seed=0 if args.seed is None else int(args.seed),
        alpha=alpha,
    )
    if args.edge_prob is not None:
        kwargs["edge_prob"] = args.edge_prob
    if args.nonzero_high is not None:
        kwargs["nonzero_high"] = args.nonzero_high
    if args.decay is not None:
        kwargs["session_decay"] = args.decay
    if args.kappa5 is not None:
        kwargs["kappa5"] = args.kappa5
    if args.spd_floor is not None:
        kwargs["spd_floor"] = args.spd_floor
    return SimulationSpec(**kwargs)


def _cmd_simulate(args) -> int:
    spec = _sim_spec_from_args(args)
    ds = simulate_dataset(spec)
    save_dataset(ds, args.out)
    summary = {
        "out": args.out,
        "config_hash": config_sha256(spec),
        "seed": spec.seed,
        "dims": {"m": ds.dims.m, "n": list(ds.dims.n), "p": ds.dims.p, "q": ds.dims.q},
        "support_edges": int(ds.ground_truth.support.sum() // 2),
    }
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def _cmd_fit(args) -> int:
    ds = load_dataset(args.data)
    workers = _workers(args)
    gamma = _parse_gamma(args.gamma)
    spatial = fit_spatial(
        ds,
        gamma="theory" if gamma is None else gamma,
        c0=0.5 if args.c0 is None else args.c0,
        n_jobs=workers,
    )
    h = None if args.h is None else _parse_int_list(args.h)
    if h is not None and len(h) == 1:
        h = h[0]
    alpha = 1.0 if args.alpha is None else _parse_float_list(args.alpha)
    if isinstance(alpha, tuple) and len(alpha) == 1:
        alpha = alpha[0]
    temporal = fit_temporal(
        ds,
        h=h,
        eta=10.0 if args.eta is None else args.eta,
        alpha=alpha,
        rule=args.bandwidth_rule or "default",
    )
    conf_hash = config_sha256(
        {
            "cmd": "fit",
            "gamma": gamma or "theory",
            "c0": args.c0,
            "h": h,
            "eta": args.eta,
            "alpha": alpha,
            "bandwidth_rule": args.bandwidth_rule,
            "dataset": ds.name,
            "dataset_seed": ds.seed,
        }
    )
    save_fits(
        spatial, temporal, ds.dims, args.out,
        dataset_name=ds.name, config_hash=conf_hash, seed=ds.seed,
    )
    json.dump(
        {
            "out": args.out,
            "config_hash": conf_hash,
            "gamma": [float(g) for g in spatial.gamma],
            "h": list(temporal.h),
            "converged": all(spatial.converged),
        },
        sys.stdout,
        indent=2,
        sort_keys=True,
    )
    sys.stdout.write("\n")
    return 0


def _cmd_test(args) -> int:
    if (args.data is None) == (args.fits is None):
        raise ConfigError("provide exactly one of --data or --fits")
    if args.data is not None:
        ds = load_dataset(args.data)
        gamma = _parse_gamma(args.gamma)
        spatial = fit_spatial(
            ds, gamma="theory" if gamma is None else gamma, n_jobs=_workers(args)
        )
        temporal = fit_temporal(
            ds,
            eta=10.0 if args.eta is None else args.eta,
            rule=args.bandwidth_rule or "default",
        )
        dims = ds.dims
        dataset_name = ds.name
    else:
        spatial, temporal, dims = load_fits(args.fits)
        dataset_name = "fits"
    edges = parse_edges(args.edges or "off-diagonal", dims.q)
    signs = None
    if args.signs is not None:
        try:
            with open(args.signs, "r", encoding="utf-8") as fh:
                signs = np.asarray(json.load(fh), dtype=np.float64)
        except OSError as exc:
            raise IoFailure(f"cannot read signs {args.signs}: {exc}") from exc
        except (json.JSONDecodeError, ValueError) as exc:
            raise ConfigError(f"bad signs file: {exc}") from exc
    alpha = 0.05 if args.alpha is None else float(args.alpha)
    b = 3000 if args.b is None else int(args.b)
    seed = 0 if args.seed is None else int(args.seed)
    c = 0.0 if args.c is None else float(args.c)
    result = test_from_fits(
        spatial, temporal, dims.n, dims.p, edges,
        c=c, alpha=alpha, b=b, seed=seed, signs=signs,
    )
    conf_hash = config_sha256(
        {
            "cmd": "test",
            "edges": list(edges.edges),
            "alpha": alpha,
            "b": b,
            "seed": seed,
            "c": c,
            "dataset": dataset_name,
        }
    )
    payload = {
        "config_hash": conf_hash,
        "seed": seed,
        "alpha": alpha,
        "b": b,
        "c": c,
        "n_edges": len(edges),
        "sup_norm": result.sup_norm,
        "statistic": result.statistic,
        "q_hat": result.q_hat,
        "reject": result.reject,
        "p_value": result.p_value,
        "weight": result.weight,
        "psd_repaired": result.psd_repaired,
    }
    pvals = single_edge_pvalues(
        spatial.rho, dims.n, dims.p, temporal.frob_sq_over_p
    )
    if args.out:
        _write_json(args.out + ".json", payload)
        ii, jj = edges.index_arrays()
        rows = [
            [int(i), int(j), repr(float(t)), repr(float(s)), repr(float(pvals[i, j]))]
            for i, j, t, s in zip(ii, jj, result.t_hat, result.s_diag)
        ]
        _write_csv(
            args.out + "_edges.csv",
            ["i", "j", "t_hat", "s_diag", "p_single"],
            rows,
        )
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def _cmd_coverage(args) -> int:
    sim = _sim_spec_from_args(args)
    spec = CoverageSpec(
        sim=sim,
        replications=200 if args.replications is None else int(args.replications),
        levels=(
            (0.9, 0.95, 0.99)
            if args.levels is None
            else _parse_float_list(args.levels)
        ),
        edge_kinds=(
            ("off", "zero")
            if args.edge_kinds is None
            else tuple(str(args.edge_kinds).split(","))
        ),
        b=1000 if args.b is None else int(args.b),
        seed=0 if args.seed is None else int(args.seed),
        gamma=_parse_gamma(args.gamma) or "theory",
        eta=10.0 if args.eta is None else args.eta,
        bandwidth_rule=args.bandwidth_rule or "default",
    )
    result = run_coverage(spec, n_jobs=_workers(args))
    payload = {
        "config_hash": result.config_hash,
        "seed": spec.seed,
        "rows": coverage_rows_as_dicts(result),
    }
    if args.out:
        _write_json(args.out + ".json", payload)
        _write_csv(
            args.out + ".csv",
            ["kind", "level", "covered", "n_effective", "coverage", "binom_se"],
            [
                [r.kind, repr(r.level), r.covered, r.n_effective,
                 repr(r.coverage), repr(r.binom_se)]
                for r in result.rows
            ],
        )
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def _cmd_roc(args) -> int:
    sim = _sim_spec_from_args(args)
    kwargs = dict(
        sim=sim,
        replications=20 if args.replications is None else int(args.replications),
        gamma=_parse_gamma(args.gamma) if args.gamma is not None else 1e-4,
        seed=0 if args.seed is None else int(args.seed),
        eta=10.0 if args.eta is None else args.eta,
        bandwidth_rule=args.bandwidth_rule or "default",
    )
    if args.thresholds is not None:
        kwargs["thresholds"] = _parse_float_list(args.thresholds)
    spec = RocSpec(**kwargs)
    result = run_roc(spec, n_jobs=_workers(args))
    payload = {
        "config_hash": result.config_hash,
        "seed": spec.seed,
        "auc": {c.method: c.auc_mean for c in result.curves},
        "auc_per_rep": {c.method: list(c.auc_per_rep) for c in result.curves},
    }
    if args.out:
        _write_json(args.out + ".json", payload)
        rows = []
        for curve in result.curves:
            for t, f, tp in zip(spec.thresholds, curve.fpr, curve.tpr):
                rows.append([curve.method, repr(t), repr(float(f)), repr(float(tp))])
        _write_csv(args.out + ".csv", ["method", "threshold", "fpr", "tpr"], rows)
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="mvggm", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="draw a synthetic dataset")
    sim.add_argument("--config", default=None)
    sim.add_argument("--out", required=True)
    _add_sim_flags(sim)
    sim.set_defaults(func=_cmd_simulate, parser=sim)

    fit = subs.add_parser("fit", help="fit spatial and temporal components")
    fit.add_argument("--config", default=None)
    fit.add_argument("--data", required=True)
    fit.add_argument("--out", required=True)
    fit.add_argument("--gamma", default=None, help="theory | cv | float")
    fit.add_argument("--c0", type=float, default=None)
    fit.add_argument("--h", default=None, help="bandwidth, int or comma list")
    fit.add_argument("--eta", type=float, default=None)
    fit.add_argument("--alpha", default=None)
    fit.add_argument("--bandwidth-rule", default=None)
    fit.add_argument("--workers", default=None)
    fit.set_defaults(func=_cmd_fit, parser=fit)

    tst = subs.add_parser("test", help="simultaneous edge test")
    tst.add_argument("--config", default=None)
    tst.add_argument("--data", default=None)
    tst.add_argument("--fits", default=None)
    tst.add_argument("--edges", default=None,
                     help="off-diagonal | cross-block:... | JSON file")
    tst.add_argument("--alpha", type=float, default=None)
    tst.add_argument("--b", type=int, default=None)
    tst.add_argument("--seed", type=int, default=None)
    tst.add_argument("--c", type=float, default=None)
    tst.add_argument("--gamma", default=None)
    tst.add_argument("--eta", type=float, default=None)
    tst.add_argument("--bandwidth-rule", default=None)
    tst.add_argument("--signs", default=None, help="JSON file, shape (m, |E|)")
    tst.add_argument("--out", default=None, help="output prefix")
    tst.add_argument("--workers", default=None)
    tst.set_defaults(func=_cmd_test, parser=tst)

    cov = subs.add_parser("coverage", help="replicated coverage experiment")
    cov.add_argument("--config", default=None)
    cov.add_argument("--out", default=None, help="output prefix")
    _add_sim_flags(cov)
    cov.add_argument("--replications", type=int, default=None)
    cov.add_argument("--levels", default=None, help="comma list of nominal levels")
    cov.add_argument("--edge-kinds", default=None, help="subset of off,zero")
    cov.add_argument("--b", type=int, default=None)
    cov.add_argument("--gamma", default=None)
    cov.add_argument("--eta", type=float, default=None)
    cov.add_argument("--bandwidth-rule", default=None)
    cov.add_argument("--workers", default=None)
    cov.set_defaults(func=_cmd_coverage, parser=cov)

    roc = subs.add_parser("roc", help="ROC comparison vs per-session baseline")
    roc.add_argument("--config", default=None)
    roc.add_argument("--out", default=None, help="output prefix")
    _add_sim_flags(roc)
    roc.add_argument("--replications", type=int, default=None)
    roc.add_argument("--gamma", default=None)
    roc.add_argument("--thresholds", default=None)
    roc.add_argument("--eta", type=float, default=None)
    roc.add_argument("--bandwidth-rule", default=None)
    roc.add_argument("--workers", default=None)
    roc.set_defaults(func=_cmd_roc, parser=roc)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _merge_config(args, args.parser)
        return args.func(args)
    except MvggmError as exc:
        json.dump(
            {"error": type(exc).__name__, "message": str(exc)},
            sys.stderr,
            sort_keys=True,
        )
        sys.stderr.write("\n")
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort internal failure
        json.dump(
            {"error": "InternalError", "message": f"{type(exc).__name__}: {exc}"},
            sys.stderr,
            sort_keys=True,
        )
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
