"""Core data types and on-disk formats for multi-session matrix data.

A dataset holds m sessions; session l contains n_l trials, each a dense
(p, q) float64 matrix with rows indexed by time and columns by spatial
location.  All indices are 0-based.  Arrays are marked read-only after
construction so datasets can be shared across worker processes.

On-disk layout (binary is canonical):

    <dir>/manifest.json     dimensions, dtype, byte order, file names
    <dir>/session_XXX.bin   n_l * p * q little-endian float64 values,
                            trial-major, row-major within each trial
    <dir>/gt/...            optional ground-truth matrices, same encoding

A manifest may instead declare ``"format": "csv"`` with one header-free CSV
file per trial; that path exists for hand-made fixtures and imports.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IoFailure,
    MalformedManifest,
    NonFiniteValue,
    ShapeMismatch,
)

_FLOAT = np.dtype("<f8")


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dimensions:
    """Problem sizes: m sessions, per-session trial counts n, p rows, q columns."""

    m: int
    n: tuple[int, ...]
    p: int
    q: int

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ShapeMismatch(f"need at least one session, got m={self.m}")
        n = tuple(int(v) for v in self.n)
        object.__setattr__(self, "n", n)
        if len(n) != self.m:
            raise ShapeMismatch(f"len(n)={len(n)} does not match m={self.m}")
        if any(v < 1 for v in n):
            raise ShapeMismatch(f"every session needs >= 1 trial, got n={n}")
        if self.p < 2 or self.q < 2:
            raise ShapeMismatch(f"need p >= 2 and q >= 2, got p={self.p}, q={self.q}")

    @property
    def n0(self) -> int:
        """Smallest per-session trial count; normalizes the pooled loss."""
        return min(self.n)


def validate_trial(data: np.ndarray, p: int, q: int) -> np.ndarray:
    """Check one (p, q) trial matrix: shape, dtype coercion, finiteness."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.shape != (p, q):
        raise ShapeMismatch(f"trial has shape {arr.shape}, expected {(p, q)}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue("trial contains NaN or infinite entries")
    return arr


@dataclass(frozen=True)
class EdgeSet:
    """Ordered collection of unique undirected edges (i, j), stored with i < j.

    Pairs may be given in either orientation; they are canonicalized to
    i < j preserving input order.  Self-loops and duplicates are rejected.
    """

    edges: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        canon = []
        seen = set()
        for pair in self.edges:
            i, j = int(pair[0]), int(pair[1])
            if i == j:
                raise ShapeMismatch(f"self-loop ({i}, {j}) is not a valid edge")
            if i < 0 or j < 0:
                raise ShapeMismatch(f"negative node index in edge ({i}, {j})")
            if i > j:
                i, j = j, i
            if (i, j) in seen:
                raise ShapeMismatch(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
            canon.append((i, j))
        object.__setattr__(self, "edges", tuple(canon))

    def __len__(self) -> int:
        return len(self.edges)

    def validate_for(self, q: int) -> None:
        for i, j in self.edges:
            if j >= q:
                raise ShapeMismatch(f"edge ({i}, {j}) out of range for q={q}")

    def index_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.edges:
            return np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp)
        arr = np.asarray(self.edges, dtype=np.intp)
        return arr[:, 0], arr[:, 1]

    @staticmethod
    def off_diagonal(q: int) -> "EdgeSet":
        """All pairs i < j in row-major order."""
        return EdgeSet(tuple((i, j) for i in range(q) for j in range(i + 1, q)))

    @staticmethod
    def cross_block(i0: int, i1: int, j0: int, j1: int) -> "EdgeSet":
        """All pairs between node ranges [i0, i1) and [j0, j1), row-major."""
        if not (0 <= i0 < i1 <= j0 < j1):
            raise ShapeMismatch(
                f"cross-block ranges must satisfy 0 <= i0 < i1 <= j0 < j1, "
                f"got [{i0}, {i1}) x [{j0}, {j1})"
            )
        return EdgeSet(tuple((a, b) for a in range(i0, i1) for b in range(j0, j1)))


@dataclass(frozen=True)
class GroundTruth:
    """Generating model attached to a simulated dataset.

    Per session: spatial covariance/precision/partial correlation, temporal
    covariance (trace p), the temporal regression coefficients, and the
    temporal innovation variances.  The support mask is shared by all
    sessions; its diagonal is False.
    """

    support: np.ndarray
    sigma_s: tuple[np.ndarray, ...]
    omega_s: tuple[np.ndarray, ...]
    rho_s: tuple[np.ndarray, ...]
    sigma_t: tuple[np.ndarray, ...]
    beta_t: tuple[np.ndarray, ...]
    phi_t: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        support = np.asarray(self.support, dtype=bool).copy()
        if support.ndim != 2 or support.shape[0] != support.shape[1]:
            raise ShapeMismatch("support mask must be square")
        if np.any(np.diag(support)):
            raise ShapeMismatch("support mask diagonal must be False")
        if not np.array_equal(support, support.T):
            raise ShapeMismatch("support mask must be symmetric")
        support.setflags(write=False)
        object.__setattr__(self, "support", support)
        q = support.shape[0]
        m = len(self.sigma_s)
        for name in ("omega_s", "rho_s", "sigma_t", "beta_t", "phi_t"):
            if len(getattr(self, name)) != m:
                raise ShapeMismatch(f"{name} has wrong session count")
        for name, size in (("sigma_s", q), ("omega_s", q), ("rho_s", q)):
            mats = tuple(_readonly(a) for a in getattr(self, name))
            for a in mats:
                if a.shape != (size, size):
                    raise ShapeMismatch(f"{name} entry has shape {a.shape}")
            object.__setattr__(self, name, mats)
        p = np.asarray(self.sigma_t[0]).shape[0]
        for name in ("sigma_t", "beta_t", "phi_t"):
            mats = tuple(_readonly(a) for a in getattr(self, name))
            for a in mats:
                if a.shape != (p, p):
                    raise ShapeMismatch(f"{name} entry has shape {a.shape}")
            object.__setattr__(self, name, mats)
        eye = np.eye(q)
        for sig, om in zip(self.sigma_s, self.omega_s):
            if np.max(np.abs(sig @ om - eye)) > 1e-8:
                raise ShapeMismatch("sigma_s @ omega_s deviates from identity")
        for sig in self.sigma_t:
            if abs(np.trace(sig) - p) > 1e-8:
                raise ShapeMismatch("temporal covariance trace must equal p")

    def zero_edge_set(self) -> EdgeSet:
        """Pairs (i < j) that are null in every session (mask is shared)."""
        q = self.support.shape[0]
        pairs = [
            (i, j)
            for i in range(q)
            for j in range(i + 1, q)
            if not self.support[i, j]
        ]
        return EdgeSet(tuple(pairs))


@dataclass(frozen=True)
class MultiSessionDataset:
    """m sessions of trials; session l is one read-only (n_l, p, q) array."""

    dims: Dimensions
    sessions: tuple[np.ndarray, ...]
    name: str = "dataset"
    seed: int | None = None
    ground_truth: GroundTruth | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.sessions) != self.dims.m:
            raise ShapeMismatch(
                f"{len(self.sessions)} session arrays for m={self.dims.m}"
            )
        arrays = []
        for l, arr in enumerate(self.sessions):
            a = np.ascontiguousarray(arr, dtype=np.float64)
            expected = (self.dims.n[l], self.dims.p, self.dims.q)
            if a.shape != expected:
                raise ShapeMismatch(
                    f"session {l} has shape {a.shape}, expected {expected}"
                )
            if not np.all(np.isfinite(a)):
                raise NonFiniteValue(f"session {l} contains non-finite values")
            a.setflags(write=False)
            arrays.append(a)
        object.__setattr__(self, "sessions", tuple(arrays))

    def trial(self, l: int, k: int) -> np.ndarray:
        return self.sessions[l][k]


def stack_spatial(session: np.ndarray) -> np.ndarray:
    """Stack trials vertically: (n_l, p, q) -> (n_l * p, q).

    Row order is trial-major then time; column j collects location j across
    all trials and times.
    """
    arr = np.asarray(session)
    n_l, p, q = arr.shape
    return arr.reshape(n_l * p, q)


def stack_temporal(session: np.ndarray) -> np.ndarray:
    """Stack trial transposes vertically: (n_l, p, q) -> (n_l * q, p).

    Row order is trial-major then location; column t collects time t across
    all trials and locations.
    """
    arr = np.asarray(session)
    n_l, p, q = arr.shape
    return arr.transpose(0, 2, 1).reshape(n_l * q, p)


# ---------------------------------------------------------------------------
# persistence


def _write_bin(path: str, arr: np.ndarray) -> None:
    np.ascontiguousarray(arr, dtype=_FLOAT).tofile(path)


def _read_bin(path: str, shape: tuple[int, ...]) -> np.ndarray:
    try:
        raw = np.fromfile(path, dtype=_FLOAT)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    want = int(np.prod(shape))
    if raw.size != want:
        raise ShapeMismatch(
            f"{path} holds {raw.size} values, expected {want} for shape {shape}"
        )
    return raw.reshape(shape).astype(np.float64)


_GT_FIELDS = ("sigma_s", "omega_s", "rho_s", "sigma_t", "beta_t", "phi_t")


def save_dataset(ds: MultiSessionDataset, path: str) -> str:
    """Write a dataset directory (manifest.json + binary payloads).

    Returns the manifest path.  Output is byte-stable for identical inputs:
    no timestamps, sorted JSON keys.
    """
    if len(ds.sessions) == 0:
        raise MalformedManifest("dataset has no sessions; nothing to save")
    try:
        os.makedirs(path, exist_ok=True)
        session_files = []
        for l, arr in enumerate(ds.sessions):
            fname = f"session_{l:03d}.bin"
            _write_bin(os.path.join(path, fname), arr)
            session_files.append(fname)
        manifest: dict = {
            "name": ds.name,
            "format": "binary",
            "dtype": "float64",
            "endianness": "little",
            "dims": {
                "m": ds.dims.m,
                "n": list(ds.dims.n),
                "p": ds.dims.p,
                "q": ds.dims.q,
            },
            "sessions": session_files,
        }
        if ds.seed is not None:
            manifest["seed"] = int(ds.seed)
        if ds.meta:
            manifest["meta"] = ds.meta
        gt = ds.ground_truth
        if gt is not None:
            gt_dir = os.path.join(path, "gt")
            os.makedirs(gt_dir, exist_ok=True)
            np.ascontiguousarray(gt.support, dtype=np.uint8).tofile(
                os.path.join(gt_dir, "support.bin")
            )
            entries = []
            for l in range(ds.dims.m):
                entry = {}
                for fieldname in _GT_FIELDS:
                    fname = f"{fieldname}_{l:03d}.bin"
                    _write_bin(
                        os.path.join(gt_dir, fname), getattr(gt, fieldname)[l]
                    )
                    entry[fieldname] = "gt/" + fname
                entries.append(entry)
            manifest["ground_truth"] = {
                "support": "gt/support.bin",
                "sessions": entries,
            }
        manifest_path = os.path.join(path, "manifest.json")
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return manifest_path
    except OSError as exc:
        raise IoFailure(f"cannot write dataset to {path}: {exc}") from exc


def _require(manifest: dict, key: str):
    if key not in manifest:
        raise MalformedManifest(f"manifest missing required key {key!r}")
    return manifest[key]


def load_dataset(path: str) -> MultiSessionDataset:
    """Load a dataset directory written by save_dataset (or a CSV manifest)."""
    manifest_path = path
    if os.path.isdir(path):
        manifest_path = os.path.join(path, "manifest.json")
    base = os.path.dirname(manifest_path)
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read manifest {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedManifest(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict):
        raise MalformedManifest("manifest must be a JSON object")

    dims_raw = _require(manifest, "dims")
    try:
        dims = Dimensions(
            m=int(dims_raw["m"]),
            n=tuple(int(v) for v in dims_raw["n"]),
            p=int(dims_raw["p"]),
            q=int(dims_raw["q"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedManifest(f"bad dims block: {exc}") from exc

    fmt = manifest.get("format", "binary")
    sessions_decl = _require(manifest, "sessions")
    if not isinstance(sessions_decl, list) or len(sessions_decl) != dims.m:
        raise MalformedManifest("sessions list must have one entry per session")

    sessions = []
    if fmt == "binary":
        if manifest.get("dtype", "float64") != "float64":
            raise MalformedManifest("only float64 payloads are supported")
        if manifest.get("endianness", "little") != "little":
            raise MalformedManifest("only little-endian payloads are supported")
        for l, fname in enumerate(sessions_decl):
            shape = (dims.n[l], dims.p, dims.q)
            sessions.append(_read_bin(os.path.join(base, fname), shape))
    elif fmt == "csv":
        for l, files in enumerate(sessions_decl):
            if not isinstance(files, list) or len(files) != dims.n[l]:
                raise MalformedManifest(
                    f"csv session {l} must list n_l={dims.n[l]} trial files"
                )
            trials = []
            for fname in files:
                fpath = os.path.join(base, fname)
                try:
                    arr = np.loadtxt(fpath, delimiter=",", ndmin=2)
                except OSError as exc:
                    raise IoFailure(f"cannot read {fpath}: {exc}") from exc
                except ValueError as exc:
                    raise MalformedManifest(f"bad CSV {fpath}: {exc}") from exc
                if arr.shape != (dims.p, dims.q):
                    raise ShapeMismatch(
                        f"{fpath} has shape {arr.shape}, expected {(dims.p, dims.q)}"
                    )
                trials.append(arr)
            sessions.append(np.stack(trials, axis=0))
    else:
        raise MalformedManifest(f"unknown format {fmt!r}")

    for l, arr in enumerate(sessions):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue(f"session {l} payload contains non-finite values")

    ground_truth = None
    gt_decl = manifest.get("ground_truth")
    if gt_decl is not None:
        try:
            sup_path = os.path.join(base, gt_decl["support"])
            sup_raw = np.fromfile(sup_path, dtype=np.uint8)
        except (KeyError, OSError) as exc:
            raise MalformedManifest(f"bad ground_truth block: {exc}") from exc
        if sup_raw.size != dims.q * dims.q:
            raise ShapeMismatch("support mask payload has wrong size")
        support = sup_raw.reshape(dims.q, dims.q).astype(bool)
        per_field: dict[str, list[np.ndarray]] = {f: [] for f in _GT_FIELDS}
        entries = gt_decl.get("sessions", [])
        if len(entries) != dims.m:
            raise MalformedManifest("ground_truth.sessions must match m")
        for l, entry in enumerate(entries):
            for fieldname in _GT_FIELDS:
                if fieldname not in entry:
                    raise MalformedManifest(
                        f"ground_truth session {l} missing {fieldname}"
                    )
                size = dims.q if fieldname.endswith("_s") else dims.p
                per_field[fieldname].append(
                    _read_bin(os.path.join(base, entry[fieldname]), (size, size))
                )
        ground_truth = GroundTruth(
            support=support,
            **{f: tuple(per_field[f]) for f in _GT_FIELDS},
        )

    return MultiSessionDataset(
        dims=dims,
        sessions=tuple(sessions),
        name=str(manifest.get("name", "dataset")),
        seed=manifest.get("seed"),
        ground_truth=ground_truth,
        meta=manifest.get("meta", {}),
    )
