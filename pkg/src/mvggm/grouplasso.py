"""Cross-session group lasso for node-wise regressions.

For target node i the problem is

    min_b  (1/(2 n0 p)) sum_l ||X_l[:, i] - X_l b_l||_2^2
           + gamma * sum_{j != i} || (w_{l,j} b_{l,j})_{l=1..m} ||_2

with b_l[i] = 0, column weights w_{l,j} = ||X_l[:, j]||_2 / sqrt(n_l p), and
n0 = min_l n_l.  The group over sessions couples the supports: a location j
enters either every session's regression or none.

In standardized coordinates c_{l,j} = w_{l,j} b_{l,j} the smooth part has a
diagonal per-group Hessian a_l ~= n_l / n0, so each block-coordinate update
solves m decoupled scalars tied by a single l2 threshold: the group is zero
iff ||z||_2 <= gamma, and otherwise c_l = z_l s / (a_l s + gamma) where
s = ||c|| solves sum_l z_l^2 / (a_l s + gamma)^2 = 1 (closed form when all
a_l are equal, 1-D root find otherwise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .data import Dimensions, MultiSessionDataset, stack_spatial
from .errors import ConfigError, ShapeMismatch, ZeroVarianceColumn

_A_EQUAL_RTOL = 1e-12


def gamma_from_counts(
    m: float, n0: float, p: float, q: float, c0: float = 0.5
) -> float:
    """Theory-rate penalty c0 * sqrt((m + ln(m n0 p q)) / (n0 p))."""
    if min(m, n0, p, q) <= 0:
        raise ConfigError("all counts must be positive")
    return c0 * math.sqrt((m + math.log(m * n0 * p * q)) / (n0 * p))


def default_gamma(dims: Dimensions, c0: float = 0.5) -> float:
    """Default penalty level for a dataset's dimensions."""
    return gamma_from_counts(dims.m, dims.n0, dims.p, dims.q, c0=c0)


@dataclass(frozen=True)
class GroupLassoProblem:
    """One node-wise regression across sessions.

    designs: per-session stacked matrices X_l of shape (n_l * p, q)
    target:  index i of the response column; its coefficient is fixed at 0
    gamma:   group penalty level, >= 0
    weights: (m, q) column scales w_{l,j} = ||X_l[:, j]|| / sqrt(n_l p)
    """

    designs: tuple[np.ndarray, ...]
    target: int
    gamma: float
    n: tuple[int, ...]
    p: int
    weights: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if not self.designs:
            raise ShapeMismatch("need at least one session design")
        q = self.designs[0].shape[1]
        if not 0 <= self.target < q:
            raise ShapeMismatch(f"target {self.target} out of range for q={q}")
        if self.gamma < 0:
            raise ConfigError("gamma must be >= 0")
        if len(self.n) != len(self.designs):
            raise ShapeMismatch("n must list one trial count per session")
        designs = []
        w = np.empty((len(self.designs), q))
        for l, x in enumerate(self.designs):
            arr = np.ascontiguousarray(x, dtype=np.float64)
            rows = self.n[l] * self.p
            if arr.ndim != 2 or arr.shape != (rows, q):
                raise ShapeMismatch(
                    f"session {l} design has shape {arr.shape}, expected {(rows, q)}"
                )
            w[l] = np.linalg.norm(arr, axis=0) / math.sqrt(rows)
            designs.append(arr)
        wmax = w.max()
        if wmax <= 0 or np.any(w < 1e-12 * wmax) or not np.all(np.isfinite(w)):
            bad = np.argwhere((w < 1e-12 * max(wmax, 1e-300)) | ~np.isfinite(w))
            raise ZeroVarianceColumn(
                f"column(s) {bad.tolist()} have (numerically) zero norm"
            )
        object.__setattr__(self, "designs", tuple(designs))
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return len(self.designs)

    @property
    def q(self) -> int:
        return self.designs[0].shape[1]

    @property
    def n0(self) -> int:
        return min(self.n)


@dataclass(frozen=True)
class GroupLassoSolution:
    """Solver output: per-session coefficients plus certificates."""

    beta: np.ndarray  # (m, q), beta[l, target] = 0
    converged: bool
    sweeps: int
    max_change: float
    kkt_residual: float
    objective: float
    objective_path: tuple[float, ...]
    active: tuple[int, ...]


def objective(problem: GroupLassoProblem, beta: np.ndarray) -> float:
    """Objective value at beta, evaluated from the raw designs."""
    beta = np.asarray(beta, dtype=np.float64)
    scale = 1.0 / (2.0 * problem.n0 * problem.p)
    loss = 0.0
    for l, x in enumerate(problem.designs):
        r = x[:, problem.target] - x @ beta[l]
        loss += scale * float(r @ r)
    groups = problem.weights * beta  # (m, q) standardized coefficients
    norms = np.linalg.norm(groups, axis=0)
    norms[problem.target] = 0.0
    return loss + problem.gamma * float(norms.sum())


def kkt_residual(problem: GroupLassoProblem, beta: np.ndarray) -> float:
    """Max stationarity violation over groups, in standardized coordinates.

    Zero groups contribute max(0, ||grad_j|| - gamma); active groups
    contribute ||grad_j + gamma c_j / ||c_j||||.
    """
    beta = np.asarray(beta, dtype=np.float64)
    m, q = problem.weights.shape
    grad = np.empty((m, q))
    scale = 1.0 / (problem.n0 * problem.p)
    for l, x in enumerate(problem.designs):
        r = x @ beta[l] - x[:, problem.target]
        grad[l] = scale * (x.T @ r) / problem.weights[l]
    c = problem.weights * beta
    worst = 0.0
    for j in range(q):
        if j == problem.target:
            continue
        gj = grad[:, j]
        cj = c[:, j]
        nc = np.linalg.norm(cj)
        if nc == 0.0:
            worst = max(worst, max(0.0, np.linalg.norm(gj) - problem.gamma))
        else:
            worst = max(
                worst, float(np.linalg.norm(gj + problem.gamma * cj / nc))
            )
    return worst


def _group_update(
    z: np.ndarray, a: np.ndarray, gamma: float
) -> np.ndarray:
    """Minimize sum_l (a_l/2) c_l^2 - z_l c_l + gamma ||c||_2."""
    if gamma == 0.0:
        return z / a
    znorm = np.linalg.norm(z)
    if znorm <= gamma:
        return np.zeros_like(z)
    spread = a.max() - a.min()
    if spread <= _A_EQUAL_RTOL * a.max():
        return (1.0 - gamma / znorm) * z / a.mean()
    s_max = np.linalg.norm(z / a)

    def excess(s: float) -> float:
        with np.errstate(divide="ignore", over="ignore"):
            return float(np.sum((z / (a * s + gamma)) ** 2)) - 1.0

    # gamma can be too small to move the boundary value off zero in floating
    # point; the penalized solution then coincides with the unpenalized one
    if excess(s_max) >= 0.0:
        return z * s_max / (a * s_max + gamma)
    s = brentq(excess, 0.0, s_max, xtol=1e-12, rtol=8.9e-16)
    return z * s / (a * s + gamma)


def _bcd(
    gram: np.ndarray,  # (m, q, q) standardized Grams / (n0 p)
    h: np.ndarray,  # (m, q) standardized cross terms / (n0 p)
    yy: np.ndarray,  # (m,) response squared norms / (n0 p)
    weights: np.ndarray,  # (m, q)
    target: int,
    gamma: float,
    tol: float,
    kkt_tol: float,
    max_sweeps: int,
) -> GroupLassoSolution:
    m, q = h.shape
    a = np.einsum("ljj->lj", gram).copy()  # (m, q) curvatures
    c = np.zeros((m, q))
    u = np.zeros((m, q))  # u[l] = gram[l] @ c[l]
    order = [j for j in range(q) if j != target]

    def current_objective() -> float:
        norms = np.linalg.norm(c, axis=0)
        norms[target] = 0.0
        return 0.5 * float(np.sum(yy - 2.0 * np.sum(c * h, axis=1) + np.sum(c * u, axis=1))) + gamma * float(norms.sum())

    def full_gradient() -> np.ndarray:
        return u - h

    path = [current_objective()]
    sweeps = 0
    max_change = np.inf
    converged = False
    while sweeps < max_sweeps:
        sweeps += 1
        max_change = 0.0
        for j in order:
            cj = c[:, j]
            z = h[:, j] - (u[:, j] - a[:, j] * cj)
            new = _group_update(z, a[:, j], gamma)
            delta = new - cj
            if np.any(delta != 0.0):
                step = float(np.max(np.abs(delta) / weights[:, j]))
                if step > max_change:
                    max_change = step
                u += gram[:, :, j] * delta[:, None]
                c[:, j] = new
        obj = current_objective()
        if obj > path[-1] + 1e-10 * (1.0 + abs(path[-1])):
            raise AssertionError(
                f"objective increased across sweep: {path[-1]} -> {obj}"
            )
        path.append(obj)
        if max_change < tol:
            grad = full_gradient()
            worst = 0.0
            for j in order:
                nc = np.linalg.norm(c[:, j])
                if nc == 0.0:
                    worst = max(
                        worst, max(0.0, float(np.linalg.norm(grad[:, j])) - gamma)
                    )
                else:
                    worst = max(
                        worst,
                        float(
                            np.linalg.norm(grad[:, j] + gamma * c[:, j] / nc)
                        ),
                    )
            if worst <= kkt_tol:
                converged = True
                break
            # stationarity not yet certified; keep sweeping at a tighter tol
            tol = tol / 10.0

    if not converged:
        grad = full_gradient()
        worst = 0.0
        for j in order:
            nc = np.linalg.norm(c[:, j])
            if nc == 0.0:
                worst = max(worst, max(0.0, float(np.linalg.norm(grad[:, j])) - gamma))
            else:
                worst = max(
                    worst, float(np.linalg.norm(grad[:, j] + gamma * c[:, j] / nc))
                )

    beta = c / weights
    beta[:, target] = 0.0
    active = tuple(
        j for j in order if float(np.linalg.norm(c[:, j])) > 0.0
    )
    return GroupLassoSolution(
        beta=beta,
        converged=converged,
        sweeps=sweeps,
        max_change=max_change,
        kkt_residual=worst,
        objective=path[-1],
        objective_path=tuple(path),
        active=active,
    )


def _standardized_grams(
    designs: tuple[np.ndarray, ...],
    weights: np.ndarray,
    n0: int,
    p: int,
) -> np.ndarray:
    """Stack (m, q, q) Grams of weight-standardized columns over n0 p."""
    m, q = weights.shape
    gram = np.empty((m, q, q))
    scale = 1.0 / (n0 * p)
    for l, x in enumerate(designs):
        g = x.T @ x
        g = (g + g.T) / 2.0
        gram[l] = scale * g / np.outer(weights[l], weights[l])
    return gram


def solve(
    problem: GroupLassoProblem,
    tol: float = 1e-8,
    kkt_tol: float = 1e-6,
    max_sweeps: int = 2000,
    method: str = "auto",
) -> GroupLassoSolution:
    """Block-coordinate descent from a zero start.

    method "gram" precomputes q x q session Grams (best when n_l p > q),
    "data" keeps residual vectors instead (best when q > n_l p); "auto"
    picks per the row/column balance.  Both paths produce identical updates.
    """
    if method not in ("auto", "gram", "data"):
        raise ConfigError(f"unknown method {method!r}")
    if method == "auto":
        rows = min(n * problem.p for n in problem.n)
        method = "gram" if rows >= problem.q else "data"
    if method == "gram":
        gram = _standardized_grams(
            problem.designs, problem.weights, problem.n0, problem.p
        )
        w_i = problem.weights[:, problem.target]
        h = gram[:, :, problem.target] * w_i[:, None]
        yy = np.array(
            [
                w_i[l] ** 2 * (problem.n[l] * problem.p) / (problem.n0 * problem.p)
                for l in range(problem.m)
            ]
        )
        return _bcd(
            gram,
            h,
            yy,
            problem.weights,
            problem.target,
            problem.gamma,
            tol,
            kkt_tol,
            max_sweeps,
        )
    return _bcd_data(problem, tol, kkt_tol, max_sweeps)


def _bcd_data(
    problem: GroupLassoProblem,
    tol: float,
    kkt_tol: float,
    max_sweeps: int,
) -> GroupLassoSolution:
    """Residual-tracking variant of the same block updates."""
    m, q = problem.weights.shape
    target = problem.target
    gamma = problem.gamma
    w = problem.weights
    scale = 1.0 / (problem.n0 * problem.p)
    xs = [problem.designs[l] / w[l] for l in range(m)]  # standardized columns
    y = [problem.designs[l][:, target] for l in range(m)]
    a = np.stack(
        [scale * np.einsum("ij,ij->j", x, x) for x in xs]
    )  # (m, q) curvatures
    c = np.zeros((m, q))
    r = [y[l].copy() for l in range(m)]
    order = [j for j in range(q) if j != target]

    def current_objective() -> float:
        loss = 0.5 * scale * sum(float(rl @ rl) for rl in r)
        norms = np.linalg.norm(c, axis=0)
        norms[target] = 0.0
        return loss + gamma * float(norms.sum())

    path = [current_objective()]
    sweeps = 0
    max_change = np.inf
    converged = False
    while sweeps < max_sweeps:
        sweeps += 1
        max_change = 0.0
        for j in order:
            z = np.array(
                [scale * float(xs[l][:, j] @ r[l]) for l in range(m)]
            ) + a[:, j] * c[:, j]
            new = _group_update(z, a[:, j], gamma)
            delta = new - c[:, j]
            if np.any(delta != 0.0):
                step = float(np.max(np.abs(delta) / w[:, j]))
                if step > max_change:
                    max_change = step
                for l in range(m):
                    if delta[l] != 0.0:
                        r[l] -= xs[l][:, j] * delta[l]
                c[:, j] = new
        obj = current_objective()
        if obj > path[-1] + 1e-10 * (1.0 + abs(path[-1])):
            raise AssertionError(
                f"objective increased across sweep: {path[-1]} -> {obj}"
            )
        path.append(obj)
        if max_change < tol:
            worst = 0.0
            for j in order:
                gj = -np.array(
                    [scale * float(xs[l][:, j] @ r[l]) for l in range(m)]
                )
                nc = np.linalg.norm(c[:, j])
                if nc == 0.0:
                    worst = max(worst, max(0.0, float(np.linalg.norm(gj)) - gamma))
                else:
                    worst = max(
                        worst,
                        float(np.linalg.norm(gj + gamma * c[:, j] / nc)),
                    )
            if worst <= kkt_tol:
                converged = True
                break
            tol = tol / 10.0

    if not converged:
        worst = 0.0
        for j in order:
            gj = -np.array([scale * float(xs[l][:, j] @ r[l]) for l in range(m)])
            nc = np.linalg.norm(c[:, j])
            if nc == 0.0:
                worst = max(worst, max(0.0, float(np.linalg.norm(gj)) - gamma))
            else:
                worst = max(
                    worst, float(np.linalg.norm(gj + gamma * c[:, j] / nc))
                )

    beta = c / w
    beta[:, target] = 0.0
    active = tuple(j for j in order if float(np.linalg.norm(c[:, j])) > 0.0)
    return GroupLassoSolution(
        beta=beta,
        converged=converged,
        sweeps=sweeps,
        max_change=max_change,
        kkt_residual=worst,
        objective=path[-1],
        objective_path=tuple(path),
        active=active,
    )


@dataclass(frozen=True)
class NodewiseFit:
    """All q node-wise solutions assembled into coefficient matrices."""

    beta: np.ndarray  # (m, q, q); beta[l][j, i] = coefficient of j for node i
    gamma: np.ndarray  # (q,) penalty per node
    converged: tuple[bool, ...]
    kkt_residuals: tuple[float, ...]
    session_scales: tuple[float, ...]


def _resolve_gamma(dims: Dimensions, gamma, c0: float) -> np.ndarray:
    if gamma is None or (isinstance(gamma, str) and gamma == "theory"):
        return np.full(dims.q, default_gamma(dims, c0=c0))
    if np.isscalar(gamma):
        if float(gamma) < 0:
            raise ConfigError("gamma must be >= 0")
        return np.full(dims.q, float(gamma))
    arr = np.asarray(gamma, dtype=np.float64)
    if arr.shape != (dims.q,):
        raise ConfigError(f"per-node gamma must have shape ({dims.q},)")
    if np.any(arr < 0):
        raise ConfigError("gamma must be >= 0")
    return arr


def fit_all_nodes(
    dataset: MultiSessionDataset,
    gamma=None,
    c0: float = 0.5,
    tol: float = 1e-8,
    kkt_tol: float = 1e-6,
    max_sweeps: int = 2000,
    normalize: bool = True,
    n_jobs: int = 1,
) -> NodewiseFit:
    """Solve every node-wise group lasso on one dataset.

    Each session is rescaled by the root mean square of its entries before
    fitting (normalize=True), which makes the coefficients, and everything
    derived from them, invariant to per-session rescaling of the raw data.
    Coefficients are unchanged by the rescale itself since response and
    predictors share it.
    """
    dims = dataset.dims
    gammas = _resolve_gamma(dims, gamma, c0)
    designs = []
    scales = []
    for arr in dataset.sessions:
        x = stack_spatial(arr)
        if normalize:
            scale = math.sqrt(float(np.mean(x * x)))
            if scale <= 0:
                raise ZeroVarianceColumn("session has all-zero data")
            x = x / scale
        else:
            scale = 1.0
        designs.append(x)
        scales.append(scale)
    weights = np.stack(
        [
            np.linalg.norm(x, axis=0) / math.sqrt(x.shape[0])
            for x in designs
        ]
    )
    wmax = weights.max()
    if wmax <= 0 or np.any(weights < 1e-12 * wmax):
        raise ZeroVarianceColumn("a design column has (numerically) zero norm")
    gram = _standardized_grams(tuple(designs), weights, dims.n0, dims.p)
    ratios = np.array([dims.n[l] / dims.n0 for l in range(dims.m)])

    def solve_node(i: int) -> GroupLassoSolution:
        w_i = weights[:, i]
        h = gram[:, :, i] * w_i[:, None]
        yy = w_i**2 * ratios  # ||y||^2 / (n0 p)
        return _bcd(
            gram, h, yy, weights, i, float(gammas[i]), tol, kkt_tol, max_sweeps
        )

    if n_jobs != 1:
        from joblib import Parallel, delayed

        solutions = Parallel(n_jobs=n_jobs)(
            delayed(solve_node)(i) for i in range(dims.q)
        )
    else:
        solutions = [solve_node(i) for i in range(dims.q)]

    beta = np.zeros((dims.m, dims.q, dims.q))
    for i, sol in enumerate(solutions):
        beta[:, :, i] = sol.beta
        beta[:, i, i] = 0.0
    return NodewiseFit(
        beta=beta,
        gamma=gammas,
        converged=tuple(s.converged for s in solutions),
        kkt_residuals=tuple(s.kkt_residual for s in solutions),
        session_scales=tuple(scales),
    )


@dataclass(frozen=True)
class CvResult:
    best_gamma: float
    gammas: tuple[float, ...]
    losses: tuple[float, ...]


def cv_gamma(
    dataset: MultiSessionDataset,
    grid=None,
    folds: int = 5,
    c0: float = 0.5,
    tol: float = 1e-7,
    max_sweeps: int = 500,
) -> CvResult:
    """K-fold cross-validation for a shared gamma over a log grid.

    Trials are assigned to folds round-robin by index within each session
    (deterministic).  Sessions with a single trial stay in training for every
    fold.  The score is held-out residual sum of squares per entry, summed
    over nodes; ties prefer the larger gamma.
    """
    if folds < 2:
        raise ConfigError("need at least 2 folds")
    dims = dataset.dims
    if grid is None:
        g0 = default_gamma(dims, c0=c0)
        grid = g0 * np.logspace(-2.0, 0.5, 8)
    grid = np.asarray(sorted(float(g) for g in grid))
    if np.any(grid < 0):
        raise ConfigError("gamma grid must be nonnegative")

    losses = np.zeros(grid.size)
    counts = 0
    for f in range(folds):
        train_sessions = []
        held = []
        train_n = []
        for l, arr in enumerate(dataset.sessions):
            n_l = arr.shape[0]
            if n_l < 2:
                train_idx = np.arange(n_l)
                held_idx = np.array([], dtype=int)
            else:
                held_idx = np.array(
                    [k for k in range(n_l) if k % folds == f], dtype=int
                )
                train_idx = np.array(
                    [k for k in range(n_l) if k % folds != f], dtype=int
                )
                if train_idx.size == 0:
                    raise ConfigError("a fold would empty a session's training set")
            train_sessions.append(arr[train_idx])
            held.append(arr[held_idx])
            train_n.append(train_idx.size)
        n_held = sum(h.shape[0] for h in held)
        if n_held == 0:
            continue
        counts += n_held
        train_ds = MultiSessionDataset(
            dims=Dimensions(m=dims.m, n=tuple(train_n), p=dims.p, q=dims.q),
            sessions=tuple(train_sessions),
            name=dataset.name + f"-fold{f}",
        )
        for gi, g in enumerate(grid):
            fit = fit_all_nodes(
                train_ds, gamma=float(g), tol=tol, max_sweeps=max_sweeps
            )
            sse = 0.0
            for l, h_arr in enumerate(held):
                if h_arr.shape[0] == 0:
                    continue
                x = stack_spatial(h_arr)
                resid = x - x @ fit.beta[l]
                sse += float(np.sum(resid * resid))
            losses[gi] += sse
    if counts == 0:
        raise ConfigError("cross-validation held out no trials; need n_l >= 2")
    # normalize per held-out entry; pick the largest gamma among near-ties
    losses = losses / (counts * dims.p * dims.q)
    best = losses.min()
    idx = int(max(np.flatnonzero(losses <= best * (1.0 + 1e-12))))
    return CvResult(
        best_gamma=float(grid[idx]),
        gammas=tuple(float(g) for g in grid),
        losses=tuple(float(v) for v in losses),
    )
