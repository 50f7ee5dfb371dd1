"""Metric learning from queried and augmented pairwise constraints.

The training program pushes dissimilar pairs apart subject to a budget on
how far similar pairs may spread.  Scale invariance of the underlying
minimize-similar / dissimilar-at-least-one formulation lets the diagonal
case be solved as one concave maximization with a single linear constraint:

    maximize   sum over dissimilar pairs of weight * sqrt(sum_m a_m d_m^2)
    subject to sum_m c_m a_m <= 1,  a >= 0

where c folds the similar-pair spread, the weighted augmented similar
spread, and the selective penalty gamma on the penalized coordinates.
Projected gradient ascent with backtracking solves it; the full-matrix
variant first finds eigenvectors from an unpenalized full solve, then runs
the diagonal solver in the rotated coordinates.

Feature and eigenvalue positions in penalty sets are numbered from 1, the
same convention as cluster labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from .augmentation import AugmentedConstraints
from .core import Dataset, MetricMatrix, Pair
from .errors import DegenerateProblem, DimensionError, EmptyHistory

SQRT_GUARD = 1e-12

# The budget constraint is scale-free, so it is normalized to 1 everywhere.
_BUDGET = 1.0


@dataclass(frozen=True)
class SolverSettings:
    """Projected-gradient controls shared by both solver kinds."""

    max_iters: int = 500
    step_shrink: float = 0.5
    sufficient_increase: float = 1e-4
    step_tol: float = 1e-7

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not 0.0 < self.step_shrink < 1.0:
            raise ValueError("step_shrink must lie in (0, 1)")
        if self.sufficient_increase <= 0 or self.step_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class MetricProblem:
    """One training instance: pair sets, weights, and penalty placement."""

    data: Dataset
    similar: frozenset[Pair]
    dissimilar: frozenset[Pair]
    aug: AugmentedConstraints | None = None
    gamma: float = 0.0
    penalty_set: frozenset[int] = field(default_factory=frozenset)
    kind: Literal["diagonal", "full"] = "diagonal"

    def __post_init__(self) -> None:
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.kind not in ("diagonal", "full"):
            raise ValueError(f"unknown kind {self.kind!r}")
        p = self.data.p
        if any(not 1 <= m <= p for m in self.penalty_set):
            raise ValueError("penalty_set entries must lie in 1..p")


@dataclass(frozen=True)
class MetricHistory:
    """Metrics learned so far, exposing their averaged per-feature ranks."""

    metrics: tuple[MetricMatrix, ...] = ()

    def append(self, metric: MetricMatrix) -> "MetricHistory":
        return MetricHistory(self.metrics + (metric,))

    def __len__(self) -> int:
        return len(self.metrics)

    @property
    def rank_avg(self) -> NDArray[np.float64]:
        """Mean over history of each feature's eigenvalue rank (ascending)."""
        if not self.metrics:
            raise EmptyHistory("no metrics recorded yet")
        ranks = [_average_ranks(m.feature_weights()) for m in self.metrics]
        return np.mean(ranks, axis=0)


def _average_ranks(values: NDArray) -> NDArray[np.float64]:
    """Ascending rank statistics, 1-based, ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ordered = values[order]
    ranks = np.empty(values.size)
    start = 0
    while start < values.size:
        stop = start
        while stop + 1 < values.size and ordered[stop + 1] == ordered[start]:
            stop += 1
        ranks[order[start : stop + 1]] = (start + stop) / 2 + 1
        start = stop + 1
    return ranks


def project_feasible(a: NDArray, c: NDArray, budget: float) -> NDArray[np.float64]:
    """Euclidean projection onto {z >= 0, c . z <= budget} for c >= 0."""
    a = np.asarray(a, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if a.shape != c.shape or a.ndim != 1:
        raise DimensionError("vector and cost shapes differ")
    if np.any(c < 0):
        raise ValueError("costs must be nonnegative")
    if budget <= 0:
        raise ValueError("budget must be positive")
    z = np.maximum(a, 0.0)
    if float(c @ z) <= budget:
        return z
    # On the active face the solution is max(a - theta c, 0) with theta > 0
    # chosen so the budget holds with equality; walk the breakpoints of that
    # piecewise-linear spend function until the crossing segment is found.
    mask = (c > 0) & (a > 0)
    ts = a[mask] / c[mask]
    order = np.argsort(ts)
    ts = ts[order]
    ca = (c * a)[mask][order]
    cc = (c * c)[mask][order]
    spend_lin = float(ca.sum())
    spend_quad = float(cc.sum())
    theta = 0.0
    for idx in range(ts.size):
        theta = (spend_lin - budget) / spend_quad
        if theta <= ts[idx] + 1e-15:
            break
        spend_lin -= ca[idx]
        spend_quad -= cc[idx]
    z = np.maximum(a - theta * c, 0.0)
    overshoot = float(c @ z)
    if overshoot > budget:
        z *= budget / overshoot
    return z


def _pair_diff2(x: NDArray, pairs) -> NDArray[np.float64]:
    if not pairs:
        return np.zeros((0, x.shape[1]))
    arr = np.array(sorted(pairs), dtype=np.intp)
    d = x[arr[:, 0]] - x[arr[:, 1]]
    return d * d


def _assemble(problem: MetricProblem):
    """Split the problem into the budget vector and the dissimilar stack.

    Returns (costs, diff2, weights): costs is the per-feature budget
    coefficient vector (similar spread plus penalty), diff2 stacks squared
    differences of every dissimilar pair, weights carries each row's
    normalized contribution to the objective.
    """
    x = problem.data.points
    p = problem.data.p
    costs = np.zeros(p)
    s2 = _pair_diff2(x, problem.similar)
    if s2.shape[0]:
        costs += s2.sum(axis=0) / s2.shape[0]
    aug = problem.aug
    rows = []
    weights = []
    d2 = _pair_diff2(x, problem.dissimilar)
    if d2.shape[0]:
        rows.append(d2)
        weights.append(np.full(d2.shape[0], 1.0 / d2.shape[0]))
    if aug is not None and aug.similar:
        pairs = sorted(aug.similar)
        w = np.array([aug.weights[q] for q in pairs])
        m2 = _pair_diff2(x, pairs)
        costs += (w[:, None] * m2).sum(axis=0) / len(pairs)
    if aug is not None and aug.dissimilar:
        pairs = sorted(aug.dissimilar)
        w = np.array([aug.weights[q] for q in pairs])
        rows.append(_pair_diff2(x, pairs))
        weights.append(w / len(pairs))
    if problem.penalty_set:
        idx = np.array(sorted(problem.penalty_set), dtype=np.intp) - 1
        costs[idx] += problem.gamma
    if rows:
        diff2 = np.vstack(rows)
        weight = np.concatenate(weights)
    else:
        diff2 = np.zeros((0, p))
        weight = np.zeros(0)
    return costs, diff2, weight


def _sqrt_objective(diff2: NDArray, weight: NDArray):
    """Value and gradient of the weighted root-distance sum in a."""

    def value(a):
        return float(weight @ np.sqrt(diff2 @ a + SQRT_GUARD))

    def gradient(a):
        return diff2.T @ (weight / (2.0 * np.sqrt(diff2 @ a + SQRT_GUARD)))

    return value, gradient


def _diagonal_solve(
    costs: NDArray,
    diff2: NDArray,
    weight: NDArray,
    opt: SolverSettings,
    rng: np.random.Generator,
) -> tuple[NDArray[np.float64], list[float]]:
    p = costs.size
    value, gradient = _sqrt_objective(diff2, weight)

    if np.all(costs <= 1e-15):
        # No similar mass and no penalty: any scale is optimal for the
        # original program, so pin the isotropic direction to the dissimilar
        # boundary instead of ascending without bound.
        base = value(np.ones(p))
        return np.ones(p) / base**2, []

    raw = rng.uniform(0.0, 1.0, size=p)
    denom = float(costs @ raw)
    a = project_feasible(raw / denom if denom > 1e-15 else raw, costs, _BUDGET)
    best = value(a)
    trace = [best]
    step = 1.0
    for _ in range(opt.max_iters):
        grad = gradient(a)
        moved = False
        delta = None
        while step > 1e-18:
            cand = project_feasible(a + step * grad, costs, _BUDGET)
            delta = cand - a
            if float(np.linalg.norm(delta)) < opt.step_tol:
                break
            cand_val = value(cand)
            if cand_val >= best + opt.sufficient_increase * float(grad @ delta):
                moved = True
                break
            step *= opt.step_shrink
        if not moved:
            break
        a = cand
        best = cand_val
        trace.append(best)
        step = min(step * 2.0, 1e6)
        if float(np.linalg.norm(delta)) < opt.step_tol:
            break
    # The objective grows with scale, so the optimum sits on the budget
    # boundary; land there exactly.
    spent = float(costs @ a)
    if spent > 1e-15:
        a = a / spent
    return a, trace


def learn_metric_diagonal(
    problem: MetricProblem, opt: SolverSettings | None = None, seed: int = 0
) -> MetricMatrix:
    """Solve the diagonal training program by projected gradient ascent."""
    if problem.kind != "diagonal":
        raise ValueError("problem kind must be 'diagonal'")
    opt = opt or SolverSettings()
    costs, diff2, weight = _assemble(problem)
    if diff2.shape[0] == 0 or not np.any(diff2 > 0):
        raise DegenerateProblem("no dissimilar pair separates any feature")
    rng = np.random.default_rng(seed)
    a, _ = _diagonal_solve(costs, diff2, weight, opt, rng)
    return MetricMatrix("diagonal", a)


def _psd_clip(a: NDArray) -> NDArray[np.float64]:
    sym = 0.5 * (a + a.T)
    evals, vecs = np.linalg.eigh(sym)
    evals = np.maximum(evals, 0.0)
    return (vecs * evals) @ vecs.T


def _full_solve(
    problem: MetricProblem, opt: SolverSettings, rng: np.random.Generator
) -> NDArray[np.float64]:
    """Unpenalized full-matrix ascent used only to locate eigenvectors."""
    x = problem.data.points
    p = problem.data.p

    def diffs(pairs):
        if not pairs:
            return np.zeros((0, p))
        arr = np.array(sorted(pairs), dtype=np.intp)
        return x[arr[:, 0]] - x[arr[:, 1]]

    sim_rows = [diffs(problem.similar)]
    sim_w = [np.full(sim_rows[0].shape[0], 1.0 / max(sim_rows[0].shape[0], 1))]
    dis_rows = [diffs(problem.dissimilar)]
    dis_w = [np.full(dis_rows[0].shape[0], 1.0 / max(dis_rows[0].shape[0], 1))]
    aug = problem.aug
    if aug is not None and aug.similar:
        pairs = sorted(aug.similar)
        sim_rows.append(diffs(pairs))
        sim_w.append(
            np.array([aug.weights[q] for q in pairs]) / len(pairs)
        )
    if aug is not None and aug.dissimilar:
        pairs = sorted(aug.dissimilar)
        dis_rows.append(diffs(pairs))
        dis_w.append(
            np.array([aug.weights[q] for q in pairs]) / len(pairs)
        )
    sim_d = np.vstack(sim_rows)
    sim_weight = np.concatenate(sim_w)
    dis_d = np.vstack(dis_rows)
    dis_weight = np.concatenate(dis_w)
    if dis_d.shape[0] == 0 or not np.any(dis_d != 0):
        raise DegenerateProblem("no dissimilar pair separates any feature")
    budget_mat = np.einsum("r,rp,rq->pq", sim_weight, sim_d, sim_d)

    def spent(a):
        return float(np.einsum("pq,qp->", budget_mat, a))

    def value(a):
        vals = np.einsum("rp,pq,rq->r", dis_d, a, dis_d)
        return float(dis_weight @ np.sqrt(np.maximum(vals, 0.0) + SQRT_GUARD))

    def gradient(a):
        vals = np.einsum("rp,pq,rq->r", dis_d, a, dis_d)
        coef = dis_weight / (2.0 * np.sqrt(np.maximum(vals, 0.0) + SQRT_GUARD))
        return np.einsum("r,rp,rq->pq", coef, dis_d, dis_d)

    if not np.any(np.abs(budget_mat) > 1e-15):
        base = value(np.eye(p))
        return np.eye(p) / base**2

    # Objective and budget are jointly scale-homogeneous, so the constrained
    # maximum coincides with the maximum of the scale-free ratio
    # value / sqrt(spent) over the PSD cone; ascend that ratio with
    # eigenvalue clipping as the projection and pin the scale afterwards.
    def ratio(a):
        used = spent(a)
        if used <= 1e-15:
            return -np.inf
        return value(a) / np.sqrt(used)

    start = np.diag(rng.uniform(0.5, 1.5, size=p))
    a = _psd_clip(start / max(spent(start), 1e-15))
    best = ratio(a)
    step = 1.0
    for _ in range(opt.max_iters):
        used = spent(a)
        direction = (
            gradient(a) - (value(a) / (2.0 * used)) * budget_mat
        ) / np.sqrt(used)
        moved = False
        delta = None
        while step > 1e-18:
            cand = _psd_clip(a + step * direction)
            delta = cand - a
            if float(np.linalg.norm(delta)) < opt.step_tol:
                break
            cand_val = ratio(cand)
            if cand_val >= best + opt.sufficient_increase * float(
                np.sum(direction * delta)
            ):
                moved = True
                break
            step *= opt.step_shrink
        if not moved:
            break
        # Renormalizing the accepted point leaves the ratio unchanged and
        # keeps the iterates well scaled.
        a = cand / spent(cand)
        best = cand_val
        step = min(step * 2.0, 1e6)
        if float(np.linalg.norm(delta)) < opt.step_tol:
            break
    used = spent(a)
    if used > 1e-15:
        a = a / used
    return a


def _fix_signs(vecs: NDArray) -> NDArray[np.float64]:
    lead = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[lead, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def learn_metric_full(
    problem: MetricProblem, opt: SolverSettings | None = None, seed: int = 0
) -> MetricMatrix:
    """Two-step full-matrix learning: eigenvectors first, weights second.

    An unpenalized full solve fixes the rotation; the penalized diagonal
    program then runs in those coordinates, where penalty positions index
    eigen-directions by ascending eigenvalue.
    """
    if problem.kind != "full":
        raise ValueError("problem kind must be 'full'")
    opt = opt or SolverSettings()
    rng = np.random.default_rng(seed)
    stage_one = _full_solve(problem, opt, rng)
    _, vecs = np.linalg.eigh(stage_one)
    vecs = _fix_signs(vecs)
    rotated = MetricProblem(
        data=Dataset(problem.data.points @ vecs),
        similar=problem.similar,
        dissimilar=problem.dissimilar,
        aug=problem.aug,
        gamma=problem.gamma,
        penalty_set=problem.penalty_set,
        kind="diagonal",
    )
    diag = learn_metric_diagonal(rotated, opt, seed=seed)
    full = (vecs * diag.values) @ vecs.T
    return MetricMatrix("full", 0.5 * (full + full.T))


def aggregate_penalty_set(history: MetricHistory, q: int) -> frozenset[int]:
    """The q features with the smallest average eigenvalue rank (1-based)."""
    if not history.metrics:
        raise EmptyHistory("no metrics recorded yet")
    avg = history.rank_avg
    if not 1 <= q <= avg.size:
        raise ValueError("q must lie in 1..p")
    order = np.lexsort((np.arange(avg.size), avg))
    return frozenset(int(m) + 1 for m in order[:q])


def select_q(history: MetricHistory) -> int:
    """Elbow-based count of features to penalize.

    Averages the descending spectra across history and places the elbow at
    the largest second difference; everything past the elbow is penalized.
    A spectrum with no positive curvature yields the conservative q = 1.
    """
    if not history.metrics:
        raise EmptyHistory("no metrics recorded yet")
    spectra = [np.sort(m.feature_weights())[::-1] for m in history.metrics]
    mean = np.mean(spectra, axis=0)
    p = mean.size
    if p < 3:
        return 1
    second = mean[2:] - 2.0 * mean[1:-1] + mean[:-2]
    peak = int(np.argmax(second))
    if second[peak] <= 0:
        return 1
    q = p - peak - 1
    return int(min(max(q, 1), p - 1))


def tune_gamma(
    data: Dataset,
    store,
    aug: AugmentedConstraints | None,
    history: MetricHistory,
    grid,
    n_clusters: int,
    kind: Literal["diagonal", "full"] = "diagonal",
    opt: SolverSettings | None = None,
    q: int | None = None,
    seed: int = 0,
) -> float:
    """Pick the penalty strength whose clustering scores best.

    Solves the penalized program for each candidate, clusters under the
    learned metric, and keeps the gamma with the highest variance-ratio
    index; exact ties go to the smaller gamma. The penalized feature count
    defaults to the elbow estimate but can be pinned via q.
    """
    from .clustering import PckmeansConfig, calinski_harabasz, pckmeans

    candidates = sorted(float(g) for g in grid)
    if not candidates:
        raise ValueError("gamma grid is empty")
    if q is None:
        q = select_q(history)
    penalty = aggregate_penalty_set(history, q)
    solver = learn_metric_diagonal if kind == "diagonal" else learn_metric_full
    best_gamma = candidates[0]
    best_score = -np.inf
    for gamma in candidates:
        problem = MetricProblem(
            data=data,
            similar=store.similar,
            dissimilar=store.dissimilar,
            aug=aug,
            gamma=gamma,
            penalty_set=penalty,
            kind=kind,
        )
        metric = solver(problem, opt, seed=seed)
        assignment = pckmeans(
            data, metric, store, PckmeansConfig(n_clusters=n_clusters), seed=seed
        )
        score = calinski_harabasz(data, assignment, metric)
        if score > best_score + 1e-12:
            best_gamma = gamma
            best_score = score
    return best_gamma
