"""Fuzzy membership inference and constraint augmentation.

Queried pairs tell us which instances belong together; many more pairs are
informative only indirectly. This module fits a row-stochastic membership
matrix to the queried relations, pushing entries toward {0, 1} with a
min(|z|, |z - 1|) penalty, then converts pairwise concordance of the fitted
rows into weighted augmented constraint sets.

The fit minimizes

    sum_{(i,j) queried} (y_ij - h_i . h_j)^2
        + penalty_weight * sum_{i constrained} sum_k min(|h_ik|, |h_ik - 1|)

subject to each row living on the probability simplex. Rows never touched by
a constraint stay exactly uniform. The solver is proximal block-coordinate
descent over constrained rows: gradient on the smooth term, elementwise
:func:`mdsp_prox` on the penalty, simplex projection, and a backtracking
acceptance that only ever takes steps decreasing the full objective, so the
objective trace is monotone by construction.
"""

from __future__ import annotations

import dataclasses
import warnings

import numpy as np
from numpy.typing import NDArray

from .core import ConstraintStore, Dataset, Pair, add_constraint
from .errors import (
    ConvergenceWarning,
    DimensionError,
    InsufficientConstraints,
)

CONCORDANCE_GUARD = 1e-9


def project_simplex(v: NDArray) -> NDArray[np.float64]:
    """Euclidean projection of v onto the probability simplex.

    Sort-and-threshold algorithm; O(p log p).

    References
    ----------
    Duchi, Shalev-Shwartz, Singer, Chandra. Efficient projections onto the
    l1-ball for learning in high dimensions. ICML 2008.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 1:
        raise DimensionError("project_simplex expects a 1-D vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    hits = np.nonzero(u - css / idx > 0)[0]
    theta = css[hits[-1]] / (hits[-1] + 1)
    return np.maximum(v - theta, 0.0)


def mdsp_prox(v, tau):
    """Proximal map of tau * min(|z|, |z - 1|) at v, elementwise.

    Solves argmin_z 0.5 (z - v)^2 + tau min(|z|, |z - 1|) exactly: each side
    of the breakpoint z = 1/2 is a shifted soft-threshold, clamped to its
    half-line, and the better candidate wins. Ties go to the candidate nearer
    v, then to the one nearer 0.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    arr = np.asarray(v, dtype=np.float64)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)

    lo = np.sign(arr) * np.maximum(np.abs(arr) - tau, 0.0)
    lo = np.minimum(lo, 0.5)
    hi = 1.0 + np.sign(arr - 1.0) * np.maximum(np.abs(arr - 1.0) - tau, 0.0)
    hi = np.maximum(hi, 0.5)

    def value(z):
        return 0.5 * (z - arr) ** 2 + tau * np.minimum(np.abs(z), np.abs(z - 1.0))

    f_lo, f_hi = value(lo), value(hi)
    eps = 1e-12
    take_lo = f_lo < f_hi - eps
    tie = np.abs(f_lo - f_hi) <= eps
    nearer = np.abs(lo - arr) < np.abs(hi - arr) - eps
    dist_tie = np.abs(np.abs(lo - arr) - np.abs(hi - arr)) <= eps
    toward_zero = np.abs(lo) <= np.abs(hi)
    pick_lo = take_lo | (tie & (nearer | (dist_tie & toward_zero)))
    out = np.where(pick_lo, lo, hi)
    return float(out[0]) if scalar else out


@dataclasses.dataclass(frozen=True)
class AdmmConfig:
    """Knobs for the membership fit.

    penalty_weight scales the push toward {0, 1}; rho is the inverse of the
    initial per-row step; tol stops the outer sweeps once the objective
    decrease falls below it; inner_steps bounds proximal steps per row visit.
    """

    penalty_weight: float = 0.5
    rho: float = 1.0
    tol: float = 1e-4
    max_iters: int = 200
    inner_steps: int = 10

    def __post_init__(self) -> None:
        if self.penalty_weight < 0 or self.rho <= 0 or self.tol <= 0:
            raise ValueError("penalty_weight >= 0, rho > 0 and tol > 0 required")
        if self.max_iters < 1 or self.inner_steps < 1:
            raise ValueError("iteration counts must be positive")


@dataclasses.dataclass(frozen=True)
class FuzzyMembership:
    """Fitted membership matrix with bookkeeping from the solve."""

    probs: NDArray[np.float64]
    inferred: NDArray[np.bool_]
    converged: bool
    objective_trace: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 2:
            raise DimensionError("membership matrix must be 2-D")
        if probs.min(initial=0.0) < -1e-9 or np.abs(probs.sum(axis=1) - 1.0).max() > 1e-6:
            raise DimensionError("membership rows must lie on the simplex")
        inferred = np.asarray(self.inferred, dtype=bool)
        if inferred.shape != (probs.shape[0],):
            raise DimensionError("inferred mask must have one entry per row")
        probs = probs.copy()
        probs.setflags(write=False)
        inferred = inferred.copy()
        inferred.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "inferred", inferred)

    @property
    def n_clusters(self) -> int:
        return self.probs.shape[1]


def _pair_arrays(store: ConstraintStore):
    pairs = sorted(store.similar) + sorted(store.dissimilar)
    y = np.array([1.0] * len(store.similar) + [0.0] * len(store.dissimilar))
    return pairs, y


def membership_objective(
    probs: NDArray, store: ConstraintStore, penalty_weight: float, inferred: NDArray
) -> float:
    """Constraint misfit plus the {0,1} push penalty over inferred rows."""
    probs = np.asarray(probs, dtype=np.float64)
    pairs, y = _pair_arrays(store)
    total = 0.0
    if pairs:
        left = np.array([p[0] for p in pairs])
        right = np.array([p[1] for p in pairs])
        conc = np.einsum("ij,ij->i", probs[left], probs[right])
        total += float(np.sum((y - conc) ** 2))
    mask = np.asarray(inferred, dtype=bool)
    if mask.any():
        block = probs[mask]
        total += penalty_weight * float(
            np.sum(np.minimum(np.abs(block), np.abs(block - 1.0)))
        )
    return total


def fit_fuzzy_membership(
    data: Dataset,
    store: ConstraintStore,
    n_clusters: int,
    cfg: AdmmConfig | None = None,
    seed: int = 0,
    warm_start: NDArray | None = None,
) -> FuzzyMembership:
    """Fit the membership matrix to the queried constraints.

    Rows for instances with no constraint are fixed at uniform 1/K. Rows in
    the largest must-link components are seeded one-hot (component rank picks
    the column); remaining constrained rows start near uniform with a small
    seeded perturbation so symmetric saddles cannot trap the solver. Passing
    ``warm_start`` reuses a previous solution's rows for currently constrained
    instances. A ConvergenceWarning is issued when the sweep cap is reached
    before the objective decrease drops below tol; the last iterate is still
    returned. Deterministic for fixed inputs and seed.
    """
    cfg = cfg or AdmmConfig()
    if n_clusters < 2:
        raise DimensionError("need at least two clusters")
    if store.n != data.n:
        raise DimensionError("store and dataset disagree on instance count")
    n, k = data.n, n_clusters
    rows = sorted(store.constrained_instances())
    probs = np.full((n, k), 1.0 / k)
    inferred = np.zeros(n, dtype=bool)
    inferred[rows] = True
    if not rows:
        return FuzzyMembership(probs, inferred, True, (0.0,))

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    seeded = set()
    for rank, comp in enumerate(store.constrained_components()[:k]):
        for i in comp:
            probs[i] = 0.0
            probs[i, rank] = 1.0
            seeded.add(i)
    for i in rows:
        if i not in seeded:
            probs[i] = project_simplex(1.0 / k + rng.uniform(0.0, 1e-3, size=k))
    if warm_start is not None:
        warm = np.asarray(warm_start, dtype=np.float64)
        if warm.shape != (n, k):
            raise DimensionError("warm start shape mismatch")
        for i in rows:
            probs[i] = project_simplex(warm[i])

    neighbors: dict[int, list[tuple[int, float]]] = {i: [] for i in rows}
    for a, b in sorted(store.similar):
        neighbors[a].append((b, 1.0))
        neighbors[b].append((a, 1.0))
    for a, b in sorted(store.dissimilar):
        neighbors[a].append((b, 0.0))
        neighbors[b].append((a, 0.0))
    nb_idx = {i: np.array([j for j, _ in neighbors[i]], dtype=int) for i in rows}
    nb_y = {i: np.array([y for _, y in neighbors[i]]) for i in rows}

    pairs, pair_y = _pair_arrays(store)
    left = np.array([p[0] for p in pairs])
    right = np.array([p[1] for p in pairs])
    row_arr = np.array(rows)
    lam = cfg.penalty_weight
    step0 = 1.0 / cfg.rho

    def objective(h_mat):
        conc = np.einsum("ij,ij->i", h_mat[left], h_mat[right])
        fit = float(np.sum((pair_y - conc) ** 2))
        block = h_mat[row_arr]
        return fit + lam * float(np.sum(np.minimum(np.abs(block), np.abs(block - 1.0))))

    def data_gradient(h_mat):
        conc = np.einsum("ij,ij->i", h_mat[left], h_mat[right])
        coef = -2.0 * (pair_y - conc)
        grad = np.zeros_like(h_mat)
        np.add.at(grad, left, coef[:, None] * h_mat[right])
        np.add.at(grad, right, coef[:, None] * h_mat[left])
        return grad[row_arr]

    def project_rows(block):
        u = np.sort(block, axis=1)[:, ::-1]
        css = np.cumsum(u, axis=1) - 1.0
        idx = np.arange(1, k + 1)
        feasible = u - css / idx > 0
        last = k - 1 - np.argmax(feasible[:, ::-1], axis=1)
        theta = css[np.arange(block.shape[0]), last] / (last + 1)
        return np.maximum(block - theta[:, None], 0.0)

    def row_value(h, idx, y):
        conc = probs[idx] @ h
        fit = float(np.sum((y - conc) ** 2))
        return fit + lam * float(np.sum(np.minimum(np.abs(h), np.abs(h - 1.0))))

    def sequential_sweep():
        """One Gauss-Seidel pass; breaks joint-step deadlocks."""
        moved = False
        for i in rows:
            idx, y = nb_idx[i], nb_y[i]
            h = probs[i]
            current = row_value(h, idx, y)
            conc = probs[idx] @ h
            grad = -2.0 * (y - conc) @ probs[idx]
            step = step0
            for _ in range(25):
                cand = project_simplex(mdsp_prox(h - step * grad, lam * step))
                cand_val = row_value(cand, idx, y)
                if cand_val < current:
                    probs[i] = cand
                    moved = True
                    break
                step *= 0.5
        return moved

    trace = [objective(probs)]
    converged = False
    step = step0
    for _ in range(cfg.max_iters):
        current = trace[-1]
        for _ in range(cfg.inner_steps):
            grad = data_gradient(probs)
            step = min(step * 2.0, step0)
            accepted = False
            for _ in range(30):
                cand_rows = project_rows(mdsp_prox(probs[row_arr] - step * grad, lam * step))
                cand = probs.copy()
                cand[row_arr] = cand_rows
                cand_obj = objective(cand)
                if cand_obj < current:
                    probs = cand
                    current = cand_obj
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
        if not accepted and not sequential_sweep():
            trace.append(objective(probs))
            converged = True
            break
        trace.append(objective(probs))
        if trace[-2] - trace[-1] <= cfg.tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            "membership fit hit max_iters before the objective settled",
            ConvergenceWarning,
            stacklevel=2,
        )
    return FuzzyMembership(probs, inferred, converged, tuple(trace))


@dataclasses.dataclass(frozen=True)
class AugmentedConstraints:
    """Weighted pair sets inferred from membership concordance."""

    similar: frozenset[Pair]
    dissimilar: frozenset[Pair]
    weights: dict[Pair, float]

    def weight(self, pair: Pair) -> float:
        return self.weights[pair]

    @classmethod
    def empty(cls) -> "AugmentedConstraints":
        return cls(frozenset(), frozenset(), {})


def augment_constraints(membership: FuzzyMembership) -> AugmentedConstraints:
    """Turn fitted memberships into weighted augmented constraint sets.

    A pair of inferred rows with concordance h_i . h_j above 1/K is augmented
    similar, below 1/K augmented dissimilar, with weight

        w = K/(K-1) * max(c - 1/K, 0) - K * min(c - 1/K, 0)

    which runs linearly from 0 at the uninformative level 1/K up to 1 at
    certainty on either side. Pairs at exactly 1/K (any pair touching an
    unconstrained row, in particular) land in neither set.
    """
    k = membership.n_clusters
    thr = 1.0 / k
    active = np.nonzero(membership.inferred)[0]
    similar: set[Pair] = set()
    dissimilar: set[Pair] = set()
    weights: dict[Pair, float] = {}
    if active.size >= 2:
        block = membership.probs[active]
        conc = block @ block.T
        for a in range(active.size):
            for b in range(a + 1, active.size):
                c = float(conc[a, b])
                if c > thr + CONCORDANCE_GUARD:
                    pair = (int(active[a]), int(active[b]))
                    similar.add(pair)
                    weights[pair] = min(k / (k - 1) * (c - thr), 1.0)
                elif c < thr - CONCORDANCE_GUARD:
                    pair = (int(active[a]), int(active[b]))
                    dissimilar.add(pair)
                    weights[pair] = min(k * (thr - c), 1.0)
    return AugmentedConstraints(frozenset(similar), frozenset(dissimilar), weights)


def tune_lambda(
    data: Dataset,
    store: ConstraintStore,
    n_clusters: int,
    grid,
    cfg: AdmmConfig | None = None,
    seed: int = 0,
) -> float:
    """Pick the {0,1}-push weight by 5-fold cross-validation on labeled pairs.

    Folds split the queried pair list; each candidate weight is scored by the
    squared error between held-out labels and concordances fitted on the
    remaining pairs. Ties resolve to the smaller weight. Raises
    InsufficientConstraints with fewer than 5 labeled pairs. A singleton grid
    short-circuits without fitting.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("empty grid")
    if len(grid) == 1:
        return grid[0]
    cfg = cfg or AdmmConfig()
    pairs, y = _pair_arrays(store)
    if len(pairs) < 5:
        raise InsufficientConstraints(
            f"cross-validation needs at least 5 labeled pairs, have {len(pairs)}"
        )
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    perm = rng.permutation(len(pairs))
    folds = np.array_split(perm, 5)

    def fold_error(lam: float) -> float:
        total = 0.0
        fold_cfg = dataclasses.replace(cfg, penalty_weight=lam)
        for fold in folds:
            held = set(fold.tolist())
            train = ConstraintStore(store.n)
            for t in range(len(pairs)):
                if t in held:
                    continue
                i, j = pairs[t]
                train = add_constraint(train, i, j, "similar" if y[t] == 1.0 else "dissimilar")
            fit = fit_fuzzy_membership(data, train, n_clusters, fold_cfg, seed)
            for t in fold:
                i, j = pairs[t]
                conc = float(fit.probs[i] @ fit.probs[j])
                total += (y[t] - conc) ** 2
        return total

    best_lam, best_err = None, np.inf
    for lam in sorted(grid):
        err = fold_error(lam)
        if err < best_err - 1e-12:
            best_lam, best_err = lam, err
    return float(best_lam)
