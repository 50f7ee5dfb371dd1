"""Constrained k-means under a learned metric, plus evaluation indices.

The clustering objective charges each instance its squared metric distance
to its center plus a fixed penalty per violated pairwise constraint.  The
assignment step is the classical greedy sequential scan: exact minimization
over joint labelings is intractable, but each single-instance move is a
coordinate-descent step, so the objective never increases between
iterations.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .core import (
    ClusterAssignment,
    ConstraintStore,
    Dataset,
    MetricMatrix,
    squared_distances,
)
from .errors import DegenerateClustering, EmptyClusterWarning, LengthMismatch

_INITS = ("neighborhood-seeded", "random")


@dataclass(frozen=True)
class PckmeansConfig:
    n_clusters: int
    max_iters: int = 100
    violation_weight: float = 1.0
    init: str = "neighborhood-seeded"

    def __post_init__(self) -> None:
        if self.n_clusters < 2:
            raise ValueError("need at least two clusters")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.violation_weight <= 0:
            raise ValueError("violation_weight must be positive")
        if self.init not in _INITS:
            raise ValueError(f"unknown init {self.init!r}")


def _adjacency(store: ConstraintStore) -> tuple[list, list]:
    sim: list[list[int]] = [[] for _ in range(store.n)]
    dis: list[list[int]] = [[] for _ in range(store.n)]
    for a, b in store.similar:
        sim[a].append(b)
        sim[b].append(a)
    for a, b in store.dissimilar:
        dis[a].append(b)
        dis[b].append(a)
    sim_arr = [np.array(r, dtype=np.intp) for r in sim]
    dis_arr = [np.array(r, dtype=np.intp) for r in dis]
    return sim_arr, dis_arr


def _seed_centers(
    data: Dataset,
    metric: MetricMatrix,
    store: ConstraintStore,
    k: int,
    rng: np.random.Generator,
    init: str,
) -> NDArray[np.float64]:
    x = data.points
    if init == "random":
        idx = rng.choice(data.n, size=k, replace=False)
        return x[idx].copy()
    centers = [
        x[sorted(comp)].mean(axis=0) for comp in store.constrained_components()[:k]
    ]
    if not centers:
        centers.append(x[int(rng.integers(data.n))].copy())
    # Farthest-point fill: each new center maximizes distance to the chosen
    # set, ties to the smallest index via argmax.
    while len(centers) < k:
        gaps = squared_distances(metric, x, np.vstack(centers)).min(axis=1)
        centers.append(x[int(np.argmax(gaps))].copy())
    return np.vstack(centers)


def _pair_arrays(pairs) -> tuple[NDArray[np.intp], NDArray[np.intp]]:
    if not pairs:
        empty = np.empty(0, dtype=np.intp)
        return empty, empty
    arr = np.array(sorted(pairs), dtype=np.intp)
    return arr[:, 0], arr[:, 1]


def pckmeans_trace(
    data: Dataset,
    metric: MetricMatrix,
    store: ConstraintStore,
    cfg: PckmeansConfig,
    seed: int = 0,
) -> tuple[ClusterAssignment, list[float]]:
    """As pckmeans, but also returns the per-iteration objective values."""
    if store.n != data.n:
        raise ValueError("constraint store size does not match dataset")
    k = cfg.n_clusters
    if k > data.n:
        raise ValueError("more clusters than instances")
    x = data.points
    n = data.n
    w = cfg.violation_weight
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    centers = _seed_centers(data, metric, store, k, rng, cfg.init)
    sim_adj, dis_adj = _adjacency(store)
    si, sj = _pair_arrays(store.similar)
    di, dj = _pair_arrays(store.dissimilar)

    def objective(labels: NDArray, centers: NDArray) -> float:
        dist = squared_distances(metric, x, centers)
        fit = float(dist[np.arange(n), labels - 1].sum())
        broken = int(np.count_nonzero(labels[si] != labels[sj]))
        joined = int(np.count_nonzero(labels[di] == labels[dj]))
        return fit + w * (broken + joined)

    labels = np.zeros(n, dtype=np.int64)
    trace: list[float] = []
    for _ in range(cfg.max_iters):
        previous = labels.copy()
        dist = squared_distances(metric, x, centers)
        for i in order:
            cost = dist[i].copy()
            partners = sim_adj[i]
            if partners.size:
                known = labels[partners]
                known = known[known > 0]
                if known.size:
                    cost += w * known.size
                    cost -= w * np.bincount(known, minlength=k + 1)[1:]
            partners = dis_adj[i]
            if partners.size:
                known = labels[partners]
                known = known[known > 0]
                if known.size:
                    cost += w * np.bincount(known, minlength=k + 1)[1:]
            labels[i] = int(np.argmin(cost)) + 1
        counts = np.bincount(labels, minlength=k + 1)[1:]
        for c in np.nonzero(counts == 0)[0]:
            warnings.warn(
                f"cluster {c + 1} lost all members; re-seeded with farthest point",
                EmptyClusterWarning,
                stacklevel=2,
            )
            own = squared_distances(metric, x, centers)[np.arange(n), labels - 1]
            # Sole members stay put or another cluster would empty in turn.
            own[counts[labels - 1] == 1] = -np.inf
            moved = int(np.argmax(own))
            labels[moved] = c + 1
            counts = np.bincount(labels, minlength=k + 1)[1:]
        for c in range(k):
            centers[c] = x[labels == c + 1].mean(axis=0)
        trace.append(objective(labels, centers))
        if np.array_equal(labels, previous):
            break
    return ClusterAssignment(labels, centers, k), trace


def pckmeans(
    data: Dataset,
    metric: MetricMatrix,
    store: ConstraintStore,
    cfg: PckmeansConfig,
    seed: int = 0,
) -> ClusterAssignment:
    """Greedy pairwise-constrained k-means under the given metric."""
    assignment, _ = pckmeans_trace(data, metric, store, cfg, seed)
    return assignment


def calinski_harabasz(
    data: Dataset, assignment: ClusterAssignment, metric: MetricMatrix
) -> float:
    """Between/within variance ratio, both measured with the metric's form."""
    labels = assignment.labels
    k = assignment.n_clusters
    n = data.n
    if k < 2 or n <= k:
        raise DegenerateClustering("index needs 2 <= n_clusters < n")
    counts = np.bincount(labels, minlength=k + 1)[1:]
    if np.any(counts == 0):
        raise DegenerateClustering("empty cluster")
    means = np.vstack([data.points[labels == c + 1].mean(axis=0) for c in range(k)])
    overall = data.points.mean(axis=0)
    within = float(
        squared_distances(metric, data.points, means)[np.arange(n), labels - 1].sum()
    )
    if within <= 0.0:
        raise DegenerateClustering("zero within-cluster scatter")
    between = float(
        (counts * squared_distances(metric, means, overall[None, :])[:, 0]).sum()
    )
    return (between / (k - 1)) / (within / (n - k))


def adjusted_rand_index(a, b) -> float:
    """Chance-corrected pair-counting agreement between two labelings."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.size != b.size:
        raise LengthMismatch(f"label sequences of length {a.size} and {b.size}")
    if a.size < 2:
        return 1.0
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)

    def pairs(counts):
        return float((counts * (counts - 1) / 2).sum())

    index = pairs(table)
    rows = pairs(table.sum(axis=1))
    cols = pairs(table.sum(axis=0))
    total = a.size * (a.size - 1) / 2
    expected = rows * cols / total
    top = (rows + cols) / 2
    if top == expected:
        # Both partitions trivial (all singletons or one block): identical.
        return 1.0
    return float((index - expected) / (top - expected))
