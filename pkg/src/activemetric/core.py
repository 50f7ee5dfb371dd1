"""Shared data model: datasets, pairwise constraints, neighborhoods, metrics.

Pairwise constraints are kept closed under transitivity at all times: must-link
relations form components tracked by a union-find over instance indices, and
cannot-link relations live between components. Closing the relations eagerly
means every consumer (metric learning, clustering, the query protocol) sees the
full implied constraint set without recomputing it.
"""

from __future__ import annotations

import dataclasses
from typing import Iterable, Literal

import numpy as np
from numpy.typing import NDArray

from .errors import ContradictionError, DimensionError

Pair = tuple[int, int]
Relation = Literal["similar", "dissimilar"]

PSD_TOL = 1e-8


def ordered_pair(i: int, j: int) -> Pair:
    """Canonical (min, max) form of an unordered index pair."""
    if i == j:
        raise DimensionError(f"pair ({i}, {j}) must join two distinct instances")
    return (i, j) if i < j else (j, i)


def _check_index(i: int, n: int) -> None:
    if not 0 <= i < n:
        raise DimensionError(f"instance index {i} outside [0, {n})")


@dataclasses.dataclass(frozen=True)
class ConstraintStore:
    """Closed set of pairwise constraints over ``n`` instances.

    ``similar`` and ``dissimilar`` hold canonical (i, j) pairs with i < j and
    are always transitively closed: two instances joined to a common component
    are similar to every member, and a cannot-link between components implies
    dissimilarity for every cross pair. Instances are 0-based.

    Stores are immutable values; :func:`add_constraint` returns a new store.
    """

    n: int
    similar: frozenset[Pair] = frozenset()
    dissimilar: frozenset[Pair] = frozenset()
    _root: tuple[int, ...] = dataclasses.field(default=(), repr=False)
    _cannot: frozenset[Pair] = dataclasses.field(default=frozenset(), repr=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DimensionError("constraint store needs at least one instance")
        if not self._root:
            object.__setattr__(self, "_root", tuple(range(self.n)))

    def _members(self, root: int) -> list[int]:
        return [k for k in range(self.n) if self._root[k] == root]

    def implied(self, i: int, j: int) -> Relation | None:
        """Relation already forced by closure for (i, j), or None."""
        _check_index(i, self.n)
        _check_index(j, self.n)
        ri, rj = self._root[i], self._root[j]
        if ri == rj:
            return "similar"
        if ordered_pair(ri, rj) in self._cannot:
            return "dissimilar"
        return None

    def components(self) -> tuple[frozenset[int], ...]:
        """All must-link components (singletons included), by smallest member."""
        groups: dict[int, set[int]] = {}
        for k, r in enumerate(self._root):
            groups.setdefault(r, set()).add(k)
        return tuple(frozenset(groups[r]) for r in sorted(groups))

    def constrained_components(self) -> tuple[frozenset[int], ...]:
        """Components touched by at least one constraint.

        A component qualifies if it has two or more members or carries a
        cannot-link. Ordered by size descending, then smallest member.
        """
        linked = {r for pair in self._cannot for r in pair}
        picked = [
            comp
            for comp in self.components()
            if len(comp) > 1 or min(comp) in linked
        ]
        picked.sort(key=lambda comp: (-len(comp), min(comp)))
        return tuple(picked)

    def constrained_instances(self) -> frozenset[int]:
        """Instances appearing in at least one (closed) constraint."""
        out: set[int] = set()
        for a, b in self.similar:
            out.add(a)
            out.add(b)
        for a, b in self.dissimilar:
            out.add(a)
            out.add(b)
        return frozenset(out)


def add_constraint(store: ConstraintStore, i: int, j: int, relation: Relation) -> ConstraintStore:
    """Record one oracle answer and re-close the constraint set.

    Returns a new store; re-adding an implied constraint is a no-op. Raises
    ContradictionError when the answer conflicts with the existing closure,
    leaving the input store untouched.
    """
    _check_index(i, store.n)
    _check_index(j, store.n)
    pair = ordered_pair(i, j)
    ri, rj = store._root[pair[0]], store._root[pair[1]]
    if relation == "similar":
        if ri == rj:
            return store
        if ordered_pair(ri, rj) in store._cannot:
            raise ContradictionError(
                f"pair {pair} answered similar but closure forces dissimilar"
            )
        side_a = store._members(ri)
        side_b = store._members(rj)
        similar = set(store.similar)
        similar.update(ordered_pair(a, b) for a in side_a for b in side_b)
        dissimilar = set(store.dissimilar)
        for other_root in _cannot_partners(store._cannot, ri):
            third = store._members(other_root)
            dissimilar.update(ordered_pair(b, c) for b in side_b for c in third)
        for other_root in _cannot_partners(store._cannot, rj):
            third = store._members(other_root)
            dissimilar.update(ordered_pair(a, c) for a in side_a for c in third)
        merged = min(ri, rj)
        cannot = frozenset(
            ordered_pair(
                merged if a in (ri, rj) else a,
                merged if b in (ri, rj) else b,
            )
            for a, b in store._cannot
        )
        root = tuple(merged if r in (ri, rj) else r for r in store._root)
        return ConstraintStore(store.n, frozenset(similar), frozenset(dissimilar), root, cannot)
    if relation == "dissimilar":
        if ri == rj:
            raise ContradictionError(
                f"pair {pair} answered dissimilar but closure forces similar"
            )
        root_pair = ordered_pair(ri, rj)
        if root_pair in store._cannot:
            return store
        dissimilar = set(store.dissimilar)
        side_a = store._members(ri)
        side_b = store._members(rj)
        dissimilar.update(ordered_pair(a, b) for a in side_a for b in side_b)
        return ConstraintStore(
            store.n,
            store.similar,
            frozenset(dissimilar),
            store._root,
            store._cannot | {root_pair},
        )
    raise ValueError(f"unknown relation {relation!r}")


def _cannot_partners(cannot: frozenset[Pair], root: int) -> list[int]:
    return [b if a == root else a for a, b in cannot if root in (a, b)]


@dataclasses.dataclass(frozen=True)
class NeighborhoodState:
    """Disjoint certain groups built by the query protocol.

    Every member of a neighborhood is known similar to every other member, and
    any two neighborhoods are known mutually dissimilar.
    """

    neighborhoods: tuple[frozenset[int], ...] = ()

    def __post_init__(self) -> None:
        seen: set[int] = set()
        for group in self.neighborhoods:
            if not group:
                raise DimensionError("empty neighborhood")
            if seen & group:
                raise DimensionError("neighborhoods must be disjoint")
            seen |= group

    def __len__(self) -> int:
        return len(self.neighborhoods)

    @property
    def members(self) -> frozenset[int]:
        out: set[int] = set()
        for group in self.neighborhoods:
            out |= group
        return frozenset(out)

    def neighborhood_of(self, i: int) -> int | None:
        for idx, group in enumerate(self.neighborhoods):
            if i in group:
                return idx
        return None

    def add_member(self, idx: int, i: int) -> "NeighborhoodState":
        if not 0 <= idx < len(self.neighborhoods):
            raise DimensionError(f"no neighborhood {idx}")
        groups = list(self.neighborhoods)
        groups[idx] = groups[idx] | {i}
        return NeighborhoodState(tuple(groups))

    def add_singleton(self, i: int) -> "NeighborhoodState":
        return NeighborhoodState(self.neighborhoods + (frozenset({i}),))


def constraints_from_neighborhoods(state: NeighborhoodState, n: int) -> ConstraintStore:
    """Closed constraint store implied by a neighborhood structure."""
    store = ConstraintStore(n)
    for group in state.neighborhoods:
        members = sorted(group)
        for a, b in zip(members, members[1:]):
            store = add_constraint(store, a, b, "similar")
    anchors = [min(group) for group in state.neighborhoods]
    for idx, a in enumerate(anchors):
        for b in anchors[idx + 1:]:
            store = add_constraint(store, a, b, "dissimilar")
    return store


@dataclasses.dataclass(frozen=True)
class Dataset:
    """Instances in rows, features in columns, optional ground-truth labels."""

    points: NDArray[np.float64]
    labels: NDArray[np.int64] | None = None
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 2:
            raise DimensionError("points must be a 2-D array")
        if points.shape[0] < 2 or points.shape[1] < 1:
            raise DimensionError("need at least two instances and one feature")
        if not np.all(np.isfinite(points)):
            raise DimensionError("points must be finite")
        points = points.copy()
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (points.shape[0],):
                raise DimensionError("labels must have one entry per instance")
            if not np.issubdtype(labels.dtype, np.integer) or labels.min() < 1:
                raise DimensionError("labels must be integers starting at 1")
            labels = labels.astype(np.int64)
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)
        if self.feature_names is not None:
            names = tuple(str(s) for s in self.feature_names)
            if len(names) != points.shape[1]:
                raise DimensionError("feature_names must have one entry per column")
            object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]


@dataclasses.dataclass(frozen=True)
class MetricMatrix:
    """Positive semidefinite matrix defining a squared distance form.

    ``kind`` is "diagonal" (values is the length-p weight vector) or "full"
    (values is the symmetric p x p matrix). Eigenvalues are accepted down to
    -1e-8 to absorb round-off; diagonal weights in that band are clamped to 0.
    """

    kind: Literal["diagonal", "full"]
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise DimensionError("metric entries must be finite")
        if self.kind == "diagonal":
            if values.ndim != 1 or values.size < 1:
                raise DimensionError("diagonal metric expects a 1-D weight vector")
            if values.min(initial=0.0) < -PSD_TOL:
                raise DimensionError("diagonal metric has a negative weight")
            values = np.maximum(values, 0.0)
        elif self.kind == "full":
            if values.ndim != 2 or values.shape[0] != values.shape[1]:
                raise DimensionError("full metric expects a square matrix")
            if not np.allclose(values, values.T, atol=1e-8):
                raise DimensionError("full metric must be symmetric")
            values = (values + values.T) / 2.0
            if np.linalg.eigvalsh(values).min() < -PSD_TOL:
                raise DimensionError("full metric is not positive semidefinite")
        else:
            raise ValueError(f"unknown metric kind {self.kind!r}")
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def identity(cls, p: int) -> "MetricMatrix":
        return cls("diagonal", np.ones(p))

    @property
    def p(self) -> int:
        return self.values.shape[0]

    def matrix(self) -> NDArray[np.float64]:
        """Dense p x p form."""
        if self.kind == "diagonal":
            return np.diag(self.values)
        return self.values.copy()

    def feature_weights(self) -> NDArray[np.float64]:
        """Per-feature diagonal weight (the matrix diagonal for full metrics)."""
        if self.kind == "diagonal":
            return self.values.copy()
        return np.diag(self.values).copy()

    def eigenvalues(self) -> NDArray[np.float64]:
        """Eigenvalues in ascending order."""
        if self.kind == "diagonal":
            return np.sort(self.values)
        return np.linalg.eigvalsh(self.values)


def mahalanobis_distance(metric: MetricMatrix, x: NDArray, y: NDArray) -> float:
    """Distance sqrt((x - y)' A (x - y)) under the metric's matrix A.

    The quadratic form is clamped at zero before the square root so round-off
    on a boundary-PSD matrix cannot produce NaN.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.shape[0] != metric.p:
        raise DimensionError("points must be 1-D and match the metric dimension")
    d = x - y
    if metric.kind == "diagonal":
        q = float(np.dot(d * d, metric.values))
    else:
        q = float(d @ metric.values @ d)
    return float(np.sqrt(max(q, 0.0)))


def squared_distances(metric: MetricMatrix, x: NDArray, centers: NDArray) -> NDArray[np.float64]:
    """Squared metric distances from rows of x to rows of centers, (n, k)."""
    x = np.asarray(x, dtype=np.float64)
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    diff = x[:, None, :] - centers[None, :, :]
    if metric.kind == "diagonal":
        out = np.einsum("nkp,p->nk", diff * diff, metric.values)
    else:
        out = np.einsum("nkp,pq,nkq->nk", diff, metric.values, diff)
    return np.maximum(out, 0.0)


@dataclasses.dataclass(frozen=True)
class ClusterAssignment:
    """Hard clustering: labels in {1..n_clusters} plus the cluster centers."""

    labels: NDArray[np.int64]
    centers: NDArray[np.float64]
    n_clusters: int

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if not np.issubdtype(labels.dtype, np.integer):
            raise DimensionError("cluster labels must be integers")
        if self.n_clusters < 1:
            raise DimensionError("need at least one cluster")
        if labels.ndim != 1:
            raise DimensionError("labels must be 1-D")
        if labels.size and (labels.min() < 1 or labels.max() > self.n_clusters):
            raise DimensionError("labels must lie in {1..n_clusters}")
        centers = np.asarray(self.centers, dtype=np.float64)
        if centers.ndim != 2 or centers.shape[0] != self.n_clusters:
            raise DimensionError("centers must be (n_clusters, p)")
        labels = labels.astype(np.int64)
        labels.setflags(write=False)
        centers = centers.copy()
        centers.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "centers", centers)

    def cluster_sizes(self) -> NDArray[np.int64]:
        return np.bincount(self.labels, minlength=self.n_clusters + 1)[1:]


def pairs_from_labels(labels: Iterable[int]) -> tuple[frozenset[Pair], frozenset[Pair]]:
    """Exhaustive (similar, dissimilar) pair sets implied by hard labels."""
    arr = list(labels)
    similar: set[Pair] = set()
    dissimilar: set[Pair] = set()
    for i in range(len(arr)):
        for j in range(i + 1, len(arr)):
            (similar if arr[i] == arr[j] else dissimilar).add((i, j))
    return frozenset(similar), frozenset(dissimilar)
