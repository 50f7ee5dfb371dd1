"""Query-target selection and the neighborhood resolution protocol.

A resolution settles where one instance belongs by asking the oracle about
a representative of each existing neighborhood, most probable first, until
a similar answer lands it or every answer was dissimilar and it founds a
new neighborhood.  Membership probabilities come from forest vote
fractions trained on the current constrained clustering, and the entropy
criterion ranks candidate instances by how much pair uncertainty their
resolution is expected to remove.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray

from .clustering import PckmeansConfig, pckmeans
from .core import (
    ConstraintStore,
    Dataset,
    MetricMatrix,
    NeighborhoodState,
    add_constraint,
    constraints_from_neighborhoods,
    squared_distances,
)
from .errors import BudgetExhausted, DimensionError, NoCandidates, SingleNeighborhood
from .forest import ForestConfig, fit_forest
from .metric_learning import MetricHistory

STRATEGIES = ("mee", "npu", "random", "two-step")

_ENTROPY_GUARD = 1e-12


@dataclass(frozen=True)
class MembershipProbabilities:
    """Row-stochastic instance-by-neighborhood probability matrix."""

    probs: NDArray[np.float64]

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[1] < 1:
            raise DimensionError("probability matrix must be n x L with L >= 1")
        if probs.min(initial=0.0) < -1e-9 or np.abs(probs.sum(axis=1) - 1.0).max() > 1e-6:
            raise DimensionError("probability rows must lie on the simplex")
        probs = probs.copy()
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n_instances(self) -> int:
        return self.probs.shape[0]

    @property
    def n_neighborhoods(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True)
class QuerySession:
    """Everything one active labelling run owns.

    The store always contains at least the constraints implied by the
    neighborhoods; during an aborted resolution it additionally holds the
    dissimilar answers gathered before the budget ran out.
    """

    data: Dataset
    budget: int
    strategy: str
    neighborhoods: NeighborhoodState
    store: ConstraintStore
    spent: int = 0
    history: tuple[tuple[tuple[int, int], str], ...] = ()
    metric_history: MetricHistory = MetricHistory()

    def __post_init__(self) -> None:
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if not 0 <= self.spent <= self.budget:
            raise ValueError("spent queries must lie within the budget")
        if len(self.history) != self.spent:
            raise ValueError("history must hold one record per spent query")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.store.n != self.data.n:
            raise DimensionError("constraint store sized for a different dataset")

    def current_metric(self) -> MetricMatrix:
        if len(self.metric_history):
            return self.metric_history.metrics[-1]
        return MetricMatrix.identity(self.data.p)


def _binary_entropy(p):
    p = np.clip(np.asarray(p, dtype=np.float64), 0.0, 1.0)
    out = np.zeros_like(p)
    mid = (p > _ENTROPY_GUARD) & (1.0 - p > _ENTROPY_GUARD)
    q = p[mid]
    out[mid] = -(q * np.log(q) + (1.0 - q) * np.log1p(-q))
    return out


def _pair_array(n: int, pairs) -> NDArray[np.intp]:
    canon = sorted((a, b) if a < b else (b, a) for a, b in pairs)
    arr = np.array(canon, dtype=np.intp).reshape(-1, 2)
    if arr.size:
        if arr.min() < 0 or arr.max() >= n:
            raise DimensionError("pair index out of range")
        if np.any(arr[:, 0] == arr[:, 1]):
            raise DimensionError("a pair cannot join an instance with itself")
    return arr


def fit_membership_model(
    data: Dataset,
    state: NeighborhoodState,
    metric: MetricMatrix,
    cfg: ForestConfig | None = None,
    seed: int = 0,
) -> MembershipProbabilities:
    """Estimate neighborhood membership for every instance.

    The forest trains on a constrained clustering under the given metric
    with one cluster per neighborhood; clusters are mapped back to
    neighborhoods by majority over the neighborhood members they absorbed.
    Clusters that absorbed none contribute no mass, and rows of known
    members are forced one-hot regardless of the votes.
    """
    if len(state) < 1:
        raise DimensionError("need at least one neighborhood")
    n = data.n
    if len(state) == 1:
        warnings.warn(
            "single neighborhood: membership is certain", SingleNeighborhood
        )
        return MembershipProbabilities(np.ones((n, 1)))
    groups = len(state)
    assign = pckmeans(
        data,
        metric,
        constraints_from_neighborhoods(state, n),
        PckmeansConfig(n_clusters=groups),
        seed,
    )
    forest = fit_forest(data.points, assign.labels, cfg, seed)
    votes = forest.vote_fractions(data.points)
    home = {i: m for m, group in enumerate(state.neighborhoods) for i in group}
    probs = np.zeros((n, groups))
    for col, label in enumerate(forest.classes):
        inside = [home[i] for i in np.flatnonzero(assign.labels == label) if i in home]
        if inside:
            probs[:, int(np.argmax(np.bincount(inside, minlength=groups)))] += votes[:, col]
    mass = probs.sum(axis=1)
    hollow = mass <= 1e-12
    probs[hollow] = 1.0 / groups
    probs[~hollow] /= mass[~hollow, None]
    for i, m in home.items():
        probs[i] = 0.0
        probs[i, m] = 1.0
    return MembershipProbabilities(probs)


def pair_probability(probs: MembershipProbabilities, i: int, j: int) -> float:
    """Probability that instances i and j share a neighborhood."""
    r = probs.probs
    if not (0 <= i < r.shape[0] and 0 <= j < r.shape[0]):
        raise DimensionError(f"pair ({i}, {j}) out of range")
    return float(r[i] @ r[j])


def total_pair_entropy(probs: MembershipProbabilities, unlabeled) -> float:
    """Summed binary entropy of co-membership over the unlabeled pairs."""
    arr = _pair_array(probs.n_instances, unlabeled)
    if arr.size == 0:
        return 0.0
    r = probs.probs
    shared = np.einsum("ul,ul->u", r[arr[:, 0]], r[arr[:, 1]])
    return float(_binary_entropy(shared).sum())


def _out_of_neighborhood(n: int, state: NeighborhoodState) -> list[int]:
    taken = state.members
    out = [i for i in range(n) if i not in taken]
    if not out:
        raise NoCandidates("every instance already belongs to a neighborhood")
    return out


def _mee_scores(
    probs: MembershipProbabilities, unlabeled, candidates
) -> NDArray[np.float64]:
    # For the hypothesis that instance i lands in neighborhood m, only
    # pairs touching i change, and their co-membership probability becomes
    # the partner's own column-m entry.  Each candidate score therefore
    # adjusts the current total entropy instead of rebuilding it, keeping
    # the scan quadratic rather than cubic in n.
    r = probs.probs
    n = r.shape[0]
    arr = _pair_array(n, unlabeled)
    touching: list[list[int]] = [[] for _ in range(n)]
    base = 0.0
    if arr.size:
        shared = np.einsum("ul,ul->u", r[arr[:, 0]], r[arr[:, 1]])
        base = float(_binary_entropy(shared).sum())
        for (a, b) in arr:
            touching[a].append(int(b))
            touching[b].append(int(a))
    column_entropy = _binary_entropy(r)
    scores = np.empty(len(candidates))
    for spot, i in enumerate(candidates):
        partners = np.array(touching[i], dtype=np.intp)
        if partners.size:
            current = float(_binary_entropy(r[partners] @ r[i]).sum())
            expected = float(r[i] @ column_entropy[partners].sum(axis=0))
        else:
            current = expected = 0.0
        scores[spot] = base - current + expected
    return scores


def mee_select(
    probs: MembershipProbabilities, unlabeled, state: NeighborhoodState
) -> int:
    """Instance whose resolution minimizes expected remaining pair entropy."""
    candidates = _out_of_neighborhood(probs.n_instances, state)
    scores = _mee_scores(probs, unlabeled, candidates)
    return candidates[int(np.argmin(scores))]


def npu_select(probs: MembershipProbabilities, state: NeighborhoodState) -> int:
    """Most uncertain instance per unit of expected querying effort.

    Effort is the expected number of representatives asked when probing
    neighborhoods in descending probability order.
    """
    r = probs.probs
    candidates = _out_of_neighborhood(r.shape[0], state)
    clipped = np.clip(r, 0.0, 1.0)
    safe = np.where(clipped > _ENTROPY_GUARD, clipped, 1.0)
    uncertainty = -(clipped * np.log(safe)).sum(axis=1)
    descending = np.sort(clipped, axis=1)[:, ::-1]
    effort = descending @ np.arange(1, r.shape[1] + 1, dtype=np.float64)
    best_score = -np.inf
    best = candidates[0]
    for i in candidates:
        score = uncertainty[i] / effort[i]
        if score > best_score:
            best_score = score
            best = i
    return best


def two_step_plan(
    data: Dataset, n_clusters: int, n_pairs: int, cfg: ForestConfig | None = None, seed: int = 0
) -> tuple[tuple[int, int], ...]:
    """Non-adaptive plan: the pairs with co-membership odds nearest a coin flip.

    Memberships come from a single unconstrained k-means run, so the whole
    plan is fixed before any oracle answer arrives.
    """
    n = data.n
    if not 0 <= n_pairs <= n * (n - 1) // 2:
        raise ValueError("n_pairs must fit in the number of distinct pairs")
    if n_pairs == 0:
        return ()
    assign = pckmeans(
        data,
        MetricMatrix.identity(data.p),
        ConstraintStore(n),
        PckmeansConfig(n_clusters=n_clusters, init="random"),
        seed,
    )
    forest = fit_forest(data.points, assign.labels, cfg, seed)
    votes = forest.vote_fractions(data.points)
    first, second = np.triu_indices(n, 1)
    shared = np.einsum("ul,ul->u", votes[first], votes[second])
    order = np.lexsort((second, first, np.abs(shared - 0.5)))
    picked = order[:n_pairs]
    return tuple((int(first[t]), int(second[t])) for t in picked)


def _medoid(points: NDArray[np.float64], group, metric: MetricMatrix) -> int:
    members = sorted(group)
    if len(members) == 1:
        return members[0]
    spot = points[members]
    costs = np.sqrt(squared_distances(metric, spot, spot)).sum(axis=1)
    return members[int(np.argmin(costs))]


def resolve_instance(
    session: QuerySession, target: int, probs: MembershipProbabilities, oracle
) -> tuple[QuerySession, int]:
    """Settle the target's neighborhood through oracle queries.

    Probes neighborhoods in descending membership probability, asking the
    oracle about the target and each neighborhood's medoid under the
    session's current metric.  A similar answer ends the probe; a full
    sweep of dissimilar answers founds a new singleton neighborhood.
    Raises BudgetExhausted mid-probe with the partial session attached to
    the exception, so recorded dissimilar answers survive.
    """
    state = session.neighborhoods
    n = session.data.n
    if not 0 <= target < n:
        raise DimensionError(f"target {target} out of range")
    if state.neighborhood_of(target) is not None:
        raise ValueError(f"instance {target} already belongs to a neighborhood")
    if probs.probs.shape != (n, len(state)):
        raise DimensionError("probability matrix does not match the session")
    metric = session.current_metric()
    order = np.argsort(-probs.probs[target], kind="stable")
    store = session.store
    history = session.history
    spent = session.spent
    for m in order:
        if spent >= session.budget:
            partial = replace(session, store=store, history=history, spent=spent)
            exc = BudgetExhausted(
                f"budget {session.budget} exhausted while resolving instance {target}"
            )
            exc.session = partial
            exc.queries_spent = spent - session.spent
            raise exc
        rep = _medoid(session.data.points, state.neighborhoods[m], metric)
        pair = (target, rep) if target < rep else (rep, target)
        answer = oracle(pair)
        if answer not in ("similar", "dissimilar"):
            raise ValueError(f"oracle returned {answer!r}")
        store = add_constraint(store, target, rep, answer)
        history = history + ((pair, answer),)
        spent += 1
        if answer == "similar":
            settled = replace(
                session,
                neighborhoods=state.add_member(int(m), target),
                store=store,
                history=history,
                spent=spent,
            )
            return settled, spent - session.spent
    settled = replace(
        session,
        neighborhoods=state.add_singleton(target),
        store=store,
        history=history,
        spent=spent,
    )
    return settled, spent - session.spent
