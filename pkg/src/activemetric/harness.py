"""Whole clustering sessions, from first query to final assignment.

The session alternates between resolving one instance's neighborhood through
oracle queries and refitting the metric on the constraints gathered so far.
When the budget runs out the per-loop metrics are aggregated into a penalty
on consistently uninformative features, the penalty strength is tuned, and
the data is clustered once more under the aggregated metric.

``ActiveSession`` exposes the loop one answer at a time so an interactive
caller (the HTTP service) can drive it; ``run_session`` drives it to
completion with an oracle callback.  Both paths execute the probe protocol
through ``resolve_instance``, replaying buffered answers, so their tie rules
cannot drift apart.
"""

from __future__ import annotations

import dataclasses
import time
import warnings
from collections.abc import Callable, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .active_query import (
    STRATEGIES,
    MembershipProbabilities,
    QuerySession,
    _medoid,
    fit_membership_model,
    mee_select,
    npu_select,
    resolve_instance,
    two_step_plan,
)
from .augmentation import (
    AdmmConfig,
    AugmentedConstraints,
    augment_constraints,
    fit_fuzzy_membership,
    tune_lambda,
)
from .clustering import PckmeansConfig, adjusted_rand_index, pckmeans
from .core import (
    ClusterAssignment,
    ConstraintStore,
    Dataset,
    MetricMatrix,
    NeighborhoodState,
    add_constraint,
)
from .datagen import GENERATORS, SimSetting
from .errors import (
    BudgetExhausted,
    DegenerateProblem,
    EmptyHistory,
    InsufficientConstraints,
    NoCandidates,
    SingleNeighborhood,
)
from .forest import ForestConfig
from .io import ResultRecord, load_csv, save_results
from .metric_learning import (
    MetricProblem,
    SolverSettings,
    aggregate_penalty_set,
    learn_metric_diagonal,
    learn_metric_full,
    select_q,
    tune_gamma,
)

Pair = tuple[int, int]


# Seed-stream codes: every random draw is keyed by (code, loop) under the
# session seed, so stepwise and callback-driven runs land on identical draws.
_INIT, _MODEL, _FUZZY, _SOLVE, _TARGET, _PLAN = 0, 1, 2, 3, 4, 5
_TUNE, _FINAL, _CLUSTER, _TRACK = 6, 7, 8, 9
_DATA_REP, _SESSION_REP = 100, 101


def _derive(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything one session or benchmark cell needs.

    ``push_weight`` of None cross-validates the membership push each loop;
    ``n_penalized`` of None estimates the penalized-feature count from the
    averaged spectrum.  A single-entry ``penalty_grid`` fixes the penalty
    strength without tuning.
    """

    n_clusters: int
    budget: int
    strategy: str = "mee"
    setting: SimSetting | None = None
    dataset: str | None = None
    augment: bool = True
    push_weight: float | None = 0.5
    push_grid: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    penalty_grid: tuple[float, ...] = (0.0, 0.01, 0.1, 1.0)
    n_penalized: int | None = None
    metric_kind: str = "diagonal"
    admm: AdmmConfig | None = None
    solver: SolverSettings | None = None
    forest: ForestConfig | None = None
    seed: int = 0
    reps: int = 1

    def __post_init__(self) -> None:
        if self.n_clusters < 2:
            raise ValueError("need at least two clusters")
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.metric_kind not in ("diagonal", "full"):
            raise ValueError(f"unknown metric kind {self.metric_kind!r}")
        if self.push_weight is None and not self.push_grid:
            raise ValueError("auto push weight needs a nonempty push_grid")
        if not self.penalty_grid:
            raise ValueError("penalty_grid must not be empty")
        if self.n_penalized is not None and self.n_penalized < 1:
            raise ValueError("n_penalized must be positive")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        object.__setattr__(self, "push_grid", tuple(float(g) for g in self.push_grid))
        object.__setattr__(self, "penalty_grid",
                           tuple(float(g) for g in self.penalty_grid))


_SUB_CONFIGS = {"setting": SimSetting, "admm": AdmmConfig,
                "solver": SolverSettings, "forest": ForestConfig}


def config_to_dict(cfg: RunConfig) -> dict[str, Any]:
    """Plain serializable mirror of a RunConfig."""
    out: dict[str, Any] = {}
    for field in dataclasses.fields(RunConfig):
        value = getattr(cfg, field.name)
        if field.name in _SUB_CONFIGS and value is not None:
            value = dataclasses.asdict(value)
        elif isinstance(value, tuple):
            value = list(value)
        out[field.name] = value
    return out


def config_from_dict(raw: Mapping[str, Any]) -> RunConfig:
    """Build a RunConfig from parsed structured text, rejecting unknown keys."""
    known = {field.name for field in dataclasses.fields(RunConfig)}
    extra = set(raw) - known
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key in _SUB_CONFIGS and value is not None:
            if not isinstance(value, Mapping):
                raise ValueError(f"{key} must be a mapping")
            value = _SUB_CONFIGS[key](**value)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return RunConfig(**kwargs)


def config_dataset(cfg: RunConfig) -> Dataset:
    """Materialize the dataset a config points at."""
    if (cfg.setting is None) == (cfg.dataset is None):
        raise ValueError("config needs exactly one of setting and dataset")
    if cfg.setting is not None:
        return GENERATORS[cfg.setting.name](cfg.setting)
    return load_csv(cfg.dataset)


def label_oracle(labels: NDArray[np.int64]) -> Callable[[Pair], str]:
    """Automated oracle answering from ground-truth labels."""
    if labels is None:
        raise ValueError("automated oracle needs ground-truth labels")

    def oracle(pair: Pair) -> str:
        i, j = pair
        return "similar" if labels[i] == labels[j] else "dissimilar"

    return oracle


@dataclasses.dataclass(frozen=True)
class QueryView:
    """The question currently posed to the oracle."""

    pair: Pair
    target: int
    neighborhood: int | None
    spent: int
    budget: int
    loops: int
    n_neighborhoods: int


@dataclasses.dataclass(frozen=True)
class AnswerOutcome:
    """What one accepted answer did to the session."""

    accepted: bool
    implied: int
    new_neighborhood: int | None
    loop_completed: bool


@dataclasses.dataclass(frozen=True)
class TrajectoryStep:
    """State snapshot after one completed loop."""

    loop: int
    queries_spent: int
    n_similar: int
    n_dissimilar: int
    n_neighborhoods: int
    ari: float | None
    eig_low: float
    eig_high: float
    eig_top_share: float


@dataclasses.dataclass(frozen=True)
class RunTrajectory:
    """Everything a finished session produced."""

    budget: int
    steps: tuple[TrajectoryStep, ...]
    assignment: ClusterAssignment
    metric: MetricMatrix
    penalty_features: frozenset[int]
    feature_weights: NDArray[np.float64]
    gamma: float
    n_penalized: int
    queries_spent: int
    answers: tuple[tuple[Pair, str], ...]

    def __post_init__(self) -> None:
        spent = [step.queries_spent for step in self.steps]
        if any(b < a for a, b in zip(spent, spent[1:])):
            raise ValueError("queries_spent must be non-decreasing")
        if self.queries_spent > self.budget:
            raise ValueError("spent queries exceed the budget")
        if len(self.answers) != self.queries_spent:
            raise ValueError("answer log must hold one entry per query")


class _NeedAnswer(Exception):
    def __init__(self, pair: Pair) -> None:
        super().__init__(f"awaiting answer for {pair}")
        self.pair = pair


class ActiveSession:
    """One stepwise run: poses queries, absorbs answers, finalizes.

    A single logical owner mutates the session.  Answers inside an ongoing
    resolution are buffered and replayed through the probe protocol, so a
    contradictory answer is rejected with the committed state untouched.
    """

    def __init__(self, data: Dataset, cfg: RunConfig, seed: int | None = None):
        if cfg.n_clusters > data.n:
            raise ValueError("more clusters than instances")
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else seed
        first_rng = np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=(_INIT,)))
        first = int(first_rng.integers(data.n))
        self.qs = QuerySession(
            data=data,
            budget=cfg.budget,
            strategy=cfg.strategy,
            neighborhoods=NeighborhoodState((frozenset({first}),)),
            store=ConstraintStore(data.n),
        )
        self.steps: list[TrajectoryStep] = []
        self.exhausted = False
        self.done = False
        self._warm: NDArray | None = None
        self._last_aug: AugmentedConstraints | None = None
        self._pending: tuple[int, MembershipProbabilities, list[str]] | None = None
        self._planned: Pair | None = None
        self._plan: tuple[Pair, ...] | None = None
        self._plan_pos = 0
        self._final: RunTrajectory | None = None

    # -- inspection ------------------------------------------------------

    @property
    def data(self) -> Dataset:
        return self.qs.data

    @property
    def loops(self) -> int:
        return len(self.qs.metric_history)

    @property
    def finalized(self) -> bool:
        return self._final is not None

    def metric_now(self) -> MetricMatrix:
        return self.qs.current_metric()

    def effective_store(self) -> ConstraintStore:
        """Committed constraints plus any buffered in-resolution answers."""
        store = self.qs.store
        for pair, relation in self._buffered_log():
            store = add_constraint(store, pair[0], pair[1], relation)
        return store

    def effective_spent(self) -> int:
        return self.qs.spent + len(self._pending[2] if self._pending else ())

    def answer_log(self) -> tuple[tuple[Pair, str], ...]:
        return self.qs.history + tuple(self._buffered_log())

    def _buffered_log(self) -> list[tuple[Pair, str]]:
        if self._pending is None:
            return []
        target, probs, buffer = self._pending
        order = np.argsort(-probs.probs[target], kind="stable")
        metric = self.metric_now()
        out = []
        for slot, relation in enumerate(buffer):
            group = self.qs.neighborhoods.neighborhoods[int(order[slot])]
            rep = _medoid(self.data.points, group, metric)
            pair = (target, rep) if target < rep else (rep, target)
            out.append((pair, relation))
        return out

    # -- query/answer ----------------------------------------------------

    def next_query(self) -> QueryView:
        """The question to ask next; starts a new resolution when idle."""
        self._ensure_open()
        if self.cfg.strategy == "two-step":
            pair = self._planned_pair()
            target, probed = pair[0], None
        else:
            pair, probed = self._probe_point()
            target = self._pending[0]
        return QueryView(
            pair=pair,
            target=target,
            neighborhood=probed,
            spent=self.effective_spent(),
            budget=self.cfg.budget,
            loops=self.loops,
            n_neighborhoods=len(self.qs.neighborhoods),
        )

    def answer(self, pair: Pair, relation: str) -> AnswerOutcome:
        """Record one oracle answer for the currently posed pair."""
        if relation not in ("similar", "dissimilar"):
            raise ValueError(f"unknown relation {relation!r}")
        posed = self.next_query()
        if tuple(sorted(pair)) != posed.pair:
            raise ValueError(f"expected an answer for pair {posed.pair}, got {tuple(pair)}")
        if self.cfg.strategy == "two-step":
            return self._answer_planned(posed.pair, relation)
        return self._answer_probe(relation)

    def _ensure_open(self) -> None:
        if self._final is not None or self.exhausted or self.qs.spent >= self.cfg.budget:
            raise BudgetExhausted("the query budget is spent")
        if self.done:
            raise NoCandidates("every instance already has a neighborhood")

    def _planned_pair(self) -> Pair:
        if self._plan is None:
            n_pairs = min(self.cfg.budget, self.data.n * (self.data.n - 1) // 2)
            self._plan = two_step_plan(
                self.data, self.cfg.n_clusters, n_pairs, self.cfg.forest,
                seed=_derive(self.seed, _PLAN))
        if self._plan_pos >= len(self._plan):
            self.done = True
            raise NoCandidates("the non-adaptive plan is exhausted")
        self._planned = self._plan[self._plan_pos]
        return self._planned

    def _answer_planned(self, pair: Pair, relation: str) -> AnswerOutcome:
        store = add_constraint(self.qs.store, pair[0], pair[1], relation)
        self.qs = dataclasses.replace(
            self.qs,
            store=store,
            history=self.qs.history + ((pair, relation),),
            spent=self.qs.spent + 1,
        )
        self._plan_pos += 1
        self._planned = None
        self._metric_update()
        if self.qs.spent >= self.cfg.budget:
            self.exhausted = True
        return AnswerOutcome(accepted=True, implied=0, new_neighborhood=None,
                             loop_completed=True)

    def _probe_point(self) -> tuple[Pair, int]:
        if self._pending is None:
            self._start_resolution()
        state = self._replay()
        if state[0] != "need":
            raise RuntimeError("resolution advanced without an answer")
        return state[1], state[2]

    def _start_resolution(self) -> None:
        t = self.loops
        data, qs = self.data, self.qs
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SingleNeighborhood)
            probs = fit_membership_model(
                data, qs.neighborhoods, self.metric_now(), self.cfg.forest,
                seed=_derive(self.seed, _MODEL, t))
        strategy = self.cfg.strategy
        if strategy == "random":
            candidates = [i for i in range(data.n)
                          if qs.neighborhoods.neighborhood_of(i) is None]
            if not candidates:
                self.done = True
                raise NoCandidates("every instance already has a neighborhood")
            rng = np.random.default_rng(
                np.random.SeedSequence(self.seed, spawn_key=(_TARGET, t)))
            target = candidates[int(rng.integers(len(candidates)))]
        else:
            select = mee_select if strategy == "mee" else npu_select
            try:
                if strategy == "mee":
                    target = select(probs, self._unlabeled_pairs(), qs.neighborhoods)
                else:
                    target = select(probs, qs.neighborhoods)
            except NoCandidates:
                self.done = True
                raise
        self._pending = (target, probs, [])

    def _unlabeled_pairs(self) -> NDArray[np.intp]:
        n = self.data.n
        resolved = np.zeros(n, dtype=bool)
        resolved[sorted(self.qs.neighborhoods.members)] = True
        iu, ju = np.triu_indices(n, 1)
        keep = ~(resolved[iu] & resolved[ju])
        return np.stack([iu[keep], ju[keep]], axis=1)

    def _replay(self):
        target, probs, buffer = self._pending
        consumed = 0

        def oracle(pair: Pair) -> str:
            nonlocal consumed
            if consumed < len(buffer):
                consumed += 1
                return buffer[consumed - 1]
            raise _NeedAnswer(pair)

        try:
            settled, used = resolve_instance(self.qs, target, probs, oracle)
        except _NeedAnswer as need:
            order = np.argsort(-probs.probs[target], kind="stable")
            return ("need", need.pair, int(order[consumed]))
        return ("done", settled, used)

    def _answer_probe(self, relation: str) -> AnswerOutcome:
        target, probs, buffer = self._pending
        before = self.qs.neighborhoods
        order = np.argsort(-probs.probs[target], kind="stable")
        probed = int(order[len(buffer)])
        probed_size = len(before.neighborhoods[probed])
        buffer.append(relation)
        try:
            state = self._replay()
        except BudgetExhausted as exc:
            # Partial resolution: keep its constraints, drop the target.
            self.qs = exc.session
            self.exhausted = True
            self._pending = None
            return AnswerOutcome(accepted=True, implied=probed_size - 1,
                                 new_neighborhood=None, loop_completed=False)
        except Exception:
            buffer.pop()
            raise
        if state[0] == "need":
            return AnswerOutcome(accepted=True, implied=probed_size - 1,
                                 new_neighborhood=None, loop_completed=False)
        _, settled, _ = state
        joined = settled.neighborhoods.neighborhood_of(target)
        founded = len(settled.neighborhoods) > len(before)
        if relation == "similar":
            unprobed = [m for m in range(len(before)) if m not in
                        set(int(x) for x in order[:len(buffer)])]
            implied = probed_size - 1 + sum(
                len(before.neighborhoods[m]) for m in unprobed)
        else:
            implied = probed_size - 1
        self.qs = settled
        self._pending = None
        self._metric_update()
        if self.qs.spent >= self.cfg.budget:
            self.exhausted = True
        return AnswerOutcome(
            accepted=True,
            implied=implied,
            new_neighborhood=joined if founded else None,
            loop_completed=True,
        )

    # -- per-loop metric update -----------------------------------------

    def _push_weight(self, t: int) -> float:
        if self.cfg.push_weight is not None:
            return self.cfg.push_weight
        base = self.cfg.admm or AdmmConfig()
        try:
            return tune_lambda(self.data, self.qs.store, self.cfg.n_clusters,
                               self.cfg.push_grid, base,
                               seed=_derive(self.seed, _FUZZY, t, 1))
        except InsufficientConstraints:
            return AdmmConfig().penalty_weight

    def _metric_update(self) -> None:
        t = self.loops
        data, store = self.data, self.qs.store
        admm = self.cfg.admm or AdmmConfig()
        admm = dataclasses.replace(admm, penalty_weight=self._push_weight(t))
        fit = fit_fuzzy_membership(
            data, store, self.cfg.n_clusters, admm,
            seed=_derive(self.seed, _FUZZY, t), warm_start=self._warm)
        self._warm = fit.probs
        aug = augment_constraints(fit) if self.cfg.augment else None
        self._last_aug = aug
        metric = self._solve(store, aug, gamma=0.0, penalty=frozenset(),
                             seed=_derive(self.seed, _SOLVE, t))
        self.qs = dataclasses.replace(
            self.qs, metric_history=self.qs.metric_history.append(metric))
        self.steps.append(self._record_step())

    def _solve(self, store: ConstraintStore, aug: AugmentedConstraints | None,
               gamma: float, penalty: frozenset[int], seed: int) -> MetricMatrix:
        problem = MetricProblem(
            data=self.data, similar=store.similar, dissimilar=store.dissimilar,
            aug=aug, gamma=gamma, penalty_set=penalty, kind=self.cfg.metric_kind)
        solver = (learn_metric_diagonal if self.cfg.metric_kind == "diagonal"
                  else learn_metric_full)
        try:
            return solver(problem, self.cfg.solver, seed=seed)
        except DegenerateProblem:
            # Nothing separates yet; carry the current metric forward.
            return self.metric_now()

    def _record_step(self) -> TrajectoryStep:
        metric = self.qs.metric_history.metrics[-1]
        eig = metric.eigenvalues()
        total = float(eig.sum())
        ari = None
        if self.data.labels is not None:
            assignment = self.cluster_now(seed=_derive(self.seed, _TRACK, self.loops - 1))
            ari = adjusted_rand_index(assignment.labels, self.data.labels)
        return TrajectoryStep(
            loop=self.loops,
            queries_spent=self.qs.spent,
            n_similar=len(self.qs.store.similar),
            n_dissimilar=len(self.qs.store.dissimilar),
            n_neighborhoods=len(self.qs.neighborhoods),
            ari=ari,
            eig_low=float(eig[0]),
            eig_high=float(eig[-1]),
            eig_top_share=float(eig[-1]) / total if total > 0 else 0.0,
        )

    def cluster_now(self, seed: int | None = None) -> ClusterAssignment:
        """Cluster under the current metric and committed constraints."""
        if self._final is not None:
            return self._final.assignment
        if seed is None:
            seed = _derive(self.seed, _TRACK, max(self.loops - 1, 0))
        return pckmeans(self.data, self.metric_now(), self.qs.store,
                        PckmeansConfig(n_clusters=self.cfg.n_clusters), seed=seed)

    # -- aggregation and final clustering --------------------------------

    def finalize(self) -> RunTrajectory:
        """Aggregate the metric history, tune the penalty, cluster."""
        if self._final is not None:
            return self._final
        history = self.qs.metric_history
        if not len(history):
            raise EmptyHistory("no completed loops to aggregate")
        cfg, data, store = self.cfg, self.data, self.qs.store
        q = cfg.n_penalized if cfg.n_penalized is not None else select_q(history)
        q = min(q, data.p - 1) if data.p > 1 else 1
        penalty = aggregate_penalty_set(history, q)
        if len(cfg.penalty_grid) == 1:
            gamma = cfg.penalty_grid[0]
        else:
            gamma = tune_gamma(
                data, store, self._last_aug, history, cfg.penalty_grid,
                cfg.n_clusters, kind=cfg.metric_kind, opt=cfg.solver, q=q,
                seed=_derive(self.seed, _TUNE))
        metric = self._solve(store, self._last_aug, gamma=gamma, penalty=penalty,
                             seed=_derive(self.seed, _FINAL))
        assignment = pckmeans(data, metric, store,
                              PckmeansConfig(n_clusters=cfg.n_clusters),
                              seed=_derive(self.seed, _CLUSTER))
        self._final = RunTrajectory(
            budget=cfg.budget,
            steps=tuple(self.steps),
            assignment=assignment,
            metric=metric,
            penalty_features=penalty,
            feature_weights=metric.feature_weights(),
            gamma=gamma,
            n_penalized=q,
            queries_spent=self.qs.spent,
            answers=self.qs.history,
        )
        return self._final


def drive_session(session: ActiveSession, oracle: Callable[[Pair], str]) -> RunTrajectory:
    """Feed oracle answers until the budget or the candidates run out."""
    while True:
        try:
            view = session.next_query()
        except (BudgetExhausted, NoCandidates):
            break
        session.answer(view.pair, oracle(view.pair))
    return session.finalize()


def run_session(cfg: RunConfig, oracle: Callable[[Pair], str]) -> RunTrajectory:
    """One full run on the dataset the config names."""
    data = config_dataset(cfg)
    return drive_session(ActiveSession(data, cfg), oracle)


@dataclasses.dataclass(frozen=True)
class CellStats:
    """ARI summary of one (setting, strategy, n_queries) cell."""

    mean: float
    std: float
    n: int


@dataclasses.dataclass(frozen=True)
class ExperimentResult:
    records: tuple[ResultRecord, ...]
    cells: dict[tuple[str, str, int], CellStats]
    failures: tuple[str, ...]


def _rep_dataset(cfg: RunConfig, rep: int) -> tuple[str, Dataset]:
    if cfg.setting is not None:
        fresh = dataclasses.replace(
            cfg.setting, seed=_derive(cfg.setting.seed, _DATA_REP, rep))
        return cfg.setting.name, GENERATORS[fresh.name](fresh)
    return Path(cfg.dataset).stem, load_csv(cfg.dataset)


def run_experiment(grid: Sequence[RunConfig], path: str | None = None,
                   timings: bool = False) -> ExperimentResult:
    """Replicate every config in the grid and summarize per cell.

    Reps use derived seeds; the data seed depends only on the setting and
    the rep index, so strategy variants see identical datasets.  A failed
    rep is recorded with ARI NaN and the run continues.
    """
    if not grid:
        raise ValueError("experiment grid is empty")
    records: list[ResultRecord] = []
    failures: list[str] = []
    by_cell: dict[tuple[str, str, int], list[float]] = {}
    for cfg in grid:
        for rep in range(cfg.reps):
            label, data = _rep_dataset(cfg, rep)
            if data.labels is None:
                raise ValueError("benchmarks need ground-truth labels")
            session_seed = _derive(cfg.seed, _SESSION_REP, rep)
            cell = (label, cfg.strategy, cfg.budget)
            started = time.perf_counter()
            try:
                trajectory = drive_session(
                    ActiveSession(data, cfg, seed=session_seed),
                    label_oracle(data.labels))
                ari = adjusted_rand_index(trajectory.assignment.labels, data.labels)
            except Exception as exc:
                failures.append(f"{label}/{cfg.strategy}/{cfg.budget} rep {rep}: {exc}")
                ari = float("nan")
            elapsed = time.perf_counter() - started
            records.append(ResultRecord(
                setting=label, strategy=cfg.strategy, n_queries=cfg.budget,
                rep=rep, seed=session_seed, ari=float(ari),
                runtime_seconds=elapsed if timings else None))
            by_cell.setdefault(cell, []).append(float(ari))
    cells = {}
    for cell, values in by_cell.items():
        good = [v for v in values if not np.isnan(v)]
        if good:
            cells[cell] = CellStats(mean=float(np.mean(good)),
                                    std=float(np.std(good)), n=len(good))
        else:
            cells[cell] = CellStats(mean=float("nan"), std=float("nan"), n=0)
    if path is not None:
        save_results(path, records,
                     config={"grid": [config_to_dict(cfg) for cfg in grid]})
    return ExperimentResult(tuple(records), cells, tuple(failures))
