import itertools

import numpy as np
import pytest

from activemetric.active_query import (
    MembershipProbabilities,
    QuerySession,
    _mee_scores,
    fit_membership_model,
    mee_select,
    npu_select,
    pair_probability,
    resolve_instance,
    total_pair_entropy,
    two_step_plan,
)
from activemetric.core import (
    ConstraintStore,
    Dataset,
    MetricMatrix,
    NeighborhoodState,
    add_constraint,
    constraints_from_neighborhoods,
)
from activemetric.errors import (
    BudgetExhausted,
    ContradictionError,
    DimensionError,
    NoCandidates,
    SingleNeighborhood,
)
from activemetric.metric_learning import MetricHistory

from oracles import mee_scores_direct


def _probs(rows):
    return MembershipProbabilities(np.array(rows, dtype=float))


def _state(*groups):
    return NeighborhoodState(tuple(frozenset(g) for g in groups))


def _label_oracle(labels, log=None):
    def oracle(pair):
        if log is not None:
            log.append(pair)
        return "similar" if labels[pair[0]] == labels[pair[1]] else "dissimilar"

    return oracle


def _session(data, state, budget=100, strategy="mee", **kwargs):
    return QuerySession(
        data=data,
        budget=budget,
        strategy=strategy,
        neighborhoods=state,
        store=constraints_from_neighborhoods(state, data.n),
        **kwargs,
    )


def _two_blobs(n_half, gap, seed, p=2):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(2 * n_half, p))
    pts[n_half:, 0] += gap
    labels = np.array([1] * n_half + [2] * n_half)
    return Dataset(pts, labels)


class TestMembershipProbabilities:
    def test_shape_properties(self):
        r = _probs([[0.5, 0.5], [1.0, 0.0]])
        assert r.n_instances == 2
        assert r.n_neighborhoods == 2
        assert not r.probs.flags.writeable

    @pytest.mark.parametrize(
        "rows",
        [
            [0.5, 0.5],
            [[0.7, 0.6]],
            [[-0.1, 1.1]],
        ],
    )
    def test_rejects_invalid(self, rows):
        with pytest.raises(DimensionError):
            _probs(rows)


class TestFitMembershipModel:
    def test_single_neighborhood_is_certain(self):
        data = _two_blobs(4, 6.0, seed=0)
        with pytest.warns(SingleNeighborhood):
            got = fit_membership_model(data, _state({0}), MetricMatrix.identity(2))
        assert got.probs.shape == (8, 1)
        assert np.all(got.probs == 1.0)

    def test_blob_membership_recovered(self):
        data = _two_blobs(25, 10.0, seed=1)
        state = _state({0, 1}, {25, 26})
        got = fit_membership_model(data, state, MetricMatrix.identity(2), seed=0)
        outside = [i for i in range(50) if i not in {0, 1, 25, 26}]
        own = [got.probs[i, 0 if i < 25 else 1] for i in outside]
        assert min(own) >= 0.9

    def test_member_rows_forced_one_hot(self):
        data = _two_blobs(10, 8.0, seed=2)
        state = _state({0, 3}, {10, 12})
        got = fit_membership_model(data, state, MetricMatrix.identity(2), seed=0)
        for i, m in ((0, 0), (3, 0), (10, 1), (12, 1)):
            assert got.probs[i, m] == 1.0
            assert got.probs[i].sum() == 1.0

    def test_rows_are_stochastic(self):
        data = _two_blobs(8, 5.0, seed=3)
        got = fit_membership_model(
            data, _state({0}, {8}), MetricMatrix.identity(2), seed=1
        )
        assert np.allclose(got.probs.sum(axis=1), 1.0)
        assert got.probs.min() >= 0.0

    def test_deterministic(self):
        data = _two_blobs(8, 4.0, seed=4)
        state = _state({1}, {9})
        a = fit_membership_model(data, state, MetricMatrix.identity(2), seed=5)
        b = fit_membership_model(data, state, MetricMatrix.identity(2), seed=5)
        assert np.array_equal(a.probs, b.probs)

    def test_requires_a_neighborhood(self):
        data = _two_blobs(3, 4.0, seed=5)
        with pytest.raises(DimensionError):
            fit_membership_model(data, _state(), MetricMatrix.identity(2))


class TestPairProbability:
    def test_matching_one_hot_rows(self):
        r = _probs([[1.0, 0.0], [1.0, 0.0]])
        assert pair_probability(r, 0, 1) == 1.0

    def test_uniform_rows(self):
        r = _probs([[0.25] * 4, [0.25] * 4])
        assert pair_probability(r, 0, 1) == pytest.approx(0.25)

    def test_hand_computed_dot(self):
        r = _probs([[0.7, 0.3], [0.2, 0.8]])
        assert pair_probability(r, 0, 1) == pytest.approx(0.38)

    def test_out_of_range(self):
        r = _probs([[1.0], [1.0]])
        with pytest.raises(DimensionError):
            pair_probability(r, 0, 2)


class TestTotalPairEntropy:
    def test_certain_rows_carry_none(self):
        r = _probs([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        assert total_pair_entropy(r, [(0, 1), (0, 2), (1, 2)]) == 0.0

    def test_single_even_pair(self):
        r = _probs([[1.0, 0.0], [0.5, 0.5]])
        assert total_pair_entropy(r, [(0, 1)]) == pytest.approx(np.log(2.0))

    def test_three_instance_example(self):
        r = _probs([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])
        got = total_pair_entropy(r, [(0, 1), (0, 2), (1, 2)])
        assert got == pytest.approx(2.0 * np.log(2.0))

    def test_empty_pair_set(self):
        r = _probs([[0.5, 0.5]])
        assert total_pair_entropy(r, []) == 0.0

    @pytest.mark.parametrize("pair", [(0, 0), (0, 5)])
    def test_rejects_bad_pairs(self, pair):
        r = _probs([[0.5, 0.5], [0.5, 0.5]])
        with pytest.raises(DimensionError):
            total_pair_entropy(r, [pair])

    def test_expected_entropy_never_exceeds_current(self):
        # Resolving any instance cannot raise the expected total entropy:
        # co-membership probability is the mean of the partner's column
        # entries under the candidate's row, and binary entropy is concave.
        rng = np.random.default_rng(7)
        for _ in range(10):
            rows = rng.dirichlet(np.ones(3), size=8)
            r = MembershipProbabilities(rows)
            pairs = [
                (a, b)
                for a, b in itertools.combinations(range(8), 2)
                if rng.random() < 0.6
            ]
            current = total_pair_entropy(r, pairs)
            for i in range(8):
                expected = 0.0
                for m in range(3):
                    sharpened = rows.copy()
                    sharpened[i] = np.eye(3)[m]
                    expected += rows[i, m] * total_pair_entropy(
                        MembershipProbabilities(sharpened), pairs
                    )
                assert expected <= current + 1e-9


class TestMeeSelect:
    def test_single_candidate(self):
        r = _probs([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
        got = mee_select(r, [(0, 2), (1, 2)], _state({0}, {1}))
        assert got == 2

    def test_matches_full_recomputation(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            n, width = 12, 3
            rows = rng.dirichlet(np.ones(width), size=n)
            anchors = rng.choice(n, size=width, replace=False)
            for m, i in enumerate(anchors):
                rows[i] = np.eye(width)[m]
            r = MembershipProbabilities(rows)
            state = _state(*({int(i)} for i in anchors))
            pairs = [
                (a, b)
                for a, b in itertools.combinations(range(n), 2)
                if rng.random() < 0.5
            ]
            candidates = [i for i in range(n) if i not in set(int(a) for a in anchors)]
            fast = _mee_scores(r, pairs, candidates)
            slow = mee_scores_direct(rows.tolist(), pairs, candidates)
            for spot, i in enumerate(candidates):
                assert fast[spot] == pytest.approx(slow[i], abs=1e-10)
            assert mee_select(r, pairs, state) == min(
                candidates, key=lambda i: (slow[i], i)
            )

    def test_prefers_uncertain_candidate(self):
        # Resolving the coin-flip row removes entropy; resolving the
        # already-certain row cannot change anything.
        r = _probs([[1.0, 0.0], [0.5, 0.5], [1.0, 0.0], [0.0, 1.0]])
        pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]
        assert mee_select(r, pairs, _state({2}, {3})) == 1

    def test_tie_takes_smallest_index(self):
        r = _probs([[0.5, 0.5], [0.5, 0.5], [1.0, 0.0], [0.0, 1.0]])
        pairs = [(0, 2), (1, 2)]
        assert mee_select(r, pairs, _state({2}, {3})) == 0

    def test_no_candidates(self):
        r = _probs([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(NoCandidates):
            mee_select(r, [], _state({0}, {1}))


class TestNpuSelect:
    def test_certain_row_never_wins(self):
        r = _probs([[1.0, 0.0], [0.6, 0.4], [0.0, 1.0]])
        assert npu_select(r, _state({2},)) == 1

    def test_effort_division_matters(self):
        # Raw entropy would rank the coin flip first; dividing by the
        # expected number of probes promotes the (0.6, 0.4) row.
        r = _probs([[0.8, 0.2], [0.6, 0.4], [0.5, 0.5], [1.0, 0.0]])
        assert npu_select(r, _state({3},)) == 1

    def test_three_column_effort(self):
        r = _probs([[0.2, 0.3, 0.5], [1 / 3, 1 / 3, 1 / 3], [1.0, 0.0, 0.0]])
        assert npu_select(r, _state({2},)) == 0

    def test_tie_takes_smallest_index(self):
        r = _probs([[0.5, 0.5], [0.5, 0.5], [1.0, 0.0]])
        assert npu_select(r, _state({2},)) == 0

    def test_no_candidates(self):
        r = _probs([[1.0, 0.0]])
        with pytest.raises(NoCandidates):
            npu_select(r, _state({0}))


class TestTwoStepPlan:
    def test_empty_plan(self):
        data = _two_blobs(4, 6.0, seed=0)
        assert two_step_plan(data, 2, 0) == ()

    def test_certain_votes_fall_back_to_lexicographic(self):
        # One feature forces every split onto the separating axis, so all
        # votes are exact and every pair ties at distance one half.
        rng = np.random.default_rng(1)
        pts = np.vstack([rng.normal(size=(8, 1)), rng.normal(size=(8, 1)) + 20.0])
        plan = two_step_plan(Dataset(pts), 2, 5, seed=0)
        assert plan == tuple(itertools.combinations(range(16), 2))[:5]

    def test_boundary_pairs_rank_first(self):
        rng = np.random.default_rng(3)
        pts = np.vstack(
            [
                rng.normal(size=(5, 1)) * 0.3,
                rng.normal(size=(5, 1)) * 0.3 + 10.0,
                [[5.0]],
            ]
        )
        data = Dataset(pts)
        plan = two_step_plan(data, 2, 4, seed=0)
        assert all(10 in pair for pair in plan)

    def test_plan_size_validated(self):
        data = _two_blobs(3, 5.0, seed=4)
        with pytest.raises(ValueError):
            two_step_plan(data, 2, 16)

    def test_deterministic(self):
        data = _two_blobs(6, 3.0, seed=5)
        assert two_step_plan(data, 2, 7, seed=9) == two_step_plan(data, 2, 7, seed=9)


class TestQuerySession:
    def test_current_metric_defaults_to_identity(self):
        data = _two_blobs(3, 4.0, seed=0)
        session = _session(data, _state({0}))
        metric = session.current_metric()
        assert metric.kind == "diagonal"
        assert np.all(metric.values == 1.0)

    def test_current_metric_uses_latest(self):
        data = _two_blobs(3, 4.0, seed=0)
        hist = MetricHistory(
            (MetricMatrix("diagonal", np.array([1.0, 1.0])),
             MetricMatrix("diagonal", np.array([2.0, 5.0])))
        )
        session = _session(data, _state({0}), metric_history=hist)
        assert np.array_equal(session.current_metric().values, [2.0, 5.0])

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"budget": 0},
            {"spent": 3, "history": ()},
            {"strategy": "exhaustive"},
        ],
    )
    def test_rejects_invalid(self, kwargs):
        data = _two_blobs(3, 4.0, seed=0)
        base = dict(
            data=data,
            budget=10,
            strategy="mee",
            neighborhoods=_state({0}),
            store=ConstraintStore(6),
        )
        base.update(kwargs)
        with pytest.raises(ValueError):
            QuerySession(**base)


class TestResolveInstance:
    def test_single_neighborhood_similar(self):
        data = _two_blobs(3, 6.0, seed=0)
        session = _session(data, _state({0}))
        log = []
        got, used = resolve_instance(
            session, 1, _probs(np.ones((6, 1))), _label_oracle(data.labels, log)
        )
        assert used == 1
        assert log == [(0, 1)]
        assert got.neighborhoods.neighborhood_of(1) == 0
        assert got.spent == 1
        assert got.history == (((0, 1), "similar"),)
        assert (0, 1) in got.store.similar

    def test_most_probable_first_hits_once(self):
        data = _two_blobs(5, 8.0, seed=1)
        state = _state({0}, {5})
        session = _session(data, state)
        rows = np.full((10, 2), 0.5)
        rows[7] = (0.1, 0.9)
        got, used = resolve_instance(
            session, 7, _probs(rows), _label_oracle(data.labels)
        )
        assert used == 1
        assert got.neighborhoods.neighborhood_of(7) == 1

    def test_all_dissimilar_founds_new_neighborhood(self):
        labels = [1, 2, 3, 4, 4, 4]
        data = Dataset(np.arange(12, dtype=float).reshape(6, 2))
        state = _state({0}, {1}, {2})
        session = _session(data, state)
        rows = np.full((6, 3), 1 / 3)
        got, used = resolve_instance(session, 3, _probs(rows), _label_oracle(labels))
        assert used == 3
        assert len(got.neighborhoods) == 4
        assert got.neighborhoods.neighborhood_of(3) == 3
        assert got.spent == 3

    def test_probes_in_descending_probability(self):
        labels = [1, 2, 3, 9]
        data = Dataset(np.arange(8, dtype=float).reshape(4, 2))
        session = _session(data, _state({0}, {1}, {2}))
        rows = np.full((4, 3), 1 / 3)
        rows[3] = (0.2, 0.5, 0.3)
        log = []
        resolve_instance(session, 3, _probs(rows), _label_oracle(labels, log))
        assert log == [(1, 3), (2, 3), (0, 3)]

    def test_representative_is_metric_medoid(self):
        pts = np.array([[0.0, 0.0], [5.0, 1.0], [10.0, 0.0], [30.0, 30.0]])
        labels = [1, 1, 1, 2]
        data = Dataset(pts)
        state = _state({0, 1, 2})
        plain = _session(data, state)
        log = []
        resolve_instance(plain, 3, _probs(np.ones((4, 1))), _label_oracle(labels, log))
        assert log == [(1, 3)]
        flat = MetricHistory((MetricMatrix("diagonal", np.array([0.01, 1.0])),))
        weighted = _session(data, state, metric_history=flat)
        log = []
        resolve_instance(
            weighted, 3, _probs(np.ones((4, 1))), _label_oracle(labels, log)
        )
        assert log == [(0, 3)]

    def test_budget_exhausted_keeps_partial_progress(self):
        labels = [1, 2, 3, 9]
        data = Dataset(np.arange(8, dtype=float).reshape(4, 2))
        session = _session(data, _state({0}, {1}, {2}), budget=2)
        rows = np.full((4, 3), 1 / 3)
        with pytest.raises(BudgetExhausted) as caught:
            resolve_instance(session, 3, _probs(rows), _label_oracle(labels))
        partial = caught.value.session
        assert caught.value.queries_spent == 2
        assert partial.spent == 2
        assert len(partial.history) == 2
        assert partial.neighborhoods.neighborhood_of(3) is None
        assert all(answer == "dissimilar" for _, answer in partial.history)

    def test_cost_bounded_and_store_consistent(self):
        rng = np.random.default_rng(11)
        for trial in range(20):
            n = 16
            labels = rng.integers(1, 5, size=n)
            data = Dataset(rng.normal(size=(n, 2)))
            state = _state({0})
            session = _session(data, state, budget=200)
            oracle = _label_oracle(labels)
            for _ in range(6):
                outside = [
                    i for i in range(n)
                    if session.neighborhoods.neighborhood_of(i) is None
                ]
                if not outside:
                    break
                target = int(rng.choice(outside))
                width = len(session.neighborhoods)
                rows = rng.dirichlet(np.ones(width), size=n)
                before = session.spent
                session, used = resolve_instance(
                    session, target, MembershipProbabilities(rows), oracle
                )
                assert used <= min(width, 200 - before)
                rebuilt = constraints_from_neighborhoods(session.neighborhoods, n)
                assert session.store.similar == rebuilt.similar
                assert session.store.dissimilar == rebuilt.dissimilar

    def test_contradictory_oracle_surfaces(self):
        labels = [1, 1, 1]
        data = Dataset(np.arange(6, dtype=float).reshape(3, 2))
        state = _state({0, 1})
        store = add_constraint(
            constraints_from_neighborhoods(state, 3), 0, 2, "dissimilar"
        )
        session = QuerySession(
            data=data,
            budget=10,
            strategy="mee",
            neighborhoods=state,
            store=store,
        )
        with pytest.raises(ContradictionError):
            resolve_instance(
                session, 2, _probs(np.ones((3, 1))), _label_oracle(labels)
            )

    def test_rejects_resolved_target(self):
        data = _two_blobs(3, 4.0, seed=2)
        session = _session(data, _state({0, 1}))
        with pytest.raises(ValueError):
            resolve_instance(
                session, 0, _probs(np.ones((6, 1))), _label_oracle(data.labels)
            )

    def test_rejects_mismatched_probabilities(self):
        data = _two_blobs(3, 4.0, seed=3)
        session = _session(data, _state({0}, {1}))
        with pytest.raises(DimensionError):
            resolve_instance(
                session, 2, _probs(np.ones((6, 1))), _label_oracle(data.labels)
            )

    def test_rejects_junk_oracle_answer(self):
        data = _two_blobs(3, 4.0, seed=4)
        session = _session(data, _state({0}))
        with pytest.raises(ValueError):
            resolve_instance(
                session, 1, _probs(np.ones((6, 1))), lambda pair: "maybe"
            )
