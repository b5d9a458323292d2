"""Score stacking and the dual-source boosted ranker."""

from __future__ import annotations

import numpy as np
import pytest

from cascaderank.ensemble import (
    GAMMA_GRID,
    StackedModel,
    _source_schedule,
    select_gamma,
    stack_score,
    train_stacked_gbrt,
)
from cascaderank.errors import ConfigError, DataError
from cascaderank.rankmodels import train_gbdt, train_gbrt
from cascaderank.rankmodels.serialize import STACK_FORMAT, model_from_dict, model_to_dict


def two_source_data(n=120, f=6, seed=0):
    """Two planted utilities over the same rows, one pair set per source."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, f))
    u_e = X[:, 0] + 0.5 * X[:, 1]
    u_r = X[:, 2] - 0.3 * X[:, 3]

    def pairs_for(u):
        idx = rng.permutation(n)
        out = []
        for i in range(0, n - 1, 2):
            a, b = int(idx[i]), int(idx[i + 1])
            out.append((a, b) if u[a] > u[b] else (b, a))
        return np.array(out, dtype=np.int64)

    return X, pairs_for(u_e), pairs_for(u_r)


class TestStackScore:
    def test_endpoints_and_midpoint(self):
        e = np.array([1.0, 2.0])
        r = np.array([10.0, 0.0])
        np.testing.assert_array_equal(stack_score(e, r, 1.0), e)
        np.testing.assert_array_equal(stack_score(e, r, 0.0), r)
        np.testing.assert_allclose(stack_score(e, r, 0.5), [5.5, 1.0])

    def test_gamma_out_of_range_rejected(self):
        with pytest.raises(ConfigError):
            stack_score(np.zeros(2), np.zeros(2), 1.5)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DataError):
            stack_score(np.zeros(2), np.zeros(3), 0.5)


class TestSourceSchedule:
    def test_half_gamma_splits_evenly(self):
        schedule = _source_schedule(0.5, 10)
        assert schedule.count("engagement") == 5
        assert schedule.count("relevance") == 5

    def test_endpoints(self):
        assert set(_source_schedule(1.0, 8)) == {"engagement"}
        assert set(_source_schedule(0.0, 8)) == {"relevance"}

    @pytest.mark.parametrize("gamma", GAMMA_GRID)
    def test_engagement_share_is_floor_of_gamma_t(self, gamma):
        trees = 12
        schedule = _source_schedule(gamma, trees)
        assert schedule.count("engagement") == int(np.floor(gamma * trees))

    def test_interleaving_spreads_sources(self):
        """gamma 0.5 alternates instead of front-loading one source."""
        schedule = _source_schedule(0.5, 6)
        assert schedule == ["relevance", "engagement"] * 3


@pytest.fixture(scope="module")
def components():
    rng = np.random.default_rng(30)
    X, pairs_e, pairs_r = two_source_data(seed=30)
    eng = train_gbrt(X, pairs_e, trees=6, seed=2)
    rel = train_gbdt(X, rng.normal(size=len(X)), trees=6, seed=2)
    return X, eng, rel


class TestStackedModel:
    def test_gamma_one_reproduces_engagement_order(self, components):
        X, eng, rel = components
        stacked = StackedModel(eng, rel, gamma=1.0)
        np.testing.assert_array_equal(
            np.argsort(-stacked.score_matrix(X)), np.argsort(-eng.score_matrix(X))
        )

    def test_gamma_zero_reproduces_relevance_order(self, components):
        X, eng, rel = components
        stacked = StackedModel(eng, rel, gamma=0.0)
        np.testing.assert_array_equal(
            np.argsort(-stacked.score_matrix(X)), np.argsort(-rel.score_matrix(X))
        )

    def test_round_trip_is_bitwise(self, components):
        X, eng, rel = components
        stacked = StackedModel(eng, rel, gamma=0.25)
        d = stacked.to_dict()
        assert d["format"] == STACK_FORMAT
        back = model_from_dict(d)
        np.testing.assert_array_equal(back.score_matrix(X), stacked.score_matrix(X))
        assert back.gamma == 0.25

    def test_mismatched_subsets_rejected(self, components):
        _, eng, _ = components
        other = train_gbdt(np.zeros((4, 3)), np.arange(4.0), trees=1, subset="lightweight")
        with pytest.raises(ConfigError):
            StackedModel(eng, other, gamma=0.5)

    def test_plain_serializer_routes_stacked_envelopes(self, components):
        X, eng, rel = components
        stacked = StackedModel(eng, rel, gamma=0.75)
        back = model_from_dict(model_to_dict(stacked))
        np.testing.assert_array_equal(back.score_matrix(X), stacked.score_matrix(X))


class TestTrainStackedGBRT:
    def test_tree_budget_follows_schedule(self):
        X, pairs_e, pairs_r = two_source_data(seed=31)
        rows = np.arange(len(X))
        model = train_stacked_gbrt(
            X, pairs_e, pairs_r, rows, rows, gamma=0.5, trees=10, learning_rate=0.3
        )
        assert model.trees_per_source() == {"engagement": 5, "relevance": 5}

    def test_combined_loss_curve_non_increasing(self):
        X, pairs_e, pairs_r = two_source_data(seed=32)
        rows = np.arange(len(X))
        model = train_stacked_gbrt(
            X, pairs_e, pairs_r, rows, rows, gamma=0.5, trees=15, learning_rate=0.3
        )
        curve = model.training["loss_curve"]
        assert all(b <= a + 1e-9 for a, b in zip(curve, curve[1:]))

    def test_gamma_endpoints_use_one_source(self):
        X, pairs_e, pairs_r = two_source_data(seed=33)
        rows = np.arange(len(X))
        only_e = train_stacked_gbrt(X, pairs_e, pairs_r, rows, rows, gamma=1.0, trees=6)
        only_r = train_stacked_gbrt(X, pairs_e, pairs_r, rows, rows, gamma=0.0, trees=6)
        assert only_e.trees_per_source() == {"engagement": 6}
        assert only_r.trees_per_source() == {"relevance": 6}


class TestSelectGamma:
    def test_picks_best_blend(self):
        metrics = {0.0: (0.2, 0.9), 0.5: (0.6, 0.6), 1.0: (0.9, 0.1)}
        gamma, model, table = select_gamma(
            train_fn=lambda g: f"model_{g}",
            eval_fn=lambda m: metrics[float(m.split("_")[1])],
            grid=(0.0, 0.5, 1.0),
        )
        assert gamma == 0.5
        assert model == "model_0.5"
        assert [row["gamma"] for row in table] == [0.0, 0.5, 1.0]

    def test_exact_tie_goes_to_smaller_gamma(self):
        gamma, _, _ = select_gamma(
            train_fn=lambda g: g,
            eval_fn=lambda m: (0.5, 0.5),
            grid=(1.0, 0.25, 0.75),
        )
        assert gamma == 0.25

    def test_weights_shift_the_choice(self):
        metrics = {0.0: (0.0, 1.0), 1.0: (0.8, 0.0)}
        eval_fn = lambda m: metrics[m]
        g_rel, _, _ = select_gamma(lambda g: g, eval_fn, grid=(0.0, 1.0), weights=(0.0, 1.0))
        g_eng, _, _ = select_gamma(lambda g: g, eval_fn, grid=(0.0, 1.0), weights=(1.0, 0.0))
        assert g_rel == 0.0
        assert g_eng == 1.0

    def test_empty_grid_rejected(self):
        with pytest.raises(ConfigError):
            select_gamma(lambda g: g, lambda m: (0, 0), grid=())
