"""Ranking models: trees, boosters, linear, neural, conv, serialization."""

from __future__ import annotations

import math

import numpy as np
import pytest

from cascaderank.errors import ConfigError, DataError
from cascaderank.rankmodels import (
    make_rule_model,
    train_cnn,
    train_dnn,
    train_gbdt,
    train_gbrt,
    train_ranknet,
    train_ranksvm,
)
from cascaderank.rankmodels.base import argsort_ranking, standardizer, tie_ranks
from cascaderank.rankmodels.boosting import (
    pairwise_hinge_gradient,
    pairwise_hinge_loss,
)
from cascaderank.rankmodels.conv import CNNNet, _conv_out_len
from cascaderank.rankmodels.linear import (
    DEFAULT_RULE_WEIGHTS,
    FRESH_THRESHOLD,
    ranksvm_objective,
)
from cascaderank.rankmodels.neural import (
    MLP,
    ce_loss_and_grad,
    classifier_score,
    pair_loss_and_grad,
    softmax,
)
from cascaderank.rankmodels.serialize import (
    MODEL_FORMAT,
    load_model,
    model_digest,
    model_from_dict,
    model_to_dict,
    save_model,
)
from cascaderank.rankmodels.tree import fit_tree
from cascaderank.featurize.schema import LIGHTWEIGHT_SUBSET


def planted_linear(n=200, f=6, seed=0):
    """Rows scored by a hidden linear utility; pairs point at higher utility."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, f))
    w = rng.normal(size=f)
    u = X @ w
    idx = rng.permutation(n)
    pairs = []
    for i in range(0, n - 1, 2):
        a, b = int(idx[i]), int(idx[i + 1])
        if u[a] == u[b]:
            continue
        pairs.append((a, b) if u[a] > u[b] else (b, a))
    return X, np.array(pairs, dtype=np.int64), u


class TestPairwiseHinge:
    def test_frozen_losses(self):
        """Margin-1 squared hinge: diff 1 -> 0, diff 0 -> 1, diff -1 -> 4."""
        pairs = np.array([[0, 1]])
        assert pairwise_hinge_loss(np.array([2.0, 1.0]), pairs) == pytest.approx(0.0)
        assert pairwise_hinge_loss(np.array([1.0, 1.0]), pairs) == pytest.approx(1.0)
        assert pairwise_hinge_loss(np.array([0.0, 1.0]), pairs) == pytest.approx(4.0)

    def test_loss_sums_over_pairs(self):
        scores = np.array([0.0, 1.0, 1.0])
        pairs = np.array([[0, 1], [1, 2]])
        assert pairwise_hinge_loss(scores, pairs) == pytest.approx(4.0 + 1.0)

    def test_gradient_is_descent_direction(self):
        """The returned vector pushes a violated winner up and loser down, so
        trees fit it directly without another sign flip."""
        scores = np.array([0.0, 1.0])
        g = pairwise_hinge_gradient(scores, np.array([[0, 1]]))
        assert g[0] > 0 and g[1] < 0
        moved = scores + 1e-3 * g
        assert pairwise_hinge_loss(moved, np.array([[0, 1]])) < 4.0

    def test_inactive_pair_has_zero_gradient(self):
        g = pairwise_hinge_gradient(np.array([3.0, 1.0]), np.array([[0, 1]]))
        np.testing.assert_array_equal(g, 0.0)

    def test_gradient_matches_finite_difference(self):
        rng = np.random.default_rng(42)
        scores = rng.normal(size=8)
        pairs = np.array([[0, 3], [5, 2], [7, 1], [4, 6]])
        g = pairwise_hinge_gradient(scores, pairs)
        h = 1e-6
        for k in range(8):
            e = np.zeros(8)
            e[k] = h
            num = (
                pairwise_hinge_loss(scores + e, pairs) - pairwise_hinge_loss(scores - e, pairs)
            ) / (2 * h)
            # descent direction: negative of the loss derivative
            assert g[k] == pytest.approx(-num, abs=1e-5)

    def test_out_of_range_pairs_rejected_by_trainers(self):
        with pytest.raises(DataError):
            train_gbrt(np.zeros((3, 2)), np.array([[0, 5]]), trees=1)
        with pytest.raises(DataError):
            train_ranksvm(np.zeros((3, 2)), np.array([[-1, 0]]), epochs=1)


class TestRegressionTree:
    def test_single_leaf_is_mean(self):
        X = np.array([[0.0], [1.0], [2.0]])
        y = np.array([1.0, 2.0, 6.0])
        tree = fit_tree(X, y, max_depth=0)
        np.testing.assert_allclose(tree.predict(X), 3.0)

    def test_threshold_is_last_value_routed_left(self):
        """A split between sorted values x_k and x_{k+1} stores x_k, so
        predict-time `<=` routes exactly the training rows seen on the left."""
        X = np.array([[1.0], [2.0], [10.0], [11.0]])
        y = np.array([0.0, 0.0, 5.0, 5.0])
        tree = fit_tree(X, y, max_depth=1)
        assert tree.threshold[tree.feature >= 0][0] == pytest.approx(2.0)
        np.testing.assert_allclose(tree.predict(np.array([[2.0], [2.0001]])), [0.0, 5.0])

    def test_exact_fit_with_enough_depth(self):
        rng = np.random.default_rng(42)
        X = rng.normal(size=(16, 3))
        y = rng.normal(size=16)
        tree = fit_tree(X, y, max_depth=16)
        np.testing.assert_allclose(tree.predict(X), y, atol=1e-12)

    def test_min_leaf_respected(self):
        X = np.arange(10, dtype=np.float64).reshape(-1, 1)
        y = np.arange(10, dtype=np.float64)
        tree = fit_tree(X, y, max_depth=8, min_leaf=3)
        # every leaf value is a mean over >= 3 training rows: with min_leaf 3
        # over 10 points no leaf can be a single training value
        preds = tree.predict(X)
        assert all(np.sum(np.isclose(preds, p)) >= 3 for p in np.unique(preds))

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(30, 4))
        y = rng.normal(size=30)
        tree = fit_tree(X, y, max_depth=4)
        back = type(tree).from_dict(tree.to_dict())
        np.testing.assert_array_equal(back.predict(X), tree.predict(X))


class TestGBDT:
    def test_training_mse_non_increasing(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(80, 5))
        y = X[:, 0] - 2 * X[:, 2] + 0.1 * rng.normal(size=80)
        model = train_gbdt(X, y, trees=30, learning_rate=0.2)
        curve = model.training["loss_curve"]
        assert len(curve) == 30
        assert all(b <= a + 1e-12 for a, b in zip(curve, curve[1:]))
        assert curve[-1] < curve[0]

    def test_single_instance_exact_fit(self):
        model = train_gbdt(np.array([[1.0, 2.0]]), np.array([5.0]), trees=3)
        assert model.score(np.array([1.0, 2.0])) == pytest.approx(5.0)

    def test_wrong_width_rejected_at_scoring(self):
        model = train_gbdt(np.zeros((4, 3)), np.arange(4.0), trees=2)
        with pytest.raises(DataError):
            model.score_matrix(np.zeros((2, 5)))


class TestGBRT:
    def test_pair_loss_non_increasing(self):
        X, pairs, _ = planted_linear(n=120, seed=5)
        model = train_gbrt(X, pairs, trees=25, learning_rate=0.3)
        curve = model.training["loss_curve"]
        assert all(b <= a + 1e-9 for a, b in zip(curve, curve[1:]))
        assert curve[-1] < curve[0]

    def test_learns_planted_order(self):
        X, pairs, _ = planted_linear(n=160, seed=6)
        model = train_gbrt(X, pairs, trees=40, learning_rate=0.3)
        s = model.score_matrix(X)
        agree = np.mean(s[pairs[:, 0]] > s[pairs[:, 1]])
        assert agree > 0.9

    def test_line_search_never_degrades(self):
        """An already-perfect ensemble takes scale 0 instead of a bad step."""
        X = np.array([[0.0], [1.0]])
        pairs = np.array([[1, 0]])
        model = train_gbrt(X, pairs, trees=6, learning_rate=1.0)
        curve = model.training["loss_curve"]
        assert curve[-1] <= curve[0]

    def test_trees_per_source_tags(self):
        X, pairs, _ = planted_linear(n=60, seed=7)
        model = train_gbrt(X, pairs, trees=5, source_tag="relevance")
        assert model.trees_per_source() == {"relevance": 5}


class TestRankSVM:
    def test_objective_value(self):
        w = np.array([1.0, 0.0])
        diffs = np.array([[2.0, 0.0], [-1.0, 0.0]])
        # 0.5*|w|^2 + C * sum max(0, 1 - d.w)^2 = 0.5 + 1 * (0 + 4)
        assert ranksvm_objective(w, diffs, cost=1.0) == pytest.approx(4.5)

    def test_loss_curve_non_increasing(self):
        X, pairs, _ = planted_linear(n=150, seed=8)
        model = train_ranksvm(X, pairs, epochs=40)
        curve = model.training["loss_curve"]
        assert all(b <= a + 1e-12 for a, b in zip(curve, curve[1:]))

    def test_learns_sign_of_single_feature(self):
        """Pairs always prefer the row with the larger first feature."""
        rng = np.random.default_rng(9)
        X = rng.normal(size=(100, 3))
        order = np.argsort(-X[:, 0])
        pairs = np.array([(int(order[i]), int(order[i + 1])) for i in range(0, 98, 2)])
        model = train_ranksvm(X, pairs, epochs=60)
        w = np.asarray(model.params_to_dict()["w"])
        assert w[0] > 0
        assert abs(w[0]) > 3 * max(abs(w[1]), abs(w[2]))

    def test_ranking_invariant_to_feature_scaling(self):
        """Internal standardization makes column rescaling a no-op for the
        learned order."""
        X, pairs, _ = planted_linear(n=120, seed=10)
        scales = np.array([1.0, 100.0, 0.01, 7.0, 0.5, 3.0])
        a = train_ranksvm(X, pairs, epochs=30)
        b = train_ranksvm(X * scales, pairs, epochs=30)
        np.testing.assert_array_equal(
            np.argsort(-a.score_matrix(X)), np.argsort(-b.score_matrix(X * scales))
        )

    def test_pair_count_scale_does_not_stall_training(self):
        """The step is found by backtracking, so a 10x larger pair set still
        moves the weights instead of freezing them at zero."""
        X, pairs, _ = planted_linear(n=400, seed=11)
        big = np.repeat(pairs, 10, axis=0)
        model = train_ranksvm(X, big, epochs=10)
        assert np.linalg.norm(np.asarray(model.params_to_dict()["w"])) > 0


class TestNeuralNets:
    def test_tied_pair_loss_is_ln2(self):
        """Identical rows score identically, so each pair costs ln 2."""
        net = MLP([4, 8, 1], "tanh", seed=0)
        X = np.tile(np.array([[0.3, -0.2, 1.0, 0.5]]), (2, 1))
        loss, _ = pair_loss_and_grad(net, X, np.array([[0, 1]]))
        assert loss == pytest.approx(math.log(2.0))

    def test_uniform_classifier_loss_is_ln4(self):
        """With zeroed parameters the logits tie, so CE is ln 4 per row."""
        net = MLP([5, 6, 4], "relu", seed=0)
        net.set_flat(np.zeros_like(net.get_flat()))
        X = np.random.default_rng(0).normal(size=(10, 5))
        loss, _ = ce_loss_and_grad(net, X, np.array([0, 1, 2, 3] * 2 + [0, 1]))
        assert loss == pytest.approx(math.log(4.0))

    def test_uniform_distribution_scores_midpoint(self):
        assert classifier_score(np.full(4, 0.25)) == pytest.approx(2.5)

    def test_classifier_score_range(self):
        rng = np.random.default_rng(12)
        dist = softmax(rng.normal(size=(50, 4)))
        s = classifier_score(dist)
        assert np.all(s >= 1.0) and np.all(s <= 4.0)

    def test_pair_gradient_matches_finite_difference(self):
        net = MLP([3, 5, 1], "tanh", seed=4)
        rng = np.random.default_rng(4)
        X = rng.normal(size=(6, 3))
        pairs = np.array([[0, 1], [2, 3], [5, 4]])
        _, grad = pair_loss_and_grad(net, X, pairs)
        flat = net.get_flat()
        h = 1e-6
        for k in rng.choice(len(flat), size=10, replace=False):
            probe = flat.copy()
            probe[k] += h
            net.set_flat(probe)
            up, _ = pair_loss_and_grad(net, X, pairs)
            probe[k] -= 2 * h
            net.set_flat(probe)
            down, _ = pair_loss_and_grad(net, X, pairs)
            net.set_flat(flat)
            assert grad[k] == pytest.approx((up - down) / (2 * h), rel=1e-4, abs=1e-7)

    def test_ranknet_improves_pair_accuracy(self):
        X, pairs, _ = planted_linear(n=150, seed=13)
        model = train_ranknet(X, pairs, hidden=8, epochs=12, step=0.1)
        s = model.score_matrix(X)
        assert np.mean(s[pairs[:, 0]] > s[pairs[:, 1]]) > 0.85

    def test_dnn_rejects_bad_ordinals(self):
        with pytest.raises(DataError):
            train_dnn(np.zeros((3, 4)), [0, 1, 2], epochs=1)

    def test_dnn_learns_separable_classes(self):
        rng = np.random.default_rng(14)
        y = rng.integers(1, 5, size=200)
        X = np.zeros((200, 4))
        X[np.arange(200), y - 1] = 3.0
        X += 0.05 * rng.normal(size=X.shape)
        model = train_dnn(X, y, hidden=(16,), epochs=30, step=0.1)
        s = model.score_matrix(X)
        assert np.corrcoef(s, y)[0, 1] > 0.9


class TestConvNet:
    def test_conv_output_length(self):
        assert _conv_out_len(22, 3) == 20

    def test_lightweight_width_is_too_short(self):
        """Two conv blocks with pooling cannot run on 8 inputs."""
        with pytest.raises(ConfigError):
            CNNNet(8, conv_channels=(4, 8), conv_width=3, pool=2)

    def test_forward_shapes(self):
        net = CNNNet(22, conv_channels=(4, 8), conv_width=3, pool=2, fc_hidden=16, seed=0)
        logits, _ = net.forward(np.zeros((7, 22)))
        assert logits.shape == (7, 4)

    def test_gradient_matches_finite_difference(self):
        net = CNNNet(22, conv_channels=(2, 3), conv_width=3, pool=2, fc_hidden=8, seed=5)
        rng = np.random.default_rng(5)
        X = rng.normal(size=(4, 22))
        y = np.array([0, 1, 2, 3])
        _, grad = ce_loss_and_grad(net, X, y)
        flat = net.get_flat()
        h = 1e-6
        for k in rng.choice(len(flat), size=10, replace=False):
            probe = flat.copy()
            probe[k] += h
            net.set_flat(probe)
            up, _ = ce_loss_and_grad(net, X, y)
            probe[k] -= 2 * h
            net.set_flat(probe)
            down, _ = ce_loss_and_grad(net, X, y)
            net.set_flat(flat)
            assert grad[k] == pytest.approx((up - down) / (2 * h), rel=1e-4, abs=1e-7)

    def test_cnn_training_reduces_loss(self):
        rng = np.random.default_rng(15)
        y = rng.integers(1, 5, size=120)
        X = rng.normal(size=(120, 22)) * 0.05
        X[np.arange(120), (y - 1) * 5] = 2.0
        model = train_cnn(X, y, conv_channels=(3, 4), fc_hidden=8, epochs=8, step=0.1)
        curve = model.training["loss_curve"]
        assert curve[-1] < curve[0]


class TestRuleModel:
    NAMES = list(LIGHTWEIGHT_SUBSET)

    def test_weighted_sum_plus_fresh_boost(self):
        model = make_rule_model(self.NAMES, weights={"bm25": 2.0}, fresh_boost=0.5)
        row = np.zeros(len(self.NAMES))
        row[self.NAMES.index("bm25")] = 1.5
        assert model.score(row) == pytest.approx(3.0)
        row[self.NAMES.index("freshness")] = FRESH_THRESHOLD + 1e-6
        assert model.score(row) == pytest.approx(3.5)

    def test_boost_is_a_step_not_a_slope(self):
        model = make_rule_model(self.NAMES, weights={}, fresh_boost=1.0)
        fresh_idx = self.NAMES.index("freshness")
        old = np.zeros(len(self.NAMES))
        nearly = old.copy()
        nearly[fresh_idx] = FRESH_THRESHOLD  # threshold itself does not boost
        fresh = old.copy()
        fresh[fresh_idx] = FRESH_THRESHOLD * 1.01
        assert model.score(nearly) == model.score(old) == 0.0
        assert model.score(fresh) == pytest.approx(1.0)

    def test_default_weights_cover_lightweight_subset(self):
        model = make_rule_model(self.NAMES)
        assert set(model.weights) == set(DEFAULT_RULE_WEIGHTS) & set(self.NAMES)

    def test_unknown_weight_feature_rejected(self):
        with pytest.raises(ConfigError):
            make_rule_model(self.NAMES, weights={"pagerank": 1.0})

    def test_fresh_boost_requires_freshness_column(self):
        with pytest.raises(ConfigError):
            make_rule_model(["bm25", "social_score"], weights={"bm25": 1.0}, fresh_boost=0.2)


class TestBaseHelpers:
    def test_tie_ranks_follow_ascending_pin_id(self):
        ranks = tie_ranks(["pin_b", "pin_a", "pin_c"])
        assert list(ranks) == [1, 0, 2]

    def test_argsort_ranking_breaks_ties_by_rank(self):
        scores = np.array([1.0, 2.0, 1.0])
        tie = np.array([1, 0, 0])
        assert list(argsort_ranking(scores, tie)) == [1, 2, 0]

    def test_standardizer_zero_variance_guard(self):
        X = np.ones((5, 2))
        X[:, 1] = np.arange(5)
        mean, std = standardizer(X)
        assert std[0] == 1.0
        scaled = (X - mean) / std
        assert np.all(np.isfinite(scaled))


@pytest.fixture(scope="module")
def trained():
    rng = np.random.default_rng(21)
    X, pairs, _ = planted_linear(n=80, f=22, seed=21)
    y = rng.integers(1, 5, size=80)
    return {
        "gbdt": train_gbdt(X, y.astype(float), trees=4, seed=1),
        "gbrt": train_gbrt(X, pairs, trees=4, seed=1),
        "ranksvm": train_ranksvm(X, pairs, epochs=5, seed=1),
        "ranknet": train_ranknet(X, pairs, hidden=6, epochs=2, seed=1),
        "dnn": train_dnn(X, y, hidden=(8,), epochs=2, seed=1),
        "cnn": train_cnn(X, y, conv_channels=(2, 3), fc_hidden=6, epochs=1, seed=1),
        "rule": make_rule_model(list(LIGHTWEIGHT_SUBSET) + [f"x{i}" for i in range(14)]),
    }


class TestSerialization:
    def test_round_trip_scores_bitwise(self, trained):
        rng = np.random.default_rng(22)
        X = rng.normal(size=(40, 22))
        for kind, model in trained.items():
            back = model_from_dict(model_to_dict(model))
            np.testing.assert_array_equal(
                back.score_matrix(X), model.score_matrix(X), err_msg=kind
            )

    def test_envelope_fields(self, trained):
        for kind, model in trained.items():
            d = model_to_dict(model)
            assert d["format"] == MODEL_FORMAT
            assert d["kind"] == kind
            assert d["n_features"] == 22
            assert set(d) >= {"schema_id", "subset", "seed", "hyper", "training", "params"}

    def test_file_round_trip(self, trained, tmp_path):
        model = trained["gbrt"]
        path = tmp_path / "m.json"
        save_model(model, path)
        back = load_model(path)
        X = np.random.default_rng(23).normal(size=(10, 22))
        np.testing.assert_array_equal(back.score_matrix(X), model.score_matrix(X))

    def test_digest_tracks_content(self, trained):
        a = trained["ranksvm"]
        b = model_from_dict(model_to_dict(a))
        assert model_digest(a) == model_digest(b)
        assert model_digest(a) != model_digest(trained["gbrt"])

    def test_unsupported_format_rejected(self):
        with pytest.raises(DataError):
            model_from_dict({"format": "other/9"})
