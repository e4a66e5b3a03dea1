import json
import math

import numpy as np
import pytest

from riskforge.errors import DataError, SchemaError
from riskforge.sampling import LabeledMatrix
from riskforge.trees import (
    GROWTH_LEAF,
    GROWTH_LEVEL,
    BinIndex,
    BoostedModel,
    BoostingParams,
    ForestModel,
    ForestParams,
    GradHessBuffer,
    TreeNode,
    bin_matrix,
    build_histograms,
    fit_bins,
    fit_boosted,
    fit_forest,
    leaf_value,
    logistic_grad_hess,
    model_from_doc,
    model_to_doc,
    predict_proba,
    split_gain,
)
from riskforge.utils import sigmoid


def separable_1d(n_per_side=100, seed=0):
    """Perfectly separable 1-D data with few enough unique values that the
    quantile binning keeps every point in its own bin."""
    rng = np.random.default_rng(seed)
    neg = rng.uniform(-1.0, -0.01, n_per_side)
    pos = rng.uniform(0.01, 1.0, n_per_side)
    x = np.concatenate([neg, pos]).reshape(-1, 1)
    y = np.array([0] * n_per_side + [1] * n_per_side)
    return LabeledMatrix(x, y)


def random_data(n=400, d=5, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    margin = -1.0 + 1.3 * x[:, 0] - 0.9 * x[:, 1]
    y = (rng.random(n) < sigmoid(margin)).astype(int)
    return LabeledMatrix(x, y)


class TestGradHess:
    def test_symmetry_point_positive_label(self):
        assert logistic_grad_hess(0.5, 1) == (-0.5, 0.25)

    def test_symmetry_point_negative_label(self):
        assert logistic_grad_hess(0.5, 0) == (0.5, 0.25)

    def test_confident_correct(self):
        g, h = logistic_grad_hess(0.9, 1)
        assert g == pytest.approx(-0.1)
        assert h == pytest.approx(0.09)

    def test_vectorized(self):
        g, h = logistic_grad_hess(np.array([0.5, 0.9]), np.array([1, 1]))
        assert g == pytest.approx([-0.5, -0.1])
        assert h == pytest.approx([0.25, 0.09])


class TestSplitGain:
    def test_even_split_zero_gain(self):
        assert split_gain(-1.0, 1.0, -1.0, 1.0, 0.0, 0.0) == 0.0

    def test_opposed_gradients(self):
        assert split_gain(-2.0, 1.0, 2.0, 1.0, 0.0, 0.0) == 4.0

    def test_gamma_pushes_gain_negative(self):
        assert split_gain(-0.5, 1.0, 0.5, 1.0, 0.0, 10.0) < 0.0


class TestLeafValue:
    def test_hand_value(self):
        assert leaf_value(-2.0, 4.0, 1.0) == pytest.approx(0.4)

    def test_zero_gradient(self):
        assert leaf_value(0.0, 3.0, 1.0) == 0.0

    def test_large_lambda_shrinks_toward_zero(self):
        small = abs(leaf_value(-2.0, 4.0, 1e9))
        assert small < 1e-8
        assert leaf_value(-2.0, 4.0, 1e9) > 0  # sign preserved

    def test_zero_denominator_rejected(self):
        with pytest.raises(DataError):
            leaf_value(1.0, 0.0, 0.0)


class TestBins:
    def test_edges_strictly_increasing(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(500, 3))
        x[:, 1] = np.round(x[:, 1])  # heavy ties
        bins = fit_bins(x, 16)
        for e in bins.edges:
            assert np.all(np.diff(e) > 0)

    def test_every_value_maps_to_exactly_one_bin(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(200, 2))
        bins = fit_bins(x, 8)
        codes = bin_matrix(bins, x)
        for f in range(2):
            assert codes[:, f].min() >= 0
            assert codes[:, f].max() <= len(bins.edges[f])

    def test_constant_feature_gets_no_edges(self):
        x = np.ones((10, 1))
        assert fit_bins(x, 8).edges[0].size == 0

    def test_threshold_routing_matches_binning(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(300, 1))
        bins = fit_bins(x, 8)
        codes = bin_matrix(bins, x)[:, 0]
        for i, edge in enumerate(bins.edges[0]):
            left_by_value = x[:, 0] <= edge
            left_by_code = codes <= i
            assert np.array_equal(left_by_value, left_by_code)

    def test_too_few_bins_rejected(self):
        with pytest.raises(DataError):
            fit_bins(np.ones((5, 1)), 1)


class TestHistograms:
    def test_single_row(self):
        x = np.array([[0.7]])
        data = GradHessBuffer(np.array([0.3]), np.array([0.2]))
        bins = BinIndex((np.array([0.5]),))
        binned = bin_matrix(bins, x)
        (g, h, c), = build_histograms(binned, np.array([0]), bins, data)
        assert g[1] == 0.3 and h[1] == 0.2 and c[1] == 1
        assert g[0] == 0.0 and c[0] == 0

    def test_partition_identity(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(150, 4))
        g = rng.normal(size=150)
        h = rng.random(150)
        bins = fit_bins(x, 16)
        binned = bin_matrix(bins, x)
        rows = np.arange(0, 150, 2)
        hists = build_histograms(binned, rows, bins, GradHessBuffer(g, h))
        for gb, hb, cb in hists:
            assert gb.sum() == pytest.approx(g[rows].sum(), abs=1e-9)
            assert hb.sum() == pytest.approx(h[rows].sum(), abs=1e-9)
            assert cb.sum() == len(rows)

    def test_same_bin_rows_aggregate(self):
        x = np.array([[0.1], [0.2]])  # both below the only edge
        bins = BinIndex((np.array([0.5]),))
        binned = bin_matrix(bins, x)
        data = GradHessBuffer(np.array([1.0, 2.0]), np.array([0.1, 0.2]))
        (g, h, c), = build_histograms(binned, np.array([0, 1]), bins, data)
        assert g[0] == 3.0 and h[0] == pytest.approx(0.3) and c[0] == 2


def walk(node, fn):
    fn(node)
    if not node.is_leaf:
        walk(node.left, fn)
        walk(node.right, fn)


class TestBoosted:
    @pytest.mark.parametrize("growth", [GROWTH_LEVEL, GROWTH_LEAF])
    def test_separable_data_reaches_full_accuracy(self, growth):
        data = separable_1d()
        model = fit_boosted(data, BoostingParams(n_trees=10, growth=growth, seed=0))
        pred = (predict_proba(model, data.features) >= 0.5).astype(int)
        assert np.array_equal(pred, data.labels)

    def test_base_score_is_log_odds_of_prior(self):
        data = random_data()
        model = fit_boosted(data, BoostingParams(n_trees=1, seed=0))
        ybar = data.labels.mean()
        assert model.base_score == pytest.approx(math.log(ybar / (1 - ybar)))

    @pytest.mark.parametrize("growth", [GROWTH_LEVEL, GROWTH_LEAF])
    def test_train_loss_never_increases(self, growth):
        data = random_data(seed=5)
        model = fit_boosted(data, BoostingParams(n_trees=40, growth=growth, seed=1))
        losses = np.array(model.train_loss)
        assert np.all(np.diff(losses) <= 1e-12)

    def test_leafwise_round_no_worse_than_levelwise_at_equal_leaves(self):
        data = random_data(n=800, d=6, seed=9)
        depth = 3
        level = fit_boosted(
            data,
            BoostingParams(n_trees=1, max_depth=depth, growth=GROWTH_LEVEL, seed=2),
        )
        leaf = fit_boosted(
            data,
            BoostingParams(
                n_trees=1, max_leaves=2**depth, growth=GROWTH_LEAF, seed=2
            ),
        )
        assert leaf.train_loss[0] <= level.train_loss[0] + 1e-12

    def test_chosen_split_beats_every_candidate(self):
        # Oracle: recompute the gain of every (feature, edge) candidate at the
        # root from raw sums and compare with the split the grower picked.
        data = random_data(n=300, d=4, seed=3)
        prm = BoostingParams(n_trees=1, max_depth=1, growth=GROWTH_LEVEL, seed=0)
        model = fit_boosted(data, prm)
        root = model.trees[0]
        assert not root.is_leaf
        p0 = sigmoid(model.base_score)
        g = p0 - data.labels.astype(float)
        h = np.full_like(g, p0 * (1 - p0))
        bins = model.bins
        best = -np.inf
        arg = None
        for f in range(4):
            for i, edge in enumerate(bins.edges[f]):
                left = data.features[:, f] <= edge
                if left.sum() == 0 or left.sum() == len(g):
                    continue
                gl, hl = g[left].sum(), h[left].sum()
                gr, hr = g[~left].sum(), h[~left].sum()
                if hl < prm.min_child_weight or hr < prm.min_child_weight:
                    continue
                gain = split_gain(gl, hl, gr, hr, prm.l2_regularization, 0.0)
                if gain > best:
                    best, arg = gain, (f, float(edge))
        assert (root.feature, root.threshold) == arg

    def test_every_threshold_is_a_bin_edge(self):
        data = random_data(n=500, d=4, seed=6)
        model = fit_boosted(data, BoostingParams(n_trees=5, seed=1))
        edges = [set(e.tolist()) for e in model.bins.edges]

        def check(node):
            if not node.is_leaf:
                assert node.threshold in edges[node.feature]

        for tree in model.trees:
            walk(tree, check)

    def test_cover_bookkeeping(self):
        data = random_data(n=500, d=4, seed=7)
        model = fit_boosted(data, BoostingParams(n_trees=5, seed=1))

        def check(node):
            if not node.is_leaf:
                assert node.cover == pytest.approx(
                    node.left.cover + node.right.cover, abs=1e-9
                )

        for tree in model.trees:
            walk(tree, check)

    def test_max_leaves_respected(self):
        data = random_data(n=600, d=5, seed=8)
        model = fit_boosted(
            data, BoostingParams(n_trees=3, max_leaves=7, growth=GROWTH_LEAF, seed=0)
        )
        for tree in model.trees:
            leaves = []
            walk(tree, lambda n: leaves.append(1) if n.is_leaf else None)
            assert len(leaves) <= 7

    def test_fixed_seed_byte_identical_docs(self):
        data = random_data(seed=10)
        prm = BoostingParams(n_trees=8, seed=77, feature_fraction=0.6)
        doc1 = json.dumps(model_to_doc(fit_boosted(data, prm)), sort_keys=True)
        doc2 = json.dumps(model_to_doc(fit_boosted(data, prm)), sort_keys=True)
        assert doc1 == doc2

    def test_single_class_rejected(self):
        with pytest.raises(DataError, match="both classes"):
            fit_boosted(
                LabeledMatrix(np.zeros((10, 2)), np.zeros(10, dtype=int)),
                BoostingParams(n_trees=1),
            )

    def test_bad_params_rejected(self):
        with pytest.raises(DataError):
            BoostingParams(n_bins=1)
        with pytest.raises(DataError):
            BoostingParams(learning_rate=0.0)
        with pytest.raises(DataError):
            BoostingParams(growth="sideways")


def stump(feature, threshold, left_value, right_value, cover=(1.0, 1.0)):
    node = TreeNode(feature=feature, threshold=threshold, cover=cover[0] + cover[1])
    node.left = TreeNode(value=left_value, cover=cover[0])
    node.right = TreeNode(value=right_value, cover=cover[1])
    return node


def empty_bins(d):
    return BinIndex(tuple(np.empty(0) for _ in range(d)))


class TestPredict:
    def test_zero_tree_boosted_predicts_sigmoid_base(self):
        model = BoostedModel(
            trees=[], learning_rate=0.1, base_score=-1.5, growth=GROWTH_LEAF,
            params=BoostingParams(), bins=empty_bins(2), feature_names=("a", "b"),
        )
        probs = predict_proba(model, np.zeros((3, 2)))
        assert probs == pytest.approx([sigmoid(-1.5)] * 3)

    def test_zero_learning_rate_field_freezes_predictions(self):
        # The params type forbids eta=0, but a model constructed with a zero
        # learning-rate field must predict sigmoid(base_score) everywhere.
        model = BoostedModel(
            trees=[stump(0, 0.0, -3.0, 3.0)], learning_rate=0.0, base_score=0.4,
            growth=GROWTH_LEAF, params=BoostingParams(), bins=empty_bins(1),
            feature_names=("a",),
        )
        probs = predict_proba(model, np.array([[-1.0], [1.0]]))
        assert probs == pytest.approx([sigmoid(0.4)] * 2)

    def test_sigmoid_zero_is_half(self):
        assert sigmoid(0.0) == 0.5

    def test_forest_prediction_is_mean_of_trees(self):
        model = ForestModel(
            trees=[stump(0, 0.0, 0.2, 0.2), stump(0, 0.0, 0.6, 0.6)],
            params=ForestParams(), bins=empty_bins(1), feature_names=("a",),
        )
        assert predict_proba(model, np.array([[5.0]])) == pytest.approx([0.4])

    def test_width_mismatch_rejected(self):
        model = ForestModel(
            trees=[stump(0, 0.0, 0.1, 0.9)],
            params=ForestParams(), bins=empty_bins(1), feature_names=("a",),
        )
        with pytest.raises(SchemaError, match="columns"):
            predict_proba(model, np.zeros((2, 3)))


class TestForest:
    def test_single_tree_no_bootstrap_fits_separable_data(self):
        data = separable_1d()
        model = fit_forest(
            data,
            ForestParams(n_trees=1, max_depth=4, feature_fraction=1.0, bootstrap=False, seed=0),
        )
        pred = (predict_proba(model, data.features) >= 0.5).astype(int)
        assert np.array_equal(pred, data.labels)

    def test_identical_rows_predict_class_prior(self):
        # Unsplittable data: every tree is a single leaf holding the prior
        # (bootstrap off so the per-tree prior equals the data prior).
        x = np.ones((40, 3))
        y = np.array([1] * 10 + [0] * 30)
        model = fit_forest(
            LabeledMatrix(x, y), ForestParams(n_trees=5, bootstrap=False, seed=1)
        )
        assert predict_proba(model, x[:1])[0] == pytest.approx(0.25)

    def test_same_seed_identical_model_doc(self):
        data = random_data(seed=11)
        prm = ForestParams(n_trees=6, max_depth=4, feature_fraction=0.5, seed=3)
        a = json.dumps(model_to_doc(fit_forest(data, prm)), sort_keys=True)
        b = json.dumps(model_to_doc(fit_forest(data, prm)), sort_keys=True)
        assert a == b

    def test_leaf_values_are_class_fractions(self):
        data = random_data(seed=12)
        model = fit_forest(data, ForestParams(n_trees=3, max_depth=3, seed=0))

        def check(node):
            if node.is_leaf:
                assert 0.0 <= node.value <= 1.0

        for tree in model.trees:
            walk(tree, check)

    def test_forest_cover_bookkeeping(self):
        data = random_data(seed=13)
        model = fit_forest(data, ForestParams(n_trees=3, max_depth=4, seed=0))

        def check(node):
            if not node.is_leaf:
                assert node.cover == node.left.cover + node.right.cover

        for tree in model.trees:
            walk(tree, check)

    def test_single_class_rejected(self):
        with pytest.raises(DataError, match="both classes"):
            fit_forest(
                LabeledMatrix(np.zeros((10, 2)), np.ones(10, dtype=int)),
                ForestParams(n_trees=1),
            )

    def test_thread_count_does_not_change_model(self):
        data = random_data(seed=16)
        prm = ForestParams(n_trees=8, max_depth=4, feature_fraction=0.5, seed=2)
        a = json.dumps(model_to_doc(fit_forest(data, prm, threads=1)))
        b = json.dumps(model_to_doc(fit_forest(data, prm, threads=4)))
        assert a == b


class TestSerialization:
    def test_boosted_round_trip_predictions(self):
        data = random_data(seed=14)
        model = fit_boosted(data, BoostingParams(n_trees=6, seed=5))
        back = model_from_doc(json.loads(json.dumps(model_to_doc(model))))
        assert np.array_equal(
            predict_proba(model, data.features), predict_proba(back, data.features)
        )

    def test_forest_round_trip_predictions(self):
        data = random_data(seed=15)
        model = fit_forest(data, ForestParams(n_trees=4, max_depth=4, seed=5))
        back = model_from_doc(json.loads(json.dumps(model_to_doc(model))))
        assert np.array_equal(
            predict_proba(model, data.features), predict_proba(back, data.features)
        )

    def test_unknown_format_rejected(self):
        with pytest.raises(SchemaError, match="format"):
            model_from_doc({"format": "bogus/9"})
