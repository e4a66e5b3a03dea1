import numpy as np
import pytest

from riskforge.errors import DataError, SchemaError
from riskforge.explain import (
    LimeParams,
    TreeShapExplainer,
    brute_shapley,
    lime_explain,
    shap_summary,
    tree_shap,
)
from riskforge.sampling import LabeledMatrix
from riskforge.trees import (
    BinIndex,
    BoostedModel,
    BoostingParams,
    ForestModel,
    ForestParams,
    TreeNode,
    fit_boosted,
    predict_margin,
)
from riskforge.utils import sigmoid


def empty_bins(d):
    return BinIndex(tuple(np.empty(0) for _ in range(d)))


def boosted(trees, d, eta=1.0, base=0.0):
    return BoostedModel(
        trees=trees, learning_rate=eta, base_score=base, growth="leaf_wise",
        params=BoostingParams(), bins=empty_bins(d),
        feature_names=tuple(f"f{i}" for i in range(d)),
    )


def forest(trees, d):
    return ForestModel(
        trees=trees, params=ForestParams(), bins=empty_bins(d),
        feature_names=tuple(f"f{i}" for i in range(d)),
    )


def stump(feature, threshold, left_value, right_value, covers=(1.0, 1.0)):
    node = TreeNode(feature=feature, threshold=threshold, cover=covers[0] + covers[1])
    node.left = TreeNode(value=left_value, cover=covers[0])
    node.right = TreeNode(value=right_value, cover=covers[1])
    return node


def random_model(rng, d=None, n_trees=None, max_depth=4, kind=None):
    d = d or int(rng.integers(2, 9))
    n_trees = n_trees or int(rng.integers(1, 5))

    def tree(depth, cover):
        if depth == 0 or cover < 2 or rng.random() < 0.3:
            return TreeNode(value=float(rng.normal()), cover=cover)
        frac = float(rng.uniform(0.2, 0.8))
        node = TreeNode(
            feature=int(rng.integers(d)), threshold=float(rng.normal()), cover=cover
        )
        node.left = tree(depth - 1, cover * frac)
        node.right = tree(depth - 1, cover * (1 - frac))
        return node

    trees = [tree(max_depth, float(rng.uniform(10, 100))) for _ in range(n_trees)]
    kind = kind or ("boosted" if rng.random() < 0.5 else "forest")
    if kind == "boosted":
        return boosted(trees, d, eta=float(rng.uniform(0.05, 1.0)), base=float(rng.normal()))
    return forest(trees, d)


class TestTreeShapExamples:
    def test_single_stump_full_credit_to_split_feature(self):
        wa, wb = 3.0, 1.0
        a, b = 0.2, 0.8
        model = boosted([stump(0, 0.0, a, b, covers=(wa, wb))], d=3)
        base = (wa * a + wb * b) / (wa + wb)
        for x, leaf in (([-1.0, 9.0, 9.0], a), ([1.0, 9.0, 9.0], b)):
            exp = tree_shap(model, np.array(x))
            assert exp.base_value == pytest.approx(base, abs=1e-12)
            assert exp.phi[0] == pytest.approx(leaf - base, abs=1e-12)
            assert exp.phi[1] == 0.0 and exp.phi[2] == 0.0

    def test_depth_two_tree_matches_brute_oracle(self):
        # Covers mimic a 4-row training set: 2/1/1 rows in the leaves.
        root = TreeNode(feature=0, threshold=0.0, cover=4.0)
        root.left = TreeNode(value=0.1, cover=2.0)
        inner = TreeNode(feature=1, threshold=0.5, cover=2.0)
        inner.left = TreeNode(value=0.6, cover=1.0)
        inner.right = TreeNode(value=0.9, cover=1.0)
        root.right = inner
        model = boosted([root], d=2, eta=0.7, base=-0.3)
        for x in ([-1.0, 0.0], [1.0, 0.0], [1.0, 1.0], [-1.0, 1.0]):
            fast = tree_shap(model, np.array(x))
            slow = brute_shapley(model, np.array(x))
            assert fast.phi == pytest.approx(slow.phi, abs=1e-12)
            assert fast.base_value == pytest.approx(slow.base_value, abs=1e-12)
            assert fast.margin == pytest.approx(slow.margin, abs=1e-12)

    def test_zero_tree_model_all_phi_zero(self):
        model = boosted([], d=3, base=-1.7)
        exp = tree_shap(model, np.zeros(3))
        assert np.all(exp.phi == 0.0)
        assert exp.base_value == -1.7
        assert exp.margin == -1.7


class TestOracleEquivalence:
    def test_random_models_match_brute_shapley(self):
        rng = np.random.default_rng(123)
        for _ in range(25):
            model = random_model(rng)
            x = rng.normal(size=len(model.feature_names))
            fast = tree_shap(model, x)
            slow = brute_shapley(model, x)
            assert fast.phi == pytest.approx(slow.phi, abs=1e-9)
            assert fast.base_value == pytest.approx(slow.base_value, abs=1e-9)

    def test_brute_coalition_extremes(self):
        rng = np.random.default_rng(7)
        model = random_model(rng, d=4, kind="boosted")
        x = rng.normal(size=4)
        exp = brute_shapley(model, x)
        assert exp.margin == pytest.approx(
            float(predict_margin(model, x.reshape(1, -1))[0]), abs=1e-9
        )
        assert exp.base_value == pytest.approx(
            TreeShapExplainer(model).base_value, abs=1e-9
        )

    def test_brute_refuses_wide_models(self):
        model = boosted([stump(0, 0.0, 0.0, 1.0)], d=16)
        with pytest.raises(DataError, match="15"):
            brute_shapley(model, np.zeros(16))


class TestShapProperties:
    def test_additivity_on_trained_model(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(400, 6))
        y = (rng.random(400) < sigmoid(x[:, 0] - x[:, 1])).astype(int)
        model = fit_boosted(LabeledMatrix(x, y), BoostingParams(n_trees=20, seed=0))
        explainer = TreeShapExplainer(model)
        margins = predict_margin(model, x[:50])
        for i in range(50):
            exp = explainer.explain(x[i])
            assert exp.base_value + exp.phi.sum() == pytest.approx(
                margins[i], abs=1e-6
            )

    def test_symmetric_features_get_equal_credit(self):
        # Two stumps, one per feature, identical geometry; at a symmetric
        # input both features must receive identical attribution.
        t0 = stump(0, 0.0, -1.0, 1.0, covers=(2.0, 2.0))
        t1 = stump(1, 0.0, -1.0, 1.0, covers=(2.0, 2.0))
        model = boosted([t0, t1], d=2, eta=0.5, base=0.0)
        exp = tree_shap(model, np.array([-1.0, -1.0]))
        assert exp.phi[0] == pytest.approx(exp.phi[1], abs=1e-12)

    def test_dummy_feature_gets_exactly_zero(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            model = random_model(rng, d=6)
            used = set()
            def collect(node):
                if not node.is_leaf:
                    used.add(node.feature)
                    collect(node.left)
                    collect(node.right)
            for t in model.trees:
                collect(t)
            x = rng.normal(size=6)
            exp = tree_shap(model, x)
            for f in range(6):
                if f not in used:
                    assert exp.phi[f] == 0.0

    def test_forest_scale_is_probability(self):
        model = forest([stump(0, 0.0, 0.2, 0.8)], d=1)
        exp = tree_shap(model, np.array([1.0]))
        assert exp.scale == "probability"
        assert exp.base_value + exp.phi.sum() == pytest.approx(0.8, abs=1e-12)

    def test_width_mismatch_rejected(self):
        model = boosted([stump(0, 0.0, 0.1, 0.9)], d=1)
        with pytest.raises(SchemaError, match="features"):
            tree_shap(model, np.zeros(3))


class TestShapSummary:
    def test_single_instance_mean_abs_is_abs_phi(self):
        model = boosted([stump(0, 0.0, -0.5, 0.5)], d=2)
        x = np.array([[1.0, 3.0]])
        summary = shap_summary(model, x)
        exp = tree_shap(model, x[0])
        assert summary.mean_abs == pytest.approx(np.abs(exp.phi))

    def test_unused_feature_ranks_last_with_zero(self):
        model = boosted([stump(0, 0.0, -0.5, 0.5)], d=3)
        rng = np.random.default_rng(0)
        summary = shap_summary(model, rng.normal(size=(20, 3)))
        assert summary.mean_abs[1] == 0.0 and summary.mean_abs[2] == 0.0
        assert summary.ranking[0] == 0

    def test_ranking_is_permutation(self):
        rng = np.random.default_rng(1)
        model = random_model(rng, d=5)
        summary = shap_summary(model, rng.normal(size=(10, 5)))
        assert sorted(summary.ranking) == list(range(5))

    def test_additivity_columns_stored(self):
        rng = np.random.default_rng(2)
        model = random_model(rng, d=4, kind="boosted")
        x = rng.normal(size=(15, 4))
        summary = shap_summary(model, x)
        recon = summary.base_value + summary.shap_values.sum(axis=1)
        assert recon == pytest.approx(summary.margins, abs=1e-6)

    def test_empty_sample_rejected(self):
        model = boosted([stump(0, 0.0, 0.0, 1.0)], d=2)
        with pytest.raises(DataError):
            shap_summary(model, np.zeros((0, 2)))


class TestLime:
    def test_single_active_feature_dominates(self):
        d = 5
        black_box = lambda z: sigmoid(2.0 * z[:, 1])
        exp = lime_explain(
            black_box, np.zeros(d), (np.zeros(d), np.ones(d)),
            LimeParams(n_samples=4000, seed=3),
        )
        top_name, top_weight = exp.weights[0]
        assert top_name == "f1"
        for _, w in exp.weights[1:]:
            assert abs(w) < 0.1 * abs(top_weight)

    def test_constant_black_box(self):
        d = 4
        exp = lime_explain(
            lambda z: np.full(len(z), 0.7), np.zeros(d),
            (np.zeros(d), np.ones(d)), LimeParams(n_samples=500, seed=1),
        )
        assert exp.intercept == pytest.approx(0.7, abs=1e-6)
        for _, w in exp.weights:
            assert abs(w) < 1e-6
        assert exp.r2 == 1.0

    def test_same_seed_identical_explanation(self):
        d = 3
        bb = lambda z: sigmoid(z[:, 0] - 2 * z[:, 2])
        kwargs = dict(
            feature_stats=(np.zeros(d), np.ones(d)),
            params=LimeParams(n_samples=800, seed=11),
        )
        a = lime_explain(bb, np.zeros(d), **kwargs)
        b = lime_explain(bb, np.zeros(d), **kwargs)
        assert a.weights == b.weights
        assert a.intercept == b.intercept and a.r2 == b.r2

    def test_linear_logit_sign_recovery(self):
        d = 4
        coefs = np.array([1.5, -2.0, 0.8, -0.6])
        bb = lambda z: sigmoid(z @ coefs)
        exp = lime_explain(
            bb, np.zeros(d), (np.zeros(d), np.ones(d)),
            LimeParams(n_samples=6000, seed=21),
        )
        got = dict(exp.weights)
        for i, c in enumerate(coefs):
            assert np.sign(got[f"f{i}"]) == np.sign(c)

    def test_top_k_truncation(self):
        d = 8
        bb = lambda z: sigmoid(z.sum(axis=1))
        exp = lime_explain(
            bb, np.zeros(d), (np.zeros(d), np.ones(d)),
            LimeParams(n_samples=2000, seed=2, top_k=3),
        )
        assert len(exp.weights) == 3

    def test_too_few_samples_rejected(self):
        d = 6
        with pytest.raises(DataError, match="n_samples"):
            lime_explain(
                lambda z: np.zeros(len(z)), np.zeros(d),
                (np.zeros(d), np.ones(d)), LimeParams(n_samples=5, seed=0),
            )

    def test_works_on_fitted_model(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(300, 3))
        y = (rng.random(300) < sigmoid(2 * x[:, 0])).astype(int)
        model = fit_boosted(LabeledMatrix(x, y), BoostingParams(n_trees=10, seed=0))
        exp = lime_explain(
            model, x[0], (x.mean(axis=0), x.std(axis=0)),
            LimeParams(n_samples=1000, seed=5),
            feature_names=("a", "b", "c"),
        )
        assert exp.weights[0][0] in ("a", "b", "c")
        assert 0.0 <= exp.prediction <= 1.0
