"""Decision-tree ensembles: bagged Gini forest and second-order boosting.

All three learners share one substrate: features are quantile-binned once
per training run and every candidate split threshold is a bin edge. The
boosted learners grow trees either level-wise (split the whole frontier up
to a depth cap) or leaf-wise (repeatedly split the single leaf with the
highest positive gain until a leaf budget is reached), using the standard
second-order gain

    gain = 1/2 * [GL^2/(HL+lambda) + GR^2/(HR+lambda) - G^2/(H+lambda)] - gamma

with leaf values -G/(H+lambda). The forest grows bootstrap trees with
Gini-impurity splits over a random feature subset per split; its leaves
hold the class-1 fraction so predictions are probabilities.

Node cover is the hessian sum for boosted trees and the training row count
for forest trees; the SHAP layer uses it to weight descents through both
children when a feature is marginalized out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, SchemaError
from .sampling import LabeledMatrix
from .utils import parallel_map, sigmoid, stage_seed

GROWTH_LEVEL = "level_wise"
GROWTH_LEAF = "leaf_wise"


@dataclass
class TreeNode:
    """Split node (left/right set) or leaf (left is None)."""

    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0
    cover: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass(frozen=True)
class BoostingParams:
    n_trees: int = 100
    max_depth: int = 6  # level-wise depth cap
    max_leaves: int = 31  # leaf-wise leaf budget
    learning_rate: float = 0.1
    l2_regularization: float = 1.0
    min_split_gain: float = 0.0
    min_child_weight: float = 1.0
    n_bins: int = 255
    feature_fraction: float = 1.0
    seed: int = 0
    growth: str = GROWTH_LEAF

    def __post_init__(self):
        if self.n_trees < 1:
            raise DataError("n_trees must be >= 1")
        if self.n_bins < 2:
            raise DataError("n_bins must be >= 2")
        if not (0.0 < self.learning_rate <= 1.0):
            raise DataError("learning_rate must be in (0, 1]")
        if self.l2_regularization < 0 or self.min_split_gain < 0:
            raise DataError("regularization terms must be non-negative")
        if self.min_child_weight < 0:
            raise DataError("min_child_weight must be non-negative")
        if not (0.0 < self.feature_fraction <= 1.0):
            raise DataError("feature_fraction must be in (0, 1]")
        if self.growth not in (GROWTH_LEVEL, GROWTH_LEAF):
            raise DataError(f"unknown growth strategy {self.growth!r}")


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 10
    feature_fraction: float = 0.5  # per-split feature subsample
    bootstrap: bool = True
    n_bins: int = 255
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise DataError("n_trees must be >= 1")
        if self.max_depth < 1:
            raise DataError("max_depth must be >= 1")
        if not (0.0 < self.feature_fraction <= 1.0):
            raise DataError("feature_fraction must be in (0, 1]")
        if self.n_bins < 2:
            raise DataError("n_bins must be >= 2")


@dataclass(frozen=True)
class GradHessBuffer:
    g: np.ndarray
    h: np.ndarray


@dataclass(frozen=True)
class BinIndex:
    """Per-feature ascending bin edges fitted from training quantiles."""

    edges: tuple[np.ndarray, ...]

    def n_bins(self, feature: int) -> int:
        return self.edges[feature].size + 1


@dataclass
class BoostedModel:
    trees: list[TreeNode]
    learning_rate: float
    base_score: float
    growth: str
    params: BoostingParams
    bins: BinIndex
    feature_names: tuple[str, ...]
    train_loss: tuple[float, ...] = ()


@dataclass
class ForestModel:
    trees: list[TreeNode]
    params: ForestParams
    bins: BinIndex
    feature_names: tuple[str, ...]


def logistic_grad_hess(p, y) -> tuple:
    """Gradient and hessian of the logistic loss at probability ``p``."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    g = p - y
    h = p * (1.0 - p)
    if g.ndim == 0:
        return float(g), float(h)
    return g, h


def split_gain(gl, hl, gr, hr, l2_regularization: float, min_split_gain: float):
    """Second-order split gain; works on scalars or numpy arrays."""
    lam = l2_regularization
    g = gl + gr
    h = hl + hr
    raw = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - g * g / (h + lam))
    return raw - min_split_gain


def leaf_value(g_sum: float, h_sum: float, l2_regularization: float) -> float:
    denom = h_sum + l2_regularization
    if denom == 0:
        raise DataError("leaf value undefined: hessian sum plus lambda is zero")
    return -g_sum / denom


def fit_bins(matrix: np.ndarray, n_bins: int) -> BinIndex:
    """Quantile bin edges per feature; constant features get no edges."""
    if n_bins < 2:
        raise DataError("n_bins must be >= 2")
    edges = []
    for f in range(matrix.shape[1]):
        col = matrix[:, f]
        uniq = np.unique(col)
        if uniq.size <= 1:
            edges.append(np.empty(0, dtype=np.float64))
        elif uniq.size <= n_bins:
            edges.append((uniq[:-1] + uniq[1:]) / 2.0)
        else:
            qs = 100.0 * np.arange(1, n_bins) / n_bins
            cand = np.unique(np.percentile(col, qs))
            edges.append(cand.astype(np.float64))
    return BinIndex(tuple(edges))


def bin_matrix(bins: BinIndex, matrix: np.ndarray) -> np.ndarray:
    """Map raw values to bin ordinals; bin i covers (edge[i-1], edge[i]]."""
    out = np.zeros(matrix.shape, dtype=np.int32)
    for f, e in enumerate(bins.edges):
        if e.size:
            out[:, f] = np.searchsorted(e, matrix[:, f], side="left")
    return out


def build_histograms(
    binned: np.ndarray,
    rows: np.ndarray,
    bins: BinIndex,
    grad_hess: GradHessBuffer,
    features=None,
) -> list:
    """Per-feature (G, H, count) sums over bins for the rows in one node."""
    gi = grad_hess.g[rows]
    hi = grad_hess.h[rows]
    feats = range(binned.shape[1]) if features is None else features
    out = []
    for f in feats:
        codes = binned[rows, f]
        nb = bins.n_bins(f)
        out.append(
            (
                np.bincount(codes, weights=gi, minlength=nb),
                np.bincount(codes, weights=hi, minlength=nb),
                np.bincount(codes, minlength=nb).astype(np.int64),
            )
        )
    return out


def _best_split_boosted(binned, bins, rows, g, h, feats, prm, g_sum, h_sum):
    """Best (feature, edge index, gain) by second-order gain, or None.

    Ties resolve to the lowest feature index, then the lowest edge index,
    so scans are reproducible across runs.
    """
    best_gain = 0.0
    best = None
    gi = g[rows]
    hi = h[rows]
    n = rows.size
    lam = prm.l2_regularization
    for f in feats:
        e = bins.edges[f]
        if e.size == 0:
            continue
        codes = binned[rows, f]
        nb = e.size + 1
        gb = np.bincount(codes, weights=gi, minlength=nb)
        hb = np.bincount(codes, weights=hi, minlength=nb)
        cb = np.bincount(codes, minlength=nb)
        gl = np.cumsum(gb)[:-1]
        hl = np.cumsum(hb)[:-1]
        cl = np.cumsum(cb)[:-1]
        gr = g_sum - gl
        hr = h_sum - hl
        cr = n - cl
        with np.errstate(divide="ignore", invalid="ignore"):
            gains = split_gain(gl, hl, gr, hr, lam, prm.min_split_gain)
        valid = (
            (cl > 0)
            & (cr > 0)
            & (hl >= prm.min_child_weight)
            & (hr >= prm.min_child_weight)
        )
        gains = np.where(valid, gains, -np.inf)
        i = int(np.argmax(gains))
        if gains[i] > best_gain:
            best_gain = float(gains[i])
            best = (f, i, best_gain)
    return best


def _grow_levelwise(binned, bins, g, h, rows, feats, prm, depth, leaf_rows):
    g_sum = float(g[rows].sum())
    h_sum = float(h[rows].sum())
    best = (
        None
        if depth >= prm.max_depth
        else _best_split_boosted(binned, bins, rows, g, h, feats, prm, g_sum, h_sum)
    )
    if best is None:
        node = TreeNode(
            value=leaf_value(g_sum, h_sum, prm.l2_regularization), cover=h_sum
        )
        leaf_rows.append((node, rows))
        return node
    f, edge_idx, _ = best
    mask = binned[rows, f] <= edge_idx
    node = TreeNode(feature=int(f), threshold=float(bins.edges[f][edge_idx]), cover=h_sum)
    node.left = _grow_levelwise(
        binned, bins, g, h, rows[mask], feats, prm, depth + 1, leaf_rows
    )
    node.right = _grow_levelwise(
        binned, bins, g, h, rows[~mask], feats, prm, depth + 1, leaf_rows
    )
    return node


def _grow_leafwise(binned, bins, g, h, rows, feats, prm, leaf_rows):
    """Best-first growth: always split the pending leaf with maximal gain."""

    def make_entry(node, node_rows, created):
        g_sum = float(g[node_rows].sum())
        h_sum = float(h[node_rows].sum())
        node.cover = h_sum
        split = _best_split_boosted(
            binned, bins, node_rows, g, h, feats, prm, g_sum, h_sum
        )
        return {
            "node": node,
            "rows": node_rows,
            "g": g_sum,
            "h": h_sum,
            "split": split,
            "created": created,
        }

    root = TreeNode()
    pending = [make_entry(root, rows, 0)]
    created = 1
    n_leaves = 1
    while n_leaves < prm.max_leaves:
        indices = [i for i, e in enumerate(pending) if e["split"] is not None]
        if not indices:
            break
        chosen_i = max(indices, key=lambda i: (pending[i]["split"][2], -pending[i]["created"]))
        chosen = pending.pop(chosen_i)
        f, edge_idx, _ = chosen["split"]
        node = chosen["node"]
        node.feature = int(f)
        node.threshold = float(bins.edges[f][edge_idx])
        mask = binned[chosen["rows"], f] <= edge_idx
        node.left = TreeNode()
        node.right = TreeNode()
        pending.append(make_entry(node.left, chosen["rows"][mask], created))
        pending.append(make_entry(node.right, chosen["rows"][~mask], created + 1))
        created += 2
        n_leaves += 1
    for e in pending:
        node = e["node"]
        node.value = leaf_value(e["g"], e["h"], prm.l2_regularization)
        leaf_rows.append((node, e["rows"]))
    return root


def _log_loss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-15, 1.0 - 1e-15)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def _feature_subset(rng, n_features: int, fraction: float) -> np.ndarray:
    if fraction >= 1.0:
        return np.arange(n_features)
    m = max(1, int(round(fraction * n_features)))
    return np.sort(rng.choice(n_features, size=m, replace=False))


def fit_boosted(
    data: LabeledMatrix, params: BoostingParams, feature_names=None
) -> BoostedModel:
    """Train a boosted ensemble; records training log-loss after each round."""
    x = data.features
    y = data.labels.astype(np.float64)
    counts = np.bincount(data.labels, minlength=2)
    if counts[0] == 0 or counts[1] == 0:
        raise DataError("boosting requires both classes in the training data")

    bins = fit_bins(x, params.n_bins)
    binned = bin_matrix(bins, x)
    y_bar = float(y.mean())
    base = math.log(y_bar / (1.0 - y_bar))
    margin = np.full(x.shape[0], base, dtype=np.float64)
    all_rows = np.arange(x.shape[0])

    trees: list[TreeNode] = []
    losses: list[float] = []
    for t in range(params.n_trees):
        p = sigmoid(margin)
        g, h = logistic_grad_hess(p, y)
        rng = np.random.default_rng(stage_seed(params.seed, f"boost-tree-{t}"))
        feats = _feature_subset(rng, x.shape[1], params.feature_fraction)
        leaf_rows: list = []
        if params.growth == GROWTH_LEVEL:
            root = _grow_levelwise(binned, bins, g, h, all_rows, feats, params, 0, leaf_rows)
        else:
            root = _grow_leafwise(binned, bins, g, h, all_rows, feats, params, leaf_rows)
        for node, node_rows in leaf_rows:
            margin[node_rows] += params.learning_rate * node.value
        trees.append(root)
        losses.append(_log_loss(y, sigmoid(margin)))

    names = tuple(feature_names) if feature_names else tuple(
        f"f{i}" for i in range(x.shape[1])
    )
    if len(names) != x.shape[1]:
        raise SchemaError("feature name count does not match the matrix width")
    return BoostedModel(
        trees=trees,
        learning_rate=params.learning_rate,
        base_score=base,
        growth=params.growth,
        params=params,
        bins=bins,
        feature_names=names,
        train_loss=tuple(losses),
    )


def _best_split_gini(binned, bins, rows, y1, feats):
    """Best (feature, edge index) by Gini impurity decrease, or None."""
    n = rows.size
    yi = y1[rows]
    n1 = float(yi.sum())
    p1 = n1 / n
    parent = 1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1)
    best_gain = 0.0
    best = None
    for f in feats:
        e = bins.edges[f]
        if e.size == 0:
            continue
        codes = binned[rows, f]
        nb = e.size + 1
        c1 = np.bincount(codes, weights=yi, minlength=nb)
        c = np.bincount(codes, minlength=nb).astype(np.float64)
        c1l = np.cumsum(c1)[:-1]
        cl = np.cumsum(c)[:-1]
        c1r = n1 - c1l
        cr = n - cl
        with np.errstate(divide="ignore", invalid="ignore"):
            pl = c1l / cl
            pr = c1r / cr
            gini_l = 1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)
            gini_r = 1.0 - pr * pr - (1.0 - pr) * (1.0 - pr)
            gains = parent - (cl * gini_l + cr * gini_r) / n
        gains = np.where((cl > 0) & (cr > 0), gains, -np.inf)
        i = int(np.argmax(gains))
        if gains[i] > best_gain:
            best_gain = float(gains[i])
            best = (f, i)
    return best


def _grow_gini(binned, bins, rows, y1, rng, prm, depth):
    n = rows.size
    n1 = float(y1[rows].sum())
    if depth >= prm.max_depth or n1 == 0.0 or n1 == float(n):
        return TreeNode(value=n1 / n, cover=float(n))
    feats = _feature_subset(rng, binned.shape[1], prm.feature_fraction)
    best = _best_split_gini(binned, bins, rows, y1, feats)
    if best is None:
        return TreeNode(value=n1 / n, cover=float(n))
    f, edge_idx = best
    mask = binned[rows, f] <= edge_idx
    node = TreeNode(feature=int(f), threshold=float(bins.edges[f][edge_idx]), cover=float(n))
    node.left = _grow_gini(binned, bins, rows[mask], y1, rng, prm, depth + 1)
    node.right = _grow_gini(binned, bins, rows[~mask], y1, rng, prm, depth + 1)
    return node


def fit_forest(
    data: LabeledMatrix, params: ForestParams, threads: int = 1, feature_names=None
) -> ForestModel:
    """Train a bagged Gini forest; per-tree streams derive from (seed, index)."""
    x = data.features
    y1 = data.labels.astype(np.float64)
    counts = np.bincount(data.labels, minlength=2)
    if counts[0] == 0 or counts[1] == 0:
        raise DataError("forest requires both classes in the training data")

    bins = fit_bins(x, params.n_bins)
    binned = bin_matrix(bins, x)
    n = x.shape[0]

    def grow_one(t: int) -> TreeNode:
        rng = np.random.default_rng(stage_seed(params.seed, f"forest-tree-{t}"))
        rows = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        return _grow_gini(binned, bins, rows, y1, rng, params, 0)

    trees = parallel_map(grow_one, range(params.n_trees), threads)
    names = tuple(feature_names) if feature_names else tuple(
        f"f{i}" for i in range(x.shape[1])
    )
    if len(names) != x.shape[1]:
        raise SchemaError("feature name count does not match the matrix width")
    return ForestModel(trees=trees, params=params, bins=bins, feature_names=names)


def _predict_tree(node: TreeNode, x: np.ndarray, rows: np.ndarray, out: np.ndarray):
    if node.left is None:
        out[rows] = node.value
        return
    mask = x[rows, node.feature] <= node.threshold
    _predict_tree(node.left, x, rows[mask], out)
    _predict_tree(node.right, x, rows[~mask], out)


def predict_margin(model, matrix: np.ndarray) -> np.ndarray:
    """Additive score: log-odds for boosted models, probability for forests."""
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[1] != len(model.feature_names):
        raise SchemaError(
            f"matrix has {x.shape[1]} columns, model expects {len(model.feature_names)}"
        )
    rows = np.arange(x.shape[0])
    buf = np.empty(x.shape[0], dtype=np.float64)
    if isinstance(model, BoostedModel):
        total = np.full(x.shape[0], model.base_score, dtype=np.float64)
        for tree in model.trees:
            _predict_tree(tree, x, rows, buf)
            total += model.learning_rate * buf
        return total
    if isinstance(model, ForestModel):
        total = np.zeros(x.shape[0], dtype=np.float64)
        for tree in model.trees:
            _predict_tree(tree, x, rows, buf)
            total += buf
        return total / len(model.trees)
    raise SchemaError(f"unknown model type {type(model).__name__}")


def predict_proba(model, matrix: np.ndarray) -> np.ndarray:
    """Default probability per row, in [0, 1]."""
    margin = predict_margin(model, matrix)
    if isinstance(model, BoostedModel):
        return sigmoid(margin)
    return margin


MODEL_FORMAT = "riskforge.model/1"


def _node_to_doc(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"value": node.value, "cover": node.cover}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "cover": node.cover,
        "left": _node_to_doc(node.left),
        "right": _node_to_doc(node.right),
    }


def _node_from_doc(doc: dict) -> TreeNode:
    if "value" in doc:
        return TreeNode(value=doc["value"], cover=doc["cover"])
    return TreeNode(
        feature=doc["feature"],
        threshold=doc["threshold"],
        cover=doc["cover"],
        left=_node_from_doc(doc["left"]),
        right=_node_from_doc(doc["right"]),
    )


def model_to_doc(model) -> dict:
    doc = {
        "format": MODEL_FORMAT,
        "kind": "boosted" if isinstance(model, BoostedModel) else "forest",
        "feature_names": list(model.feature_names),
        "bin_edges": [e.tolist() for e in model.bins.edges],
        "trees": [_node_to_doc(t) for t in model.trees],
    }
    if isinstance(model, BoostedModel):
        p = model.params
        doc["growth"] = model.growth
        doc["base_score"] = model.base_score
        doc["learning_rate"] = model.learning_rate
        doc["train_loss"] = list(model.train_loss)
        doc["params"] = {
            "n_trees": p.n_trees,
            "max_depth": p.max_depth,
            "max_leaves": p.max_leaves,
            "learning_rate": p.learning_rate,
            "l2_regularization": p.l2_regularization,
            "min_split_gain": p.min_split_gain,
            "min_child_weight": p.min_child_weight,
            "n_bins": p.n_bins,
            "feature_fraction": p.feature_fraction,
            "seed": p.seed,
            "growth": p.growth,
        }
    else:
        p = model.params
        doc["params"] = {
            "n_trees": p.n_trees,
            "max_depth": p.max_depth,
            "feature_fraction": p.feature_fraction,
            "bootstrap": p.bootstrap,
            "n_bins": p.n_bins,
            "seed": p.seed,
        }
    return doc


def model_from_doc(doc: dict):
    if doc.get("format") != MODEL_FORMAT:
        raise SchemaError(f"unsupported model format {doc.get('format')!r}")
    bins = BinIndex(tuple(np.asarray(e, dtype=np.float64) for e in doc["bin_edges"]))
    trees = [_node_from_doc(t) for t in doc["trees"]]
    names = tuple(doc["feature_names"])
    if doc["kind"] == "boosted":
        params = BoostingParams(**doc["params"])
        return BoostedModel(
            trees=trees,
            learning_rate=doc["learning_rate"],
            base_score=doc["base_score"],
            growth=doc["growth"],
            params=params,
            bins=bins,
            feature_names=names,
            train_loss=tuple(doc.get("train_loss", ())),
        )
    if doc["kind"] == "forest":
        return ForestModel(
            trees=trees, params=ForestParams(**doc["params"]), bins=bins, feature_names=names
        )
    raise SchemaError(f"unknown model kind {doc['kind']!r}")
