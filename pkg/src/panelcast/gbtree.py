"""Second-order gradient-boosted regression trees.

Squared-error boosting with Newton leaf weights, L1/L2 leaf regularization,
a per-leaf complexity penalty, exact greedy split search, shrinkage and
row/column subsampling. Stored leaf weights are unshrunk; the ensemble
predicts ``base_score + learning_rate * sum(tree(x))``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterator, Optional, Union

import numpy as np


class GbtError(ValueError):
    pass


class DegenerateDenominatorError(GbtError):
    pass


class DataError(GbtError):
    pass


class ShapeError(GbtError):
    pass


# Table order of the tuning parameters; grid search enumerates in this order.
PARAM_ORDER = (
    "n_estimators",
    "learning_rate",
    "max_depth",
    "min_child_weight",
    "gamma",
    "subsample",
    "colsample_bytree",
    "colsample_bylevel",
    "reg_lambda",
    "reg_alpha",
    "scale_pos_weight",
)


@dataclass(frozen=True)
class GbtParams:
    n_estimators: int = 100
    learning_rate: float = 0.3
    max_depth: int = 6
    min_child_weight: float = 1.0
    gamma: float = 0.0
    subsample: float = 1.0
    colsample_bytree: float = 1.0
    colsample_bylevel: float = 1.0
    reg_lambda: float = 1.0
    reg_alpha: float = 0.0
    # classification class-balance knob; accepted for config parity, unused by
    # the squared-error objective
    scale_pos_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        def check(ok, msg):
            if not ok:
                raise GbtError(msg)

        check(self.n_estimators >= 1, "n_estimators must be >= 1")
        check(0 < self.learning_rate <= 1, "learning_rate must be in (0, 1]")
        check(self.max_depth >= 0, "max_depth must be >= 0")
        check(self.min_child_weight >= 0, "min_child_weight must be >= 0")
        check(self.gamma >= 0, "gamma must be >= 0")
        for name in ("subsample", "colsample_bytree", "colsample_bylevel"):
            check(0 < getattr(self, name) <= 1, f"{name} must be in (0, 1]")
        check(self.reg_lambda >= 0, "reg_lambda must be >= 0")
        check(self.reg_alpha >= 0, "reg_alpha must be >= 0")
        check(self.scale_pos_weight > 0, "scale_pos_weight must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "GbtParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise GbtError(f"unknown parameters: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class Leaf:
    weight: float


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"
    gain: float


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True)
class GradHess:
    g: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        h = np.asarray(self.h, dtype=float)
        if g.shape != h.shape or g.ndim != 1:
            raise ShapeError("g and h must be 1-d arrays of equal length")
        if (h < 0).any():
            raise GbtError("hessians must be non-negative")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", h)

    @classmethod
    def squared_error(cls, targets, preds) -> "GradHess":
        preds = np.asarray(preds, dtype=float)
        return cls(preds - np.asarray(targets, dtype=float), np.ones_like(preds))


@dataclass
class TreeEnsemble:
    base_score: float
    learning_rate: float
    trees: list
    n_features: int

    def predict(self, features) -> np.ndarray:
        X = _as_matrix(features, self.n_features)
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree_predict(tree, X)
        return self.base_score + self.learning_rate * total

    def to_json(self) -> str:
        return json.dumps({
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "n_features": self.n_features,
            "trees": [_node_to_dict(t) for t in self.trees],
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TreeEnsemble":
        data = json.loads(text)
        return cls(
            float(data["base_score"]),
            float(data["learning_rate"]),
            [_node_from_dict(t) for t in data["trees"]],
            int(data["n_features"]),
        )


def _node_to_dict(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": node.weight}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "gain": node.gain,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(data: dict) -> TreeNode:
    if "leaf" in data:
        return Leaf(float(data["leaf"]))
    return Split(
        int(data["feature"]),
        float(data["threshold"]),
        _node_from_dict(data["left"]),
        _node_from_dict(data["right"]),
        float(data["gain"]),
    )


def _as_matrix(features, n_features: Optional[int] = None) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-d feature matrix, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise ShapeError(f"expected {n_features} features, got {X.shape[1]}")
    return X


def _soft_threshold(G, alpha):
    return np.sign(G) * np.maximum(np.abs(G) - alpha, 0.0)


def leaf_weight(G: float, H: float, reg_lambda: float, alpha: float = 0.0) -> float:
    """Newton-optimal leaf value ``-T(G) / (H + lambda)``, T the L1 soft threshold."""
    if H < 0:
        raise GbtError("hessian sum must be non-negative")
    denom = H + reg_lambda
    if denom == 0:
        raise DegenerateDenominatorError("H + lambda == 0")
    if alpha == 0:
        return -G / denom
    return float(-_soft_threshold(G, alpha) / denom)


def _score(G, H, reg_lambda, alpha):
    if alpha:
        G = _soft_threshold(G, alpha)
    return G * G / (H + reg_lambda)


def split_gain(GL, HL, GR, HR, reg_lambda, gamma, alpha=0.0):
    """Loss reduction of splitting a node into (L, R), net of the leaf penalty."""
    if np.any(np.asarray(HL) < 0) or np.any(np.asarray(HR) < 0):
        raise GbtError("hessian sums must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = 0.5 * (
            _score(GL, HL, reg_lambda, alpha)
            + _score(GR, HR, reg_lambda, alpha)
            - _score(GL + GR, HL + HR, reg_lambda, alpha)
        ) - gamma
    return gain


def _n_sampled(fraction: float, n: int) -> int:
    return max(1, min(n, int(round(fraction * n))))


def fit_tree(features, gh: GradHess, params: GbtParams, rng: np.random.Generator,
             rows=None) -> TreeNode:
    """Grow one regression tree by exact greedy search.

    ``rows`` restricts growth to a subset of row indices (row subsampling);
    column subsampling per tree and per level draws from ``rng``.
    """
    X = _as_matrix(features)
    n, n_feat = X.shape
    if len(gh.g) != n or n == 0:
        raise ShapeError(f"{n} feature rows but {len(gh.g)} gradient entries")
    rows = np.arange(n) if rows is None else np.sort(np.asarray(rows, dtype=np.int64))
    g, h = gh.g, gh.h
    lam, alpha, gamma, mcw = params.reg_lambda, params.reg_alpha, params.gamma, params.min_child_weight

    tree_feats = np.arange(n_feat)
    if params.colsample_bytree < 1:
        tree_feats = np.sort(rng.choice(n_feat, _n_sampled(params.colsample_bytree, n_feat), replace=False))
    level_feats = []
    for _ in range(params.max_depth):
        if params.colsample_bylevel < 1:
            k = _n_sampled(params.colsample_bylevel, len(tree_feats))
            level_feats.append(np.sort(rng.choice(tree_feats, k, replace=False)))
        else:
            level_feats.append(tree_feats)

    # presort once; each node filters the sorted orders by membership
    order = np.stack([rows[np.argsort(X[rows, f], kind="stable")] for f in range(n_feat)])
    member = np.zeros(n, dtype=bool)

    def grow(node_rows: np.ndarray, depth: int) -> TreeNode:
        if len(node_rows) == 0:
            raise GbtError("empty node reached during tree growth")
        G = float(g[node_rows].sum())
        H = float(h[node_rows].sum())
        if depth >= params.max_depth or len(node_rows) < 2 or H < 2 * mcw:
            return Leaf(leaf_weight(G, H, lam, alpha))

        feats = level_feats[depth]
        member[:] = False
        member[node_rows] = True
        sub = order[feats]
        idx = sub[member[sub]].reshape(len(feats), len(node_rows))
        v = X[idx, feats[:, None]]
        GL = np.cumsum(g[idx], axis=1)[:, :-1]
        HL = np.cumsum(h[idx], axis=1)[:, :-1]
        ok = (v[:, 1:] > v[:, :-1]) & (HL >= mcw) & (H - HL >= mcw)
        if not ok.any():
            return Leaf(leaf_weight(G, H, lam, alpha))
        gains = split_gain(GL, HL, G - GL, H - HL, lam, gamma, alpha)
        gains = np.where(ok & ~np.isnan(gains), gains, -np.inf)
        # row-major argmax: lowest feature, then lowest threshold, wins ties
        best = int(np.argmax(gains))
        fi, k = divmod(best, gains.shape[1])
        if not gains[fi, k] > 0:
            return Leaf(leaf_weight(G, H, lam, alpha))
        feat = int(feats[fi])
        lo, hi = v[fi, k], v[fi, k + 1]
        thr = 0.5 * (lo + hi)
        if not lo < thr <= hi:
            thr = hi
        go_left = X[node_rows, feat] < thr
        left = grow(node_rows[go_left], depth + 1)
        right = grow(node_rows[~go_left], depth + 1)
        return Split(feat, float(thr), left, right, float(gains[fi, k]))

    return grow(rows, 0)


def tree_predict(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))

    def walk(node, idx):
        if isinstance(node, Leaf):
            out[idx] = node.weight
            return
        left = X[idx, node.feature] < node.threshold
        walk(node.left, idx[left])
        walk(node.right, idx[~left])

    walk(node, np.arange(len(X)))
    return out


def fit(features, targets, params: GbtParams) -> TreeEnsemble:
    X = _as_matrix(features)
    y = np.asarray(targets, dtype=float)
    if len(X) < 2:
        raise DataError("need at least 2 rows to fit")
    if y.shape != (len(X),):
        raise ShapeError(f"{len(X)} feature rows but targets have shape {y.shape}")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise DataError("features and targets must be finite")

    rng = np.random.default_rng(params.seed)
    n = len(X)
    base = float(y.mean())
    preds = np.full(n, base)
    trees = []
    for _ in range(params.n_estimators):
        gh = GradHess.squared_error(y, preds)
        rows = None
        if params.subsample < 1:
            rows = rng.choice(n, _n_sampled(params.subsample, n), replace=False)
        tree = fit_tree(X, gh, params, rng, rows)
        trees.append(tree)
        preds = preds + params.learning_rate * tree_predict(tree, X)
    return TreeEnsemble(base, params.learning_rate, trees, X.shape[1])


def predict(model: TreeEnsemble, row) -> float:
    row = np.asarray(row, dtype=float)
    if row.shape != (model.n_features,):
        raise ShapeError(f"expected a row of {model.n_features} features, got shape {row.shape}")
    return float(model.predict(row[None, :])[0])


def staged_predict(model: TreeEnsemble, features) -> Iterator[np.ndarray]:
    """Predictions after 0, 1, ..., len(trees) boosting rounds."""
    X = _as_matrix(features, model.n_features)
    total = np.zeros(len(X))
    yield model.base_score + model.learning_rate * total
    for tree in model.trees:
        total = total + tree_predict(tree, X)
        yield model.base_score + model.learning_rate * total


def iter_leaves(node: TreeNode) -> Iterator[Leaf]:
    if isinstance(node, Leaf):
        yield node
    else:
        yield from iter_leaves(node.left)
        yield from iter_leaves(node.right)


def tree_depth(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def regularization(tree: TreeNode, gamma: float, reg_lambda: float) -> float:
    weights = [leaf.weight for leaf in iter_leaves(tree)]
    return gamma * len(weights) + 0.5 * reg_lambda * math.fsum(w * w for w in weights)


def objective_value(model: TreeEnsemble, features, targets, gamma: float, reg_lambda: float) -> float:
    """Training squared error plus the complexity penalty summed over trees."""
    y = np.asarray(targets, dtype=float)
    preds = model.predict(features)
    if y.shape != preds.shape:
        raise ShapeError(f"targets shape {y.shape} does not match {preds.shape} predictions")
    loss = float(np.sum((y - preds) ** 2))
    return loss + sum(regularization(t, gamma, reg_lambda) for t in model.trees)
