"""Random-forest soft classifier (CART, Gini, bootstrap) and the train/validation/test split."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import Dataset, LabelSpace

MODEL_FORMAT = "happyfair-forest"
MODEL_VERSION = 1

SPLIT_FRACTIONS = (20, 16)  # percent of the data for train and validation; test gets the rest


def split_dataset(d: Dataset, seed: int):
    """Shuffle with ``seed`` and cut into train (20%), validation (16%) and test (rest)."""
    n = len(d)
    if n < 10:
        raise ValueError("need at least 10 samples to split")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = n * SPLIT_FRACTIONS[0] // 100
    n_val = n * SPLIT_FRACTIONS[1] // 100
    return (
        d.take(perm[:n_train]),
        d.take(perm[n_train:n_train + n_val]),
        d.take(perm[n_train + n_val:]),
    )


# -- encoding -----------------------------------------------------------------


@dataclass(frozen=True)
class Encoder:
    """Numeric columns pass through; categorical columns become one-hot blocks."""

    schema: dict
    include_group: bool = True
    group_features: tuple = ()

    @property
    def used(self):
        return [n for n in self.schema if self.include_group or n not in self.group_features]

    @property
    def columns(self) -> list:
        cols = []
        for name in self.used:
            cats = self.schema[name]
            cols += [name] if cats is None else [f"{name}={c}" for c in cats]
        if self.include_group:
            cols.append("z")
        return cols

    def transform(self, features, z) -> np.ndarray:
        blocks = []
        for name in self.used:
            if name not in features:
                raise ValueError(f"missing feature {name!r}")
            col = np.asarray(features[name])
            cats = self.schema[name]
            if cats is None:
                blocks.append(col.astype(float)[:, None])
            else:
                col = col.astype(object)
                blocks.append(np.stack([(col == c) for c in cats], axis=1).astype(float))
        if self.include_group:
            blocks.append(np.asarray(z, dtype=float)[:, None])
        return np.hstack(blocks) if blocks else np.zeros((len(z), 0))


# -- trees --------------------------------------------------------------------


@dataclass(frozen=True)
class ForestConfig:
    tree_count: int = 100
    max_depth: int = 12
    min_leaf: int = 1
    seed: int = 0
    include_group: bool = True
    group_features: tuple = ("sex",)

    def __post_init__(self):
        if self.tree_count < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ValueError("tree_count, max_depth and min_leaf must be positive")


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (nodes, K) class frequencies

    def apply(self, X) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple
    label_space: LabelSpace
    encoder: Encoder
    config: ForestConfig = field(default_factory=ForestConfig)


def _best_split(X, y_onehot, idx, features, min_leaf):
    """Gini-optimal (feature, threshold) among ``features`` or None."""
    n = len(idx)
    best = None
    best_score = -math.inf
    total = y_onehot[idx].sum(axis=0)
    parent = (total ** 2).sum() / n
    for f in features:
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        if sv[0] == sv[-1]:
            continue
        left = np.cumsum(y_onehot[idx[order]], axis=0)[:-1]
        n_left = np.arange(1, n, dtype=float)
        right = total - left
        n_right = n - n_left
        ok = (sv[:-1] < sv[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
        if not ok.any():
            continue
        # maximising sum c^2/n over both children minimises weighted Gini impurity
        score = (left ** 2).sum(axis=1) / n_left + (right ** 2).sum(axis=1) / n_right
        score = np.where(ok, score, -math.inf)
        i = int(np.argmax(score))
        if score[i] > best_score:
            best_score = score[i]
            best = (f, 0.5 * (sv[i] + sv[i + 1]))
    if best is None or best_score <= parent + 1e-12:
        return None
    return best


def _grow_tree(X, y, k, cfg, rng) -> Tree:
    n, d = X.shape
    y_onehot = np.eye(k)[y]
    mtry = max(1, int(math.sqrt(d)))
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(y_onehot[idx].mean(axis=0))
        return len(feature) - 1

    root = np.arange(n)
    stack = [(new_node(root), root, 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= cfg.max_depth or len(idx) < 2 * cfg.min_leaf or value[node].max() == 1.0:
            continue
        # visit features in random order until mtry non-constant ones were tried
        order = rng.permutation(d)
        tried, split = [], None
        for f in order:
            col = X[idx, f]
            if col.min() == col.max():
                continue
            tried.append(f)
            if len(tried) == mtry:
                break
        if tried:
            split = _best_split(X, y_onehot, idx, tried, cfg.min_leaf)
        if split is None:
            continue
        f, thr = split
        mask = X[idx, f] <= thr
        feature[node], threshold[node] = int(f), float(thr)
        lchild, rchild = new_node(idx[mask]), new_node(idx[~mask])
        left[node], right[node] = lchild, rchild
        stack.append((rchild, idx[~mask], depth + 1))
        stack.append((lchild, idx[mask], depth + 1))
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=float),
    )


def _constant_tree(dist) -> Tree:
    return Tree(np.array([-1]), np.zeros(1), np.array([-1]), np.array([-1]),
                np.asarray(dist, dtype=float)[None, :])


def train_forest(train: Dataset, cfg: ForestConfig = ForestConfig()) -> ForestModel:
    """Bootstrap-aggregated CART trees with sqrt-many candidate columns per split.

    Rows are first put into a canonical order (sorted by encoded features
    and label), so the model does not depend on how the training rows were
    ordered. Tree ``t`` draws from ``default_rng([seed, t])``.
    """
    k = len(train.label_space)
    encoder = Encoder(dict(train.schema), cfg.include_group,
                      tuple(g for g in cfg.group_features if g in train.schema))
    X = encoder.transform(train.features, train.z)
    y = train.y
    counts = np.bincount(y, minlength=k)
    present = np.flatnonzero(counts)
    if len(present) <= 1:
        warnings.warn("training set has a single class; fitting a constant model")
        dist = np.zeros(k)
        dist[present] = 1.0
        return ForestModel((_constant_tree(dist),), train.label_space, encoder, cfg)
    if counts[present].min() < cfg.min_leaf:
        raise ValueError(f"every present class needs at least min_leaf={cfg.min_leaf} samples")
    order = np.lexsort(np.column_stack([X, y]).T[::-1])
    X, y = X[order], y[order]
    trees = []
    for t in range(cfg.tree_count):
        rng = np.random.default_rng([cfg.seed, t])
        boot = rng.integers(0, len(y), len(y))
        trees.append(_grow_tree(X[boot], y[boot], k, cfg, rng))
    return ForestModel(tuple(trees), train.label_space, encoder, cfg)


def predict_proba(model: ForestModel, features, z) -> np.ndarray:
    """Mean of the trees' leaf class frequencies, one row per sample."""
    X = model.encoder.transform(features, z)
    if X.shape[1] != len(model.encoder.columns):
        raise ValueError("feature schema mismatch")
    out = np.zeros((len(X), len(model.label_space)))
    for tree in model.trees:
        out += tree.predict(X)
    out /= len(model.trees)
    return out / out.sum(axis=1, keepdims=True)


def predict_soft(model: ForestModel, x, z: int = 0) -> np.ndarray:
    """Soft prediction for a single feature mapping."""
    features = {name: np.array([x[name]], dtype=object) for name in model.encoder.used if name in x}
    missing = set(model.encoder.used) - set(features)
    if missing:
        raise ValueError(f"missing feature(s) {sorted(missing)}")
    return predict_proba(model, features, np.array([z]))[0]


def predict_dataset(model: ForestModel, d: Dataset) -> Dataset:
    return d.with_predictions(predict_proba(model, d.features, d.z))


# -- serialisation --------------------------------------------------------------


def save_model(model: ForestModel, path) -> None:
    """Write a versioned ``.npz``: concatenated tree arrays plus a JSON header."""
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "labels": list(model.label_space.labels),
        # pairs, not a mapping: column order must survive sorted JSON keys
        "schema": [[k, list(v) if v is not None else None] for k, v in model.encoder.schema.items()],
        "include_group": model.encoder.include_group,
        "group_features": list(model.encoder.group_features),
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(model.config).items()},
    }
    sizes = np.array([len(t.feature) for t in model.trees], dtype=np.int64)
    cat = lambda attr: np.concatenate([getattr(t, attr) for t in model.trees])  # noqa: E731
    with open(path, "wb") as fh:
        np.savez(
            fh,
            header=np.array(json.dumps(header, sort_keys=True)),
            sizes=sizes,
            feature=cat("feature"),
            threshold=cat("threshold"),
            left=cat("left"),
            right=cat("right"),
            value=np.vstack([t.value for t in model.trees]),
        )


def load_model(path) -> ForestModel:
    with np.load(path, allow_pickle=False) as f:
        header = json.loads(str(f["header"]))
        if header.get("format") != MODEL_FORMAT or header.get("version") != MODEL_VERSION:
            raise ValueError(f"{path}: not a version-{MODEL_VERSION} {MODEL_FORMAT} file")
        arrays = {k: f[k] for k in ("sizes", "feature", "threshold", "left", "right", "value")}
    bounds = np.concatenate([[0], np.cumsum(arrays["sizes"])])
    trees = tuple(
        Tree(*(arrays[k][a:b] for k in ("feature", "threshold", "left", "right", "value")))
        for a, b in zip(bounds[:-1], bounds[1:])
    )
    schema = {k: (tuple(v) if v is not None else None) for k, v in header["schema"]}
    cfg = header["config"]
    cfg["group_features"] = tuple(cfg["group_features"])
    labels = tuple(header["labels"])
    return ForestModel(
        trees,
        LabelSpace(labels),
        Encoder(schema, header["include_group"], tuple(header["group_features"])),
        ForestConfig(**cfg),
    )
