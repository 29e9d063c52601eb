"""CART regression trees with per-node feature subsampling, and ensembles of
them trained on the full dataset (no bootstrap by default).

Impurity decrease is the globally weighted closed form

    delta = N_l * N_r / (n * (N_l + N_r)) * (mean_l - mean_r)^2

with n the full training-set size, so a node's delta shrinks with its sample
fraction.  Downstream itemset thresholds compare against this same quantity.

Trees are stored as flat parallel arrays (node 0 = root) which is also the
JSON wire layout.  Feature columns are 0-based in memory and 1-based in JSON.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import Dataset, RfConfig, config_from_dict, config_to_dict


@dataclass(frozen=True)
class SplitRecord:
    """Winning split of one node: left child takes x[feature] <= threshold."""

    feature: int  # 0-based column
    threshold: float
    delta: float
    n_node: int
    n_left: int
    n_right: int


def impurity_decrease(y_left: np.ndarray, y_right: np.ndarray, n_total: int) -> float:
    """Globally weighted variance drop achieved by a binary split."""
    nl, nr = len(y_left), len(y_right)
    if nl == 0 or nr == 0:
        raise ValueError("both children must be nonempty")
    diff = float(np.mean(y_left)) - float(np.mean(y_right))
    return nl * nr / (n_total * (nl + nr)) * diff * diff


def best_split(x: np.ndarray, y: np.ndarray, rows: np.ndarray,
               candidates: np.ndarray, n_total: int,
               min_child_samples: int = 1,
               min_child_fraction: float = 0.0) -> SplitRecord | None:
    """Exhaustive search over candidate features and midpoints between
    consecutive distinct sorted values within the node.

    Ties break to the smallest feature index, then the smallest threshold;
    callers must pass `candidates` sorted ascending for that to hold.  Returns
    None when no legal split exists or all responses in the node are equal.
    """
    m = len(rows)
    if m < 2:
        return None
    y_node = y[rows]
    if np.ptp(y_node) == 0.0:
        return None
    x_node = x[np.ix_(rows, candidates)]
    order = np.argsort(x_node, axis=0, kind="stable")
    x_sorted = np.take_along_axis(x_node, order, axis=0)
    y_sorted = y_node[order]
    csum = np.cumsum(y_sorted, axis=0)
    total = csum[-1]

    sizes_left = np.arange(1, m, dtype=float)[:, None]
    sizes_right = m - sizes_left
    mean_left = csum[:-1] / sizes_left
    mean_right = (total[None, :] - csum[:-1]) / sizes_right
    diff = mean_left - mean_right
    delta = sizes_left * sizes_right / (n_total * m) * diff * diff

    valid = x_sorted[:-1] < x_sorted[1:]
    lo = max(min_child_samples, int(np.ceil(min_child_fraction * m - 1e-12)))
    if lo > 1:
        sizes = np.arange(1, m)
        valid &= ((sizes >= lo) & (m - sizes >= lo))[:, None]
    if not valid.any():
        return None
    delta = np.where(valid, delta, -1.0)

    best = delta.max()
    if best < 0.0:
        return None
    # smallest candidate feature first, then smallest threshold within it
    col = int(np.argmax((delta == best).any(axis=0)))
    pos = int(np.argmax(delta[:, col] == best))
    n_left = pos + 1
    threshold = 0.5 * (float(x_sorted[pos, col]) + float(x_sorted[pos + 1, col]))
    return SplitRecord(
        feature=int(candidates[col]),
        threshold=threshold,
        delta=float(best),
        n_node=m,
        n_left=n_left,
        n_right=m - n_left,
    )


@dataclass
class Tree:
    """Flat-array binary tree.  feature[i] == -1 marks a leaf; value holds the
    mean response at leaves and NaN elsewhere."""

    feature: np.ndarray
    threshold: np.ndarray
    delta: np.ndarray
    n_samples: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    depth: np.ndarray

    def __len__(self) -> int:
        return len(self.feature)

    def is_leaf(self, i: int) -> bool:
        return self.feature[i] < 0

    def leaf_indices(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index for each row of x."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.empty(x.shape[0], dtype=np.int64)
        for r in range(x.shape[0]):
            i = 0
            while self.feature[i] >= 0:
                if x[r, self.feature[i]] <= self.threshold[i]:
                    i = self.left[i]
                else:
                    i = self.right[i]
            out[r] = i
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.apply(x)]


class _TreeBuilder:
    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.delta: list[float] = []
        self.n_samples: list[int] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.depth: list[int] = []

    def add(self, depth: int, n: int) -> int:
        i = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(float("nan"))
        self.delta.append(float("nan"))
        self.n_samples.append(n)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float("nan"))
        self.depth.append(depth)
        return i

    def finish(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=float),
            delta=np.asarray(self.delta, dtype=float),
            n_samples=np.asarray(self.n_samples, dtype=np.int64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=float),
            depth=np.asarray(self.depth, dtype=np.int32),
        )


def fit_tree(dataset: Dataset, config: RfConfig, tree_seed) -> Tree:
    """Grow one tree to purity (or until no legal split remains).

    At every node, mtry candidate features are drawn without replacement from
    the tree's private random stream; nodes are expanded in preorder so the
    stream consumption order, and hence the tree, is reproducible.
    """
    x, y = dataset.x, dataset.y
    n, p = dataset.n, dataset.p
    mtry = config.resolve_mtry(p)
    rng = np.random.default_rng(tree_seed)
    if config.bootstrap:
        root_rows = np.sort(rng.integers(0, n, size=n))
    else:
        root_rows = np.arange(n)

    builder = _TreeBuilder()

    def expand(rows: np.ndarray, depth: int) -> int:
        node = builder.add(depth, len(rows))
        split = None
        if len(rows) >= 2:
            if mtry >= p:
                candidates = np.arange(p)
            else:
                candidates = np.sort(rng.choice(p, size=mtry, replace=False))
            split = best_split(
                x, y, rows, candidates, n_total=n,
                min_child_samples=config.min_child_samples,
                min_child_fraction=config.min_child_fraction)
        if split is None:
            builder.value[node] = float(np.mean(y[rows])) if len(rows) else 0.0
            return node
        go_left = x[rows, split.feature] <= split.threshold
        builder.feature[node] = split.feature
        builder.threshold[node] = split.threshold
        builder.delta[node] = split.delta
        builder.left[node] = expand(rows[go_left], depth + 1)
        builder.right[node] = expand(rows[~go_left], depth + 1)
        return node

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 4 * dataset.n + 1000))
    try:
        expand(root_rows, 0)
    finally:
        sys.setrecursionlimit(old_limit)
    return builder.finish()


@dataclass
class Forest:
    trees: list[Tree]
    config: RfConfig
    p: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.mean([t.predict(x) for t in self.trees], axis=0)


def tree_seed_for(master_seed: int, tree_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([master_seed, tree_index])


def fit_forest(dataset: Dataset, config: RfConfig, threads: int = 1) -> Forest:
    """Train config.n_trees trees, each on the full dataset (unless bootstrap),
    with per-tree seeds derived from the master seed so the result is the same
    serial or parallel."""
    seeds = [tree_seed_for(config.seed, i) for i in range(config.n_trees)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(lambda s: fit_tree(dataset, config, s), seeds))
    else:
        trees = [fit_tree(dataset, config, s) for s in seeds]
    return Forest(trees=trees, config=config, p=dataset.p)


# ---------------------------------------------------------------------------
# Serialization


def tree_to_dict(tree: Tree) -> dict:
    nodes = []
    for i in range(len(tree)):
        leaf = tree.is_leaf(i)
        nodes.append({
            "feature": None if leaf else int(tree.feature[i]) + 1,
            "threshold": None if leaf else float(tree.threshold[i]),
            "delta": None if leaf else float(tree.delta[i]),
            "n": int(tree.n_samples[i]),
            "left": None if leaf else int(tree.left[i]),
            "right": None if leaf else int(tree.right[i]),
            "value": float(tree.value[i]) if leaf else None,
            "depth": int(tree.depth[i]),
        })
    return {"nodes": nodes}


def tree_from_dict(doc: dict) -> Tree:
    builder = _TreeBuilder()
    for node in doc["nodes"]:
        i = builder.add(int(node["depth"]), int(node["n"]))
        if node["feature"] is not None:
            builder.feature[i] = int(node["feature"]) - 1
            builder.threshold[i] = float(node["threshold"])
            builder.delta[i] = float(node["delta"])
            builder.left[i] = int(node["left"])
            builder.right[i] = int(node["right"])
        else:
            builder.value[i] = float(node["value"])
    return builder.finish()


def forest_to_dict(forest: Forest) -> dict:
    return {
        "p": forest.p,
        "config": config_to_dict(forest.config),
        "trees": [tree_to_dict(t) for t in forest.trees],
    }


def forest_from_dict(doc: dict) -> Forest:
    return Forest(
        trees=[tree_from_dict(t) for t in doc["trees"]],
        config=config_from_dict(doc["config"]),
        p=int(doc["p"]),
    )


def save_forest(forest: Forest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(forest_to_dict(forest), fh, separators=(",", ":"))
        fh.write("\n")


def load_forest(path) -> Forest:
    with open(path, "r", encoding="utf-8") as fh:
        return forest_from_dict(json.load(fh))
