"""Per-leaf signed-feature itemsets and depth-weighted prevalence.

A root-to-leaf walk collects a signed feature for every split whose impurity
decrease clears the threshold, keeping only one occurrence per feature.  A
leaf at depth d carries weight 2^-d, so the weights inside one tree sum to
exactly 1 and the weighted count of leaves containing a query set equals the
probability of hitting that set on a coin-flipped descent.

The threshold applies to the stored split deltas, which carry the node's
share of the training sample; a split deep in the tree therefore needs a
proportionally larger within-node decrease to register.  This is the same
sample-weighted scale used by mean-decrease-impurity feature importances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from .forest import Forest, Tree
from .model import SignedSet

FirstRule = Literal["strict_first", "first_above_threshold"]

Pairs = frozenset  # of (feature index 1-based, sign) tuples


@dataclass(frozen=True)
class PathItemset:
    """One leaf's collected signed features and its 2^-depth path weight."""

    items: Pairs
    weight: float
    tree_index: int
    leaf_index: int


@dataclass(frozen=True)
class DwpEstimate:
    value: float
    n_trees: int
    method: str
    std_error: float | None = None


def path_itemsets(tree: Tree, epsilon: float,
                  first_rule: FirstRule = "strict_first",
                  tree_index: int = 0) -> list[PathItemset]:
    """One itemset per leaf.

    strict_first: a split contributes iff its delta exceeds epsilon AND its
    feature has not appeared earlier on the path, in any form.
    first_above_threshold: a feature contributes the first time it appears
    with delta above epsilon, even if earlier low-delta splits used it.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    strict = first_rule == "strict_first"
    if not strict and first_rule != "first_above_threshold":
        raise ValueError(f"unknown first_rule {first_rule!r}")
    out: list[PathItemset] = []
    # stack entries: (node, items so far, features seen so far)
    stack: list[tuple[int, frozenset, frozenset]] = [(0, frozenset(), frozenset())]
    while stack:
        node, items, seen = stack.pop()
        if tree.is_leaf(node):
            out.append(PathItemset(
                items=items,
                weight=2.0 ** -int(tree.depth[node]),
                tree_index=tree_index,
                leaf_index=node,
            ))
            continue
        k = int(tree.feature[node]) + 1  # 1-based
        delta = float(tree.delta[node])
        counted = k not in seen and delta > epsilon
        seen_next = seen | {k} if (strict or counted) else seen
        left_items = items | {(k, -1)} if counted else items
        right_items = items | {(k, +1)} if counted else items
        stack.append((int(tree.right[node]), right_items, seen_next))
        stack.append((int(tree.left[node]), left_items, seen_next))
    return out


def collect_itemsets(forest: Forest, epsilon: float,
                     first_rule: FirstRule = "strict_first") -> list[PathItemset]:
    """All leaves of all trees; weights are per-tree (each tree sums to 1)."""
    out: list[PathItemset] = []
    for i, tree in enumerate(forest.trees):
        out.extend(path_itemsets(tree, epsilon, first_rule, tree_index=i))
    return out


def _check_query(forest: Forest, s: SignedSet) -> Pairs:
    pairs = s.pairs
    for index, _ in pairs:
        if index > forest.p:
            raise ValueError(f"query feature {index} exceeds p={forest.p}")
    return pairs


def dwp_from_itemsets(itemsets: Iterable[PathItemset], s: SignedSet | Pairs,
                      n_trees: int) -> float:
    """Exact prevalence from precomputed per-tree-weighted itemsets."""
    pairs = s.pairs if isinstance(s, SignedSet) else s
    hits = [it.weight for it in itemsets if pairs <= it.items]
    return math.fsum(hits) / n_trees


def dwp_exact(forest: Forest, s: SignedSet, epsilon: float,
              first_rule: FirstRule = "strict_first") -> DwpEstimate:
    """Exact expectation over path randomness, given the finite ensemble:
    average over trees of the weighted mass of leaves containing s."""
    pairs = _check_query(forest, s)
    per_tree = []
    for i, tree in enumerate(forest.trees):
        leaves = path_itemsets(tree, epsilon, first_rule, tree_index=i)
        per_tree.append(math.fsum(it.weight for it in leaves if pairs <= it.items))
    value = math.fsum(per_tree) / forest.n_trees
    return DwpEstimate(value=value, n_trees=forest.n_trees, method="exact")


def dwp_sample(forest: Forest, s: SignedSet, epsilon: float, n_paths: int,
               seed: int = 0, first_rule: FirstRule = "strict_first") -> DwpEstimate:
    """Monte-Carlo cross-check: sample a uniform tree, coin-flip a descent,
    count the fraction of paths whose itemset contains s."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    pairs = _check_query(forest, s)
    strict = first_rule == "strict_first"
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    tree_picks = rng.integers(0, forest.n_trees, size=n_paths)
    hits = 0
    for t in tree_picks:
        tree = forest.trees[t]
        node = 0
        items: set[tuple[int, int]] = set()
        seen: set[int] = set()
        while not tree.is_leaf(node):
            k = int(tree.feature[node]) + 1
            delta = float(tree.delta[node])
            go_right = rng.random() >= 0.5
            counted = k not in seen and delta > epsilon
            if counted:
                items.add((k, +1 if go_right else -1))
            if strict or counted:
                seen.add(k)
            node = int(tree.right[node]) if go_right else int(tree.left[node])
        if pairs <= items:
            hits += 1
    value = hits / n_paths
    se = math.sqrt(value * (1.0 - value) / n_paths)
    return DwpEstimate(value=value, n_trees=forest.n_trees, method="sampled",
                       std_error=se)
