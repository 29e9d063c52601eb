"""High-prevalence signed-set enumeration.

Transactions are leaf itemsets weighted by 2^-depth / n_trees, so a mined
set's weighted support IS its exact depth-weighted prevalence; one traversal,
no second pass.  Mining runs weighted FP-growth with a size cap, guarded in
the tests by an exhaustive brute-force oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

from .dwp import PathItemset, collect_itemsets
from .forest import Forest, fit_forest
from .model import Dataset, RfConfig, SignedSet

Item = tuple[int, int]  # (feature index 1-based, sign)


@dataclass(frozen=True)
class FrequentSet:
    set: SignedSet
    support: float

    @property
    def size(self) -> int:
        return len(self.set)


def _sort_key(fs: FrequentSet):
    # descending support, ascending size, then lexicographic
    return (-fs.support, fs.size, tuple((m.index, m.sign) for m in fs.set))


def _as_transactions(itemsets: Iterable[PathItemset | tuple]) -> list[tuple[frozenset, float]]:
    # aggregate identical itemsets up front; ensembles repeat the same path
    # shape across trees, so this shrinks the transaction list a lot
    agg: dict[frozenset, float] = {}
    for it in itemsets:
        if isinstance(it, PathItemset):
            items, weight = it.items, it.weight
        else:
            items, weight = frozenset(it[0]), float(it[1])
        agg[items] = agg.get(items, 0.0) + weight
    return list(agg.items())


class _FpNode:
    __slots__ = ("item", "weight", "parent", "children")

    def __init__(self, item: Item | None, parent: "_FpNode | None"):
        self.item = item
        self.weight = 0.0
        self.parent = parent
        self.children: dict[Item, _FpNode] = {}


def _build_fp_tree(transactions: Sequence[tuple[tuple[Item, ...], float]]):
    """Returns (root, header) where header maps item -> list of tree nodes.

    Transactions must already be filtered to frequent items and sorted in the
    global item order.
    """
    root = _FpNode(None, None)
    header: dict[Item, list[_FpNode]] = {}
    for items, weight in transactions:
        node = root
        for item in items:
            child = node.children.get(item)
            if child is None:
                child = _FpNode(item, node)
                node.children[item] = child
                header.setdefault(item, []).append(child)
            child.weight += weight
            node = child
    return root, header


def _mine(header: dict[Item, list[_FpNode]], item_order: dict[Item, int],
          suffix: tuple[Item, ...], min_support: float, s_max: int,
          out: list[tuple[frozenset, float]]) -> None:
    # walk items from least frequent to most frequent in the global order
    for item in sorted(header, key=lambda it: -item_order[it]):
        nodes = header[item]
        support = sum(node.weight for node in nodes)
        if support < min_support:
            continue
        found = suffix + (item,)
        out.append((frozenset(found), support))
        if len(found) >= s_max:
            continue
        # conditional pattern base: prefix path of every node, with its weight
        conditional: list[tuple[tuple[Item, ...], float]] = []
        for node in nodes:
            path = []
            up = node.parent
            while up is not None and up.item is not None:
                path.append(up.item)
                up = up.parent
            if path:
                path.reverse()
                conditional.append((tuple(path), node.weight))
        if not conditional:
            continue
        # drop items that are no longer frequent in the conditional base
        weights: dict[Item, float] = {}
        for path, weight in conditional:
            for it in path:
                weights[it] = weights.get(it, 0.0) + weight
        keep = {it for it, w in weights.items() if w >= min_support}
        filtered = []
        for path, weight in conditional:
            kept = tuple(it for it in path if it in keep)
            if kept:
                filtered.append((kept, weight))
        if not filtered:
            continue
        _, sub_header = _build_fp_tree(filtered)
        _mine(sub_header, item_order, found, min_support, s_max, out)


def mine_frequent(itemsets: Iterable[PathItemset | tuple], min_support: float,
                  s_max: int) -> list[FrequentSet]:
    """All signed sets of size <= s_max whose weighted support reaches
    min_support, with exact supports.

    Caller is responsible for transaction weights being DWP-scaled (per-tree
    2^-depth weights divided by the tree count).
    """
    if min_support <= 0:
        raise ValueError("min_support must be positive")
    if s_max < 1:
        raise ValueError("s_max must be >= 1")
    transactions = _as_transactions(itemsets)

    weights: dict[Item, float] = {}
    for items, weight in transactions:
        for item in items:
            weights[item] = weights.get(item, 0.0) + weight
    frequent = {it for it, w in weights.items() if w >= min_support}
    if not frequent:
        return []
    # global order: descending weighted frequency, ties by (index, sign)
    ordered = sorted(frequent, key=lambda it: (-weights[it], it))
    item_order = {it: i for i, it in enumerate(ordered)}

    prepared = []
    for items, weight in transactions:
        kept = sorted((it for it in items if it in frequent),
                      key=item_order.__getitem__)
        if kept:
            prepared.append((tuple(kept), weight))
    _, header = _build_fp_tree(prepared)

    found: list[tuple[frozenset, float]] = []
    _mine(header, item_order, (), min_support, s_max, found)
    results = [FrequentSet(SignedSet.from_pairs(items), support)
               for items, support in found]
    results.sort(key=_sort_key)
    return results


def brute_force_frequent(itemsets: Iterable[PathItemset | tuple],
                         min_support: float, s_max: int,
                         max_items: int = 12) -> list[FrequentSet]:
    """Reference semantics for mine_frequent by exhaustive enumeration of all
    signed-item combinations up to s_max.  Guarded to small instances."""
    if min_support <= 0:
        raise ValueError("min_support must be positive")
    transactions = _as_transactions(itemsets)
    universe = sorted({item for items, _ in transactions for item in items})
    if len(universe) > max_items:
        raise ValueError(f"{len(universe)} distinct items exceed the brute-force "
                         f"guard of {max_items}")
    results = []
    for r in range(1, min(s_max, len(universe)) + 1):
        for combo in combinations(universe, r):
            target = frozenset(combo)
            support = math.fsum(w for items, w in transactions if target <= items)
            if support >= min_support:
                results.append(FrequentSet(SignedSet.from_pairs(target), support))
    results.sort(key=_sort_key)
    return results


def maximal_sets(results: Iterable[FrequentSet]) -> list[FrequentSet]:
    """The inclusion-maximal elements of the family."""
    pool = list(results)
    keys = [fs.set.pairs for fs in pool]
    out = []
    for i, fs in enumerate(pool):
        if any(i != j and keys[i] < keys[j] for j in range(len(pool))):
            continue
        out.append(fs)
    return sorted(out, key=_sort_key)


def lssfind(dataset: Dataset | None = None, config: RfConfig | None = None,
            eta: float = 0.01, s_max: int = 3, forest: Forest | None = None,
            epsilon: float | None = None, threads: int = 1,
            first_rule: str = "strict_first") -> list[FrequentSet]:
    """Return every signed set S with |S| <= s_max whose scaled prevalence
    2^|S| * DWP reaches 1 - eta, sorted by descending support.

    Either pass a dataset (a forest is trained with `config`) or a pre-trained
    forest.  epsilon defaults to the forest config's impurity threshold.
    Mining prunes at min_support = (1-eta) * 2^-s_max, the loosest prevalence
    any qualifying set can have.
    """
    if not (0.0 < eta < 1.0):
        raise ValueError("eta must be in (0,1)")
    if s_max < 1:
        raise ValueError("s_max must be >= 1")
    if forest is None:
        if dataset is None:
            raise ValueError("need a dataset or a pre-trained forest")
        forest = fit_forest(dataset, config or RfConfig(), threads=threads)
    if epsilon is None:
        epsilon = forest.config.epsilon
    scale = 1.0 / forest.n_trees
    transactions = [(it.items, it.weight * scale)
                    for it in collect_itemsets(forest, epsilon, first_rule)]
    min_support = (1.0 - eta) * 2.0 ** -s_max
    mined = mine_frequent(transactions, min_support, s_max)
    return [fs for fs in mined
            if 2.0 ** fs.size * fs.support >= 1.0 - eta]
