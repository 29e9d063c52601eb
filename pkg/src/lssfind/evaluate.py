"""Scoring, bound verification, and the Monte-Carlo simulation harness.

The bound report distinguishes the deterministic prevalence cap 2^-|S| (a
violation means an implementation bug) from the asymptotic floor/ceiling
bounds, whose finite-sample remainder is unknowable; crossings of the latter
are reported as warnings, not errors.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Iterable, Sequence

import numpy as np

from .dwp import DwpEstimate, collect_itemsets, dwp_from_itemsets
from .forest import Forest, fit_forest
from .generate import ScenarioConfig, gen_dataset
from .mining import FrequentSet, lssfind, maximal_sets
from .model import (
    Dataset,
    LssSpec,
    RfConfig,
    SignedFeature,
    SignedSet,
    canonical_signed_set,
    validate_lss_spec,
)

MAX_UNION_SETS = 100_000


def jaccard_score(truth: Iterable[SignedSet], found: Iterable[SignedSet]) -> float:
    """|truth & found| / |truth | found| over families of signed sets, each set
    an atomic element (no partial credit).  Two empty families score 1."""
    a = {s.pairs for s in truth}
    b = {s.pairs for s in found}
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def basic_signed_interactions(spec: LssSpec) -> list[SignedSet]:
    return [inter.signed_set for inter in spec.interactions]


def oracle_feature_set(spec: LssSpec,
                       path: Sequence[tuple[SignedFeature, float]]) -> SignedSet:
    """Replay a decision path and keep the signed features that were desirable
    at their node, given the true model.

    A feature k is desirable when it belongs to some interaction whose
    wrong-signed features are all absent from the path so far and whose own
    correct-signed version of k has not already been used.  Only each
    feature's first occurrence is considered.  Defined only for specs with
    disjoint interactions.
    """
    overlap = set()
    seen_feats: set[int] = set()
    for inter in spec.interactions:
        for k in inter.signed_set.feature_indices:
            if k in seen_feats:
                overlap.add(k)
            seen_feats.add(k)
    if overlap:
        raise ValueError(f"oracle undefined for overlapping interactions: {sorted(overlap)}")

    model_sign = {m.index: m.sign for inter in spec.interactions
                  for m in inter.signed_set}
    interaction_of = {m.index: inter for inter in spec.interactions
                      for m in inter.signed_set}

    first_occurrence: set[tuple[int, int]] = set()
    seen: set[int] = set()
    desirable: list[SignedFeature] = []
    for sf, _delta in path:
        k = sf.index
        if k in seen:
            continue
        seen.add(k)
        inter = interaction_of.get(k)
        if inter is not None:
            wrong = {(m.index, -m.sign) for m in inter.signed_set}
            if not (wrong & first_occurrence) and (k, model_sign[k]) not in first_occurrence:
                desirable.append(sf)
        first_occurrence.add((k, sf.sign))
    return canonical_signed_set(desirable)


@dataclass(frozen=True)
class TheoremConstants:
    """Model and algorithm constants the bounds are stated in."""

    c_beta: float
    c_gamma: float
    c_m: float
    s: int
    violations: tuple[str, ...] = ()

    @classmethod
    def from_spec(cls, spec: LssSpec, mtry: int, p: int) -> "TheoremConstants":
        violations: list[str] = []
        betas = [abs(i.beta) for i in spec.interactions]
        c_beta = min(betas) if betas else 0.0
        gammas = [spec.thresholds[k] for k in sorted(spec.signal_features)]
        c_gamma = min((min(g, 1.0 - g) for g in gammas), default=0.0)
        s = spec.n_signal_features
        if c_beta <= 0:
            violations.append("no positive coefficient lower bound")
        if not (0.0 < c_gamma < 0.5):
            violations.append(f"threshold margin {c_gamma} outside (0, 0.5)")
        if p <= s:
            violations.append(f"p={p} must exceed s={s}")
            c_m = 0.0
        else:
            # largest constant satisfying  c*p + (1-c)*s <= mtry <= (1-c)*(p-s)
            c_m = min((mtry - s) / (p - s), 1.0 - mtry / (p - s))
            if c_m <= 0:
                violations.append(
                    f"mtry={mtry} admits no valid subsampling constant for p={p}, s={s}")
            elif c_m >= 0.5:
                c_m = 0.5 - 1e-9
        return cls(c_beta=c_beta, c_gamma=c_gamma, c_m=c_m, s=s,
                   violations=tuple(violations))

    @property
    def ok(self) -> bool:
        return not self.violations


def bound_b(epsilon: float, constants: TheoremConstants) -> float:
    """Slack below the cap that an interaction's prevalence is guaranteed not
    to exceed asymptotically:  (4 eps / (C_b^2 C_g^(2s-1)))^(C_m^(2s)/log(1/C_g))."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if epsilon == 0:
        return 0.0
    c = constants
    base = 4.0 * epsilon / (c.c_beta ** 2 * c.c_gamma ** (2 * c.s - 1))
    exponent = c.c_m ** (2 * c.s) / math.log(1.0 / c.c_gamma)
    return base ** exponent


def eta_window(epsilon: float, constants: TheoremConstants) -> tuple[float, float]:
    """The (open) admissible range for the prevalence tolerance eta:
    2^s * b(eps) < eta < C_m^s / 2.  May be empty."""
    lo = 2.0 ** constants.s * bound_b(epsilon, constants)
    hi = constants.c_m ** constants.s / 2.0
    return lo, hi


def epsilon_for_window(constants: TheoremConstants, margin: float = 0.25) -> float:
    """An impurity threshold making the eta window nonempty, placing the lower
    edge at `margin` times the upper edge.  Typically astronomically small:
    the slack exponent C_m^(2s)/log(1/C_g) is tiny for realistic constants."""
    c = constants
    hi = c.c_m ** c.s / 2.0
    target_b = margin * hi / 2.0 ** c.s
    exponent = c.c_m ** (2 * c.s) / math.log(1.0 / c.c_gamma)
    base = target_b ** (1.0 / exponent)
    return base * c.c_beta ** 2 * c.c_gamma ** (2 * c.s - 1) / 4.0


def optimal_mtry(p: int, s: int) -> int:
    """Feature-subsample size minimizing the non-interaction prevalence
    ceiling: round(p * (0.5 - s / (2(p-2)))), clamped to [1, p]."""
    if p < 3:
        raise ValueError("p must be >= 3")
    raw = p * (0.5 - s / (2.0 * (p - 2)))
    return int(min(p, max(1, math.floor(raw + 0.5))))


def union_signed_interactions(spec: LssSpec) -> list[SignedSet]:
    """All unions of multi-feature basic interactions combined with either-sign
    versions of the singleton interactions (nonempty choices only)."""
    multis = [i.signed_set for i in spec.interactions if len(i.signed_set) > 1]
    singles = [i.signed_set for i in spec.interactions if len(i.signed_set) == 1]
    count = 2 ** len(multis) * 3 ** len(singles)
    if count > MAX_UNION_SETS:
        raise ValueError(f"{count} union signed interactions exceed the "
                         f"enumeration cap of {MAX_UNION_SETS}")
    out: list[SignedSet] = []
    for multi_mask in product((False, True), repeat=len(multis)):
        chosen = [m for m, used in zip(multis, multi_mask) if used]
        # each singleton is skipped, or included with one of the two signs
        for single_choice in product((0, -1, +1), repeat=len(singles)):
            members: list[SignedFeature] = []
            for m in chosen:
                members.extend(m)
            for single, sign in zip(singles, single_choice):
                if sign != 0:
                    members.append(SignedFeature(next(iter(single)).index, sign))
            if members:
                out.append(canonical_signed_set(members))
    # dedupe (sign choices can coincide when a singleton equals another set)
    seen = set()
    unique = []
    for s_ in out:
        if s_.pairs not in seen:
            seen.add(s_.pairs)
            unique.append(s_)
    return unique


@dataclass(frozen=True)
class BoundEntry:
    signed_set: SignedSet
    is_union_interaction: bool
    dwp: float
    cap: float
    floor: float | None  # union interactions only
    ceiling: float | None  # non-interactions only
    warning: str | None = None


@dataclass(frozen=True)
class BoundReport:
    constants: TheoremConstants
    epsilon: float
    entries: tuple[BoundEntry, ...]

    @property
    def warnings(self) -> list[str]:
        return [e.warning for e in self.entries if e.warning]


def _default_non_interactions(spec: LssSpec, p: int) -> list[SignedSet]:
    """Nearby sets that are provably not union interactions: sign flips,
    strict sub-multisets, and sets touching noise features."""
    out: list[SignedSet] = []
    unions = {s.pairs for s in union_signed_interactions(spec)}

    def push(members):
        s_ = canonical_signed_set(members)
        if len(s_) and s_.pairs not in unions:
            out.append(s_)

    for inter in spec.interactions:
        members = list(inter.signed_set)
        if len(members) > 1:
            flipped = [SignedFeature(members[0].index, -members[0].sign)] + members[1:]
            push(flipped)
            for r in range(1, len(members)):
                for combo in combinations(members, r):
                    push(combo)
    noise = sorted(set(range(1, p + 1)) - set(spec.signal_features))
    for k in noise[:2]:
        push([SignedFeature(k, -1)])
        if spec.interactions:
            push(list(spec.interactions[0].signed_set) + [SignedFeature(k, -1)])
    # dedupe preserving order
    seen = set()
    unique = []
    for s_ in out:
        if s_.pairs not in seen:
            seen.add(s_.pairs)
            unique.append(s_)
    return unique


def check_theorem_bounds(forest: Forest, spec: LssSpec, epsilon: float,
                         query_sets: Iterable[SignedSet] | None = None) -> BoundReport:
    """Compare exact prevalences against the cap, floor, and ceiling.

    Raises on any cap violation; floor/ceiling crossings only produce warnings
    since the finite-sample remainder term is unknowable.
    """
    violations = validate_lss_spec(spec)
    if violations:
        raise ValueError("invalid spec: " + "; ".join(violations))
    constants = TheoremConstants.from_spec(
        spec, forest.config.resolve_mtry(forest.p), forest.p)
    unions = union_signed_interactions(spec)
    union_keys = {s.pairs for s in unions}
    non_inter = list(query_sets) if query_sets is not None else \
        _default_non_interactions(spec, forest.p)

    itemsets = collect_itemsets(forest, epsilon)
    b_eps = bound_b(epsilon, constants) if constants.ok else None
    entries: list[BoundEntry] = []
    for s_ in unions + [q for q in non_inter if q.pairs not in union_keys]:
        value = dwp_from_itemsets(itemsets, s_, forest.n_trees)
        cap = 2.0 ** -len(s_)
        if value > cap + 1e-12:
            raise AssertionError(
                f"prevalence cap violated for {s_}: {value} > {cap} "
                "(implementation bug)")
        is_union = s_.pairs in union_keys
        floor = ceiling = None
        warning = None
        if is_union:
            if b_eps is not None:
                floor = cap - b_eps
                if value < floor:
                    warning = f"{s_}: prevalence {value:.6g} below floor {floor:.6g}"
        else:
            if constants.ok:
                ceiling = cap * (1.0 - constants.c_m ** constants.s / 2.0)
                if value > ceiling:
                    warning = f"{s_}: prevalence {value:.6g} above ceiling {ceiling:.6g}"
        entries.append(BoundEntry(
            signed_set=s_, is_union_interaction=is_union, dwp=value,
            cap=cap, floor=floor, ceiling=ceiling, warning=warning))
    return BoundReport(constants=constants, epsilon=epsilon, entries=tuple(entries))


# ---------------------------------------------------------------------------
# Simulation harness


@dataclass(frozen=True)
class FindParams:
    """Mining parameters for the simulation harness.

    The forest defaults here (all features per split, bootstrapped trees) are
    the standard regression-RF configuration the benchmark figures assume;
    with feature subsampling at p/2 the signal splits land too deep and their
    globally weighted impurity decrease falls under epsilon, so recovery at
    eta=0.01 needs the standard setup.
    """

    eta: float = 0.01
    epsilon: float = 0.01
    s_max: int | None = None  # None -> interaction order + 1
    n_trees: int = 100
    mtry: int | None = None  # None -> all features
    bootstrap: bool = True


@dataclass(frozen=True)
class RunResult:
    run_index: int
    seed: int
    score: float
    n_sets_found: int
    seconds: float
    found: tuple[SignedSet, ...]


@dataclass(frozen=True)
class ScenarioResult:
    scenario: ScenarioConfig
    params: FindParams
    runs: tuple[RunResult, ...]

    @property
    def scores(self) -> list[float]:
        return [r.score for r in self.runs]

    @property
    def mean_score(self) -> float:
        return float(np.mean(self.scores)) if self.runs else float("nan")

    @property
    def sd_score(self) -> float:
        return float(np.std(self.scores, ddof=1)) if len(self.runs) > 1 else 0.0


def derive_run_seed(master_seed: int, run_index: int) -> int:
    return int(np.random.SeedSequence([master_seed, run_index]).generate_state(1)[0])


def run_scenario(scenario: ScenarioConfig, runs: int,
                 params: FindParams = FindParams(), threads: int = 1) -> ScenarioResult:
    """Repeat (generate, find, score) with per-run derived seeds and aggregate.

    Scores compare the raw find output against the scenario's basic signed
    interactions, one atomic set at a time.
    """
    results: list[RunResult] = []
    for r in range(runs):
        started = time.perf_counter()
        seed = derive_run_seed(scenario.seed, r)
        run_scenario_cfg = ScenarioConfig(
            n_interactions=scenario.n_interactions,
            interaction_order=scenario.interaction_order,
            n_samples=scenario.n_samples,
            n_features=scenario.n_features,
            snr=scenario.snr,
            noise_family=scenario.noise_family,
            correlation_alpha=scenario.correlation_alpha,
            overlap=scenario.overlap,
            coverage=scenario.coverage,
            seed=seed,
        )
        dataset, spec = gen_dataset(run_scenario_cfg)
        s_max = params.s_max if params.s_max is not None \
            else scenario.interaction_order + 1
        config = RfConfig(
            n_trees=params.n_trees,
            mtry=scenario.n_features if params.mtry is None else params.mtry,
            epsilon=params.epsilon, bootstrap=params.bootstrap, seed=seed)
        found = lssfind(dataset, config, eta=params.eta, s_max=s_max,
                        epsilon=params.epsilon, threads=threads)
        score = jaccard_score(basic_signed_interactions(spec),
                              [fs.set for fs in found])
        results.append(RunResult(
            run_index=r, seed=seed, score=score, n_sets_found=len(found),
            seconds=time.perf_counter() - started,
            found=tuple(fs.set for fs in found)))
    return ScenarioResult(scenario=scenario, params=params, runs=tuple(results))
