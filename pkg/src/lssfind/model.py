"""Core domain types: signed features, signed sets, LSS model specs, datasets,
and random-forest configuration.

Feature indices are 1-based everywhere a user sees them (string forms, JSON,
LssSpec thresholds).  Matrix columns are 0-based internally; the forest module
handles the shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

NOISE_FAMILIES = ("gaussian", "laplace", "cauchy")


@dataclass(frozen=True, order=True)
class SignedFeature:
    """A feature index paired with a direction.

    sign -1 means the indicator 1(X_k <= threshold); +1 means 1(X_k >= threshold).
    """

    index: int
    sign: int

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"feature index must be >= 1, got {self.index}")
        if self.sign not in (-1, 1):
            raise ValueError(f"sign must be -1 or +1, got {self.sign}")

    def __str__(self) -> str:
        return f"{self.index}{'+' if self.sign > 0 else '-'}"

    @classmethod
    def parse(cls, text: str) -> "SignedFeature":
        text = text.strip()
        if len(text) < 2 or text[-1] not in "+-":
            raise ValueError(f"bad signed feature {text!r}; expected e.g. '3-' or '7+'")
        try:
            index = int(text[:-1])
        except ValueError:
            raise ValueError(f"bad signed feature {text!r}; index is not an integer") from None
        return cls(index, 1 if text[-1] == "+" else -1)


@dataclass(frozen=True)
class SignedSet:
    """A duplicate-free collection of signed features, sorted by (index, sign).

    Construct through :func:`canonical_signed_set` (or ``parse``); the raw
    constructor trusts its input to already be canonical.
    """

    members: tuple[SignedFeature, ...] = ()

    def __post_init__(self):
        if list(self.members) != sorted(set(self.members)):
            raise ValueError("members must be strictly sorted and duplicate-free; "
                             "use canonical_signed_set")

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[SignedFeature]:
        return iter(self.members)

    def __str__(self) -> str:
        return ",".join(str(m) for m in self.members)

    @property
    def pairs(self) -> frozenset[tuple[int, int]]:
        """The set as hashable (index, sign) pairs; the hot-path representation."""
        return frozenset((m.index, m.sign) for m in self.members)

    @property
    def feature_indices(self) -> frozenset[int]:
        return frozenset(m.index for m in self.members)

    def issubset(self, other: "SignedSet") -> bool:
        return self.pairs <= other.pairs

    def union(self, other: "SignedSet") -> "SignedSet":
        return canonical_signed_set(tuple(self) + tuple(other))

    @classmethod
    def parse(cls, text: str) -> "SignedSet":
        """Parse the string form '1-,2-,7+' (empty string -> empty set)."""
        text = text.strip()
        if not text:
            return cls()
        return canonical_signed_set(SignedFeature.parse(tok) for tok in text.split(","))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]]) -> "SignedSet":
        return canonical_signed_set(SignedFeature(i, s) for i, s in pairs)


def canonical_signed_set(items: Iterable[SignedFeature]) -> SignedSet:
    """Sort and deduplicate; idempotent and order-insensitive.

    Both signs of one feature may coexist in a query set (its prevalence is then
    zero by construction), so no sign-consistency check happens here.
    """
    return SignedSet(tuple(sorted(set(items))))


@dataclass(frozen=True)
class Interaction:
    signed_set: SignedSet
    beta: float


@dataclass(frozen=True)
class NoiseSpec:
    family: str = "gaussian"
    scale: float = 0.0


@dataclass(frozen=True)
class LssSpec:
    """Generative model: a sum of signed threshold-indicator products plus noise.

    The regression mean is
        intercept + sum_j beta_j * prod_{(k,b) in S_j} ind(b, x_k, gamma_k)
    where ind(-1, x, g) = 1(x <= g) and ind(+1, x, g) = 1(x >= g).
    """

    intercept: float = 0.0
    interactions: tuple[Interaction, ...] = ()
    thresholds: Mapping[int, float] = field(default_factory=dict)
    noise: NoiseSpec = NoiseSpec()
    correlation_alpha: float = 0.0
    allow_overlap: bool = False

    @property
    def signal_features(self) -> frozenset[int]:
        out: set[int] = set()
        for inter in self.interactions:
            out |= inter.signed_set.feature_indices
        return frozenset(out)

    @property
    def n_signal_features(self) -> int:
        """Total signal feature count summed over interactions (with repetition)."""
        return sum(len(inter.signed_set) for inter in self.interactions)

    def max_feature_index(self) -> int:
        idx = [0]
        idx.extend(self.thresholds.keys())
        for inter in self.interactions:
            idx.extend(inter.signed_set.feature_indices)
        return max(idx)


def validate_lss_spec(spec: LssSpec) -> list[str]:
    """Report every violated model invariant; empty list means the spec is valid.

    Never raises: validation reports, callers decide whether to abort.
    """
    violations: list[str] = []
    for j, inter in enumerate(spec.interactions, start=1):
        if inter.beta == 0:
            violations.append(f"interaction {j}: beta must be nonzero")
        if len(inter.signed_set) == 0:
            violations.append(f"interaction {j}: empty signed set")
        signs_by_feature: dict[int, set[int]] = {}
        for m in inter.signed_set:
            signs_by_feature.setdefault(m.index, set()).add(m.sign)
        for k, signs in signs_by_feature.items():
            if len(signs) > 1:
                violations.append(f"interaction {j}: feature {k} appears with both signs")
        for m in inter.signed_set:
            if m.index not in spec.thresholds:
                violations.append(f"interaction {j}: feature {m.index} has no threshold")
    for k, gamma in spec.thresholds.items():
        if not (0.0 < gamma < 1.0):
            violations.append(f"threshold for feature {k} not in (0,1): {gamma}")
    if not spec.allow_overlap:
        seen: dict[int, int] = {}
        for j, inter in enumerate(spec.interactions, start=1):
            for k in sorted(inter.signed_set.feature_indices):
                if k in seen:
                    violations.append(
                        f"overlap at feature {k} (interactions {seen[k]} and {j})")
                else:
                    seen[k] = j
    # a feature shared across interactions must carry one sign overall
    sign_of: dict[int, int] = {}
    for j, inter in enumerate(spec.interactions, start=1):
        for m in inter.signed_set:
            if sign_of.setdefault(m.index, m.sign) != m.sign:
                violations.append(
                    f"feature {m.index} appears with conflicting signs across interactions")
    if spec.noise.family not in NOISE_FAMILIES:
        violations.append(f"unknown noise family {spec.noise.family!r}")
    if spec.noise.scale < 0:
        violations.append(f"noise scale must be nonnegative: {spec.noise.scale}")
    if not (0.0 <= spec.correlation_alpha < 1.0):
        violations.append(f"correlation_alpha must be in [0,1): {spec.correlation_alpha}")
    return violations


def _indicator(sign: int, x: float, gamma: float) -> bool:
    return x <= gamma if sign < 0 else x >= gamma


def response_mean(spec: LssSpec, x: Sequence[float]) -> float:
    """Evaluate the noiseless regression function at one point (1-based features)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or len(x) < spec.max_feature_index():
        raise ValueError(
            f"point has {x.shape} entries but spec references feature "
            f"{spec.max_feature_index()}")
    total = spec.intercept
    for inter in spec.interactions:
        active = all(
            _indicator(m.sign, x[m.index - 1], spec.thresholds[m.index])
            for m in inter.signed_set)
        if active:
            total += inter.beta
    return total


def response_mean_matrix(spec: LssSpec, x: np.ndarray) -> np.ndarray:
    """Vectorized response_mean over the rows of an n-by-p matrix."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] < spec.max_feature_index():
        raise ValueError(f"matrix shape {x.shape} too narrow for spec")
    total = np.full(x.shape[0], spec.intercept, dtype=float)
    for inter in spec.interactions:
        active = np.ones(x.shape[0], dtype=bool)
        for m in inter.signed_set:
            col = x[:, m.index - 1]
            gamma = spec.thresholds[m.index]
            active &= (col <= gamma) if m.sign < 0 else (col >= gamma)
        total += inter.beta * active
    return total


@dataclass(frozen=True)
class Dataset:
    """An n-by-p feature matrix with its length-n response."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float)
        if x.ndim != 2:
            raise ValueError("x must be a 2-d matrix")
        if y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ValueError(f"row count {x.shape[0]} != response length {y.shape[0]}")
        if x.shape[1] < 1:
            raise ValueError("need at least one feature")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class RfConfig:
    """Forest training knobs.

    mtry=None resolves to ceil(p/2) at fit time (the theory-optimal choice when
    signal features are few relative to p).  epsilon is the impurity threshold
    used downstream when turning decision paths into signed-feature itemsets.
    """

    n_trees: int = 100
    mtry: int | None = None
    epsilon: float = 0.01
    min_child_samples: int = 1
    bootstrap: bool = False
    min_child_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.min_child_samples < 1:
            raise ValueError("min_child_samples must be >= 1")
        if not (0.0 <= self.min_child_fraction < 0.5):
            raise ValueError("min_child_fraction must be in [0, 0.5)")

    def resolve_mtry(self, p: int) -> int:
        if self.mtry is None:
            return max(1, math.ceil(p / 2))
        if self.mtry > p:
            raise ValueError(f"mtry {self.mtry} exceeds feature count {p}")
        return self.mtry


# ---------------------------------------------------------------------------
# JSON forms


def spec_to_dict(spec: LssSpec) -> dict:
    return {
        "intercept": spec.intercept,
        "interactions": [
            {"set": str(i.signed_set), "beta": i.beta} for i in spec.interactions
        ],
        "thresholds": {str(k): v for k, v in sorted(spec.thresholds.items())},
        "noise": {"family": spec.noise.family, "scale": spec.noise.scale},
        "correlation_alpha": spec.correlation_alpha,
        "allow_overlap": spec.allow_overlap,
    }


def spec_from_dict(doc: Mapping) -> LssSpec:
    try:
        interactions = tuple(
            Interaction(SignedSet.parse(item["set"]), float(item["beta"]))
            for item in doc.get("interactions", ()))
        noise_doc = doc.get("noise", {})
        return LssSpec(
            intercept=float(doc.get("intercept", 0.0)),
            interactions=interactions,
            thresholds={int(k): float(v) for k, v in doc.get("thresholds", {}).items()},
            noise=NoiseSpec(
                family=str(noise_doc.get("family", "gaussian")),
                scale=float(noise_doc.get("scale", 0.0))),
            correlation_alpha=float(doc.get("correlation_alpha", 0.0)),
            allow_overlap=bool(doc.get("allow_overlap", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed LSS spec document: {exc}") from exc


def config_to_dict(config: RfConfig) -> dict:
    return {
        "n_trees": config.n_trees,
        "mtry": config.mtry,
        "epsilon": config.epsilon,
        "min_child_samples": config.min_child_samples,
        "bootstrap": config.bootstrap,
        "min_child_fraction": config.min_child_fraction,
        "seed": config.seed,
    }


def config_from_dict(doc: Mapping) -> RfConfig:
    return RfConfig(
        n_trees=int(doc.get("n_trees", 100)),
        mtry=None if doc.get("mtry") is None else int(doc["mtry"]),
        epsilon=float(doc.get("epsilon", 0.01)),
        min_child_samples=int(doc.get("min_child_samples", 1)),
        bootstrap=bool(doc.get("bootstrap", False)),
        min_child_fraction=float(doc.get("min_child_fraction", 0.0)),
        seed=int(doc.get("seed", 0)),
    )
