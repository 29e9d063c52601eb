"""Synthetic data generation: calibrated benchmark scenarios with optional
overlapping interactions, correlated features, and heavy-tail noise."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Mapping

import numpy as np
from scipy.stats import norm

from .model import (
    Dataset,
    Interaction,
    LssSpec,
    NoiseSpec,
    SignedFeature,
    SignedSet,
    canonical_signed_set,
    response_mean_matrix,
    validate_lss_spec,
)

# internal sub-stream ids for seed derivation
_STREAM_FEATURES = 0
_STREAM_NOISE = 1


@dataclass(frozen=True)
class ScenarioConfig:
    """A benchmark cell: K interactions of order L on p features, with a common
    threshold calibrated so a target fraction of points activates the signal."""

    n_interactions: int
    interaction_order: int
    n_samples: int
    n_features: int
    snr: float = math.inf
    noise_family: str = "gaussian"
    correlation_alpha: float = 0.0
    overlap: int = 0
    coverage: float = 0.5
    seed: int = 0

    def __post_init__(self):
        k, order = self.n_interactions, self.interaction_order
        if k < 1 or order < 1:
            raise ValueError("need at least one interaction of order >= 1")
        if not (0 <= self.overlap < order):
            raise ValueError(f"overlap must be in [0, order), got {self.overlap}")
        needed = k * order - self.overlap * (k - 1)
        if needed > self.n_features:
            raise ValueError(
                f"{needed} signal features do not fit into p={self.n_features}")
        if not (0.0 < self.coverage < 1.0):
            raise ValueError("coverage must be in (0,1)")
        if self.snr <= 0:
            raise ValueError("snr must be positive")
        if not (0.0 <= self.correlation_alpha < 1.0):
            raise ValueError("correlation_alpha must be in [0,1)")

    def feature_layout(self) -> list[tuple[int, ...]]:
        """1-based feature indices per interaction; consecutive interactions
        share `overlap` trailing/leading features."""
        step = self.interaction_order - self.overlap
        return [
            tuple(range(1 + j * step, 1 + j * step + self.interaction_order))
            for j in range(self.n_interactions)
        ]


def scenario_to_dict(sc: ScenarioConfig) -> dict:
    return {
        "interactions": sc.n_interactions,
        "order": sc.interaction_order,
        "n": sc.n_samples,
        "p": sc.n_features,
        "snr": "inf" if math.isinf(sc.snr) else sc.snr,
        "noise_family": sc.noise_family,
        "correlation_alpha": sc.correlation_alpha,
        "overlap": sc.overlap,
        "coverage": sc.coverage,
        "seed": sc.seed,
    }


def scenario_from_dict(doc: Mapping) -> ScenarioConfig:
    try:
        snr = doc.get("snr", "inf")
        return ScenarioConfig(
            n_interactions=int(doc["interactions"]),
            interaction_order=int(doc["order"]),
            n_samples=int(doc["n"]),
            n_features=int(doc["p"]),
            snr=math.inf if snr in ("inf", None) else float(snr),
            noise_family=str(doc.get("noise_family", "gaussian")),
            correlation_alpha=float(doc.get("correlation_alpha", 0.0)),
            overlap=int(doc.get("overlap", 0)),
            coverage=float(doc.get("coverage", 0.5)),
            seed=int(doc.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed scenario document: {exc}") from exc


def gen_features(n: int, p: int, correlation_alpha: float = 0.0,
                 seed: int = 0) -> np.ndarray:
    """Sample an n-by-p feature matrix with Uniform[0,1] marginals.

    alpha=0 gives i.i.d. uniforms.  alpha>0 uses a Gaussian copula with AR(1)
    covariance alpha^|i-j|, so columns are correlated but each marginal stays
    uniform (thresholds keep their quantile meaning).
    """
    if n < 0 or p < 1:
        raise ValueError("need n >= 0 and p >= 1")
    if not (0.0 <= correlation_alpha < 1.0):
        raise ValueError(f"correlation_alpha must be in [0,1): {correlation_alpha}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, _STREAM_FEATURES]))
    if correlation_alpha == 0.0:
        return rng.random((n, p))
    z = rng.standard_normal((n, p))
    # AR(1) processes admit a sequential construction; equivalent to the
    # Cholesky factor of the alpha^|i-j| covariance but O(np).
    a = correlation_alpha
    w = np.empty_like(z)
    w[:, 0] = z[:, 0]
    for j in range(1, p):
        w[:, j] = a * w[:, j - 1] + math.sqrt(1.0 - a * a) * z[:, j]
    return norm.cdf(w)


def union_coverage(tau: float, layout: list[tuple[int, ...]]) -> float:
    """P(X lands in the union of the layout's hyper-rectangles) for independent
    Uniform[0,1] features, every active side being {x <= tau}.

    Inclusion-exclusion over rectangles; exact also for overlapping layouts
    because an intersection's probability is tau^(#distinct features).
    """
    total = 0.0
    k = len(layout)
    for r in range(1, k + 1):
        for subset in combinations(range(k), r):
            n_feat = len(set().union(*(set(layout[j]) for j in subset)))
            total += (-1) ** (r + 1) * tau ** n_feat
    return total


def solve_threshold(n_interactions: int, interaction_order: int, overlap: int,
                    coverage: float) -> float:
    """Find the common threshold tau in (0,1) so the union region has the given
    probability mass; bisection to 1e-12."""
    if not (0.0 < coverage < 1.0):
        raise ValueError("coverage must be in (0,1)")
    layout = ScenarioConfig(
        n_interactions=n_interactions, interaction_order=interaction_order,
        n_samples=0,
        n_features=n_interactions * interaction_order + 1,
        overlap=overlap, coverage=coverage).feature_layout()
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if union_coverage(mid, layout) < coverage:
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    if abs(union_coverage(tau, layout) - coverage) > 1e-10:
        raise ValueError("no threshold in (0,1) achieves the requested coverage")
    return tau


def _side_volume(sign: int, gamma: float) -> float:
    return gamma if sign < 0 else 1.0 - gamma


def signal_variance(spec: LssSpec) -> float:
    """Variance of the noiseless response under independent uniform features.

    Sum of Bernoulli variances beta_j^2 q_j (1-q_j) plus pairwise covariance
    terms; the covariances vanish for disjoint interactions.
    """
    inters = spec.interactions
    q = []
    for inter in inters:
        prob = 1.0
        for m in inter.signed_set:
            prob *= _side_volume(m.sign, spec.thresholds[m.index])
        q.append(prob)
    var = sum(inter.beta ** 2 * qj * (1.0 - qj) for inter, qj in zip(inters, q))
    for (a, qa), (b, qb) in combinations(zip(inters, q), 2):
        shared = a.signed_set.feature_indices & b.signed_set.feature_indices
        if not shared:
            continue
        sign_a = {m.index: m.sign for m in a.signed_set}
        sign_b = {m.index: m.sign for m in b.signed_set}
        if any(sign_a[k] != sign_b[k] for k in shared):
            q_joint = 0.0
        else:
            q_joint = 1.0
            for k in (a.signed_set.feature_indices | b.signed_set.feature_indices):
                q_joint *= _side_volume(sign_a.get(k, sign_b.get(k)),
                                        spec.thresholds[k])
        var += 2.0 * a.beta * b.beta * (q_joint - qa * qb)
    return var


def snr_to_sigma(spec: LssSpec, snr: float) -> float:
    """Noise scale achieving the requested signal-to-noise ratio.

    Gaussian: the standard deviation.  Laplace: the scale b with 2b^2 matching
    the target variance.  Cauchy has no variance; by convention we reuse the
    Gaussian sigma as its scale.
    """
    if snr <= 0:
        raise ValueError("snr must be positive")
    if math.isinf(snr):
        return 0.0
    sigma2 = signal_variance(spec) / snr
    sigma = math.sqrt(sigma2)
    if spec.noise.family == "laplace":
        return sigma / math.sqrt(2.0)
    return sigma


def build_scenario_spec(scenario: ScenarioConfig) -> LssSpec:
    """The LssSpec a scenario induces: unit coefficients, all signs negative,
    one calibrated threshold shared by every signal feature."""
    tau = solve_threshold(scenario.n_interactions, scenario.interaction_order,
                          scenario.overlap, scenario.coverage)
    layout = scenario.feature_layout()
    interactions = tuple(
        Interaction(canonical_signed_set(SignedFeature(k, -1) for k in feats), 1.0)
        for feats in layout)
    thresholds = {k: tau for feats in layout for k in feats}
    base = LssSpec(
        intercept=0.0,
        interactions=interactions,
        thresholds=thresholds,
        noise=NoiseSpec(scenario.noise_family, 0.0),
        correlation_alpha=scenario.correlation_alpha,
        allow_overlap=scenario.overlap > 0,
    )
    scale = snr_to_sigma(base, scenario.snr)
    return LssSpec(
        intercept=base.intercept,
        interactions=base.interactions,
        thresholds=base.thresholds,
        noise=NoiseSpec(scenario.noise_family, scale),
        correlation_alpha=scenario.correlation_alpha,
        allow_overlap=base.allow_overlap,
    )


def sample_noise(family: str, scale: float, n: int, rng: np.random.Generator) -> np.ndarray:
    if scale == 0.0:
        return np.zeros(n)
    if family == "gaussian":
        return rng.normal(0.0, scale, n)
    if family == "laplace":
        return rng.laplace(0.0, scale, n)
    if family == "cauchy":
        return scale * rng.standard_cauchy(n)
    raise ValueError(f"unknown noise family {family!r}")


def gen_dataset(scenario: ScenarioConfig) -> tuple[Dataset, LssSpec]:
    """Build the scenario's spec and sample a dataset from it.

    Deterministic for a given scenario: features and noise come from separate
    sub-streams of the scenario seed.
    """
    spec = build_scenario_spec(scenario)
    violations = validate_lss_spec(spec)
    if violations:
        raise ValueError("scenario induced an invalid spec: " + "; ".join(violations))
    x = gen_features(scenario.n_samples, scenario.n_features,
                     scenario.correlation_alpha, scenario.seed)
    noise_rng = np.random.default_rng(
        np.random.SeedSequence([scenario.seed, _STREAM_NOISE]))
    y = response_mean_matrix(spec, x) + sample_noise(
        spec.noise.family, spec.noise.scale, scenario.n_samples, noise_rng)
    return Dataset(x, y), spec


def sample_from_spec(spec: LssSpec, n: int, p: int, seed: int = 0) -> Dataset:
    """Sample n points for an arbitrary (validated) spec on p features."""
    if p < spec.max_feature_index():
        raise ValueError(f"p={p} smaller than the spec's largest feature index")
    x = gen_features(n, p, spec.correlation_alpha, seed)
    noise_rng = np.random.default_rng(np.random.SeedSequence([seed, _STREAM_NOISE]))
    y = response_mean_matrix(spec, x) + sample_noise(
        spec.noise.family, spec.noise.scale, n, noise_rng)
    return Dataset(x, y)
