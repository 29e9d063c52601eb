import math

import numpy as np
import pytest

from lssfind.generate import (
    ScenarioConfig,
    build_scenario_spec,
    gen_dataset,
    gen_features,
    sample_from_spec,
    sample_noise,
    scenario_from_dict,
    scenario_to_dict,
    signal_variance,
    snr_to_sigma,
    solve_threshold,
    union_coverage,
)
from lssfind.model import (
    Interaction,
    LssSpec,
    NoiseSpec,
    SignedSet,
    response_mean_matrix,
    validate_lss_spec,
)

# threshold roots solved independently (closed forms / polynomial roots)
TAU_1x2 = math.sqrt(0.5)
TAU_2x2 = 0.5411961001461969          # sqrt(1 - sqrt(0.5))
TAU_2x3 = 0.6641045243088701          # (1 - sqrt(0.5))^(1/3)
TAU_2x2_OV1 = 0.5969682832373151      # root of 2 t^2 - t^3 = 0.5 in (0,1)


class TestScenarioConfig:
    def test_layout_disjoint(self):
        sc = ScenarioConfig(n_interactions=2, interaction_order=3,
                            n_samples=10, n_features=20)
        assert sc.feature_layout() == [(1, 2, 3), (4, 5, 6)]

    def test_layout_overlap(self):
        sc = ScenarioConfig(n_interactions=2, interaction_order=2,
                            n_samples=10, n_features=20, overlap=1)
        assert sc.feature_layout() == [(1, 2), (2, 3)]

    @pytest.mark.parametrize("kwargs", [
        {"n_interactions": 0, "interaction_order": 2},
        {"n_interactions": 1, "interaction_order": 2, "overlap": 2},
        {"n_interactions": 3, "interaction_order": 4, "n_features": 5},
        {"n_interactions": 1, "interaction_order": 2, "coverage": 0.0},
        {"n_interactions": 1, "interaction_order": 2, "snr": 0.0},
        {"n_interactions": 1, "interaction_order": 2, "correlation_alpha": 1.0},
    ])
    def test_invalid(self, kwargs):
        base = dict(n_samples=10, n_features=20)
        with pytest.raises(ValueError):
            ScenarioConfig(**{**base, **kwargs})

    def test_dict_round_trip(self):
        sc = ScenarioConfig(n_interactions=2, interaction_order=3, n_samples=100,
                            n_features=20, snr=10.0, noise_family="cauchy",
                            correlation_alpha=0.5, overlap=1, coverage=0.4, seed=9)
        assert scenario_from_dict(scenario_to_dict(sc)) == sc

    def test_dict_round_trip_infinite_snr(self):
        sc = ScenarioConfig(n_interactions=1, interaction_order=2,
                            n_samples=10, n_features=5)
        doc = scenario_to_dict(sc)
        assert doc["snr"] == "inf"
        assert math.isinf(scenario_from_dict(doc).snr)


class TestGenFeatures:
    def test_deterministic_and_in_unit_cube(self):
        a = gen_features(100, 5, seed=1)
        b = gen_features(100, 5, seed=1)
        assert np.array_equal(a, b)
        assert a.shape == (100, 5)
        assert a.min() >= 0.0 and a.max() <= 1.0
        assert not np.array_equal(a, gen_features(100, 5, seed=2))

    def test_correlated_marginals_stay_uniform(self):
        x = gen_features(20000, 4, correlation_alpha=0.8, seed=0)
        # each column's quartiles near the uniform ones
        for j in range(4):
            q = np.quantile(x[:, j], [0.25, 0.5, 0.75])
            assert np.allclose(q, [0.25, 0.5, 0.75], atol=0.02)

    def test_correlation_decays_with_lag(self):
        x = gen_features(20000, 4, correlation_alpha=0.8, seed=0)
        c = np.corrcoef(x.T)
        assert c[0, 1] > 0.6
        assert c[0, 1] > c[0, 2] > c[0, 3] > 0.2

    def test_zero_alpha_uncorrelated(self):
        x = gen_features(20000, 3, correlation_alpha=0.0, seed=0)
        c = np.corrcoef(x.T)
        assert abs(c[0, 1]) < 0.03

    def test_validation(self):
        with pytest.raises(ValueError):
            gen_features(10, 0)
        with pytest.raises(ValueError):
            gen_features(10, 2, correlation_alpha=1.0)


class TestThresholdCalibration:
    def test_union_coverage_single_rectangle(self):
        assert union_coverage(0.3, [(1, 2)]) == pytest.approx(0.09)

    def test_union_coverage_disjoint(self):
        # 2 t^2 - t^4 by inclusion-exclusion
        t = 0.6
        assert union_coverage(t, [(1, 2), (3, 4)]) == pytest.approx(
            2 * t ** 2 - t ** 4)

    def test_union_coverage_overlapping(self):
        t = 0.6
        assert union_coverage(t, [(1, 2), (2, 3)]) == pytest.approx(
            2 * t ** 2 - t ** 3)

    @pytest.mark.parametrize("k,order,overlap,expected", [
        (1, 2, 0, TAU_1x2),
        (2, 2, 0, TAU_2x2),
        (2, 3, 0, TAU_2x3),
        (2, 2, 1, TAU_2x2_OV1),
    ])
    def test_solve_threshold_known_roots(self, k, order, overlap, expected):
        assert solve_threshold(k, order, overlap, 0.5) == pytest.approx(
            expected, abs=1e-10)

    def test_solve_threshold_hits_requested_coverage(self):
        for coverage in (0.2, 0.5, 0.8):
            tau = solve_threshold(2, 3, 1, coverage)
            sc = ScenarioConfig(n_interactions=2, interaction_order=3,
                                n_samples=10, n_features=20, overlap=1)
            assert union_coverage(tau, sc.feature_layout()) == pytest.approx(
                coverage, abs=1e-10)


class TestSignalVariance:
    def test_single_interaction_bernoulli(self):
        spec = LssSpec(interactions=(Interaction(SignedSet.parse("1-,2-"), 2.0),),
                       thresholds={1: 0.5, 2: 0.5})
        q = 0.25
        assert signal_variance(spec) == pytest.approx(4.0 * q * (1 - q))

    def test_disjoint_interactions_add(self):
        spec = LssSpec(
            interactions=(Interaction(SignedSet.parse("1-"), 1.0),
                          Interaction(SignedSet.parse("2-"), 3.0)),
            thresholds={1: 0.3, 2: 0.6})
        expected = 0.3 * 0.7 + 9.0 * 0.6 * 0.4
        assert signal_variance(spec) == pytest.approx(expected)

    def test_overlap_matches_monte_carlo(self):
        spec = LssSpec(
            interactions=(Interaction(SignedSet.parse("1-,2-"), 1.0),
                          Interaction(SignedSet.parse("2-,3-"), 1.0)),
            thresholds={1: 0.6, 2: 0.6, 3: 0.6},
            allow_overlap=True)
        rng = np.random.default_rng(5)
        x = rng.random((400000, 3))
        mc = float(np.var(response_mean_matrix(spec, x)))
        assert signal_variance(spec) == pytest.approx(mc, rel=0.02)


class TestNoise:
    def test_snr_to_sigma_gaussian(self):
        spec = LssSpec(interactions=(Interaction(SignedSet.parse("1-,2-"), 1.0),),
                       thresholds={1: 0.5, 2: 0.5})
        sigma = snr_to_sigma(spec, 10.0)
        assert sigma == pytest.approx(math.sqrt(signal_variance(spec) / 10.0))
        assert snr_to_sigma(spec, math.inf) == 0.0

    def test_laplace_scale_matches_variance(self):
        spec = LssSpec(interactions=(Interaction(SignedSet.parse("1-"), 1.0),),
                       thresholds={1: 0.5},
                       noise=NoiseSpec("laplace", 0.0))
        b = snr_to_sigma(spec, 4.0)
        assert 2.0 * b * b == pytest.approx(signal_variance(spec) / 4.0)

    def test_sample_noise_families(self):
        rng = np.random.default_rng(0)
        assert np.array_equal(sample_noise("gaussian", 0.0, 5, rng), np.zeros(5))
        g = sample_noise("gaussian", 2.0, 100000, rng)
        assert np.std(g) == pytest.approx(2.0, rel=0.02)
        l = sample_noise("laplace", 1.0, 100000, rng)
        assert np.var(l) == pytest.approx(2.0, rel=0.05)
        c = sample_noise("cauchy", 1.0, 1000, rng)
        assert np.median(np.abs(c)) == pytest.approx(1.0, rel=0.2)
        with pytest.raises(ValueError):
            sample_noise("weird", 1.0, 5, rng)


class TestBuildScenario:
    def test_spec_shape(self):
        sc = ScenarioConfig(n_interactions=2, interaction_order=2, n_samples=10,
                            n_features=20, snr=50)
        spec = build_scenario_spec(sc)
        assert validate_lss_spec(spec) == []
        assert [str(i.signed_set) for i in spec.interactions] == ["1-,2-", "3-,4-"]
        taus = set(spec.thresholds.values())
        assert len(taus) == 1
        assert taus.pop() == pytest.approx(TAU_2x2, abs=1e-10)
        assert spec.noise.scale > 0

    def test_overlap_allowed(self):
        sc = ScenarioConfig(n_interactions=2, interaction_order=2, n_samples=10,
                            n_features=20, overlap=1)
        spec = build_scenario_spec(sc)
        assert spec.allow_overlap
        assert validate_lss_spec(spec) == []


class TestGenDataset:
    def test_deterministic(self):
        sc = ScenarioConfig(n_interactions=1, interaction_order=2,
                            n_samples=50, n_features=5, snr=10, seed=3)
        d1, s1 = gen_dataset(sc)
        d2, s2 = gen_dataset(sc)
        assert np.array_equal(d1.x, d2.x) and np.array_equal(d1.y, d2.y)
        assert s1 == s2

    def test_noiseless_matches_regression_function(self):
        sc = ScenarioConfig(n_interactions=1, interaction_order=2,
                            n_samples=50, n_features=5, seed=3)
        ds, spec = gen_dataset(sc)
        assert np.array_equal(ds.y, response_mean_matrix(spec, ds.x))

    def test_empirical_coverage_near_half(self):
        sc = ScenarioConfig(n_interactions=2, interaction_order=2,
                            n_samples=20000, n_features=6, seed=0)
        ds, spec = gen_dataset(sc)
        assert np.mean(ds.y > 0) == pytest.approx(0.5, abs=0.02)

    def test_snr_realized(self):
        sc = ScenarioConfig(n_interactions=1, interaction_order=2,
                            n_samples=50000, n_features=4, snr=10, seed=1)
        ds, spec = gen_dataset(sc)
        signal = response_mean_matrix(spec, ds.x)
        noise = ds.y - signal
        assert np.var(signal) / np.var(noise) == pytest.approx(10.0, rel=0.05)


class TestSampleFromSpec:
    def test_p_too_small(self):
        spec = LssSpec(interactions=(Interaction(SignedSet.parse("1-,4-"), 1.0),),
                       thresholds={1: 0.5, 4: 0.5})
        with pytest.raises(ValueError):
            sample_from_spec(spec, 10, 3)

    def test_uses_spec_correlation(self):
        spec = LssSpec(interactions=(Interaction(SignedSet.parse("1-"), 1.0),),
                       thresholds={1: 0.5}, correlation_alpha=0.9)
        ds = sample_from_spec(spec, 20000, 3, seed=0)
        assert np.corrcoef(ds.x[:, 0], ds.x[:, 1])[0, 1] > 0.7
