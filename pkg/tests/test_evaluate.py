import math

import numpy as np
import pytest

from lssfind.evaluate import (
    FindParams,
    TheoremConstants,
    basic_signed_interactions,
    bound_b,
    check_theorem_bounds,
    derive_run_seed,
    epsilon_for_window,
    eta_window,
    jaccard_score,
    optimal_mtry,
    oracle_feature_set,
    run_scenario,
    union_signed_interactions,
)
from lssfind.forest import fit_forest
from lssfind.generate import ScenarioConfig, sample_from_spec
from lssfind.model import (
    Interaction,
    LssSpec,
    RfConfig,
    SignedFeature,
    SignedSet,
)

PAIR_SPEC = LssSpec(
    interactions=(Interaction(SignedSet.parse("1-,2-"), 1.0),),
    thresholds={1: 0.5, 2: 0.5},
)


class TestJaccard:
    def test_cases(self):
        a = [SignedSet.parse("1-,2-")]
        b = [SignedSet.parse("1-,2-"), SignedSet.parse("3+")]
        assert jaccard_score(a, a) == 1.0
        assert jaccard_score(a, b) == 0.5
        assert jaccard_score(a, []) == 0.0
        assert jaccard_score([], []) == 1.0

    def test_no_partial_credit(self):
        truth = [SignedSet.parse("1-,2-")]
        assert jaccard_score(truth, [SignedSet.parse("1-")]) == 0.0
        assert jaccard_score(truth, [SignedSet.parse("1-,2+")]) == 0.0


class TestOracleFeatureSet:
    def path(self, *steps):
        return [(SignedFeature.parse(s), 0.5) for s in steps]

    def test_correct_directions_collected(self):
        out = oracle_feature_set(PAIR_SPEC, self.path("1-", "2-"))
        assert str(out) == "1-,2-"

    def test_wrong_direction_blocks_partner(self):
        # once the path leaves the interaction's region, the partner feature
        # is no longer desirable
        out = oracle_feature_set(PAIR_SPEC, self.path("1+", "2-"))
        assert str(out) == "1+"

    def test_noise_features_never_desirable(self):
        spec = LssSpec(interactions=PAIR_SPEC.interactions,
                       thresholds=PAIR_SPEC.thresholds)
        out = oracle_feature_set(spec, self.path("3-", "1-", "2-"))
        assert str(out) == "1-,2-"

    def test_only_first_occurrence_counts(self):
        out = oracle_feature_set(PAIR_SPEC, self.path("1-", "1+", "2-"))
        assert str(out) == "1-,2-"

    def test_used_correct_sign_blocks_reuse(self):
        # feature 2 already went the correct way; a later node cannot make it
        # desirable again
        out = oracle_feature_set(PAIR_SPEC, self.path("2-", "1-"))
        assert str(out) == "1-,2-"

    def test_overlap_rejected(self):
        spec = LssSpec(
            interactions=(Interaction(SignedSet.parse("1-,2-"), 1.0),
                          Interaction(SignedSet.parse("2-,3-"), 1.0)),
            thresholds={1: 0.5, 2: 0.5, 3: 0.5},
            allow_overlap=True)
        with pytest.raises(ValueError):
            oracle_feature_set(spec, self.path("1-"))


class TestTheoremConstants:
    def test_balanced_subsample(self):
        spec = LssSpec(
            interactions=(Interaction(SignedSet.parse("1-,2-"), 1.0),),
            thresholds={1: 0.4, 2: 0.7})
        tc = TheoremConstants.from_spec(spec, mtry=10, p=20)
        assert tc.ok
        assert tc.c_beta == 1.0
        assert tc.c_gamma == pytest.approx(0.3)  # min(min(g, 1 - g))
        assert tc.s == 2
        assert tc.c_m == pytest.approx(min(8 / 18, 1 - 10 / 18))

    def test_centered_threshold_flagged(self):
        # a threshold at exactly 0.5 leaves no strict margin
        tc = TheoremConstants.from_spec(PAIR_SPEC, mtry=10, p=20)
        assert not tc.ok

    def test_mtry_too_large(self):
        tc = TheoremConstants.from_spec(PAIR_SPEC, mtry=20, p=20)
        assert not tc.ok
        assert any("mtry" in v for v in tc.violations)

    def test_p_not_exceeding_s(self):
        tc = TheoremConstants.from_spec(PAIR_SPEC, mtry=1, p=2)
        assert not tc.ok


class TestBoundB:
    # values computed independently at 60-digit precision
    FROZEN = [
        ((0.003, 0.9, 0.3, 0.4, 2), 0.9873188805420848),
        ((1e-08, 1.0, 0.25, 0.45, 3), 0.9412792209252703),
        ((0.01, 2.0, 0.45, 0.3, 1), 0.6511274559738975),
    ]

    @pytest.mark.parametrize("args,expected", FROZEN)
    def test_frozen_values(self, args, expected):
        eps, cb, cg, cm, s = args
        tc = TheoremConstants(c_beta=cb, c_gamma=cg, c_m=cm, s=s)
        assert bound_b(eps, tc) == pytest.approx(expected, rel=1e-12)

    def test_zero_epsilon(self):
        tc = TheoremConstants(c_beta=1.0, c_gamma=0.3, c_m=0.4, s=2)
        assert bound_b(0.0, tc) == 0.0

    def test_monotone_in_epsilon(self):
        tc = TheoremConstants(c_beta=1.0, c_gamma=0.3, c_m=0.4, s=2)
        values = [bound_b(e, tc) for e in (1e-80, 1e-40, 1e-10, 1e-3)]
        assert values == sorted(values)

    def test_negative_rejected(self):
        tc = TheoremConstants(c_beta=1.0, c_gamma=0.3, c_m=0.4, s=2)
        with pytest.raises(ValueError):
            bound_b(-1e-3, tc)


class TestEtaWindow:
    def test_window_shape(self):
        tc = TheoremConstants(c_beta=1.0, c_gamma=0.3, c_m=0.4, s=2)
        lo, hi = eta_window(1e-60, tc)
        assert hi == pytest.approx(0.4 ** 2 / 2)
        assert lo == pytest.approx(4 * bound_b(1e-60, tc))

    def test_epsilon_for_window_places_lower_edge(self):
        tc = TheoremConstants(c_beta=1.0, c_gamma=0.29, c_m=0.44, s=2)
        eps = epsilon_for_window(tc, margin=0.25)
        lo, hi = eta_window(eps, tc)
        assert lo == pytest.approx(0.25 * hi, rel=1e-6)
        assert lo < hi


class TestOptimalMtry:
    def test_examples(self):
        assert optimal_mtry(20, 2) == round(20 * (0.5 - 2 / 36))
        assert optimal_mtry(20, 2) == 9
        assert optimal_mtry(10, 4) == 3  # 10*(0.5-0.25)=2.5 rounds up
        assert optimal_mtry(100, 0) == 50

    def test_clamped(self):
        assert optimal_mtry(4, 8) == 1
        with pytest.raises(ValueError):
            optimal_mtry(2, 1)


class TestUnionInteractions:
    def test_pair_spec(self):
        out = union_signed_interactions(PAIR_SPEC)
        assert {str(s) for s in out} == {"1-,2-"}

    def test_two_multis(self):
        spec = LssSpec(
            interactions=(Interaction(SignedSet.parse("1-,2-"), 1.0),
                          Interaction(SignedSet.parse("3-,4-"), 1.0)),
            thresholds={k: 0.5 for k in range(1, 5)})
        out = {str(s) for s in union_signed_interactions(spec)}
        assert out == {"1-,2-", "3-,4-", "1-,2-,3-,4-"}

    def test_singleton_gets_both_signs(self):
        spec = LssSpec(
            interactions=(Interaction(SignedSet.parse("1-"), 1.0),),
            thresholds={1: 0.5})
        out = {str(s) for s in union_signed_interactions(spec)}
        assert out == {"1-", "1+"}


class TestCheckBounds:
    def test_report_on_pair_model(self):
        ds = sample_from_spec(PAIR_SPEC, 500, 5, seed=0)
        forest = fit_forest(ds, RfConfig(n_trees=20, mtry=2, seed=0))
        report = check_theorem_bounds(forest, PAIR_SPEC, 0.01)
        by_set = {str(e.signed_set): e for e in report.entries}
        assert by_set["1-,2-"].is_union_interaction
        assert by_set["1-,2-"].cap == 0.25
        non_union = [e for e in report.entries if not e.is_union_interaction]
        assert non_union
        for e in report.entries:
            assert e.dwp <= e.cap + 1e-12
            if e.is_union_interaction:
                assert e.ceiling is None
            else:
                assert e.floor is None

    def test_invalid_spec_rejected(self, small_forest):
        forest, _ = small_forest
        bad = LssSpec(interactions=(Interaction(SignedSet.parse("1-"), 0.0),),
                      thresholds={1: 0.5})
        with pytest.raises(ValueError):
            check_theorem_bounds(forest, bad, 0.01)


class TestHarness:
    def test_derive_run_seed_stable(self):
        assert derive_run_seed(0, 0) == derive_run_seed(0, 0)
        assert derive_run_seed(0, 0) != derive_run_seed(0, 1)
        assert derive_run_seed(1, 0) != derive_run_seed(0, 0)

    def test_run_scenario_smoke(self):
        sc = ScenarioConfig(n_interactions=1, interaction_order=2,
                            n_samples=300, n_features=5, snr=50, seed=0)
        result = run_scenario(sc, 3, FindParams(n_trees=20), threads=2)
        assert len(result.runs) == 3
        assert all(0.0 <= r.score <= 1.0 for r in result.runs)
        assert result.mean_score == pytest.approx(
            np.mean([r.score for r in result.runs]))
        # per-run seeds differ, so datasets differ
        assert len({r.seed for r in result.runs}) == 3

    def test_run_scenario_deterministic(self):
        sc = ScenarioConfig(n_interactions=1, interaction_order=2,
                            n_samples=200, n_features=4, snr=50, seed=1)
        a = run_scenario(sc, 2, FindParams(n_trees=10))
        b = run_scenario(sc, 2, FindParams(n_trees=10), threads=4)
        assert [r.score for r in a.runs] == [r.score for r in b.runs]
        assert [r.found for r in a.runs] == [r.found for r in b.runs]


def test_basic_signed_interactions():
    assert [str(s) for s in basic_signed_interactions(PAIR_SPEC)] == ["1-,2-"]
