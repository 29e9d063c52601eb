"""Boolean interaction discovery from random-forest decision paths."""

from .model import (
    Dataset,
    Interaction,
    LssSpec,
    NoiseSpec,
    RfConfig,
    SignedFeature,
    SignedSet,
    canonical_signed_set,
    response_mean,
    validate_lss_spec,
)
from .generate import ScenarioConfig, gen_dataset, gen_features, snr_to_sigma, solve_threshold
from .forest import Forest, Tree, best_split, fit_forest, fit_tree, impurity_decrease
from .dwp import DwpEstimate, PathItemset, collect_itemsets, dwp_exact, dwp_sample, path_itemsets
from .mining import FrequentSet, brute_force_frequent, lssfind, maximal_sets, mine_frequent
from .evaluate import (
    FindParams,
    TheoremConstants,
    bound_b,
    check_theorem_bounds,
    jaccard_score,
    optimal_mtry,
    oracle_feature_set,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset", "Interaction", "LssSpec", "NoiseSpec", "RfConfig",
    "SignedFeature", "SignedSet", "canonical_signed_set", "response_mean",
    "validate_lss_spec",
    "ScenarioConfig", "gen_dataset", "gen_features", "snr_to_sigma",
    "solve_threshold",
    "Forest", "Tree", "best_split", "fit_forest", "fit_tree",
    "impurity_decrease",
    "DwpEstimate", "PathItemset", "collect_itemsets", "dwp_exact",
    "dwp_sample", "path_itemsets",
    "FrequentSet", "brute_force_frequent", "lssfind", "maximal_sets",
    "mine_frequent",
    "FindParams", "TheoremConstants", "bound_b", "check_theorem_bounds",
    "jaccard_score", "optimal_mtry", "oracle_feature_set", "run_scenario",
]
