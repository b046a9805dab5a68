"""Oracle-oriented context tree (VLMC) model selection.

Counting, exact Kullback risk against known sources, penalized selection by
bottom-up pruning, slope-algorithm constant calibration, and a reproducible
Monte-Carlo harness for the renewal-source study.
"""

__version__ = "0.1.0"

from .counting import (
    CountTable,
    FeasibilityPolicy,
    FittedModel,
    TypicalityReport,
    count_sequence,
    empirical_measure,
    feasibility_filter,
    fit_full_model,
    fitted_transitions,
    transition_estimate,
    typicality_report,
)
from .harness import ExperimentConfig, run_experiment
from .risk import (
    RiskReport,
    direct_risk,
    empirical_entropy_term,
    exact_bias,
    kl_tree,
    kl_vector,
    total_risk,
    variance_term,
)
from .rng import stream
from .selection import (
    Penalty,
    SelectionResult,
    SlopePath,
    bootstrap_penalty_table,
    brute_force_select,
    penalty_path,
    penalty_value,
    prune_select,
    select_among,
    slope_calibrate,
)
from .sources import (
    RenewalModel,
    RenewalParams,
    SourceModel,
    bootstrap_resample,
    build_renewal_model,
    build_source_model,
    gap_pmf_from_hazards,
    hazard_rates,
    model_from_json,
    renewal_tree,
    simulate,
    stationarity_residual,
    truncated_poisson_pmf,
)
from .trees import (
    Alphabet,
    ContextTree,
    TreeFormatError,
    context_of,
    enumerate_complete_subtrees,
    format_tree,
    is_subtree,
    join,
    parse_tree,
    root_tree,
    suffix_context,
    tree_from_json,
    tree_to_json,
)

__all__ = [name for name in dir() if not name.startswith("_")]
