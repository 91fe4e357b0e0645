"""Approximate model-X knockoffs with observed-KL robustness diagnostics."""

from ._errors import KnockoffError, NumericalError, ValidationError
from .adversary import AdversaryConfig, AdversaryScenario, lower_bound_value, monte_carlo_levels, psi_test
from .diagnostics import (
    BoundReport,
    KlDiagnostics,
    delta_theta,
    event_e_delta_check,
    gaussian_conditional_evaluator,
    inflation_bound,
    lemma2_bound,
    lemma4_bound,
    observed_kl,
)
from .discrete import DiscreteJoint, KnockoffJoint, check_exchangeability, likelihood_ratio_check, scip_knockoffs
from .filter import SelectionResult, check_tj_property, knockoff_plus_threshold, knockoff_threshold, select
from .gaussian import (
    GaussianModel,
    KnockoffMechanism,
    PrecisionEstimate,
    build_mechanism,
    conditional_of,
    gaussian_mechanism,
    sample_knockoffs,
    select_equicorrelated_d,
)
from .simulator import (
    ScenarioConfig,
    estimate_fdr_power,
    gen_ar1_precision,
    nodewise_estimate,
    perturb_precision,
    run_replicate,
    simulate,
)
from .statistics import AugmentedDesign, check_flip_sign, compute_w, lcd_stats, marginal_stats

__version__ = "0.1.0"
