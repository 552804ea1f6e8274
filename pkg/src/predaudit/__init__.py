"""Empirical Renyi-DP audits for noisy-argmax private prediction.

The package samples neighboring teacher-vote histograms under configurable
adversary scenarios, runs the Gaussian noisy-argmax mechanism on both sides,
lower-bounds the Renyi divergence of the outcome distributions from finite
samples, computes the exact divergence by quadrature, and compares both
against theoretical upper bounds, composed across queries and converted to
(epsilon, delta) guarantees.
"""

from .audit import (
    AUDIT_METHODS,
    AuditResult,
    DegenerateTally,
    DpPoint,
    EmptySet,
    GridMismatch,
    OutcomeTally,
    approx_dp_audit,
    bootstrap_audit,
    compose_curves,
    k_cut_audit,
    rdp_to_dp,
    scale_curve,
    select_output_set,
    two_cut_audit,
)
from .campaign import CampaignConfig, run_campaign
from .fixtures import (
    FixtureError,
    ScenarioFixture,
    estimate_fixture_from_dumps,
    fixture_from_dict,
    fixture_to_dict,
    load_fixture,
)
from .intervals import (
    BinomialBounds,
    BootstrapLowerBound,
    InvalidCount,
    MultinomialBounds,
    bootstrap_percentile_lower,
    clopper_pearson,
    simultaneous_bounds,
)
from .mechanism import (
    DEFAULT_ORDERS,
    ClassDistribution,
    Histogram,
    MechanismParams,
    NormalizationFailure,
    OrderUnderflow,
    QuadratureFailure,
    RdpCurve,
    class_log_probabilities,
    class_probabilities,
    gaussian_group_rdp_bound,
    gaussian_rdp_bound,
    generic_group_rdp,
    noisy_argmax_batch,
    noisy_argmax_sample,
    renyi_divergence_exact,
)
from .report import AuditReport, QueryAudit, audited_dp_report
from .scenarios import (
    AdversaryConfig,
    KnnOracleDraw,
    RankedQuerySet,
    VariantMismatch,
    VoteModel,
    estimate_vote_distribution,
    knn_expected_influence,
    knn_inclusion_probability,
    prompt_pate_pair,
    sample_capc_pair,
    sample_knn_pair,
    sample_pate_pair,
    simulate_knn_oracle,
    vote_pair_block,
)

__version__ = "0.1.0"

__all__ = [
    "AUDIT_METHODS",
    "AdversaryConfig",
    "AuditReport",
    "AuditResult",
    "BinomialBounds",
    "BootstrapLowerBound",
    "CampaignConfig",
    "ClassDistribution",
    "DEFAULT_ORDERS",
    "DegenerateTally",
    "DpPoint",
    "EmptySet",
    "FixtureError",
    "GridMismatch",
    "Histogram",
    "InvalidCount",
    "KnnOracleDraw",
    "MechanismParams",
    "MultinomialBounds",
    "NormalizationFailure",
    "OrderUnderflow",
    "OutcomeTally",
    "QuadratureFailure",
    "QueryAudit",
    "RankedQuerySet",
    "RdpCurve",
    "ScenarioFixture",
    "VariantMismatch",
    "VoteModel",
    "approx_dp_audit",
    "audited_dp_report",
    "bootstrap_audit",
    "bootstrap_percentile_lower",
    "class_log_probabilities",
    "class_probabilities",
    "clopper_pearson",
    "compose_curves",
    "estimate_fixture_from_dumps",
    "estimate_vote_distribution",
    "fixture_from_dict",
    "fixture_to_dict",
    "gaussian_group_rdp_bound",
    "gaussian_rdp_bound",
    "generic_group_rdp",
    "k_cut_audit",
    "knn_expected_influence",
    "knn_inclusion_probability",
    "load_fixture",
    "noisy_argmax_batch",
    "noisy_argmax_sample",
    "prompt_pate_pair",
    "rdp_to_dp",
    "renyi_divergence_exact",
    "run_campaign",
    "sample_capc_pair",
    "sample_knn_pair",
    "sample_pate_pair",
    "scale_curve",
    "select_output_set",
    "simulate_knn_oracle",
    "simultaneous_bounds",
    "two_cut_audit",
    "vote_pair_block",
]
