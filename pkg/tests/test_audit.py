"""Audit statistics: interval corners, bootstrap, composition, DP conversion."""

import math

import numpy as np
import pytest

from predaudit.audit import (
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
from predaudit.intervals import clopper_pearson
from predaudit.mechanism import DEFAULT_ORDERS, RdpCurve

TALLY = OutcomeTally(counts_s=(800, 150, 50), counts_s_prime=(600, 300, 100))
ORDERS = (2.0, 4.0, 8.0)


def binary_divergence(alpha, p, q):
    return max(0.0, math.log(p ** alpha * q ** (1 - alpha)
                             + (1 - p) ** alpha * (1 - q) ** (1 - alpha))
               / (alpha - 1))


# ---------------------------------------------------------------------------
# OutcomeTally


def test_tally_from_winners_counts_classes():
    tally = OutcomeTally.from_winners(np.asarray([0, 0, 2, 1]),
                                      np.asarray([3, 3, 3, 0]), 4)
    assert tally.counts_s == (2, 1, 1, 0)
    assert tally.counts_s_prime == (1, 0, 0, 3)
    assert tally.num_classes == 4
    assert tally.trials_s == tally.trials_s_prime == 4


def test_tally_addition_merges_counts():
    a = OutcomeTally((1, 2), (3, 4))
    b = OutcomeTally((10, 20), (30, 40))
    merged = a + b
    assert merged.counts_s == (11, 22)
    assert merged.counts_s_prime == (33, 44)
    with pytest.raises(ValueError):
        a + OutcomeTally((1, 2, 3), (1, 2, 3))


def test_tally_validation():
    with pytest.raises(ValueError):
        OutcomeTally((5,), (5,))
    with pytest.raises(ValueError):
        OutcomeTally((5, 5), (5, 5, 5))
    with pytest.raises(ValueError):
        OutcomeTally((5, -1), (5, 5))


# ---------------------------------------------------------------------------
# 2-cut audit


def test_two_cut_matches_hand_assembled_corners():
    confidence = 0.95
    cp_confidence = (1.0 + confidence) / 2.0
    b1 = clopper_pearson(800, 1000, cp_confidence)
    b2 = clopper_pearson(600, 1000, cp_confidence)
    result = two_cut_audit(TALLY, (0,), ORDERS, confidence)
    for alpha, value in zip(result.curve.orders, result.curve.values):
        expected = max(0.0, math.log(
            b1.lower ** alpha * b2.upper ** (1 - alpha)
            + (1 - b1.upper) ** alpha * (1 - b2.lower) ** (1 - alpha))
            / (alpha - 1))
        assert value == pytest.approx(expected, abs=1e-12)


def test_two_cut_flags_and_metadata():
    result = two_cut_audit(TALLY, (2, 0), ORDERS)
    assert result.method == "two_cut"
    assert result.output_set == (0, 2)  # sorted
    assert result.valid == (True,) * 3
    assert result.reliable == (True,) * 3
    assert result.confidence == 0.95


def test_two_cut_below_plug_in():
    # Interval corners always sit inside the interval, so the bound is
    # strictly below the plug-in statistic whenever intervals have width.
    result = two_cut_audit(TALLY, (0,), ORDERS)
    for alpha, value in zip(ORDERS, result.curve.values):
        assert 0.0 < value < binary_divergence(alpha, 0.8, 0.6)


def test_two_cut_tightens_with_lower_confidence():
    strict = two_cut_audit(TALLY, (0,), ORDERS, confidence=0.99)
    loose = two_cut_audit(TALLY, (0,), ORDERS, confidence=0.9)
    for s, l in zip(strict.curve.values, loose.curve.values):
        assert s < l


def test_two_cut_zero_successes_stays_finite():
    tally = OutcomeTally((0, 100), (5, 95))
    result = two_cut_audit(tally, (0,), ORDERS)
    assert all(v >= 0.0 and math.isfinite(v) for v in result.curve.values)


def test_two_cut_rejects_bad_input():
    with pytest.raises(EmptySet):
        two_cut_audit(TALLY, ())
    with pytest.raises(EmptySet):
        two_cut_audit(TALLY, (0, 1, 2))  # not a proper subset
    with pytest.raises(ValueError):
        two_cut_audit(TALLY, (0, 0))
    with pytest.raises(ValueError):
        two_cut_audit(TALLY, (3,))
    with pytest.raises(ValueError):
        two_cut_audit(TALLY, (0,), confidence=1.0)
    with pytest.raises(DegenerateTally):
        two_cut_audit(OutcomeTally((0, 0), (1, 1)), (0,))


# ---------------------------------------------------------------------------
# Output-set selection


def test_select_output_set_picks_sharpest_partition():
    # A singleton and its complement induce the same partition and can swap
    # by float rounding; the chosen partition must separate class 1.
    pilot = OutcomeTally((10, 80, 10), (40, 20, 40))
    assert select_output_set(pilot) in [(1,), (0, 2)]


def test_select_output_set_breaks_ties_to_earliest():
    # For two classes both singletons induce the same partition and identical
    # scores; the earliest candidate must win deterministically.
    pilot = OutcomeTally((90, 10), (60, 40))
    assert select_output_set(pilot) == (0,)


def test_select_output_set_requires_trials():
    with pytest.raises(DegenerateTally):
        select_output_set(OutcomeTally((0, 0), (1, 1)))


# ---------------------------------------------------------------------------
# k-cut audit


def test_k_cut_not_finite_sample_valid():
    result = k_cut_audit(TALLY, ORDERS)
    assert result.method == "k_cut"
    assert result.output_set is None
    assert result.valid == (False,) * 3
    assert all(v >= 0.0 for v in result.curve.values)


def test_k_cut_uses_requested_interval_method():
    goodman = k_cut_audit(TALLY, ORDERS, method="goodman")
    sison = k_cut_audit(TALLY, ORDERS, method="sison_glaz")
    assert goodman.curve.values != sison.curve.values
    with pytest.raises(ValueError):
        k_cut_audit(TALLY, ORDERS, method="wilson")


def test_k_cut_sees_divergence_no_singleton_captures():
    # Divergence split across two up-cells and two down-cells: the candidate
    # binary cuts (singletons and complements) each miss half of it, while
    # the full sum keeps everything once intervals are tight.
    tally = OutcomeTally((400_000, 100_000, 400_000, 100_000),
                         (100_000, 400_000, 100_000, 400_000))
    k_cut = k_cut_audit(tally, (2.0,))
    cut = select_output_set(tally, (2.0,))
    two_cut = two_cut_audit(tally, cut, (2.0,))
    assert k_cut.curve.values[0] > 1.5 * two_cut.curve.values[0]


# ---------------------------------------------------------------------------
# Bootstrap audit


def test_bootstrap_audit_two_cut_respects_given_set():
    result = bootstrap_audit(TALLY, ORDERS, variant="two_cut",
                             output_set=(1,), resamples=200)
    assert result.method == "two_cut_bootstrap"
    assert result.output_set == (1,)
    assert result.valid == (False,) * 3
    assert all(v >= 0.0 for v in result.curve.values)


def test_bootstrap_audit_selects_set_when_absent():
    result = bootstrap_audit(TALLY, ORDERS, resamples=200)
    assert result.output_set == select_output_set(TALLY, ORDERS)


def test_bootstrap_audit_k_cut_has_no_set():
    result = bootstrap_audit(TALLY, ORDERS, variant="k_cut", resamples=200)
    assert result.method == "k_cut_bootstrap"
    assert result.output_set is None


def test_bootstrap_audit_deterministic_in_seed():
    a = bootstrap_audit(TALLY, ORDERS, resamples=200, seed=3)
    b = bootstrap_audit(TALLY, ORDERS, resamples=200, seed=3)
    c = bootstrap_audit(TALLY, ORDERS, resamples=200, seed=4)
    assert a.curve.values == b.curve.values
    assert a.curve.values != c.curve.values


def test_bootstrap_audit_flags_noise_floor():
    identical = OutcomeTally((500, 500), (500, 500))
    result = bootstrap_audit(identical, ORDERS, resamples=200)
    assert result.reliable == (False,) * 3  # plug-in 0 < 1/sqrt(1000)
    separated = bootstrap_audit(TALLY, ORDERS, resamples=200)
    assert separated.reliable == (True,) * 3


def test_bootstrap_audit_rejects_bad_input():
    with pytest.raises(ValueError):
        bootstrap_audit(TALLY, ORDERS, variant="three_cut")
    with pytest.raises(ValueError):
        bootstrap_audit(TALLY, ORDERS, resamples=99)
    with pytest.raises(ValueError):
        bootstrap_audit(TALLY, ORDERS, confidence=0.0)


# ---------------------------------------------------------------------------
# Approximate-DP audit


def test_approx_dp_audit_matches_hand_computation():
    confidence = 0.95
    delta = 1e-3
    cp_confidence = (1.0 + confidence) / 2.0
    b1 = clopper_pearson(800, 1000, cp_confidence)
    b2 = clopper_pearson(600, 1000, cp_confidence)
    expected = math.log(max((b1.lower - delta) / b2.upper,
                            (b2.lower - delta) / b1.upper))
    got = approx_dp_audit(TALLY, (0,), delta, confidence)
    assert got == pytest.approx(expected, abs=1e-12)


def test_approx_dp_audit_clips_to_zero():
    identical = OutcomeTally((500, 500), (500, 500))
    assert approx_dp_audit(identical, (0,), 0.5) == 0.0


def test_approx_dp_audit_delta_range():
    assert approx_dp_audit(TALLY, (0,), 0.0) > 0.0
    with pytest.raises(ValueError):
        approx_dp_audit(TALLY, (0,), 1.0)
    with pytest.raises(ValueError):
        approx_dp_audit(TALLY, (0,), -0.1)


# ---------------------------------------------------------------------------
# Curve algebra and conversion


def test_compose_curves_sums_orderwise():
    a = RdpCurve(ORDERS, (0.1, 0.2, 0.3))
    b = RdpCurve(ORDERS, (1.0, 2.0, 3.0))
    composed = compose_curves([a, b])
    assert composed.values == pytest.approx((1.1, 2.2, 3.3))
    with pytest.raises(GridMismatch):
        compose_curves([a, RdpCurve((2.0, 4.0), (0.0, 0.0))])
    with pytest.raises(ValueError):
        compose_curves([])


def test_scale_curve():
    curve = RdpCurve(ORDERS, (0.1, 0.2, 0.3))
    assert scale_curve(curve, 3).values == pytest.approx((0.3, 0.6, 0.9))
    assert scale_curve(curve, 0).values == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        scale_curve(curve, -1)


def test_rdp_to_dp_frozen_zero_curve():
    # For a flat zero curve on the default grid the conversion reduces to
    # log(63/64) - (log(1e-6) + log(64)) / 63, minimized at the top order.
    curve = RdpCurve(DEFAULT_ORDERS, (0.0,) * len(DEFAULT_ORDERS))
    point = rdp_to_dp(curve, 1e-6)
    assert point.source_order == 64.0
    assert point.epsilon == pytest.approx(0.13753144421606084, abs=1e-15)
    assert point.delta == 1e-6


def test_rdp_to_dp_picks_minimizing_order():
    curve = RdpCurve((2.0, 64.0), (0.0, 100.0))
    point = rdp_to_dp(curve, 1e-6)
    assert point.source_order == 2.0
    expected = math.log(0.5) - (math.log(1e-6) + math.log(2.0))
    assert point.epsilon == pytest.approx(expected, abs=1e-12)


def test_rdp_to_dp_skips_infinite_orders():
    curve = RdpCurve((2.0, 4.0), (math.inf, 1.0))
    assert rdp_to_dp(curve, 1e-6).source_order == 4.0
    with pytest.raises(ValueError):
        rdp_to_dp(RdpCurve((2.0,), (math.inf,)), 1e-6)
    with pytest.raises(ValueError):
        rdp_to_dp(curve, 0.0)


# ---------------------------------------------------------------------------
# Result dataclasses


def test_audit_result_validation():
    curve = RdpCurve(ORDERS, (0.1, 0.2, 0.3))
    with pytest.raises(ValueError):
        AuditResult(method="guess", curve=curve, confidence=0.95,
                    output_set=None, valid=(True,) * 3, reliable=(True,) * 3)
    with pytest.raises(ValueError):
        AuditResult(method="two_cut", curve=curve, confidence=0.95,
                    output_set=None, valid=(True,), reliable=(True,) * 3)
    assert "composed" not in AUDIT_METHODS  # reserved for reports
    AuditResult(method="composed", curve=curve, confidence=0.95,
                output_set=None, valid=(True,) * 3, reliable=(True,) * 3)


def test_dp_point_validation():
    with pytest.raises(ValueError):
        DpPoint(epsilon=math.inf, delta=1e-6, source_order=2.0)
    with pytest.raises(ValueError):
        DpPoint(epsilon=1.0, delta=0.0, source_order=2.0)
    with pytest.raises(ValueError):
        DpPoint(epsilon=1.0, delta=1e-6, source_order=1.0)
