"""High-probability lower bounds on Renyi divergence from outcome tallies.

Given tallies of mechanism outputs under two neighboring inputs S and S', the
audits here produce per-order lower confidence bounds on the Renyi divergence
between the two output distributions. The 2-cut audit collapses outcomes to a
binary event and inverts exact Clopper-Pearson intervals (finite-sample valid
at every size); the k-cut audit keeps all classes under simultaneous
multinomial bounds (asymptotic); the bootstrap variants replace intervals with
percentile resampling (asymptotic, and unreliable below the 1/sqrt(n) noise
floor). Composition across queries and the conversion from RDP to approximate
DP live here as well.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .intervals import BinomialBounds, clopper_pearson, simultaneous_bounds
from .mechanism import DEFAULT_ORDERS, RdpCurve, _normalize_orders
from .rng import PURPOSE_BOOTSTRAP, block_generator, subkey

AUDIT_METHODS = ("two_cut", "k_cut", "two_cut_bootstrap", "k_cut_bootstrap")


class EmptySet(ValueError):
    """Output set for a 2-cut style audit is empty or covers every class."""


class DegenerateTally(ValueError):
    """A tally side has no trials, so no interval can be formed."""


class GridMismatch(ValueError):
    """Curves being combined live on different order grids."""


@dataclasses.dataclass(frozen=True)
class OutcomeTally:
    """Outcome counts of the mechanism under S and under S'."""

    counts_s: tuple[int, ...]
    counts_s_prime: tuple[int, ...]

    def __post_init__(self):
        k = len(self.counts_s)
        if k < 2:
            raise ValueError(f"need at least 2 outcome classes, got {k}")
        if len(self.counts_s_prime) != k:
            raise ValueError("tally sides have different class counts")
        if any(c < 0 for c in self.counts_s + self.counts_s_prime):
            raise ValueError("negative outcome count")

    @classmethod
    def from_winners(cls, winners_s: np.ndarray, winners_s_prime: np.ndarray,
                     num_classes: int) -> "OutcomeTally":
        return cls(
            counts_s=tuple(np.bincount(winners_s, minlength=num_classes).tolist()),
            counts_s_prime=tuple(
                np.bincount(winners_s_prime, minlength=num_classes).tolist()),
        )

    @property
    def num_classes(self) -> int:
        return len(self.counts_s)

    @property
    def trials_s(self) -> int:
        return sum(self.counts_s)

    @property
    def trials_s_prime(self) -> int:
        return sum(self.counts_s_prime)

    def __add__(self, other: "OutcomeTally") -> "OutcomeTally":
        if other.num_classes != self.num_classes:
            raise ValueError("cannot merge tallies with different class counts")
        return OutcomeTally(
            counts_s=tuple(a + b for a, b in zip(self.counts_s, other.counts_s)),
            counts_s_prime=tuple(
                a + b for a, b in zip(self.counts_s_prime, other.counts_s_prime)),
        )


@dataclasses.dataclass(frozen=True)
class AuditResult:
    """Per-order divergence lower bounds with their validity pedigree.

    ``valid[j]`` is True only for methods whose order-j bound holds with the
    stated confidence at any finite sample size (the interval-based 2-cut).
    ``reliable[j]`` is False when a bootstrap point estimate sits below the
    1/sqrt(n) noise floor.
    """

    method: str
    curve: RdpCurve
    confidence: float
    output_set: tuple[int, ...] | None
    valid: tuple[bool, ...]
    reliable: tuple[bool, ...]

    def __post_init__(self):
        if self.method not in AUDIT_METHODS and self.method != "composed":
            raise ValueError(f"unknown audit method {self.method!r}")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError(f"confidence must be in (0, 1), got {self.confidence}")
        n = len(self.curve.orders)
        if len(self.valid) != n or len(self.reliable) != n:
            raise ValueError("flag length does not match order grid")


@dataclasses.dataclass(frozen=True)
class DpPoint:
    """An (epsilon, delta) approximate-DP point and the order it came from."""

    epsilon: float
    delta: float
    source_order: float

    def __post_init__(self):
        if not math.isfinite(self.epsilon):
            raise ValueError(f"epsilon must be finite, got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.source_order <= 1.0:
            raise ValueError(f"source order must be > 1, got {self.source_order}")


def _safe_log(x: float) -> float:
    return math.log(x) if x > 0.0 else -math.inf


def _log_renyi_sum(alpha: float, log_p: np.ndarray, log_q: np.ndarray) -> float:
    """logsumexp of alpha * log_p + (1 - alpha) * log_q over outcomes.

    Zero conventions of the Renyi sum: an outcome with p = 0 contributes 0
    regardless of q; an outcome with q = 0 and p > 0 makes the sum infinite.
    """
    p_zero = np.isneginf(log_p)
    q_zero = np.isneginf(log_q)
    if np.any(q_zero & ~p_zero):
        return math.inf
    terms = np.full(log_p.shape, -math.inf)
    live = ~p_zero
    terms[live] = alpha * log_p[live] + (1.0 - alpha) * log_q[live]
    return float(logsumexp(terms))


def _divergence_from_logs(alpha: float, log_p: np.ndarray, log_q: np.ndarray) -> float:
    value = _log_renyi_sum(alpha, log_p, log_q)
    if math.isinf(value):
        return math.inf
    return max(0.0, value / (alpha - 1.0))


def _validate_output_set(output_set: Sequence[int], num_classes: int) -> tuple[int, ...]:
    cut = tuple(sorted(int(c) for c in output_set))
    if len(cut) == 0 or len(cut) >= num_classes:
        raise EmptySet(
            f"output set must be a non-empty proper subset of {num_classes} classes")
    if len(set(cut)) != len(cut):
        raise ValueError(f"output set has duplicates: {cut}")
    if cut[0] < 0 or cut[-1] >= num_classes:
        raise ValueError(f"output set {cut} outside [0, {num_classes})")
    return cut


def _require_trials(tally: OutcomeTally) -> None:
    if tally.trials_s == 0 or tally.trials_s_prime == 0:
        raise DegenerateTally(
            f"tally has {tally.trials_s} / {tally.trials_s_prime} trials")


def _two_cut_bound_logs(b1: BinomialBounds, b2: BinomialBounds) -> tuple[np.ndarray, np.ndarray]:
    """Log arguments of the 2-cut lower bound statistic.

    The binary divergence is monotone increasing in p1 and decreasing in p2
    coordinate-wise on each term, so substituting (p1 lower, p2 upper) in the
    event term and (p1 upper, p2 lower) in the complement term lower-bounds
    the statistic whenever all four interval bounds hold.
    """
    log_p = np.array([_safe_log(b1.lower), _safe_log(1.0 - b1.upper)])
    log_q = np.array([_safe_log(b2.upper), _safe_log(1.0 - b2.lower)])
    return log_p, log_q


def two_cut_audit(
    tally: OutcomeTally,
    output_set: Sequence[int],
    orders: Sequence[float] = DEFAULT_ORDERS,
    confidence: float = 0.95,
) -> AuditResult:
    """Finite-sample valid 2-cut audit of the divergence between S and S'.

    Collapses outcomes to the event "winner in output_set", forms exact
    Clopper-Pearson intervals for the event probability under S and S' (the
    failure budget 1 - confidence is split four ways, one per interval
    endpoint), and evaluates the binary Renyi divergence at the adversarial
    corners. By data-processing this lower-bounds the full divergence, and the
    interval coverage makes the bound hold with the stated confidence at every
    order simultaneously for any sample size.
    """
    grid = _normalize_orders(orders)
    _require_trials(tally)
    cut = _validate_output_set(output_set, tally.num_classes)
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    s1 = sum(tally.counts_s[c] for c in cut)
    s2 = sum(tally.counts_s_prime[c] for c in cut)
    # Two two-sided intervals at (1 + confidence) / 2 put 1/4 of the failure
    # budget on each of the four one-sided bounds the statistic consumes.
    cp_confidence = (1.0 + confidence) / 2.0
    b1 = clopper_pearson(s1, tally.trials_s, cp_confidence)
    b2 = clopper_pearson(s2, tally.trials_s_prime, cp_confidence)
    log_p, log_q = _two_cut_bound_logs(b1, b2)
    values = tuple(_divergence_from_logs(a, log_p, log_q) for a in grid)
    n = len(grid)
    return AuditResult(
        method="two_cut",
        curve=RdpCurve(orders=grid, values=values),
        confidence=confidence,
        output_set=cut,
        valid=(True,) * n,
        reliable=(True,) * n,
    )


def _plug_in_two_cut(alpha: float, p1: float, p2: float) -> float:
    log_p = np.array([_safe_log(p1), _safe_log(1.0 - p1)])
    log_q = np.array([_safe_log(p2), _safe_log(1.0 - p2)])
    return _divergence_from_logs(alpha, log_p, log_q)


def select_output_set(
    pilot: OutcomeTally,
    orders: Sequence[float] = DEFAULT_ORDERS,
) -> tuple[int, ...]:
    """Chooses the 2-cut output set from an independent pilot tally.

    Scores every singleton and every singleton complement by the plug-in
    binary divergence at the grid's median order and returns the best. Using a
    pilot disjoint from the audited trials keeps the later interval coverage
    honest; ties break toward the earliest candidate, so the choice is
    deterministic.
    """
    grid = _normalize_orders(orders)
    _require_trials(pilot)
    alpha = grid[(len(grid) - 1) // 2]
    k = pilot.num_classes
    n1, n2 = pilot.trials_s, pilot.trials_s_prime
    candidates: list[tuple[int, ...]] = [(c,) for c in range(k)]
    if k > 2:
        for c in range(k):
            candidates.append(tuple(i for i in range(k) if i != c))
    best_cut, best_score = None, -math.inf
    for cut in candidates:
        p1 = sum(pilot.counts_s[c] for c in cut) / n1
        p2 = sum(pilot.counts_s_prime[c] for c in cut) / n2
        score = _plug_in_two_cut(alpha, p1, p2)
        if score > best_score:
            best_cut, best_score = cut, score
    return best_cut


def k_cut_audit(
    tally: OutcomeTally,
    orders: Sequence[float] = DEFAULT_ORDERS,
    confidence: float = 0.95,
    method: str = "goodman",
) -> AuditResult:
    """All-classes audit under simultaneous multinomial confidence bounds.

    Evaluates the full Renyi sum with each cell's probability replaced by its
    adversarial corner (lower under S, upper under S'), splitting the failure
    budget across the two tally sides. Simultaneous multinomial bounds are
    asymptotic, so the per-order flags mark these bounds as not
    finite-sample valid.
    """
    grid = _normalize_orders(orders)
    _require_trials(tally)
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    side_confidence = (1.0 + confidence) / 2.0
    b1 = simultaneous_bounds(tally.counts_s, side_confidence, method)
    b2 = simultaneous_bounds(tally.counts_s_prime, side_confidence, method)
    log_p = np.array([_safe_log(x) for x in b1.lower])
    log_q = np.array([_safe_log(x) for x in b2.upper])
    values = tuple(_divergence_from_logs(a, log_p, log_q) for a in grid)
    n = len(grid)
    return AuditResult(
        method="k_cut",
        curve=RdpCurve(orders=grid, values=values),
        confidence=confidence,
        output_set=None,
        valid=(False,) * n,
        reliable=(True,) * n,
    )


def _plug_in_curve(
    counts_s: np.ndarray,
    counts_s_prime: np.ndarray,
    grid: tuple[float, ...],
    cut: tuple[int, ...] | None,
) -> np.ndarray:
    """Plug-in divergence at every order, optionally through a binary cut."""
    n1 = counts_s.sum()
    n2 = counts_s_prime.sum()
    if cut is not None:
        s1 = counts_s[list(cut)].sum()
        s2 = counts_s_prime[list(cut)].sum()
        return np.array([_plug_in_two_cut(a, s1 / n1, s2 / n2) for a in grid])
    with np.errstate(divide="ignore"):
        log_p = np.log(counts_s / n1)
        log_q = np.log(counts_s_prime / n2)
    return np.array([_divergence_from_logs(a, log_p, log_q) for a in grid])


def bootstrap_audit(
    tally: OutcomeTally,
    orders: Sequence[float] = DEFAULT_ORDERS,
    confidence: float = 0.95,
    variant: str = "two_cut",
    output_set: Sequence[int] | None = None,
    resamples: int = 1000,
    seed: int = 0,
) -> AuditResult:
    """Percentile-bootstrap audit of the plug-in divergence.

    Resamples both tally sides jointly (one multinomial per side per
    replicate, drawn from the counter-based bootstrap stream) and takes the
    per-order (1 - confidence) percentile of the plug-in statistic. The same
    replicates serve every order; the per-order validity of a percentile bound
    is not finite-sample guaranteed, so ``valid`` is all False. ``reliable``
    is False at orders where the point estimate is below 1/sqrt(n), where the
    interval collapses onto sampling noise.

    For the two_cut variant with no ``output_set``, the set is chosen from the
    same tally by plug-in search; pass a pilot-selected set to keep selection
    independent of the audited data.
    """
    grid = _normalize_orders(orders)
    _require_trials(tally)
    if variant not in ("two_cut", "k_cut"):
        raise ValueError(f"variant must be two_cut or k_cut, got {variant!r}")
    if resamples < 100:
        raise ValueError(f"need at least 100 resamples, got {resamples}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    cut = None
    if variant == "two_cut":
        cut = (_validate_output_set(output_set, tally.num_classes)
               if output_set is not None else select_output_set(tally, orders))
    c1 = np.asarray(tally.counts_s, dtype=np.int64)
    c2 = np.asarray(tally.counts_s_prime, dtype=np.int64)
    n1, n2 = tally.trials_s, tally.trials_s_prime
    estimates = _plug_in_curve(c1, c2, grid, cut)
    values = np.empty((resamples, len(grid)), dtype=float)
    sub = subkey(PURPOSE_BOOTSTRAP)
    for b in range(resamples):
        gen = block_generator(seed, sub, b)
        r1 = gen.multinomial(n1, c1 / n1)
        r2 = gen.multinomial(n2, c2 / n2)
        values[b] = _plug_in_curve(r1, r2, grid, cut)
    lower = np.quantile(values, 1.0 - confidence, axis=0)
    lower = np.maximum(lower, 0.0)
    floor = 1.0 / math.sqrt(min(n1, n2))
    n = len(grid)
    return AuditResult(
        method=f"{variant}_bootstrap",
        curve=RdpCurve(orders=grid, values=tuple(float(v) for v in lower)),
        confidence=confidence,
        output_set=cut,
        valid=(False,) * n,
        reliable=tuple(bool(e >= floor) for e in estimates),
    )


def approx_dp_audit(
    tally: OutcomeTally,
    output_set: Sequence[int],
    delta: float,
    confidence: float = 0.95,
) -> float:
    """Lower confidence bound on the approximate-DP epsilon at a given delta.

    Inverts the definition Pr_S[O] <= e^eps Pr_S'[O] + delta (and its mirror)
    on the chosen event using the same four-way Clopper-Pearson split as the
    2-cut audit, returning log of the larger ratio, clipped at 0.
    """
    _require_trials(tally)
    cut = _validate_output_set(output_set, tally.num_classes)
    if not 0.0 <= delta < 1.0:
        raise ValueError(f"delta must be in [0, 1), got {delta}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    cp_confidence = (1.0 + confidence) / 2.0
    b1 = clopper_pearson(sum(tally.counts_s[c] for c in cut),
                         tally.trials_s, cp_confidence)
    b2 = clopper_pearson(sum(tally.counts_s_prime[c] for c in cut),
                         tally.trials_s_prime, cp_confidence)
    ratio = max((b1.lower - delta) / b2.upper, (b2.lower - delta) / b1.upper)
    if ratio <= 0.0:
        return 0.0
    return max(0.0, math.log(ratio))


def compose_curves(curves: Sequence[RdpCurve]) -> RdpCurve:
    """Order-wise sum of RDP curves (adaptive composition adds Renyi bounds)."""
    if len(curves) == 0:
        raise ValueError("cannot compose zero curves")
    grid = curves[0].orders
    for c in curves[1:]:
        if c.orders != grid:
            raise GridMismatch(f"order grids differ: {grid} vs {c.orders}")
    totals = np.sum([c.values for c in curves], axis=0)
    return RdpCurve(orders=grid, values=tuple(float(v) for v in totals))


def scale_curve(curve: RdpCurve, factor: float) -> RdpCurve:
    """Curve scaled by a non-negative factor (k-fold repetition of one query)."""
    if factor < 0:
        raise ValueError(f"factor must be >= 0, got {factor}")
    return RdpCurve(orders=curve.orders,
                    values=tuple(factor * v for v in curve.values))


def rdp_to_dp(curve: RdpCurve, delta: float) -> DpPoint:
    """Best approximate-DP point implied by an RDP curve at a target delta.

    For each order alpha with finite bound rho, epsilon(alpha) =
    rho + log((alpha - 1) / alpha) - (log(delta) + log(alpha)) / (alpha - 1);
    the point with the smallest epsilon over the grid wins.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    best: tuple[float, float] | None = None
    for alpha, rho in zip(curve.orders, curve.values):
        if math.isinf(rho):
            continue
        eps = (rho + math.log((alpha - 1.0) / alpha)
               - (math.log(delta) + math.log(alpha)) / (alpha - 1.0))
        if best is None or eps < best[0]:
            best = (eps, alpha)
    if best is None:
        raise ValueError("curve has no finite order to convert")
    return DpPoint(epsilon=best[0], delta=delta, source_order=best[1])


__all__ = [
    "AUDIT_METHODS",
    "AuditResult",
    "DegenerateTally",
    "DpPoint",
    "EmptySet",
    "GridMismatch",
    "OutcomeTally",
    "approx_dp_audit",
    "bootstrap_audit",
    "compose_curves",
    "k_cut_audit",
    "rdp_to_dp",
    "scale_curve",
    "select_output_set",
    "two_cut_audit",
]
