"""Finite-sample and bootstrap interval estimators for tally data.

Provides exact Clopper-Pearson binomial bounds, simultaneous multinomial
bounds (Goodman's chi-square inversion and the Sison-Glaz truncated-Poisson
construction), and a counter-seeded percentile bootstrap. These are the
building blocks the audits assemble into high-probability divergence bounds.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .rng import PURPOSE_BOOTSTRAP, block_generator, subkey

SIMULTANEOUS_METHODS = ("goodman", "sison_glaz")


class InvalidCount(ValueError):
    """Counts and trials do not form a valid tally."""


@dataclasses.dataclass(frozen=True)
class BinomialBounds:
    """Two-sided Clopper-Pearson interval for one binomial proportion."""

    successes: int
    trials: int
    lower: float
    upper: float
    confidence: float

    def __post_init__(self):
        if self.trials <= 0 or not 0 <= self.successes <= self.trials:
            raise InvalidCount(
                f"invalid tally: {self.successes} successes in {self.trials} trials")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError(f"confidence must be in (0, 1), got {self.confidence}")
        rate = self.successes / self.trials
        if not (0.0 <= self.lower <= rate <= self.upper <= 1.0):
            raise ValueError(
                f"bounds [{self.lower}, {self.upper}] do not bracket rate {rate}")
        if self.successes == 0 and self.lower != 0.0:
            raise ValueError("zero successes must give lower bound 0")
        if self.successes == self.trials and self.upper != 1.0:
            raise ValueError("all successes must give upper bound 1")


@dataclasses.dataclass(frozen=True)
class MultinomialBounds:
    """Simultaneous two-sided bounds on all cells of a multinomial."""

    counts: tuple[int, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    confidence: float
    method: str
    # True when some cell has count 0; boundary cells make the asymptotic
    # constructions fragile and downstream consumers may want to know.
    has_degenerate_cell: bool

    def __post_init__(self):
        k = len(self.counts)
        if k < 2:
            raise InvalidCount(f"need at least 2 cells, got {k}")
        if len(self.lower) != k or len(self.upper) != k:
            raise ValueError("bounds length mismatch")
        if any(c < 0 for c in self.counts) or sum(self.counts) <= 0:
            raise InvalidCount(f"invalid cell counts {self.counts}")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError(f"confidence must be in (0, 1), got {self.confidence}")
        n = sum(self.counts)
        for c, lo, hi in zip(self.counts, self.lower, self.upper):
            if not (0.0 <= lo <= c / n <= hi <= 1.0):
                raise ValueError(
                    f"cell bounds [{lo}, {hi}] do not bracket rate {c / n}")


@dataclasses.dataclass(frozen=True)
class BootstrapLowerBound:
    """Percentile-bootstrap lower confidence bound for a plug-in statistic."""

    lower: float
    estimate: float
    confidence: float
    resamples: int
    # False when the point estimate is below 1/sqrt(n): at that scale the
    # statistic is dominated by sampling noise and the percentile interval has
    # no coverage story.
    reliable: bool


def clopper_pearson(successes: int, trials: int, confidence: float = 0.95) -> BinomialBounds:
    """Exact two-sided binomial confidence interval.

    Inverts the Beta tail quantiles: the lower endpoint is the
    (1-confidence)/2 quantile of Beta(s, n-s+1) and the upper endpoint the
    1-(1-confidence)/2 quantile of Beta(s+1, n-s), with the conventional 0 and
    1 at the empty boundaries. Coverage is at least the nominal level for
    every n and p.
    """
    if trials <= 0 or not 0 <= successes <= trials:
        raise InvalidCount(
            f"invalid tally: {successes} successes in {trials} trials")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    tail = (1.0 - confidence) / 2.0
    if successes == 0:
        lower = 0.0
    else:
        lower = float(stats.beta.ppf(tail, successes, trials - successes + 1))
    if successes == trials:
        upper = 1.0
    else:
        upper = float(stats.beta.ppf(1.0 - tail, successes + 1, trials - successes))
    return BinomialBounds(successes=successes, trials=trials,
                          lower=lower, upper=upper, confidence=confidence)


def _goodman_bounds(counts: np.ndarray, confidence: float) -> tuple[np.ndarray, np.ndarray]:
    """Goodman (1965) simultaneous intervals via per-cell chi-square inversion."""
    n = counts.sum()
    k = counts.size
    # Bonferroni across cells: each cell gets a chi-square(1) critical value
    # at level (1 - confidence) / k.
    crit = float(stats.chi2.ppf(1.0 - (1.0 - confidence) / k, df=1))
    # Solve (n + crit) p^2 - (2 c + crit) p + c^2 / n = 0 for each cell count c.
    a = n + crit
    b = -(2.0 * counts + crit)
    c0 = counts * counts / n
    disc = np.sqrt(np.maximum(b * b - 4.0 * a * c0, 0.0))
    lower = np.clip((-b - disc) / (2.0 * a), 0.0, 1.0)
    upper = np.clip((-b + disc) / (2.0 * a), 0.0, 1.0)
    return lower, upper


def _truncated_poisson_moments(c: float, lam: float) -> tuple[float, float, float, float, float]:
    """First four central moments and mass of a Poisson truncated to [lam-c, lam+c]."""
    if lam <= 0.0:
        return 0.0, 0.0, 0.0, 0.0, 1.0
    hi = lam + c
    lo = max(lam - c, 0.0)

    def cdf(x: float) -> float:
        return float(stats.poisson.cdf(x, lam)) if x >= 0 else 0.0

    den = cdf(hi) - cdf(lo - 1.0)
    if den <= 0.0:
        return 0.0, 0.0, 0.0, 0.0, 0.0
    # Factorial moments E[Y (Y-1) ... (Y-r+1)] of the truncated variable.
    f = [1.0]
    for r in range(1, 5):
        f.append(lam ** r * (cdf(hi - r) - cdf(lo - r - 1.0)) / den)
    m1 = f[1]
    # Raw moments from factorial moments (Stirling numbers of the second kind).
    raw2 = f[2] + m1
    raw3 = f[3] + 3.0 * f[2] + m1
    raw4 = f[4] + 6.0 * f[3] + 7.0 * f[2] + m1
    var = raw2 - m1 * m1
    mu3 = raw3 - 3.0 * m1 * raw2 + 2.0 * m1 ** 3
    mu4 = raw4 - 4.0 * m1 * raw3 + 6.0 * m1 * m1 * raw2 - 3.0 * m1 ** 4
    return m1, var, mu3, mu4, den


def _sison_glaz_coverage(c: float, counts: np.ndarray) -> float:
    """Approximate simultaneous coverage of +-c count windows around each cell.

    Conditions independent truncated Poissons on their total via an Edgeworth
    expansion of the sum, the standard Sison-Glaz construction.
    """
    n = float(counts.sum())
    mom = [_truncated_poisson_moments(c, float(x)) for x in counts]
    mass = math.prod(m[4] for m in mom)
    if mass <= 0.0:
        return 0.0
    s1 = sum(m[0] for m in mom)
    s2 = sum(m[1] for m in mom)
    if s2 <= 0.0:
        return 0.0
    k3 = sum(m[2] for m in mom)
    k4 = sum(m[3] - 3.0 * m[1] * m[1] for m in mom)
    z = (n - s1) / math.sqrt(s2)
    g1 = k3 / s2 ** 1.5
    g2 = k4 / (s2 * s2)
    poly = (1.0
            + g1 * (z ** 3 - 3.0 * z) / 6.0
            + g2 * (z ** 4 - 6.0 * z * z + 3.0) / 24.0
            + g1 * g1 * (z ** 6 - 15.0 * z ** 4 + 45.0 * z * z - 15.0) / 72.0)
    edgeworth = poly * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi * s2)
    return mass * edgeworth / float(stats.poisson.pmf(n, n))


def _sison_glaz_bounds(counts: np.ndarray, confidence: float) -> tuple[np.ndarray, np.ndarray]:
    """Sison-Glaz (1995) simultaneous intervals with interpolated half-width."""
    n = int(counts.sum())
    rates = counts / n
    if _sison_glaz_coverage(0.0, counts) >= confidence:
        return rates.copy(), rates.copy()
    # Coverage is monotone in the half-width c; bracket then bisect to the
    # smallest integer c whose coverage reaches the level.
    hi = 1
    while hi < n and _sison_glaz_coverage(float(hi), counts) < confidence:
        hi = min(2 * hi, n)
    if _sison_glaz_coverage(float(hi), counts) < confidence:
        # Window grew to the whole simplex without reaching the level.
        return np.zeros_like(rates), np.ones_like(rates)
    lo = 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _sison_glaz_coverage(float(mid), counts) < confidence:
            lo = mid
        else:
            hi = mid
    c = hi
    prev = _sison_glaz_coverage(float(c - 1), counts)
    cov = _sison_glaz_coverage(float(c), counts)
    delta = (confidence - prev) / (cov - prev) if cov > prev else 1.0
    lower = np.clip(rates - c / n, 0.0, 1.0)
    upper = np.clip(rates + c / n + 2.0 * delta / n, 0.0, 1.0)
    return lower, upper


def simultaneous_bounds(
    counts: Sequence[int],
    confidence: float = 0.95,
    method: str = "goodman",
) -> MultinomialBounds:
    """Simultaneous confidence bounds on every cell of a multinomial tally.

    Both constructions are asymptotic: coverage approaches the nominal level
    as the tally grows but is not guaranteed at any finite size, unlike
    Clopper-Pearson. Zero cells are flagged via ``has_degenerate_cell``.
    """
    if method not in SIMULTANEOUS_METHODS:
        raise ValueError(f"method must be one of {SIMULTANEOUS_METHODS}, got {method!r}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    arr = np.asarray([int(c) for c in counts], dtype=np.int64)
    if arr.size < 2:
        raise InvalidCount(f"need at least 2 cells, got {arr.size}")
    if (arr < 0).any() or arr.sum() <= 0:
        raise InvalidCount(f"invalid cell counts {arr.tolist()}")
    if method == "goodman":
        lower, upper = _goodman_bounds(arr.astype(float), confidence)
    else:
        lower, upper = _sison_glaz_bounds(arr.astype(float), confidence)
    # Clamp boundary cells to the trivially correct endpoints.
    lower = np.where(arr == 0, 0.0, lower)
    upper = np.where(arr == arr.sum(), 1.0, upper)
    return MultinomialBounds(
        counts=tuple(arr.tolist()),
        lower=tuple(lower.tolist()),
        upper=tuple(upper.tolist()),
        confidence=confidence,
        method=method,
        has_degenerate_cell=bool((arr == 0).any()),
    )


def bootstrap_percentile_lower(
    statistic: Callable[[np.ndarray], float],
    samples: np.ndarray,
    resamples: int = 1000,
    confidence: float = 0.95,
    seed: int = 0,
    counts: np.ndarray | None = None,
) -> BootstrapLowerBound:
    """Percentile-bootstrap lower confidence bound for statistic(samples).

    Two resampling modes:
      * ``counts is None``: nonparametric bootstrap; each replicate applies
        ``statistic`` to ``n`` draws with replacement from ``samples``.
      * ``counts`` given: ``samples`` enumerates distinct cells and ``counts``
        their multiplicities; each replicate applies ``statistic`` to a
        Multinomial(n, counts / n) draw. Identical in distribution to the
        nonparametric bootstrap of the expanded sample, at O(K) per replicate.

    Replicate b draws from the counter-based bootstrap stream at block b, so
    results are reproducible and replicates are independent of evaluation
    order. The returned ``reliable`` flag is False when the point estimate
    falls below 1 / sqrt(n), the scale at which percentile intervals for
    divergence-like statistics lose coverage.
    """
    if resamples < 100:
        raise ValueError(f"need at least 100 resamples, got {resamples}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    samples = np.asarray(samples)
    if counts is None:
        n = samples.size
        if n == 0:
            raise InvalidCount("cannot bootstrap an empty sample")
        estimate = float(statistic(samples))
    else:
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != samples.shape:
            raise ValueError("counts must align with samples")
        n = int(counts.sum())
        if n <= 0 or (counts < 0).any():
            raise InvalidCount(f"invalid cell counts {counts.tolist()}")
        estimate = float(statistic(counts))
    rates = counts / n if counts is not None else None
    values = np.empty(resamples, dtype=float)
    sub = subkey(PURPOSE_BOOTSTRAP)
    for b in range(resamples):
        gen = block_generator(seed, sub, b)
        if counts is None:
            replicate = samples[gen.integers(0, n, size=n)]
        else:
            replicate = gen.multinomial(n, rates)
        values[b] = statistic(replicate)
    lower = float(np.quantile(values, 1.0 - confidence))
    return BootstrapLowerBound(
        lower=lower,
        estimate=estimate,
        confidence=confidence,
        resamples=resamples,
        reliable=bool(estimate >= 1.0 / math.sqrt(n)),
    )
