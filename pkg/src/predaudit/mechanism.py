"""Noisy-argmax release mechanism and its exact privacy curves.

The mechanism adds independent Gaussian noise to each class's vote count and
releases the argmax. For a fixed histogram the output is a categorical
distribution whose class probabilities are one-dimensional Gaussian integrals;
this module evaluates them to near machine precision, turns pairs of
neighboring histograms into exact Renyi divergence curves, and provides the
data-independent Gaussian RDP bounds (including group privacy) those curves
are compared against.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np
from scipy import integrate, optimize
from scipy.special import log_ndtr, logsumexp

from .rng import BLOCK_TRIALS, PURPOSE_GENERIC, block_generator, iter_blocks, subkey

# Renyi orders evaluated when a caller does not supply a grid.
DEFAULT_ORDERS: tuple[float, ...] = (
    1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0, 64.0,
)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# Half-width of the quadrature window around the integrand's mode. The
# log-integrand has curvature <= -1, so mass beyond the window is below
# exp(-_WINDOW**2 / 2) ~ 2e-37 relative to the mode.
_WINDOW = 13.0
_QUAD_EPSABS = 1e-12


class QuadratureFailure(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


class NormalizationFailure(RuntimeError):
    """Class probabilities failed the unit-sum consistency check."""


class OrderUnderflow(ValueError):
    """A group-privacy conversion pushed the Renyi order to 1 or below."""


@dataclasses.dataclass(frozen=True)
class Histogram:
    """Per-class vote counts for one query.

    Attributes:
      counts: non-negative vote count per class, at least two classes.
    """

    counts: tuple[int, ...]

    def __init__(self, counts: Sequence[int]):
        values = tuple(int(c) for c in counts)
        if len(values) < 2:
            raise ValueError(f"need at least 2 classes, got {len(values)}")
        if any(c < 0 for c in values):
            raise ValueError(f"negative vote count in {values}")
        if sum(values) <= 0:
            raise ValueError("histogram must contain at least one vote")
        object.__setattr__(self, "counts", values)

    @property
    def num_classes(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64)


@dataclasses.dataclass(frozen=True)
class MechanismParams:
    """Noise scale and base seed for the release mechanism.

    sigma = 0 degenerates to plain argmax with lowest-index tie-breaking;
    probability computations require sigma > 0.
    """

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")
        if not isinstance(self.seed, int):
            raise ValueError(f"seed must be an int, got {type(self.seed).__name__}")


@dataclasses.dataclass(frozen=True)
class ClassDistribution:
    """Output distribution of the mechanism on a fixed histogram."""

    probs: tuple[float, ...]
    log_probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.probs) != len(self.log_probs):
            raise ValueError("probs and log_probs length mismatch")
        if any(not (0.0 <= p <= 1.0) for p in self.probs):
            raise ValueError(f"probabilities outside [0, 1]: {self.probs}")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {sum(self.probs)}, not 1")

    @property
    def num_classes(self) -> int:
        return len(self.probs)


@dataclasses.dataclass(frozen=True)
class RdpCurve:
    """Renyi divergence (or bound) values on a grid of orders > 1."""

    orders: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.orders) == 0:
            raise ValueError("order grid must be non-empty")
        if len(self.orders) != len(self.values):
            raise ValueError("orders and values length mismatch")
        if any(a <= 1.0 or not math.isfinite(a) for a in self.orders):
            raise ValueError(f"orders must be finite and > 1: {self.orders}")
        if any(b <= a for a, b in zip(self.orders, self.orders[1:])):
            raise ValueError(f"orders must be strictly increasing: {self.orders}")
        if any(math.isnan(v) or v < 0.0 for v in self.values):
            raise ValueError(f"curve values must be >= 0 (or +inf): {self.values}")

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.orders, dtype=float), np.asarray(self.values, dtype=float)

    def value_at(self, order: float) -> float:
        """Value at an order that must be on the grid exactly."""
        for a, v in zip(self.orders, self.values):
            if a == order:
                return v
        raise KeyError(f"order {order} not on grid {self.orders}")


def _normalize_orders(orders: Sequence[float]) -> tuple[float, ...]:
    grid = tuple(float(a) for a in orders)
    if len(grid) == 0:
        raise ValueError("order grid must be non-empty")
    if any(not math.isfinite(a) or a <= 1.0 for a in grid):
        raise ValueError(f"orders must be finite and > 1: {grid}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"orders must be strictly increasing: {grid}")
    return grid


# ---------------------------------------------------------------------------
# Sampling


def noisy_argmax_rows(
    count_rows: np.ndarray,
    sigma: float,
    seed: int,
    sub: int,
    block: int,
    row_lo: int,
    row_hi: int,
) -> np.ndarray:
    """Noisy argmax over per-trial histogram rows of one stream block.

    Args:
      count_rows: integer array of shape (row_hi - row_lo, K), the vote
        histograms for trials ``block * BLOCK_TRIALS + [row_lo, row_hi)``.
      sigma: Gaussian noise scale (0 means plain argmax).
      seed, sub, block: stream address of the noise draws. The full block's
        noise is always generated and sliced so trial addressing is stable.
      row_lo, row_hi: row slice of the block these trials occupy.

    Returns:
      int64 array of winning class indices, one per row.
    """
    rows = row_hi - row_lo
    if count_rows.shape[0] != rows:
        raise ValueError(f"count_rows has {count_rows.shape[0]} rows, expected {rows}")
    num_classes = count_rows.shape[1]
    if sigma == 0.0:
        return np.argmax(count_rows, axis=1).astype(np.int64)
    gen = block_generator(seed, sub, block)
    noise = gen.standard_normal((BLOCK_TRIALS, num_classes))[row_lo:row_hi]
    return np.argmax(count_rows + sigma * noise, axis=1).astype(np.int64)


def noisy_argmax_batch(
    hist: Histogram,
    params: MechanismParams,
    start_trial: int,
    num_trials: int,
    stream: int = subkey(PURPOSE_GENERIC),
) -> np.ndarray:
    """Winning classes for a contiguous range of trials on a fixed histogram."""
    counts = hist.as_array()[None, :]
    out = np.empty(num_trials, dtype=np.int64)
    filled = 0
    for block, lo, hi in iter_blocks(start_trial, num_trials):
        rows = hi - lo
        tile = np.broadcast_to(counts, (rows, hist.num_classes))
        out[filled:filled + rows] = noisy_argmax_rows(
            tile, params.sigma, params.seed, stream, block, lo, hi)
        filled += rows
    return out


def noisy_argmax_sample(
    hist: Histogram,
    params: MechanismParams,
    trial_index: int,
    stream: int = subkey(PURPOSE_GENERIC),
) -> int:
    """One mechanism release, addressed by trial index.

    The result depends only on (hist, params.sigma, params.seed, stream,
    trial_index): calling it in any order, or inside a batch, gives the same
    class.
    """
    if trial_index < 0:
        raise ValueError(f"trial_index must be >= 0, got {trial_index}")
    return int(noisy_argmax_batch(hist, params, trial_index, 1, stream)[0])


# ---------------------------------------------------------------------------
# Exact class probabilities via quadrature


def _log_win_integrand(z: float, deltas: np.ndarray) -> float:
    """log of phi(z) * prod_i Phi(z + deltas[i])."""
    return float(-0.5 * z * z - _LOG_SQRT_2PI + log_ndtr(z + deltas).sum())


def _win_mode(deltas: np.ndarray) -> float:
    """Mode of the win-probability integrand for one candidate class.

    The log-integrand is strictly concave, so its derivative
    f(z) = -z + sum_i hazard(z + deltas[i]) is strictly decreasing; hazard > 0
    gives f(0) > 0, and the -z term gives f < 0 for large z.
    """

    def f(z: float) -> float:
        t = z + deltas
        log_pdf = -0.5 * t * t - _LOG_SQRT_2PI
        return float(-z + np.exp(log_pdf - log_ndtr(t)).sum())

    hi = 2.0
    while f(hi) >= 0.0:
        hi *= 2.0
        if hi > 1e9:
            raise QuadratureFailure("mode search failed to bracket the root")
    return float(optimize.brentq(f, 0.0, hi, xtol=1e-10, rtol=8.9e-16))


def class_log_probabilities(hist: Histogram, sigma: float) -> np.ndarray:
    """Log output probabilities of noisy argmax on a fixed histogram.

    For class c the probability is the expectation over a standard normal z of
    prod_{i != c} Phi(z + (n_c - n_i) / sigma). Each integral is evaluated on a
    window centered at the integrand's mode (the log-integrand has curvature
    <= -1, bounding the truncated tails below e^-84 relative), with the
    integrand rescaled by its peak so adaptive quadrature works in a sane
    dynamic range. The resulting vector is validated to sum to 1 within 1e-9
    and renormalized in log space.

    Raises:
      QuadratureFailure: the integrator did not meet tolerance.
      NormalizationFailure: the unit-sum residual exceeded 1e-9.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0 for probabilities, got {sigma}")
    counts = hist.as_array().astype(float)
    k = hist.num_classes
    log_p = np.empty(k, dtype=float)
    for c in range(k):
        deltas = (counts[c] - np.delete(counts, c)) / sigma
        mode = _win_mode(deltas)
        peak = _log_win_integrand(mode, deltas)
        result = integrate.quad(
            lambda z: math.exp(_log_win_integrand(z, deltas) - peak),
            mode - _WINDOW,
            mode + _WINDOW,
            epsabs=_QUAD_EPSABS,
            epsrel=0.0,
            limit=10000,
            full_output=1,
        )
        value, abserr = result[0], result[1]
        if len(result) > 3 or not (value > 0) or abserr > 1e-9:
            raise QuadratureFailure(
                f"class {c}: integral {value} with error estimate {abserr}")
        log_p[c] = peak + math.log(value)
    total = logsumexp(log_p)
    residual = abs(math.expm1(total))
    if residual > 1e-9:
        raise NormalizationFailure(
            f"probabilities sum to 1 {'+' if total > 0 else '-'} {residual:.3e}")
    return log_p - total


def class_probabilities(hist: Histogram, sigma: float) -> ClassDistribution:
    """Exact output distribution of noisy argmax on a fixed histogram."""
    log_p = class_log_probabilities(hist, sigma)
    probs = np.exp(log_p)
    return ClassDistribution(probs=tuple(probs.tolist()),
                             log_probs=tuple(log_p.tolist()))


# ---------------------------------------------------------------------------
# Divergences and bounds


def renyi_divergence_exact(
    hist_s: Histogram,
    hist_s_prime: Histogram,
    sigma: float,
    orders: Sequence[float] = DEFAULT_ORDERS,
) -> RdpCurve:
    """Exact Renyi divergence between the mechanism's outputs on two histograms.

    Computes D_alpha(P || Q) = logsumexp_c(alpha log p_c + (1-alpha) log q_c)
    / (alpha - 1) from quadrature-grade log-probabilities, entirely in log
    space. Tiny negative values from float rounding are clipped to 0; a class
    with q_c = 0 but p_c > 0 would yield +inf (cannot occur for sigma > 0).
    """
    grid = _normalize_orders(orders)
    if hist_s.num_classes != hist_s_prime.num_classes:
        raise ValueError(
            f"class count mismatch: {hist_s.num_classes} vs {hist_s_prime.num_classes}")
    log_p = class_log_probabilities(hist_s, sigma)
    log_q = class_log_probabilities(hist_s_prime, sigma)
    values = []
    for alpha in grid:
        if np.any(np.isneginf(log_q) & ~np.isneginf(log_p)):
            values.append(math.inf)
            continue
        combined = alpha * log_p + (1.0 - alpha) * log_q
        values.append(max(0.0, float(logsumexp(combined)) / (alpha - 1.0)))
    return RdpCurve(orders=grid, values=tuple(values))


def gaussian_rdp_bound(
    sigma: float,
    sensitivity: float,
    orders: Sequence[float] = DEFAULT_ORDERS,
) -> RdpCurve:
    """Data-independent Gaussian RDP curve: sensitivity^2 * alpha / (2 sigma^2).

    The neighboring histograms of interest differ by moving one vote between
    two classes, an L2 distance of sqrt(2).
    """
    grid = _normalize_orders(orders)
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if sensitivity < 0:
        raise ValueError(f"sensitivity must be >= 0, got {sensitivity}")
    scale = sensitivity * sensitivity / (2.0 * sigma * sigma)
    return RdpCurve(orders=grid, values=tuple(scale * a for a in grid))


def gaussian_group_rdp_bound(
    sigma: float,
    sensitivity: float,
    group_size: int,
    orders: Sequence[float] = DEFAULT_ORDERS,
) -> RdpCurve:
    """Gaussian group-privacy RDP curve for groups of m swaps.

    A group of size m shifts the histogram by at most m * sensitivity in L2,
    so the curve is m^2 * sensitivity^2 * alpha / (2 sigma^2): quadratic in
    the group size, with no order shrinkage.
    """
    if group_size < 1:
        raise ValueError(f"group_size must be >= 1, got {group_size}")
    return gaussian_rdp_bound(sigma, group_size * sensitivity, orders)


def generic_group_rdp(alpha: float, rho: float, group_size: int) -> tuple[float, float]:
    """Black-box group-privacy conversion for an arbitrary RDP guarantee.

    Each doubling of the group halves the usable order and triples the bound:
    a guarantee of rho at order alpha implies 3^m * rho at order alpha / 2^m
    for groups of size 2^m (here group_size = m, the number of doublings).

    Returns:
      (new_order, new_bound).

    Raises:
      OrderUnderflow: alpha / 2^m <= 1, so no Renyi order survives.
    """
    if not math.isfinite(alpha) or alpha <= 1.0:
        raise ValueError(f"alpha must be finite and > 1, got {alpha}")
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    if group_size < 0:
        raise ValueError(f"group_size must be >= 0, got {group_size}")
    new_order = alpha / (2.0 ** group_size)
    if new_order <= 1.0:
        raise OrderUnderflow(
            f"order {alpha} after {group_size} doublings is {new_order} <= 1")
    return new_order, (3.0 ** group_size) * rho
