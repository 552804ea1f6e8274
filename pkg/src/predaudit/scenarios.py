"""Parametric vote models for private-prediction deployments.

Each deployment style (teacher-ensemble voting, collaborative per-teacher
categoricals, deterministic prompt ensembles, subsampled nearest neighbors)
gets a generator of neighboring histogram pairs (H_S, H_S'): the S side is the
unmodified deployment, the S' side differs by one record (a swapped teacher,
a poisoned teacher, or an inserted neighbor). A brute-force subsampling oracle
validates the nearest-neighbor model end to end.

Samplers draw from the counter-based streams in :mod:`predaudit.rng` and are
pure functions of (model, seed, query_index, trial_index). By default the two
sides are sampled independently, matching audits that run the mechanism on S
and on S' in separate experiments; ``coupled=True`` shares the unchanged
components (same base multinomial, same unchanged teachers) within a trial
pair for variance reduction.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Mapping, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .mechanism import Histogram
from .rng import (
    BLOCK_TRIALS,
    PURPOSE_VOTES_S,
    PURPOSE_VOTES_S_PRIME,
    block_generator,
    subkey,
)

VARIANTS = ("pate", "capc", "prompt_pate", "private_knn")
CRAFTERS = ("natural", "poisoning")
DISTINGUISHERS = ("adversarial", "natural")


class VariantMismatch(ValueError):
    """A sampler was called with a model of a different variant."""


def _check_categorical(name: str, probs: Sequence[float], num_classes: int) -> tuple[float, ...]:
    vec = tuple(float(x) for x in probs)
    if len(vec) != num_classes:
        raise ValueError(f"{name} has {len(vec)} entries, expected {num_classes}")
    if any(x < 0.0 or not math.isfinite(x) for x in vec):
        raise ValueError(f"{name} has negative or non-finite entries: {vec}")
    if abs(sum(vec) - 1.0) > 1e-9:
        raise ValueError(f"{name} sums to {sum(vec)}, not 1")
    return vec


@dataclasses.dataclass(frozen=True)
class VoteModel:
    """Per-query parametric model of teacher votes under S and S'.

    Exactly the fields of the active variant are set:
      pate: ``p`` (every teacher's vote under S), ``p_prime`` (the swapped
        teacher's vote distribution under S').
      capc: ``teacher_probs`` (one categorical per teacher under S),
        ``poisoned_first`` (teacher 1's categorical under S').
      prompt_pate: ``hist_s`` / ``hist_s_prime`` (deterministic pair).
      private_knn: ``p`` (each of the k neighbor votes under S), ``p_last``
        (the vote the poison displaces), ``gamma`` (subsampling rate),
        ``poison_rank`` (distance rank of the poison point), ``poison_label``.
    """

    variant: str
    num_classes: int
    teachers: int
    p: tuple[float, ...] | None = None
    p_prime: tuple[float, ...] | None = None
    teacher_probs: tuple[tuple[float, ...], ...] | None = None
    poisoned_first: tuple[float, ...] | None = None
    hist_s: Histogram | None = None
    hist_s_prime: Histogram | None = None
    p_last: tuple[float, ...] | None = None
    gamma: float | None = None
    poison_rank: int | None = None
    poison_label: int | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.num_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.num_classes}")
        if self.teachers < 1:
            raise ValueError(f"need at least 1 teacher, got {self.teachers}")
        if self.variant == "pate":
            if self.p is None or self.p_prime is None:
                raise ValueError("pate model needs p and p_prime")
        elif self.variant == "capc":
            if self.teacher_probs is None or self.poisoned_first is None:
                raise ValueError("capc model needs teacher_probs and poisoned_first")
            if len(self.teacher_probs) != self.teachers:
                raise ValueError(
                    f"{len(self.teacher_probs)} teacher distributions for "
                    f"{self.teachers} teachers")
        elif self.variant == "prompt_pate":
            if self.hist_s is None or self.hist_s_prime is None:
                raise ValueError("prompt_pate model needs hist_s and hist_s_prime")
            if (self.hist_s.num_classes != self.num_classes
                    or self.hist_s_prime.num_classes != self.num_classes):
                raise ValueError("stored histograms disagree with num_classes")
        else:
            if self.p is None or self.p_last is None:
                raise ValueError("private_knn model needs p and p_last")
            if self.gamma is None or not 0.0 < self.gamma < 1.0:
                raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
            if self.poison_rank is None or self.poison_rank < 1:
                raise ValueError(f"poison_rank must be >= 1, got {self.poison_rank}")
            if (self.poison_label is None
                    or not 0 <= self.poison_label < self.num_classes):
                raise ValueError(f"poison_label {self.poison_label} out of range")

    @classmethod
    def pate(cls, p: Sequence[float], p_prime: Sequence[float],
             teachers: int) -> "VoteModel":
        k = len(tuple(p))
        return cls(variant="pate", num_classes=k, teachers=teachers,
                   p=_check_categorical("p", p, k),
                   p_prime=_check_categorical("p_prime", p_prime, k))

    @classmethod
    def capc(cls, teacher_probs: Sequence[Sequence[float]],
             poisoned_first: Sequence[float]) -> "VoteModel":
        if len(teacher_probs) == 0:
            raise ValueError("capc model needs at least one teacher")
        k = len(tuple(teacher_probs[0]))
        checked = tuple(
            _check_categorical(f"teacher {i + 1}", row, k)
            for i, row in enumerate(teacher_probs))
        return cls(variant="capc", num_classes=k, teachers=len(checked),
                   teacher_probs=checked,
                   poisoned_first=_check_categorical("poisoned_first", poisoned_first, k))

    @classmethod
    def prompt_pate(cls, hist_s: Histogram, hist_s_prime: Histogram,
                    teachers: int | None = None) -> "VoteModel":
        if hist_s.num_classes != hist_s_prime.num_classes:
            raise ValueError("stored histograms have different class counts")
        return cls(variant="prompt_pate", num_classes=hist_s.num_classes,
                   teachers=teachers if teachers is not None else hist_s.total,
                   hist_s=hist_s, hist_s_prime=hist_s_prime)

    @classmethod
    def private_knn(cls, p: Sequence[float], p_last: Sequence[float],
                    teachers: int, gamma: float, poison_rank: int,
                    poison_label: int) -> "VoteModel":
        k = len(tuple(p))
        return cls(variant="private_knn", num_classes=k, teachers=teachers,
                   p=_check_categorical("p", p, k),
                   p_last=_check_categorical("p_last", p_last, k),
                   gamma=gamma, poison_rank=poison_rank, poison_label=poison_label)


@dataclasses.dataclass(frozen=True)
class AdversaryConfig:
    """Which neighboring-pair crafter and query strategy an audit assumes."""

    crafter: str
    distinguisher: str
    query_ids: tuple[str, ...]

    def __post_init__(self):
        if self.crafter not in CRAFTERS:
            raise ValueError(f"crafter must be one of {CRAFTERS}, got {self.crafter!r}")
        if self.distinguisher not in DISTINGUISHERS:
            raise ValueError(
                f"distinguisher must be one of {DISTINGUISHERS}, got {self.distinguisher!r}")
        if len(self.query_ids) == 0:
            raise ValueError("adversary must ask at least one query")
        if self.distinguisher == "adversarial" and len(set(self.query_ids)) != 1:
            raise ValueError(
                "adversarial distinguisher repeats a single query id, got "
                f"{sorted(set(self.query_ids))}")


@dataclasses.dataclass(frozen=True)
class RankedQuerySet:
    """Nearest-neighbor orderings of a point set for a batch of queries.

    ``labels[i]`` is point i's class label; ``order_by_query[qid]`` lists point
    indices closest-first. Each ordering must be a prefix of a permutation of
    the point indices (distinct, in range); it may omit far points.
    """

    labels: tuple[int, ...]
    order_by_query: dict[str, tuple[int, ...]]

    def __post_init__(self):
        n = len(self.labels)
        if n == 0:
            raise ValueError("point set is empty")
        for qid, order in self.order_by_query.items():
            if len(set(order)) != len(order):
                raise ValueError(f"query {qid!r}: ordering repeats a point")
            if any(not 0 <= i < n for i in order):
                raise ValueError(f"query {qid!r}: point index out of range")

    def rank_of(self, query_id: str, point_index: int) -> int:
        """1-based distance rank of a point for one query."""
        order = self.order_by_query[query_id]
        try:
            return order.index(point_index) + 1
        except ValueError:
            raise ValueError(
                f"point {point_index} not ranked for query {query_id!r}") from None

    def labels_in_rank_order(self, query_id: str) -> tuple[int, ...]:
        return tuple(self.labels[i] for i in self.order_by_query[query_id])

    def candidate_ranks(self, point_index: int) -> dict[str, int]:
        """Rank of one point for every query that ranks it."""
        out = {}
        for qid, order in self.order_by_query.items():
            if point_index in order:
                out[qid] = order.index(point_index) + 1
        return out


# ---------------------------------------------------------------------------
# Block-level samplers


def _cumulative(probs: Sequence[float]) -> np.ndarray:
    """Cumulative distribution normalized so the last entry is exactly 1."""
    cum = np.cumsum(np.asarray(probs, dtype=float))
    return cum / cum[-1]


def _categorical_from_uniform(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(cum, u, side="right")
    return np.minimum(idx, cum.size - 1).astype(np.int64)


def _pate_block(model: VoteModel, block: int, seed: int, query_index: int,
                coupled: bool) -> tuple[np.ndarray, np.ndarray]:
    k = model.teachers
    gen_s = block_generator(seed, subkey(PURPOSE_VOTES_S, query_index), block)
    gen_sp = block_generator(seed, subkey(PURPOSE_VOTES_S_PRIME, query_index), block)
    cum_prime = _cumulative(model.p_prime)
    if coupled:
        base = gen_s.multinomial(k - 1, model.p, size=BLOCK_TRIALS)
        last_s = _categorical_from_uniform(_cumulative(model.p),
                                           gen_s.random(BLOCK_TRIALS))
        last_sp = _categorical_from_uniform(cum_prime, gen_sp.random(BLOCK_TRIALS))
        rows = np.arange(BLOCK_TRIALS)
        h_s = base.copy()
        h_s[rows, last_s] += 1
        h_sp = base.copy()
        h_sp[rows, last_sp] += 1
        return h_s, h_sp
    h_s = gen_s.multinomial(k, model.p, size=BLOCK_TRIALS)
    h_sp = gen_sp.multinomial(k - 1, model.p, size=BLOCK_TRIALS)
    last_sp = _categorical_from_uniform(cum_prime, gen_sp.random(BLOCK_TRIALS))
    h_sp[np.arange(BLOCK_TRIALS), last_sp] += 1
    return h_s, h_sp.astype(np.int64)


def _capc_block(model: VoteModel, block: int, seed: int, query_index: int,
                coupled: bool) -> tuple[np.ndarray, np.ndarray]:
    k = model.teachers
    kk = model.num_classes
    gen_s = block_generator(seed, subkey(PURPOSE_VOTES_S, query_index), block)
    gen_sp = block_generator(seed, subkey(PURPOSE_VOTES_S_PRIME, query_index), block)
    cums = np.stack([_cumulative(row) for row in model.teacher_probs])
    cum_poisoned = _cumulative(model.poisoned_first)

    def histogram_rows(classes: np.ndarray) -> np.ndarray:
        # classes: (BLOCK_TRIALS, k) per-teacher votes -> (BLOCK_TRIALS, K) counts
        out = np.zeros((BLOCK_TRIALS, kk), dtype=np.int64)
        np.add.at(out, (np.arange(BLOCK_TRIALS)[:, None], classes), 1)
        return out

    u_s = gen_s.random((BLOCK_TRIALS, k))
    classes_s = np.minimum(
        np.argmax(cums[None, :, :] > u_s[:, :, None], axis=2), kk - 1
    ).astype(np.int64)
    h_s = histogram_rows(classes_s)
    rows = np.arange(BLOCK_TRIALS)
    if coupled:
        first_sp = _categorical_from_uniform(cum_poisoned, gen_sp.random(BLOCK_TRIALS))
        h_sp = h_s.copy()
        h_sp[rows, classes_s[:, 0]] -= 1
        h_sp[rows, first_sp] += 1
        return h_s, h_sp
    u_sp = gen_sp.random((BLOCK_TRIALS, k))
    classes_sp = np.minimum(
        np.argmax(cums[None, :, :] > u_sp[:, :, None], axis=2), kk - 1
    ).astype(np.int64)
    classes_sp[:, 0] = _categorical_from_uniform(cum_poisoned, u_sp[:, 0])
    return h_s, histogram_rows(classes_sp)


def _knn_flip(h_base: np.ndarray, model: VoteModel, nu: float,
              uniforms: np.ndarray) -> np.ndarray:
    """Applies the Bernoulli(nu) one-vote swap to per-trial base histograms.

    When the drawn removal class has zero count in the base histogram, the
    class is redrawn from p_last restricted to positive bins; if no positive
    bin carries p_last mass, removal falls back to the realized counts (a
    documented model repair, surfaced nowhere else).
    """
    h_sp = h_base.copy()
    flip = uniforms[:, 0] < nu
    if not flip.any():
        return h_sp
    y = model.poison_label
    cum_last = _cumulative(model.p_last)
    removal = _categorical_from_uniform(cum_last, uniforms[:, 1])
    rows = np.nonzero(flip)[0]
    classes = removal[rows]
    bad = h_base[rows, classes] == 0
    for j in np.nonzero(bad)[0]:
        r = rows[j]
        mass = np.asarray(model.p_last) * (h_base[r] > 0)
        total = mass.sum()
        if total <= 0.0:
            mass = h_base[r].astype(float)
            total = mass.sum()
        cum = np.cumsum(mass / total)
        cum[-1] = 1.0
        classes[j] = _categorical_from_uniform(cum, np.asarray([uniforms[r, 2]]))[0]
    h_sp[rows, classes] -= 1
    h_sp[rows, y] += 1
    return h_sp


def _knn_block(model: VoteModel, block: int, seed: int, query_index: int,
               coupled: bool, nu: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    if nu is None:
        nu = knn_inclusion_probability(model.poison_rank, model.teachers, model.gamma)
    gen_s = block_generator(seed, subkey(PURPOSE_VOTES_S, query_index), block)
    h_s = gen_s.multinomial(model.teachers, model.p, size=BLOCK_TRIALS)
    gen_sp = block_generator(seed, subkey(PURPOSE_VOTES_S_PRIME, query_index), block)
    if coupled:
        base = h_s
    else:
        base = gen_sp.multinomial(model.teachers, model.p, size=BLOCK_TRIALS)
    uniforms = gen_sp.random((BLOCK_TRIALS, 3))
    return h_s, _knn_flip(base, model, nu, uniforms)


def _prompt_block(model: VoteModel) -> tuple[np.ndarray, np.ndarray]:
    tile_s = np.tile(model.hist_s.as_array(), (BLOCK_TRIALS, 1))
    tile_sp = np.tile(model.hist_s_prime.as_array(), (BLOCK_TRIALS, 1))
    return tile_s, tile_sp


def vote_pair_block(
    model: VoteModel,
    block: int,
    seed: int = 0,
    query_index: int = 0,
    coupled: bool = False,
    nu: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One full block of histogram pairs: two (BLOCK_TRIALS, K) int arrays.

    The bulk interface behind the per-trial samplers; campaigns consume whole
    blocks. ``nu`` overrides the computed inclusion probability for
    private_knn models (testing hook).
    """
    if model.variant == "pate":
        return _pate_block(model, block, seed, query_index, coupled)
    if model.variant == "capc":
        return _capc_block(model, block, seed, query_index, coupled)
    if model.variant == "private_knn":
        return _knn_block(model, block, seed, query_index, coupled, nu)
    return _prompt_block(model)


def _pair_at(model: VoteModel, trial_index: int, seed: int, query_index: int,
             coupled: bool) -> tuple[Histogram, Histogram]:
    if trial_index < 0:
        raise ValueError(f"trial_index must be >= 0, got {trial_index}")
    block, row = divmod(trial_index, BLOCK_TRIALS)
    h_s, h_sp = vote_pair_block(model, block, seed, query_index, coupled)
    return Histogram(h_s[row].tolist()), Histogram(h_sp[row].tolist())


def sample_pate_pair(model: VoteModel, trial_index: int, seed: int = 0,
                     query_index: int = 0, coupled: bool = False
                     ) -> tuple[Histogram, Histogram]:
    """One neighboring pair for a teacher-ensemble model.

    H_S pools k teacher votes drawn from p; H_S' pools k-1 votes from p plus
    one from p_prime (the swapped teacher). ``coupled=True`` shares the k-1
    unchanged votes within the trial.
    """
    if model.variant != "pate":
        raise VariantMismatch(f"expected pate model, got {model.variant}")
    return _pair_at(model, trial_index, seed, query_index, coupled)


def sample_capc_pair(model: VoteModel, trial_index: int, seed: int = 0,
                     query_index: int = 0, coupled: bool = True
                     ) -> tuple[Histogram, Histogram]:
    """One neighboring pair with per-teacher vote distributions.

    Teacher 1 votes from teacher_probs[0] under S and poisoned_first under S';
    teachers 2..k vote from their own distributions on both sides. With
    ``coupled=True`` (default) the unchanged teachers' votes are bit-identical
    across the pair, the structure that makes the two sides neighbors.
    """
    if model.variant != "capc":
        raise VariantMismatch(f"expected capc model, got {model.variant}")
    return _pair_at(model, trial_index, seed, query_index, coupled)


def prompt_pate_pair(model: VoteModel) -> tuple[Histogram, Histogram]:
    """The stored deterministic pair (all randomness lives in the mechanism)."""
    if model.variant != "prompt_pate":
        raise VariantMismatch(f"expected prompt_pate model, got {model.variant}")
    return model.hist_s, model.hist_s_prime


def sample_knn_pair(model: VoteModel, trial_index: int, seed: int = 0,
                    query_index: int = 0, coupled: bool = False
                    ) -> tuple[Histogram, Histogram]:
    """One neighboring pair for the subsampled nearest-neighbor model.

    H_S is Multinomial(k, p). With probability nu (the poison point's top-k
    inclusion probability) H_S' swaps one vote drawn from p_last for a vote on
    poison_label; otherwise H_S' equals its base draw. ``coupled=True`` makes
    the swap operate on H_S itself, so |H_S' - H_S| is 0 or one moved vote.
    """
    if model.variant != "private_knn":
        raise VariantMismatch(f"expected private_knn model, got {model.variant}")
    return _pair_at(model, trial_index, seed, query_index, coupled)


# ---------------------------------------------------------------------------
# Private-kNN closed form and brute-force oracle


def knn_inclusion_probability(rank: int, k: int, gamma: float) -> float:
    """Probability a point at distance rank r lands in the subsampled top-k.

    The point must itself be subsampled (probability gamma) with at most k-1
    of the r-1 closer points subsampled:
    nu = gamma * sum_{i=0}^{k-1} C(r-1, i) gamma^i (1-gamma)^(r-1-i) for
    r > k, and plain gamma when r <= k. Evaluated with log-space binomial
    coefficients so huge ranks stay finite.
    """
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    if rank <= k:
        return gamma
    if gamma == 1.0:
        return 0.0
    i = np.arange(k, dtype=float)
    r = float(rank)
    log_terms = (gammaln(r) - gammaln(i + 1.0) - gammaln(r - i)
                 + (i + 1.0) * math.log(gamma)
                 + (r - 1.0 - i) * math.log1p(-gamma))
    return float(math.exp(logsumexp(log_terms)))


@dataclasses.dataclass(frozen=True)
class KnnOracleDraw:
    """One coupled draw of the brute-force subsampling oracle.

    Counts are raw label tallies of the chosen neighbors (possibly all zero
    when the subsample is empty); the flags report subsamples smaller than k,
    where the tally covers every subsampled point.
    """

    counts_s: tuple[int, ...]
    counts_s_prime: tuple[int, ...]
    fewer_than_k_s: bool
    fewer_than_k_s_prime: bool


def knn_oracle_block(
    labels: Sequence[int],
    poison_rank: int,
    poison_label: int,
    k: int,
    gamma: float,
    num_classes: int,
    block: int,
    seed: int = 0,
    query_index: int = 0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One block of coupled oracle draws.

    Subsamples each point independently with probability gamma, keeps the k
    closest survivors by rank, and tallies their labels; the S' side inserts
    the poison point at its rank with the same natural-point subsample.

    Returns (hist_s, hist_s_prime, fewer_s, fewer_s_prime) with the histograms
    shaped (BLOCK_TRIALS, num_classes).
    """
    nat = np.asarray(labels, dtype=np.int64)
    n = nat.size
    if n == 0 or n > 10_000:
        raise ValueError(f"oracle instance must have 1..10000 points, got {n}")
    if not 1 <= poison_rank <= n + 1:
        raise ValueError(f"poison_rank must be in [1, {n + 1}], got {poison_rank}")
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if any(not 0 <= c < num_classes for c in nat) or not 0 <= poison_label < num_classes:
        raise ValueError("label out of range")

    gen_s = block_generator(seed, subkey(PURPOSE_VOTES_S, query_index), block)
    selected = gen_s.random((BLOCK_TRIALS, n)) < gamma
    gen_sp = block_generator(seed, subkey(PURPOSE_VOTES_S_PRIME, query_index), block)
    poison_selected = gen_sp.random(BLOCK_TRIALS) < gamma

    onehot = np.zeros((n, num_classes), dtype=np.int64)
    onehot[np.arange(n), nat] = 1

    inclusive = np.cumsum(selected, axis=1)
    chosen_s = selected & (inclusive <= k)
    hist_s = chosen_s.astype(np.int64) @ onehot
    fewer_s = inclusive[:, -1] < k

    # In the S' ordering the poison sits between natural indices r-2 and r-1
    # (0-based); the first k subsampled points in that ordering are chosen.
    r = poison_rank
    exclusive = inclusive - selected
    before_poison = inclusive[:, r - 2] if r >= 2 else np.zeros(BLOCK_TRIALS, dtype=np.int64)
    poison_chosen = poison_selected & (before_poison <= k - 1)
    shift = poison_selected[:, None] & (np.arange(n)[None, :] >= r - 1)
    chosen_sp = selected & ((exclusive + shift) <= k - 1)
    hist_sp = chosen_sp.astype(np.int64) @ onehot
    hist_sp[:, poison_label] += poison_chosen.astype(np.int64)
    fewer_sp = (inclusive[:, -1] + poison_selected) < k
    return hist_s, hist_sp, fewer_s, fewer_sp


def simulate_knn_oracle(
    labels: Sequence[int],
    poison_rank: int,
    poison_label: int,
    k: int,
    gamma: float,
    trial_index: int,
    num_classes: int | None = None,
    seed: int = 0,
    query_index: int = 0,
) -> KnnOracleDraw:
    """One trial of the brute-force subsampling oracle (see knn_oracle_block).

    ``labels`` lists the natural neighbors' labels closest-first; the poison
    point is inserted at ``poison_rank`` on the S' side of the same draw.
    """
    if trial_index < 0:
        raise ValueError(f"trial_index must be >= 0, got {trial_index}")
    if num_classes is None:
        num_classes = max(max(labels), poison_label) + 1
    block, row = divmod(trial_index, BLOCK_TRIALS)
    hist_s, hist_sp, fewer_s, fewer_sp = knn_oracle_block(
        labels, poison_rank, poison_label, k, gamma, num_classes, block,
        seed, query_index)
    return KnnOracleDraw(
        counts_s=tuple(hist_s[row].tolist()),
        counts_s_prime=tuple(hist_sp[row].tolist()),
        fewer_than_k_s=bool(fewer_s[row]),
        fewer_than_k_s_prime=bool(fewer_sp[row]),
    )


def knn_expected_influence(
    ranks_by_query: Mapping[str, int],
    k: int,
    gamma: float,
    query_ids: Sequence[str] | None = None,
) -> float:
    """Expected number of queries whose answer a candidate point touches.

    Sums the top-k inclusion probability of the candidate over the queries;
    the poisoning adversary ranks candidate points by this score. A point
    inside the top-k everywhere scores the maximum gamma * len(query_ids).
    """
    if query_ids is None:
        query_ids = list(ranks_by_query.keys())
    missing = [q for q in query_ids if q not in ranks_by_query]
    if missing:
        raise ValueError(f"no rank for queries {missing}")
    return sum(knn_inclusion_probability(ranks_by_query[q], k, gamma)
               for q in query_ids)


def estimate_vote_distribution(samples: Sequence[int],
                               num_classes: int | None = None) -> np.ndarray:
    """Maximum-likelihood categorical from observed class labels.

    Plain empirical frequencies with no smoothing: classes never observed get
    probability exactly 0, which downstream samplers tolerate.
    """
    arr = np.asarray(samples, dtype=np.int64)
    if arr.size == 0:
        raise ValueError("cannot estimate a distribution from zero samples")
    if (arr < 0).any():
        raise ValueError("negative class label")
    if num_classes is None:
        num_classes = int(arr.max()) + 1
    elif int(arr.max()) >= num_classes:
        raise ValueError(f"label {int(arr.max())} outside {num_classes} classes")
    return np.bincount(arr, minlength=num_classes) / arr.size
