"""Deterministic counter-based random streams.

Every random draw in this package comes from a Philox generator keyed by
``(seed, subkey)`` with a block index in the counter. Trials are grouped into
fixed blocks of :data:`BLOCK_TRIALS`; a block's draws are always generated in
full and sliced, so the bits consumed by trial ``t`` depend only on
``(seed, subkey, t)`` and never on chunk boundaries, scheduling, or worker
count. Re-running any subset of trials reproduces them exactly.

Subkeys pack a purpose tag (which logical stream: votes for S, votes for S',
mechanism noise for either side, bootstrap resampling) together with a query
index, so each (query, purpose) pair owns an independent stream.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

# Trials per generator block. Protocol constant: changing it changes which
# random values every trial index maps to, invalidating frozen expectations.
BLOCK_TRIALS = 4096

# Purpose tags for stream subkeys.
PURPOSE_VOTES_S = 0
PURPOSE_VOTES_S_PRIME = 1
PURPOSE_NOISE_S = 2
PURPOSE_NOISE_S_PRIME = 3
PURPOSE_BOOTSTRAP = 4
PURPOSE_GENERIC = 5

_PURPOSE_BITS = 4
_MASK64 = (1 << 64) - 1


def subkey(purpose: int, query_index: int = 0) -> int:
    """Packs a purpose tag and a query index into a 64-bit stream subkey.

    Args:
      purpose: one of the PURPOSE_* constants (must fit in 4 bits).
      query_index: index of the query owning the stream, 0 for standalone use.

    Returns:
      An integer subkey; distinct (purpose, query_index) pairs never collide
      as long as query_index < 2**60.
    """
    if not 0 <= purpose < (1 << _PURPOSE_BITS):
        raise ValueError(f"purpose tag {purpose} outside [0, 16)")
    if not 0 <= query_index < (1 << (64 - _PURPOSE_BITS)):
        raise ValueError(f"query_index {query_index} outside subkey range")
    return (query_index << _PURPOSE_BITS) | purpose


def block_generator(seed: int, sub: int, block: int) -> np.random.Generator:
    """Fresh generator for one block of one stream.

    Identical arguments always yield an identical bit stream, independent of
    any other generator the process has created.
    """
    if block < 0:
        raise ValueError(f"block index must be non-negative, got {block}")
    key = np.array([seed & _MASK64, sub & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=int(block) << 128))


def iter_blocks(start_trial: int, num_trials: int) -> Iterator[tuple[int, int, int]]:
    """Yields (block, row_lo, row_hi) covering trials [start, start + num).

    ``row_lo:row_hi`` is the slice of the block's rows belonging to the range;
    callers generate the full block and slice, preserving trial addressing.
    """
    if start_trial < 0 or num_trials < 0:
        raise ValueError("trial range must be non-negative")
    t = start_trial
    end = start_trial + num_trials
    while t < end:
        block = t // BLOCK_TRIALS
        lo = t - block * BLOCK_TRIALS
        hi = min(BLOCK_TRIALS, end - block * BLOCK_TRIALS)
        yield block, lo, hi
        t = block * BLOCK_TRIALS + hi
