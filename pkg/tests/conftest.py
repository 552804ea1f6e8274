"""Shared fixtures: one synthetic histogram pair audited many ways.

The pair below is the workhorse of the suite. Its exact output divergence is
moderate (a fraction of a nat at small orders), so two-cut bounds at 10^6
trials land visibly between zero and the exact curve and every comparison in
the tests has room on both sides.
"""

import json

import numpy as np
import pytest

from predaudit.audit import OutcomeTally
from predaudit.mechanism import Histogram, MechanismParams, noisy_argmax_batch
from predaudit.rng import PURPOSE_NOISE_S, PURPOSE_NOISE_S_PRIME, subkey

SYNTH_S = (14, 12, 10, 8, 6)
SYNTH_S_PRIME = (13, 13, 10, 8, 6)
SYNTH_SIGMA = 2.0
SYNTH_SEED = 0
SYNTH_TRIALS = 1_000_000
SYNTH_PILOT = 100_000


def synth_winners(counts, stream_purpose, num_trials=SYNTH_TRIALS):
    params = MechanismParams(sigma=SYNTH_SIGMA, seed=SYNTH_SEED)
    return noisy_argmax_batch(Histogram(counts), params, 0, num_trials,
                              stream=subkey(stream_purpose))


@pytest.fixture(scope="session")
def synth_tallies():
    """(pilot, audit) tallies of the synthetic pair, disjoint trial ranges."""
    w_s = synth_winners(SYNTH_S, PURPOSE_NOISE_S)
    w_sp = synth_winners(SYNTH_S_PRIME, PURPOSE_NOISE_S_PRIME)
    k = len(SYNTH_S)
    pilot = OutcomeTally.from_winners(w_s[:SYNTH_PILOT], w_sp[:SYNTH_PILOT], k)
    audit = OutcomeTally.from_winners(w_s[SYNTH_PILOT:], w_sp[SYNTH_PILOT:], k)
    return pilot, audit


def write_fixture(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def pair_fixture_dict(hist_s=SYNTH_S, hist_s_prime=SYNTH_S_PRIME,
                      sigma=SYNTH_SIGMA, repeats=1):
    return {
        "variant": "prompt_pate",
        "num_classes": len(hist_s),
        "teachers": int(sum(hist_s)),
        "sigma": sigma,
        "queries": [{"id": "q0", "hist_s": list(hist_s),
                     "hist_s_prime": list(hist_s_prime)}],
        "adversary": {"crafter": "poisoning",
                      "distinguisher": "adversarial" if repeats > 1 else "natural",
                      "query_ids": ["q0"] * repeats},
    }


@pytest.fixture
def pair_fixture(tmp_path):
    """Path to a one-query deterministic-pair fixture file."""
    return write_fixture(tmp_path / "pair.json", pair_fixture_dict())


def assert_within_se(observed_freq, expected_p, n, z=4.0):
    """Frequency vs probability, z standard errors of slack."""
    se = np.sqrt(max(expected_p * (1.0 - expected_p), 1e-12) / n)
    assert abs(observed_freq - expected_p) <= z * se + 1e-12, (
        f"freq {observed_freq} vs p {expected_p} exceeds {z} se ({se})")
