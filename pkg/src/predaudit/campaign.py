"""Audit campaign orchestration: trials to tallies to reports.

A campaign samples neighboring histogram pairs per query, pushes both sides
through the noisy-argmax mechanism, accumulates outcome tallies, runs the
configured audits against exact and theoretical curves, composes across
queries per the fixture's adversary, and writes JSON + CSV reports.

Work is partitioned by trial-index ranges; the counter-based RNG protocol
makes the partitioning semantically invisible, so reports are byte-identical
for any worker count. Long campaigns checkpoint their partial tallies so an
interrupted run resumes instead of restarting.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import multiprocessing
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .audit import (
    AUDIT_METHODS,
    AuditResult,
    OutcomeTally,
    bootstrap_audit,
    k_cut_audit,
    select_output_set,
    two_cut_audit,
)
from .fixtures import ScenarioFixture, load_fixture
from .mechanism import (
    DEFAULT_ORDERS,
    RdpCurve,
    _normalize_orders,
    gaussian_rdp_bound,
    noisy_argmax_rows,
    renyi_divergence_exact,
)
from .report import AuditReport, QueryAudit, audited_dp_report
from .rng import (
    PURPOSE_NOISE_S,
    PURPOSE_NOISE_S_PRIME,
    iter_blocks,
    subkey,
)
from .scenarios import VoteModel, vote_pair_block

# One vote moving between two bins shifts the histogram by sqrt(2) in L2.
VOTE_SENSITIVITY = math.sqrt(2.0)

CHECKPOINT_TRIALS = 10_000_000
CHECKPOINT_FILE = "checkpoint.json"


@dataclasses.dataclass(frozen=True)
class CampaignConfig:
    """Everything a campaign run depends on (all of it fingerprinted)."""

    fixture: str
    out_dir: str
    trials: int = 10_000_000
    orders: tuple[float, ...] = DEFAULT_ORDERS
    confidence: float = 0.95
    delta: float = 1e-6
    methods: tuple[str, ...] = ("two_cut",)
    selection_split: float = 0.1
    seed: int = 0
    workers: int = 1
    resamples: int = 1000
    checkpoint_trials: int = CHECKPOINT_TRIALS

    def __post_init__(self):
        object.__setattr__(self, "orders", _normalize_orders(self.orders))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.trials < 10_000:
            raise ValueError(f"need at least 10^4 trials per query, got {self.trials}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if not 0.0 < self.selection_split <= 0.5:
            raise ValueError(
                f"selection split must be in (0, 0.5], got {self.selection_split}")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError(f"confidence must be in (0, 1), got {self.confidence}")
        if len(self.methods) == 0:
            raise ValueError("configure at least one audit method")
        for m in self.methods:
            if m not in AUDIT_METHODS:
                raise ValueError(f"unknown audit method {m!r} (know {AUDIT_METHODS})")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.resamples < 100:
            raise ValueError(f"resamples must be >= 100, got {self.resamples}")
        if self.checkpoint_trials < 1:
            raise ValueError("checkpoint interval must be positive")

    @property
    def pilot_trials(self) -> int:
        return max(1, round(self.selection_split * self.trials))

    @property
    def audit_trials(self) -> int:
        return self.trials - self.pilot_trials


def _tally_chunk(args) -> tuple[list[int], list[int]]:
    """Tallies mechanism outcomes for one range of trials of one query.

    Top-level so worker processes can import it; returns plain lists so the
    result pickles cheaply.
    """
    model, sigma, seed, query_index, start, count = args
    k = model.num_classes
    counts_s = np.zeros(k, dtype=np.int64)
    counts_sp = np.zeros(k, dtype=np.int64)
    sub_s = subkey(PURPOSE_NOISE_S, query_index)
    sub_sp = subkey(PURPOSE_NOISE_S_PRIME, query_index)
    for block, lo, hi in iter_blocks(start, count):
        votes_s, votes_sp = vote_pair_block(model, block, seed, query_index)
        winners_s = noisy_argmax_rows(votes_s[lo:hi], sigma, seed, sub_s, block, lo, hi)
        winners_sp = noisy_argmax_rows(votes_sp[lo:hi], sigma, seed, sub_sp, block, lo, hi)
        counts_s += np.bincount(winners_s, minlength=k)
        counts_sp += np.bincount(winners_sp, minlength=k)
    return counts_s.tolist(), counts_sp.tolist()


def _run_chunks(pool, chunks: list) -> list[tuple[list[int], list[int]]]:
    if pool is None:
        return [_tally_chunk(c) for c in chunks]
    return pool.map(_tally_chunk, chunks, chunksize=1)


def _tally_range(pool, workers: int, model: VoteModel, sigma: float, seed: int,
                 query_index: int, start: int, count: int) -> OutcomeTally:
    per_chunk = -(-count // workers)
    chunks = []
    offset = start
    while offset < start + count:
        size = min(per_chunk, start + count - offset)
        chunks.append((model, sigma, seed, query_index, offset, size))
        offset += size
    parts = _run_chunks(pool, chunks)
    counts_s = np.sum([p[0] for p in parts], axis=0)
    counts_sp = np.sum([p[1] for p in parts], axis=0)
    return OutcomeTally(counts_s=tuple(int(c) for c in counts_s),
                        counts_s_prime=tuple(int(c) for c in counts_sp))


def _segments(pilot: int, audit: int, interval: int):
    """Checkpointable trial ranges: pilot then audit, split by the interval."""
    for kind, base, total in (("pilot", 0, pilot), ("audit", pilot, audit)):
        done = 0
        while done < total:
            size = min(interval, total - done)
            yield kind, base + done, size
            done += size


def _fingerprint(config: CampaignConfig) -> str:
    fixture_bytes = Path(config.fixture).read_bytes()
    payload = json.dumps({
        "fixture_sha": hashlib.sha256(fixture_bytes).hexdigest(),
        "trials": config.trials,
        "seed": config.seed,
        "selection_split": config.selection_split,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


class _Checkpoint:
    """Partial per-query tallies persisted between segments."""

    def __init__(self, path: Path, fingerprint: str):
        self.path = path
        self.fingerprint = fingerprint
        self.queries: dict[str, dict] = {}
        if path.exists():
            try:
                data = json.loads(path.read_text())
            except (OSError, json.JSONDecodeError):
                data = None
            if data and data.get("fingerprint") == fingerprint:
                self.queries = data.get("queries", {})

    def entry(self, qid: str, num_classes: int) -> dict:
        if qid not in self.queries:
            zeros = [0] * num_classes
            self.queries[qid] = {
                "pilot_s": list(zeros), "pilot_sp": list(zeros),
                "audit_s": list(zeros), "audit_sp": list(zeros),
                "done": [],
            }
        return self.queries[qid]

    def is_done(self, qid: str, segment) -> bool:
        return list(segment) in self.queries.get(qid, {}).get("done", [])

    def record(self, qid: str, segment, kind: str, tally: OutcomeTally) -> None:
        entry = self.queries[qid]
        entry[f"{kind}_s"] = [a + b for a, b in
                              zip(entry[f"{kind}_s"], tally.counts_s)]
        entry[f"{kind}_sp"] = [a + b for a, b in
                               zip(entry[f"{kind}_sp"], tally.counts_s_prime)]
        entry["done"].append(list(segment))
        self._write()

    def tallies(self, qid: str) -> tuple[OutcomeTally, OutcomeTally]:
        entry = self.queries[qid]
        return (
            OutcomeTally(counts_s=tuple(entry["pilot_s"]),
                         counts_s_prime=tuple(entry["pilot_sp"])),
            OutcomeTally(counts_s=tuple(entry["audit_s"]),
                         counts_s_prime=tuple(entry["audit_sp"])),
        )

    def _write(self) -> None:
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(
            {"fingerprint": self.fingerprint, "queries": self.queries}))
        os.replace(tmp, self.path)


def _distinct_with_repeats(query_ids: Sequence[str]) -> tuple[list[str], list[int]]:
    order: list[str] = []
    repeats: dict[str, int] = {}
    for qid in query_ids:
        if qid not in repeats:
            order.append(qid)
            repeats[qid] = 0
        repeats[qid] += 1
    return order, [repeats[q] for q in order]


def _audit_one(method: str, tally: OutcomeTally, output_set, config: CampaignConfig,
               confidence: float) -> AuditResult:
    if method == "two_cut":
        return two_cut_audit(tally, output_set, config.orders, confidence)
    if method == "k_cut":
        return k_cut_audit(tally, config.orders, confidence)
    variant = "two_cut" if method == "two_cut_bootstrap" else "k_cut"
    return bootstrap_audit(
        tally, config.orders, confidence, variant,
        output_set=output_set if variant == "two_cut" else None,
        resamples=config.resamples, seed=config.seed)


def run_campaign(config: CampaignConfig) -> dict[str, AuditReport]:
    """Runs the full audit pipeline and writes one report per method.

    Writes report_<method>.json and report_<method>.csv into the output
    directory and returns the reports keyed by method. Identical
    (config, fixture) re-runs produce byte-identical files regardless of
    worker count or checkpoint state.
    """
    fixture = load_fixture(config.fixture)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    distinct, repeats = _distinct_with_repeats(fixture.adversary.query_ids)
    per_query_confidence = 1.0 - (1.0 - config.confidence) / len(distinct)

    checkpoint = _Checkpoint(out_dir / CHECKPOINT_FILE, _fingerprint(config))

    pool = None
    try:
        if config.workers > 1:
            pool = multiprocessing.get_context("fork").Pool(config.workers)
        for qid in distinct:
            model = fixture.model_for(qid)
            query_index = fixture.index_of(qid)
            checkpoint.entry(qid, fixture.num_classes)
            for segment in _segments(config.pilot_trials, config.audit_trials,
                                     config.checkpoint_trials):
                kind, start, count = segment
                if checkpoint.is_done(qid, segment):
                    continue
                tally = _tally_range(pool, config.workers, model, fixture.sigma,
                                     config.seed, query_index, start, count)
                checkpoint.record(qid, segment, kind, tally)
                print(f"[predaudit] query {qid}: {kind} trials "
                      f"{start}..{start + count} tallied", file=sys.stderr)
    finally:
        if pool is not None:
            pool.close()
            pool.join()

    theory = gaussian_rdp_bound(fixture.sigma, VOTE_SENSITIVITY, config.orders)
    reports: dict[str, AuditReport] = {}
    needs_cut = any(m in ("two_cut", "two_cut_bootstrap") for m in config.methods)
    per_method_audits: dict[str, list[QueryAudit]] = {m: [] for m in config.methods}
    for qid in distinct:
        model = fixture.model_for(qid)
        pilot, audit_tally = checkpoint.tallies(qid)
        output_set = select_output_set(pilot, config.orders) if needs_cut else None
        exact: RdpCurve | None = None
        if fixture.variant == "prompt_pate":
            exact = renyi_divergence_exact(
                model.hist_s, model.hist_s_prime, fixture.sigma, config.orders)
        for method in config.methods:
            result = _audit_one(method, audit_tally, output_set, config,
                                per_query_confidence)
            per_method_audits[method].append(QueryAudit(
                query_id=qid,
                audit=result,
                theory=theory,
                exact=exact,
                trials_s=audit_tally.trials_s,
                trials_s_prime=audit_tally.trials_s_prime,
            ))

    for method in config.methods:
        report = audited_dp_report(per_method_audits[method], config.delta, repeats)
        report.write_json(out_dir / f"report_{method}.json")
        report.write_csv(out_dir / f"report_{method}.csv")
        reports[method] = report
    return reports
