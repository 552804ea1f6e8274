"""Assembly of per-query audits into a labeled end-to-end DP report.

A report composes per-query audit curves (with exact and theory curves when
available), converts the composed curves to approximate-DP points at a target
delta, and keeps the validity pedigree of each number explicit: an audited
epsilon obtained through the RDP-to-DP conversion is an illustrative point
estimate, not a certified lower bound, while the theory epsilon is a true
upper bound and the exact epsilon is exact for the realized histogram pair.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from pathlib import Path
from typing import Sequence

from .audit import AuditResult, DpPoint, compose_curves, rdp_to_dp, scale_curve
from .mechanism import RdpCurve

# Validity labels attached to converted DP points.
LABEL_AUDIT_DP = ("illustrative: converted from a high-probability divergence "
                  "lower bound; the conversion direction only certifies upper bounds")
LABEL_EXACT_DP = "exact for the realized histogram pairs"
LABEL_THEORY_DP = "certified upper bound"

COMPOSED_ID = "composed"

CSV_COLUMNS = ("query_id", "order", "audit_lb", "exact", "theory",
               "method", "confidence", "valid")


@dataclasses.dataclass(frozen=True)
class QueryAudit:
    """One audited query: its audit result plus reference curves."""

    query_id: str
    audit: AuditResult
    theory: RdpCurve
    exact: RdpCurve | None = None
    trials_s: int = 0
    trials_s_prime: int = 0

    def __post_init__(self):
        if self.audit.curve.orders != self.theory.orders:
            raise ValueError(f"query {self.query_id}: theory grid differs from audit")
        if self.exact is not None and self.exact.orders != self.audit.curve.orders:
            raise ValueError(f"query {self.query_id}: exact grid differs from audit")


@dataclasses.dataclass(frozen=True)
class AuditReport:
    """Composed audit/exact/theory curves and their DP conversions."""

    queries: tuple[QueryAudit, ...]
    repeats: tuple[int, ...]
    composed_audit: AuditResult
    composed_theory: RdpCurve
    composed_exact: RdpCurve | None
    delta: float
    audit_dp: DpPoint
    theory_dp: DpPoint
    exact_dp: DpPoint | None

    def to_json_dict(self) -> dict:
        queries = []
        for qa, reps in zip(self.queries, self.repeats):
            queries.append({
                "query_id": qa.query_id,
                "repeats": reps,
                "method": qa.audit.method,
                "confidence": qa.audit.confidence,
                "output_set": (list(qa.audit.output_set)
                               if qa.audit.output_set is not None else None),
                "trials_s": qa.trials_s,
                "trials_s_prime": qa.trials_s_prime,
                "orders": list(qa.audit.curve.orders),
                "audit_lb": list(qa.audit.curve.values),
                "exact": list(qa.exact.values) if qa.exact is not None else None,
                "theory": list(qa.theory.values),
                "valid": list(qa.audit.valid),
                "reliable": list(qa.audit.reliable),
            })
        return {
            "delta": self.delta,
            "queries": queries,
            "composed": {
                "orders": list(self.composed_audit.curve.orders),
                "audit_lb": list(self.composed_audit.curve.values),
                "exact": (list(self.composed_exact.values)
                          if self.composed_exact is not None else None),
                "theory": list(self.composed_theory.values),
                "confidence": self.composed_audit.confidence,
                "valid": list(self.composed_audit.valid),
            },
            "converted": {
                "audit": _dp_point_dict(self.audit_dp, LABEL_AUDIT_DP),
                "exact": (_dp_point_dict(self.exact_dp, LABEL_EXACT_DP)
                          if self.exact_dp is not None else None),
                "theory": _dp_point_dict(self.theory_dp, LABEL_THEORY_DP),
            },
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")

    def write_csv(self, path: str | Path) -> None:
        """Per-(query, order) table; the composed curve uses query_id 'composed'."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for qa in self.queries:
                _write_curve_rows(writer, qa.query_id, qa.audit, qa.exact, qa.theory)
            _write_curve_rows(writer, COMPOSED_ID, self.composed_audit,
                              self.composed_exact, self.composed_theory)


def _dp_point_dict(point: DpPoint, label: str) -> dict:
    return {
        "epsilon": point.epsilon,
        "delta": point.delta,
        "source_order": point.source_order,
        "validity": label,
    }


def _fmt(x: float | None) -> str:
    if x is None:
        return ""
    return repr(float(x))


def _write_curve_rows(writer, query_id: str, audit: AuditResult,
                      exact: RdpCurve | None, theory: RdpCurve) -> None:
    for j, order in enumerate(audit.curve.orders):
        writer.writerow([
            query_id,
            _fmt(order),
            _fmt(audit.curve.values[j]),
            _fmt(exact.values[j] if exact is not None else None),
            _fmt(theory.values[j]),
            audit.method,
            _fmt(audit.confidence),
            audit.valid[j],
        ])


def audited_dp_report(
    query_audits: Sequence[QueryAudit],
    delta: float,
    repeats: Sequence[int] | None = None,
) -> AuditReport:
    """Composes per-query curves and converts them to approximate DP.

    ``repeats[i]`` is how many times query i is asked; asking one query k
    times scales its curve by k without touching the confidence (the bound
    fails only when that query's intervals fail). Distinct queries compose by
    order-wise summation with a union bound over their failure events, so the
    composed confidence is 1 - sum of the per-query failure budgets.

    The exact composed curve is only reported when every query has one.
    """
    if len(query_audits) == 0:
        raise ValueError("need at least one audited query")
    if repeats is None:
        repeats = [1] * len(query_audits)
    if len(repeats) != len(query_audits):
        raise ValueError("repeats must align with query_audits")
    if any(int(r) != r or r < 1 for r in repeats):
        raise ValueError(f"repeats must be positive integers, got {repeats}")
    repeats = [int(r) for r in repeats]

    audit_curves = [scale_curve(qa.audit.curve, r)
                    for qa, r in zip(query_audits, repeats)]
    theory_curves = [scale_curve(qa.theory, r)
                     for qa, r in zip(query_audits, repeats)]
    composed_curve = compose_curves(audit_curves)
    composed_theory = compose_curves(theory_curves)
    composed_exact = None
    if all(qa.exact is not None for qa in query_audits):
        composed_exact = compose_curves(
            [scale_curve(qa.exact, r) for qa, r in zip(query_audits, repeats)])

    failure = sum(1.0 - qa.audit.confidence for qa in query_audits)
    confidence = max(1e-12, 1.0 - failure)
    n = len(composed_curve.orders)
    valid = tuple(all(qa.audit.valid[j] for qa in query_audits) for j in range(n))
    reliable = tuple(all(qa.audit.reliable[j] for qa in query_audits) for j in range(n))
    composed_audit = AuditResult(
        method="composed",
        curve=composed_curve,
        confidence=confidence,
        output_set=None,
        valid=valid,
        reliable=reliable,
    )
    return AuditReport(
        queries=tuple(query_audits),
        repeats=tuple(repeats),
        composed_audit=composed_audit,
        composed_theory=composed_theory,
        composed_exact=composed_exact,
        delta=delta,
        audit_dp=rdp_to_dp(composed_curve, delta),
        theory_dp=rdp_to_dp(composed_theory, delta),
        exact_dp=(rdp_to_dp(composed_exact, delta)
                  if composed_exact is not None else None),
    )
