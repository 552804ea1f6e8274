"""Scenario fixture files and prediction-dump ingestion.

A fixture JSON pins everything a campaign needs: the vote-model variant and
its per-query parameters, the mechanism noise scale, and the adversary
(crafter x distinguisher) whose composition semantics the report uses.
Prediction dumps (CSV of per-teacher predicted classes under S and under S')
can be distilled into pate/capc fixtures via maximum-likelihood estimation.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from pathlib import Path
from typing import Sequence

from .mechanism import Histogram
from .scenarios import VARIANTS, AdversaryConfig, VoteModel, estimate_vote_distribution


class FixtureError(ValueError):
    """A fixture file is malformed or violates a model invariant."""


@dataclasses.dataclass(frozen=True)
class ScenarioFixture:
    """A parsed fixture: ordered per-query vote models plus the adversary."""

    variant: str
    num_classes: int
    teachers: int
    sigma: float
    queries: tuple[tuple[str, VoteModel], ...]
    adversary: AdversaryConfig

    def __post_init__(self):
        ids = [qid for qid, _ in self.queries]
        if len(set(ids)) != len(ids):
            raise FixtureError(f"duplicate query ids in fixture: {ids}")
        known = set(ids)
        for qid in self.adversary.query_ids:
            if qid not in known:
                raise FixtureError(f"adversary references unknown query {qid!r}")

    @property
    def query_ids(self) -> tuple[str, ...]:
        return tuple(qid for qid, _ in self.queries)

    def model_for(self, query_id: str) -> VoteModel:
        for qid, model in self.queries:
            if qid == query_id:
                return model
        raise KeyError(f"no query {query_id!r} in fixture")

    def index_of(self, query_id: str) -> int:
        """Stable stream index of a query (its position in the fixture)."""
        for i, (qid, _) in enumerate(self.queries):
            if qid == query_id:
                return i
        raise KeyError(f"no query {query_id!r} in fixture")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise FixtureError(message)


def _get(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise FixtureError(f"{context}: missing field {key!r}")
    return mapping[key]


def _query_model(variant: str, num_classes: int, teachers: int,
                 default_gamma: float | None, entry: dict) -> tuple[str, VoteModel]:
    qid = str(_get(entry, "id", "query"))
    context = f"query {qid!r}"
    try:
        if variant == "pate":
            model = VoteModel.pate(
                _get(entry, "p", context), _get(entry, "p_prime", context), teachers)
        elif variant == "capc":
            model = VoteModel.capc(
                _get(entry, "teacher_probs", context),
                _get(entry, "poisoned_first", context))
            _require(model.teachers == teachers,
                     f"{context}: {model.teachers} teacher rows, fixture says {teachers}")
        elif variant == "prompt_pate":
            model = VoteModel.prompt_pate(
                Histogram(_get(entry, "hist_s", context)),
                Histogram(_get(entry, "hist_s_prime", context)),
                teachers)
        else:
            gamma = entry.get("gamma", default_gamma)
            _require(gamma is not None, f"{context}: missing gamma")
            model = VoteModel.private_knn(
                _get(entry, "p", context), _get(entry, "p_last", context),
                teachers, float(gamma),
                int(_get(entry, "poison_rank", context)),
                int(_get(entry, "poison_label", context)))
    except FixtureError:
        raise
    except (ValueError, TypeError) as exc:
        raise FixtureError(f"{context}: {exc}") from exc
    _require(model.num_classes == num_classes,
             f"{context}: {model.num_classes} classes, fixture says {num_classes}")
    return qid, model


def fixture_from_dict(data: dict) -> ScenarioFixture:
    """Builds and validates a fixture from parsed JSON."""
    if not isinstance(data, dict):
        raise FixtureError("fixture root must be a JSON object")
    variant = _get(data, "variant", "fixture")
    _require(variant in VARIANTS, f"variant must be one of {VARIANTS}, got {variant!r}")
    num_classes = int(_get(data, "num_classes", "fixture"))
    teachers = int(_get(data, "teachers", "fixture"))
    sigma = float(_get(data, "sigma", "fixture"))
    _require(math.isfinite(sigma) and sigma >= 0, f"sigma must be >= 0, got {sigma}")
    default_gamma = data.get("gamma")
    entries = _get(data, "queries", "fixture")
    _require(isinstance(entries, list) and len(entries) > 0,
             "fixture needs a non-empty queries list")
    queries = tuple(
        _query_model(variant, num_classes, teachers, default_gamma, entry)
        for entry in entries)
    adv_raw = _get(data, "adversary", "fixture")
    try:
        adversary = AdversaryConfig(
            crafter=_get(adv_raw, "crafter", "adversary"),
            distinguisher=_get(adv_raw, "distinguisher", "adversary"),
            query_ids=tuple(str(q) for q in _get(adv_raw, "query_ids", "adversary")),
        )
    except ValueError as exc:
        raise FixtureError(f"adversary: {exc}") from exc
    return ScenarioFixture(variant=variant, num_classes=num_classes,
                           teachers=teachers, sigma=sigma, queries=queries,
                           adversary=adversary)


def load_fixture(path: str | Path) -> ScenarioFixture:
    """Parses and validates a fixture JSON file."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise FixtureError(f"cannot read fixture {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FixtureError(f"fixture {path} is not valid JSON: {exc}") from exc
    return fixture_from_dict(data)


def fixture_to_dict(fixture: ScenarioFixture) -> dict:
    """Inverse of fixture_from_dict (for writing estimated fixtures)."""
    queries = []
    for qid, model in fixture.queries:
        entry: dict = {"id": qid}
        if fixture.variant == "pate":
            entry["p"] = list(model.p)
            entry["p_prime"] = list(model.p_prime)
        elif fixture.variant == "capc":
            entry["teacher_probs"] = [list(row) for row in model.teacher_probs]
            entry["poisoned_first"] = list(model.poisoned_first)
        elif fixture.variant == "prompt_pate":
            entry["hist_s"] = list(model.hist_s.counts)
            entry["hist_s_prime"] = list(model.hist_s_prime.counts)
        else:
            entry["p"] = list(model.p)
            entry["p_last"] = list(model.p_last)
            entry["gamma"] = model.gamma
            entry["poison_rank"] = model.poison_rank
            entry["poison_label"] = model.poison_label
        queries.append(entry)
    return {
        "variant": fixture.variant,
        "num_classes": fixture.num_classes,
        "teachers": fixture.teachers,
        "sigma": fixture.sigma,
        "queries": queries,
        "adversary": {
            "crafter": fixture.adversary.crafter,
            "distinguisher": fixture.adversary.distinguisher,
            "query_ids": list(fixture.adversary.query_ids),
        },
    }


def fixture_summary(fixture: ScenarioFixture) -> list[str]:
    """Human-readable per-query lines for the verify subcommand."""
    lines = [
        f"variant={fixture.variant} classes={fixture.num_classes} "
        f"teachers={fixture.teachers} sigma={fixture.sigma}",
        f"adversary: crafter={fixture.adversary.crafter} "
        f"distinguisher={fixture.adversary.distinguisher} "
        f"queries={len(fixture.adversary.query_ids)}",
    ]
    for qid, model in fixture.queries:
        if fixture.variant == "prompt_pate":
            detail = f"hist_s={list(model.hist_s.counts)} hist_s_prime={list(model.hist_s_prime.counts)}"
        elif fixture.variant == "private_knn":
            detail = (f"gamma={model.gamma} poison_rank={model.poison_rank} "
                      f"poison_label={model.poison_label}")
        else:
            detail = f"{model.num_classes}-class categorical model"
        lines.append(f"query {qid}: {detail}")
    return lines


# ---------------------------------------------------------------------------
# Prediction-dump ingestion

DUMP_COLUMNS = ("query_id", "run_id", "teacher_id", "predicted_class")


def load_prediction_dump(path: str | Path) -> dict[str, dict[str, list[int]]]:
    """Reads a CSV of (query_id, run_id, teacher_id, predicted_class) rows.

    Returns {query_id: {teacher_id: [predicted classes across runs]}}.
    """
    out: dict[str, dict[str, list[int]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in DUMP_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise FixtureError(f"prediction dump {path} lacks columns {missing}")
        for row in reader:
            query = out.setdefault(row["query_id"], {})
            query.setdefault(row["teacher_id"], []).append(int(row["predicted_class"]))
    if not out:
        raise FixtureError(f"prediction dump {path} has no rows")
    return out


def _num_classes_of(*dumps: dict[str, dict[str, list[int]]]) -> int:
    top = 0
    for dump in dumps:
        for teachers in dump.values():
            for classes in teachers.values():
                top = max(top, max(classes))
    return top + 1


def estimate_fixture_from_dumps(
    dump_s_path: str | Path,
    dump_s_prime_path: str | Path,
    variant: str,
    sigma: float,
    teachers: int | None = None,
    num_classes: int | None = None,
) -> ScenarioFixture:
    """Distills prediction dumps into a pate or capc fixture via MLE.

    pate: pools every teacher's predictions per query into one vote
    distribution per side. capc: estimates one categorical per teacher from
    the S dump and the poisoned teacher's categorical (the dump's first
    teacher id, sorted) from the S' dump.

    The resulting adversary defaults to a poisoning crafter asking each query
    once (natural distinguisher).
    """
    if variant not in ("pate", "capc"):
        raise FixtureError(
            f"estimation supports pate and capc dumps, got {variant!r}")
    dump_s = load_prediction_dump(dump_s_path)
    dump_sp = load_prediction_dump(dump_s_prime_path)
    if num_classes is None:
        num_classes = max(_num_classes_of(dump_s), _num_classes_of(dump_sp), 2)
    query_ids = sorted(dump_s.keys())
    if sorted(dump_sp.keys()) != query_ids:
        raise FixtureError("dumps cover different query sets")

    queries = []
    inferred_teachers = teachers
    for qid in query_ids:
        by_teacher_s = dump_s[qid]
        by_teacher_sp = dump_sp[qid]
        if variant == "pate":
            pooled_s = [c for preds in by_teacher_s.values() for c in preds]
            pooled_sp = [c for preds in by_teacher_sp.values() for c in preds]
            if inferred_teachers is None:
                inferred_teachers = len(by_teacher_s)
            model = VoteModel.pate(
                estimate_vote_distribution(pooled_s, num_classes).tolist(),
                estimate_vote_distribution(pooled_sp, num_classes).tolist(),
                inferred_teachers)
        else:
            teacher_ids = sorted(by_teacher_s.keys())
            if inferred_teachers is None:
                inferred_teachers = len(teacher_ids)
            elif inferred_teachers != len(teacher_ids):
                raise FixtureError(
                    f"query {qid!r}: {len(teacher_ids)} teachers in dump, "
                    f"expected {inferred_teachers}")
            rows = [estimate_vote_distribution(by_teacher_s[t], num_classes).tolist()
                    for t in teacher_ids]
            pooled_sp = [c for preds in by_teacher_sp.values() for c in preds]
            model = VoteModel.capc(
                rows, estimate_vote_distribution(pooled_sp, num_classes).tolist())
        queries.append((qid, model))

    return ScenarioFixture(
        variant=variant,
        num_classes=num_classes,
        teachers=inferred_teachers,
        sigma=sigma,
        queries=tuple(queries),
        adversary=AdversaryConfig(
            crafter="poisoning", distinguisher="natural",
            query_ids=tuple(query_ids)),
    )
