"""Fixture parsing, summaries, and prediction-dump estimation."""

import csv
import json

import pytest

from predaudit.fixtures import (
    DUMP_COLUMNS,
    FixtureError,
    ScenarioFixture,
    estimate_fixture_from_dumps,
    fixture_from_dict,
    fixture_summary,
    fixture_to_dict,
    load_fixture,
    load_prediction_dump,
)
from predaudit.scenarios import AdversaryConfig


def pate_dict(**overrides):
    data = {
        "variant": "pate",
        "num_classes": 3,
        "teachers": 25,
        "sigma": 2.0,
        "queries": [
            {"id": "q0", "p": [0.6, 0.3, 0.1], "p_prime": [0.1, 0.3, 0.6]},
            {"id": "q1", "p": [0.5, 0.25, 0.25], "p_prime": [0.25, 0.5, 0.25]},
        ],
        "adversary": {"crafter": "poisoning", "distinguisher": "natural",
                      "query_ids": ["q0", "q1"]},
    }
    data.update(overrides)
    return data


def capc_dict():
    return {
        "variant": "capc",
        "num_classes": 2,
        "teachers": 3,
        "sigma": 1.0,
        "queries": [{
            "id": "q0",
            "teacher_probs": [[0.7, 0.3], [0.6, 0.4], [0.5, 0.5]],
            "poisoned_first": [0.1, 0.9],
        }],
        "adversary": {"crafter": "poisoning", "distinguisher": "natural",
                      "query_ids": ["q0"]},
    }


def prompt_dict():
    return {
        "variant": "prompt_pate",
        "num_classes": 3,
        "teachers": 36,
        "sigma": 2.0,
        "queries": [{"id": "q0", "hist_s": [14, 12, 10],
                     "hist_s_prime": [13, 13, 10]}],
        "adversary": {"crafter": "poisoning", "distinguisher": "adversarial",
                      "query_ids": ["q0"]},
    }


def knn_dict(**overrides):
    data = {
        "variant": "private_knn",
        "num_classes": 3,
        "teachers": 30,
        "sigma": 2.0,
        "gamma": 0.3,
        "queries": [{"id": "q0", "p": [0.5, 0.3, 0.2],
                     "p_last": [0.0, 0.0, 1.0],
                     "poison_rank": 5, "poison_label": 0}],
        "adversary": {"crafter": "poisoning", "distinguisher": "natural",
                      "query_ids": ["q0"]},
    }
    data.update(overrides)
    return data


@pytest.mark.parametrize("builder", [pate_dict, capc_dict, prompt_dict, knn_dict])
def test_round_trip_through_dict(builder):
    fixture = fixture_from_dict(builder())
    assert fixture_from_dict(fixture_to_dict(fixture)) == fixture


def test_query_lookup_helpers():
    fixture = fixture_from_dict(pate_dict())
    assert fixture.query_ids == ("q0", "q1")
    assert fixture.model_for("q1").p == pytest.approx((0.5, 0.25, 0.25))
    assert fixture.index_of("q1") == 1
    with pytest.raises(KeyError):
        fixture.model_for("nope")
    with pytest.raises(KeyError):
        fixture.index_of("nope")


def test_knn_query_gamma_overrides_fixture_default():
    data = knn_dict()
    data["queries"][0]["gamma"] = 0.7
    assert fixture_from_dict(data).model_for("q0").gamma == 0.7
    data = knn_dict()
    del data["gamma"]
    with pytest.raises(FixtureError, match="q0"):
        fixture_from_dict(data)


def test_parse_errors_name_the_query():
    data = pate_dict()
    data["queries"][1]["p"] = [0.5, 0.4, 0.2]  # sums to 1.1
    with pytest.raises(FixtureError, match="q1"):
        fixture_from_dict(data)
    data = pate_dict()
    del data["queries"][0]["p_prime"]
    with pytest.raises(FixtureError, match="q0"):
        fixture_from_dict(data)


def test_class_and_teacher_counts_must_match_header():
    with pytest.raises(FixtureError, match="classes"):
        fixture_from_dict(pate_dict(num_classes=4))
    data = capc_dict()
    data["teachers"] = 5
    with pytest.raises(FixtureError, match="teacher"):
        fixture_from_dict(data)


def test_structural_validation():
    with pytest.raises(FixtureError, match="variant"):
        fixture_from_dict(pate_dict(variant="mystery"))
    with pytest.raises(FixtureError, match="sigma"):
        fixture_from_dict(pate_dict(sigma=-1.0))
    with pytest.raises(FixtureError, match="queries"):
        fixture_from_dict(pate_dict(queries=[]))
    with pytest.raises(FixtureError, match="sigma"):
        fixture_from_dict({k: v for k, v in pate_dict().items() if k != "sigma"})
    with pytest.raises(FixtureError):
        fixture_from_dict([1, 2, 3])


def test_duplicate_and_unknown_query_ids():
    data = pate_dict()
    data["queries"][1]["id"] = "q0"
    with pytest.raises(FixtureError, match="duplicate"):
        fixture_from_dict(data)
    data = pate_dict()
    data["adversary"]["query_ids"] = ["q0", "ghost"]
    with pytest.raises(FixtureError, match="ghost"):
        fixture_from_dict(data)


def test_adversary_validation_is_wrapped():
    data = pate_dict()
    data["adversary"]["distinguisher"] = "adversarial"  # two distinct ids
    with pytest.raises(FixtureError, match="adversary"):
        fixture_from_dict(data)
    data = pate_dict()
    data["adversary"]["crafter"] = "psychic"
    with pytest.raises(FixtureError, match="adversary"):
        fixture_from_dict(data)


def test_summary_lines():
    lines = fixture_summary(fixture_from_dict(pate_dict()))
    assert lines[0] == "variant=pate classes=3 teachers=25 sigma=2.0"
    assert lines[1] == "adversary: crafter=poisoning distinguisher=natural queries=2"
    assert lines[2] == "query q0: 3-class categorical model"
    assert len(lines) == 4

    prompt_lines = fixture_summary(fixture_from_dict(prompt_dict()))
    assert prompt_lines[2] == (
        "query q0: hist_s=[14, 12, 10] hist_s_prime=[13, 13, 10]")

    knn_lines = fixture_summary(fixture_from_dict(knn_dict()))
    assert knn_lines[2] == "query q0: gamma=0.3 poison_rank=5 poison_label=0"


def test_load_fixture_from_disk(tmp_path):
    path = tmp_path / "fixture.json"
    path.write_text(json.dumps(pate_dict()))
    assert load_fixture(path) == fixture_from_dict(pate_dict())
    path.write_text("{not json")
    with pytest.raises(FixtureError, match="JSON"):
        load_fixture(path)
    with pytest.raises(FixtureError, match="read"):
        load_fixture(tmp_path / "missing.json")


# ---------------------------------------------------------------------------
# Prediction dumps


def write_dump(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DUMP_COLUMNS)
        writer.writerows(rows)


def test_load_prediction_dump_groups_by_query_and_teacher(tmp_path):
    path = tmp_path / "dump.csv"
    write_dump(path, [
        ("q0", "r0", "t0", 0), ("q0", "r1", "t0", 1),
        ("q0", "r0", "t1", 1), ("q1", "r0", "t0", 2),
    ])
    dump = load_prediction_dump(path)
    assert dump == {"q0": {"t0": [0, 1], "t1": [1]}, "q1": {"t0": [2]}}


def test_load_prediction_dump_rejects_bad_files(tmp_path):
    path = tmp_path / "dump.csv"
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerow(["query_id", "teacher_id", "predicted_class"])
    with pytest.raises(FixtureError, match="run_id"):
        load_prediction_dump(path)
    write_dump(path, [])
    with pytest.raises(FixtureError, match="no rows"):
        load_prediction_dump(path)


def test_estimate_pate_fixture_pools_teachers(tmp_path):
    dump_s = tmp_path / "s.csv"
    dump_sp = tmp_path / "sp.csv"
    write_dump(dump_s, [
        ("q0", "r0", "t0", 0), ("q0", "r1", "t0", 0),
        ("q0", "r0", "t1", 1), ("q0", "r1", "t1", 0),
    ])
    write_dump(dump_sp, [
        ("q0", "r0", "t0", 1), ("q0", "r1", "t0", 1),
        ("q0", "r0", "t1", 1), ("q0", "r1", "t1", 0),
    ])
    fixture = estimate_fixture_from_dumps(dump_s, dump_sp, "pate", sigma=2.0)
    assert fixture.variant == "pate"
    assert fixture.teachers == 2
    assert fixture.num_classes == 2
    model = fixture.model_for("q0")
    assert model.p == pytest.approx((0.75, 0.25))
    assert model.p_prime == pytest.approx((0.25, 0.75))
    assert fixture.adversary == AdversaryConfig(
        crafter="poisoning", distinguisher="natural", query_ids=("q0",))


def test_estimate_capc_fixture_keeps_teacher_rows(tmp_path):
    dump_s = tmp_path / "s.csv"
    dump_sp = tmp_path / "sp.csv"
    write_dump(dump_s, [
        ("q0", "r0", "t0", 0), ("q0", "r1", "t0", 0),
        ("q0", "r0", "t1", 1), ("q0", "r1", "t1", 2),
    ])
    write_dump(dump_sp, [
        ("q0", "r0", "t0", 2), ("q0", "r1", "t0", 2),
        ("q0", "r0", "t1", 2), ("q0", "r1", "t1", 0),
    ])
    fixture = estimate_fixture_from_dumps(dump_s, dump_sp, "capc", sigma=1.0)
    model = fixture.model_for("q0")
    assert model.teacher_probs[0] == pytest.approx((1.0, 0.0, 0.0))
    assert model.teacher_probs[1] == pytest.approx((0.0, 0.5, 0.5))
    assert model.poisoned_first == pytest.approx((0.25, 0.0, 0.75))
    assert fixture.num_classes == 3


def test_estimate_rejects_mismatched_inputs(tmp_path):
    dump_s = tmp_path / "s.csv"
    dump_sp = tmp_path / "sp.csv"
    write_dump(dump_s, [("q0", "r0", "t0", 0)])
    write_dump(dump_sp, [("q1", "r0", "t0", 0)])
    with pytest.raises(FixtureError, match="query sets"):
        estimate_fixture_from_dumps(dump_s, dump_sp, "pate", sigma=1.0)
    write_dump(dump_sp, [("q0", "r0", "t0", 0)])
    with pytest.raises(FixtureError, match="pate and capc"):
        estimate_fixture_from_dumps(dump_s, dump_sp, "prompt_pate", sigma=1.0)
    with pytest.raises(FixtureError, match="teachers"):
        estimate_fixture_from_dumps(dump_s, dump_sp, "capc", sigma=1.0, teachers=4)
