import json
from pathlib import Path

import pytest

import lapis

ROOT = Path(__file__).resolve().parents[2]
FIXTURES = ROOT / "data" / "fixtures"
EXEMPLARS = ROOT / "data" / "exemplars" / "en.jsonl"


@pytest.fixture(scope="module")
def index_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("index")
    stats = lapis.ingest(FIXTURES / "scenario_corpus.jsonl", out)
    assert stats["total"]["paragraphs"] == 13
    assert stats["court_ruling"]["paragraphs"] == 7
    built = lapis.build_index(out, dim=128)
    assert built["size"] == 13
    assert built["provider_id"] == "hash-v1:dim=128"
    again = lapis.build_index(out, dim=128)
    assert again["provider_calls"] == 0
    return out


def test_retrieve_ranks_the_stabbing_ruling(index_dir):
    r = lapis.Retriever(index_dir)
    before = r.search_count
    premises = r.retrieve(
        "The victim was stabbed with a knife after a quarrel. The wound was 17cm deep near the heart.",
        "Murder intent can be recognized.",
    )
    assert r.search_count == before + 1
    assert len(premises) == 5
    assert [p["rank"] for p in premises] == [1, 2, 3, 4, 5]
    assert "89do2087" in [p["ref_no"] for p in premises]
    scores = [p["score"] for p in premises]
    assert scores == sorted(scores, reverse=True)


def test_prompt_and_parser(index_dir):
    premises = lapis.Retriever(index_dir).retrieve("A quarrel.", "Intent exists.", k=2)
    cilr = lapis.build_prompt("CILR-ZS+CIKR", "A quarrel.", "Intent exists.", premises=premises)
    assert "Premises:" in cilr
    assert "judge whether the legal hypothesis is True or False" in cilr
    vp = lapis.build_prompt("VP-ZS", "A quarrel.", "Intent exists.")
    assert "Premises:" not in vp
    shot = lapis.build_prompt("IRAC-1S", "A quarrel.", "Intent exists.", exemplars=EXEMPLARS)
    assert "[Example 1]" in shot
    with pytest.raises(lapis.InvalidInput):
        lapis.build_prompt("VP-ZS", "c", "h", premises=premises)
    with pytest.raises(lapis.InvalidInput):
        lapis.build_prompt("CoT-ZS", "c", "h")

    raw = lapis.render_answer(True, "See (Ref No: 89do2087).")
    parsed = lapis.parse_response(raw)
    assert parsed["assessment"] == "True"
    assert parsed["rationale"]["cited_ref_nos"] == ["89do2087"]
    bad = lapis.parse_response("maybe")
    assert bad["assessment"] is None
    assert bad["raw"] == "maybe"


def test_metrics():
    labels = [True] * 6 + [False] * 4
    assert lapis.metrics(labels, [True] * 10) == (0.6, 0.75)
    acc, f1 = lapis.metrics([True, False], [None, None])
    assert acc == 0.0 and f1 == 0.0
    with pytest.raises(lapis.InvalidInput):
        lapis.metrics([True], [])


def test_scenario_sessions(index_dir, tmp_path):
    scenario = json.loads((FIXTURES / "scenario.json").read_text())
    retriever = lapis.Retriever(index_dir)
    store = tmp_path / "sessions.jsonl"
    sessions = lapis.Sessions(store, retriever, FIXTURES / "scenario_mock.json")
    s = sessions.create("Stabbing after a quarrel")
    got = []
    for step in scenario["steps"]:
        t = sessions.add_context(s["session_id"], step["context"])
        rec = sessions.submit(s["session_id"], t["step_id"], step["hypothesis"])
        got.append(rec["response"]["assessment"])
    assert got == [step["expected"] for step in scenario["steps"]]
    closed = sessions.close(s["session_id"])
    assert closed["status"] == "closed"
    with pytest.raises(lapis.StateError):
        sessions.add_context(s["session_id"], "more")
    with pytest.raises(lapis.NotFound):
        sessions.get("S999999")

    replayed = lapis.Sessions(store, retriever, FIXTURES / "scenario_mock.json")
    assert replayed.list() == sessions.list()


def test_cli_in_process(index_dir):
    code, out, err = lapis.cli("config", "--k", "3")
    assert code == 0, err
    assert json.loads(out)["k"] == 3
    code, _, err = lapis.cli("retrieve")
    assert code == 2
    assert err.startswith("error: usage:")
