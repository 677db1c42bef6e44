from __future__ import annotations

import json
import random
import string

import numpy as np
import pytest

from neuron.embedding import EmbedderConfig, embed
from neuron.errors import (
    CorruptSnapshot,
    DimensionMismatch,
    DuplicateProblem,
    EmptyText,
    FingerprintMismatch,
    IllegalTransition,
    NotFound,
    StoreMissing,
    VersionMismatch,
)
from neuron.store import MemoryStore, canonical_json, normalize_problem

from oracles import LEGAL_INITIAL, LEGAL_SET_STATUS, TransitionTableSim, brute_force_topk


def random_problem(rnd: random.Random) -> str:
    words = ["".join(rnd.choices(string.ascii_lowercase, k=rnd.randint(2, 7))) for _ in range(rnd.randint(3, 9))]
    return " ".join(words)


def fill_random(store: MemoryStore, rnd: random.Random, n: int, status: str = "correct") -> list[str]:
    ids = []
    while len(ids) < n:
        problem = random_problem(rnd)
        try:
            ids.append(store.insert(problem, "resp", "reason", "1", status=status))
        except DuplicateProblem:
            continue
    return ids


def oracle_rows(store: MemoryStore, statuses=("correct", "corrected")) -> list[tuple[str, str, list[float]]]:
    rows = []
    for record in store.list_records(newest_first=False):
        if record.status in statuses:
            rows.append((record.id, record.created_at, [float(x) for x in record.embedding]))
    return rows


# ---------------------------------------------------------------- insert


def test_insert_correct_is_retrievable(store: MemoryStore, config: EmbedderConfig) -> None:
    rid = store.insert("two plus two", "resp", "reason", "4", status="correct")
    assert len(store) == 1
    results = store.search(embed("two plus two", config), 1)
    assert [r.record_id for r in results] == [rid]


def test_insert_unverified_not_retrievable(store: MemoryStore, config: EmbedderConfig) -> None:
    store.insert("two plus two", "resp", "reason", "4", status="unverified")
    assert store.search(embed("two plus two", config), 5) == []


def test_duplicate_problem_rejected(store: MemoryStore) -> None:
    store.insert("same problem text", "r", "r", "1", status="correct")
    with pytest.raises(DuplicateProblem):
        store.insert("same problem text", "r2", "r2", "2", status="correct")
    with pytest.raises(DuplicateProblem):
        store.insert("  same   problem text ", "r3", "r3", "3", status="correct")


def test_rejected_problem_text_can_be_reinserted(store: MemoryStore) -> None:
    rid = store.insert("p one", "r", "r", "1", status="pending-review")
    store.set_status(rid, "rejected")
    assert store.insert("p one", "r", "r", "1", status="correct")


def test_insert_requires_legal_initial_status(store: MemoryStore) -> None:
    for status in ("corrected", "rejected"):
        with pytest.raises(IllegalTransition):
            store.insert("q", "r", "r", "1", status=status)


def test_insert_empty_problem(store: MemoryStore) -> None:
    with pytest.raises(EmptyText):
        store.insert("   ", "r", "r", "1", status="correct")


# ---------------------------------------------------------------- status machine


def test_legal_set_status_transitions(config: EmbedderConfig) -> None:
    for old, new in LEGAL_SET_STATUS:
        store = MemoryStore(config)
        rid = store.insert("a problem", "r", "r", "1", status="unverified")
        if old == "pending-review":
            store.set_status(rid, "pending-review")
        store.set_status(rid, new)
        assert store.get(rid).status == new


@pytest.mark.parametrize(
    "initial,target",
    [
        ("correct", "unverified"),
        ("correct", "rejected"),
        ("unverified", "rejected"),
        ("unverified", "corrected"),
        ("pending-review", "correct"),
        ("pending-review", "unverified"),
    ],
)
def test_illegal_set_status_transitions(config: EmbedderConfig, initial: str, target: str) -> None:
    store = MemoryStore(config)
    rid = store.insert("a problem", "r", "r", "1", status=initial)
    with pytest.raises(IllegalTransition):
        store.set_status(rid, target)


def test_corrected_cannot_be_reset(store: MemoryStore) -> None:
    rid = store.insert("a problem", "r", "r", "1", status="unverified")
    store.apply_correction(rid, "fixed", "fixed reasoning", "2", provenance="refiner-model")
    with pytest.raises(IllegalTransition):
        store.set_status(rid, "correct")
    with pytest.raises(IllegalTransition):
        store.apply_correction(rid, "again", "again", "3", provenance="human")


def test_set_status_unknown_record(store: MemoryStore) -> None:
    with pytest.raises(NotFound):
        store.set_status("r999999", "correct")


# ---------------------------------------------------------------- corrections


def test_correction_keeps_history_and_embedding(store: MemoryStore) -> None:
    rid = store.insert("five times three", "wrong resp", "wrong reasoning", "16", status="pending-review")
    before = store.get(rid)
    count = store.apply_correction(rid, "right resp", "right reasoning", "15", provenance="human")
    after = store.get(rid)
    assert count == 1
    assert after.status == "corrected"
    assert after.reasoning == "right reasoning"
    assert after.revisions[0].response == "wrong resp"
    assert after.revisions[0].answer == "16"
    assert np.array_equal(before.embedding, after.embedding)
    assert after.problem == before.problem


def test_corrected_record_searchable_with_new_reasoning(store: MemoryStore, config: EmbedderConfig) -> None:
    rid = store.insert("triangles have three sides", "old", "bad reasoning", "0", status="unverified")
    store.apply_correction(rid, "new", "count the sides: three", "3", provenance="refiner-model")
    results = store.search(embed("triangles have three sides", config), 1)
    assert results[0].record_id == rid
    assert store.get(results[0].record_id).reasoning == "count the sides: three"


def test_correction_on_missing_record(store: MemoryStore) -> None:
    with pytest.raises(NotFound):
        store.apply_correction("r000042", "x", "x", "1", provenance="human")


# ---------------------------------------------------------------- search


def test_search_empty_store(store: MemoryStore, config: EmbedderConfig) -> None:
    assert store.search(embed("anything", config), 3) == []


def test_search_three_record_example(store: MemoryStore, config: EmbedderConfig) -> None:
    r1 = store.insert("a b c", "r", "r", "1", status="correct")
    r2 = store.insert("a b d", "r", "r", "1", status="correct")
    r3 = store.insert("x y z", "r", "r", "1", status="correct")
    results = store.search(embed("a b c", config), 2)
    assert [r.record_id for r in results] == [r1, r2]
    assert results[0].score == pytest.approx(1.0, abs=1e-6)
    assert results[1].score == pytest.approx(0.6, abs=1e-6)
    assert [r.rank for r in results] == [1, 2]
    full = store.search(embed("a b c", config), 10)
    assert [r.record_id for r in full] == [r1, r2, r3]


def test_search_matches_brute_force_oracle(config: EmbedderConfig) -> None:
    rnd = random.Random(11)
    store = MemoryStore(config)
    fill_random(store, rnd, 120)
    # A couple of punctuation variants create exact score ties.
    first = store.list_records(newest_first=False)[0]
    store.insert(first.problem + ".", "r", "r", "1", status="correct")
    store.insert(first.problem + "!!", "r", "r", "1", status="correct")
    rows = oracle_rows(store)
    for _ in range(50):
        query_text = random_problem(rnd) if rnd.random() < 0.5 else rnd.choice(rows)[0]
        query = embed(random_problem(rnd), config) if rnd.random() < 0.7 else store.get(rnd.choice(rows)[0]).embedding
        expected = brute_force_topk([float(x) for x in query], rows, 3)
        got = store.search(query, 3)
        assert [r.record_id for r in got] == [rid for rid, _ in expected]
        for result, (_, score) in zip(got, expected):
            assert result.score == pytest.approx(score, abs=1e-9)


def test_exact_ties_break_by_insertion(store: MemoryStore, config: EmbedderConfig) -> None:
    a = store.insert("same tokens here", "r", "r", "1", status="correct")
    b = store.insert("same tokens here.", "r", "r", "1", status="correct")
    c = store.insert("same, tokens; here!", "r", "r", "1", status="correct")
    results = store.search(embed("same tokens here", config), 3)
    assert [r.record_id for r in results] == [a, b, c]
    assert results[0].score == results[1].score == results[2].score


def test_search_respects_status_filter(store: MemoryStore, config: EmbedderConfig) -> None:
    store.insert("alpha beta", "r", "r", "1", status="unverified")
    pending = store.insert("alpha beta gamma", "r", "r", "1", status="pending-review")
    store.set_status(pending, "rejected")
    assert store.search(embed("alpha beta", config), 10) == []
    explicit = store.search(embed("alpha beta", config), 10, filter={"rejected"})
    assert [r.record_id for r in explicit] == [pending]


def test_search_min_score(store: MemoryStore, config: EmbedderConfig) -> None:
    store.insert("a b c", "r", "r", "1", status="correct")
    store.insert("x y z", "r", "r", "1", status="correct")
    results = store.search(embed("a b c", config), 10, min_score=0.5)
    assert len(results) == 1


def test_search_dimension_mismatch(store: MemoryStore) -> None:
    with pytest.raises(DimensionMismatch):
        store.search(np.ones(13), 3)


def test_search_counts_reads(store: MemoryStore, config: EmbedderConfig) -> None:
    assert store.reads == 0
    store.search(embed("abc def", config), 1)
    store.search(embed("abc def", config), 1)
    assert store.reads == 2


# ---------------------------------------------------------------- lifecycle property


def test_lifecycle_matches_transition_table_simulation(config: EmbedderConfig) -> None:
    rnd = random.Random(13)
    for round_no in range(300):
        store = MemoryStore(config)
        sim = TransitionTableSim()
        problems: dict[str, str] = {}  # problem key -> record id
        for _ in range(rnd.randint(1, 15)):
            op = rnd.random()
            if op < 0.5 or not problems:
                problem = f"problem {round_no} {rnd.randrange(10_000)} {random_problem(rnd)}"
                status = rnd.choice(sorted(LEGAL_INITIAL))
                if sim.insert(problem, status):
                    problems[problem] = store.insert(problem, "r", "r", "1", status=status)
            elif op < 0.8:
                problem = rnd.choice(sorted(problems))
                target = rnd.choice(["correct", "pending-review", "rejected", "corrected", "unverified"])
                ok = sim.set_status(problem, target)
                if ok:
                    store.set_status(problems[problem], target)
                else:
                    with pytest.raises(IllegalTransition):
                        store.set_status(problems[problem], target)
            else:
                problem = rnd.choice(sorted(problems))
                ok = sim.apply_correction(problem)
                if ok:
                    store.apply_correction(problems[problem], "fix", "fix", "1", provenance="human")
                else:
                    with pytest.raises(IllegalTransition):
                        store.apply_correction(problems[problem], "fix", "fix", "1", provenance="human")
        counts = {k: v for k, v in store.counts().items() if v}
        assert counts == sim.multiset()
        retrievable = {store.get(rid).problem for rid in (r.record_id for r in store.search(np.full(config.dim, 1.0 / config.dim**0.5), 100))}
        assert retrievable == sim.retrievable_keys()


def test_revisions_never_shrink(store: MemoryStore) -> None:
    rid = store.insert("revision growth check", "r0", "r0", "0", status="unverified")
    assert store.get(rid).revisions == []
    store.apply_correction(rid, "r1", "r1", "1", provenance="refiner-model")
    assert len(store.get(rid).revisions) == 1


# ---------------------------------------------------------------- persistence


def test_snapshot_roundtrip_empty(tmp_path, config: EmbedderConfig) -> None:
    store = MemoryStore(config)
    store.snapshot(tmp_path / "snap")
    loaded = MemoryStore.load(tmp_path / "snap", config)
    assert len(loaded) == 0


def test_snapshot_roundtrip_search_equality(tmp_path, config: EmbedderConfig) -> None:
    rnd = random.Random(17)
    for case in range(20):
        store = MemoryStore(config)
        fill_random(store, rnd, rnd.randint(1, 40), status=rnd.choice(["correct", "unverified"]))
        fill_random(store, rnd, 5)
        path = tmp_path / f"snap{case}"
        store.snapshot(path)
        loaded = MemoryStore.load(path, config)
        for _ in range(10):
            query = embed(random_problem(rnd), config)
            assert store.search(query, 3) == loaded.search(query, 3)


def test_snapshot_fingerprint_mismatch(tmp_path, config: EmbedderConfig) -> None:
    store = MemoryStore(config)
    store.snapshot(tmp_path / "snap")
    with pytest.raises(FingerprintMismatch):
        MemoryStore.load(tmp_path / "snap", EmbedderConfig(dim=128))


def test_snapshot_version_and_checksum(tmp_path, config: EmbedderConfig) -> None:
    store = MemoryStore(config)
    store.insert("a b c", "r", "r", "1", status="correct")
    path = tmp_path / "snap"
    store.snapshot(path)

    lines = path.read_text().splitlines()
    header = json.loads(lines[0])
    header["version"] = 99
    path.write_text("\n".join([json.dumps(header)] + lines[1:]) + "\n")
    with pytest.raises(VersionMismatch):
        MemoryStore.load(path, config)

    tampered = lines[1].replace("a b c", "a b z")
    path.write_text("\n".join([lines[0], tampered]) + "\n")
    with pytest.raises(CorruptSnapshot):
        MemoryStore.load(path, config)


def test_event_log_persists_across_reopen(tmp_path, config: EmbedderConfig) -> None:
    store_dir = tmp_path / "store"
    store = MemoryStore(config, store_dir)
    rid = store.insert("persisted problem", "r", "r", "1", status="pending-review")
    store.apply_correction(rid, "fixed", "fixed", "2", provenance="human")
    store.close()

    reopened = MemoryStore(config, store_dir, create=False)
    record = reopened.get(rid)
    assert record.status == "corrected"
    assert len(record.revisions) == 1
    assert record.problem == "persisted problem"
    reopened.close()


def test_truncated_log_replays_clean_prefix(tmp_path, config: EmbedderConfig) -> None:
    store_dir = tmp_path / "store"
    store = MemoryStore(config, store_dir)
    for i in range(5):
        store.insert(f"problem number {i}", "r", "r", "1", status="correct")
    store.close()

    log_path = store_dir / "events.log"
    full = log_path.read_text()
    lines = full.splitlines(keepends=True)
    for cut in range(len(lines)):
        # A prefix of whole lines plus half of the next one: the torn line
        # must be invisible, everything before it intact.
        torn = "".join(lines[:cut]) + lines[cut][: len(lines[cut]) // 2]
        log_path.write_text(torn)
        reopened = MemoryStore(config, store_dir, create=False)
        assert len(reopened) == cut
        reopened.close()
        log_path.write_text(full)


def test_compaction_preserves_state(tmp_path, config: EmbedderConfig) -> None:
    store_dir = tmp_path / "store"
    store = MemoryStore(config, store_dir)
    fill_random(store, random.Random(19), 10)
    store.compact()
    assert (store_dir / "snapshot.jsonl").exists()
    assert (store_dir / "events.log").read_text() == ""
    rid = store.insert("post compaction insert", "r", "r", "1", status="correct")
    store.close()

    reopened = MemoryStore(config, store_dir, create=False)
    assert len(reopened) == 11
    assert reopened.get(rid).problem == "post compaction insert"
    reopened.close()


def test_open_missing_store(tmp_path, config: EmbedderConfig) -> None:
    with pytest.raises(StoreMissing):
        MemoryStore(config, tmp_path / "nope", create=False)


def test_open_with_wrong_config(tmp_path, config: EmbedderConfig) -> None:
    store_dir = tmp_path / "store"
    MemoryStore(config, store_dir).close()
    with pytest.raises(FingerprintMismatch):
        MemoryStore(EmbedderConfig(dim=64), store_dir, create=False)


# ---------------------------------------------------------------- canonical form


def test_canonical_json_floats_nine_significant_digits() -> None:
    assert canonical_json({"x": 0.3333333333333333}) == '{"x":0.333333333}'
    assert canonical_json([1.0, -0.125]) == "[1,-0.125]"
    assert canonical_json({"a": None, "b": True, "t": "s"}) == '{"a":null,"b":true,"t":"s"}'


def test_canonical_json_roundtrips_quantized_embeddings(store: MemoryStore) -> None:
    rid = store.insert("roundtrip of floats", "r", "r", "1", status="correct")
    record = store.get(rid)
    parsed = json.loads(canonical_json(record.to_dict()))
    assert parsed["embedding"] == [float(x) for x in record.embedding]


def test_normalize_problem() -> None:
    assert normalize_problem("  a   b\nc ") == "a b c"
