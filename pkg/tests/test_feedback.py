from __future__ import annotations

import random

import pytest

from neuron.clients import ScriptedClient
from neuron.embedding import EmbedderConfig, embed
from neuron.errors import ConfigError, GoldMismatch, IllegalTransition, SolverUnavailable, Ungradable
from neuron.feedback import (
    LoopConfig,
    canonicalize_answer,
    extract_answer,
    grade,
    process_interaction,
    refinement_request,
    split_reasoning,
    submit_human_correction,
)
from neuron.store import MemoryStore

from oracles import TransitionTableSim


# ---------------------------------------------------------------- canonicalization


@pytest.mark.parametrize(
    "raw,expected",
    [
        ("72", "72"),
        (" 72 ", "72"),
        ("72.0", "72"),
        ("1,234.50", "1234.5"),
        ("$1,234.50", "1234.5"),
        ("15%", "15"),
        ("-3.50", "-3.5"),
        ("0.500", "0.5"),
        ("-0", "0"),
        ("0.0", "0"),
        ("1e3", "1000"),
        ("7200", "7200"),
        (".5", "0.5"),
    ],
)
def test_canonicalize_answer(raw: str, expected: str) -> None:
    assert canonicalize_answer(raw) == expected


def test_canonicalize_rejects_non_numbers() -> None:
    for bad in ("", "  ", "apples", "3 apples", "1.2.3", "NaN", "inf"):
        with pytest.raises(Ungradable):
            canonicalize_answer(bad)


def test_canonicalization_idempotent_fuzz() -> None:
    rnd = random.Random(23)
    for _ in range(1000):
        parts = []
        if rnd.random() < 0.3:
            parts.append("-")
        if rnd.random() < 0.3:
            parts.append("$")
        digits = str(rnd.randint(0, 10**rnd.randint(1, 9)))
        if rnd.random() < 0.4 and len(digits) > 3:
            digits = digits[:-3] + "," + digits[-3:]
        parts.append(digits)
        if rnd.random() < 0.5:
            parts.append("." + "".join(rnd.choices("0123456789", k=rnd.randint(1, 5))))
        if rnd.random() < 0.2:
            parts.append("%")
        raw = "".join(parts)
        try:
            once = canonicalize_answer(raw)
        except Ungradable:
            continue
        assert canonicalize_answer(once) == once


# ---------------------------------------------------------------- extraction


@pytest.mark.parametrize(
    "response,expected",
    [
        ("so she has 72 left.\n#### 72", "72"),
        ("#### 1,234.50", "1234.5"),
        ("step one\n#### 5\nstep two\n#### 7", "7"),
        ("####   -3  ", "-3"),
    ],
)
def test_extract_marker(response: str, expected: str) -> None:
    assert extract_answer(response, "marker") == expected


@pytest.mark.parametrize(
    "response,expected",
    [
        ("the answer is 8 apples", "8"),
        ("first 3 then 12, so 15 total", "15"),
        ("price is $1,234.50 today", "1234.5"),
        ("from 7 subtract 9 giving -2", "-2"),
    ],
)
def test_extract_last_number(response: str, expected: str) -> None:
    assert extract_answer(response, "last-number") == expected


def test_extract_failures() -> None:
    with pytest.raises(Ungradable):
        extract_answer("no marker here", "marker")
    with pytest.raises(Ungradable):
        extract_answer("no numbers here", "last-number")
    with pytest.raises(Ungradable):
        extract_answer("#### not a number", "marker")


def test_split_reasoning() -> None:
    assert split_reasoning("think hard\n#### 4") == "think hard"
    assert split_reasoning("no marker at all") == "no marker at all"


# ---------------------------------------------------------------- grading


def test_grade_table() -> None:
    assert grade("steps...\n#### 72", "72").outcome == "correct"
    assert grade("steps...\n#### 71", "72").outcome == "incorrect"
    assert grade("#### 72.0", "72").outcome == "correct"
    assert grade("word salad", "72").outcome == "ungradable"
    assert grade("the count is 9", "9", "last-number").outcome == "correct"


def test_grade_is_pure() -> None:
    for _ in range(5):
        v = grade("#### 8", "8")
        assert (v.outcome, v.extracted, v.gold) == ("correct", "8", "8")


# ---------------------------------------------------------------- refinement prompt


def test_refinement_request_contents() -> None:
    req = refinement_request("What is 2+2?", "I think #### 5", "4")
    assert req.system == (
        "You are an expert tutor. Produce correct step-by-step reasoning. End with '#### <answer>'."
    )
    assert "Problem: What is 2+2?" in req.user
    assert "I think #### 5" in req.user
    assert req.user.endswith("The correct final answer is 4.")
    assert req.role == "refiner"


# ---------------------------------------------------------------- process_interaction


def test_solver_correct_path(store: MemoryStore) -> None:
    solver = ScriptedClient(["steps\n#### 72"])
    rid, status = process_interaction("q one", "72", solver, None, store, LoopConfig(mode="human"))
    assert status == "correct"
    record = store.get(rid)
    assert record.status == "correct"
    assert record.provenance == "model"
    assert record.revisions == []
    assert solver.requests[0].user == "q one"
    assert solver.requests[0].system == ""


def test_refiner_fixes_on_first_attempt(store: MemoryStore) -> None:
    solver = ScriptedClient(["bad\n#### 9"])
    refiner = ScriptedClient(["good steps\n#### 72"])
    rid, status = process_interaction("q two", "72", solver, refiner, store, LoopConfig(mode="auto"))
    assert status == "corrected"
    record = store.get(rid)
    assert record.status == "corrected"
    assert record.provenance == "refiner-model"
    assert len(record.revisions) == 1
    assert record.revisions[0].response == "bad\n#### 9"
    assert record.answer == "72"
    assert "Problem: q two" in refiner.requests[0].user
    assert "bad\n#### 9" in refiner.requests[0].user


def test_refiner_output_is_never_trusted_unverified(store: MemoryStore) -> None:
    # First refinement still wrong; second right: only the second is stored.
    solver = ScriptedClient(["bad\n#### 9"])
    refiner = ScriptedClient(["still bad\n#### 10", "fine\n#### 72"])
    rid, status = process_interaction("q three", "72", solver, refiner, store, LoopConfig(mode="auto"))
    assert status == "corrected"
    assert store.get(rid).answer == "72"
    assert len(refiner.requests) == 2


def test_exhausted_refiner_goes_to_review_queue(store: MemoryStore) -> None:
    solver = ScriptedClient(["bad\n#### 9"])
    refiner = ScriptedClient(["nope\n#### 1", "nope\n#### 2"])
    before = len(store.pending_queue())
    rid, status = process_interaction(
        "q four", "72", solver, refiner, store, LoopConfig(mode="auto-then-human", max_refiner_attempts=2)
    )
    assert status == "pending-review"
    assert len(refiner.requests) == 2
    assert len(store.pending_queue()) == before + 1
    assert store.get(rid).response == "bad\n#### 9"


def test_human_mode_skips_refiner(store: MemoryStore) -> None:
    solver = ScriptedClient(["bad\n#### 9"])
    rid, status = process_interaction("q five", "72", solver, None, store, LoopConfig(mode="human"))
    assert status == "pending-review"
    assert store.get(rid).status == "pending-review"


def test_auto_only_exhaustion_stores_flagged_unverified(store: MemoryStore) -> None:
    solver = ScriptedClient(["bad\n#### 9"])
    refiner = ScriptedClient(["nope\n#### 1", "nope\n#### 2"])
    rid, status = process_interaction("q six", "72", solver, refiner, store, LoopConfig(mode="auto"))
    assert status == "unverified"
    record = store.get(rid)
    assert record.status == "unverified"
    assert record.task_meta["flag"] == "refinement-exhausted"


def test_ungradable_solver_output_counts_as_incorrect(store: MemoryStore) -> None:
    solver = ScriptedClient(["no answer given"])
    refiner = ScriptedClient(["fixed\n#### 72"])
    rid, status = process_interaction("q seven", "72", solver, refiner, store, LoopConfig(mode="auto"))
    assert status == "corrected"
    assert store.get(rid).revisions[0].response == "no answer given"


def test_auto_mode_requires_refiner(store: MemoryStore) -> None:
    solver = ScriptedClient(["#### 72"])
    with pytest.raises(ConfigError):
        process_interaction("q eight", "72", solver, None, store, LoopConfig(mode="auto"))


def test_solver_failure_wrapped(store: MemoryStore) -> None:
    with pytest.raises(SolverUnavailable):
        process_interaction("q nine", "72", ScriptedClient([]), None, store, LoopConfig(mode="human"))


# ---------------------------------------------------------------- human corrections


def seed_pending(store: MemoryStore, problem: str = "pending problem", gold: str = "72") -> str:
    solver = ScriptedClient(["bad\n#### 9"])
    rid, _ = process_interaction(problem, gold, solver, None, store, LoopConfig(mode="human"))
    return rid


def test_human_correction_happy_path(store: MemoryStore, config: EmbedderConfig) -> None:
    rid = seed_pending(store)
    submit_human_correction(store, rid, "careful reasoning", "72")
    record = store.get(rid)
    assert record.status == "corrected"
    assert record.provenance == "human"
    assert record.response == "careful reasoning\n#### 72"
    assert record.revisions[0].answer == "9"


def test_human_correction_gold_mismatch(store: MemoryStore) -> None:
    rid = seed_pending(store)
    with pytest.raises(GoldMismatch):
        submit_human_correction(store, rid, "reasoning", "73")
    assert store.get(rid).status == "pending-review"


def test_human_correction_requires_pending(store: MemoryStore) -> None:
    rid = store.insert("already fine", "r", "r", "1", gold_answer="1", status="correct")
    with pytest.raises(IllegalTransition):
        submit_human_correction(store, rid, "reasoning", "1")


def test_human_correction_uncanonical_answer(store: MemoryStore) -> None:
    rid = seed_pending(store)
    with pytest.raises(Ungradable):
        submit_human_correction(store, rid, "reasoning", "not a number")


def test_corrected_record_retrievable_for_near_duplicate(store: MemoryStore, config: EmbedderConfig) -> None:
    rid = seed_pending(store, problem="amira counts seven red kites", gold="7")
    submit_human_correction(store, rid, "count them one by one", "7")
    results = store.search(embed("amira counts seven blue kites", config), 3)
    assert results and results[0].record_id == rid
    assert store.get(results[0].record_id).reasoning == "count them one by one"


# ---------------------------------------------------------------- interleaving property


def test_status_multiset_matches_simulation(config: EmbedderConfig) -> None:
    rnd = random.Random(29)
    for _ in range(50):
        store = MemoryStore(config)
        sim = TransitionTableSim()
        pending: list[str] = []
        for i in range(rnd.randint(1, 12)):
            problem = f"interleaved {rnd.randrange(1_000_000)} {i}"
            solver_right = rnd.random() < 0.4
            refine_right = rnd.random() < 0.5
            mode = rnd.choice(["auto", "human", "auto-then-human"])
            solver = ScriptedClient(["#### 5" if solver_right else "#### 6"])
            refiner = ScriptedClient(["#### 5" if refine_right else "#### 7", "#### 7"])
            rid, status = process_interaction(
                problem, "5", solver, refiner, store, LoopConfig(mode=mode, max_refiner_attempts=2)
            )
            # Independent prediction from the transition table.
            if solver_right:
                sim.insert(problem, "correct")
            elif mode in ("auto", "auto-then-human") and refine_right:
                sim.insert(problem, "unverified")
                sim.apply_correction(problem)
            elif mode in ("human", "auto-then-human"):
                sim.insert(problem, "pending-review")
                pending.append(rid)
            else:
                sim.insert(problem, "unverified")
            if pending and rnd.random() < 0.4:
                target = pending.pop(rnd.randrange(len(pending)))
                submit_human_correction(store, target, "review says", "5")
                sim.apply_correction(store.get(target).problem)
        counts = {k: v for k, v in store.counts().items() if v}
        assert counts == sim.multiset()
