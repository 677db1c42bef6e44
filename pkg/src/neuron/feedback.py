"""Grading, answer canonicalization, and the solve-grade-refine loop.

A solved problem flows through here: the solver answers, the response is
graded against the gold label, and failures are either repaired by a
stronger refiner model (whose output is re-graded before it is trusted)
or parked in the human review queue. Every outcome lands in the memory
store with the full history of wrong attempts preserved.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

from .clients import CompletionClient, CompletionRequest
from .errors import ClientError, ConfigError, GoldMismatch, IllegalTransition, SolverUnavailable, Ungradable
from .store import MemoryStore

ANSWER_MARKER = "####"
ANSWER_FORMATS = ("marker", "last-number")
LOOP_MODES = ("auto", "human", "auto-then-human")

REFINER_SYSTEM = (
    "You are an expert tutor. Produce correct step-by-step reasoning. "
    "End with '#### <answer>'."
)

_NUMBER_RE = re.compile(r"-?\d[\d,]*(?:\.\d+)?|-?\.\d+")


@dataclass(frozen=True)
class Verdict:
    """Outcome of grading one response against a gold answer."""

    outcome: str  # correct | incorrect | ungradable
    extracted: str | None
    gold: str


@dataclass
class LoopConfig:
    """How failures are repaired: by a refiner model, a human, or both."""

    mode: str = "auto-then-human"
    max_refiner_attempts: int = 2
    store_unverified: bool = True

    def __post_init__(self) -> None:
        if self.mode not in LOOP_MODES:
            raise ConfigError(f"unknown loop mode {self.mode!r}")
        if self.max_refiner_attempts < 0:
            raise ConfigError("max_refiner_attempts must be >= 0")


def canonicalize_answer(text: str) -> str:
    """Canonical decimal form: no $, %, commas, or trailing fractional zeros.

    Integers render without a decimal point ("72.0" -> "72"); signed zero
    collapses to "0". Raises Ungradable when the cleaned text is not a
    single decimal number.
    """
    cleaned = text.strip().replace(",", "").replace("$", "").replace("%", "").strip()
    if not cleaned:
        raise Ungradable("empty answer text")
    try:
        value = Decimal(cleaned)
    except InvalidOperation as exc:
        raise Ungradable(f"not a decimal number: {text!r}") from exc
    if not value.is_finite():
        raise Ungradable(f"not a finite number: {text!r}")
    if value == 0:
        return "0"
    return format(value.normalize(), "f")


def extract_answer(response: str, format: str = "marker") -> str:
    """Pull the final answer out of a response and canonicalize it.

    marker: everything after the last ``####``. last-number: the last
    maximal decimal-number token anywhere in the text.
    """
    if format not in ANSWER_FORMATS:
        raise ConfigError(f"unknown answer format {format!r}")
    if format == "marker":
        idx = response.rfind(ANSWER_MARKER)
        if idx < 0:
            raise Ungradable("no #### marker in response")
        return canonicalize_answer(response[idx + len(ANSWER_MARKER) :])
    matches = _NUMBER_RE.findall(response)
    if not matches:
        raise Ungradable("no number in response")
    return canonicalize_answer(matches[-1])


def split_reasoning(response: str) -> str:
    """Chain-of-thought portion: the text before the final answer marker."""
    idx = response.rfind(ANSWER_MARKER)
    if idx < 0:
        return response.strip()
    return response[:idx].strip()


def grade(response: str, gold: str, format: str = "marker") -> Verdict:
    """Exact-decimal grading; extraction failure grades as ungradable."""
    try:
        extracted = extract_answer(response, format)
    except Ungradable:
        return Verdict(outcome="ungradable", extracted=None, gold=gold)
    correct = Decimal(extracted) == Decimal(gold)
    return Verdict(outcome="correct" if correct else "incorrect", extracted=extracted, gold=gold)


def refinement_request(
    problem: str,
    wrong_attempt: str,
    gold: str,
    *,
    model: str = "",
) -> CompletionRequest:
    """Prompt shown to the refiner: problem, failed attempt, and gold label."""
    user = (
        f"Problem: {problem}\n\n"
        f"Incorrect attempt:\n{wrong_attempt}\n\n"
        f"The correct final answer is {gold}."
    )
    return CompletionRequest(system=REFINER_SYSTEM, user=user, model=model, role="refiner")


def process_interaction(
    problem: str,
    gold_answer: str,
    solver: CompletionClient,
    refiner: CompletionClient | None,
    store: MemoryStore,
    config: LoopConfig,
    *,
    answer_format: str = "marker",
    task_meta: dict | None = None,
) -> tuple[str | None, str]:
    """Run the full loop for one problem; returns (record id, final status).

    Correct solver answers are stored retrievable right away. Failures go
    to the refiner (when the mode allows it); the first refiner output
    that actually grades correct is stored as a correction on top of the
    failed attempt. Anything still wrong is queued for human review, or,
    with no human in the loop, kept unverified and flagged.
    """
    if config.mode in ("auto", "auto-then-human") and refiner is None:
        raise ConfigError(f"mode {config.mode!r} requires a refiner client")
    gold = canonicalize_answer(gold_answer)
    meta = dict(task_meta or {})

    try:
        attempt = solver.complete(CompletionRequest(system="", user=problem, role="solver"))
    except ClientError as exc:
        raise SolverUnavailable(str(exc)) from exc

    verdict = grade(attempt, gold, answer_format)
    if verdict.outcome == "correct":
        record_id = store.insert(
            problem,
            response=attempt,
            reasoning=split_reasoning(attempt),
            answer=verdict.extracted or "",
            gold_answer=gold,
            status="correct",
            provenance="model",
            task_meta=meta,
        )
        return record_id, "correct"

    # Failed (or ungradable, which counts as failed). Try the refiner.
    if config.mode in ("auto", "auto-then-human") and refiner is not None:
        request = refinement_request(problem, attempt, gold)
        for _ in range(config.max_refiner_attempts):
            try:
                refined = refiner.complete(request)
            except ClientError as exc:
                raise SolverUnavailable(str(exc)) from exc
            refined_verdict = grade(refined, gold, answer_format)
            if refined_verdict.outcome != "correct":
                continue
            record_id = store.insert(
                problem,
                response=attempt,
                reasoning=split_reasoning(attempt),
                answer=verdict.extracted or "",
                gold_answer=gold,
                status="unverified",
                provenance="model",
                task_meta=meta,
            )
            store.apply_correction(
                record_id,
                corrected_response=refined,
                corrected_reasoning=split_reasoning(refined),
                corrected_answer=refined_verdict.extracted or "",
                provenance="refiner-model",
            )
            return record_id, "corrected"

    if config.mode in ("human", "auto-then-human"):
        record_id = store.insert(
            problem,
            response=attempt,
            reasoning=split_reasoning(attempt),
            answer=verdict.extracted or "",
            gold_answer=gold,
            status="pending-review",
            provenance="model",
            task_meta=meta,
        )
        return record_id, "pending-review"

    # Auto-only mode with the refiner budget exhausted.
    if not config.store_unverified:
        return None, "unverified"
    meta["flag"] = "refinement-exhausted"
    record_id = store.insert(
        problem,
        response=attempt,
        reasoning=split_reasoning(attempt),
        answer=verdict.extracted or "",
        gold_answer=gold,
        status="unverified",
        provenance="model",
        task_meta=meta,
    )
    return record_id, "unverified"


def submit_human_correction(
    store: MemoryStore,
    record_id: str,
    corrected_reasoning: str,
    corrected_answer: str,
) -> None:
    """Apply a reviewer's correction to a pending-review record.

    The submitted answer must canonicalize and, when the record carries a
    gold label, match it exactly; a contradicting correction would poison
    retrieval with a wrong exemplar.
    """
    record = store.get(record_id)
    if record.status != "pending-review":
        raise IllegalTransition(f"record {record_id} is {record.status}, not pending-review")
    answer = canonicalize_answer(corrected_answer)
    if record.gold_answer is not None and Decimal(answer) != Decimal(record.gold_answer):
        raise GoldMismatch(f"answer {answer} contradicts gold {record.gold_answer}")
    response = f"{corrected_reasoning}\n{ANSWER_MARKER} {answer}"
    store.apply_correction(
        record_id,
        corrected_response=response,
        corrected_reasoning=corrected_reasoning,
        corrected_answer=answer,
        provenance="human",
    )
