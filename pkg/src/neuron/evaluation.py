"""Experiment harness: split, populate memory, and compare two arms.

A dataset is split half/half by a seeded shuffle; the training half feeds
memory through the feedback loop, and the held-out half is solved twice:
once bare (baseline) and once with retrieved exemplars (augmented). The
comparison report carries the accuracy delta and a per-item flip table so
an improvement can be traced to retrieval rather than noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .clients import CompletionClient
from .errors import DatasetError, EmptyDataset, MismatchedTestSets, Ungradable
from .feedback import LoopConfig, canonicalize_answer, extract_answer, grade, process_interaction
from .prompting import DEFAULT_BUDGET_TOKENS, DEFAULT_K, assemble, select_exemplars, token_estimate
from .store import MemoryStore
from .synthetic import ProblemInstance, SplitMix64


def split(
    dataset: Sequence[ProblemInstance],
    ratio: float = 0.5,
    seed: int = 0,
) -> tuple[list[ProblemInstance], list[ProblemInstance]]:
    """Disjoint (train, test) halves; |train| = floor(ratio * n).

    The shuffle is Fisher-Yates driven by SplitMix64, so the partition is
    reproducible from the seed alone in any implementation. Both halves are
    returned in original dataset order.
    """
    if not dataset:
        raise EmptyDataset("cannot split an empty dataset")
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be strictly between 0 and 1")
    indices = list(range(len(dataset)))
    SplitMix64(seed).shuffle(indices)
    n_train = int(ratio * len(dataset))
    train_idx = sorted(indices[:n_train])
    test_idx = sorted(indices[n_train:])
    return [dataset[i] for i in train_idx], [dataset[i] for i in test_idx]


def train_memory(
    train_set: Sequence[ProblemInstance],
    store: MemoryStore,
    config: LoopConfig,
    solver: CompletionClient,
    refiner: CompletionClient | None = None,
    *,
    answer_format: str = "marker",
) -> dict[str, int]:
    """Run the feedback loop over every training problem; returns counts by final status."""
    stats: dict[str, int] = {}
    for instance in train_set:
        _, status = process_interaction(
            instance.problem,
            instance.gold_answer,
            solver,
            refiner,
            store,
            config,
            answer_format=answer_format,
            task_meta={"dataset": instance.dataset, **({"family": instance.family} if instance.family else {})},
        )
        stats[status] = stats.get(status, 0) + 1
    return stats


@dataclass(frozen=True)
class ItemResult:
    id: str
    verdict: str
    exemplar_ids: list[str]
    prompt_tokens: int
    top_score: float | None


@dataclass
class EvaluationReport:
    arm: str  # baseline | augmented
    items: list[ItemResult]
    accuracy: float
    counts: dict[str, int]


@dataclass
class ComparisonReport:
    baseline: EvaluationReport
    augmented: EvaluationReport
    delta_points: float
    flips: dict[str, str] = field(default_factory=dict)  # id -> fixed | broken | unchanged

    @property
    def flip_counts(self) -> dict[str, int]:
        out = {"fixed": 0, "broken": 0, "unchanged": 0}
        for kind in self.flips.values():
            out[kind] += 1
        return out


def run_arm(
    test_set: Sequence[ProblemInstance],
    solver: CompletionClient,
    store: MemoryStore | None = None,
    *,
    k: int = DEFAULT_K,
    budget: int = DEFAULT_BUDGET_TOKENS,
    answer_format: str = "marker",
) -> EvaluationReport:
    """Evaluate one arm over the test set, in dataset order.

    With a store this is the augmented arm (retrieve, assemble, solve);
    without one it is the baseline (zero exemplars). An empty test set is
    an error: a report with undefined accuracy would silently corrupt any
    downstream comparison.
    """
    if not test_set:
        raise EmptyDataset("test set is empty")
    arm = "augmented" if store is not None else "baseline"
    items: list[ItemResult] = []
    counts = {"correct": 0, "incorrect": 0, "ungradable": 0}
    for instance in test_set:
        if store is not None:
            exemplars = select_exemplars(store, instance.problem, k=k)
        else:
            exemplars = []
        prompt = assemble(instance.problem, exemplars, budget=budget)
        response = solver.complete(prompt.to_request())
        verdict = grade(response, canonicalize_answer(instance.gold_answer), answer_format)
        counts[verdict.outcome] += 1
        items.append(
            ItemResult(
                id=instance.id,
                verdict=verdict.outcome,
                exemplar_ids=prompt.exemplar_ids,
                prompt_tokens=token_estimate(prompt.rendered),
                top_score=max(prompt.exemplar_scores) if prompt.exemplar_scores else None,
            )
        )
    return EvaluationReport(
        arm=arm,
        items=items,
        accuracy=counts["correct"] / len(items),
        counts=counts,
    )


def compare(baseline: EvaluationReport, augmented: EvaluationReport) -> ComparisonReport:
    """Accuracy delta in percentage points plus the per-item flip table."""
    base_ids = [item.id for item in baseline.items]
    aug_ids = [item.id for item in augmented.items]
    if base_ids != aug_ids:
        raise MismatchedTestSets("reports cover different test items")
    flips: dict[str, str] = {}
    aug_by_id = {item.id: item for item in augmented.items}
    for item in baseline.items:
        aug_item = aug_by_id[item.id]
        if item.verdict != "correct" and aug_item.verdict == "correct":
            flips[item.id] = "fixed"
        elif item.verdict == "correct" and aug_item.verdict != "correct":
            flips[item.id] = "broken"
        else:
            flips[item.id] = "unchanged"
    return ComparisonReport(
        baseline=baseline,
        augmented=augmented,
        delta_points=(augmented.accuracy - baseline.accuracy) * 100.0,
        flips=flips,
    )


def load_dataset_jsonl(path: str | Path, form: str = "auto") -> list[ProblemInstance]:
    """Read problems from JSON lines: {"id", "question", "answer"[, "family"]}.

    The gold answer may embed the ``####`` marker (it is extracted with the
    marker rule) or be a bare number; ``form`` pins one of the two
    ("gsm8k" or "plain") or sniffs per line ("auto").
    """
    if form not in ("auto", "gsm8k", "plain"):
        raise ValueError(f"unknown dataset form {form!r}")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    out: list[ProblemInstance] = []
    seen_ids: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except ValueError as exc:
            raise DatasetError(f"line {lineno}: invalid JSON ({exc})", line=lineno) from exc
        if not isinstance(obj, dict):
            raise DatasetError(f"line {lineno}: expected an object", line=lineno)
        for key in ("id", "question", "answer"):
            if key not in obj:
                raise DatasetError(f'line {lineno}: missing field "{key}"', line=lineno)
        raw_answer = str(obj["answer"])
        try:
            if form == "gsm8k" or (form == "auto" and "####" in raw_answer):
                gold = extract_answer(raw_answer, "marker")
            else:
                gold = canonicalize_answer(raw_answer)
        except Ungradable as exc:
            raise DatasetError(f"line {lineno}: unusable answer {raw_answer!r}", line=lineno) from exc
        item_id = str(obj["id"])
        if item_id in seen_ids:
            raise DatasetError(f"line {lineno}: duplicate id {item_id!r}", line=lineno)
        seen_ids.add(item_id)
        out.append(
            ProblemInstance(
                id=item_id,
                problem=str(obj["question"]),
                gold_answer=gold,
                dataset=str(obj.get("dataset", Path(path).stem)),
                family=str(obj["family"]) if "family" in obj else None,
            )
        )
    if not out:
        raise EmptyDataset(f"no problems in {path}")
    return out


def write_dataset_jsonl(dataset: Sequence[ProblemInstance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for instance in dataset:
            obj = {"id": instance.id, "question": instance.problem, "answer": instance.gold_answer}
            if instance.family is not None:
                obj["family"] = instance.family
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
