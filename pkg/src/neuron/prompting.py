"""Chain-of-thought prompt assembly from retrieved exemplars.

Retrieves the top-k most similar solved problems from memory and renders
them as worked examples ahead of the new query, most similar last so the
best template sits next to the question. A character-based token budget
trims the least similar exemplars first.
"""

from __future__ import annotations

from dataclasses import dataclass

from .clients import CompletionRequest
from .errors import QueryAloneOverBudget
from .store import MemoryStore, ExperienceRecord, normalize_problem

PREAMBLE = "Solve the problem step by step. End with '#### <answer>'."
DEFAULT_K = 3
DEFAULT_MIN_SCORE = 0.0
DEFAULT_BUDGET_TOKENS = 3000


def token_estimate(text: str) -> int:
    """Budget approximation: one token per four characters, rounded up."""
    return (len(text) + 3) // 4


@dataclass(frozen=True)
class AssembledPrompt:
    """A rendered prompt plus the pieces it was built from.

    ``exemplars`` and ``exemplar_ids`` are in rendering order, ascending
    similarity; ``rendered`` is the preamble plus ``user_text``.
    """

    preamble: str
    exemplars: list[tuple[str, str, str]]  # (problem, reasoning, answer)
    query: str
    rendered: str
    user_text: str
    exemplar_ids: list[str]
    exemplar_scores: list[float]

    def to_request(self, *, model: str = "", role: str = "solver", max_output_tokens: int = 1024) -> CompletionRequest:
        """Preamble becomes the system message; the rest one user message."""
        return CompletionRequest(
            system=self.preamble,
            user=self.user_text,
            model=model,
            role=role,
            max_output_tokens=max_output_tokens,
        )


def select_exemplars(
    store: MemoryStore,
    problem: str,
    k: int = DEFAULT_K,
    min_score: float = DEFAULT_MIN_SCORE,
) -> list[tuple[ExperienceRecord, float]]:
    """Top-k retrievable records for this problem, most similar first.

    A record holding exactly the query's problem text is excluded: replaying
    the answer to the literal same question is memorization, not guidance.
    """
    query_vec = store.embed_text(problem)
    query_key = normalize_problem(problem)
    results = store.search(query_vec, k + 1, min_score=min_score)
    out: list[tuple[ExperienceRecord, float]] = []
    for result in results:
        record = store.get(result.record_id)
        if normalize_problem(record.problem) == query_key:
            continue
        out.append((record, result.score))
        if len(out) == k:
            break
    return out


def _render(exemplars_asc: list[tuple[str, str, str]], query: str) -> str:
    blocks = "".join(
        f"Problem: {problem}\nSolution: {reasoning}\n#### {answer}\n\n"
        for problem, reasoning, answer in exemplars_asc
    )
    return f"{blocks}Problem: {query}\nSolution:"


def assemble(
    problem: str,
    exemplars: list[tuple[ExperienceRecord, float]],
    budget: int = DEFAULT_BUDGET_TOKENS,
) -> AssembledPrompt:
    """Render exemplars (given most-similar-first) around the query.

    Drops the least similar exemplar and re-renders while the estimate is
    over budget; with every exemplar gone the prompt is a valid zero-shot
    prompt, and if even that is over budget the query itself is too big.
    """
    kept = list(exemplars)
    while True:
        ascending = list(reversed(kept))
        user_text = _render(
            [(rec.problem, rec.reasoning, rec.answer) for rec, _ in ascending],
            problem,
        )
        rendered = f"{PREAMBLE}\n\n{user_text}"
        if token_estimate(rendered) <= budget:
            return AssembledPrompt(
                preamble=PREAMBLE,
                exemplars=[(rec.problem, rec.reasoning, rec.answer) for rec, _ in ascending],
                query=problem,
                rendered=rendered,
                user_text=user_text,
                exemplar_ids=[rec.id for rec, _ in ascending],
                exemplar_scores=[score for _, score in ascending],
            )
        if not kept:
            raise QueryAloneOverBudget(
                f"query needs {token_estimate(rendered)} tokens, budget is {budget}"
            )
        kept.pop()  # least similar goes first
