"""Synthetic math word problems and the deterministic template-oracle solver.

The generator emits templated one- and two-step arithmetic problems in a
fixed number of families (distinct vocabulary and operation patterns),
with names and numbers drawn from a SplitMix64 stream so the whole dataset
is a pure function of the seed.

The template oracle is the desk-scale stand-in for a live model: it solves
a prompt correctly when the prompt carries a worked example from the
query's own family, and otherwise falls back to a fixed per-problem base
rate decided by a seeded hash of the problem id. Refinement prompts (which
state the correct answer) are always answered correctly.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Sequence

from .clients import CompletionRequest
from .store import normalize_problem

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 PRNG; trivially reimplementable for independent checks.

    next_u64: state += 0x9E3779B97F4A7C15; z = state;
    z = (z ^ z>>30) * 0xBF58476D1CE4E5B9; z = (z ^ z>>27) * 0x94D049BB133111EB;
    return z ^ z>>31 (all mod 2^64).
    """

    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def randrange(self, n: int) -> int:
        return self.next_u64() % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform-ish integer in [lo, hi]."""
        return lo + self.randrange(hi - lo + 1)

    def choice(self, seq: Sequence):
        return seq[self.randrange(len(seq))]

    def shuffle(self, items: list) -> None:
        """Fisher-Yates from the top, j = next_u64() % (i + 1)."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]


@dataclass(frozen=True)
class ProblemInstance:
    id: str
    problem: str
    gold_answer: str
    dataset: str = "synthetic"
    family: str | None = None


_NAMES = (
    "Ava", "Ben", "Carla", "Deepak", "Elena", "Farid", "Grace", "Hugo",
    "Imani", "Jonas", "Keiko", "Liam", "Mira", "Noah", "Priya", "Rosa",
)


def _f_apples(name: str, rng: SplitMix64) -> tuple[str, int]:
    a, b = rng.randint(2, 40), rng.randint(2, 40)
    q = f"{name} has {a} apples and buys {b} more at the market. How many apples does {name} have now?"
    return q, a + b


def _f_cookies(name: str, rng: SplitMix64) -> tuple[str, int]:
    a = rng.randint(10, 60)
    b = rng.randint(2, a - 1)
    q = f"{name} baked {a} cookies and the family ate {b} of them after dinner. How many cookies are left?"
    return q, a - b


def _f_stickers(name: str, rng: SplitMix64) -> tuple[str, int]:
    a, b = rng.randint(2, 12), rng.randint(3, 12)
    q = f"{name} fills {a} album pages with exactly {b} stickers on each page. How many stickers are in the album?"
    return q, a * b


def _f_marbles(name: str, rng: SplitMix64) -> tuple[str, int]:
    per, friends = rng.randint(2, 12), rng.randint(2, 9)
    total = per * friends
    q = f"{name} divides {total} marbles equally among {friends} friends. How many marbles does each friend get?"
    return q, per


def _f_pencils(name: str, rng: SplitMix64) -> tuple[str, int]:
    a, b, c = rng.randint(2, 9), rng.randint(4, 12), rng.randint(1, 8)
    q = (
        f"{name} buys {a} boxes of pencils with {b} pencils in each box and finds "
        f"{c} loose pencils in the drawer. How many pencils does {name} have in total?"
    )
    return q, a * b + c


def _f_savings(name: str, rng: SplitMix64) -> tuple[str, int]:
    a, b = rng.randint(3, 15), rng.randint(3, 10)
    c = rng.randint(1, a * b - 1)
    q = (
        f"{name} saves {a} dollars every week for {b} weeks and then spends "
        f"{c} dollars on a board game. How many dollars remain?"
    )
    return q, a * b - c


def _f_bus(name: str, rng: SplitMix64) -> tuple[str, int]:
    a, b = rng.randint(5, 30), rng.randint(2, 15)
    c = rng.randint(1, a + b - 1)
    q = (
        f"A bus leaves the depot with {a} passengers. At the first stop {b} passengers "
        f"board and at the second stop {c} passengers get off. How many passengers are on the bus now?"
    )
    return q, a + b - c


def _f_garden(name: str, rng: SplitMix64) -> tuple[str, int]:
    a, b = rng.randint(3, 11), rng.randint(2, 10)
    q = f"{name} plants {a} rows of tomato seedlings with {b} seedlings in every row. How many seedlings are planted in the garden?"
    return q, a * b


def _f_book(name: str, rng: SplitMix64) -> tuple[str, int]:
    b, c = rng.randint(5, 20), rng.randint(2, 8)
    total = b * c + rng.randint(5, 50)
    q = (
        f"{name} is reading a book with {total} pages and reads {b} pages each evening. "
        f"How many pages are left after {c} evenings?"
    )
    return q, total - b * c


def _f_candy(name: str, rng: SplitMix64) -> tuple[str, int]:
    a, c, m = rng.randint(2, 6), rng.randint(2, 6), rng.randint(1, 5)
    b = c * m
    q = (
        f"{name} opens {a} bags of candy with {b} candies in each bag and shares them "
        f"equally among {c} children. How many candies does each child receive?"
    )
    return q, a * m


_FAMILY_BUILDERS = (
    _f_apples,
    _f_cookies,
    _f_stickers,
    _f_marbles,
    _f_pencils,
    _f_savings,
    _f_bus,
    _f_garden,
    _f_book,
    _f_candy,
)

MAX_FAMILIES = len(_FAMILY_BUILDERS)


def generate_dataset(n: int = 400, n_families: int = 10, seed: int = 0) -> list[ProblemInstance]:
    """n unique problems cycling through the first n_families templates."""
    if not 1 <= n_families <= MAX_FAMILIES:
        raise ValueError(f"n_families must be in 1..{MAX_FAMILIES}")
    rng = SplitMix64(seed)
    seen: set[str] = set()
    out: list[ProblemInstance] = []
    width = max(4, len(str(n)))
    for i in range(n):
        fam_idx = i % n_families
        builder = _FAMILY_BUILDERS[fam_idx]
        for _ in range(10_000):
            name = rng.choice(_NAMES)
            problem, answer = builder(name, rng)
            key = normalize_problem(problem)
            if key not in seen:
                seen.add(key)
                break
        else:
            raise RuntimeError("could not generate a unique problem; template space too small")
        out.append(
            ProblemInstance(
                id=f"p{i + 1:0{width}d}",
                problem=problem,
                gold_answer=str(answer),
                dataset="synthetic",
                family=f"f{fam_idx:02d}",
            )
        )
    return out


_PROBLEM_BLOCK_RE = re.compile(r"Problem: (.*?)\nSolution:", re.S)
_REFINEMENT_RE = re.compile(r"The correct final answer is (.+)\.\s*\Z")


class TemplateOracleClient:
    """Deterministic solver keyed to a synthetic dataset.

    Correct whenever the prompt contains an exemplar from the query's
    family; otherwise correct iff hash(seed, problem id) falls below the
    base rate. Unknown problems get an answer-free response, which grades
    as ungradable.
    """

    def __init__(
        self,
        dataset: Sequence[ProblemInstance],
        base_rate: float = 0.3,
        seed: int = 0,
    ) -> None:
        self.base_rate = base_rate
        self.seed = seed
        self._by_problem = {normalize_problem(p.problem): p for p in dataset}
        self.calls = 0

    def knows_from_base_rate(self, problem_id: str) -> bool:
        """The seeded per-problem coin used when no family exemplar is shown."""
        digest = hashlib.sha256(f"{self.seed}:{problem_id}".encode("utf-8")).digest()
        fraction = int.from_bytes(digest[:8], "big") / 2**64
        return fraction < self.base_rate

    def _solution(self, answer: str) -> str:
        return (
            f"Following the worked pattern step by step gives {answer}.\n#### {answer}"
        )

    def _wrong(self, instance: ProblemInstance) -> str:
        value = Decimal(instance.gold_answer) + 1
        return f"A rough guess without a matching template.\n#### {value}"

    def complete(self, request: CompletionRequest) -> str:
        self.calls += 1
        text = request.user
        refinement = _REFINEMENT_RE.search(text)
        if refinement is not None:
            return self._solution(refinement.group(1).strip())
        blocks = _PROBLEM_BLOCK_RE.findall(text)
        if blocks:
            query, exemplars = blocks[-1].strip(), blocks[:-1]
        else:
            query, exemplars = text.strip(), []
        instance = self._by_problem.get(normalize_problem(query))
        if instance is None:
            return "I cannot match this problem to anything I know."
        exemplar_families = {
            known.family
            for block in exemplars
            if (known := self._by_problem.get(normalize_problem(block.strip()))) is not None
        }
        if instance.family is not None and instance.family in exemplar_families:
            return self._solution(instance.gold_answer)
        if self.knows_from_base_rate(instance.id):
            return self._solution(instance.gold_answer)
        return self._wrong(instance)
