"""Experiential memory for language models.

Logged problem-solving interactions are embedded, stored, corrected when
wrong, and retrieved as chain-of-thought exemplars for new problems; an
evaluation harness measures the accuracy gain against a bare baseline.
"""

from .clients import CompletionRequest, HttpChatClient, ScriptedClient
from .embedding import EmbedderConfig, Embedder, cosine, embed, hash_embed
from .evaluation import (
    ComparisonReport,
    EvaluationReport,
    compare,
    load_dataset_jsonl,
    run_arm,
    split,
    train_memory,
)
from .feedback import (
    LoopConfig,
    Verdict,
    canonicalize_answer,
    extract_answer,
    grade,
    process_interaction,
    submit_human_correction,
)
from .prompting import AssembledPrompt, assemble, select_exemplars
from .service import create_app
from .store import ExperienceRecord, MemoryStore, RetrievalResult
from .synthetic import ProblemInstance, SplitMix64, TemplateOracleClient, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "AssembledPrompt",
    "ComparisonReport",
    "CompletionRequest",
    "Embedder",
    "EmbedderConfig",
    "EvaluationReport",
    "ExperienceRecord",
    "HttpChatClient",
    "LoopConfig",
    "MemoryStore",
    "ProblemInstance",
    "RetrievalResult",
    "ScriptedClient",
    "SplitMix64",
    "TemplateOracleClient",
    "Verdict",
    "__version__",
    "assemble",
    "canonicalize_answer",
    "compare",
    "cosine",
    "create_app",
    "embed",
    "extract_answer",
    "generate_dataset",
    "grade",
    "hash_embed",
    "load_dataset_jsonl",
    "process_interaction",
    "run_arm",
    "select_exemplars",
    "split",
    "submit_human_correction",
    "train_memory",
]
