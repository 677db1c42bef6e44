"""HTTP surface for the review console and programmatic memory access.

All bodies are JSON; errors are ``{"code": <stable string>, "message":
<human text>}`` with 4xx for caller faults and 5xx for internal problems.
Bearer tokens and embedder internals never appear in responses.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .clients import CompletionClient
from .errors import (
    ClientError,
    EmptyText,
    GoldMismatch,
    IllegalTransition,
    NeuronError,
    NotFound,
    Ungradable,
)
from .feedback import grade, canonicalize_answer, submit_human_correction
from .prompting import assemble, select_exemplars
from .store import STATUSES, MemoryStore

SUMMARY_REASONING_CHARS = 400
MAX_SEARCH_K = 25
DEFAULT_PAGE_LIMIT = 50


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def _record_summary(record) -> dict:
    return {
        "id": record.id,
        "problem": record.problem,
        "status": record.status,
        "provenance": record.provenance,
        "answer": record.answer,
        "gold_answer": record.gold_answer,
        "reasoning": record.reasoning[:SUMMARY_REASONING_CHARS],
        "created_at": record.created_at,
        "updated_at": record.updated_at,
        "revision_count": len(record.revisions),
    }


def _record_detail(record) -> dict:
    detail = _record_summary(record)
    detail["reasoning"] = record.reasoning
    detail["response"] = record.response
    detail["task_meta"] = record.task_meta
    detail["revisions"] = [rev.to_dict() for rev in record.revisions]
    return detail


def create_app(
    store: MemoryStore,
    solver: CompletionClient | None = None,
    *,
    search_k_default: int = 3,
    cors_origin: str | None = None,
    last_eval_path: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="neuron-memory", docs_url=None, redoc_url=None)
    if cors_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[cors_origin] if cors_origin != "*" else ["*"],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.get("/api/records")
    def list_records(status: str | None = None, limit: int = DEFAULT_PAGE_LIMIT, offset: int = 0):
        if status is not None and status not in STATUSES:
            return _error(400, "invalid_status", f"unknown status {status!r}")
        if limit < 1 or offset < 0:
            return _error(400, "invalid_paging", "limit must be >= 1 and offset >= 0")
        records = store.list_records(status=status, newest_first=True)
        page = records[offset : offset + limit]
        return {"items": [_record_summary(r) for r in page], "total": len(records)}

    @app.get("/api/records/{record_id}")
    def record_detail(record_id: str):
        try:
            record = store.get(record_id)
        except NotFound:
            return _error(404, "not_found", f"no record {record_id}")
        return _record_detail(record)

    @app.get("/api/queue")
    def queue():
        items = [_record_detail(r) for r in store.pending_queue()]
        return {"items": items, "total": len(items)}

    @app.post("/api/queue/{record_id}/correction")
    async def correct(record_id: str, request: Request):
        try:
            body = json.loads(await request.body())
        except ValueError:
            return _error(400, "invalid_json", "body must be a JSON object")
        if not isinstance(body, dict) or not body.get("reasoning") or not body.get("answer"):
            return _error(400, "missing_fields", 'body needs non-empty "reasoning" and "answer"')
        try:
            submit_human_correction(store, record_id, str(body["reasoning"]), str(body["answer"]))
        except NotFound:
            return _error(404, "not_found", f"no record {record_id}")
        except IllegalTransition as exc:
            return _error(409, "illegal_transition", str(exc))
        except GoldMismatch as exc:
            return _error(422, "gold_mismatch", str(exc))
        except Ungradable as exc:
            return _error(422, "invalid_answer", str(exc))
        return _record_detail(store.get(record_id))

    @app.get("/api/search")
    def search(q: str = "", k: int | None = None):
        k = search_k_default if k is None else k
        if not q.strip():
            return _error(400, "empty_query", "q must be non-empty")
        if k < 1 or k > MAX_SEARCH_K:
            return _error(400, "invalid_k", f"k must be in 1..{MAX_SEARCH_K}")
        try:
            query_vec = store.embed_text(q)
        except EmptyText:
            return _error(400, "empty_query", "query has no alphanumeric tokens")
        results = store.search(query_vec, k)
        items = []
        for result in results:
            record = store.get(result.record_id)
            items.append(
                {
                    "record_id": result.record_id,
                    "rank": result.rank,
                    "score": result.score,
                    "status": record.status,
                    "problem": record.problem,
                }
            )
        return {"items": items, "total": len(items)}

    @app.post("/api/solve")
    async def solve(request: Request):
        if solver is None:
            return _error(503, "solver_unavailable", "no solver configured")
        try:
            body = json.loads(await request.body())
        except ValueError:
            return _error(400, "invalid_json", "body must be a JSON object")
        problem = str(body.get("problem", "")) if isinstance(body, dict) else ""
        if not problem.strip():
            return _error(400, "empty_query", '"problem" must be non-empty')
        try:
            exemplars = select_exemplars(store, problem)
        except EmptyText:
            return _error(400, "empty_query", "problem has no alphanumeric tokens")
        prompt = assemble(problem, exemplars)
        try:
            response = solver.complete(prompt.to_request())
        except ClientError as exc:
            return _error(503, "solver_unavailable", str(exc))
        out = {
            "prompt": prompt.rendered,
            "response": response,
            # Rank order, mirroring /api/search (the prompt itself renders
            # them ascending).
            "exemplar_ids": [record.id for record, _ in exemplars],
            "verdict": None,
        }
        gold_raw = body.get("gold_answer")
        if gold_raw is not None:
            try:
                gold = canonicalize_answer(str(gold_raw))
            except Ungradable:
                return _error(400, "invalid_gold", f"gold answer {gold_raw!r} is not a number")
            verdict = grade(response, gold)
            out["verdict"] = {"outcome": verdict.outcome, "extracted": verdict.extracted, "gold": gold}
        return out

    @app.get("/api/stats")
    def stats():
        counts = store.counts()
        last_eval = None
        if last_eval_path is not None and Path(last_eval_path).exists():
            try:
                last_eval = json.loads(Path(last_eval_path).read_text(encoding="utf-8"))
            except ValueError:
                last_eval = None
        return {
            "counts": counts,
            "size": len(store),
            "dim": store.config.dim,
            "last_eval": last_eval,
        }

    @app.exception_handler(NeuronError)
    def neuron_error_handler(_request, exc: NeuronError):
        return _error(500, "internal", str(exc))

    return app
