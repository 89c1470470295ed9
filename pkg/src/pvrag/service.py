"""JSON HTTP facade over the query pipelines.

Stateless per request: resources are loaded once at app construction and
never mutated. Every request produces exactly one structured log line
(a JSON object) on the "pvrag.service" logger. Audit material (final
prompt, retrieved evidence) is included only when the client asks with
?verbose=1; the default response stays compact.
"""

from __future__ import annotations

import json
import logging
import time

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import ServiceConfig, build_backend, load_config, load_resources
from .entities import EntityMatch
from .errors import (
    BackendUnavailable,
    EntityError,
    ProviderFailure,
    ProviderMismatch,
    Unparseable,
)
from .pipeline import PIPELINES, Answer, PipelineResources, run_query

log = logging.getLogger("pvrag.service")


def _error_body(code: str, message: str, candidates: list[str] | None = None) -> dict:
    error: dict = {"code": code, "message": message}
    if candidates:
        error["candidates"] = candidates
    return {"error": error}


def _entity_json(match: EntityMatch) -> dict:
    return {
        "id": match.entity_id,
        "name": match.name,
        "surface": match.surface,
        "start": match.start,
        "end": match.end,
    }


def _answer_json(answer: Answer, verbose: bool) -> dict:
    body: dict = {
        "decision": answer.decision,
        "explanation": answer.explanation,
        "pipeline": answer.verdict.pipeline,
        "associated": answer.verdict.associated,
        "entities": None
        if answer.entities is None
        else {
            "drug": _entity_json(answer.entities.drug),
            "side_effect": _entity_json(answer.entities.side_effect),
        },
        "latency_ms": answer.latency_ms,
    }
    if verbose:
        body["evidence"] = list(answer.evidence_texts)
        body["evidence_ids"] = list(answer.verdict.evidence)
        body["prompt"] = answer.prompt.final_prompt
        body["assertion"] = answer.prompt.assertion
        body["raw_hits"] = (
            None
            if answer.verdict.raw_hits is None
            else [[chunk_id, score] for chunk_id, score in answer.verdict.raw_hits]
        )
        body["backend"] = answer.backend_name
        body["generation_params"] = answer.generation_params
    return body


def create_app(
    config: ServiceConfig | None = None,
    resources: PipelineResources | None = None,
    backend=None,
) -> FastAPI:
    """Build the app. Tests may inject prebuilt resources and a backend;
    the serve command passes only config and loads everything from disk."""
    if config is None:
        config = load_config()
    if resources is None:
        resources = load_resources(
            config, need_index_a=True, need_index_b=True, need_graph=True
        )
    if backend is None:
        backend = build_backend(config)

    app = FastAPI(title="pvrag", docs_url=None, redoc_url=None)

    @app.middleware("http")
    async def request_log(request: Request, call_next):
        started = time.perf_counter()
        response = await call_next(request)
        entry = {
            "method": request.method,
            "path": request.url.path,
            "status": response.status_code,
            "latency_ms": round((time.perf_counter() - started) * 1000.0, 3),
        }
        entry.update(getattr(request.state, "log_fields", {}))
        log.info(json.dumps(entry, sort_keys=True))
        return response

    @app.post("/v1/query")
    async def query(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse(
                status_code=400,
                content=_error_body("malformed_body", "request body must be JSON"),
            )
        if not isinstance(body, dict):
            return JSONResponse(
                status_code=400,
                content=_error_body("malformed_body", "request body must be an object"),
            )
        question = body.get("question")
        pipeline = body.get("pipeline", config.default_pipeline)
        if not isinstance(question, str) or not question.strip():
            return JSONResponse(
                status_code=400,
                content=_error_body(
                    "malformed_body", 'field "question" must be a nonempty string'
                ),
            )
        if pipeline not in PIPELINES:
            return JSONResponse(
                status_code=400,
                content=_error_body(
                    "malformed_body",
                    f'field "pipeline" must be one of {", ".join(PIPELINES)}',
                ),
            )
        verbose = request.query_params.get("verbose") == "1"
        request.state.log_fields = {"pipeline": pipeline}
        try:
            answer = run_query(question, pipeline, resources, backend)
        except EntityError as exc:
            request.state.log_fields["error"] = exc.code
            return JSONResponse(
                status_code=422,
                content=_error_body(exc.code, str(exc), list(exc.candidates)),
            )
        except (BackendUnavailable, ProviderFailure, ProviderMismatch, Unparseable) as exc:
            request.state.log_fields["error"] = exc.code
            return JSONResponse(
                status_code=502, content=_error_body(exc.code, str(exc))
            )
        request.state.log_fields["decision"] = answer.decision
        return _answer_json(answer, verbose)

    @app.get("/v1/drugs/{name}/side-effects")
    def drug_side_effects(name: str, request: Request):
        kb = resources.kb
        record = kb.drug_by_name(name)
        if record is None:
            return JSONResponse(
                status_code=404,
                content=_error_body("drug_not_found", f"unknown drug {name!r}"),
            )
        effects = [
            {
                "name": kb.terms[term_id].name,
                "soc_class": kb.terms[term_id].soc_class,
            }
            for term_id in kb.adjacency.get(record.drug_id, ())
        ]
        effects.sort(key=lambda e: e["name"])
        request.state.log_fields = {"drug": record.name}
        return {
            "drug": {
                "id": record.drug_id,
                "name": record.name,
                "atc_codes": list(record.atc_codes),
            },
            "count": len(effects),
            "side_effects": effects,
        }

    @app.get("/healthz")
    def healthz():
        kb = resources.kb
        body = {
            "status": "ok",
            "kb_fingerprint": kb.fingerprint,
            "counts": {
                "drugs": len(kb.drugs),
                "terms": len(kb.terms),
                "associations": len(kb.associations),
            },
            "backend": getattr(backend, "name", "unknown"),
            "default_pipeline": config.default_pipeline,
            "k": resources.k,
        }
        if resources.graph is not None:
            body["graph"] = {
                "nodes": len(resources.graph.nodes),
                "edges": resources.graph.edge_count(),
            }
        for label, index in (("index_a", resources.index_a), ("index_b", resources.index_b)):
            if index is not None:
                body[label] = {
                    "chunks": len(index),
                    "provider_fingerprint": index.provider_fingerprint,
                }
        return body

    return app
