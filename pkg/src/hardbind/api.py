"""HTTP API over a workspace: inspection queries, versioned revision
mutations, and background Sudoku evaluation jobs.

Readers always see a complete corpus snapshot; the single writer path
serializes through a lock and swaps the snapshot atomically. Mutations
must carry the corpus version they were drafted against and fail with
409 when it is stale. All endpoints live under /api/v1 and their
response shapes are frozen in docs/api/http.md.
"""

from __future__ import annotations

import threading
import uuid

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .corpus import SENTINEL, infer
from .encodings import SyntheticDecoder
from .errors import DomainError, FormatError, ValidationError
from .inspection import (
    comparative_inspect,
    dataset_concepts,
    implicit_inspect,
    interventional_inspect,
    similarity_inspect,
)
from .revision import LogEntry, apply_action, apply_feedback, save_log, validate_feedback
from .sudoku import (
    ConceptPipeline,
    GroundTruthPipeline,
    evaluate_suite,
    generate_dataset,
)
from .workspace import Workspace


class AppState:
    def __init__(self, workspace: Workspace):
        self.workspace = workspace
        self.corpus = workspace.corpus
        self.log = list(workspace.log)
        self.lock = threading.Lock()
        self.jobs: dict = {}
        self._inferred_version = None
        self._inferred = None

    def inferred(self):
        """Dataset concepts for the current corpus version, cached."""
        corpus = self.corpus
        if self._inferred_version != corpus.version:
            self._inferred = dataset_concepts(corpus, self.workspace.scenes)
            self._inferred_version = corpus.version
        return self._inferred


def _http_error(exc) -> HTTPException:
    if isinstance(exc, DomainError):
        return HTTPException(status_code=422, detail=str(exc))
    if isinstance(exc, (ValidationError, FormatError)):
        return HTTPException(status_code=400, detail=str(exc))
    return HTTPException(status_code=500, detail=str(exc))


class ReviseRequest(BaseModel):
    version: int
    actor: str = "api"
    action: dict


class ReviseDocumentRequest(BaseModel):
    version: int
    document: dict


class InterveneRequest(BaseModel):
    scene: int
    slot: int | None = None
    block: int
    concept: int
    entry: int | None = None


class SudokuJobRequest(BaseModel):
    variant: str
    k_empty: int = 30
    n_examples: int = 5
    count: int = Field(default=20, le=500)
    pipeline: str = "ncb"
    seed: int = 0
    classifier_seeds: int = 10


def _card_payload(card) -> dict:
    return {
        "block": card.block,
        "concept_id": card.concept_id,
        "prototype": [float(x) for x in card.prototype],
        "exemplars": [[float(x) for x in e] for e in card.exemplars],
        "matched": [
            {"scene": m.scene_id, "slot": m.slot_id, "factors": _factors_payload(m.factors)}
            for m in card.matched
        ],
        "population_share": card.population_share,
    }


def _factors_payload(factors):
    if factors is None:
        return None
    return {k: list(v) if isinstance(v, tuple) else v for k, v in factors.items()}


def create_app(workspace: Workspace, static_dir=None) -> FastAPI:
    app = FastAPI(title="hardbind", version="1")
    state = AppState(workspace)
    app.state.hardbind = state

    @app.get("/api/v1/meta")
    def meta():
        corpus = state.corpus
        return {
            "corpus_version": corpus.version,
            "n_blocks": corpus.n_blocks,
            "block_dim": corpus.block_dim,
            "n_scenes": len(workspace.scenes),
            "schema": workspace.schema.to_dict(),
        }

    @app.get("/api/v1/blocks")
    def blocks():
        corpus = state.corpus
        factor_of = {v: k for k, v in workspace.encoder.config.factor_to_block.items()}
        return [
            {
                "block": j,
                "n_concepts": b.n_concepts,
                "live": b.live_concepts(),
                "sentinel_present": SENTINEL in b.present_concepts(),
                "deleted_to_single": b.deleted_to_single,
                "masked": sorted(b.masked),
                "mapped_factor": factor_of.get(j),
            }
            for j, b in enumerate(corpus.blocks)
        ]

    @app.get("/api/v1/blocks/{j}/concepts")
    def concepts(j: int):
        corpus = state.corpus
        if not (0 <= j < corpus.n_blocks):
            raise HTTPException(status_code=404, detail=f"block {j} out of range")
        block = corpus.blocks[j]
        rows = state.inferred()
        out = []
        for v in block.present_concepts():
            hits = sum(1 for r in rows if r[2][j] == v)
            out.append(
                {
                    "id": v,
                    "n_entries": len(block.entries_of(v)),
                    "population_share": hits / len(rows) if rows else 0.0,
                    "masked": v in block.masked,
                }
            )
        return out

    @app.get("/api/v1/blocks/{j}/concepts/{v}")
    def concept_card(j: int, v: int, max_samples: int = 8):
        try:
            card = implicit_inspect(
                state.corpus, j, v, max_samples=max_samples, inferred=state.inferred()
            )
        except (DomainError, ValidationError) as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return _card_payload(card)

    @app.get("/api/v1/blocks/{j}/compare")
    def compare(j: int, v1: int, v2: int):
        try:
            c1, c2, dist = comparative_inspect(
                state.corpus, j, v1, v2, inferred=state.inferred()
            )
        except (DomainError, ValidationError) as exc:
            raise _http_error(exc) from exc
        return {
            "first": _card_payload(c1),
            "second": _card_payload(c2),
            "prototype_distance": dist,
        }

    @app.get("/api/v1/blocks/{j}/concepts/{v}/similar")
    def similar(j: int, v: int):
        try:
            report = similarity_inspect(state.corpus, j, v)
        except (DomainError, ValidationError) as exc:
            raise _http_error(exc) from exc
        return {
            "block": report.block,
            "anchor": report.anchor,
            "ranked": [{"id": c, "distance": d} for c, d in report.ranked],
        }

    @app.post("/api/v1/intervene")
    def intervene(req: InterveneRequest):
        if not (0 <= req.scene < len(workspace.scenes)):
            raise HTTPException(status_code=404, detail=f"scene {req.scene} out of range")
        scene = workspace.scenes[req.scene]
        slot = req.slot
        if slot is None:
            if not scene.object_slot_ids:
                raise HTTPException(status_code=422, detail="scene has no object slots")
            slot = scene.object_slot_ids[0]
        decoder = SyntheticDecoder(workspace.encoder)
        try:
            result = interventional_inspect(
                scene, slot, req.block, req.concept, state.corpus, decoder, req.entry
            )
        except (DomainError, ValidationError) as exc:
            raise _http_error(exc) from exc
        return {
            "before": _factors_payload(result.before),
            "after": _factors_payload(result.after),
            "changed": result.changed,
            "no_visible_effect": result.no_visible_effect,
        }

    @app.get("/api/v1/scenes")
    def scenes(offset: int = 0, limit: int = 50):
        out = []
        for i, scene in enumerate(workspace.scenes[offset : offset + limit], start=offset):
            out.append(
                {
                    "scene": i,
                    "objects": [
                        {"slot": slot, "factors": _factors_payload(obj.factor_values)}
                        for obj, slot in zip(scene.objects, scene.object_slot_ids)
                    ],
                }
            )
        return {"count": len(workspace.scenes), "scenes": out}

    @app.get("/api/v1/infer/{scene_id}")
    def infer_scene(scene_id: int, top_k: int = 1):
        if not (0 <= scene_id < len(workspace.scenes)):
            raise HTTPException(status_code=404, detail=f"scene {scene_id} out of range")
        scene = workspace.scenes[scene_id]
        slots = infer(state.corpus, scene.encoding, top_k=top_k)
        return {
            "scene": scene_id,
            "corpus_version": state.corpus.version,
            "slots": [
                {
                    "slot": cs.slot_id,
                    "concepts": cs.concept_ids,
                    "probabilities": cs.probabilities,
                }
                for cs in slots
            ],
        }

    def _commit(new_corpus, entries):
        state.corpus = new_corpus
        state.log.extend(entries)
        save_log(workspace.log_path, entries)

    @app.post("/api/v1/revise")
    def revise(req: ReviseRequest):
        with state.lock:
            if req.version != state.corpus.version:
                raise HTTPException(
                    status_code=409,
                    detail=f"stale version {req.version}, corpus is at "
                    f"{state.corpus.version}",
                )
            before = state.corpus.version
            try:
                new_corpus = apply_action(state.corpus, req.action)
            except (DomainError, ValidationError, FormatError) as exc:
                raise _http_error(exc) from exc
            entry = LogEntry(
                action=req.action,
                actor=req.actor,
                version_before=before,
                version_after=new_corpus.version,
            )
            _commit(new_corpus, [entry])
            return {"corpus_version": state.corpus.version}

    @app.post("/api/v1/revise-document")
    def revise_document(req: ReviseDocumentRequest):
        with state.lock:
            if req.version != state.corpus.version:
                raise HTTPException(
                    status_code=409,
                    detail=f"stale version {req.version}, corpus is at "
                    f"{state.corpus.version}",
                )
            try:
                document = validate_feedback(req.document)
                new_corpus, entries = apply_feedback(state.corpus, document)
            except (DomainError, ValidationError, FormatError) as exc:
                raise _http_error(exc) from exc
            _commit(new_corpus, entries)
            return {
                "corpus_version": state.corpus.version,
                "applied": len(entries),
            }

    @app.get("/api/v1/log")
    def log():
        return [e.to_dict() for e in state.log]

    def _run_sudoku_job(job_id: str, req: SudokuJobRequest, corpus):
        try:
            samples = generate_dataset(
                req.variant,
                req.k_empty,
                req.n_examples,
                req.count,
                req.seed,
                encoder=workspace.encoder,
            )
            if req.pipeline == "gt":
                factory = lambda _cell: GroundTruthPipeline()  # noqa: E731
            else:
                factory = lambda _cell: ConceptPipeline(  # noqa: E731
                    corpus, seeds=tuple(range(req.classifier_seeds))
                )
            report = evaluate_suite(samples, factory)
            report["corpus_version"] = corpus.version
            self_jobs = state.jobs[job_id]
            self_jobs["status"] = "done"
            self_jobs["result"] = report
        except Exception as exc:  # job errors surface via polling
            state.jobs[job_id]["status"] = "failed"
            state.jobs[job_id]["error"] = f"{type(exc).__name__}: {exc}"

    @app.post("/api/v1/jobs/sudoku-eval")
    def submit_sudoku(req: SudokuJobRequest):
        variant_blocks = 16 if req.variant == "full" else 8
        if req.variant not in ("easy", "full"):
            raise HTTPException(status_code=400, detail=f"unknown variant {req.variant!r}")
        if variant_blocks != state.corpus.n_blocks:
            raise HTTPException(
                status_code=422,
                detail=f"variant {req.variant!r} needs {variant_blocks} blocks, "
                f"workspace corpus has {state.corpus.n_blocks}",
            )
        if req.pipeline not in ("gt", "ncb"):
            raise HTTPException(status_code=400, detail=f"unknown pipeline {req.pipeline!r}")
        job_id = uuid.uuid4().hex
        state.jobs[job_id] = {"status": "running", "request": req.model_dump()}
        thread = threading.Thread(
            target=_run_sudoku_job, args=(job_id, req, state.corpus), daemon=True
        )
        thread.start()
        return {"job_id": job_id}

    @app.get("/api/v1/jobs/{job_id}")
    def job_status(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        return job

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
