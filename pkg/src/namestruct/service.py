"""HTTP facade over active-learning sessions.

One process hosts a registry of named corpora and any number of sessions.
Requests touching the same session are serialized through a per-session lock;
sessions are checkpointed to disk after every mutation so a restart can
resume them. Errors use the shape ``{"error": ..., "code": ...}``.
"""

from __future__ import annotations

import math
import random
import threading
import uuid
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import activeloop, seqmodel
from .activeloop import LoopParams, SessionComplete, SessionEngine, StateError, UnknownMentionError
from .corpus import Corpus, EmptyMentionError, SchemaError, load_corpus, tokenize
from .embed import build_provider


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


class CreateSessionRequest(BaseModel):
    corpus: str = "default"
    k: int = Field(default=50, ge=0)
    p: int = Field(default=15, ge=0)
    q: int = Field(default=15, ge=0)
    budget: int = Field(default=20, ge=0)
    seed: int = 0
    test_fraction: float | None = Field(default=None, gt=0.0, lt=1.0)


class LabelRequest(BaseModel):
    mention_id: str
    labels: list[str]


class FeedbackRequest(BaseModel):
    verdicts: dict[str, str]


class PredictRequest(BaseModel):
    mention: str


class ManagedSession:
    def __init__(self, session_id: str, engine: SessionEngine):
        self.id = session_id
        self.engine = engine
        self.lock = threading.Lock()

    @property
    def status(self) -> str:
        if self.engine.state.stop_reason is not None:
            return "stopped"
        if self.engine.state.pending_verification is not None:
            return "awaiting_verification"
        return "awaiting_label"


class SessionRegistry:
    """In-memory sessions plus the corpora they can be created over."""

    def __init__(
        self,
        corpora: Mapping[str, Corpus],
        provider_config: dict | None = None,
        state_dir: str | Path | None = None,
    ):
        self.corpora = dict(corpora)
        self.provider_config = provider_config or seqmodel.DEFAULT_PROVIDER_CONFIG
        self.state_dir = Path(state_dir) if state_dir else None
        self.sessions: dict[str, ManagedSession] = {}
        self._lock = threading.Lock()
        if self.state_dir is not None:
            self.state_dir.mkdir(parents=True, exist_ok=True)
            self._restore_sessions()

    def _restore_sessions(self) -> None:
        for path in sorted(self.state_dir.glob("*.session.json")):
            session_id = path.name.removesuffix(".session.json")
            engine = activeloop.load_session(path)
            engine.provider = build_provider(engine.model.provider_config)
            self.sessions[session_id] = ManagedSession(session_id, engine)

    def resolve_corpus(self, ref: str) -> Corpus:
        if ref in self.corpora:
            return self.corpora[ref]
        path = Path(ref)
        if path.exists():
            # Ad-hoc corpus loads reuse the default corpus's schema.
            default = self.corpora.get("default")
            if default is None:
                raise ApiError(404, "unknown_corpus", f"no corpus named {ref!r}")
            return load_corpus(path, default.schema)
        raise ApiError(404, "unknown_corpus", f"no corpus named {ref!r}")

    def create(self, req: CreateSessionRequest) -> ManagedSession:
        corpus = self.resolve_corpus(req.corpus)
        test_mentions = None
        if req.test_fraction is not None:
            if any(m.labels is None for m in corpus.mentions):
                raise ApiError(
                    400, "unlabeled_corpus", "test split requires a gold-labeled corpus"
                )
            ids = [m.id for m in corpus.mentions]
            random.Random(req.seed).shuffle(ids)
            n_train = len(ids) - int(len(ids) * req.test_fraction)
            train_ids = set(ids[:n_train])
            by_id = corpus.by_id()
            test_mentions = tuple(by_id[i] for i in ids[n_train:])
            corpus = Corpus(
                tuple(m for m in corpus.mentions if m.id in train_ids), corpus.schema
            )
        params = LoopParams(k=req.k, p=req.p, q=req.q, budget=req.budget, seed=req.seed)
        engine = SessionEngine(
            corpus,
            params=params,
            provider=build_provider(self.provider_config),
            test_mentions=test_mentions,
        )
        session_id = uuid.uuid4().hex[:12]
        managed = ManagedSession(session_id, engine)
        with self._lock:
            self.sessions[session_id] = managed
        return managed

    def get(self, session_id: str) -> ManagedSession:
        session = self.sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown_session", f"no session {session_id!r}")
        return session

    def checkpoint(self, session: ManagedSession) -> None:
        if self.state_dir is None:
            return
        activeloop.save_session(
            session.engine, self.state_dir / f"{session.id}.session.json"
        )

    def checkpoint_all(self) -> None:
        for session in list(self.sessions.values()):
            with session.lock:
                self.checkpoint(session)


def _status_payload(session: ManagedSession) -> dict:
    engine = session.engine
    return {
        "session_id": session.id,
        "status": session.status,
        "schema": engine.schema.to_dict(),
        **engine.status(),
    }


def create_app(registry: SessionRegistry) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        registry.checkpoint_all()

    app = FastAPI(title="namestruct", docs_url=None, redoc_url=None, lifespan=lifespan)
    app.state.registry = registry

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"error": exc.message, "code": exc.code}
        )

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"error": str(exc.errors()[:1]), "code": "invalid_request"},
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        session = registry.create(req)
        with session.lock:
            try:
                session.engine.select_query()
            except SessionComplete:
                pass
            registry.checkpoint(session)
            return _status_payload(session)

    @app.get("/sessions/{session_id}/next")
    def next_query(session_id: str):
        session = registry.get(session_id)
        with session.lock:
            engine = session.engine
            if session.status != "awaiting_label":
                raise ApiError(
                    409, "wrong_state", f"session is {session.status}, not awaiting_label"
                )
            try:
                mention_id = engine.select_query()
            except SessionComplete as exc:
                raise ApiError(409, "session_complete", str(exc)) from exc
            m = engine.mention(mention_id)
            sig = engine._signatures[mention_id]
            groups = []
            start = 0
            for _, run in sig.groups:
                groups.append(list(range(start, start + run)))
                start += run
            return {
                "mention_id": mention_id,
                "raw": m.raw,
                "tokens": list(m.tokens),
                "groups": groups,
                "informative_score": engine.informative_score(mention_id),
                "representativeness": engine.representativeness(mention_id),
                "pools": engine.state.pool_sizes(),
                "budget_used": engine.state.budget_used,
                "budget_max": engine.params.budget,
            }

    @app.post("/sessions/{session_id}/label")
    def submit_label(session_id: str, req: LabelRequest):
        session = registry.get(session_id)
        with session.lock:
            engine = session.engine
            if session.status != "awaiting_label":
                raise ApiError(
                    409, "wrong_state", f"session is {session.status}, not awaiting_label"
                )
            try:
                summary = engine.submit_label(req.mention_id, req.labels)
            except SessionComplete as exc:
                raise ApiError(409, "session_complete", str(exc)) from exc
            except StateError as exc:
                raise ApiError(409, "wrong_mention", str(exc)) from exc
            except SchemaError as exc:
                raise ApiError(400, "invalid_labels", str(exc)) from exc
            registry.checkpoint(session)
            return {**summary, "status": session.status}

    @app.get("/sessions/{session_id}/verify")
    def verification_batch(session_id: str):
        session = registry.get(session_id)
        with session.lock:
            if session.status != "awaiting_verification":
                raise ApiError(
                    409,
                    "wrong_state",
                    f"session is {session.status}, not awaiting_verification",
                )
            items = session.engine.state.pending_verification or []
            return {
                "high": [it.to_dict() for it in items if it.bucket == "high"],
                "low": [it.to_dict() for it in items if it.bucket == "low"],
            }

    @app.post("/sessions/{session_id}/feedback")
    def submit_feedback(session_id: str, req: FeedbackRequest):
        session = registry.get(session_id)
        with session.lock:
            engine = session.engine
            if session.status != "awaiting_verification":
                raise ApiError(
                    409,
                    "wrong_state",
                    f"session is {session.status}, not awaiting_verification",
                )
            try:
                result = engine.apply_feedback(req.verdicts)
            except UnknownMentionError as exc:
                raise ApiError(400, "unknown_mention", f"unknown mention id {exc}") from exc
            except (StateError, ValueError) as exc:
                raise ApiError(400, "invalid_verdicts", str(exc)) from exc
            registry.checkpoint(session)
            return {**result, "status": session.status}

    @app.post("/sessions/{session_id}/predict")
    def predict(session_id: str, req: PredictRequest):
        session = registry.get(session_id)
        with session.lock:
            engine = session.engine
            if engine.model.train_runs == 0:
                raise ApiError(409, "untrained", "model has not been trained yet")
            try:
                tokens = tokenize(req.mention)
            except EmptyMentionError as exc:
                raise ApiError(400, "empty_mention", str(exc)) from exc
            pred = engine.predict_mention(tokens)
            return {
                "tokens": tokens,
                "labels": pred.labels,
                "confidence": math.exp(pred.log_prob),
            }

    @app.get("/sessions/{session_id}/status")
    def status(session_id: str):
        session = registry.get(session_id)
        with session.lock:
            return _status_payload(session)

    return app
