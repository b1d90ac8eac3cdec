"""FastAPI application exposing training, prediction, and adaptation.

Models live in an in-memory registry. Each registered model keeps one
shared base memory plus per-user adaptive overlays created on demand
(a fork per user), so personalization never leaks between clients and
a user's overlay can be reset without touching the trained base.
"""

from __future__ import annotations

import argparse
import threading
import uuid

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response

from .. import __version__
from ..codebook import build_codebook
from ..dataio import Dataset, MarkovSpec, SessionRecord, generate_synthetic
from ..errors import HyperseqError, ModelFormatError
from ..evaluation import evaluate, sliding_window_accuracy
from ..model import Model, ModelConfig, train
from . import schemas

__all__ = ["create_app", "main"]


class _Entry:
    __slots__ = ("model", "overlays", "lock")

    def __init__(self, model: Model):
        self.model = model
        self.overlays: dict[str, Model] = {}
        self.lock = threading.RLock()

    def scorer_for(self, user: str | None) -> Model:
        if user is not None and user in self.overlays:
            return self.overlays[user]
        return self.model

    def overlay_for(self, user: str) -> Model:
        overlay = self.overlays.get(user)
        if overlay is None:
            overlay = self.model.fork()
            self.overlays[user] = overlay
        return overlay


class ModelStore:
    """Thread-safe id → model registry."""

    def __init__(self) -> None:
        self._entries: dict[str, _Entry] = {}
        self._lock = threading.RLock()

    def add(self, model: Model) -> str:
        model_id = uuid.uuid4().hex[:12]
        with self._lock:
            self._entries[model_id] = _Entry(model)
        return model_id

    def get(self, model_id: str) -> _Entry:
        with self._lock:
            entry = self._entries.get(model_id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"no model with id {model_id!r}")
        return entry

    def remove(self, model_id: str) -> None:
        with self._lock:
            if model_id not in self._entries:
                raise HTTPException(status_code=404, detail=f"no model with id {model_id!r}")
            del self._entries[model_id]

    def items(self) -> list[tuple[str, _Entry]]:
        with self._lock:
            return list(self._entries.items())


def _config_schema(config: ModelConfig) -> schemas.ModelConfigSchema:
    return schemas.ModelConfigSchema(
        dim=config.dim,
        n=config.n,
        shift=config.shift,
        seed=config.seed,
        adaptive=config.adaptive,
        adapt_weight=config.adapt_weight,
        entry_bits=config.entry_bits,
    )


def _info(model_id: str, entry: _Entry) -> schemas.ModelInfo:
    model = entry.model
    return schemas.ModelInfo(
        model_id=model_id,
        config=_config_schema(model.config),
        labels=model.codebook.label_list(),
        train_ngram_count=model.train_ngram_count,
        adapt_event_count=model.adapt_event_count,
        adapted_users=sorted(entry.overlays),
    )


def _dataset(sessions: list[schemas.SessionIn], labels: set[str]) -> Dataset:
    records = [SessionRecord(s.user, s.session, list(s.states)) for s in sessions]
    universe = {state for s in sessions for state in s.states} | labels
    return Dataset(sessions=records, label_universe=universe)


def create_app(store: ModelStore | None = None) -> FastAPI:
    store = store if store is not None else ModelStore()
    app = FastAPI(title="hyperseq", version=__version__)
    app.state.store = store

    @app.exception_handler(HyperseqError)
    async def _domain_error(_request: Request, exc: HyperseqError) -> JSONResponse:
        status = 422 if isinstance(exc, ModelFormatError) else 400
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.get("/models", response_model=schemas.ModelList)
    def list_models() -> schemas.ModelList:
        return schemas.ModelList(models=[_info(mid, entry) for mid, entry in store.items()])

    @app.post("/models/train", response_model=schemas.TrainResponse)
    def train_model(request: schemas.TrainRequest) -> schemas.TrainResponse:
        cfg = ModelConfig(**request.config.model_dump())
        data = _dataset(request.sessions, set())
        codebook = build_codebook(data.label_universe, cfg.dim, cfg.seed)
        model = train(data.state_sequences(), cfg, codebook)
        model_id = store.add(model)
        return schemas.TrainResponse(
            model_id=model_id,
            train_ngram_count=model.train_ngram_count,
            labels=model.codebook.label_list(),
        )

    @app.post("/models/upload", response_model=schemas.ModelInfo)
    async def upload_model(request: Request) -> schemas.ModelInfo:
        data = await request.body()
        model = Model.from_bytes(data)
        model_id = store.add(model)
        return _info(model_id, store.get(model_id))

    @app.get("/models/{model_id}", response_model=schemas.ModelInfo)
    def model_info(model_id: str) -> schemas.ModelInfo:
        return _info(model_id, store.get(model_id))

    @app.get("/models/{model_id}/file")
    def download_model(model_id: str) -> Response:
        entry = store.get(model_id)
        with entry.lock:
            payload = entry.model.to_bytes()
        return Response(content=payload, media_type="application/octet-stream")

    @app.delete("/models/{model_id}")
    def delete_model(model_id: str) -> dict:
        store.remove(model_id)
        return {"deleted": model_id}

    @app.post("/models/{model_id}/predict", response_model=schemas.PredictResponse)
    def predict(model_id: str, request: schemas.PredictRequest) -> schemas.PredictResponse:
        entry = store.get(model_id)
        with entry.lock:
            scorer = entry.scorer_for(request.user)
            result = scorer.predict_next(request.prefix)
            return schemas.PredictResponse(
                predicted=result.predicted,
                scores=result.scores,
                user_specific=scorer is not entry.model,
            )

    @app.post("/models/{model_id}/adapt", response_model=schemas.AdaptResponse)
    def adapt(model_id: str, request: schemas.AdaptRequest) -> schemas.AdaptResponse:
        entry = store.get(model_id)
        with entry.lock:
            target = entry.model if request.user is None else entry.overlay_for(request.user)
            target.adapt(request.window)
            return schemas.AdaptResponse(
                model_id=model_id,
                user=request.user,
                adapt_event_count=target.adapt_event_count,
            )

    @app.delete("/models/{model_id}/users/{user}")
    def reset_user(model_id: str, user: str) -> dict:
        entry = store.get(model_id)
        with entry.lock:
            if user not in entry.overlays:
                raise HTTPException(status_code=404, detail=f"no adaptive state for user {user!r}")
            del entry.overlays[user]
        return {"reset": user}

    @app.post("/models/{model_id}/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate_model(model_id: str, request: schemas.EvaluateRequest) -> schemas.EvaluateResponse:
        entry = store.get(model_id)
        with entry.lock:
            data = _dataset(request.sessions, set(entry.model.codebook.labels))
            report = evaluate(entry.model, data, adaptive_enabled=request.adaptive)
        sliding = None
        if request.adaptive:
            sliding = sliding_window_accuracy(report.events, request.window)
        return schemas.EvaluateResponse(
            overall_accuracy=report.overall_accuracy,
            per_user_accuracy=report.per_user_accuracy,
            events=len(report.events),
            skipped_sessions=report.skipped_sessions,
            sliding=sliding,
        )

    @app.post("/datasets/synthetic", response_model=schemas.GenerateResponse)
    def synthetic(request: schemas.GenerateRequest) -> schemas.GenerateResponse:
        if request.spec is None:
            spec = MarkovSpec.uniform([f"s{i}" for i in range(9)])
        else:
            spec = MarkovSpec(
                labels=tuple(request.spec.labels),
                transition=np.asarray(request.spec.transition),
                initial=np.asarray(request.spec.initial),
            )
        data = generate_synthetic(
            spec,
            request.users,
            request.sessions_per_user,
            request.session_len,
            request.seed,
            request.per_user_perturbation,
        )
        return schemas.GenerateResponse(
            sessions=[
                schemas.SessionIn(user=r.user_id, session=r.session_index, states=r.states)
                for r in data.sessions
            ],
            labels=sorted(data.label_universe),
        )

    return app


def main(argv: list[str] | None = None) -> None:
    import uvicorn

    parser = argparse.ArgumentParser(prog="hyperseq-serve", description="run the prediction service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args(argv)
    uvicorn.run(create_app(), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
