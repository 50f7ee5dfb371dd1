"""HTTP session service for interactive labeling.

Each session wraps one :class:`~activemetric.harness.ActiveSession`, so a
browser client walking next/answer takes exactly the protocol path the
automated oracle takes.  Requests for one session are serialized behind a
lock; distinct sessions proceed in parallel.  Sessions live in process
memory only.
"""

import dataclasses
import threading
import uuid
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware

from .core import Dataset
from .errors import (
    BudgetExhausted,
    ContradictionError,
    EmptyHistory,
    IoError,
    NoCandidates,
    ParseError,
)
from .harness import (
    ActiveSession,
    RunConfig,
    config_dataset,
    config_from_dict,
    config_to_dict,
)


@dataclasses.dataclass
class _Entry:
    session: ActiveSession
    lock: threading.Lock


class SessionRegistry:
    """Live sessions keyed by id, with per-session request serialization."""

    def __init__(self) -> None:
        self._entries: dict[str, _Entry] = {}
        self._guard = threading.Lock()

    def add(self, session: ActiveSession) -> str:
        sid = uuid.uuid4().hex[:12]
        with self._guard:
            self._entries[sid] = _Entry(session, threading.Lock())
        return sid

    def get(self, sid: str) -> _Entry:
        with self._guard:
            entry = self._entries.get(sid)
        if entry is None:
            raise HTTPException(404, f"unknown session {sid!r}")
        return entry

    def drop(self, sid: str) -> None:
        with self._guard:
            if self._entries.pop(sid, None) is None:
                raise HTTPException(404, f"unknown session {sid!r}")


def _progress(session: ActiveSession) -> dict[str, int]:
    return {
        "spent": session.effective_spent(),
        "budget": session.cfg.budget,
        "loops": session.loops,
        "neighborhoods": len(session.qs.neighborhoods),
    }


def _weights_now(session: ActiveSession) -> np.ndarray:
    if session.finalized:
        return session.finalize().feature_weights
    return session.metric_now().feature_weights()


def _embedding(session: ActiveSession) -> dict[str, Any]:
    """Points projected onto the two heaviest features, metric-scaled."""
    weights = _weights_now(session)
    order = np.argsort(-weights, kind="stable")
    top = order[:2] if weights.size >= 2 else np.array([0, 0])
    coords = session.data.points[:, top] * np.sqrt(weights[top])
    return {
        "features": [int(f) for f in top],
        "coordinates": [[float(a), float(b)] for a, b in coords],
    }


def _clusters_payload(session: ActiveSession) -> dict[str, Any]:
    if not session.finalized and (session.exhausted or session.done):
        try:
            session.finalize()
        except EmptyHistory:
            # budget gone before the first loop completed; show the
            # identity-metric clustering rather than failing
            pass
    assignment = session.cluster_now()
    return {
        "labels": [int(c) for c in assignment.labels],
        "n_clusters": assignment.n_clusters,
        "sizes": [int(s) for s in assignment.cluster_sizes()],
        "finalized": session.finalized,
    }


def _parse_config(raw: Any, defaults: RunConfig | None) -> RunConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, Mapping):
        raise HTTPException(400, "config must be a mapping")
    merged: dict[str, Any] = dict(config_to_dict(defaults)) if defaults else {}
    merged.update(raw)
    merged.pop("reps", None)
    try:
        return config_from_dict(merged)
    except (TypeError, ValueError) as exc:
        raise HTTPException(400, f"bad config: {exc}") from None


def create_app(defaults: RunConfig | None = None,
               data: Dataset | None = None,
               data_dir: str | None = None) -> FastAPI:
    """Build the service around optional server-wide defaults.

    ``data`` is the fallback dataset for configs that name no source;
    relative dataset paths in a config resolve against ``data_dir``.
    """
    app = FastAPI(title="activemetric")
    # The labeling page may be served from another origin than the API.
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    registry = SessionRegistry()
    app.state.registry = registry

    def materialize(cfg: RunConfig) -> Dataset:
        if cfg.setting is None and cfg.dataset is None:
            if data is None:
                raise HTTPException(400, "config names no dataset and the "
                                         "server has no default")
            return data
        if cfg.dataset is not None and data_dir is not None \
                and not Path(cfg.dataset).is_absolute():
            cfg = dataclasses.replace(cfg, dataset=str(Path(data_dir) / cfg.dataset))
        try:
            return config_dataset(cfg)
        except (IoError, ParseError, ValueError) as exc:
            raise HTTPException(400, f"bad dataset: {exc}") from None

    @app.post("/sessions", status_code=201)
    def create_session(body: dict[str, Any] | None = None) -> dict[str, Any]:
        payload = body or {}
        cfg = _parse_config(payload.get("config"), defaults)
        dataset = materialize(cfg)
        try:
            session = ActiveSession(dataset, cfg)
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from None
        sid = registry.add(session)
        return {
            "session_id": sid,
            "n": dataset.n,
            "p": dataset.p,
            "budget": cfg.budget,
            "strategy": cfg.strategy,
        }

    @app.get("/sessions/{sid}/next")
    def next_query(sid: str) -> dict[str, Any]:
        entry = registry.get(sid)
        with entry.lock:
            try:
                view = entry.session.next_query()
            except (BudgetExhausted, NoCandidates) as exc:
                raise HTTPException(410, str(exc)) from None
            return {
                "pair": list(view.pair),
                "target": view.target,
                "neighborhood_probed": view.neighborhood,
                "progress": _progress(entry.session),
            }

    @app.post("/sessions/{sid}/answer")
    def answer(sid: str, body: dict[str, Any]) -> dict[str, Any]:
        entry = registry.get(sid)
        pair = body.get("pair")
        relation = body.get("relation")
        if (not isinstance(pair, (list, tuple)) or len(pair) != 2
                or not all(isinstance(i, int) for i in pair)):
            raise HTTPException(400, "pair must be two instance indices")
        with entry.lock:
            try:
                out = entry.session.answer((pair[0], pair[1]), str(relation))
            except ContradictionError as exc:
                raise HTTPException(409, str(exc)) from None
            except (BudgetExhausted, NoCandidates) as exc:
                raise HTTPException(410, str(exc)) from None
            except ValueError as exc:
                raise HTTPException(400, str(exc)) from None
            return {
                "accepted": out.accepted,
                "implied_constraints": out.implied,
                "new_neighborhood": out.new_neighborhood,
                "loop_completed": out.loop_completed,
                "progress": _progress(entry.session),
            }

    @app.get("/sessions/{sid}/state")
    def state(sid: str) -> dict[str, Any]:
        entry = registry.get(sid)
        with entry.lock:
            session = entry.session
            store = session.effective_store()
            groups = session.qs.neighborhoods.neighborhoods
            return {
                "neighborhoods": [sorted(g) for g in groups],
                "constraints": {"similar": len(store.similar),
                                "dissimilar": len(store.dissimilar)},
                "budget": {"spent": session.effective_spent(),
                           "total": session.cfg.budget},
                "loops": session.loops,
                "exhausted": session.exhausted,
                "done": session.done,
                "feature_names": list(
                    session.data.feature_names
                    or (f"x{k}" for k in range(1, session.data.p + 1))),
                "feature_weights": [float(w) for w in _weights_now(session)],
                "embedding": _embedding(session),
            }

    @app.get("/sessions/{sid}/clusters")
    def clusters(sid: str) -> dict[str, Any]:
        entry = registry.get(sid)
        with entry.lock:
            return _clusters_payload(entry.session)

    @app.delete("/sessions/{sid}", status_code=204)
    def teardown(sid: str) -> Response:
        registry.drop(sid)
        return Response(status_code=204)

    return app
