"""HTTP facade over per-user memory engines.

One engine per user id, created on first touch (loading any snapshot on
disk), each guarded by its own writer lock so requests for one user
serialize while other users proceed. Every successful mutation persists
the snapshot before the response goes out; a failed request persists
nothing, so the on-disk state a client can observe is always the state of
some completed request.

Error bodies are always ``{"code": ..., "message": ...}``.
"""

from __future__ import annotations

import logging
import re
import threading
import time
from pathlib import Path
from typing import Any, Callable

from fastapi import Depends, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import mtm as mtm_ops
from .engine import MemoryEngine, MemoryState, TurnResult
from .errors import (
    HiermemError,
    InvalidArgumentError,
    NotFoundError,
    ProviderUnavailableError,
    SnapshotError,
)
from .model import Config, validate_config
from .persistence import load, save, snapshot_of, archive_segment, user_memory_path, wipe_user
from .providers import Provider, StubProvider

logger = logging.getLogger(__name__)

__all__ = ["create_app", "SessionRegistry", "tier_dump", "bundle_wire"]

_USER_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]{0,63}$")
TIERS = ("stm", "mtm", "lpm")


# ---------------------------------------------------------------------------
# Wire helpers (embeddings stay server-side; they are internal detail)
# ---------------------------------------------------------------------------

def page_wire(page) -> dict[str, Any]:
    return {
        "id": page.id,
        "query": page.query,
        "response": page.response,
        "timestamp": page.timestamp,
        "chain_id": page.chain_id,
        "chain_meta": page.chain_meta,
        "keywords": sorted(page.keywords),
    }


def fact_wire(entry) -> dict[str, Any]:
    return {
        "text": entry.text,
        "source_segment": entry.source_segment,
        "created_at": entry.created_at,
    }


def bundle_wire(bundle) -> dict[str, Any]:
    return {
        "stm_pages": [page_wire(p) for p in bundle.stm_pages],
        "mtm_pages": [{"page": page_wire(p), "score": s} for p, s in bundle.mtm_pages],
        "user_kb_hits": [{"fact": fact_wire(e), "score": s} for e, s in bundle.user_kb_hits],
        "agent_trait_hits": [{"fact": fact_wire(e), "score": s} for e, s in bundle.agent_trait_hits],
        "user_profile": dict(bundle.user_profile),
        "user_traits": {k: v.to_dict() for k, v in sorted(bundle.user_traits.items())},
        "agent_profile": dict(bundle.agent_profile),
    }


def tier_dump(state: MemoryState, tier: str, now: int, config: Config) -> dict[str, Any]:
    """Read-only view of one tier; mtm includes heat at ``now``."""
    if tier == "stm":
        return {
            "tier": "stm",
            "capacity": state.stm.capacity,
            "pages": [page_wire(p) for p in state.stm.pages],
        }
    if tier == "mtm":
        segments = []
        for segment in state.mtm.segments:
            # A dump must never fail on clock skew; clamp dt at zero.
            effective_now = max(now, segment.last_access)
            segments.append({
                "id": segment.id,
                "summary": segment.summary,
                "keywords": sorted(segment.keywords),
                "n_visit": segment.n_visit,
                "l_interaction": segment.l_interaction,
                "last_access": segment.last_access,
                "heat": mtm_ops.heat(segment, effective_now, alpha=config.alpha,
                                     beta=config.beta, gamma=config.gamma, mu=config.mu),
                "page_count": len(segment.pages),
                "pages": [page_wire(p) for p in segment.pages],
            })
        return {
            "tier": "mtm",
            "capacity": state.mtm.capacity,
            "now": now,
            "segments": segments,
        }
    if tier == "lpm":
        persona = state.persona
        return {
            "tier": "lpm",
            "user_profile": dict(persona.user_profile),
            "user_kb": [fact_wire(e) for e in persona.user_kb],
            "user_traits": {k: persona.user_traits[k].to_dict() for k in sorted(persona.user_traits)},
            "agent_profile": dict(persona.agent_profile),
            "agent_traits": [fact_wire(e) for e in persona.agent_traits],
        }
    raise InvalidArgumentError(f"unknown tier {tier!r}; expected one of {', '.join(TIERS)}")


# ---------------------------------------------------------------------------
# Sessions
# ---------------------------------------------------------------------------

class UserSession:
    def __init__(self, engine: MemoryEngine):
        self.engine = engine
        self.lock = threading.Lock()


class SessionRegistry:
    """Engines by user id; one shared provider, one lock per user."""

    def __init__(self, config: Config, provider: Provider, data_dir: Path | None):
        self.config = config
        self.provider = provider
        self.data_dir = data_dir
        self._sessions: dict[str, UserSession] = {}
        self._lock = threading.Lock()

    def get(self, user_id: str) -> UserSession:
        with self._lock:
            session = self._sessions.get(user_id)
            if session is not None:
                return session
            state = None
            if self.data_dir is not None:
                path = user_memory_path(self.data_dir, user_id)
                if path.exists():
                    state = load(path).state
            engine = MemoryEngine(user_id, config=self.config,
                                  provider=self.provider, state=state)
            session = UserSession(engine)
            self._sessions[user_id] = session
            return session

    def drop(self, user_id: str) -> bool:
        with self._lock:
            existed = self._sessions.pop(user_id, None) is not None
        if self.data_dir is not None:
            existed = wipe_user(self.data_dir, user_id) or existed
        return existed

    def persist(self, session: UserSession, now: int,
                evicted=()) -> None:
        if self.data_dir is None:
            return
        for segment in evicted:
            archive_segment(segment, self.data_dir, session.engine.user_id)
        save(snapshot_of(session.engine.state, saved_at=now), self.data_dir)


# ---------------------------------------------------------------------------
# Request bodies
# ---------------------------------------------------------------------------

class RespondBody(BaseModel):
    query: str
    timestamp: int | None = None


class RetrieveBody(BaseModel):
    query: str
    touch: bool = False
    timestamp: int | None = None


class MessageBody(BaseModel):
    query: str
    response: str = ""
    timestamp: int | None = None


# ---------------------------------------------------------------------------
# App factory
# ---------------------------------------------------------------------------

def create_app(config: Config | None = None, provider: Provider | None = None,
               data_dir: Path | str | None = None, auth_token: str | None = None,
               clock: Callable[[], int] | None = None) -> FastAPI:
    """Build the service with explicit dependencies (tests inject all of them)."""
    config = validate_config(config or Config())
    provider = provider if provider is not None else StubProvider(dim=config.embedding_dim)
    registry = SessionRegistry(config, provider,
                               Path(data_dir) if data_dir is not None else None)
    clock = clock or (lambda: int(time.time()))

    app = FastAPI(title="hiermem", docs_url=None, redoc_url=None)
    app.state.registry = registry

    def check_auth(request: Request) -> None:
        if auth_token is None:
            return
        supplied = request.headers.get("authorization", "")
        if supplied != f"Bearer {auth_token}":
            raise _Unauthorized()

    def checked_user(user_id: str) -> str:
        if not _USER_ID_RE.match(user_id):
            raise InvalidArgumentError(f"invalid user id: {user_id!r}")
        return user_id

    # -- error mapping --------------------------------------------------

    def _error(status: int, code: str, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"code": code, "message": message})

    @app.exception_handler(_Unauthorized)
    async def _unauthorized_handler(request: Request, exc: "_Unauthorized"):
        return _error(401, "unauthorized", "missing or invalid bearer token")

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first.get("loc", ()))
        return _error(400, "invalid_argument", f"{where}: {first.get('msg', 'invalid request')}")

    @app.exception_handler(InvalidArgumentError)
    async def _invalid_handler(request: Request, exc: InvalidArgumentError):
        return _error(400, "invalid_argument", str(exc))

    @app.exception_handler(NotFoundError)
    async def _notfound_handler(request: Request, exc: NotFoundError):
        return _error(404, "not_found", str(exc))

    @app.exception_handler(ProviderUnavailableError)
    async def _provider_handler(request: Request, exc: ProviderUnavailableError):
        return _error(503, "provider_unavailable", str(exc))

    @app.exception_handler(SnapshotError)
    async def _snapshot_handler(request: Request, exc: SnapshotError):
        return _error(500, "snapshot_error", str(exc))

    @app.exception_handler(HiermemError)
    async def _fallback_handler(request: Request, exc: HiermemError):
        return _error(500, "internal_error", str(exc))

    # -- endpoints --------------------------------------------------------

    @app.get("/healthz")
    def healthz() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/v1/users/{user_id}/respond", dependencies=[Depends(check_auth)])
    def respond(user_id: str, body: RespondBody) -> dict[str, Any]:
        user_id = checked_user(user_id)
        if not body.query:
            raise InvalidArgumentError("query must be non-empty")
        session = registry.get(user_id)
        now = body.timestamp if body.timestamp is not None else clock()
        with session.lock:
            result: TurnResult = session.engine.respond(body.query, now)
            registry.persist(session, now, evicted=result.evicted)
            counts = session.engine.tier_counts()
        return {
            "user_id": user_id,
            "response": result.response,
            "counts": counts,
            "stats": {
                "provider_calls": result.provider_calls,
                "tokens_in": result.tokens_in,
                "tokens_out": result.tokens_out,
                "recalled_tokens": result.recalled_tokens,
            },
            "evicted_segment_ids": [s.id for s in result.evicted],
            "promoted_segment_ids": list(result.promoted_segment_ids),
        }

    @app.post("/v1/users/{user_id}/retrieve", dependencies=[Depends(check_auth)])
    def retrieve(user_id: str, body: RetrieveBody) -> dict[str, Any]:
        user_id = checked_user(user_id)
        if not body.query:
            raise InvalidArgumentError("query must be non-empty")
        session = registry.get(user_id)
        now = body.timestamp if body.timestamp is not None else clock()
        with session.lock:
            bundle = session.engine.retrieve(body.query, now, touch=body.touch)
            if body.touch:
                registry.persist(session, now)
        return {"user_id": user_id, "touch": body.touch, "bundle": bundle_wire(bundle)}

    @app.get("/v1/users/{user_id}/memory/{tier}", dependencies=[Depends(check_auth)])
    def memory(user_id: str, tier: str, now: int | None = None) -> dict[str, Any]:
        user_id = checked_user(user_id)
        if tier not in TIERS:
            raise InvalidArgumentError(f"unknown tier {tier!r}; expected one of {', '.join(TIERS)}")
        session = registry.get(user_id)
        with session.lock:
            state = session.engine.state
        return tier_dump(state, tier, now if now is not None else clock(), config)

    @app.post("/v1/users/{user_id}/messages", dependencies=[Depends(check_auth)])
    def messages(user_id: str, body: MessageBody) -> dict[str, Any]:
        user_id = checked_user(user_id)
        if not body.query:
            raise InvalidArgumentError("query must be non-empty")
        session = registry.get(user_id)
        now = body.timestamp if body.timestamp is not None else clock()
        with session.lock:
            report = session.engine.ingest(body.query, body.response, now)
            registry.persist(session, now, evicted=report.evicted)
            counts = session.engine.tier_counts()
        return {
            "user_id": user_id,
            "ingested": True,
            "counts": counts,
            "evicted_segment_ids": [s.id for s in report.evicted],
            "promoted_segment_ids": list(report.promoted_segment_ids),
        }

    @app.delete("/v1/users/{user_id}", dependencies=[Depends(check_auth)])
    def wipe(user_id: str) -> dict[str, Any]:
        user_id = checked_user(user_id)
        return {"user_id": user_id, "deleted": registry.drop(user_id)}

    return app


class _Unauthorized(Exception):
    pass
