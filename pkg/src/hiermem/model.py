"""Domain types and configuration for the memory engine.

Every type here is a plain value: construct it once, then derive updated
copies with ``dataclasses.replace``. Live state is only ever rewritten by
the tier modules (``stm``, ``mtm``, ``lpm``), which take a value in and
return a new value out, so a failed operation can never leave a tier
half-updated.

Serialization convention (shared with :mod:`hiermem.persistence`): dicts
produced by ``to_dict`` list fields in declaration order, map-valued fields
are sorted by key, keyword sets are sorted lists, and timestamps are plain
integers.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping

from .errors import ConfigError, InvalidArgumentError

__all__ = [
    "DialoguePage",
    "TraitValue",
    "FactEntry",
    "Segment",
    "PersonaStore",
    "RetrievalBundle",
    "TraitSchema",
    "Config",
    "new_page",
    "validate_config",
    "default_trait_schema",
]


# ---------------------------------------------------------------------------
# Dialogue pages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DialoguePage:
    """One query/response exchange.

    Attributes:
        id: Unique within one user's memory; allocated by the caller.
        query: User utterance, never empty.
        response: Assistant utterance, may be empty.
        timestamp: Seconds since epoch, non-negative.
        chain_id: Topic chain this page belongs to; assigned on short-term
            append (the id of the chain's founding page).
        chain_meta: Summary of the chain up to and including this page.
            Committed metas on earlier pages are never rewritten.
        keywords: Lowercase terms; populated before the page enters the
            mid-term store.
        embedding: Dense vector of the page text; populated before the page
            enters the mid-term store.
    """

    id: int
    query: str
    response: str
    timestamp: int
    chain_id: int | None = None
    chain_meta: str = ""
    keywords: frozenset[str] = frozenset()
    embedding: tuple[float, ...] | None = None

    @property
    def text(self) -> str:
        """Query and response joined; the unit fed to keyword/embedding ops."""
        if self.response:
            return f"{self.query} {self.response}"
        return self.query

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "query": self.query,
            "response": self.response,
            "timestamp": self.timestamp,
            "chain_id": self.chain_id,
            "chain_meta": self.chain_meta,
            "keywords": sorted(self.keywords),
            "embedding": None if self.embedding is None else list(self.embedding),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "DialoguePage":
        embedding = data.get("embedding")
        return cls(
            id=int(data["id"]),
            query=data["query"],
            response=data.get("response", ""),
            timestamp=int(data["timestamp"]),
            chain_id=data.get("chain_id"),
            chain_meta=data.get("chain_meta", ""),
            keywords=frozenset(data.get("keywords", ())),
            embedding=None if embedding is None else tuple(float(x) for x in embedding),
        )


_page_id_seq = itertools.count(1)


def new_page(query: str, response: str, timestamp: int, *, page_id: int | None = None) -> DialoguePage:
    """Construct a fresh page with no chain assignment.

    When ``page_id`` is omitted a process-wide counter supplies one, so two
    calls with identical arguments still yield distinct ids. Callers that
    need a replayable id stream (the engine does) pass their own counter
    value instead.
    """
    if not query:
        raise InvalidArgumentError("query must be non-empty")
    if timestamp < 0:
        raise InvalidArgumentError("timestamp must be >= 0")
    if page_id is None:
        page_id = next(_page_id_seq)
    return DialoguePage(id=page_id, query=query, response=response, timestamp=int(timestamp))


# ---------------------------------------------------------------------------
# Persona values
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraitValue:
    """Current value of one trait dimension; merges are last-write-wins."""

    value: str
    confidence: float = 1.0
    last_updated: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "confidence": self.confidence,
            "last_updated": self.last_updated,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TraitValue":
        return cls(
            value=data["value"],
            confidence=float(data.get("confidence", 1.0)),
            last_updated=int(data.get("last_updated", 0)),
        )


@dataclass(frozen=True)
class FactEntry:
    """One distilled fact held in a persona queue.

    Attributes:
        text: Non-empty fact text.
        embedding: Dense vector of ``text``.
        source_segment: Id of the mid-term segment the fact was distilled from.
        created_at: Promotion timestamp, seconds since epoch.
    """

    text: str
    embedding: tuple[float, ...]
    source_segment: int
    created_at: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "text": self.text,
            "embedding": list(self.embedding),
            "source_segment": self.source_segment,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FactEntry":
        return cls(
            text=data["text"],
            embedding=tuple(float(x) for x in data["embedding"]),
            source_segment=int(data["source_segment"]),
            created_at=int(data["created_at"]),
        )


# ---------------------------------------------------------------------------
# Mid-term segments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    """A group of topically related pages with usage counters.

    ``summary`` is the running summary of the member pages, ``embedding``
    is the summary's vector, and ``keywords`` is the keyword set of the
    member page texts. ``n_visit`` counts retrieval touches,
    ``l_interaction`` counts pages inserted since the last persona
    promotion, and ``last_access`` is the most recent touch (or creation)
    time.
    """

    id: int
    pages: tuple[DialoguePage, ...]
    summary: str
    keywords: frozenset[str]
    embedding: tuple[float, ...]
    n_visit: int = 0
    l_interaction: int = 0
    last_access: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "pages": [p.to_dict() for p in self.pages],
            "summary": self.summary,
            "keywords": sorted(self.keywords),
            "embedding": list(self.embedding),
            "n_visit": self.n_visit,
            "l_interaction": self.l_interaction,
            "last_access": self.last_access,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Segment":
        return cls(
            id=int(data["id"]),
            pages=tuple(DialoguePage.from_dict(p) for p in data["pages"]),
            summary=data["summary"],
            keywords=frozenset(data.get("keywords", ())),
            embedding=tuple(float(x) for x in data["embedding"]),
            n_visit=int(data.get("n_visit", 0)),
            l_interaction=int(data.get("l_interaction", 0)),
            last_access=int(data.get("last_access", 0)),
        )


# ---------------------------------------------------------------------------
# Persona store
# ---------------------------------------------------------------------------

def _profile_to_dict(profile: Mapping[str, Any]) -> dict[str, Any]:
    return {k: profile[k] for k in sorted(profile)}


@dataclass(frozen=True)
class PersonaStore:
    """Long-term persona: static profiles, fact queues, and a trait map.

    The two fact queues are FIFO and capacity-bounded at promotion time
    (capacities live in :class:`Config`, not here).
    """

    user_profile: dict[str, Any] = field(default_factory=dict)
    user_kb: tuple[FactEntry, ...] = ()
    user_traits: dict[str, TraitValue] = field(default_factory=dict)
    agent_profile: dict[str, Any] = field(default_factory=dict)
    agent_traits: tuple[FactEntry, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            "user_profile": _profile_to_dict(self.user_profile),
            "user_kb": [f.to_dict() for f in self.user_kb],
            "user_traits": {k: self.user_traits[k].to_dict() for k in sorted(self.user_traits)},
            "agent_profile": _profile_to_dict(self.agent_profile),
            "agent_traits": [f.to_dict() for f in self.agent_traits],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PersonaStore":
        return cls(
            user_profile=dict(data.get("user_profile", {})),
            user_kb=tuple(FactEntry.from_dict(f) for f in data.get("user_kb", ())),
            user_traits={k: TraitValue.from_dict(v) for k, v in data.get("user_traits", {}).items()},
            agent_profile=dict(data.get("agent_profile", {})),
            agent_traits=tuple(FactEntry.from_dict(f) for f in data.get("agent_traits", ())),
        )


# ---------------------------------------------------------------------------
# Retrieval output
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RetrievalBundle:
    """Everything recalled for one query, in prompt-assembly order.

    ``mtm_pages`` and the two hit lists carry (item, score) pairs sorted
    best-first; ``stm_pages`` is the whole short-term queue in insertion
    order. Profile and trait maps are copies, safe to hand out.
    """

    stm_pages: tuple[DialoguePage, ...]
    mtm_pages: tuple[tuple[DialoguePage, float], ...]
    user_kb_hits: tuple[tuple[FactEntry, float], ...]
    agent_trait_hits: tuple[tuple[FactEntry, float], ...]
    user_profile: dict[str, Any]
    user_traits: dict[str, TraitValue]
    agent_profile: dict[str, Any]


# ---------------------------------------------------------------------------
# Trait schema
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraitSchema:
    """Named trait dimensions grouped into categories.

    The shipped default (``data/trait_schema.json``) has 90 placeholder
    dimensions across three categories; deployments swap in their own file.
    """

    categories: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def dimensions(self) -> frozenset[str]:
        """All dimension names across categories."""
        return frozenset(d for dims in self.categories.values() for d in dims)

    def to_dict(self) -> dict[str, Any]:
        return {"categories": {k: list(self.categories[k]) for k in sorted(self.categories)}}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TraitSchema":
        return cls(categories={k: tuple(v) for k, v in data.get("categories", {}).items()})


def default_trait_schema() -> TraitSchema:
    """Load the packaged default schema (cached after first read)."""
    global _default_schema
    if _default_schema is None:
        raw = resources.files("hiermem.data").joinpath("trait_schema.json").read_text("utf-8")
        _default_schema = TraitSchema.from_dict(json.loads(raw))
    return _default_schema


_default_schema: TraitSchema | None = None


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Config:
    """Engine hyperparameters. Defaults are the published operating point."""

    stm_capacity: int = 7
    mtm_segment_capacity: int = 200
    kb_capacity: int = 100
    agent_traits_capacity: int = 100
    heat_tau: float = 5.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    mu: float = 1e7
    theta: float = 0.6
    top_m_segments: int = 5
    top_k_pages: int = 10
    lpm_top_n: int = 10
    embedding_dim: int = 256
    trait_schema: TraitSchema = field(default_factory=default_trait_schema)

    def to_dict(self) -> dict[str, Any]:
        return {
            "stm_capacity": self.stm_capacity,
            "mtm_segment_capacity": self.mtm_segment_capacity,
            "kb_capacity": self.kb_capacity,
            "agent_traits_capacity": self.agent_traits_capacity,
            "heat_tau": self.heat_tau,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "mu": self.mu,
            "theta": self.theta,
            "top_m_segments": self.top_m_segments,
            "top_k_pages": self.top_k_pages,
            "lpm_top_n": self.lpm_top_n,
            "embedding_dim": self.embedding_dim,
            "trait_schema": self.trait_schema.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Config":
        """Build a config from a plain mapping; unset keys take defaults.

        Unknown keys raise :class:`ConfigError` so typos never pass
        silently. The result is validated before it is returned.
        """
        known = set(cls.__dataclass_fields__)
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown configuration field")
        kwargs: dict[str, Any] = dict(data)
        if "trait_schema" in kwargs and not isinstance(kwargs["trait_schema"], TraitSchema):
            kwargs["trait_schema"] = TraitSchema.from_dict(kwargs["trait_schema"])
        for name in ("stm_capacity", "mtm_segment_capacity", "kb_capacity",
                     "agent_traits_capacity", "top_m_segments", "top_k_pages",
                     "lpm_top_n", "embedding_dim"):
            if name in kwargs:
                kwargs[name] = int(kwargs[name])
        for name in ("heat_tau", "alpha", "beta", "gamma", "mu", "theta"):
            if name in kwargs:
                kwargs[name] = float(kwargs[name])
        return validate_config(cls(**kwargs))


def validate_config(config: Config) -> Config:
    """Check every config invariant; returns the config unchanged.

    Raises:
        ConfigError: naming the offending field.
    """
    _require(config.stm_capacity >= 1, "stm_capacity", "must be >= 1")
    _require(config.mtm_segment_capacity >= 1, "mtm_segment_capacity", "must be >= 1")
    _require(config.kb_capacity >= 1, "kb_capacity", "must be >= 1")
    _require(config.agent_traits_capacity >= 1, "agent_traits_capacity", "must be >= 1")
    _require(config.alpha >= 0, "alpha", "must be >= 0")
    _require(config.beta >= 0, "beta", "must be >= 0")
    _require(config.gamma >= 0, "gamma", "must be >= 0")
    _require(config.mu > 0, "mu", "must be > 0")
    _require(-1.0 <= config.theta <= 2.0, "theta", "must lie in [-1, 2]")
    _require(config.top_m_segments >= 1, "top_m_segments", "must be >= 1")
    _require(config.top_k_pages >= 1, "top_k_pages", "must be >= 1")
    _require(config.lpm_top_n >= 1, "lpm_top_n", "must be >= 1")
    _require(config.embedding_dim >= 1, "embedding_dim", "must be >= 1")
    dims = [d for ds in config.trait_schema.categories.values() for d in ds]
    _require(len(dims) == len(set(dims)), "trait_schema", "dimension names must be unique")
    return config


def _require(ok: bool, field_name: str, message: str) -> None:
    if not ok:
        raise ConfigError(field_name, message)
