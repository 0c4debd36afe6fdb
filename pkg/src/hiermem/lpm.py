"""Long-term persona memory: fact queues and an evolving trait map.

Hot mid-term segments are promoted here: the provider distills user facts,
agent facts, and trait updates from the segment, facts land in FIFO queues
bounded by the configured capacities, and trait updates merge
last-write-wins into the user trait map.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

from .errors import InvalidArgumentError
from .model import FactEntry, PersonaStore, Segment, TraitSchema, TraitValue
from .providers import Provider
from .similarity import cosine

logger = logging.getLogger(__name__)

__all__ = ["PersonaHits", "promote", "retrieve_persona"]


@dataclass(frozen=True)
class PersonaHits:
    """Persona material selected for one query."""

    user_kb_hits: tuple[tuple[FactEntry, float], ...]
    agent_trait_hits: tuple[tuple[FactEntry, float], ...]
    user_profile: dict
    user_traits: dict[str, TraitValue]
    agent_profile: dict


def promote(persona: PersonaStore, segment: Segment, schema: TraitSchema,
            provider: Provider, now: int, *, kb_capacity: int = 100,
            traits_capacity: int = 100) -> PersonaStore:
    """Fold one hot segment into the persona store.

    Provider failures propagate with the persona untouched; the caller is
    expected to reset the segment's l_interaction either way (the
    promotion attempt counts) and retry content on a later cycle.
    """
    if not segment.pages:
        raise InvalidArgumentError("cannot promote an empty segment")
    if kb_capacity < 1 or traits_capacity < 1:
        raise InvalidArgumentError("persona capacities must be >= 1")

    updates = provider.extract_persona_updates(segment, schema)
    user_entries = tuple(
        FactEntry(text=text, embedding=provider.embed(text),
                  source_segment=segment.id, created_at=now)
        for text in updates.user_facts if text
    )
    agent_entries = tuple(
        FactEntry(text=text, embedding=provider.embed(text),
                  source_segment=segment.id, created_at=now)
        for text in updates.agent_facts if text
    )

    user_traits = dict(persona.user_traits)
    for dim, update in updates.traits.items():
        user_traits[dim] = TraitValue(
            value=update.value,
            confidence=update.confidence,
            last_updated=now,
        )

    return replace(
        persona,
        user_kb=_fifo(persona.user_kb + user_entries, kb_capacity),
        agent_traits=_fifo(persona.agent_traits + agent_entries, traits_capacity),
        user_traits=user_traits,
    )


def retrieve_persona(persona: PersonaStore, query_embedding: Sequence[float],
                     top_n: int) -> PersonaHits:
    """Top ``top_n`` facts from each queue by cosine, plus profile copies.

    Ties break by recency, newest first (creation time, then queue
    position). The store itself is left untouched.
    """
    if top_n < 1:
        raise InvalidArgumentError("top_n must be >= 1")
    return PersonaHits(
        user_kb_hits=_top_hits(persona.user_kb, query_embedding, top_n),
        agent_trait_hits=_top_hits(persona.agent_traits, query_embedding, top_n),
        user_profile=dict(persona.user_profile),
        user_traits=dict(persona.user_traits),
        agent_profile=dict(persona.agent_profile),
    )


def _top_hits(queue: tuple[FactEntry, ...], query_embedding: Sequence[float],
              top_n: int) -> tuple[tuple[FactEntry, float], ...]:
    scored = [
        (cosine(entry.embedding, query_embedding), entry.created_at, index, entry)
        for index, entry in enumerate(queue)
    ]
    scored.sort(key=lambda row: (-row[0], -row[1], -row[2]))
    return tuple((entry, score) for score, _, _, entry in scored[:top_n])


def _fifo(queue: tuple[FactEntry, ...], capacity: int) -> tuple[FactEntry, ...]:
    # Oldest entries fall off the front.
    return queue[-capacity:]
