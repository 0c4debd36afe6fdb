"""Shared test doubles and state builders."""

from __future__ import annotations

import random

from hiermem.engine import MemoryEngine, MemoryState
from hiermem.errors import ProviderUnavailableError
from hiermem.model import Config, DialoguePage
from hiermem.providers import PersonaUpdates, Provider, StubProvider, TraitUpdate


class FlakyProvider(Provider):
    """Delegates to a stub but fails a seeded fraction of calls."""

    def __init__(self, dim: int = 256, fail_rate: float = 0.3, seed: int = 0):
        super().__init__()
        self.inner = StubProvider(dim=dim)
        self.fail_rate = fail_rate
        self.rng = random.Random(seed)

    def _roll(self) -> None:
        if self.rng.random() < self.fail_rate:
            raise ProviderUnavailableError("injected fault")

    def _embed(self, text):
        self._roll()
        return self.inner._embed(text)

    def _extract_keywords(self, text):
        self._roll()
        return self.inner._extract_keywords(text)

    def _judge_continuity(self, page, chain_tail_meta):
        self._roll()
        return self.inner._judge_continuity(page, chain_tail_meta)

    def _summarize(self, kind, texts):
        self._roll()
        return self.inner._summarize(kind, texts)

    def _extract_persona_updates(self, segment, schema):
        self._roll()
        return self.inner._extract_persona_updates(segment, schema)

    def _complete(self, prompt):
        self._roll()
        return self.inner._complete(prompt)


class ScriptedFailureProvider(StubProvider):
    """Stub whose listed task kinds fail until the set is cleared."""

    def __init__(self, dim: int = 256, fail_kinds: set[str] | None = None):
        super().__init__(dim=dim)
        self.fail_kinds: set[str] = set(fail_kinds or ())

    def _maybe_fail(self, kind: str) -> None:
        if kind in self.fail_kinds:
            raise ProviderUnavailableError(f"scripted failure: {kind}")

    def _embed(self, text):
        self._maybe_fail("embed")
        return super()._embed(text)

    def _extract_keywords(self, text):
        self._maybe_fail("keywords")
        return super()._extract_keywords(text)

    def _judge_continuity(self, page, chain_tail_meta):
        self._maybe_fail("continuity")
        return super()._judge_continuity(page, chain_tail_meta)

    def _summarize(self, kind, texts):
        self._maybe_fail("summarize")
        return super()._summarize(kind, texts)

    def _extract_persona_updates(self, segment, schema):
        self._maybe_fail("persona")
        return super()._extract_persona_updates(segment, schema)

    def _complete(self, prompt):
        self._maybe_fail("complete")
        return super()._complete(prompt)


class TraitProposingProvider(StubProvider):
    """Stub that additionally proposes fixed trait updates."""

    def __init__(self, dim: int = 256, traits: dict[str, TraitUpdate] | None = None):
        super().__init__(dim=dim)
        self.traits = dict(traits or {})

    def _extract_persona_updates(self, segment, schema):
        base = super()._extract_persona_updates(segment, schema)
        return PersonaUpdates(traits=dict(self.traits),
                              user_facts=base.user_facts,
                              agent_facts=base.agent_facts)


WORDS = (
    "river", "kayak", "paddle", "rapids", "sourdough", "starter", "flour",
    "bake", "piano", "scales", "chords", "recital", "nebula", "telescope",
    "stargazing", "orbit", "marathon", "training", "pace", "sneakers",
)


def random_text(rng: random.Random, k: int | None = None) -> str:
    k = k if k is not None else rng.randint(3, 9)
    return " ".join(rng.choice(WORDS) for _ in range(k))


def build_random_state(seed: int, config: Config | None = None,
                       provider: Provider | None = None,
                       exchanges: int | None = None) -> MemoryState:
    """Drive a fresh engine through a random but reproducible history."""
    rng = random.Random(seed)
    config = config or Config(embedding_dim=32)
    provider = provider or StubProvider(dim=config.embedding_dim)
    engine = MemoryEngine(f"user{seed}", config=config, provider=provider)
    now = 1_000_000
    steps = exchanges if exchanges is not None else rng.randint(1, 30)
    for _ in range(steps):
        now += rng.randint(30, 5000)
        roll = rng.random()
        if roll < 0.70:
            response = random_text(rng) if rng.random() > 0.15 else ""
            engine.ingest(random_text(rng), response, now)
        elif roll < 0.85:
            engine.respond(random_text(rng), now)
        else:
            engine.retrieve(random_text(rng), now, touch=True)
    return engine.state


def enriched_page(provider: StubProvider, page_id: int, text: str, timestamp: int,
                  response: str = "") -> DialoguePage:
    """A page carrying keywords and embedding, as if it left the queue."""
    page = DialoguePage(id=page_id, query=text, response=response, timestamp=timestamp)
    return DialoguePage(
        id=page_id, query=text, response=response, timestamp=timestamp,
        keywords=provider.extract_keywords(page.text),
        embedding=provider.embed(page.text),
    )
