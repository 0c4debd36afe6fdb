"""Language-model and embedding gateways.

The engine never talks to a model directly; it calls one of the task
methods below (``embed``, ``extract_keywords``, ``judge_continuity``,
``summarize``, ``extract_persona_updates``, ``complete``). Two
implementations ship:

* :class:`StubProvider` - deterministic, in-process, no network. Drives the
  whole test suite and offline replay; identical inputs always produce
  identical outputs.
* :class:`RemoteProvider` - a client for chat + embeddings HTTP endpoints
  using the common JSON wire shapes, with timeouts and bounded retries.

Every successful call appends exactly one entry to the provider's
append-only :class:`RequestLog`, which is what the efficiency accounting
(average calls and tokens per response) reads.
"""

from __future__ import annotations

import abc
import hashlib
import json
import logging
import os
import re
import threading
import time
import zlib
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import httpx

from .errors import ConfigError, InvalidArgumentError, ProviderUnavailableError
from .model import DialoguePage, Segment, TraitSchema
from .similarity import jaccard

logger = logging.getLogger(__name__)

__all__ = [
    "CHAIN_META",
    "SEGMENT_SUMMARY",
    "TraitUpdate",
    "PersonaUpdates",
    "ProviderCall",
    "RequestLog",
    "Provider",
    "StubProvider",
    "RemoteProvider",
]

# Summary kinds accepted by Provider.summarize.
CHAIN_META = "chain_meta"
SEGMENT_SUMMARY = "segment_summary"
_SUMMARY_KINDS = (CHAIN_META, SEGMENT_SUMMARY)


@dataclass(frozen=True)
class TraitUpdate:
    """One proposed trait write; confidence defaults to 1.0."""

    value: str
    confidence: float = 1.0


@dataclass(frozen=True)
class PersonaUpdates:
    """Distilled persona material for one segment."""

    traits: dict[str, TraitUpdate] = field(default_factory=dict)
    user_facts: tuple[str, ...] = ()
    agent_facts: tuple[str, ...] = ()


@dataclass(frozen=True)
class ProviderCall:
    """One line of the request log."""

    kind: str
    input_digest: str
    output_digest: str
    latency_ms: float
    tokens_in: int
    tokens_out: int


class RequestLog:
    """Append-only, thread-safe record of provider calls."""

    def __init__(self) -> None:
        self._entries: list[ProviderCall] = []
        self._lock = threading.Lock()

    def append(self, call: ProviderCall) -> None:
        with self._lock:
            self._entries.append(call)

    def entries(self) -> tuple[ProviderCall, ...]:
        with self._lock:
            return tuple(self._entries)

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def total_tokens(self) -> tuple[int, int]:
        """(tokens_in, tokens_out) summed over all entries."""
        with self._lock:
            return (
                sum(e.tokens_in for e in self._entries),
                sum(e.tokens_out for e in self._entries),
            )


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


def _count_tokens(text: str) -> int:
    return len(text.split())


class Provider(abc.ABC):
    """Task-level gateway; subclasses implement the underscore hooks.

    The public methods validate preconditions, enforce the trait-schema
    closure, and log exactly one :class:`ProviderCall` per invocation, so
    implementations only supply the raw behavior.
    """

    def __init__(self) -> None:
        self.log = RequestLog()

    # -- public ops ---------------------------------------------------

    def embed(self, text: str) -> tuple[float, ...]:
        """Dense vector for ``text``; empty text maps to the zero vector."""
        started = time.perf_counter()
        vector = self._embed(text)
        self._record("embed", started, text, repr(vector), _count_tokens(text), 0)
        return vector

    def extract_keywords(self, text: str) -> frozenset[str]:
        """Lowercase keyword set for ``text``."""
        started = time.perf_counter()
        keywords = self._extract_keywords(text)
        canon = " ".join(sorted(keywords))
        self._record("keywords", started, text, canon, _count_tokens(text), len(keywords))
        return keywords

    def judge_continuity(self, page: DialoguePage, chain_tail_meta: str) -> bool:
        """Does ``page`` continue the topic summarized by ``chain_tail_meta``?

        An empty meta means there is nothing to continue: always False.
        """
        started = time.perf_counter()
        if not chain_tail_meta.strip():
            verdict = False
        else:
            verdict = self._judge_continuity(page, chain_tail_meta)
        source = f"{page.text}\n{chain_tail_meta}"
        self._record("continuity", started, source, str(verdict), _count_tokens(source), 0)
        return verdict

    def summarize(self, kind: str, texts: Sequence[str]) -> str:
        """Summarize ``texts`` for the given kind of running summary."""
        if kind not in _SUMMARY_KINDS:
            raise InvalidArgumentError(f"unknown summary kind: {kind!r}")
        if not texts:
            raise InvalidArgumentError("summarize requires at least one text")
        started = time.perf_counter()
        summary = self._summarize(kind, list(texts))
        source = "\n".join(texts)
        self._record("summarize", started, source, summary, _count_tokens(source), _count_tokens(summary))
        return summary

    def extract_persona_updates(self, segment: Segment, schema: TraitSchema) -> PersonaUpdates:
        """Distill persona material from a segment.

        Trait keys outside the schema are dropped with a warning, so every
        implementation honors the schema closure.
        """
        if not segment.pages:
            raise InvalidArgumentError("segment has no pages")
        started = time.perf_counter()
        updates = self._extract_persona_updates(segment, schema)
        allowed = schema.dimensions()
        dropped = sorted(k for k in updates.traits if k not in allowed)
        if dropped:
            logger.warning("dropping trait updates outside schema: %s", dropped)
            kept = {k: v for k, v in updates.traits.items() if k in allowed}
            updates = replace(updates, traits=kept)
        source = segment.summary + "\n" + "\n".join(p.text for p in segment.pages)
        rendered = "\n".join(
            [*updates.user_facts, *updates.agent_facts]
            + [f"{k}={v.value}" for k, v in sorted(updates.traits.items())]
        )
        self._record("persona", started, source, rendered, _count_tokens(source), _count_tokens(rendered))
        return updates

    def complete(self, prompt: str) -> str:
        """Final response generation from the assembled prompt."""
        started = time.perf_counter()
        response = self._complete(prompt)
        self._record("complete", started, prompt, response, _count_tokens(prompt), _count_tokens(response))
        return response

    # -- implementation hooks ------------------------------------------

    @abc.abstractmethod
    def _embed(self, text: str) -> tuple[float, ...]: ...

    @abc.abstractmethod
    def _extract_keywords(self, text: str) -> frozenset[str]: ...

    @abc.abstractmethod
    def _judge_continuity(self, page: DialoguePage, chain_tail_meta: str) -> bool: ...

    @abc.abstractmethod
    def _summarize(self, kind: str, texts: list[str]) -> str: ...

    @abc.abstractmethod
    def _extract_persona_updates(self, segment: Segment, schema: TraitSchema) -> PersonaUpdates: ...

    @abc.abstractmethod
    def _complete(self, prompt: str) -> str: ...

    # -- accounting ----------------------------------------------------

    def _record(self, kind: str, started: float, source: str, output: str,
                tokens_in: int, tokens_out: int) -> None:
        self.log.append(ProviderCall(
            kind=kind,
            input_digest=_digest(source),
            output_digest=_digest(output),
            latency_ms=(time.perf_counter() - started) * 1000.0,
            tokens_in=tokens_in,
            tokens_out=tokens_out,
        ))


# ---------------------------------------------------------------------------
# Deterministic stub
# ---------------------------------------------------------------------------

_WORD_RE = re.compile(r"[a-z0-9]+")

# Function words excluded from stub keyword sets. Tokens of length <= 2 are
# filtered separately, so only longer words need to appear here.
STOPWORDS = frozenset({
    "the", "and", "for", "are", "but", "not", "with", "you", "your", "yours",
    "this", "that", "these", "those", "was", "were", "have", "has", "had",
    "from", "they", "them", "their", "she", "his", "him", "her", "hers",
    "its", "our", "ours", "out", "who", "whom", "what", "when", "where",
    "which", "why", "how", "will", "would", "could", "should", "shall",
    "there", "here", "about", "into", "than", "then", "too", "very", "just",
    "been", "being", "over", "under", "again", "once", "only", "also",
    "does", "did", "doing", "each", "few", "more", "most", "other", "some",
    "such", "own", "same", "after", "before", "because", "while", "can",
    "may", "might", "must", "let", "lets", "it's", "don",
})

_MAX_KEYWORDS = 32
_SUMMARY_CHAR_CAP = 512


def _stub_tokens(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def _stub_keywords(text: str) -> frozenset[str]:
    picked: list[str] = []
    seen: set[str] = set()
    for token in _stub_tokens(text):
        if len(token) <= 2 or token in STOPWORDS or token in seen:
            continue
        seen.add(token)
        picked.append(token)
        if len(picked) == _MAX_KEYWORDS:
            break
    return frozenset(picked)


def _first_sentence(text: str) -> str:
    stripped = text.strip()
    match = re.search(r"[.!?]", stripped)
    if match is None:
        return stripped
    return stripped[: match.end()]


class StubProvider(Provider):
    """Deterministic provider with no external dependencies.

    Rules (fixed; tests freeze values derived from them):

    * ``embed``: hashed bag-of-words. Each lowercase alphanumeric token adds
      1.0 at index ``crc32(token) % dim``; empty text gives the zero vector.
    * ``extract_keywords``: lowercase alphanumeric tokens longer than two
      characters, minus :data:`STOPWORDS`, capped at 32 by first occurrence.
    * ``judge_continuity``: keyword Jaccard between page text and meta
      >= 0.2 (False for an empty meta).
    * ``summarize``: first sentence of each text, space-joined, truncated
      to 512 characters.
    * ``extract_persona_updates``: one user fact per non-empty page query
      and one agent fact per non-empty page response, no trait updates.
    * ``complete``: ``STUB-RESPONSE(`` + first 64 chars of the prompt + ``)``.
    """

    def __init__(self, dim: int = 256):
        super().__init__()
        if dim < 1:
            raise InvalidArgumentError("dim must be >= 1")
        self.dim = dim

    def _embed(self, text: str) -> tuple[float, ...]:
        vector = [0.0] * self.dim
        for token in _stub_tokens(text):
            vector[zlib.crc32(token.encode("utf-8")) % self.dim] += 1.0
        return tuple(vector)

    def _extract_keywords(self, text: str) -> frozenset[str]:
        return _stub_keywords(text)

    def _judge_continuity(self, page: DialoguePage, chain_tail_meta: str) -> bool:
        return jaccard(_stub_keywords(page.text), _stub_keywords(chain_tail_meta)) >= 0.2

    def _summarize(self, kind: str, texts: list[str]) -> str:
        return " ".join(_first_sentence(t) for t in texts)[:_SUMMARY_CHAR_CAP]

    def _extract_persona_updates(self, segment: Segment, schema: TraitSchema) -> PersonaUpdates:
        user_facts = tuple(f"user said: {p.query}" for p in segment.pages if p.query)
        agent_facts = tuple(f"agent said: {p.response}" for p in segment.pages if p.response)
        return PersonaUpdates(traits={}, user_facts=user_facts, agent_facts=agent_facts)

    def _complete(self, prompt: str) -> str:
        return f"STUB-RESPONSE({prompt[:64]})"


# ---------------------------------------------------------------------------
# Remote client
# ---------------------------------------------------------------------------

# Instruction templates sent to the chat endpoint. Bump the version when
# any wording changes; digests of logged requests depend on it.
REMOTE_PROMPTS_VERSION = 1

_SUMMARIZE_INSTRUCTIONS = {
    CHAIN_META: (
        "Summarize the following conversation excerpts into one compact "
        "topic note (max 2 sentences). Reply with the note only.\n\n{body}"
    ),
    SEGMENT_SUMMARY: (
        "Write a short running summary (max 3 sentences) of the following "
        "related conversation excerpts. Reply with the summary only.\n\n{body}"
    ),
}

_KEYWORDS_INSTRUCTION = (
    "List up to 32 lowercase topical keywords for the text below, "
    "comma-separated, no commentary.\n\n{body}"
)

_CONTINUITY_INSTRUCTION = (
    "Topic note: {meta}\n\nNew exchange: {page}\n\n"
    "Does the new exchange continue the same topic? Answer yes or no."
)

_PERSONA_INSTRUCTION = (
    "From the conversation below, extract persona material as JSON with "
    'keys "user_facts" (list of strings), "agent_facts" (list of strings), '
    'and "traits" (object mapping a dimension name to {{"value": string, '
    '"confidence": number in [0,1]}}). Allowed dimension names: {dims}. '
    "Reply with JSON only.\n\n{body}"
)


class RemoteProvider(Provider):
    """Client for chat + embeddings HTTP endpoints.

    Configuration comes from arguments or environment variables:
    ``HIERMEM_API_BASE`` (required), ``HIERMEM_API_KEY``,
    ``HIERMEM_CHAT_MODEL``, ``HIERMEM_EMBED_MODEL``.

    Requests time out after ``timeout`` seconds and are retried
    ``retries`` times with exponential backoff before the call is
    surfaced as provider-unavailable. Retries apply to network errors,
    HTTP 429, and 5xx responses; other statuses fail immediately.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        chat_model: str | None = None,
        embed_model: str | None = None,
        timeout: float = 30.0,
        retries: int = 2,
        backoff_base: float = 0.5,
        transport: httpx.BaseTransport | None = None,
    ):
        super().__init__()
        base_url = base_url or os.environ.get("HIERMEM_API_BASE")
        if not base_url:
            raise ConfigError("base_url", "remote provider needs a base URL (HIERMEM_API_BASE)")
        api_key = api_key if api_key is not None else os.environ.get("HIERMEM_API_KEY", "")
        self.chat_model = chat_model or os.environ.get("HIERMEM_CHAT_MODEL", "gpt-4o-mini")
        self.embed_model = embed_model or os.environ.get("HIERMEM_EMBED_MODEL", "text-embedding-3-small")
        self._retries = max(0, int(retries))
        self._backoff_base = backoff_base
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(
            base_url=base_url, timeout=timeout, headers=headers, transport=transport
        )

    def close(self) -> None:
        self._client.close()

    # -- transport ------------------------------------------------------

    def _post(self, path: str, payload: dict[str, Any]) -> dict[str, Any]:
        last_error: Exception | None = None
        for attempt in range(self._retries + 1):
            try:
                response = self._client.post(path, json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
            else:
                if response.status_code < 400:
                    try:
                        return response.json()
                    except json.JSONDecodeError as exc:
                        last_error = exc
                elif response.status_code == 429 or response.status_code >= 500:
                    last_error = ProviderUnavailableError(f"{path} returned {response.status_code}")
                else:
                    # Client errors other than rate limiting will not heal on retry.
                    raise ProviderUnavailableError(
                        f"{path} rejected the request: {response.status_code}"
                    )
            if attempt < self._retries:
                time.sleep(self._backoff_base * (2 ** attempt))
        raise ProviderUnavailableError(
            f"{path} failed after {self._retries + 1} attempts: {last_error}"
        )

    def _chat(self, prompt: str) -> str:
        data = self._post(
            "/chat/completions",
            {"model": self.chat_model, "messages": [{"role": "user", "content": prompt}]},
        )
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailableError(f"malformed chat response: {exc}") from exc
        if not isinstance(content, str):
            raise ProviderUnavailableError("chat response content is not text")
        return content

    # -- hooks -----------------------------------------------------------

    def _embed(self, text: str) -> tuple[float, ...]:
        data = self._post("/embeddings", {"model": self.embed_model, "input": text})
        try:
            vector = data["data"][0]["embedding"]
            return tuple(float(x) for x in vector)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderUnavailableError(f"malformed embedding response: {exc}") from exc

    def _extract_keywords(self, text: str) -> frozenset[str]:
        reply = self._chat(_KEYWORDS_INSTRUCTION.format(body=text))
        picked: list[str] = []
        seen: set[str] = set()
        for raw in re.split(r"[,\n]", reply):
            term = " ".join(_stub_tokens(raw))
            if not term or len(term) <= 2 or term in seen:
                continue
            seen.add(term)
            picked.append(term)
            if len(picked) == _MAX_KEYWORDS:
                break
        return frozenset(picked)

    def _judge_continuity(self, page: DialoguePage, chain_tail_meta: str) -> bool:
        reply = self._chat(_CONTINUITY_INSTRUCTION.format(meta=chain_tail_meta, page=page.text))
        return reply.strip().lower().startswith("yes")

    def _summarize(self, kind: str, texts: list[str]) -> str:
        body = "\n---\n".join(texts)
        summary = self._chat(_SUMMARIZE_INSTRUCTIONS[kind].format(body=body)).strip()
        if not summary:
            raise ProviderUnavailableError("remote summarizer returned empty text")
        return summary

    def _extract_persona_updates(self, segment: Segment, schema: TraitSchema) -> PersonaUpdates:
        body = segment.summary + "\n" + "\n".join(p.text for p in segment.pages)
        dims = ", ".join(sorted(schema.dimensions())) or "(none)"
        reply = self._chat(_PERSONA_INSTRUCTION.format(dims=dims, body=body))
        payload = _parse_json_object(reply)
        traits: dict[str, TraitUpdate] = {}
        for key, value in (payload.get("traits") or {}).items():
            if isinstance(value, dict) and "value" in value:
                traits[str(key)] = TraitUpdate(
                    value=str(value["value"]),
                    confidence=float(value.get("confidence", 1.0)),
                )
            else:
                traits[str(key)] = TraitUpdate(value=str(value))
        return PersonaUpdates(
            traits=traits,
            user_facts=tuple(str(x) for x in payload.get("user_facts") or ()),
            agent_facts=tuple(str(x) for x in payload.get("agent_facts") or ()),
        )

    def _complete(self, prompt: str) -> str:
        return self._chat(prompt)


def _parse_json_object(reply: str) -> dict[str, Any]:
    """Pull the first JSON object out of a chat reply."""
    start = reply.find("{")
    end = reply.rfind("}")
    if start < 0 or end <= start:
        raise ProviderUnavailableError("persona reply contained no JSON object")
    try:
        payload = json.loads(reply[start : end + 1])
    except json.JSONDecodeError as exc:
        raise ProviderUnavailableError(f"persona reply was not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ProviderUnavailableError("persona reply JSON was not an object")
    return payload
