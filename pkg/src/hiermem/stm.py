"""Short-term memory: a bounded FIFO queue of pages with topic chains.

Appending links the incoming page to the tail page's chain when the
provider judges the topic continuous, otherwise the page founds a fresh
chain (its own id becomes the chain id). When the queue is full the oldest
page overflows; the caller hands it to the mid-term store.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from .errors import InvalidArgumentError, ProviderUnavailableError
from .model import DialoguePage
from .providers import CHAIN_META, Provider

logger = logging.getLogger(__name__)

__all__ = ["ShortTermMemory", "AppendResult", "append", "all_pages"]

_META_CHAR_CAP = 512


@dataclass(frozen=True)
class ShortTermMemory:
    """FIFO queue of the most recent pages, oldest first."""

    capacity: int
    pages: tuple[DialoguePage, ...] = ()

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise InvalidArgumentError("stm capacity must be >= 1")
        if len(self.pages) > self.capacity:
            raise InvalidArgumentError("stm queue exceeds capacity")


@dataclass(frozen=True)
class AppendResult:
    stm: ShortTermMemory
    overflow: DialoguePage | None


def append(stm: ShortTermMemory, page: DialoguePage, provider: Provider) -> AppendResult:
    """Append ``page`` and return the updated queue plus any overflow.

    The page must not carry a chain assignment yet. If the provider is
    unavailable while judging continuity or summarizing the chain, the
    page is still appended on a fresh single-page chain whose meta is the
    page text truncated locally (degraded mode, logged); append itself
    never raises provider-unavailable.
    """
    if page.chain_id is not None:
        raise InvalidArgumentError("page already belongs to a chain")
    if not page.query:
        raise InvalidArgumentError("page query must be non-empty")

    continues = False
    tail = stm.pages[-1] if stm.pages else None
    if tail is not None:
        try:
            continues = provider.judge_continuity(page, tail.chain_meta)
        except ProviderUnavailableError:
            logger.warning("continuity judge unavailable; starting a fresh chain")
            continues = False

    if continues and tail is not None and tail.chain_id is not None:
        chain_id = tail.chain_id
        chain_texts = [p.text for p in stm.pages if p.chain_id == chain_id] + [page.text]
    else:
        chain_id = page.id
        chain_texts = [page.text]

    try:
        meta = provider.summarize(CHAIN_META, chain_texts)
    except ProviderUnavailableError:
        logger.warning("chain summarizer unavailable; using truncated page text")
        chain_id = page.id
        meta = page.text[:_META_CHAR_CAP]

    linked = replace(page, chain_id=chain_id, chain_meta=meta)
    queue = stm.pages + (linked,)
    overflow: DialoguePage | None = None
    if len(queue) > stm.capacity:
        overflow, queue = queue[0], queue[1:]
    return AppendResult(stm=ShortTermMemory(stm.capacity, queue), overflow=overflow)


def all_pages(stm: ShortTermMemory) -> tuple[DialoguePage, ...]:
    """The queue in insertion order (a copy-safe tuple)."""
    return stm.pages
