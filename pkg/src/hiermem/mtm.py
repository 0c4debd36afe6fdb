"""Mid-term memory: topic segments with heat-scored eviction.

Pages overflowing the short-term queue are routed to the best-matching
segment when their combined similarity clears the merge threshold,
otherwise a new segment is created. When the segment count exceeds
capacity the coldest segment is evicted. Heat combines visit count,
insertions since the last persona promotion, and an exponential recency
term:

    heat = alpha * n_visit + beta * l_interaction + gamma * exp(-dt / mu)

The page/segment match score adds summary-vector cosine to keyword
Jaccard and therefore lives in [-1, 2].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import InvalidArgumentError, NotFoundError
from .model import DialoguePage, Segment
from .providers import SEGMENT_SUMMARY, Provider
from .similarity import cosine, jaccard

__all__ = [
    "MidTermMemory",
    "InsertResult",
    "jaccard",
    "f_score",
    "heat",
    "insert_page",
    "touch",
    "hot_segments",
    "reset_after_promotion",
    "get_segment",
]


@dataclass(frozen=True)
class MidTermMemory:
    """Segments in creation order; ``next_segment_id`` feeds new segments."""

    capacity: int
    segments: tuple[Segment, ...] = ()
    next_segment_id: int = 1

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise InvalidArgumentError("mtm capacity must be >= 1")


@dataclass(frozen=True)
class InsertResult:
    mtm: MidTermMemory
    evicted: Segment | None


def f_score(page: DialoguePage, segment: Segment) -> float:
    """Match score between a page and a segment: cosine + Jaccard."""
    if page.embedding is None:
        raise InvalidArgumentError("page embedding is not populated")
    return cosine(segment.embedding, page.embedding) + jaccard(segment.keywords, page.keywords)


def heat(segment: Segment, now: int, *, alpha: float = 1.0, beta: float = 1.0,
         gamma: float = 1.0, mu: float = 1e7) -> float:
    """Heat of ``segment`` at time ``now``; ``now`` must not precede last access."""
    dt = now - segment.last_access
    if dt < 0:
        raise InvalidArgumentError("now precedes the segment's last access")
    return alpha * segment.n_visit + beta * segment.l_interaction + gamma * math.exp(-dt / mu)


def insert_page(mtm: MidTermMemory, page: DialoguePage, theta: float, provider: Provider,
                now: int, *, alpha: float = 1.0, beta: float = 1.0, gamma: float = 1.0,
                mu: float = 1e7) -> InsertResult:
    """Route ``page`` into the best segment above ``theta`` or found a new one.

    The page's keywords and embedding are computed here when absent. The
    joined (or new) segment's summary, keywords, and embedding are
    recomputed from its full page list. If the result exceeds capacity the
    minimum-heat segment is evicted (ties: oldest last_access, then
    smallest id) and returned. Any provider failure aborts the insertion
    with the input value unchanged.
    """
    page = _enrich(page, provider)

    best: Segment | None = None
    best_score = theta
    for segment in mtm.segments:
        score = f_score(page, segment)
        if score > best_score:
            best, best_score = segment, score

    if best is not None:
        joined = _rebuild(best, best.pages + (page,), provider)
        joined = replace(joined, l_interaction=best.l_interaction + 1)
        segments = tuple(joined if s.id == best.id else s for s in mtm.segments)
        new_mtm = replace(mtm, segments=segments)
    else:
        fresh = Segment(
            id=mtm.next_segment_id,
            pages=(page,),
            summary="",
            keywords=frozenset(),
            embedding=(),
            n_visit=0,
            l_interaction=1,
            last_access=now,
        )
        fresh = _rebuild(fresh, fresh.pages, provider)
        new_mtm = replace(
            mtm,
            segments=mtm.segments + (fresh,),
            next_segment_id=mtm.next_segment_id + 1,
        )

    evicted: Segment | None = None
    if len(new_mtm.segments) > new_mtm.capacity:
        evicted = min(
            new_mtm.segments,
            key=lambda s: (heat(s, now, alpha=alpha, beta=beta, gamma=gamma, mu=mu),
                           s.last_access, s.id),
        )
        remaining = tuple(s for s in new_mtm.segments if s.id != evicted.id)
        new_mtm = replace(new_mtm, segments=remaining)
    return InsertResult(mtm=new_mtm, evicted=evicted)


def touch(mtm: MidTermMemory, segment_id: int, now: int) -> MidTermMemory:
    """Record a retrieval visit: n_visit + 1 and last_access = now."""
    segment = get_segment(mtm, segment_id)
    if now < segment.last_access:
        raise InvalidArgumentError("now precedes the segment's last access")
    touched = replace(segment, n_visit=segment.n_visit + 1, last_access=now)
    return replace(mtm, segments=tuple(touched if s.id == segment_id else s for s in mtm.segments))


def hot_segments(mtm: MidTermMemory, tau: float, now: int, *, alpha: float = 1.0,
                 beta: float = 1.0, gamma: float = 1.0, mu: float = 1e7) -> tuple[Segment, ...]:
    """Segments with heat strictly above ``tau``, hottest first (ties by id)."""
    scored = [
        (heat(s, now, alpha=alpha, beta=beta, gamma=gamma, mu=mu), s)
        for s in mtm.segments
    ]
    hot = [(h, s) for h, s in scored if h > tau]
    hot.sort(key=lambda pair: (-pair[0], pair[1].id))
    return tuple(s for _, s in hot)


def reset_after_promotion(mtm: MidTermMemory, segment_id: int) -> MidTermMemory:
    """Zero l_interaction after a persona promotion; everything else stays."""
    segment = get_segment(mtm, segment_id)
    cooled = replace(segment, l_interaction=0)
    return replace(mtm, segments=tuple(cooled if s.id == segment_id else s for s in mtm.segments))


def get_segment(mtm: MidTermMemory, segment_id: int) -> Segment:
    for segment in mtm.segments:
        if segment.id == segment_id:
            return segment
    raise NotFoundError(f"segment {segment_id} not found")


def _enrich(page: DialoguePage, provider: Provider) -> DialoguePage:
    # Overflowed STM pages arrive without keywords or embedding.
    if page.keywords and page.embedding is not None:
        return page
    keywords = page.keywords or provider.extract_keywords(page.text)
    embedding = page.embedding if page.embedding is not None else provider.embed(page.text)
    return replace(page, keywords=keywords, embedding=embedding)


def _rebuild(segment: Segment, pages: tuple[DialoguePage, ...], provider: Provider) -> Segment:
    # Summary from the page texts, keywords from their concatenation,
    # embedding from the summary. Three provider calls.
    texts = [p.text for p in pages]
    summary = provider.summarize(SEGMENT_SUMMARY, texts)
    keywords = provider.extract_keywords(" ".join(texts))
    embedding = provider.embed(summary)
    return replace(segment, pages=pages, summary=summary, keywords=keywords, embedding=embedding)
