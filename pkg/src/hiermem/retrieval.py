"""Query-time recall across the three tiers, plus prompt assembly.

Mid-term recall is two-stage: the query is scored against every segment as
if it were a page (summary cosine + keyword Jaccard), the best ``top_m``
segments are opened, and their pooled pages are re-ranked by embedding
cosine to pick a global ``top_k``. Segments that contribute at least one
selected page are touched (visit count + last access) unless the caller
asks for a dry run.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from . import lpm, mtm as mtm_ops, stm as stm_ops
from .errors import InvalidArgumentError
from .model import Config, DialoguePage, RetrievalBundle
from .mtm import MidTermMemory
from .providers import Provider
from .similarity import cosine
from .stm import ShortTermMemory

__all__ = ["RetrievalOutcome", "retrieve", "assemble_prompt", "bundle_token_count"]


@dataclass(frozen=True)
class RetrievalOutcome:
    bundle: RetrievalBundle
    mtm: MidTermMemory


def retrieve(stm: ShortTermMemory, mtm: MidTermMemory, persona, query: str,
             config: Config, provider: Provider, now: int, *,
             touch: bool = True) -> RetrievalOutcome:
    """Recall memory for ``query`` and return it with the touched mid-term tier.

    With ``touch=False`` the returned mid-term tier is the input value
    (dry run). Ordering is fully deterministic: segment ranking ties break
    by last access (newest first) then id; page ranking ties break by
    timestamp (newest first) then id.
    """
    if not query:
        raise InvalidArgumentError("query must be non-empty")

    query_embedding = provider.embed(query)
    query_keywords = provider.extract_keywords(query)
    probe = DialoguePage(
        id=-1, query=query, response="", timestamp=now,
        keywords=query_keywords, embedding=query_embedding,
    )

    ranked_segments = sorted(
        mtm.segments,
        key=lambda s: (-mtm_ops.f_score(probe, s), -s.last_access, s.id),
    )[: config.top_m_segments]

    pool = [
        (cosine(page.embedding, query_embedding), page, segment.id)
        for segment in ranked_segments
        for page in segment.pages
    ]
    pool.sort(key=lambda row: (-row[0], -row[1].timestamp, row[1].id))
    selected = pool[: config.top_k_pages]

    new_mtm = mtm
    if touch:
        contributing = sorted({segment_id for _, _, segment_id in selected})
        for segment_id in contributing:
            new_mtm = mtm_ops.touch(new_mtm, segment_id, now)

    hits = lpm.retrieve_persona(persona, query_embedding, config.lpm_top_n)
    bundle = RetrievalBundle(
        stm_pages=stm_ops.all_pages(stm),
        mtm_pages=tuple((page, score) for score, page, _ in selected),
        user_kb_hits=hits.user_kb_hits,
        agent_trait_hits=hits.agent_trait_hits,
        user_profile=hits.user_profile,
        user_traits=hits.user_traits,
        agent_profile=hits.agent_profile,
    )
    return RetrievalOutcome(bundle=bundle, mtm=new_mtm)


# ---------------------------------------------------------------------------
# Prompt assembly
# ---------------------------------------------------------------------------

_template_cache: str | None = None


def _template() -> str:
    global _template_cache
    if _template_cache is None:
        _template_cache = (
            resources.files("hiermem.data").joinpath("prompt_template.txt").read_text("utf-8")
        )
    return _template_cache


def _render_profile(profile: dict) -> str:
    if not profile:
        return "(none)"
    return "\n".join(f"{key}: {profile[key]}" for key in sorted(profile))


def _render_traits(traits: dict) -> str:
    if not traits:
        return "(none)"
    return "\n".join(
        f"{dim}: {traits[dim].value} (confidence {traits[dim].confidence:.2f})"
        for dim in sorted(traits)
    )


def _render_facts(hits) -> str:
    if not hits:
        return "(none)"
    return "\n".join(f"- [{score:.4f}] {entry.text}" for entry, score in hits)


def _render_mtm_pages(pairs) -> str:
    if not pairs:
        return "(none)"
    lines = []
    for page, score in pairs:
        lines.append(f"- [{score:.4f}] (t={page.timestamp}) user: {page.query}")
        lines.append(f"  agent: {page.response}")
    return "\n".join(lines)


def _render_stm_pages(pages) -> str:
    if not pages:
        return "(none)"
    lines = []
    for page in pages:
        lines.append(f"(t={page.timestamp}) user: {page.query}")
        lines.append(f"agent: {page.response}")
    return "\n".join(lines)


def assemble_prompt(bundle: RetrievalBundle, query: str) -> str:
    """Render the bundle into the versioned prompt template.

    Same bundle and query always produce the same string; section order is
    fixed by the template (persona first, then recalled history, then the
    live query).
    """
    return _template().format(
        agent_profile=_render_profile(bundle.agent_profile),
        agent_traits=_render_facts(bundle.agent_trait_hits),
        user_profile=_render_profile(bundle.user_profile),
        user_traits=_render_traits(bundle.user_traits),
        user_kb=_render_facts(bundle.user_kb_hits),
        mtm_pages=_render_mtm_pages(bundle.mtm_pages),
        stm_pages=_render_stm_pages(bundle.stm_pages),
        query=query,
    )


def bundle_token_count(bundle: RetrievalBundle) -> int:
    """Whitespace tokens across everything the bundle recalled.

    This is the "memory tokens" number surfaced by the replay report; it
    counts recalled content only, not template scaffolding.
    """
    total = 0
    for page in bundle.stm_pages:
        total += len(page.text.split())
    for page, _ in bundle.mtm_pages:
        total += len(page.text.split())
    for entry, _ in bundle.user_kb_hits:
        total += len(entry.text.split())
    for entry, _ in bundle.agent_trait_hits:
        total += len(entry.text.split())
    for mapping in (bundle.user_profile, bundle.agent_profile):
        for key in mapping:
            total += len(str(mapping[key]).split())
    for dim in bundle.user_traits:
        total += len(bundle.user_traits[dim].value.split())
    return total
