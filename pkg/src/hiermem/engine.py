"""Stateful orchestration: one user's memory and the exchange pipeline.

The tiers themselves are immutable values; :class:`MemoryEngine` holds the
current :class:`MemoryState` and swaps in a new one only when a pipeline
run completes. A provider failure anywhere before that swap therefore
leaves memory exactly as it was (the atomicity contract), with one
deliberate exception: persona promotion failures are logged and skipped
while the rest of the exchange still commits, so a flaky provider can
never wedge a hot segment.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from . import lpm, mtm as mtm_ops, retrieval, stm as stm_ops
from .errors import InvalidArgumentError, ProviderUnavailableError
from .model import Config, PersonaStore, RetrievalBundle, Segment, new_page, validate_config
from .mtm import MidTermMemory
from .providers import Provider, StubProvider
from .stm import ShortTermMemory

logger = logging.getLogger(__name__)

__all__ = ["MemoryState", "ExchangeReport", "TurnResult", "MemoryEngine", "empty_state"]


@dataclass(frozen=True)
class MemoryState:
    """Everything persisted for one user, as a single immutable value."""

    user_id: str
    stm: ShortTermMemory
    mtm: MidTermMemory
    persona: PersonaStore = field(default_factory=PersonaStore)
    next_page_id: int = 1


def empty_state(user_id: str, config: Config) -> MemoryState:
    return MemoryState(
        user_id=user_id,
        stm=ShortTermMemory(capacity=config.stm_capacity),
        mtm=MidTermMemory(capacity=config.mtm_segment_capacity),
        persona=PersonaStore(),
        next_page_id=1,
    )


@dataclass(frozen=True)
class ExchangeReport:
    """Outcome of absorbing one query/response exchange."""

    state: MemoryState
    evicted: tuple[Segment, ...]
    promoted_segment_ids: tuple[int, ...]


@dataclass(frozen=True)
class TurnResult:
    """Outcome of a full respond pipeline run."""

    response: str
    bundle: RetrievalBundle
    evicted: tuple[Segment, ...]
    promoted_segment_ids: tuple[int, ...]
    provider_calls: int
    tokens_in: int
    tokens_out: int
    recalled_tokens: int


def absorb_exchange(state: MemoryState, query: str, response: str, now: int,
                    config: Config, provider: Provider) -> ExchangeReport:
    """Append one exchange and run the update cascade, functionally.

    Short-term append, overflow routing into the mid-term store, eviction,
    and persona promotion of hot segments all happen against local values;
    the caller decides whether to commit the returned state.
    """
    page = new_page(query, response, now, page_id=state.next_page_id)
    appended = stm_ops.append(state.stm, page, provider)

    new_mtm = state.mtm
    evicted: tuple[Segment, ...] = ()
    if appended.overflow is not None:
        inserted = mtm_ops.insert_page(
            new_mtm, appended.overflow, config.theta, provider, now,
            alpha=config.alpha, beta=config.beta, gamma=config.gamma, mu=config.mu,
        )
        new_mtm = inserted.mtm
        if inserted.evicted is not None:
            evicted = (inserted.evicted,)

    persona = state.persona
    promoted: list[int] = []
    hot = mtm_ops.hot_segments(
        new_mtm, config.heat_tau, now,
        alpha=config.alpha, beta=config.beta, gamma=config.gamma, mu=config.mu,
    )
    for segment in hot:
        try:
            persona = lpm.promote(
                persona, segment, config.trait_schema, provider, now,
                kb_capacity=config.kb_capacity,
                traits_capacity=config.agent_traits_capacity,
            )
        except ProviderUnavailableError:
            # The attempt still counts; content is retried on a later cycle.
            logger.warning("persona promotion skipped for segment %d (provider unavailable)",
                           segment.id)
        new_mtm = mtm_ops.reset_after_promotion(new_mtm, segment.id)
        promoted.append(segment.id)

    new_state = replace(
        state, stm=appended.stm, mtm=new_mtm, persona=persona,
        next_page_id=state.next_page_id + 1,
    )
    return ExchangeReport(state=new_state, evicted=evicted,
                          promoted_segment_ids=tuple(promoted))


class MemoryEngine:
    """Single-user facade over the tier operations.

    Not thread-safe; the service wraps each engine in a per-user lock.
    All clock input is caller-supplied so runs can be replayed exactly.
    """

    def __init__(self, user_id: str, config: Config | None = None,
                 provider: Provider | None = None, state: MemoryState | None = None):
        self.config = validate_config(config or Config())
        self.provider = provider if provider is not None else StubProvider(dim=self.config.embedding_dim)
        self.user_id = user_id
        self._state = state if state is not None else empty_state(user_id, self.config)

    @property
    def state(self) -> MemoryState:
        return self._state

    def respond(self, query: str, now: int) -> TurnResult:
        """Run the full pipeline: recall, generate, absorb, promote.

        Commits the new state only if every required provider call
        succeeds; a provider failure surfaces with memory unchanged.
        """
        calls_before = len(self.provider.log)
        tokens_before = self.provider.log.total_tokens()

        outcome = retrieval.retrieve(
            self._state.stm, self._state.mtm, self._state.persona,
            query, self.config, self.provider, now, touch=True,
        )
        prompt = retrieval.assemble_prompt(outcome.bundle, query)
        response = self.provider.complete(prompt)

        staged = replace(self._state, mtm=outcome.mtm)
        report = absorb_exchange(staged, query, response, now, self.config, self.provider)
        self._state = report.state

        tokens_after = self.provider.log.total_tokens()
        return TurnResult(
            response=response,
            bundle=outcome.bundle,
            evicted=report.evicted,
            promoted_segment_ids=report.promoted_segment_ids,
            provider_calls=len(self.provider.log) - calls_before,
            tokens_in=tokens_after[0] - tokens_before[0],
            tokens_out=tokens_after[1] - tokens_before[1],
            recalled_tokens=retrieval.bundle_token_count(outcome.bundle),
        )

    def retrieve(self, query: str, now: int, *, touch: bool = False) -> RetrievalBundle:
        """Recall only. ``touch=True`` commits the visit-count updates."""
        outcome = retrieval.retrieve(
            self._state.stm, self._state.mtm, self._state.persona,
            query, self.config, self.provider, now, touch=touch,
        )
        if touch:
            self._state = replace(self._state, mtm=outcome.mtm)
        return outcome.bundle

    def ingest(self, query: str, response: str, now: int) -> ExchangeReport:
        """Absorb a pre-existing exchange without generating a response."""
        if not query:
            raise InvalidArgumentError("query must be non-empty")
        report = absorb_exchange(self._state, query, response, now, self.config, self.provider)
        self._state = report.state
        return report

    def tier_counts(self) -> dict[str, int]:
        state = self._state
        return {
            "stm_pages": len(state.stm.pages),
            "mtm_segments": len(state.mtm.segments),
            "mtm_pages": sum(len(s.pages) for s in state.mtm.segments),
            "user_kb": len(state.persona.user_kb),
            "agent_traits": len(state.persona.agent_traits),
            "user_trait_dims": len(state.persona.user_traits),
        }
