"""Tiered conversational memory for long-running assistants.

Recent exchanges sit in a bounded short-term queue; overflow is routed
into topically coherent mid-term segments whose usage heat drives both
eviction and promotion; hot segments are distilled into a long-term
persona store of facts and traits. Retrieval recalls from all three tiers
to ground each response.
"""

from .engine import MemoryEngine, MemoryState, TurnResult, empty_state
from .errors import (
    ConfigError,
    HiermemError,
    InvalidArgumentError,
    NotFoundError,
    ProviderUnavailableError,
    SnapshotCorruptionError,
    SnapshotError,
    SnapshotParseError,
    SnapshotVersionError,
    TranscriptError,
)
from .evaluation import Transcript, bleu1, f1, load_transcript, replay, write_report
from .model import (
    Config,
    DialoguePage,
    FactEntry,
    PersonaStore,
    RetrievalBundle,
    Segment,
    TraitSchema,
    TraitValue,
    default_trait_schema,
    new_page,
    validate_config,
)
from .mtm import MidTermMemory
from .persistence import MemorySnapshot, load, save, snapshot_of
from .providers import Provider, RemoteProvider, RequestLog, StubProvider
from .service import create_app
from .stm import ShortTermMemory

__version__ = "0.1.0"

__all__ = [
    "MemoryEngine",
    "MemoryState",
    "TurnResult",
    "empty_state",
    "Config",
    "DialoguePage",
    "FactEntry",
    "PersonaStore",
    "RetrievalBundle",
    "Segment",
    "TraitSchema",
    "TraitValue",
    "default_trait_schema",
    "new_page",
    "validate_config",
    "ShortTermMemory",
    "MidTermMemory",
    "MemorySnapshot",
    "load",
    "save",
    "snapshot_of",
    "Provider",
    "StubProvider",
    "RemoteProvider",
    "RequestLog",
    "create_app",
    "Transcript",
    "load_transcript",
    "replay",
    "write_report",
    "f1",
    "bleu1",
    "HiermemError",
    "InvalidArgumentError",
    "NotFoundError",
    "ProviderUnavailableError",
    "ConfigError",
    "SnapshotError",
    "SnapshotParseError",
    "SnapshotVersionError",
    "SnapshotCorruptionError",
    "TranscriptError",
    "__version__",
]
