"""Snapshot persistence and the eviction archive.

Snapshots are canonical UTF-8 JSON: fields in declaration order, map keys
sorted, keyword sets as sorted lists, timestamps as integers. Floats rely
on Python's shortest-round-trip repr, so identical states always serialize
to identical bytes and every value survives a round trip bit-exactly.

Writes are atomic: serialize to a temp file in the destination directory,
fsync, then rename over the old file. A crash mid-save leaves the previous
snapshot intact.

Layout under a data directory:

    <data_dir>/<user_id>/memory.json      current snapshot
    <data_dir>/<user_id>/archive.jsonl    evicted segments, append-only
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .engine import MemoryState
from .errors import (
    InvalidArgumentError,
    SnapshotCorruptionError,
    SnapshotParseError,
    SnapshotVersionError,
)
from .model import Config, PersonaStore, Segment
from .mtm import MidTermMemory
from .stm import ShortTermMemory

__all__ = [
    "FORMAT_VERSION",
    "MemorySnapshot",
    "snapshot_of",
    "canonical_json",
    "save",
    "load",
    "archive_segment",
    "validate_state",
    "user_memory_path",
    "user_archive_path",
    "wipe_user",
]

FORMAT_VERSION = 1


@dataclass(frozen=True)
class MemorySnapshot:
    """One user's full memory plus format metadata."""

    version: int
    user_id: str
    saved_at: int
    state: MemoryState

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": self.version,
            "user_id": self.user_id,
            "saved_at": self.saved_at,
            "stm": {
                "capacity": self.state.stm.capacity,
                "pages": [p.to_dict() for p in self.state.stm.pages],
            },
            "mtm": {
                "capacity": self.state.mtm.capacity,
                "segments": [s.to_dict() for s in self.state.mtm.segments],
                "next_segment_id": self.state.mtm.next_segment_id,
            },
            "persona": self.state.persona.to_dict(),
            "counters": {"next_page_id": self.state.next_page_id},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MemorySnapshot":
        from .model import DialoguePage  # local to keep module top uncluttered

        stm_data = data["stm"]
        mtm_data = data["mtm"]
        state = MemoryState(
            user_id=data["user_id"],
            stm=ShortTermMemory(
                capacity=int(stm_data["capacity"]),
                pages=tuple(DialoguePage.from_dict(p) for p in stm_data["pages"]),
            ),
            mtm=MidTermMemory(
                capacity=int(mtm_data["capacity"]),
                segments=tuple(Segment.from_dict(s) for s in mtm_data["segments"]),
                next_segment_id=int(mtm_data.get("next_segment_id", 1)),
            ),
            persona=PersonaStore.from_dict(data.get("persona", {})),
            next_page_id=int(data.get("counters", {}).get("next_page_id", 1)),
        )
        return cls(
            version=int(data["version"]),
            user_id=data["user_id"],
            saved_at=int(data["saved_at"]),
            state=state,
        )


def snapshot_of(state: MemoryState, saved_at: int) -> MemorySnapshot:
    return MemorySnapshot(version=FORMAT_VERSION, user_id=state.user_id,
                          saved_at=saved_at, state=state)


def canonical_json(payload: Mapping[str, Any]) -> str:
    """The one serialization used for snapshots and archives."""
    return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"


def user_memory_path(data_dir: Path | str, user_id: str) -> Path:
    return Path(data_dir) / user_id / "memory.json"


def user_archive_path(data_dir: Path | str, user_id: str) -> Path:
    return Path(data_dir) / user_id / "archive.jsonl"


def save(snapshot: MemorySnapshot, data_dir: Path | str, *, fsync: bool = True) -> Path:
    """Atomically write ``snapshot`` under its user directory."""
    target = user_memory_path(data_dir, snapshot.user_id)
    target.parent.mkdir(parents=True, exist_ok=True)
    payload = canonical_json(snapshot.to_dict()).encode("utf-8")

    tmp = target.with_name(target.name + ".tmp")
    fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o644)
    try:
        os.write(fd, payload)
        if fsync:
            os.fsync(fd)
    finally:
        os.close(fd)
    os.replace(tmp, target)
    if fsync:
        dir_fd = os.open(target.parent, os.O_RDONLY)
        try:
            os.fsync(dir_fd)
        finally:
            os.close(dir_fd)
    return target


def load(path: Path | str, *, config: Config | None = None) -> MemorySnapshot:
    """Read and re-validate a snapshot.

    Raises:
        FileNotFoundError: no snapshot at ``path``.
        SnapshotParseError: bytes are not JSON (message carries line/column).
        SnapshotVersionError: format version not supported.
        SnapshotCorruptionError: a tier invariant fails (message names it).
    """
    raw = Path(path).read_text("utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SnapshotParseError(
            f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise SnapshotParseError(f"{path}: snapshot root must be an object")
    version = data.get("version")
    if version != FORMAT_VERSION:
        raise SnapshotVersionError(f"unsupported snapshot version: {version!r}")
    try:
        snapshot = MemorySnapshot.from_dict(data)
    except (KeyError, TypeError, ValueError, InvalidArgumentError) as exc:
        raise SnapshotCorruptionError(f"snapshot structure invalid: {exc}") from exc
    validate_state(snapshot.state, config=config)
    return snapshot


def archive_segment(segment: Segment, data_dir: Path | str, user_id: str) -> Path:
    """Append one evicted segment to the user's archive (never rewrites)."""
    if not segment.pages:
        raise InvalidArgumentError("segment has no pages")
    path = user_archive_path(data_dir, user_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    line = json.dumps(segment.to_dict(), ensure_ascii=False) + "\n"
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(line)
    return path


def wipe_user(data_dir: Path | str, user_id: str) -> bool:
    """Delete a user's snapshot and archive; True if anything existed."""
    existed = False
    for path in (user_memory_path(data_dir, user_id), user_archive_path(data_dir, user_id)):
        if path.exists():
            path.unlink()
            existed = True
    user_dir = Path(data_dir) / user_id
    if user_dir.is_dir() and not any(user_dir.iterdir()):
        user_dir.rmdir()
    return existed


# ---------------------------------------------------------------------------
# Invariant validation
# ---------------------------------------------------------------------------

def validate_state(state: MemoryState, *, config: Config | None = None) -> MemoryState:
    """Check every tier invariant; raises SnapshotCorruptionError naming it.

    With a ``config`` the persona queue bounds and embedding width are
    checked too (those capacities are configuration, not stored state).
    """
    stm = state.stm
    _check(len(stm.pages) <= stm.capacity, "stm queue exceeds capacity")

    seen_pages: set[int] = set()
    for page in stm.pages:
        _check(page.id not in seen_pages, f"duplicate page id {page.id}")
        seen_pages.add(page.id)
        _check(bool(page.query), f"page {page.id} has an empty query")
        _check(page.timestamp >= 0, f"page {page.id} has a negative timestamp")
        _check(page.chain_id is not None, f"stm page {page.id} has no chain")
        _check(bool(page.chain_meta), f"stm page {page.id} has an empty chain meta")

    mtm = state.mtm
    _check(len(mtm.segments) <= mtm.capacity, "mtm segment count exceeds capacity")
    dims: set[int] = set()
    seen_segments: set[int] = set()
    for segment in mtm.segments:
        _check(segment.id not in seen_segments, f"duplicate segment id {segment.id}")
        seen_segments.add(segment.id)
        _check(segment.id < mtm.next_segment_id,
               f"segment id {segment.id} not below the id counter")
        _check(len(segment.pages) > 0, f"segment {segment.id} has no pages")
        _check(segment.n_visit >= 0, f"segment {segment.id} has negative n_visit")
        _check(segment.l_interaction >= 0, f"segment {segment.id} has negative l_interaction")
        _check(segment.l_interaction <= len(segment.pages),
               f"segment {segment.id} l_interaction exceeds page count")
        _check(segment.last_access >= 0, f"segment {segment.id} has a negative last_access")
        _check(len(segment.embedding) > 0, f"segment {segment.id} has no embedding")
        dims.add(len(segment.embedding))
        for page in segment.pages:
            _check(page.id not in seen_pages, f"duplicate page id {page.id}")
            seen_pages.add(page.id)
            _check(bool(page.query), f"page {page.id} has an empty query")
            _check(page.timestamp >= 0, f"page {page.id} has a negative timestamp")
            _check(page.embedding is not None, f"mtm page {page.id} has no embedding")
            dims.add(len(page.embedding))

    _check(all(pid < state.next_page_id for pid in seen_pages),
           "a page id is not below the id counter")

    persona = state.persona
    for queue_name, queue in (("user_kb", persona.user_kb), ("agent_traits", persona.agent_traits)):
        for entry in queue:
            _check(bool(entry.text), f"{queue_name} entry has empty text")
            _check(entry.created_at >= 0, f"{queue_name} entry has a negative created_at")
            _check(len(entry.embedding) > 0, f"{queue_name} entry has no embedding")
            dims.add(len(entry.embedding))
    for dim_name, trait in persona.user_traits.items():
        _check(0.0 <= trait.confidence <= 1.0,
               f"trait {dim_name} confidence outside [0, 1]")

    _check(len(dims) <= 1, "embedding dimensions are inconsistent across the state")

    if config is not None:
        _check(len(persona.user_kb) <= config.kb_capacity, "user_kb exceeds configured capacity")
        _check(len(persona.agent_traits) <= config.agent_traits_capacity,
               "agent_traits exceeds configured capacity")
        if dims:
            _check(dims == {config.embedding_dim},
                   "embedding dimension differs from configuration")
    return state


def _check(ok: bool, invariant: str) -> None:
    if not ok:
        raise SnapshotCorruptionError(invariant)
