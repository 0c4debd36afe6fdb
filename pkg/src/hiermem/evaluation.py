"""Transcript replay and answer-quality metrics.

Transcripts are JSONL: a header line carrying the schema version, then
``{"type": "turn", "speaker", "text", "timestamp"}`` lines in time order,
then optional ``{"type": "qa", "question", "gold_answer", "category"}``
lines. Replay ingests every exchange through the same update cascade the
service uses, answers each QA item with the full respond pipeline, and
reports token-level F1 and BLEU-1 per category alongside efficiency
counters read from the provider request log.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .engine import MemoryEngine
from .errors import TranscriptError
from .model import Config
from .providers import Provider

__all__ = [
    "TRANSCRIPT_SCHEMA",
    "CATEGORIES",
    "Turn",
    "QAItem",
    "Transcript",
    "parse_transcript",
    "load_transcript",
    "metric_tokens",
    "f1",
    "bleu1",
    "AnswerRecord",
    "ReplayReport",
    "ReplayResult",
    "replay",
    "write_report",
]

TRANSCRIPT_SCHEMA = 1
CATEGORIES = ("single_hop", "multi_hop", "temporal", "open_domain")
_SPEAKERS = ("user", "assistant")


@dataclass(frozen=True)
class Turn:
    speaker: str
    text: str
    timestamp: int


@dataclass(frozen=True)
class QAItem:
    question: str
    gold_answer: str
    category: str


@dataclass(frozen=True)
class Transcript:
    turns: tuple[Turn, ...]
    qa_items: tuple[QAItem, ...]


def parse_transcript(lines: Iterable[str], source: str = "<memory>") -> Transcript:
    """Parse JSONL transcript lines; errors carry the 1-based line number."""
    turns: list[Turn] = []
    qa_items: list[QAItem] = []
    header_seen = False
    last_timestamp: int | None = None

    for line_no, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        try:
            data = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise TranscriptError(f"{source}: invalid JSON: {exc.msg}", line_no) from exc
        if not isinstance(data, dict):
            raise TranscriptError(f"{source}: line must be a JSON object", line_no)

        if not header_seen:
            if "schema" not in data:
                raise TranscriptError(f"{source}: first line must carry a schema version", line_no)
            if data["schema"] != TRANSCRIPT_SCHEMA:
                raise TranscriptError(
                    f"{source}: unsupported schema version {data['schema']!r}", line_no)
            header_seen = True
            continue

        kind = data.get("type")
        if kind == "turn":
            speaker = data.get("speaker")
            if speaker not in _SPEAKERS:
                raise TranscriptError(f"{source}: unknown speaker {speaker!r}", line_no)
            text = data.get("text")
            if not isinstance(text, str) or not text:
                raise TranscriptError(f"{source}: turn text must be a non-empty string", line_no)
            try:
                timestamp = int(data["timestamp"])
            except (KeyError, TypeError, ValueError):
                raise TranscriptError(f"{source}: turn needs an integer timestamp", line_no) from None
            if timestamp < 0:
                raise TranscriptError(f"{source}: negative timestamp", line_no)
            if last_timestamp is not None and timestamp < last_timestamp:
                raise TranscriptError(f"{source}: timestamps must be non-decreasing", line_no)
            last_timestamp = timestamp
            turns.append(Turn(speaker=speaker, text=text, timestamp=timestamp))
        elif kind == "qa":
            question = data.get("question")
            gold = data.get("gold_answer")
            category = data.get("category")
            if not isinstance(question, str) or not question:
                raise TranscriptError(f"{source}: qa needs a non-empty question", line_no)
            if not isinstance(gold, str):
                raise TranscriptError(f"{source}: qa needs a gold_answer string", line_no)
            if category not in CATEGORIES:
                raise TranscriptError(f"{source}: unknown category {category!r}", line_no)
            qa_items.append(QAItem(question=question, gold_answer=gold, category=category))
        else:
            raise TranscriptError(f"{source}: unknown line type {kind!r}", line_no)

    if not header_seen:
        raise TranscriptError(f"{source}: transcript has no header line")
    return Transcript(turns=tuple(turns), qa_items=tuple(qa_items))


def load_transcript(path: Path | str) -> Transcript:
    path = Path(path)
    with open(path, encoding="utf-8") as handle:
        return parse_transcript(handle, source=str(path))


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

_PUNCT_RE = re.compile(r"[^\w\s]")


def metric_tokens(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return _PUNCT_RE.sub("", text.lower()).split()


def f1(prediction: str, gold: str) -> float:
    """Token-level F1 over bag-of-words overlap.

    Both empty scores 1.0 (vacuous match); exactly one empty scores 0.0.
    """
    pred = metric_tokens(prediction)
    ref = metric_tokens(gold)
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    overlap = sum((Counter(pred) & Counter(ref)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred)
    recall = overlap / len(ref)
    return 2 * precision * recall / (precision + recall)


def bleu1(prediction: str, gold: str) -> float:
    """Unigram precision times a brevity penalty.

    The penalty is 1 when the prediction is longer than the reference,
    otherwise exp(1 - |gold| / |pred|). An empty prediction scores 0.0.
    """
    pred = metric_tokens(prediction)
    ref = metric_tokens(gold)
    if not pred or not ref:
        return 0.0
    matched = sum((Counter(pred) & Counter(ref)).values())
    precision = matched / len(pred)
    if len(pred) > len(ref):
        penalty = 1.0
    else:
        penalty = math.exp(1.0 - len(ref) / len(pred))
    return precision * penalty


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnswerRecord:
    question: str
    prediction: str
    gold_answer: str
    category: str
    f1: float
    bleu1: float
    recalled_tokens: int
    provider_calls: int


@dataclass(frozen=True)
class ReplayReport:
    answers: tuple[AnswerRecord, ...]
    exchanges_ingested: int
    responses: int
    total_provider_calls: int
    avg_provider_calls_per_response: float
    total_tokens_in: int
    total_tokens_out: int

    def per_category(self) -> dict[str, dict[str, float]]:
        out: dict[str, dict[str, float]] = {}
        for category in CATEGORIES:
            rows = [a for a in self.answers if a.category == category]
            if not rows:
                continue
            out[category] = {
                "count": len(rows),
                "f1_mean": sum(a.f1 for a in rows) / len(rows),
                "bleu1_mean": sum(a.bleu1 for a in rows) / len(rows),
            }
        return out

    def to_dict(self) -> dict:
        overall: dict[str, float] = {}
        if self.answers:
            overall = {
                "count": len(self.answers),
                "f1_mean": sum(a.f1 for a in self.answers) / len(self.answers),
                "bleu1_mean": sum(a.bleu1 for a in self.answers) / len(self.answers),
            }
        return {
            "answers": [
                {
                    "question": a.question,
                    "prediction": a.prediction,
                    "gold_answer": a.gold_answer,
                    "category": a.category,
                    "f1": a.f1,
                    "bleu1": a.bleu1,
                    "recalled_tokens": a.recalled_tokens,
                    "provider_calls": a.provider_calls,
                }
                for a in self.answers
            ],
            "per_category": self.per_category(),
            "overall": overall,
            "exchanges_ingested": self.exchanges_ingested,
            "responses": self.responses,
            "total_provider_calls": self.total_provider_calls,
            "avg_provider_calls_per_response": self.avg_provider_calls_per_response,
            "total_tokens_in": self.total_tokens_in,
            "total_tokens_out": self.total_tokens_out,
        }


@dataclass(frozen=True)
class ReplayResult:
    engine: MemoryEngine
    report: ReplayReport


def pair_turns(turns: Sequence[Turn]) -> list[tuple[str, str, int]]:
    """Fold speaker turns into (query, response, timestamp) exchanges.

    A user turn opens an exchange; the next assistant turn closes it. A
    user turn arriving while one is open flushes the open exchange with an
    empty response. An assistant turn with nothing open is an error.
    """
    exchanges: list[tuple[str, str, int]] = []
    pending: tuple[str, int] | None = None
    for turn in turns:
        if turn.speaker == "user":
            if pending is not None:
                exchanges.append((pending[0], "", pending[1]))
            pending = (turn.text, turn.timestamp)
        else:
            if pending is None:
                raise TranscriptError("assistant turn with no preceding user turn")
            exchanges.append((pending[0], turn.text, pending[1]))
            pending = None
    if pending is not None:
        exchanges.append((pending[0], "", pending[1]))
    return exchanges


def replay(transcript: Transcript, config: Config | None = None,
           provider: Provider | None = None, *, user_id: str = "replay") -> ReplayResult:
    """Rebuild memory from a transcript and answer its QA items.

    With the stub provider the whole run is deterministic: same transcript,
    same bytes out, including the final memory state.
    """
    engine = MemoryEngine(user_id, config=config, provider=provider)
    exchanges = pair_turns(transcript.turns)
    for query, response, timestamp in exchanges:
        engine.ingest(query, response, timestamp)

    last_timestamp = transcript.turns[-1].timestamp if transcript.turns else 0
    answers: list[AnswerRecord] = []
    for offset, item in enumerate(transcript.qa_items, start=1):
        calls_before = len(engine.provider.log)
        result = engine.respond(item.question, now=last_timestamp + offset)
        answers.append(AnswerRecord(
            question=item.question,
            prediction=result.response,
            gold_answer=item.gold_answer,
            category=item.category,
            f1=f1(result.response, item.gold_answer),
            bleu1=bleu1(result.response, item.gold_answer),
            recalled_tokens=result.recalled_tokens,
            provider_calls=len(engine.provider.log) - calls_before,
        ))

    total_calls = len(engine.provider.log)
    tokens_in, tokens_out = engine.provider.log.total_tokens()
    responses = len(answers)
    report = ReplayReport(
        answers=tuple(answers),
        exchanges_ingested=len(exchanges),
        responses=responses,
        total_provider_calls=total_calls,
        avg_provider_calls_per_response=(total_calls / responses) if responses else 0.0,
        total_tokens_in=tokens_in,
        total_tokens_out=tokens_out,
    )
    return ReplayResult(engine=engine, report=report)


def write_report(report: ReplayReport, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n", "utf-8")
    return path
