#!/usr/bin/env python3
"""Replay a recorded transcript and score its question set.

Run with: python3 demos/02_replay_scoring.py

The transcript under tests/data covers four everyday topics and carries
eight questions tagged by reasoning category. Replay rebuilds memory from
the turns, answers each question through the full pipeline, and reports
token-F1 / BLEU-1 per category plus efficiency counters.
"""

from pathlib import Path

from hiermem import Config, StubProvider
from hiermem.evaluation import load_transcript, replay

transcript_path = Path(__file__).resolve().parent.parent / "tests" / "data" / "fixture_transcript.jsonl"
transcript = load_transcript(transcript_path)
print(f"transcript: {len(transcript.turns)} turns, {len(transcript.qa_items)} questions")

result = replay(transcript, config=Config(), provider=StubProvider())
report = result.report

print()
print("answers (stub provider, so predictions are prompt echoes):")
for answer in report.answers[:3]:
    print(f"  [{answer.category}] {answer.question}")
    print(f"    -> {answer.prediction[:70]}...")
    print(f"    f1={answer.f1:.3f} bleu1={answer.bleu1:.3f}"
          f" recalled_tokens={answer.recalled_tokens}")

print()
print("per-category means:")
for category, stats in report.per_category().items():
    print(f"  {category:<12} n={stats['count']:.0f}"
          f" f1={stats['f1_mean']:.3f} bleu1={stats['bleu1_mean']:.3f}")

print()
print("efficiency:")
print(f"  exchanges ingested:     {report.exchanges_ingested}")
print(f"  questions answered:     {report.responses}")
print(f"  total provider calls:   {report.total_provider_calls}")
print(f"  calls per response:     {report.avg_provider_calls_per_response}")
print(f"  prompt/response tokens: {report.total_tokens_in} / {report.total_tokens_out}")

# The same replay is byte-for-byte reproducible; the acceptance suite
# freezes these counters, so a drift here means the pipeline changed.
