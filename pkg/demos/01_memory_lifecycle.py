#!/usr/bin/env python3
"""Walk one user's memory through its whole lifecycle.

Run with: python3 demos/01_memory_lifecycle.py

Everything below uses the deterministic stub provider, so the printed
numbers are the same on every machine.
"""

from hiermem import Config, MemoryEngine, StubProvider
from hiermem.persistence import load, save, snapshot_of, user_memory_path

import tempfile

# A small configuration keeps the moving parts visible: the short-term
# queue holds one page, so every exchange after the first pushes its
# predecessor down into the mid-term segments. The stub's hashed
# bag-of-words embeddings score lower than a real embedding model would,
# so the segment-join threshold is lowered to match; the default of 0.6
# targets dense model embeddings.
config = Config(embedding_dim=64, stm_capacity=1, theta=0.35)
engine = MemoryEngine("demo-user", config, StubProvider(dim=64))

print("=== phase 1: a conversation about one topic ===")
exchanges = [
    ("Planning a kayak run through the river rapids this weekend", "Check the water level first"),
    ("What helmet works for kayak rapids?", "A full-cut whitewater helmet"),
    ("Should I scout the rapids before the kayak run?", "Always scout from the bank"),
    ("Best paddle length for river kayak work?", "Around 197 cm for your reach"),
    ("Any drills to roll the kayak reliably?", "Practice the sweep roll in flat water"),
    ("How cold is too cold for kayak sessions?", "Below ten degrees you want a drysuit"),
]
for i, (query, response) in enumerate(exchanges):
    report = engine.ingest(query, response, now=1_000 + 60 * i)
    counts = engine.tier_counts()
    note = f" promoted={list(report.promoted_segment_ids)}" if report.promoted_segment_ids else ""
    print(f"  exchange {i}: stm={counts['stm_pages']} mtm_pages={counts['mtm_pages']}"
          f" segments={counts['mtm_segments']} kb={counts['user_kb']}{note}")

# All six exchanges share vocabulary, so the overflowed pages clustered
# into a single segment. Its insertion count climbed until the heat score
# crossed the promotion threshold, at which point the persona store
# received one fact per page and the segment cooled back down.
(segment,) = engine.state.mtm.segments
print(f"  one segment: id={segment.id} pages={len(segment.pages)}"
      f" l_interaction={segment.l_interaction} (cooled after promotion)")
print(f"  persona facts: {[f.text for f in engine.state.persona.user_kb][:3]} ...")

print()
print("=== phase 2: a topic change, then recall ===")
engine.ingest("My sourdough starter looks sluggish", "Feed it twice a day", now=2_000)
engine.ingest("What hydration for the sourdough dough?", "Seventy five percent", now=2_060)

bundle = engine.retrieve("kayak rapids helmet", now=3_000)   # dry run by default
print("  recalled pages for 'kayak rapids helmet':")
for page, score in bundle.mtm_pages[:3]:
    print(f"    [{score:.3f}] {page.query}")
print(f"  segment visit count still {engine.state.mtm.segments[0].n_visit} (dry run)")

result = engine.respond("Remind me what paddle length you suggested?", now=3_100)
print(f"  respond() -> {result.response[:60]}...")
print(f"  provider calls this turn: {result.provider_calls},"
      f" recalled tokens: {result.recalled_tokens}")
print(f"  visit count after respond: {engine.state.mtm.segments[0].n_visit}")

print()
print("=== phase 3: snapshot round trip ===")
with tempfile.TemporaryDirectory() as data_dir:
    path = save(snapshot_of(engine.state, saved_at=3_200), data_dir)
    print(f"  wrote {path.stat().st_size} bytes of canonical JSON")
    reloaded = load(user_memory_path(data_dir, "demo-user"))
    print(f"  reload equals live state: {reloaded.state == engine.state}")
