"""CLI commands, exercised through click's runner (serve excluded)."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from hiermem.cli import main
from hiermem.engine import MemoryEngine
from hiermem.model import Config
from hiermem.persistence import save, snapshot_of, user_memory_path

FIXTURE = str(Path(__file__).parent / "data" / "fixture_transcript.jsonl")


@pytest.fixture
def runner():
    return CliRunner()


def seed_user(tmp_path, user_id="sam"):
    engine = MemoryEngine(user_id, Config(embedding_dim=32, stm_capacity=2))
    for i in range(4):
        engine.ingest(f"kayak rapids q{i}", "sure thing", 1_000 + 10 * i)
    save(snapshot_of(engine.state, saved_at=2_000), tmp_path)
    return engine


class TestInspect:
    def test_all_tiers_by_default(self, runner, tmp_path):
        seed_user(tmp_path)
        result = runner.invoke(main, ["inspect", "sam", "--data-dir", str(tmp_path)])
        assert result.exit_code == 0, result.output
        dump = json.loads(result.output)
        assert set(dump) == {"stm", "mtm", "lpm"}
        assert dump["stm"]["capacity"] == 2

    def test_single_tier(self, runner, tmp_path):
        seed_user(tmp_path)
        result = runner.invoke(main, ["inspect", "sam", "--tier", "mtm",
                                      "--data-dir", str(tmp_path)])
        dump = json.loads(result.output)
        assert dump["tier"] == "mtm"
        # Heat defaults to the snapshot's save time.
        assert dump["now"] == 2_000

    def test_now_override(self, runner, tmp_path):
        seed_user(tmp_path)
        result = runner.invoke(main, ["inspect", "sam", "--tier", "mtm",
                                      "--data-dir", str(tmp_path), "--now", "3000"])
        assert json.loads(result.output)["now"] == 3_000

    def test_unknown_user_fails_cleanly(self, runner, tmp_path):
        result = runner.invoke(main, ["inspect", "ghost", "--data-dir", str(tmp_path)])
        assert result.exit_code != 0
        assert "no snapshot" in result.output


class TestReplay:
    def test_report_to_stdout(self, runner):
        result = runner.invoke(main, ["replay", "--transcript", FIXTURE])
        assert result.exit_code == 0, result.output
        report = json.loads(result.output)
        assert report["exchanges_ingested"] == 20
        assert report["responses"] == 8

    def test_report_to_file_and_snapshot(self, runner, tmp_path):
        report_path = tmp_path / "report.json"
        result = runner.invoke(main, [
            "replay", "--transcript", FIXTURE,
            "--report", str(report_path),
            "--data-dir", str(tmp_path / "data"),
            "--user-id", "fixture",
        ])
        assert result.exit_code == 0, result.output
        assert json.loads(report_path.read_text())["responses"] == 8
        assert user_memory_path(tmp_path / "data", "fixture").exists()

    def test_config_file_honored(self, runner, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"embedding_dim": 16, "stm_capacity": 2}))
        result = runner.invoke(main, [
            "replay", "--transcript", FIXTURE, "--config", str(config_path),
        ])
        assert result.exit_code == 0, result.output

    def test_bad_config_fails_cleanly(self, runner, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"no_such_setting": 1}))
        result = runner.invoke(main, [
            "replay", "--transcript", FIXTURE, "--config", str(config_path),
        ])
        assert result.exit_code != 0
        assert "no_such_setting" in result.output

    def test_malformed_transcript_fails_cleanly(self, runner, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"schema": 1}\n{"type": "turn"}\n')
        result = runner.invoke(main, ["replay", "--transcript", str(bad)])
        assert result.exit_code != 0
        assert "line 2" in result.output


class TestWipe:
    def test_requires_confirmation(self, runner, tmp_path):
        seed_user(tmp_path)
        result = runner.invoke(main, ["wipe", "sam", "--data-dir", str(tmp_path)],
                               input="n\n")
        assert result.exit_code != 0
        assert user_memory_path(tmp_path, "sam").exists()

    def test_yes_flag_skips_prompt(self, runner, tmp_path):
        seed_user(tmp_path)
        result = runner.invoke(main, ["wipe", "sam", "--data-dir", str(tmp_path), "--yes"])
        assert result.exit_code == 0
        assert "wiped sam" in result.output
        assert not user_memory_path(tmp_path, "sam").exists()

    def test_missing_user_reports_nothing_stored(self, runner, tmp_path):
        result = runner.invoke(main, ["wipe", "ghost", "--data-dir", str(tmp_path), "--yes"])
        assert result.exit_code == 0
        assert "nothing stored" in result.output
