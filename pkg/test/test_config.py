"""Tests for the environment-driven process configuration."""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

from config import LOG_LEVELS, Config


def test_run_dir_is_under_runs_dir():
    assert Config.run_dir("desk") == Config.RUNS_DIR / "desk"


def test_runs_dir_is_created(tmp_path, monkeypatch):
    monkeypatch.setattr(Config, "RUNS_DIR", tmp_path / "runs" / "nested")
    assert Config.validate_runs_dir()
    assert (tmp_path / "runs" / "nested").is_dir()


def test_log_level_validation(monkeypatch):
    monkeypatch.setattr(Config, "LOG_LEVEL", "VERBOSE")
    assert not Config.validate_log_level()
    Config.configure_logging()
    for level in LOG_LEVELS:
        monkeypatch.setattr(Config, "LOG_LEVEL", level)
        assert Config.validate_log_level()
