"""Tests for the JSON-lines training log."""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import json

import pytest

from harness.run_tracker import RunTracker


def _record(tracker, losses, per_epoch=2, lr=1e-3):
    for step, loss in enumerate(losses):
        tracker.record_step(step // per_epoch, step, lr, loss, loss * 0.6, loss * 0.4, 1.0)


def test_records_are_appended_as_json_lines(tmp_path):
    log = tmp_path / "run" / "train_log.jsonl"
    tracker = RunTracker(log)
    _record(tracker, [1.0, 0.8, 0.6])
    lines = log.read_text().splitlines()
    assert len(lines) == 3
    first = json.loads(lines[0])
    assert set(first) == {"timestamp", "epoch", "step", "lr", "loss", "ce", "dice", "grad_norm"}
    assert first["loss"] == 1.0


def test_history_curve_and_epoch_means(tmp_path):
    tracker = RunTracker(tmp_path / "log.jsonl")
    _record(tracker, [1.0, 0.8, 0.6, 0.4, 0.2])
    assert tracker.loss_curve() == [1.0, 0.8, 0.6, 0.4, 0.2]
    assert [r.step for r in tracker.get_history(last=2)] == [3, 4]
    epochs = tracker.epoch_losses()
    assert list(epochs) == [0, 1, 2]
    assert epochs[0] == pytest.approx(0.9) and epochs[2] == pytest.approx(0.2)


def test_fresh_tracker_truncates_and_reader_keeps(tmp_path):
    log = tmp_path / "log.jsonl"
    _record(RunTracker(log), [1.0, 0.5])
    assert len(RunTracker(log, fresh=False).get_history()) == 2
    assert RunTracker(log).get_history() == []


def test_summary_status_levels(tmp_path):
    improving = RunTracker(tmp_path / "a.jsonl", stall_window=2)
    _record(improving, [1.0, 0.9, 0.5, 0.4])
    summary = improving.get_summary()
    assert summary["status"] == "OK"
    assert summary["steps"] == 4 and summary["epochs"] == 2
    assert summary["best_loss"] == 0.4
    assert summary["improvement"] == pytest.approx(0.5)

    stalled = RunTracker(tmp_path / "b.jsonl", stall_window=2)
    _record(stalled, [0.5, 0.5, 0.5, 0.5])
    assert stalled.get_summary()["status"] == "STALLED"

    diverged = RunTracker(tmp_path / "c.jsonl", stall_window=2)
    _record(diverged, [0.5, 0.5, 3.0, 4.0])
    assert diverged.get_summary()["status"] == "DIVERGED"


def test_empty_summary(tmp_path):
    assert RunTracker(tmp_path / "empty.jsonl").get_summary() == {"steps": 0, "status": "OK"}
