"""Training-run logging as line-delimited JSON records."""
import json
import math
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path
from typing import Optional


@dataclass
class StepRecord:
    """Record of a single optimization step."""
    timestamp: str
    epoch: int
    step: int
    lr: float
    loss: float
    ce: float
    dice: float
    grad_norm: float


class RunTracker:
    """Append step records to ``train_log.jsonl`` and summarize the run."""

    def __init__(
        self,
        log_path: Optional[Path] = None,
        stall_window: int = 20,
        stall_tolerance: float = 1e-3,
        fresh: bool = True,
    ):
        if log_path is None:
            log_path = Path.cwd() / 'train_log.jsonl'

        self.log_path = Path(log_path)
        self.stall_window = stall_window
        self.stall_tolerance = stall_tolerance
        if fresh:
            self._init_file()

    def _init_file(self) -> None:
        """Start a fresh log file."""
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        self.log_path.write_text('')

    def _load_data(self) -> list[dict]:
        """Load step records from the log."""
        if not self.log_path.exists():
            return []

        with open(self.log_path, 'r') as f:
            return [json.loads(line) for line in f if line.strip()]

    def record_step(
        self,
        epoch: int,
        step: int,
        lr: float,
        loss: float,
        ce: float,
        dice: float,
        grad_norm: float
    ) -> StepRecord:
        """Append one optimization step."""
        record = StepRecord(
            timestamp=datetime.now().isoformat(),
            epoch=epoch,
            step=step,
            lr=lr,
            loss=loss,
            ce=ce,
            dice=dice,
            grad_norm=grad_norm
        )

        with open(self.log_path, 'a') as f:
            f.write(json.dumps(asdict(record), sort_keys=True) + '\n')
        return record

    def get_history(self, last: Optional[int] = None) -> list[StepRecord]:
        """Get step records in step order, optionally only the last N."""
        history = [StepRecord(**record) for record in self._load_data()]
        history.sort(key=lambda r: r.step)
        return history[-last:] if last else history

    def loss_curve(self) -> list[float]:
        """Loss per step, without timestamps (comparable across runs)."""
        return [record.loss for record in self.get_history()]

    def epoch_losses(self) -> dict[int, float]:
        """Mean loss per epoch."""
        totals: dict[int, list[float]] = {}
        for record in self.get_history():
            totals.setdefault(record.epoch, []).append(record.loss)
        return {epoch: sum(v) / len(v) for epoch, v in sorted(totals.items())}

    def get_summary(self) -> dict:
        """Get current run status."""
        history = self.get_history()
        if not history:
            return {'steps': 0, 'status': 'OK'}

        losses = [r.loss for r in history]
        first_window = losses[: self.stall_window]
        last_window = losses[-self.stall_window:]
        first_mean = sum(first_window) / len(first_window)
        last_mean = sum(last_window) / len(last_window)

        return {
            'steps': len(history),
            'epochs': history[-1].epoch + 1,
            'first_loss': losses[0],
            'last_loss': losses[-1],
            'best_loss': min(losses),
            'improvement': first_mean - last_mean,
            'last_lr': history[-1].lr,
            'status': self._get_status_level(losses, first_mean, last_mean)
        }

    def _get_status_level(self, losses: list[float], first_mean: float, last_mean: float) -> str:
        """Get status level from the loss trend."""
        if any(not math.isfinite(v) for v in losses) or last_mean > 2 * first_mean:
            return 'DIVERGED'
        elif len(losses) >= 2 * self.stall_window and first_mean - last_mean < self.stall_tolerance:
            return 'STALLED'
        else:
            return 'OK'
