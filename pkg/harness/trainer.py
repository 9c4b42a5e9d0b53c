"""Minibatch training loop: augment, forward, loss, backward, clip, AdamW, cosine schedule."""
from __future__ import annotations

import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from tqdm import tqdm

from harness.augment import augment_batch
from harness.optim import AdamW, clip_parameters, cosine_lr
from harness.run_tracker import RunTracker
from harness.synthetic import Dataset, generate_dataset
from metrics.losses import loss_terms
from models.configs import ExperimentConfig
from network.hiperformer import HiPerformer
from tensor.tensor import NonFiniteError, Tensor, backward, current_tape
from utils.checkpoint import save_checkpoint

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """Raised when the loss becomes non-finite."""


@dataclass
class TrainResult:
    model: HiPerformer
    steps: int
    losses: list[float] = field(default_factory=list)
    checkpoint: Optional[Path] = None
    log_path: Optional[Path] = None

    def epoch_means(self, steps_per_epoch: int) -> list[float]:
        chunks = [self.losses[i : i + steps_per_epoch] for i in range(0, len(self.losses), steps_per_epoch)]
        return [sum(c) / len(c) for c in chunks]


def steps_per_epoch(n_samples: int, batch_size: int) -> int:
    return math.ceil(n_samples / batch_size)


def train(
    exp: ExperimentConfig,
    run_dir: Optional[Path] = None,
    dataset: Optional[Dataset] = None,
    quiet: bool = False,
) -> TrainResult:
    """
    Train a model for ``exp`` on its synthetic training split.

    Args:
        exp: Experiment configuration
        run_dir: Where the checkpoint and ``train_log.jsonl`` go; nothing is written when None
        dataset: Training data; generated from ``exp.data`` when omitted
        quiet: Disable the progress bar

    Returns:
        Trained model, step count and per-step losses
    """
    cfg = exp.train
    data = dataset if dataset is not None else generate_dataset(exp.data, "train")
    if len(data) == 0:
        raise ValueError("training set is empty")

    model = HiPerformer(exp.model, seed=cfg.seed)
    model.train()
    optimizer = AdamW(model.parameters(), cfg.lr, cfg.weight_decay, cfg.betas, cfg.adam_eps)
    rng = np.random.default_rng([cfg.seed, 1])
    tracker = RunTracker(Path(run_dir) / "train_log.jsonl") if run_dir is not None else None

    per_epoch = steps_per_epoch(len(data), cfg.batch_size)
    total = per_epoch * cfg.epochs
    if cfg.max_steps is not None:
        total = min(total, cfg.max_steps)
    logger.info(
        "training %d steps (%d per epoch, %d parameters)", total, per_epoch, model.num_parameters()
    )

    losses: list[float] = []
    step = 0
    progress = tqdm(total=total, disable=quiet or not sys.stderr.isatty(), desc=exp.name)
    try:
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(data))
            for start in range(0, len(data), cfg.batch_size):
                if step >= total:
                    break
                position = epoch if cfg.schedule_unit == "epoch" else step
                lr = cosine_lr(position, cfg.t_max, cfg.lr, cfg.eta_min)
                index = order[start : start + cfg.batch_size]
                images, labels = data.images[index], data.labels[index]
                if cfg.flip or cfg.rotate:
                    images, labels = augment_batch(images, labels, rng, cfg.flip, cfg.rotate, cfg.aug_prob)

                optimizer.zero_grad()
                current_tape().clear()
                try:
                    logits = model(Tensor(images)).logits
                    loss, ce, dice = loss_terms(logits, labels, exp.loss)
                except NonFiniteError as exc:
                    current_tape().clear()
                    last = losses[-1] if losses else float("nan")
                    raise TrainingDivergedError(
                        f"non-finite values at epoch {epoch}, step {step} (last finite loss {last:.6f}): {exc}"
                    ) from exc
                value = loss.item()
                if not math.isfinite(value):
                    current_tape().clear()
                    raise TrainingDivergedError(f"loss became {value} at epoch {epoch}, step {step}")

                backward(loss)
                grad_norm = clip_parameters(optimizer.params, cfg.clip_norm)
                optimizer.step(lr)

                losses.append(value)
                if tracker is not None:
                    tracker.record_step(epoch, step, lr, value, ce.item(), dice.item(), grad_norm)
                if step % cfg.log_every == 0:
                    logger.debug("epoch %d step %d lr %.3g loss %.5f", epoch, step, lr, value)
                progress.update(1)
                progress.set_postfix(loss=f"{value:.4f}")
                step += 1
            if step >= total:
                break
    finally:
        progress.close()

    result = TrainResult(model=model, steps=step, losses=losses)
    if run_dir is not None:
        result.checkpoint = save_checkpoint(
            model,
            Path(run_dir) / "checkpoint",
            step=step,
            extra={"loss": exp.loss.model_dump(), "train": exp.train.model_dump(mode="json")},
        ).parent
        result.log_path = tracker.log_path
    return result
