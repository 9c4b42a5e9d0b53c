"""Held-out evaluation: batched prediction and per-case metrics in a thread pool."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Union

import numpy as np

from harness.synthetic import Dataset
from metrics.scores import case_metrics
from models.configs import EvalConfig
from models.reports import MetricReport
from network.hiperformer import HiPerformer
from utils.checkpoint import load_checkpoint

logger = logging.getLogger(__name__)


def predict_dataset(model: HiPerformer, images: np.ndarray, batch_size: int = 8) -> np.ndarray:
    batches = [model.predict(images[i : i + batch_size]) for i in range(0, len(images), batch_size)]
    return np.concatenate(batches) if batches else np.zeros((0, *images.shape[2:]), dtype=np.int64)


def score_predictions(
    predictions: np.ndarray,
    labels: np.ndarray,
    num_classes: int,
    cfg: Optional[EvalConfig] = None,
) -> MetricReport:
    """Metrics of every (prediction, label) pair, computed in parallel and kept in case order."""
    cfg = cfg or EvalConfig()
    if predictions.shape != labels.shape:
        raise ValueError(f"predictions {predictions.shape} and labels {labels.shape} differ")

    def score(case: int):
        return case_metrics(
            case, predictions[case], labels[case], num_classes, cfg.include_recall_iou, cfg.hd95_mode
        )

    with ThreadPoolExecutor(max_workers=cfg.num_workers) as pool:
        cases = list(pool.map(score, range(len(labels))))
    return MetricReport(num_classes=num_classes, cases=cases)


def evaluate(
    model: Union[HiPerformer, str, Path],
    dataset: Dataset,
    cfg: Optional[EvalConfig] = None,
    batch_size: int = 8,
) -> MetricReport:
    """Evaluate a model (or a checkpoint directory) on ``dataset``."""
    if not isinstance(model, HiPerformer):
        model, _ = load_checkpoint(model)
    num_classes = model.cfg.num_classes
    if dataset.labels.size and dataset.labels.max() >= num_classes:
        raise ValueError(f"dataset has class ids >= the model's {num_classes} classes")
    if dataset.images.shape[1:] != (model.cfg.in_channels, model.cfg.image_size, model.cfg.image_size):
        raise ValueError(f"dataset images {dataset.images.shape[1:]} do not match the model input")

    predictions = predict_dataset(model, dataset.images, batch_size)
    report = score_predictions(predictions, dataset.labels, num_classes, cfg)
    logger.info("evaluated %d cases: mean DSC %.2f%%, mean HD95 %.3f", len(dataset), 100 * report.mean_dsc, report.mean_hd95)
    return report


def write_report(report: MetricReport, path: Union[str, Path]) -> None:
    """One JSON line per case followed by the aggregate record."""
    with open(path, "w") as f:
        for case in report.cases:
            f.write(json.dumps({"record": "case", **case.model_dump()}, sort_keys=True) + "\n")
        aggregate = {
            "record": "aggregate",
            "mean_dsc_percent": 100.0 * report.mean_dsc,
            "mean_hd95": report.mean_hd95,
            "per_class_dsc_percent": {str(k): 100.0 * v for k, v in report.per_class_dsc.items()},
        }
        if report.mean_recall is not None:
            aggregate.update(mean_recall=report.mean_recall, mean_iou=report.mean_iou)
        f.write(json.dumps(aggregate, sort_keys=True) + "\n")


def format_table(report: MetricReport) -> str:
    """Plain-text table: one row per foreground class plus the mean row."""
    rows = report.rows()
    extra = "recall" in rows[-1]
    header = f"{'class':>6} {'DSC %':>8} {'HD95':>8}" + (f" {'Recall':>8} {'IoU':>8}" if extra else "")
    lines = [header, "-" * len(header)]
    for row in rows:
        line = f"{row['class']!s:>6} {row['dsc_percent']:8.2f} {row['hd95']:8.3f}"
        if extra:
            line += f" {row.get('recall', 0.0):8.4f} {row.get('iou', 0.0):8.4f}"
        lines.append(line)
    return "\n".join(lines)
