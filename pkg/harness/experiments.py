"""Ablation and alpha-sweep protocols on the synthetic dataset."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Sequence

from harness.evaluator import evaluate
from harness.synthetic import generate_dataset
from harness.trainer import train
from models.configs import ExperimentConfig
from models.reports import AblationRow, SweepRow

logger = logging.getLogger(__name__)

# (local, global, lgff, pmi, pga)
ABLATION_SWITCHES: tuple[tuple[bool, bool, bool, bool, bool], ...] = (
    (True, False, False, True, True),
    (False, True, False, True, True),
    (True, True, True, False, False),
    (True, True, True, False, True),
    (True, True, True, True, False),
    (True, True, True, True, True),
)

SWEEP_ALPHAS = (0.1, 0.3, 0.5, 0.7, 0.9)


def _with(exp: ExperimentConfig, name: str, **sections: dict) -> ExperimentConfig:
    values = exp.model_dump()
    values["name"] = name
    for section, updates in sections.items():
        values[section].update(updates)
    return ExperimentConfig(**values)


def ablate(
    base: ExperimentConfig,
    seeds: Sequence[int] = (0,),
    runs_dir: Optional[Path] = None,
    quiet: bool = True,
) -> list[AblationRow]:
    """Train and evaluate the six switch combinations, averaging DSC/HD95 over ``seeds``."""
    test = generate_dataset(base.data, "test")
    train_set = generate_dataset(base.data, "train")
    rows = []
    for local, global_, lgff, pmi, pga in ABLATION_SWITCHES:
        tag = "".join("1" if s else "0" for s in (local, global_, lgff, pmi, pga))
        dsc, hd = [], []
        for seed in seeds:
            exp = _with(
                base,
                f"{base.name}-ablate-{tag}-s{seed}",
                model=dict(use_local=local, use_global=global_, use_lgff=lgff, use_pmi=pmi, use_pga=pga),
                train=dict(seed=seed),
            )
            run_dir = Path(runs_dir) / exp.name if runs_dir is not None else None
            result = train(exp, run_dir, dataset=train_set, quiet=quiet)
            report = evaluate(result.model, test, exp.eval)
            dsc.append(report.mean_dsc)
            hd.append(report.mean_hd95)
        rows.append(
            AblationRow(
                local=local,
                global_=global_,
                lgff=lgff,
                pmi=pmi,
                pga=pga,
                dsc_percent=100.0 * sum(dsc) / len(dsc),
                hd95=sum(hd) / len(hd),
                seeds=list(seeds),
            )
        )
        logger.info("ablation %s: DSC %.2f%%", tag, rows[-1].dsc_percent)
    return rows


def alpha_sweep(
    base: ExperimentConfig,
    alphas: Sequence[float] = SWEEP_ALPHAS,
    runs_dir: Optional[Path] = None,
    quiet: bool = True,
) -> list[SweepRow]:
    """Train and evaluate one model per loss weight alpha."""
    test = generate_dataset(base.data, "test")
    train_set = generate_dataset(base.data, "train")
    rows = []
    for alpha in alphas:
        exp = _with(base, f"{base.name}-alpha-{alpha:g}", loss=dict(alpha=alpha))
        run_dir = Path(runs_dir) / exp.name if runs_dir is not None else None
        result = train(exp, run_dir, dataset=train_set, quiet=quiet)
        report = evaluate(result.model, test, exp.eval)
        rows.append(SweepRow(alpha=alpha, dsc_percent=100.0 * report.mean_dsc, hd95=report.mean_hd95))
        logger.info("alpha %.1f: DSC %.2f%%, HD95 %.3f", alpha, rows[-1].dsc_percent, rows[-1].hd95)
    return rows


def format_ablation(rows: Sequence[AblationRow]) -> str:
    mark = {True: "x", False: "-"}
    header = f"{'Local':>6} {'Global':>6} {'LGFF':>6} {'PMI':>6} {'PGA':>6} {'DSC %':>8} {'HD95':>8}"
    lines = [header, "-" * len(header)]
    for r in rows:
        flags = " ".join(f"{mark[v]:>6}" for v in (r.local, r.global_, r.lgff, r.pmi, r.pga))
        lines.append(f"{flags} {r.dsc_percent:8.2f} {r.hd95:8.3f}")
    return "\n".join(lines)


def format_sweep(rows: Sequence[SweepRow]) -> str:
    header = f"{'alpha':>6} {'DSC %':>8} {'HD95':>8}"
    lines = [header, "-" * len(header)]
    lines += [f"{r.alpha:6.1f} {r.dsc_percent:8.2f} {r.hd95:8.3f}" for r in rows]
    return "\n".join(lines)
