"""Command-line interface for the segmentation harness."""
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import argparse
import json

import numpy as np

from pydantic import ValidationError

from config import config
from harness.evaluator import evaluate, format_table, write_report
from harness.experiments import alpha_sweep, ablate, format_ablation, format_sweep
from harness.gradcheck_suite import TOLERANCE, run_suite
from harness.run_tracker import RunTracker
from harness.synthetic import generate_dataset
from harness.trainer import TrainingDivergedError, train
from models.configs import load_experiment
from utils.checkpoint import CheckpointError, load_checkpoint
from utils.image_io import load_image, save_label


def print_banner(title: str):
    """Print section banner."""
    print("\n" + "="*60)
    print(f"  HiPerformer desk harness - {title}")
    print("="*60 + "\n")


def print_run_summary(tracker: RunTracker):
    """Print training summary."""
    summary = tracker.get_summary()

    print(f"\nRun Status: {summary['status']}")
    if summary['steps']:
        print(f"  Steps: {summary['steps']} over {summary['epochs']} epochs")
        print(f"  Loss: {summary['first_loss']:.4f} -> {summary['last_loss']:.4f} (best {summary['best_loss']:.4f})")
        print(f"  Final lr: {summary['last_lr']:.3g}")
    print()


def load_args_experiment(args):
    """Build the experiment from --config/--preset/--set."""
    overrides = [f"eval.num_workers={config.NUM_WORKERS}", *args.overrides]
    return load_experiment(args.config or config.EXPERIMENT_FILE, overrides, args.preset)


def cmd_train(args):
    exp = load_args_experiment(args)
    run_dir = config.run_dir(exp.name)
    print_banner(f"train '{exp.name}'")
    print(f"Run directory: {run_dir}")

    result = train(exp, run_dir, quiet=args.quiet)
    print_run_summary(RunTracker(result.log_path, fresh=False))

    report = evaluate(result.model, generate_dataset(exp.data, "test"), exp.eval)
    write_report(report, run_dir / "metrics.jsonl")
    print(format_table(report))
    print(f"\nCheckpoint: {result.checkpoint}\n")


def cmd_eval(args):
    exp = load_args_experiment(args)
    print_banner("evaluate")
    model, manifest = load_checkpoint(args.checkpoint)
    if model.cfg.num_classes != exp.data.num_classes:
        raise ValueError(
            f"checkpoint has {model.cfg.num_classes} classes but the dataset has {exp.data.num_classes}"
        )
    report = evaluate(model, generate_dataset(exp.data, "test"), exp.eval)
    print(f"Checkpoint: {args.checkpoint} (step {manifest.get('step', 0)})\n")
    print(format_table(report))
    if args.out:
        write_report(report, args.out)
        print(f"\nReport written to {args.out}")
    print()


def cmd_infer(args):
    model, _ = load_checkpoint(args.checkpoint)
    image = load_image(args.image, model.cfg.in_channels)
    labels = model.predict(image[None])[0]
    save_label(args.out, labels)
    counts = {int(k): int(v) for k, v in zip(*np.unique(labels, return_counts=True))}
    print(f"Wrote {args.out} (pixels per class: {json.dumps(counts)})")


def cmd_gradcheck(args):
    print_banner("gradient check")
    results = run_suite(seed=args.seed)
    print(f"{'Module':<18} {'max rel. error':>16}  ")
    print("-" * 40)
    failed = False
    for name, err in results.items():
        flag = "ok" if err < TOLERANCE else "FAIL"
        failed |= err >= TOLERANCE
        print(f"{name:<18} {err:16.3e}  {flag}")
    print()
    if failed:
        sys.exit(1)


def cmd_ablate(args):
    exp = load_args_experiment(args)
    print_banner(f"ablation over seeds {args.seeds}")
    rows = ablate(exp, seeds=args.seeds, runs_dir=config.RUNS_DIR, quiet=args.quiet)
    print(format_ablation(rows))
    print()


def cmd_alpha_sweep(args):
    exp = load_args_experiment(args)
    print_banner("alpha sweep")
    rows = alpha_sweep(exp, runs_dir=config.RUNS_DIR, quiet=args.quiet)
    print(format_sweep(rows))
    print()


def add_experiment_args(parser: argparse.ArgumentParser):
    parser.add_argument('-c', '--config', type=str, help='Experiment YAML file')
    parser.add_argument('-p', '--preset', choices=['desk', 'full'], help='Model preset')
    parser.add_argument(
        '-s', '--set',
        dest='overrides',
        action='append',
        default=[],
        metavar='KEY=VALUE',
        help='Override a config value, e.g. train.epochs=5 (repeatable)'
    )
    parser.add_argument('--quiet', action='store_true', help='Hide progress bars')


def main():
    """Main CLI entry point."""
    parser = argparse.ArgumentParser(
        description="HiPerformer desk-scale segmentation harness",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s train -s train.max_steps=200             # Short desk run
  %(prog)s eval --checkpoint runs/desk/checkpoint   # Evaluate a checkpoint
  %(prog)s infer --checkpoint runs/desk/checkpoint --image in.png --out out.png
  %(prog)s gradcheck                                # Module gradient suite
  %(prog)s ablate --seeds 0 1 2                     # Ablation table
  %(prog)s alpha-sweep                              # Loss-weight sweep
        """
    )
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('train', help='Train on the synthetic dataset')
    add_experiment_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('eval', help='Evaluate a checkpoint on the synthetic test split')
    add_experiment_args(p)
    p.add_argument('--checkpoint', required=True, type=Path)
    p.add_argument('--out', type=Path, help='Write the metric report (JSON lines)')
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('infer', help='Predict the label map of one PNG image')
    p.add_argument('--checkpoint', required=True, type=Path)
    p.add_argument('--image', required=True, type=Path)
    p.add_argument('--out', required=True, type=Path)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser('gradcheck', help='Finite-difference check of every composite module')
    p.add_argument('--seed', type=int, default=config.SEED)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser('ablate', help='Train/evaluate the six switch combinations')
    add_experiment_args(p)
    p.add_argument('--seeds', type=int, nargs='+', default=[config.SEED])
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser('alpha-sweep', help='Train/evaluate alpha in {0.1,0.3,0.5,0.7,0.9}')
    add_experiment_args(p)
    p.set_defaults(func=cmd_alpha_sweep)

    args = parser.parse_args()
    config.configure_logging()

    try:
        args.func(args)
    except KeyboardInterrupt:
        print("\n\nInterrupted.\n")
        sys.exit(130)
    except (ValidationError, CheckpointError, TrainingDivergedError) as e:
        print(f"Error: {e}\n")
        sys.exit(1)
    except ValueError as e:
        print(f"Error: {e}\n")
        sys.exit(1)


if __name__ == "__main__":
    main()
