"""HCMA-UNet harness.

Trains, evaluates and measures the segmentation network on volume files or
synthetic phantoms, and runs the oracle verification suites.

Run a subcommand with::

    uv run hcma.py train configs/smoke.yaml
    uv run hcma.py eval configs/smoke.yaml --checkpoint runs/smoke/step_000020.json
    uv run hcma.py stats configs/full_scale.yaml
    uv run hcma.py verify --quick
    uv run hcma.py gen-data data/synthetic --count 4 --extent 32

Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
verification check fails.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import List, Sequence

from dotenv import load_dotenv
from loguru import logger

load_dotenv(override=True)

_THREAD_VARIABLES = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
if threads := os.getenv("HCMA_NUM_THREADS"):
    # BLAS reads these once, when numpy is first imported
    for variable in _THREAD_VARIABLES:
        os.environ[variable] = threads

from models.config import ConfigError, RunConfig, load_config
from models.reports import StatsReport
from models.volume import VolumeRecord
from network.accounting import block_params, cost_breakdown
from network.unet import build
from services.checkpoints import CheckpointError, latest_checkpoint, load_checkpoint
from services.phantoms import gen_synthetic
from services.volume_io import VolumeIOError, VolumeStore
from training.trainer import Trainer, evaluate_records
from verification.suites import SUITES, run_suites

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFY = 2


class UsageError(Exception):
    """Bad command-line arguments."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def configure_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level)


def load_run_config(path: str) -> RunConfig:
    """Load a config file and apply environment overrides."""
    config = load_config(path)
    if seed := os.getenv("HCMA_SEED"):
        try:
            config.train.seed = int(seed)
        except ValueError as e:
            raise ConfigError("HCMA_SEED", f"not an integer: {seed!r}") from e
        if config.train.seed < 0:
            raise ConfigError("HCMA_SEED", f"must be >= 0, got {seed}")
        logger.info(f"HCMA_SEED overrides train.seed with {config.train.seed}")
    return config


def load_records(config: RunConfig) -> List[VolumeRecord]:
    """Volumes from ``data.root``, or a synthesized set when no root is configured."""
    data = config.data
    if data.root is not None:
        records = VolumeStore(data.root).load_all()
    else:
        records = gen_synthetic(data.synthetic_count, data.extent, data.seed, data.difficulty)
    extent = config.train.patch_extent
    for record in records:
        if min(record.shape) < extent:
            raise ConfigError("train.patch_extent", f"{extent} exceeds volume {record.id} {record.shape}")
    return records


def cmd_train(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    if args.steps is not None:
        config.train.steps = args.steps
    trainer = Trainer(config, load_records(config))
    if args.resume is not None:
        checkpoint = (
            latest_checkpoint(config.train.checkpoint_dir) if args.resume == "latest" else Path(args.resume)
        )
        if checkpoint is None:
            raise UsageError(f"no checkpoint to resume in {config.train.checkpoint_dir}")
        trainer.resume(checkpoint)
    history = trainer.run()
    if history:
        last = history[-1]
        logger.info(f"Finished at step {trainer.state.step}: loss={last['loss']:.6g} dice={last['dice']:.6g}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    model = build(config.model, seed=config.train.seed)
    checkpoint = Path(args.checkpoint)
    load_checkpoint(checkpoint, model)
    report = evaluate_records(model, load_records(config), str(checkpoint), config.train.dtype)
    means = " ".join(f"{name}={value:.4f}" for name, value in report.mean.items())
    logger.info(f"Mean over {len(report.cases)} cases: {means}")
    output = Path(args.output) if args.output else checkpoint.with_name(f"{checkpoint.stem}.metrics.json")
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(report.model_dump_json(indent=2))
    logger.info(f"Metrics report written to {output}")
    return EXIT_OK


def format_stats(report: StatsReport) -> str:
    lines = [f"{'block':<12} {'params':>12} {'GFLOPs':>12}"]
    for row in report.blocks:
        lines.append(f"{row.name:<12} {row.params:>12,} {row.flops / 1e9:>12.4f}")
    lines.append(f"{'total':<12} {report.params:>12,} {report.gflops:>12.4f}")
    lines.append("")
    lines.append(f"input shape {report.input_shape}")
    lines.append(f"MParams  computed {report.mparams:10.4f}   published {report.reference_mparams:10.2f}")
    lines.append(f"GFLOPs   computed {report.gflops:10.4f}   published {report.reference_gflops:10.2f}")
    return "\n".join(lines)


def cmd_stats(args: argparse.Namespace) -> int:
    config = load_run_config(args.config)
    extents = args.shape or [config.train.patch_extent] * 3
    shape = (1, config.model.in_channels, *extents)
    model = build(config.model, seed=config.train.seed)
    blocks = cost_breakdown(model, shape)
    report = StatsReport(
        input_shape=shape,
        params=sum(row.params for row in blocks),
        flops=sum(row.flops for row in blocks),
        blocks=blocks,
    )
    print(format_stats(report))
    if args.json:
        Path(args.json).write_text(report.model_dump_json(indent=2))
        logger.info(f"Stats report written to {args.json}")

    analytic = block_params(config.model)
    mismatched = [row.name for row in blocks if analytic.get(row.name) != row.params]
    if mismatched:
        for name in mismatched:
            logger.error(f"{name}: counted parameters differ from the closed-form count {analytic.get(name)}")
        return EXIT_VERIFY
    logger.info("Counted parameters match the closed-form count for every block")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    results = run_suites(args.suite, "quick" if args.quick else "full", args.seed)
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.error(f"Verification failed: {', '.join(failed)}")
        return EXIT_VERIFY
    logger.info(f"All {len(results)} suites passed ({sum(r.cases for r in results)} cases)")
    return EXIT_OK


def cmd_gen_data(args: argparse.Namespace) -> int:
    if args.config is not None:
        divisor = load_run_config(args.config).model.min_divisor
        if args.extent % divisor:
            raise ConfigError("extent", f"{args.extent} is not divisible by {divisor}")
    records = gen_synthetic(args.count, args.extent, args.seed, args.difficulty)
    VolumeStore(args.out).save_all(records, extent=args.extent, seed=args.seed, difficulty=args.difficulty)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hcma", description="HCMA-UNet training, evaluation and verification harness")
    parser.add_argument("--log-level", default="INFO", help="loguru level for stderr output")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    train = commands.add_parser("train", help="train on the configured volumes")
    train.add_argument("config", help="YAML run configuration")
    train.add_argument("--steps", type=int, help="override train.steps")
    train.add_argument("--resume", help="checkpoint sidecar to resume from, or 'latest'")
    train.set_defaults(handler=cmd_train)

    evaluate = commands.add_parser("eval", help="evaluate a checkpoint on the configured volumes")
    evaluate.add_argument("config", help="YAML run configuration")
    evaluate.add_argument("--checkpoint", required=True, help="checkpoint sidecar (.json)")
    evaluate.add_argument("--output", help="JSON report path (default: next to the checkpoint)")
    evaluate.set_defaults(handler=cmd_eval)

    stats = commands.add_parser("stats", help="parameter and FLOP report")
    stats.add_argument("config", help="YAML run configuration")
    stats.add_argument("--shape", type=int, nargs=3, metavar=("D", "H", "W"), help="input extents")
    stats.add_argument("--json", help="also write the report as JSON")
    stats.set_defaults(handler=cmd_stats)

    verify = commands.add_parser("verify", help="run the oracle and invariant suites")
    verify.add_argument("--suite", action="append", choices=list(SUITES), help="run only these suites")
    verify.add_argument("--quick", action="store_true", help="small case counts")
    verify.add_argument("--seed", type=int, default=0)
    verify.set_defaults(handler=cmd_verify)

    gen = commands.add_parser("gen-data", help="write a synthetic phantom dataset")
    gen.add_argument("out", help="dataset directory")
    gen.add_argument("--count", type=int, default=4)
    gen.add_argument("--extent", type=int, default=32)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--difficulty", type=float, default=0.0)
    gen.add_argument("--config", help="check the extent against this config's stage divisor")
    gen.set_defaults(handler=cmd_gen_data)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level.upper())
    try:
        return args.handler(args)
    except (ConfigError, UsageError, VolumeIOError, CheckpointError) as e:
        logger.error(str(e))
        return EXIT_USAGE
    except Exception:
        logger.exception(f"{args.command} failed")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
