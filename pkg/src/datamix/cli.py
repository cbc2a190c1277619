"""Command-line surface.

Exit codes: 0 success, 1 usage error, 2 data or validation error. All
randomness flows from --seed (or its env/config equivalent), so rerunning a
command with the same inputs reproduces its outputs byte for byte.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from pathlib import Path

from . import demo as demo_mod
from . import pipeline
from .config import load_config
from .errors import DataMixError
from .sampler import Phase

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is 1
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _steps_range(text: str) -> range:
    m = re.fullmatch(r"(\d+)\.\.(\d+)", text)
    if not m:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}")
    start, stop = int(m.group(1)), int(m.group(2))
    if stop <= start:
        raise argparse.ArgumentTypeError(f"empty step range {text!r}")
    return range(start, stop)


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="PATH", help="config file (JSON)")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--gamma", type=float)
    sub.add_argument("--lambda", dest="lam", type=float)
    sub.add_argument("--switch-step", dest="switch_step", type=int)
    sub.add_argument("--batch-size", dest="batch_size", type=int)


def _config_from(args: argparse.Namespace):
    overrides = {}
    for attr, key in (
        ("seed", "seed"),
        ("alpha", "alpha"),
        ("gamma", "gamma"),
        ("lam", "lambda"),
        ("switch_step", "phase_switch_step"),
        ("batch_size", "batch_size"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return load_config(getattr(args, "config", None), os.environ, overrides)


def _cmd_filter(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    _, retained, total = pipeline.run_filter(args.manifest, cfg, args.out)
    print(f"retained {retained}/{total} generated samples")
    return EXIT_OK


def _cmd_score(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    missing = pipeline.run_score(args.manifest, cfg, args.out)
    for sample_id in missing:
        print(f"warning: missing predictions for {sample_id}", file=sys.stderr)
    return EXIT_OK


def _cmd_sample(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    steps = args.steps or range(0, cfg.sampler_config().total_steps)
    if args.scores is None and Phase.ADAPTIVE in pipeline.needed_phases(cfg, steps):
        print(
            "datamix sample: error: --scores is required once steps reach "
            "the adaptive phase",
            file=sys.stderr,
        )
        return EXIT_USAGE
    if args.out == "-":
        pipeline.run_sample(
            args.manifest, args.scores, cfg, steps, binary_stream=sys.stdout.buffer
        )
    else:
        outputs = pipeline.run_sample(args.manifest, args.scores, cfg, steps, out_dir=args.out)
        print(f"plan written to {outputs['plan']}")
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    for line in pipeline.run_eval(args.logs, task=args.task):
        print(line)
    return EXIT_OK


def _cmd_exec(args: argparse.Namespace) -> int:
    lines = pipeline.run_exec(args.manifest)
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", "utf-8")
    else:
        for line in lines:
            print(line)
    return EXIT_OK


def _cmd_demo(args: argparse.Namespace) -> int:
    seed = args.seed if args.seed is not None else 0
    result = demo_mod.run_demo(args.out, seed)
    print(
        f"retained {result['retained_generated']}/{result['total_generated']} "
        f"generated samples"
    )
    print(
        f"draw ratio measured {result['measured_ratio']:.6g} "
        f"predicted {result['predicted_ratio']:.6g}"
    )
    print(f"artifacts in {Path(args.out).resolve()}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="datamix", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("filter", parents=[], help="quality-filter generated samples")
    sub.add_argument("--manifest", required=True)
    sub.add_argument("--out", required=True, help="quality report path")
    _add_config_flags(sub)
    sub.set_defaults(func=_cmd_filter)

    sub = commands.add_parser("score", help="score retained samples")
    sub.add_argument("--manifest", required=True)
    sub.add_argument("--out", required=True, help="score file path")
    _add_config_flags(sub)
    sub.set_defaults(func=_cmd_score)

    sub = commands.add_parser("sample", help="emit weight tables and a batch plan")
    sub.add_argument("--manifest", required=True)
    sub.add_argument("--scores", help="score file from `datamix score`")
    sub.add_argument("--out", required=True, help="output directory, or - for binary frames on stdout")
    sub.add_argument("--steps", type=_steps_range, metavar="A..B")
    _add_config_flags(sub)
    sub.set_defaults(func=_cmd_sample)

    sub = commands.add_parser("eval", help="behavior scores from episode logs")
    sub.add_argument("logs", nargs="+", help="episode log files")
    sub.add_argument("--task", help="restrict to one task")
    sub.set_defaults(func=_cmd_eval)

    sub = commands.add_parser("exec", help="execution-quality table per task")
    sub.add_argument("--manifest", required=True)
    sub.add_argument("--out", help="write the table here instead of stdout")
    sub.set_defaults(func=_cmd_exec)

    sub = commands.add_parser("demo", help="synthetic end-to-end pipeline run")
    sub.add_argument("--out", default="demo_out", help="output directory")
    sub.add_argument("--seed", type=int)
    sub.set_defaults(func=_cmd_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DataMixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
