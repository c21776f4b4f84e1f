"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 I/O or trace-format error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, Mode, parse_config_file
from .core_model import SegmentCursor, a_core, b_core, simulate_interval
from .experiment import (
    detect_over_samples,
    format_overhead_report,
    overhead_report,
    run_experiment,
    write_artifacts,
)
from .workload import (
    TraceError,
    generate_workload,
    load_trace,
    preset,
    save_trace,
    save_workload_spec,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: A003 - argparse hook
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phasesim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run a workload through the machine")
    simulate.add_argument("--config", required=True, help="experiment config file")
    simulate.add_argument("--seed", type=int, default=None)
    tau_group = simulate.add_mutually_exclusive_group()
    tau_group.add_argument("--fixed-tau", type=int, default=None, metavar="N")
    tau_group.add_argument("--variable-tau", action="store_true")
    simulate.add_argument("--out", default=None, metavar="DIR")

    detect = sub.add_parser("detect", help="run the detector over a recorded trace")
    detect.add_argument("--trace", default=None, help="trace file (csv or jsonl)")
    detect.add_argument("--config", default=None, help="detector overrides")
    detect.add_argument("--format", choices=("csv", "jsonl"), default=None)
    detect.add_argument("--out", default=None, metavar="DIR")

    compare = sub.add_parser(
        "compare-overhead", help="profiling-cost ratio of two finished runs"
    )
    compare.add_argument("fixed_dir")
    compare.add_argument("variable_dir")

    gen = sub.add_parser("gen-workload", help="write a preset workload or trace")
    gen.add_argument("--preset", required=True)
    gen.add_argument("--out", required=True, metavar="PATH")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--cycles", type=int, default=None, help="steady preset only")
    gen.add_argument("--demand", type=float, default=None, help="steady preset only")
    gen.add_argument("--emit-trace", action="store_true",
                     help="simulate the preset and write an interval trace")
    gen.add_argument("--core-class", choices=("A", "B"), default="A")
    gen.add_argument("--tau", type=int, default=100_000)
    gen.add_argument("--format", choices=("csv", "jsonl"), default=None)

    return parser


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = parse_config_file(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.fixed_tau is not None:
        config.mode = Mode.FIXED
        config.fixed_tau = args.fixed_tau
    elif args.variable_tau:
        config.mode = Mode.VARIABLE
    out_dir = Path(args.out) if args.out else config.out_dir
    if out_dir is None:
        raise ConfigError("no output directory: pass --out or set out= in the config")
    result = run_experiment(config, out_dir)
    _print_summary(result.summary, out_dir)
    return 0


def _cmd_detect(args: argparse.Namespace) -> int:
    if args.config is not None:
        config = parse_config_file(args.config)
    else:
        config = ExperimentConfig()
    if args.trace is not None:
        config.workload_trace_path = Path(args.trace)
        config.workload_preset = None
        config.workload_spec_path = None
    if config.workload_trace_path is None:
        raise ConfigError("detect needs a trace: pass --trace or set workload.trace")
    out_dir = Path(args.out) if args.out else config.out_dir
    if out_dir is None:
        raise ConfigError("no output directory: pass --out or set out= in the config")
    # Loaded here rather than through run_experiment so the --format
    # override reaches the loader.
    samples = load_trace(config.workload_trace_path, fmt=args.format)
    result = detect_over_samples(
        samples, config.detector, label=config.workload_trace_path.name
    )
    write_artifacts(result, out_dir)
    _print_summary(result.summary, out_dir)
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    report = overhead_report(args.fixed_dir, args.variable_dir)
    print(format_overhead_report(report))
    return 0


def _cmd_gen_workload(args: argparse.Namespace) -> int:
    kwargs: dict = {"seed": args.seed}
    if args.cycles is not None:
        kwargs["total_cycles"] = args.cycles
    if args.demand is not None:
        kwargs["demand"] = args.demand
    try:
        spec = preset(args.preset, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    if not args.emit_trace:
        save_workload_spec(spec, args.out)
        print(f"wrote workload spec {args.out} ({len(spec.segments)} segments)")
        return 0

    core = a_core("A0") if args.core_class == "A" else b_core("B0")
    if args.tau < 1:
        raise ConfigError(f"--tau must be >= 1, got {args.tau}")
    cursor = SegmentCursor(generate_workload(spec))
    rng = random.Random(spec.seed)
    samples = []
    while True:
        sample = simulate_interval(core, cursor, args.tau, rng)
        if sample is None:
            break
        samples.append(sample)
    save_trace(samples, args.out, fmt=args.format)
    print(f"wrote trace {args.out} ({len(samples)} intervals on {core.name})")
    return 0


def _print_summary(summary: dict, out_dir: Path) -> None:
    print(
        f"samples={summary['sample_count']} "
        f"phases={summary['phase_count']} "
        f"migrations={summary['migration_count']} "
        f"cycles={summary['cycles_covered']} "
        f"out={out_dir}"
    )


_COMMANDS = {
    "simulate": _cmd_simulate,
    "detect": _cmd_detect,
    "compare-overhead": _cmd_compare,
    "gen-workload": _cmd_gen_workload,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (TraceError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except SystemExit:
        raise
    except Exception as exc:
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
