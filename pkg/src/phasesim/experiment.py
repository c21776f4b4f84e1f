"""Experiment driver: simulation and trace-detection runs with CSV artifacts.

Every run produces three files in its output directory: ``scatter.csv`` (one
row per interval, annotated with the most significant event), ``events.csv``
(every event, one row each) and ``summary.json`` (counts and per-phase
means). Artifacts are written only after the run completes, so a failing run
leaves no partial outputs.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .config import ConfigError, ExperimentConfig, Mode
from .core_model import CoreSpec, SegmentCursor, simulate_interval
from .detector import (
    PHASE_CHANGE_KINDS,
    IntervalSample,
    Normalization,
    PhaseDetector,
    PhaseEvent,
    PhaseEventKind,
)
from .interval_control import IntervalController
from .scheduler import MachineState, MigrationEvent, apply_migration, decide_migration
from .workload import (
    WorkloadSpec,
    generate_workload,
    load_trace,
    load_workload_spec,
    preset,
)

SUMMARY_SCHEMA_VERSION = 1

SCATTER_COLUMNS = (
    "interval_index",
    "start_cycle",
    "tau",
    "throughput_raw",
    "throughput_per_cycle",
    "utilization",
    "phase_id",
    "event",
)

EVENT_COLUMNS = (
    "interval_index",
    "kind",
    "old_phase_id",
    "new_phase_id",
    "d_i",
    "process",
    "from_core",
    "to_core",
)

#: Scatter rows carry a single annotation; when an interval produced several
#: events the most significant one wins. Recurrence notes never annotate the
#: scatter (their cause event does); they still appear in events.csv.
_SCATTER_PRIORITY = {
    "migration": 0,
    "throughput_change": 1,
    "over_util": 2,
    "under_util": 3,
    "tau_doubled": 4,
    "tau_halved": 5,
}


@dataclass(frozen=True)
class ScatterRow:
    interval_index: int
    start_cycle: int
    tau: int
    throughput_raw: int
    throughput_per_cycle: float
    utilization: float
    phase_id: int
    event: str


@dataclass
class RunResult:
    rows: list[ScatterRow]
    events: list[PhaseEvent | MigrationEvent]
    migrations: list[MigrationEvent]
    summary: dict
    out_dir: Path | None = None
    phases: dict = field(default_factory=dict)


def run_experiment(
    config: ExperimentConfig, out_dir: str | Path | None = None
) -> RunResult:
    """Run one experiment and write its artifacts.

    A preset or workload-spec source is simulated on the configured machine;
    a trace source goes straight through the detector.
    """
    config.validate()
    target = Path(out_dir) if out_dir is not None else config.out_dir
    if config.workload_trace_path is not None:
        samples = load_trace(config.workload_trace_path)
        result = detect_over_samples(
            samples, config.detector, label=str(config.workload_trace_path.name)
        )
    else:
        result = _simulate(config)
    if target is not None:
        write_artifacts(result, target)
    return result


def _resolve_workload(config: ExperimentConfig) -> WorkloadSpec:
    if config.workload_preset is not None:
        try:
            return preset(config.workload_preset, **config.preset_args)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    assert config.workload_spec_path is not None
    try:
        return load_workload_spec(config.workload_spec_path)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _simulate(config: ExperimentConfig) -> RunResult:
    det_cfg = config.detector
    spec = _resolve_workload(config)
    segments = generate_workload(spec)
    total_cycles = sum(segment.duration for segment in segments)
    if total_cycles < det_cfg.tau_min:
        raise ConfigError(
            f"workload covers {total_cycles} cycles, shorter than "
            f"tau_min={det_cfg.tau_min}"
        )

    process = spec.name
    start = config.resolved_start_core()
    machine: MachineState | None = None
    if config.scheduler_enabled:
        machine = MachineState(
            cores=list(config.machine_cores),
            assignment={process: start.name},
            migration_penalty=config.migration_penalty,
        )

    detector = PhaseDetector(det_cfg)
    controller = IntervalController(det_cfg) if config.mode is Mode.VARIABLE else None
    cursor = SegmentCursor(segments)
    # Both seeds participate so re-seeding either the run or the workload
    # reshuffles the noise draws.
    rng = random.Random(config.seed + spec.seed)

    current_core: CoreSpec = start
    rows: list[ScatterRow] = []
    emitted: list[PhaseEvent | MigrationEvent] = []
    migrations: list[MigrationEvent] = []
    dead_cycles = 0

    while True:
        tau = controller.tau if controller is not None else config.fixed_tau
        assert tau is not None
        sample = simulate_interval(
            current_core, cursor, tau, rng, dead_cycles=dead_cycles
        )
        dead_cycles = 0
        if sample is None:
            break

        phase_id, det_events = detector.observe(sample)
        interval_events: list[PhaseEvent | MigrationEvent] = list(det_events)
        phase_changed = any(e.kind in PHASE_CHANGE_KINDS for e in det_events)

        if controller is not None:
            if phase_changed or sample.index == 0:
                # The boundary interval seeds a fresh average; it casts no
                # steadiness verdict and steady runs never span phases.
                controller.reset_baseline(detector.current_phase.running_avg)
            else:
                kind = controller.observe_average(detector.current_phase.running_avg)
                if kind is not None:
                    ratio = 2.0 if kind is PhaseEventKind.TAU_DOUBLED else 0.5
                    if det_cfg.normalization is Normalization.RAW:
                        detector.rescale_phase_averages(ratio)
                        controller.rescale_baseline(ratio)
                    d_here = detector.last_delta if detector.last_delta is not None else 0.0
                    interval_events.append(
                        PhaseEvent(sample.index, kind, phase_id, phase_id, d_here)
                    )

        if machine is not None:
            for event in det_events:
                if event.kind not in (
                    PhaseEventKind.OVER_UTILIZATION,
                    PhaseEventKind.UNDER_UTILIZATION,
                ):
                    continue
                migration = decide_migration(event, current_core, machine)
                if migration is not None:
                    apply_migration(machine, migration)
                    current_core = machine.core(migration.to_core)
                    dead_cycles = machine.migration_penalty
                    migrations.append(migration)
                    interval_events.append(migration)

        rows.append(_scatter_row(sample, phase_id, interval_events))
        emitted.extend(interval_events)

    summary = _build_summary(
        rows,
        emitted,
        migrations,
        phase_count=len(detector.phases),
        label=spec.name,
        mode=config.mode.value,
        seed=config.seed,
        extra={"start_core": start.name, "scheduler_enabled": config.scheduler_enabled},
    )
    return RunResult(rows, emitted, migrations, summary, phases=dict(detector.phases))


def detect_over_samples(
    samples: Iterable[IntervalSample],
    det_cfg,
    label: str = "trace",
) -> RunResult:
    """Run the detector over recorded intervals.

    Interval-length events are reconstructed from the recorded lengths: the
    first sample observed at double/half the previous length is annotated.
    In raw mode the stored averages are rescaled by the actual length ratio
    before that sample is classified.
    """
    detector = PhaseDetector(det_cfg)
    rows: list[ScatterRow] = []
    emitted: list[PhaseEvent | MigrationEvent] = []
    prev_tau: int | None = None

    for sample in samples:
        if (
            prev_tau is not None
            and sample.tau != prev_tau
            and det_cfg.normalization is Normalization.RAW
        ):
            detector.rescale_phase_averages(sample.tau / prev_tau)
        phase_id, det_events = detector.observe(sample)
        interval_events: list[PhaseEvent | MigrationEvent] = list(det_events)
        if prev_tau is not None and sample.tau == prev_tau * 2:
            d_here = detector.last_delta if detector.last_delta is not None else 0.0
            interval_events.append(
                PhaseEvent(
                    sample.index, PhaseEventKind.TAU_DOUBLED, phase_id, phase_id, d_here
                )
            )
        elif prev_tau is not None and sample.tau * 2 == prev_tau:
            d_here = detector.last_delta if detector.last_delta is not None else 0.0
            interval_events.append(
                PhaseEvent(
                    sample.index, PhaseEventKind.TAU_HALVED, phase_id, phase_id, d_here
                )
            )
        prev_tau = sample.tau
        rows.append(_scatter_row(sample, phase_id, interval_events))
        emitted.extend(interval_events)

    summary = _build_summary(
        rows,
        emitted,
        migrations=[],
        phase_count=len(detector.phases),
        label=label,
        mode="detect",
        seed=None,
        extra={},
    )
    return RunResult(rows, emitted, [], summary, phases=dict(detector.phases))


def _scatter_row(
    sample: IntervalSample,
    phase_id: int,
    interval_events: list[PhaseEvent | MigrationEvent],
) -> ScatterRow:
    tokens = []
    for event in interval_events:
        token = "migration" if isinstance(event, MigrationEvent) else event.kind.value
        if token in _SCATTER_PRIORITY:
            tokens.append(token)
    annotation = min(tokens, key=_SCATTER_PRIORITY.__getitem__) if tokens else "none"
    return ScatterRow(
        interval_index=sample.index,
        start_cycle=sample.start_cycle,
        tau=sample.tau,
        throughput_raw=sample.retired_instructions,
        throughput_per_cycle=sample.retired_instructions / sample.tau,
        utilization=max(sample.util_int, sample.util_fp),
        phase_id=phase_id,
        event=annotation,
    )


def _build_summary(
    rows: list[ScatterRow],
    emitted: list[PhaseEvent | MigrationEvent],
    migrations: list[MigrationEvent],
    phase_count: int,
    label: str,
    mode: str,
    seed: int | None,
    extra: dict,
) -> dict:
    event_counts: dict[str, int] = {}
    for event in emitted:
        token = "migration" if isinstance(event, MigrationEvent) else event.kind.value
        event_counts[token] = event_counts.get(token, 0) + 1

    per_phase: dict[int, dict[str, float]] = {}
    for row in rows:
        acc = per_phase.setdefault(
            row.phase_id,
            {"intervals": 0, "raw": 0.0, "per_cycle": 0.0, "util": 0.0},
        )
        acc["intervals"] += 1
        acc["raw"] += row.throughput_raw
        acc["per_cycle"] += row.throughput_per_cycle
        acc["util"] += row.utilization
    phases = [
        {
            "phase_id": pid,
            "intervals": int(acc["intervals"]),
            "mean_throughput_raw": acc["raw"] / acc["intervals"],
            "mean_throughput_per_cycle": acc["per_cycle"] / acc["intervals"],
            "mean_utilization": acc["util"] / acc["intervals"],
        }
        for pid, acc in sorted(per_phase.items())
    ]

    summary = {
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "label": label,
        "mode": mode,
        "seed": seed,
        "sample_count": len(rows),
        "cycles_covered": sum(row.tau for row in rows),
        "phase_count": phase_count,
        "migration_count": len(migrations),
        "event_counts": event_counts,
        "phases": phases,
    }
    summary.update(extra)
    return summary


def _format_float(value: float) -> str:
    return repr(float(value))


def emit_scatter_csv(rows: list[ScatterRow], path: str | Path) -> None:
    """Write the scatter table; rows must arrive ordered by interval index."""
    for previous, current in zip(rows, rows[1:]):
        if current.interval_index <= previous.interval_index:
            raise ValueError(
                f"scatter rows out of order at interval {current.interval_index}"
            )
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SCATTER_COLUMNS)
        for row in rows:
            writer.writerow(
                (
                    row.interval_index,
                    row.start_cycle,
                    row.tau,
                    row.throughput_raw,
                    _format_float(row.throughput_per_cycle),
                    _format_float(row.utilization),
                    row.phase_id,
                    row.event,
                )
            )


def emit_events_csv(
    events: list[PhaseEvent | MigrationEvent], path: str | Path
) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(EVENT_COLUMNS)
        for event in events:
            if isinstance(event, MigrationEvent):
                writer.writerow(
                    (
                        event.interval_index,
                        "migration",
                        "",
                        "",
                        "",
                        event.process,
                        event.from_core,
                        event.to_core,
                    )
                )
            else:
                writer.writerow(
                    (
                        event.interval_index,
                        event.kind.value,
                        event.old_phase_id,
                        event.new_phase_id,
                        _format_float(event.d_i),
                        "",
                        "",
                        "",
                    )
                )


def write_artifacts(result: RunResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    emit_scatter_csv(result.rows, out / "scatter.csv")
    emit_events_csv(result.events, out / "events.csv")
    with open(out / "summary.json", "w", encoding="utf-8") as handle:
        json.dump(result.summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
    result.out_dir = out


def load_summary(run_dir: str | Path) -> dict:
    path = Path(run_dir) / "summary.json"
    with open(path, "r", encoding="utf-8") as handle:
        try:
            return json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not a valid summary: {exc}") from exc


def overhead_report(fixed_dir: str | Path, variable_dir: str | Path) -> dict:
    """Compare the profiling cost of two runs over the same cycle budget.

    The ratio is fixed samples over variable samples: how many times fewer
    intervals the adaptive run needed.
    """
    fixed = load_summary(fixed_dir)
    variable = load_summary(variable_dir)
    if fixed["cycles_covered"] != variable["cycles_covered"]:
        raise ConfigError(
            "runs cover different cycle budgets: "
            f"{fixed['cycles_covered']} vs {variable['cycles_covered']}"
        )
    if variable["sample_count"] == 0:
        raise ConfigError("variable run has no samples")
    ratio = fixed["sample_count"] / variable["sample_count"]
    return {
        "cycles_covered": fixed["cycles_covered"],
        "fixed": {
            "label": fixed["label"],
            "mode": fixed["mode"],
            "sample_count": fixed["sample_count"],
        },
        "variable": {
            "label": variable["label"],
            "mode": variable["mode"],
            "sample_count": variable["sample_count"],
        },
        "ratio": ratio,
    }


def format_overhead_report(report: dict) -> str:
    lines = [
        f"cycle budget        : {report['cycles_covered']}",
        f"fixed run samples   : {report['fixed']['sample_count']} "
        f"({report['fixed']['label']}, {report['fixed']['mode']})",
        f"variable run samples: {report['variable']['sample_count']} "
        f"({report['variable']['label']}, {report['variable']['mode']})",
        f"overhead ratio      : {report['ratio']:.2f}x fewer samples",
    ]
    return "\n".join(lines)
