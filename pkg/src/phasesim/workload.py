"""Synthetic phase-structured workloads and interval-trace files."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .core_model import WorkloadSegment
from .detector import IntervalSample

SPEC_SCHEMA_VERSION = 1
TRACE_SCHEMA_VERSION = 1

#: Column order for CSV traces; JSONL rows use the same field names.
TRACE_COLUMNS = (
    "index",
    "start_cycle",
    "tau",
    "retired_instructions",
    "util_int",
    "util_fp",
    "source_core",
)


class TraceError(Exception):
    pass


class TraceParseError(TraceError):
    """A line could not be decoded at all."""

    def __init__(self, message: str, line_number: int) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class TraceValidationError(TraceError):
    """A decoded row violates the sample invariants."""

    def __init__(self, message: str, row_index: int) -> None:
        super().__init__(f"row {row_index}: {message}")
        self.row_index = row_index


@dataclass(frozen=True)
class WorkloadSpec:
    name: str
    segments: tuple[WorkloadSegment, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("workload name must be non-empty")
        if not self.segments:
            raise ValueError("workload needs at least one segment")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")

    @property
    def total_cycles(self) -> int:
        return sum(segment.duration for segment in self.segments)


def generate_workload(spec: WorkloadSpec) -> list[WorkloadSegment]:
    """The deterministic segment stream described by a spec."""
    return list(spec.segments)


def steady(
    total_cycles: int = 200_000_000,
    demand: float = 1.6,
    fp_fraction: float = 0.0,
    noise: float = 0.0,
    seed: int = 0,
) -> WorkloadSpec:
    """One homogeneous segment; the default demand keeps both core classes
    inside the utilization bounds so nothing interrupts steady profiling."""
    return WorkloadSpec(
        name="steady",
        segments=(WorkloadSegment(total_cycles, demand, fp_fraction, noise),),
        seed=seed,
    )


def fft_like(seed: int = 0) -> WorkloadSpec:
    """Three distinct phases: integer-only warmup, a heavier mixed stretch,
    then a long integer-dominant tail with little to do."""
    return WorkloadSpec(
        name="fft_like",
        segments=(
            WorkloadSegment(3_000_000, 1.3, 0.0),
            WorkloadSegment(15_500_000, 2.7, 0.5),
            WorkloadSegment(8_500_000, 1.1, 0.1),
        ),
        seed=seed,
    )


def fmm_like(seed: int = 0, repeats: int = 10) -> WorkloadSpec:
    """A two-phase pattern recurring every ten million cycles."""
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    pair = (
        WorkloadSegment(5_000_000, 2.2, 0.5),
        WorkloadSegment(5_000_000, 1.0, 0.0),
    )
    return WorkloadSpec(name="fmm_like", segments=pair * repeats, seed=seed)


PRESETS: dict[str, Callable[..., WorkloadSpec]] = {
    "steady": steady,
    "fft_like": fft_like,
    "fmm_like": fmm_like,
}


def preset(name: str, **kwargs) -> WorkloadSpec:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown preset {name!r}; known presets: {', '.join(sorted(PRESETS))}"
        ) from None
    return factory(**kwargs)


def save_workload_spec(spec: WorkloadSpec, path: str | Path) -> None:
    payload = {
        "schema_version": SPEC_SCHEMA_VERSION,
        "name": spec.name,
        "seed": spec.seed,
        "segments": [
            {
                "duration": s.duration,
                "ipc_demand": s.ipc_demand,
                "fp_fraction": s.fp_fraction,
                "noise_amplitude": s.noise_amplitude,
            }
            for s in spec.segments
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_workload_spec(path: str | Path) -> WorkloadSpec:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid workload JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ValueError(f"{path}: workload spec must be a JSON object")
    version = payload.get("schema_version")
    if version != SPEC_SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {version!r}")
    raw_segments = payload.get("segments")
    if not isinstance(raw_segments, list) or not raw_segments:
        raise ValueError(f"{path}: workload needs at least one segment")
    segments = []
    for i, raw in enumerate(raw_segments):
        try:
            segments.append(
                WorkloadSegment(
                    duration=int(raw["duration"]),
                    ipc_demand=float(raw["ipc_demand"]),
                    fp_fraction=float(raw.get("fp_fraction", 0.0)),
                    noise_amplitude=float(raw.get("noise_amplitude", 0.0)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"{path}: segment {i}: {exc}") from exc
    try:
        return WorkloadSpec(
            name=str(payload.get("name", Path(path).stem)),
            segments=tuple(segments),
            seed=int(payload.get("seed", 0)),
        )
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def _format_float(value: float) -> str:
    return repr(float(value))


def detect_format(path: str | Path, explicit: str | None = None) -> str:
    if explicit is not None:
        if explicit not in ("csv", "jsonl"):
            raise ValueError(f"unknown trace format {explicit!r}")
        return explicit
    suffix = Path(path).suffix.lower()
    if suffix == ".jsonl":
        return "jsonl"
    return "csv"


def save_trace(
    samples: Iterable[IntervalSample], path: str | Path, fmt: str | None = None
) -> None:
    fmt = detect_format(path, fmt)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        if fmt == "csv":
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(TRACE_COLUMNS)
            for s in samples:
                writer.writerow(
                    (
                        s.index,
                        s.start_cycle,
                        s.tau,
                        s.retired_instructions,
                        _format_float(s.util_int),
                        _format_float(s.util_fp),
                        s.source_core,
                    )
                )
        else:
            for s in samples:
                record = {
                    "schema_version": TRACE_SCHEMA_VERSION,
                    "index": s.index,
                    "start_cycle": s.start_cycle,
                    "tau": s.tau,
                    "retired_instructions": s.retired_instructions,
                    "util_int": s.util_int,
                    "util_fp": s.util_fp,
                    "source_core": s.source_core,
                }
                handle.write(json.dumps(record) + "\n")


def load_trace(path: str | Path, fmt: str | None = None) -> Iterator[IntervalSample]:
    """Stream samples from a trace file, validating as it goes.

    Per-row invariants and stream contiguity (consecutive indexes, each
    sample starting where the previous one ended) are enforced; an empty
    file yields an empty stream.
    """
    fmt = detect_format(path, fmt)
    if fmt == "csv":
        yield from _load_csv(Path(path))
    else:
        yield from _load_jsonl(Path(path))


def _check_stream(
    sample: IntervalSample, previous: IntervalSample | None, row_index: int
) -> None:
    if previous is None:
        return
    if sample.index != previous.index + 1:
        raise TraceValidationError(
            f"index {sample.index} does not follow {previous.index}", row_index
        )
    expected_start = previous.start_cycle + previous.tau
    if sample.start_cycle != expected_start:
        raise TraceValidationError(
            f"start_cycle {sample.start_cycle} leaves a gap "
            f"(expected {expected_start})",
            row_index,
        )


def _load_csv(path: Path) -> Iterator[IntervalSample]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            return
        if tuple(header) != TRACE_COLUMNS:
            raise TraceParseError(
                f"bad header {header!r}, expected {list(TRACE_COLUMNS)}", 1
            )
        previous: IntervalSample | None = None
        for row_index, row in enumerate(reader):
            line_number = row_index + 2
            if len(row) != len(TRACE_COLUMNS):
                raise TraceParseError(
                    f"expected {len(TRACE_COLUMNS)} fields, got {len(row)}", line_number
                )
            try:
                sample = IntervalSample(
                    index=int(row[0]),
                    start_cycle=int(row[1]),
                    tau=int(row[2]),
                    retired_instructions=int(row[3]),
                    util_int=float(row[4]),
                    util_fp=float(row[5]),
                    source_core=row[6],
                )
            except (TypeError, ValueError) as exc:
                if _is_parse_failure(row):
                    raise TraceParseError(str(exc), line_number) from exc
                raise TraceValidationError(str(exc), row_index) from exc
            _check_stream(sample, previous, row_index)
            previous = sample
            yield sample


def _is_parse_failure(row: list[str]) -> bool:
    try:
        int(row[0]), int(row[1]), int(row[2]), int(row[3])
        float(row[4]), float(row[5])
    except (TypeError, ValueError):
        return True
    return False


def _load_jsonl(path: Path) -> Iterator[IntervalSample]:
    with open(path, "r", encoding="utf-8") as handle:
        previous: IntervalSample | None = None
        row_index = 0
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceParseError(str(exc), line_number) from exc
            if not isinstance(record, dict):
                raise TraceParseError("each line must be a JSON object", line_number)
            if "schema_version" not in record:
                raise TraceParseError("missing schema_version", line_number)
            if record["schema_version"] != TRACE_SCHEMA_VERSION:
                raise TraceParseError(
                    f"unsupported schema_version {record['schema_version']!r}",
                    line_number,
                )
            missing = [c for c in TRACE_COLUMNS if c not in record]
            if missing:
                raise TraceParseError(f"missing fields {missing}", line_number)
            try:
                sample = IntervalSample(
                    index=int(record["index"]),
                    start_cycle=int(record["start_cycle"]),
                    tau=int(record["tau"]),
                    retired_instructions=int(record["retired_instructions"]),
                    util_int=float(record["util_int"]),
                    util_fp=float(record["util_fp"]),
                    source_core=str(record["source_core"]),
                )
            except (TypeError, ValueError) as exc:
                raise TraceValidationError(str(exc), row_index) from exc
            _check_stream(sample, previous, row_index)
            previous = sample
            row_index += 1
            yield sample
