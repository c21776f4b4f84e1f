"""Experiment configuration: flat key=value files plus machine descriptions.

Config files are plain text, one ``key=value`` per line, ``#`` starting a
comment line. Dotted prefixes group related keys (``detector.delta_th``,
``scheduler.enabled``, ``workload.preset``). Paths are resolved relative to
the config file's directory.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path

from .core_model import CoreClass, CoreSpec, a_core, b_core
from .detector import DetectorConfig, Normalization


class ConfigError(Exception):
    pass


class Mode(Enum):
    FIXED = "fixed_tau"
    VARIABLE = "variable_tau"


def default_machine() -> list[CoreSpec]:
    return [a_core("A0"), a_core("A1"), b_core("B0"), b_core("B1")]


@dataclass
class ExperimentConfig:
    """Everything one run needs. Exactly one workload source must be set."""

    detector: DetectorConfig = field(default_factory=DetectorConfig)
    machine_cores: list[CoreSpec] = field(default_factory=default_machine)
    workload_preset: str | None = None
    workload_spec_path: Path | None = None
    workload_trace_path: Path | None = None
    preset_args: dict[str, float | int] = field(default_factory=dict)
    mode: Mode = Mode.FIXED
    fixed_tau: int | None = None
    seed: int = 0
    start_core: str | None = None
    out_dir: Path | None = None
    scheduler_enabled: bool = True
    migration_penalty: int = 10_000

    def validate(self) -> None:
        sources = [
            self.workload_preset,
            self.workload_spec_path,
            self.workload_trace_path,
        ]
        set_count = sum(source is not None for source in sources)
        if set_count != 1:
            raise ConfigError(
                "exactly one workload source required "
                "(workload.preset, workload.spec or workload.trace); "
                f"got {set_count}"
            )
        if self.mode is Mode.FIXED:
            if self.fixed_tau is None:
                raise ConfigError("mode=fixed_tau requires a fixed_tau value")
            if self.fixed_tau < self.detector.tau_min:
                raise ConfigError(
                    f"fixed_tau={self.fixed_tau} is below tau_min="
                    f"{self.detector.tau_min}"
                )
        if self.preset_args and self.workload_preset != "steady":
            raise ConfigError(
                "workload.cycles/demand/fp_fraction/noise only apply to the "
                "steady preset"
            )
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if self.migration_penalty < 0:
            raise ConfigError(
                f"scheduler.migration_penalty must be >= 0, got {self.migration_penalty}"
            )
        names = [core.name for core in self.machine_cores]
        if self.start_core is not None and self.start_core not in names:
            raise ConfigError(
                f"start_core {self.start_core!r} not in machine {names}"
            )

    def resolved_start_core(self) -> CoreSpec:
        name = self.start_core or self.machine_cores[0].name
        for core in self.machine_cores:
            if core.name == name:
                return core
        raise ConfigError(f"start_core {name!r} not in machine")


_DETECTOR_KEYS = {f.name for f in fields(DetectorConfig)}
_PRESET_ARG_KEYS = {"cycles", "demand", "fp_fraction", "noise"}


def _parse_bool(value: str, key: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _parse_int(value: str, key: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _parse_float(value: str, key: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def parse_config_file(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    pairs: dict[str, str] = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_number}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in pairs:
            raise ConfigError(f"{path}:{line_number}: duplicate key {key!r}")
        pairs[key] = value
    return parse_config_pairs(pairs, base_dir=path.parent)


def parse_config_pairs(
    pairs: dict[str, str], base_dir: str | Path = "."
) -> ExperimentConfig:
    base_dir = Path(base_dir)
    config = ExperimentConfig()
    detector_overrides: dict[str, object] = {}

    for key, value in pairs.items():
        if key == "workload.preset":
            config.workload_preset = value
        elif key == "workload.spec":
            config.workload_spec_path = base_dir / value
        elif key == "workload.trace":
            config.workload_trace_path = base_dir / value
        elif key == "workload.cycles":
            config.preset_args["total_cycles"] = _parse_int(value, key)
        elif key == "workload.demand":
            config.preset_args["demand"] = _parse_float(value, key)
        elif key == "workload.fp_fraction":
            config.preset_args["fp_fraction"] = _parse_float(value, key)
        elif key == "workload.noise":
            config.preset_args["noise"] = _parse_float(value, key)
        elif key == "machine":
            config.machine_cores = load_machine_file(base_dir / value)
        elif key == "start_core":
            config.start_core = value
        elif key == "mode":
            try:
                config.mode = Mode(value)
            except ValueError:
                raise ConfigError(
                    f"mode must be fixed_tau or variable_tau, got {value!r}"
                ) from None
        elif key == "fixed_tau":
            config.fixed_tau = _parse_int(value, key)
        elif key == "seed":
            config.seed = _parse_int(value, key)
        elif key == "out":
            config.out_dir = base_dir / value
        elif key == "scheduler.enabled":
            config.scheduler_enabled = _parse_bool(value, key)
        elif key == "scheduler.migration_penalty":
            config.migration_penalty = _parse_int(value, key)
        elif key.startswith("detector."):
            field_name = key[len("detector.") :]
            if field_name not in _DETECTOR_KEYS:
                raise ConfigError(f"unknown detector option {key!r}")
            detector_overrides[field_name] = _parse_detector_value(field_name, value, key)
        else:
            raise ConfigError(f"unknown config key {key!r}")

    if detector_overrides:
        try:
            config.detector = DetectorConfig(
                **{
                    **{f.name: getattr(config.detector, f.name) for f in fields(DetectorConfig)},
                    **detector_overrides,
                }
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return config


def _parse_detector_value(field_name: str, value: str, key: str) -> object:
    if field_name in ("util_window", "steady_upper_bound", "tau_min", "tau_max"):
        return _parse_int(value, key)
    if field_name in ("delta_th", "delta_over", "delta_under", "steady_band"):
        return _parse_float(value, key)
    if field_name == "normalization":
        try:
            return Normalization(value)
        except ValueError:
            raise ConfigError(
                f"{key}: expected raw or per_cycle, got {value!r}"
            ) from None
    if field_name == "recurrence_matching":
        return _parse_bool(value, key)
    raise ConfigError(f"unknown detector option {key!r}")


MACHINE_COLUMNS = (
    "name",
    "core_class",
    "issue_width",
    "int_window",
    "fp_window",
    "int_fu_count",
    "fp_fu_count",
)


def load_machine_file(path: str | Path) -> list[CoreSpec]:
    """Read a machine description: CSV with one CoreSpec per row.

    ``int_fu_count``/``fp_fu_count`` may be left blank to take the defaults.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read machine file {path}: {exc}") from exc
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise ConfigError(f"{path}: empty machine file") from None
    if tuple(header) != MACHINE_COLUMNS:
        raise ConfigError(
            f"{path}: bad header {header!r}, expected {list(MACHINE_COLUMNS)}"
        )
    cores: list[CoreSpec] = []
    for row_number, row in enumerate(reader, start=2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != len(MACHINE_COLUMNS):
            raise ConfigError(
                f"{path}:{row_number}: expected {len(MACHINE_COLUMNS)} fields"
            )
        try:
            cores.append(
                CoreSpec(
                    name=row[0],
                    core_class=CoreClass(row[1]),
                    issue_width=int(row[2]),
                    int_window=int(row[3]),
                    fp_window=int(row[4]),
                    int_fu_count=int(row[5]) if row[5].strip() else None,
                    fp_fu_count=int(row[6]) if row[6].strip() else None,
                )
            )
        except ValueError as exc:
            raise ConfigError(f"{path}:{row_number}: {exc}") from exc
    if not cores:
        raise ConfigError(f"{path}: machine file lists no cores")
    return cores
