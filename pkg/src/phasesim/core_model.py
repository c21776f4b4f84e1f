"""Analytic stand-in for cycle-accurate core simulation.

A core clips demanded IPC at its issue width and reports functional-unit
occupancy as the achieved rate over the unit count. The model is
deliberately transparent: with zero noise every output is predictable in
closed form, which keeps behaviour auditable end to end. Cache and branch
predictor capacities are carried on the spec for machine descriptions but do
not feed the arithmetic.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .detector import IntervalSample


class CoreClass(Enum):
    A = "A"  # strong: wide issue, large windows
    B = "B"  # weak: narrow issue, small windows


@dataclass(frozen=True)
class CoreSpec:
    """Static capabilities of one core.

    ``int_fu_count`` defaults to the issue width and ``fp_fu_count`` to half
    of it (at least one unit).
    """

    name: str
    core_class: CoreClass
    issue_width: int
    int_window: int
    fp_window: int
    int_fu_count: int | None = None
    fp_fu_count: int | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("core name must be non-empty")
        for field_name in ("issue_width", "int_window", "fp_window"):
            if getattr(self, field_name) < 1:
                raise ValueError(f"{field_name} must be >= 1")
        if self.int_fu_count is None:
            object.__setattr__(self, "int_fu_count", self.issue_width)
        if self.fp_fu_count is None:
            object.__setattr__(self, "fp_fu_count", max(1, self.issue_width // 2))
        if self.int_fu_count < 1 or self.fp_fu_count < 1:
            raise ValueError("functional unit counts must be >= 1")


def a_core(name: str) -> CoreSpec:
    """Strong out-of-order core: 4-wide, 80-entry int / 32-entry fp windows."""
    return CoreSpec(name, CoreClass.A, issue_width=4, int_window=80, fp_window=32)


def b_core(name: str) -> CoreSpec:
    """Weak out-of-order core: 2-wide, 56-entry int / 16-entry fp windows."""
    return CoreSpec(name, CoreClass.B, issue_width=2, int_window=56, fp_window=16)


@dataclass(frozen=True)
class WorkloadSegment:
    """A stretch of cycles with homogeneous demand.

    ``ipc_demand`` is what the code would retire per cycle on an infinitely
    wide core; ``fp_fraction`` the share of those instructions that need the
    floating-point units; ``noise_amplitude`` the half-width of the uniform
    relative jitter applied per interval.
    """

    duration: int
    ipc_demand: float
    fp_fraction: float = 0.0
    noise_amplitude: float = 0.0

    def __post_init__(self) -> None:
        if self.duration < 1:
            raise ValueError(f"segment duration must be >= 1 cycle, got {self.duration}")
        if self.ipc_demand < 0:
            raise ValueError(f"ipc_demand must be >= 0, got {self.ipc_demand}")
        if not 0.0 <= self.fp_fraction <= 1.0:
            raise ValueError(f"fp_fraction must lie in [0, 1], got {self.fp_fraction}")
        if not 0.0 <= self.noise_amplitude < 1.0:
            raise ValueError(
                f"noise_amplitude must lie in [0, 1), got {self.noise_amplitude}"
            )


def achieved_ipc(core: CoreSpec, ipc_demand: float) -> float:
    """Demand clipped at the core's issue width."""
    if ipc_demand < 0:
        raise ValueError(f"ipc_demand must be >= 0, got {ipc_demand}")
    return min(ipc_demand, float(core.issue_width))


def fu_utilization(
    core: CoreSpec, int_ipc: float, fp_ipc: float
) -> tuple[float, float]:
    """Occupancy of the integer and fp units for the given achieved rates."""
    if int_ipc < 0 or fp_ipc < 0:
        raise ValueError("achieved rates must be >= 0")
    if int_ipc + fp_ipc > core.issue_width + 1e-9:
        raise ValueError(
            f"combined rate {int_ipc + fp_ipc} exceeds issue width {core.issue_width}"
        )
    return (
        min(1.0, int_ipc / core.int_fu_count),
        min(1.0, fp_ipc / core.fp_fu_count),
    )


class SegmentCursor:
    """Single-pass reader over a segment list, tracking absolute position.

    ``position`` is the next sample's start cycle, ``next_index`` its index.
    """

    def __init__(self, segments: Sequence[WorkloadSegment]) -> None:
        self._segments = list(segments)
        if not self._segments:
            raise ValueError("workload needs at least one segment")
        self.total_cycles = sum(s.duration for s in self._segments)
        self.position = 0
        self.next_index = 0
        self._seg = 0
        self._offset = 0

    @property
    def remaining(self) -> int:
        return self.total_cycles - self.position

    def take(self, tau: int) -> list[tuple[int, WorkloadSegment]]:
        """Consume up to ``tau`` cycles, returning the (cycles, segment) spans."""
        if tau < 1:
            raise ValueError(f"tau must be >= 1, got {tau}")
        spans: list[tuple[int, WorkloadSegment]] = []
        need = min(tau, self.remaining)
        while need > 0:
            segment = self._segments[self._seg]
            chunk = min(need, segment.duration - self._offset)
            spans.append((chunk, segment))
            self._offset += chunk
            self.position += chunk
            need -= chunk
            if self._offset == segment.duration:
                self._seg += 1
                self._offset = 0
        return spans


def simulate_interval(
    core: CoreSpec,
    cursor: SegmentCursor,
    tau: int,
    rng: random.Random,
    *,
    dead_cycles: int = 0,
) -> IntervalSample | None:
    """Produce the next profiling interval, or None at the end of the workload.

    An interval spanning a segment boundary blends the demand pro rata by
    cycles (the fp share weighted by demanded instructions) before clipping
    at the issue width; exactly one noise draw is consumed per interval. The
    final interval is truncated so the stream tiles the workload exactly.
    ``dead_cycles`` models migration cost: that many cycles retire nothing
    while still counting toward the interval.
    """
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    if dead_cycles < 0:
        raise ValueError(f"dead_cycles must be >= 0, got {dead_cycles}")
    if cursor.remaining <= 0:
        return None

    index = cursor.next_index
    start = cursor.position
    spans = cursor.take(tau)
    cursor.next_index += 1
    covered = sum(cycles for cycles, _ in spans)

    demand_cycles = sum(cycles * seg.ipc_demand for cycles, seg in spans)
    base_demand = demand_cycles / covered
    if demand_cycles > 0:
        fp_fraction = (
            sum(cycles * seg.ipc_demand * seg.fp_fraction for cycles, seg in spans)
            / demand_cycles
        )
    else:
        fp_fraction = 0.0
    noise_amp = sum(cycles * seg.noise_amplitude for cycles, seg in spans) / covered

    jitter = rng.uniform(-noise_amp, noise_amp)
    ipc = achieved_ipc(core, base_demand * (1.0 + jitter))

    live = max(covered - dead_cycles, 0)
    retired = int(round(ipc * live))
    scale = live / covered
    int_rate = ipc * (1.0 - fp_fraction) * scale
    fp_rate = ipc * fp_fraction * scale
    util_int, util_fp = fu_utilization(core, int_rate, fp_rate)

    return IntervalSample(
        index=index,
        start_cycle=start,
        tau=covered,
        retired_instructions=retired,
        util_int=util_int,
        util_fp=util_fp,
        source_core=core.name,
    )
