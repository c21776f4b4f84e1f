"""Throughput/utilization phase detection over profiling intervals.

A program phase is a contiguous stretch of intervals whose behaviour stays
similar. Each interval carries an instruction count and the occupancy of the
integer and floating-point units; an interval stays in the current phase
unless its throughput deviates from the phase's running average by more than
a threshold, or the effective utilization pins above/below the configured
bounds for a full window of consecutive intervals. Closed phases are kept
around so a recurring phase can be recognised instead of minting a new id.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence


class Normalization(Enum):
    """How an interval's instruction count becomes a throughput figure."""

    RAW = "raw"
    PER_CYCLE = "per_cycle"


class Similarity(Enum):
    """Verdict for one interval against the current phase."""

    SIMILAR = "similar"
    THROUGHPUT = "throughput"
    OVER_UTIL = "over_util"
    UNDER_UTIL = "under_util"


class PhaseEventKind(Enum):
    THROUGHPUT_CHANGE = "throughput_change"
    OVER_UTILIZATION = "over_util"
    UNDER_UTILIZATION = "under_util"
    TAU_DOUBLED = "tau_doubled"
    TAU_HALVED = "tau_halved"
    PHASE_RECURRED = "phase_recurred"


#: Event kinds that close the current phase and open another one.
PHASE_CHANGE_KINDS = frozenset(
    {
        PhaseEventKind.THROUGHPUT_CHANGE,
        PhaseEventKind.OVER_UTILIZATION,
        PhaseEventKind.UNDER_UTILIZATION,
    }
)


class UtilizationClass(Enum):
    UNDER = "under"
    NORMAL = "normal"
    OVER = "over"


@dataclass(frozen=True)
class IntervalSample:
    """Measurements for one profiling interval.

    ``util_int`` and ``util_fp`` are occupancy fractions of the integer and
    floating-point units over the interval. ``tau`` is the interval length in
    cycles; consecutive samples are expected to tile the cycle axis without
    gaps (``start_cycle + tau`` of one sample is the next one's start).
    """

    index: int
    start_cycle: int
    tau: int
    retired_instructions: int
    util_int: float
    util_fp: float
    source_core: str = ""

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"sample index must be >= 0, got {self.index}")
        if self.start_cycle < 0:
            raise ValueError(f"start_cycle must be >= 0, got {self.start_cycle}")
        if self.tau < 1:
            raise ValueError(f"tau must be >= 1 cycle, got {self.tau}")
        if self.retired_instructions < 0:
            raise ValueError(
                f"retired_instructions must be >= 0, got {self.retired_instructions}"
            )
        for name in ("util_int", "util_fp"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class DetectorConfig:
    """Thresholds and knobs for phase detection and interval adjustment.

    Percentage-valued fields (``delta_th``, ``steady_band``) are on a 0..100
    scale; the utilization bounds are fractions on 0..1. ``tau_max`` must be
    ``tau_min`` times a power of two so interval lengths stay on a doubling
    ladder.
    """

    delta_th: float = 100.0
    delta_over: float = 0.95
    delta_under: float = 0.30
    util_window: int = 5
    steady_band: float = 1.0
    steady_upper_bound: int = 75
    tau_min: int = 100_000
    tau_max: int = 6_400_000
    normalization: Normalization = Normalization.PER_CYCLE
    recurrence_matching: bool = True

    def __post_init__(self) -> None:
        if self.delta_th <= 0:
            raise ValueError(f"delta_th must be > 0, got {self.delta_th}")
        if not 0.0 <= self.delta_under < self.delta_over <= 1.0:
            raise ValueError(
                "utilization bounds must satisfy 0 <= delta_under < delta_over <= 1, "
                f"got delta_under={self.delta_under}, delta_over={self.delta_over}"
            )
        if self.util_window < 1:
            raise ValueError(f"util_window must be >= 1, got {self.util_window}")
        if self.steady_band <= 0:
            raise ValueError(f"steady_band must be > 0, got {self.steady_band}")
        if self.steady_upper_bound < 1:
            raise ValueError(
                f"steady_upper_bound must be >= 1, got {self.steady_upper_bound}"
            )
        if self.tau_min < 1:
            raise ValueError(f"tau_min must be >= 1, got {self.tau_min}")
        quotient, remainder = divmod(self.tau_max, self.tau_min)
        if remainder != 0 or quotient < 1 or quotient & (quotient - 1) != 0:
            raise ValueError(
                f"tau_max must be tau_min times a power of two, got "
                f"tau_min={self.tau_min}, tau_max={self.tau_max}"
            )


@dataclass(frozen=True)
class PhaseState:
    """Incremental statistics for one phase.

    ``running_avg`` and ``util_avg`` are arithmetic means over the intervals
    assigned since the phase was last (re)opened; ``count`` is that interval
    count. A re-opened recurring phase starts from a fresh seed.
    """

    phase_id: int
    running_avg: float = 0.0
    count: int = 0
    util_avg: float = 0.0


@dataclass(frozen=True)
class PhaseEvent:
    """Something the detector or interval controller decided at an interval.

    For phase changes ``old_phase_id``/``new_phase_id`` are the closed and
    opened phases; for interval-length events they are both the current
    phase. ``d_i`` is the percent throughput deviation observed at the
    triggering interval.
    """

    interval_index: int
    kind: PhaseEventKind
    old_phase_id: int
    new_phase_id: int
    d_i: float


def throughput_delta(th_i: float, th_bar_prev: float) -> float:
    """Percent deviation of an interval's throughput from the phase average.

    Callers must treat a phase's very first interval specially: with no
    accumulated throughput (``th_bar_prev <= 0``) the deviation is undefined.
    """
    if th_bar_prev <= 0:
        raise ValueError(
            f"throughput average must be positive, got {th_bar_prev}"
        )
    return (th_i - th_bar_prev) * 100.0 / th_bar_prev


def update_running_average(state: PhaseState, th_i: float) -> PhaseState:
    """Fold one interval's throughput into the phase's incremental mean."""
    new_count = state.count + 1
    avg = (th_i + state.running_avg * state.count) / new_count
    return replace(state, running_avg=avg, count=new_count)


def effective_utilization(util_int: float, util_fp: float) -> float:
    """Collapse the two unit occupancies into one figure: the busier wins."""
    return max(util_int, util_fp)


def utilization_class(u: float, config: DetectorConfig) -> UtilizationClass:
    if u > config.delta_over:
        return UtilizationClass.OVER
    if u < config.delta_under:
        return UtilizationClass.UNDER
    return UtilizationClass.NORMAL


def classify_similarity(
    d_i: float, util_history: Sequence[float], config: DetectorConfig
) -> Similarity:
    """Decide whether the newest interval still belongs to the current phase.

    ``util_history`` holds the effective utilization of up to ``util_window``
    most recent intervals, newest last; the utilization verdicts only fire
    once the window is full. When several conditions trip at once the
    reported reason is throughput first, then over-, then under-utilization.
    """
    if not util_history:
        raise ValueError("util_history must hold at least one value")
    if len(util_history) > config.util_window:
        raise ValueError(
            f"util_history holds {len(util_history)} values, "
            f"window is {config.util_window}"
        )
    if abs(d_i) > config.delta_th:
        return Similarity.THROUGHPUT
    if len(util_history) == config.util_window:
        if all(u > config.delta_over for u in util_history):
            return Similarity.OVER_UTIL
        if all(u < config.delta_under for u in util_history):
            return Similarity.UNDER_UTIL
    return Similarity.SIMILAR


def match_recurring_phase(
    candidate_th: float,
    candidate_util: float,
    closed_phases: Sequence[PhaseState],
    config: DetectorConfig,
) -> int | None:
    """Find a closed phase the candidate interval could be resuming.

    ``closed_phases`` is ordered oldest-closed first; the most recently
    closed acceptable phase wins. A phase is acceptable when its stored
    average throughput is within ``delta_th`` percent of the candidate and
    its utilization class (under/normal/over) matches the candidate's.
    """
    cand_class = utilization_class(candidate_util, config)
    for phase in reversed(closed_phases):
        if phase.running_avg > 0:
            diff = abs(candidate_th - phase.running_avg) * 100.0 / phase.running_avg
            if diff > config.delta_th:
                continue
        elif candidate_th != 0:
            continue
        if utilization_class(phase.util_avg, config) == cand_class:
            return phase.phase_id
    return None


_VERDICT_TO_KIND = {
    Similarity.THROUGHPUT: PhaseEventKind.THROUGHPUT_CHANGE,
    Similarity.OVER_UTIL: PhaseEventKind.OVER_UTILIZATION,
    Similarity.UNDER_UTIL: PhaseEventKind.UNDER_UTILIZATION,
}


class PhaseDetector:
    """Streaming phase classifier.

    Feed intervals in index order via :meth:`observe`; the detector assigns
    each to a phase and reports change events. The utilization window is
    cleared whenever a phase boundary is crossed, so a utilization streak
    never spans two phases. One instance tracks one process and carries its
    phase table across core migrations; instances are not thread-safe.
    """

    def __init__(self, config: DetectorConfig | None = None) -> None:
        self.config = config or DetectorConfig()
        self.phases: dict[int, PhaseState] = {}
        self.current_phase_id: int | None = None
        self.last_index: int | None = None
        #: Percent deviation computed at the most recent interval, None while
        #: the deviation was undefined (first interval ever).
        self.last_delta: float | None = None
        self._closed: list[int] = []  # closure order, oldest first
        self._history: deque[float] = deque(maxlen=self.config.util_window)
        self._next_id = 0

    @property
    def current_phase(self) -> PhaseState:
        if self.current_phase_id is None:
            raise ValueError("no interval observed yet")
        return self.phases[self.current_phase_id]

    def normalized_throughput(self, sample: IntervalSample) -> float:
        if self.config.normalization is Normalization.PER_CYCLE:
            return sample.retired_instructions / sample.tau
        return float(sample.retired_instructions)

    def observe(self, sample: IntervalSample) -> tuple[int, list[PhaseEvent]]:
        """Assign one interval to a phase, returning (phase_id, events)."""
        expected = 0 if self.last_index is None else self.last_index + 1
        if sample.index != expected:
            raise ValueError(
                f"out-of-order sample: got index {sample.index}, expected {expected}"
            )
        self.last_index = sample.index

        th = self.normalized_throughput(sample)
        u = effective_utilization(sample.util_int, sample.util_fp)

        if self.current_phase_id is None:
            self._seed_phase(self._fresh_id(), th, u)
            self.last_delta = None
            self._history.append(u)
            return self.current_phase_id, []

        current = self.current_phase
        if current.running_avg > 0:
            d = throughput_delta(th, current.running_avg)
        else:
            # A phase seeded on zero throughput: nothing changed while the
            # stream stays idle, any activity at all is a phase change.
            d = 0.0 if th == 0 else math.inf
        self.last_delta = d
        self._history.append(u)

        verdict = classify_similarity(d, self._history, self.config)
        if verdict is Similarity.SIMILAR:
            updated = update_running_average(current, th)
            updated = replace(
                updated,
                util_avg=(u + updated.util_avg * (updated.count - 1)) / updated.count,
            )
            self.phases[current.phase_id] = updated
            return current.phase_id, []

        old_id = current.phase_id
        self._closed.append(old_id)
        matched: int | None = None
        if self.config.recurrence_matching:
            matched = match_recurring_phase(
                th, u, [self.phases[i] for i in self._closed], self.config
            )
        if matched is None:
            new_id = self._fresh_id()
        else:
            new_id = matched
            self._closed.remove(matched)
        self._seed_phase(new_id, th, u)
        self._history.clear()

        events = [PhaseEvent(sample.index, _VERDICT_TO_KIND[verdict], old_id, new_id, d)]
        if matched is not None:
            events.append(
                PhaseEvent(sample.index, PhaseEventKind.PHASE_RECURRED, old_id, new_id, d)
            )
        return new_id, events

    def rescale_phase_averages(self, ratio: float) -> None:
        """Multiply every stored phase average by ``ratio``.

        Raw-count throughput scales with the interval length, so when the
        profiling interval changes the stored averages must follow to keep
        comparisons meaningful. Per-cycle throughput needs no such upkeep.
        """
        if ratio <= 0:
            raise ValueError(f"ratio must be positive, got {ratio}")
        for pid, state in self.phases.items():
            self.phases[pid] = replace(state, running_avg=state.running_avg * ratio)

    def closed_phases(self) -> list[PhaseState]:
        """Closed phases, oldest-closed first."""
        return [self.phases[i] for i in self._closed]

    def _fresh_id(self) -> int:
        pid = self._next_id
        self._next_id += 1
        return pid

    def _seed_phase(self, phase_id: int, th: float, u: float) -> None:
        self.phases[phase_id] = PhaseState(
            phase_id=phase_id, running_avg=th, count=1, util_avg=u
        )
        self.current_phase_id = phase_id
