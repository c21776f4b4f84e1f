"""Online program-phase detection with adaptive profiling intervals,
driving migration decisions on a simulated asymmetric multicore."""

from .config import (
    ConfigError,
    ExperimentConfig,
    Mode,
    default_machine,
    load_machine_file,
    parse_config_file,
    parse_config_pairs,
)
from .core_model import (
    CoreClass,
    CoreSpec,
    SegmentCursor,
    WorkloadSegment,
    a_core,
    achieved_ipc,
    b_core,
    fu_utilization,
    simulate_interval,
)
from .detector import (
    PHASE_CHANGE_KINDS,
    DetectorConfig,
    IntervalSample,
    Normalization,
    PhaseDetector,
    PhaseEvent,
    PhaseEventKind,
    PhaseState,
    Similarity,
    UtilizationClass,
    classify_similarity,
    effective_utilization,
    match_recurring_phase,
    throughput_delta,
    update_running_average,
    utilization_class,
)
from .experiment import (
    RunResult,
    ScatterRow,
    detect_over_samples,
    emit_events_csv,
    emit_scatter_csv,
    format_overhead_report,
    load_summary,
    overhead_report,
    run_experiment,
    write_artifacts,
)
from .interval_control import (
    IntervalController,
    rescale_on_tau_change,
    steadiness_check,
)
from .scheduler import (
    MachineState,
    MigrationEvent,
    SchedulingConflictError,
    apply_migration,
    decide_migration,
)
from .workload import (
    PRESETS,
    TraceError,
    TraceParseError,
    TraceValidationError,
    WorkloadSpec,
    detect_format,
    fft_like,
    fmm_like,
    generate_workload,
    load_trace,
    load_workload_spec,
    preset,
    save_trace,
    save_workload_spec,
    steady,
)

__version__ = "0.1.0"
