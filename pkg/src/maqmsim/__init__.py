"""Simulator and schedule compiler for time-bin entanglement transfer
between multiplexed atomic quantum memories."""

__version__ = "0.1.0"

from .memory import (
    CellAddress,
    EfficiencyRecord,
    MemoryId,
    MemorySpec,
    ProbeResult,
    RfGrid,
    cell_efficiency,
    crosstalk_map,
    default_efficiency_map,
    eit_efficiency_probe,
    load_memory_spec,
    memory_spec_from_dict,
    memory_spec_to_dict,
    retrieval_record,
    survival,
)
from .qstate import (
    DensityMatrix,
    ModeKind,
    ModeLabel,
    PureState,
    atom_mode,
    bin_mode,
    fidelity,
    make_bell_pair,
    make_qudit_pair,
    product_basis,
    signal_mode,
    state_fidelity,
    w_state,
)
from .protocol import (
    PhaseLedger,
    ProtocolConfig,
    TransferOutcome,
    WProjection,
    herald_loop,
    project_w,
    run_protocol,
)
from .schedule import (
    Channel,
    PulseEvent,
    Tone,
    Schedule,
    ScheduleConstraints,
    Violation,
    cell_to_rf,
    compile_schedule,
    constraints_for_specs,
    derive_timings,
    schedule_from_jsonl,
    schedule_to_jsonl,
    superposition_rf,
    validate_schedule,
)
from .detect import (
    CountRow,
    CountsTable,
    MeasurementSetting,
    coincidence_probability,
    counts_from_csv,
    counts_to_csv,
    sample_counts,
    tomography_settings,
    w_settings,
)
from .tomo import (
    FidelityEstimate,
    ReconstructionResult,
    WFidelityData,
    bell_target,
    linear_inversion,
    logical_basis,
    mle_reconstruct,
    monte_carlo_fidelity,
    monte_carlo_w_fidelity,
    w_data_from_counts,
    w_data_from_density,
    w_fidelity,
)
from .cli import (
    ConfigError,
    ExperimentConfig,
    load_experiment_config,
    run_experiment,
    run_sweep,
)

__all__ = [
    "__version__",
    # memory geometry and efficiency
    "CellAddress",
    "EfficiencyRecord",
    "MemoryId",
    "MemorySpec",
    "ProbeResult",
    "RfGrid",
    "cell_efficiency",
    "crosstalk_map",
    "default_efficiency_map",
    "eit_efficiency_probe",
    "load_memory_spec",
    "memory_spec_from_dict",
    "memory_spec_to_dict",
    "retrieval_record",
    "survival",
    # states
    "DensityMatrix",
    "ModeKind",
    "ModeLabel",
    "PureState",
    "atom_mode",
    "bin_mode",
    "fidelity",
    "make_bell_pair",
    "make_qudit_pair",
    "product_basis",
    "signal_mode",
    "state_fidelity",
    "w_state",
    # protocol
    "PhaseLedger",
    "ProtocolConfig",
    "TransferOutcome",
    "WProjection",
    "herald_loop",
    "project_w",
    "run_protocol",
    # schedules
    "Channel",
    "PulseEvent",
    "Tone",
    "Schedule",
    "ScheduleConstraints",
    "Violation",
    "cell_to_rf",
    "compile_schedule",
    "constraints_for_specs",
    "derive_timings",
    "schedule_from_jsonl",
    "schedule_to_jsonl",
    "superposition_rf",
    "validate_schedule",
    # detection
    "CountRow",
    "CountsTable",
    "MeasurementSetting",
    "coincidence_probability",
    "counts_from_csv",
    "counts_to_csv",
    "sample_counts",
    "tomography_settings",
    "w_settings",
    # estimation
    "FidelityEstimate",
    "ReconstructionResult",
    "WFidelityData",
    "bell_target",
    "linear_inversion",
    "logical_basis",
    "mle_reconstruct",
    "monte_carlo_fidelity",
    "monte_carlo_w_fidelity",
    "w_data_from_counts",
    "w_data_from_density",
    "w_fidelity",
    # batch front-end
    "ConfigError",
    "ExperimentConfig",
    "load_experiment_config",
    "run_experiment",
    "run_sweep",
]
