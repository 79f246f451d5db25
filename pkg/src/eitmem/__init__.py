"""EIT cold-atom optical memory: source, propagation, storage, statistics."""

from .core import (
    BETA_CG,
    C0_SI,
    DELTA_S_INTERNAL,
    GAMMA13_SI,
    UNITS,
    ControlProfile,
    EnsembleParams,
    TimeGrid,
    UnitSystem,
    Wavepacket,
    evaluate_control,
    wavepacket_norm,
)
from .source import (
    SourceParams,
    generate_heralded_waveform,
    group_velocity,
    pump_profile,
)
from .solver import (
    FieldState,
    PropagationResult,
    SolverConfig,
    effective_dephasing,
    propagate,
)
from .spectral import (
    TransmissionCurve,
    apply_transfer,
    eit_spectrum,
    fit_eit,
    group_delay,
    transfer_function,
)
from .storage import (
    DecayModel,
    StorageResult,
    apply_storage_decay,
    fit_gaussian_decay,
    heuristic_off_time,
    intensity_fwhm,
    run_slow_light,
    run_storage,
    storage_efficiency,
    storage_time_at,
    waveform_likeness,
)
from .optimize import (
    ControlOptimum,
    ScanResult,
    optimize_control,
    scan_optical_depth,
    scan_storage_time,
)
from .stats import (
    CorrelationHistogram,
    EventStream,
    Gc2Result,
    SourceStatModel,
    cauchy_schwarz_ratio,
    channel_autocorrelation,
    conditional_g2,
    estimate_rcs,
    pair_cross_correlation,
    simulate_event_stream,
)
from .timetags import read_timetag_file, write_timetag_csv, write_timetag_file

__all__ = [
    "BETA_CG",
    "C0_SI",
    "DELTA_S_INTERNAL",
    "GAMMA13_SI",
    "UNITS",
    "ControlProfile",
    "EnsembleParams",
    "TimeGrid",
    "UnitSystem",
    "Wavepacket",
    "evaluate_control",
    "wavepacket_norm",
    "SourceParams",
    "generate_heralded_waveform",
    "group_velocity",
    "pump_profile",
    "FieldState",
    "PropagationResult",
    "SolverConfig",
    "effective_dephasing",
    "propagate",
    "TransmissionCurve",
    "apply_transfer",
    "eit_spectrum",
    "fit_eit",
    "group_delay",
    "transfer_function",
    "DecayModel",
    "StorageResult",
    "apply_storage_decay",
    "fit_gaussian_decay",
    "heuristic_off_time",
    "intensity_fwhm",
    "run_slow_light",
    "run_storage",
    "storage_efficiency",
    "storage_time_at",
    "waveform_likeness",
    "ControlOptimum",
    "ScanResult",
    "optimize_control",
    "scan_optical_depth",
    "scan_storage_time",
    "CorrelationHistogram",
    "EventStream",
    "Gc2Result",
    "SourceStatModel",
    "cauchy_schwarz_ratio",
    "channel_autocorrelation",
    "conditional_g2",
    "estimate_rcs",
    "pair_cross_correlation",
    "simulate_event_stream",
    "read_timetag_file",
    "write_timetag_csv",
    "write_timetag_file",
]

__version__ = "0.1.0"
