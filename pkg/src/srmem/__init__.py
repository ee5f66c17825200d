"""Maxwell-Bloch simulator for superradiant, ATS, and EIT optical memories."""

from .model import (
    ControlSchedule,
    GaussianPulse,
    GridSpec,
    MediumParams,
    ModelError,
    PulseSpec,
    RisingExponential,
    SampledPulse,
    SquarePulse,
    pulse_area,
    sample_pulse,
)
from .solver import (
    EmissionResult,
    EnergyLedger,
    FieldRecord,
    SolverError,
    energy_audit,
    save_fields,
    solve,
    superradiant_emission,
)
from .analytic import (
    LinearResponse,
    OracleError,
    RegimeError,
    analytic_transmission,
    bandwidth_fwhm,
    collective_decay_time,
    fast_control_requirement,
    optimal_probe_duration,
    transfer_function,
    writing_stage_solution,
)

__version__ = "0.1.0"

__all__ = [
    "ControlSchedule",
    "EmissionResult",
    "EnergyLedger",
    "FieldRecord",
    "GaussianPulse",
    "GridSpec",
    "LinearResponse",
    "MediumParams",
    "ModelError",
    "OracleError",
    "PulseSpec",
    "RegimeError",
    "RisingExponential",
    "SampledPulse",
    "SolverError",
    "SquarePulse",
    "analytic_transmission",
    "bandwidth_fwhm",
    "collective_decay_time",
    "energy_audit",
    "fast_control_requirement",
    "optimal_probe_duration",
    "pulse_area",
    "sample_pulse",
    "save_fields",
    "solve",
    "superradiant_emission",
    "transfer_function",
    "writing_stage_solution",
    "__version__",
]
