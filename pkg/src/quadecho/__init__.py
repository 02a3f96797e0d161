"""quadecho: nuclear-spin echo simulator for ionized group-V donors in silicon.

Spin-I qudit dynamics under static quadrupolar disorder and dynamic
field-like / charge-induced quadrupolar noise: Hahn and Carr-Purcell
echoes on selective transitions, phase-cycled three-pulse echoes with
coherence-pathway separation, and stretched-exponential fitting of the
resulting decays.
"""

__version__ = "0.1.0"

from .spin import (
    CoherenceKind,
    CoherenceLabel,
    DeltaNuTable,
    QuadrupoleGeometry,
    SpinSystem,
    build_hamiltonian,
    coherence_label,
    delta_nu_table,
    quadrupole_frequency,
    spin_operators,
    transition_frequency,
)
from .pulses import (
    Delay,
    EnvironmentMarker,
    InvariantViolation,
    PulseEvent,
    ReadoutSpec,
    Sequence,
    free_evolution,
    level_state,
    oracle_propagate,
    pulse_propagator,
    run_sequence,
    superposition_state,
)
from .noise import (
    ChargeBurstModel,
    FluctuatorBath,
    NoiseRealization,
    StaticDisorder,
    realize_for_sequence,
    sample_static,
    simulate_charge_burst,
    simulate_telegraph_phase,
)
from .experiments import (
    DecayTrace,
    DegenerateTraceError,
    FitError,
    FitResult,
    PathwaySpectrum,
    cpmg_scan,
    fit_decay,
    hahn_echo_decay,
    multiquantum_decays,
    three_pulse_phase_cycle,
    tspace_scan,
)
from .config import ConfigError, RunConfig, parse_config

__all__ = [
    "__version__",
    "SpinSystem", "QuadrupoleGeometry", "CoherenceLabel", "CoherenceKind", "DeltaNuTable",
    "build_hamiltonian", "quadrupole_frequency", "delta_nu_table", "coherence_label",
    "spin_operators", "transition_frequency",
    "PulseEvent", "Delay", "EnvironmentMarker", "Sequence", "ReadoutSpec",
    "pulse_propagator", "free_evolution", "run_sequence", "oracle_propagate",
    "level_state", "superposition_state", "InvariantViolation",
    "StaticDisorder", "FluctuatorBath", "ChargeBurstModel", "NoiseRealization",
    "sample_static", "simulate_telegraph_phase", "simulate_charge_burst",
    "realize_for_sequence",
    "DecayTrace", "FitResult", "PathwaySpectrum", "FitError", "DegenerateTraceError",
    "hahn_echo_decay", "three_pulse_phase_cycle", "multiquantum_decays",
    "cpmg_scan", "tspace_scan", "fit_decay",
    "RunConfig", "parse_config", "ConfigError",
]
