"""Simulation of quantum systems driven by single-photon wave packets.

Deterministic moment dynamics (coupled generalized master equations),
stochastic filtering under homodyne detection of the output field, and a
Markovian embedding of the single-photon source that generates physically
distributed measurement records and serves as an independent cross-check
of the filtered expectations.
"""
from .errors import ConfigError, InvariantViolation, PhotonFilterError
from .filtering import (
    DEFAULT_DT_SDE,
    EnsembleRun,
    ExtendedTrajectory,
    FilterState,
    MeasurementRecord,
    TrajectoryRun,
    VacuumTrajectory,
    filter_step,
    functional_increments,
    gain,
    generate_record,
    resolve_thread_count,
    run_ensemble,
    run_trajectory,
    run_vacuum_trajectory,
    vacuum_filter_step,
    vacuum_gain,
)
from .master import (
    DEFAULT_DT_ODE,
    EmbeddingRun,
    GeneralizedState,
    MasterRun,
    VacuumRun,
    embedding_oracle,
    integrate_master,
    integrate_vacuum_master,
    master_rhs,
)
from .operators import (
    SLHTriple,
    adjoint,
    basis_state,
    commutator,
    dissipator_heisenberg,
    imag_part,
    lindblad_heisenberg,
    lindblad_schrodinger,
    passive_triple,
    projector,
)
from .pulses import (
    DecayingExponentialPulse,
    GaussianPulse,
    Pulse,
    SquarePulse,
    TabulatedPulse,
    pulse_from_config,
)
from .slh import (
    ExtendedSystem,
    coupling_amplitude,
    extended_generator,
    generating_filter_weights,
    series_product,
    signal_model,
)
from .twolevel import (
    BlochFilterCoeffs,
    BlochMasterCoeffs,
    bloch_filter_rhs,
    bloch_master_rhs,
    integrate_bloch_master,
    twolevel_system,
)

__version__ = "0.1.0"

__all__ = [
    "BlochFilterCoeffs",
    "BlochMasterCoeffs",
    "ConfigError",
    "DecayingExponentialPulse",
    "DEFAULT_DT_ODE",
    "DEFAULT_DT_SDE",
    "EmbeddingRun",
    "EnsembleRun",
    "ExtendedSystem",
    "ExtendedTrajectory",
    "FilterState",
    "GaussianPulse",
    "GeneralizedState",
    "InvariantViolation",
    "MasterRun",
    "MeasurementRecord",
    "PhotonFilterError",
    "Pulse",
    "SLHTriple",
    "SquarePulse",
    "TabulatedPulse",
    "TrajectoryRun",
    "VacuumRun",
    "VacuumTrajectory",
    "adjoint",
    "basis_state",
    "bloch_filter_rhs",
    "bloch_master_rhs",
    "commutator",
    "coupling_amplitude",
    "dissipator_heisenberg",
    "embedding_oracle",
    "extended_generator",
    "filter_step",
    "functional_increments",
    "gain",
    "generate_record",
    "generating_filter_weights",
    "imag_part",
    "integrate_bloch_master",
    "integrate_master",
    "integrate_vacuum_master",
    "lindblad_heisenberg",
    "lindblad_schrodinger",
    "master_rhs",
    "passive_triple",
    "projector",
    "pulse_from_config",
    "resolve_thread_count",
    "run_ensemble",
    "run_trajectory",
    "run_vacuum_trajectory",
    "series_product",
    "signal_model",
    "twolevel_system",
    "vacuum_filter_step",
    "vacuum_gain",
    "__version__",
]
