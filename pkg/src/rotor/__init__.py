"""rotor: excitation-free fast rotations of a particle in a 2D anisotropic trap.

Design commensurate-frequency rotation protocols by symplectically
decoupling the rotating-frame dynamics into normal modes, then verify the
designs with exact classical propagation and truncated Fock-space quantum
simulation.
"""

from .classical import (
    Trajectory,
    lab_frame_state,
    propagate_normal,
    propagate_rotating,
    sample_trajectory,
    trajectory_to_csv,
)
from .core import (
    J,
    PhaseSpaceState,
    QuadraticForm,
    TrapConfig,
    build_rotating_hamiltonian,
    hamiltonian_value,
    williamson_valid,
)
from .designer import (
    RotationProtocol,
    SensitivityReport,
    commensurate_velocity,
    design_protocol,
    ground_state_sensitivity,
    kappa,
    minimal_time,
)
from .errors import (
    ConvergenceFailure,
    DegenerateOverlap,
    InfeasibleDesign,
    LogBranchFailure,
    RotorError,
    TruncationTooSmall,
    WilliamsonViolation,
)
from .quantum import (
    FockHamiltonian,
    ObservableSeries,
    QuantumState,
    TrackGrid,
    build_fock_hamiltonian,
    coherent_state,
    conjugation_check,
    converge_truncation,
    entangled_state,
    evolve,
    fock_state,
    mean_excitation,
    measure_sensitivity,
    revival_phase,
    stability_sweep,
    survival_probability,
    wavepacket_track,
)
from .symplectic import (
    NormalModes,
    SymplecticTransform,
    from_normal_coords,
    normal_frequencies,
    normal_mode_energy,
    normal_modes,
    step_transforms,
    symplectic_generator,
    to_normal_coords,
)

__version__ = "0.1.0"
