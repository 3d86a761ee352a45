"""Symplectic decoupling of the rotating-frame Hamiltonian into normal modes.

The coupled quadratic form A is brought to the diagonal
``diag(O1^2, O2^2, 1, 1)/2`` by a product of four elementary symplectic
matrices:

* a coordinate/momentum swap that makes A block diagonal,
* a shear that diagonalizes the momentum block,
* a positive scaling that turns the momentum block into the identity,
* a simultaneous rotation of both blocks by an angle ``alpha`` that
  diagonalizes the remaining coordinate block.

The transformation mixes coordinates with momenta, so it is canonical but
not a point transformation.  The normal frequencies O1 <= O2 also follow in
closed form from the trap parameters; they coincide with the moduli of the
imaginary eigenvalues of the linear dynamics matrix 2*J*A.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, logm

from .core import J, PhaseSpaceState, build_rotating_hamiltonian, williamson_valid
from .errors import LogBranchFailure, WilliamsonViolation

SYMPLECTIC_TOL = 1e-12


@dataclass(frozen=True)
class SymplecticTransform:
    """A real 4x4 matrix S with S^T J S = J (checked at construction)."""

    s: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if s.shape != (4, 4):
            raise ValueError("symplectic transform must be 4x4")
        resid = np.abs(s.T @ J @ s - J).max()
        if resid >= SYMPLECTIC_TOL:
            raise ValueError(f"matrix is not symplectic (residual {resid:.3e})")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @property
    def inverse(self):
        """S^-1 computed as J^-1 S^T J (exact for symplectic S)."""
        return -J @ self.s.T @ J


@dataclass(frozen=True)
class NormalModes:
    """Decoupled description of the rotating-frame dynamics.

    Attributes
    ----------
    omega_cap1, omega_cap2 : float
        Normal-mode frequencies, 0 < omega_cap1 <= omega_cap2.
    alpha : float
        Block-rotation angle of the final diagonalization step, in
        (-pi/2, pi/2].
    transform : SymplecticTransform
        Composite S with S^T A S = diag(O1^2, O2^2, 1, 1)/2.
    diag : ndarray
        The diagonalized 4x4 form (kept for residual checks).
    """

    omega_cap1: float
    omega_cap2: float
    alpha: float
    transform: SymplecticTransform
    diag: np.ndarray


def normal_frequencies(config):
    """Closed-form normal-mode frequencies (O1, O2) of a valid config.

    Raises
    ------
    WilliamsonViolation
        If theta_dot >= omega1, where the slow mode turns complex.
    """
    if not williamson_valid(config):
        raise WilliamsonViolation(
            f"theta_dot = {config.theta_dot} must be below omega1 = {config.omega1}"
        )
    w1sq, w2sq, tdsq = config.omega1**2, config.omega2**2, config.theta_dot**2
    mean = tdsq + (w1sq + w2sq) / 2
    root = np.sqrt(8 * tdsq * (w1sq + w2sq) + (w1sq - w2sq) ** 2) / 2
    return np.sqrt(mean - root), np.sqrt(mean + root)


def _rotation_angle(config):
    """Angle of the final block rotation, branch-fixed so the slow mode
    lands in the first diagonal slot.  Degenerate forms give alpha = 0."""
    w1, w2, td = config.omega1, config.omega2, config.theta_dot
    delta = w1**2 - td**2
    num = 4 * td * np.sqrt(delta)
    den = w1**2 - w2**2 - 4 * td**2
    if num == 0.0 and den == 0.0:
        return 0.0
    alpha = 0.5 * np.arctan2(num, den)
    # arctan2 fixes 2*alpha only up to pi; pick the representative whose
    # rotation puts the smaller eigenvalue first, wrapped into (-pi/2, pi/2].
    a, d = delta, 3 * td**2 + w2**2
    b = 2 * td * np.sqrt(delta)
    first = (a + d) / 2 + (a - d) / 2 * np.cos(2 * alpha) + b * np.sin(2 * alpha)
    omega1_sq = normal_frequencies(config)[0] ** 2
    if abs(first - omega1_sq) > 1e-9 * max(1.0, abs(first)):
        alpha += np.pi / 2
        if alpha > np.pi / 2:
            alpha -= np.pi
    return alpha


def _step_matrices(config, alpha):
    w1, w2, td = config.omega1, config.omega2, config.theta_dot
    delta = w1**2 - td**2
    s0 = np.array(
        [
            [0.0, 0.0, -1.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    c = td / np.sqrt(w1 * w2)
    s1 = np.eye(4)
    s1[0, 1] = c
    s1[3, 2] = -c
    s2 = np.diag([np.sqrt(delta / w1), np.sqrt(w2), np.sqrt(w1 / delta), 1 / np.sqrt(w2)])
    s3 = _block_rotation(alpha)
    return s0, s1, s2, s3


def step_transforms(config):
    """The four elementary transforms (S0, S1, S2, S3) of the construction.

    S0 swaps (q1, p1) to block-diagonalize A, S1 shears the momentum block
    diagonal, S2 scales it to the identity and S3 rotates both blocks by
    the closed-form angle.  Each factor is individually symplectic.
    """
    if not williamson_valid(config):
        raise WilliamsonViolation(
            f"theta_dot = {config.theta_dot} must be below omega1 = {config.omega1}"
        )
    mats = _step_matrices(config, _rotation_angle(config))
    return tuple(SymplecticTransform(s) for s in mats)


def _block_rotation(alpha):
    ca, sa = np.cos(alpha), np.sin(alpha)
    r = np.array([[ca, -sa], [sa, ca]])
    out = np.zeros((4, 4))
    out[:2, :2] = r
    out[2:, 2:] = r
    return out


def normal_modes(config):
    """Construct the composite transform and normal frequencies of a config.

    The returned ``transform`` S satisfies S^T A S = diag(O1^2, O2^2, 1, 1)/2
    with off-diagonal residual below ``SYMPLECTIC_TOL`` relative to |A|_max.
    """
    o1, o2 = normal_frequencies(config)
    alpha = _rotation_angle(config)
    s0, s1, s2, s3 = _step_matrices(config, alpha)
    s = SymplecticTransform(s0 @ s1 @ s2 @ s3)
    a = build_rotating_hamiltonian(config).a
    diag = s.s.T @ a @ s.s
    return NormalModes(o1, o2, alpha, s, diag)


def to_normal_coords(state, modes):
    """Map a rotating-frame point v to normal-mode coordinates V = S^-1 v."""
    return PhaseSpaceState.from_vector(modes.transform.inverse @ state.vector)


def from_normal_coords(state, modes):
    """Map normal-mode coordinates V back to the rotating frame, v = S V."""
    return PhaseSpaceState.from_vector(modes.transform.s @ state.vector)


def normal_mode_energy(state_v, modes):
    """Energy of a normal-mode point: (P1^2 + P2^2 + O1^2 Q1^2 + O2^2 Q2^2)/2."""
    q1, q2, p1, p2 = state_v.vector
    return 0.5 * (
        p1**2 + p2**2 + modes.omega_cap1**2 * q1**2 + modes.omega_cap2**2 * q2**2
    )


def symplectic_generator(transform, tol=1e-10):
    """Extract the symmetric generator G with S = exp(2 J G).

    Uses the principal real matrix logarithm.  The principal branch does
    not exist for every symplectic matrix (eigenvalues on the closed
    negative real axis), in which case the failure is reported instead of
    switching branches.

    Raises
    ------
    LogBranchFailure
        If the logarithm is complex/inaccurate, the generator is not
        symmetric to ``tol``, or exp(2 J G) misses S by more than ``tol``.
    """
    s = transform.s
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        log_s = logm(s)
    if np.abs(np.imag(log_s)).max() > tol:
        raise LogBranchFailure("principal logarithm is not real for this matrix")
    log_s = np.real(log_s)
    g = 0.5 * (-J) @ log_s
    if np.abs(g - g.T).max() > tol:
        raise LogBranchFailure("extracted generator is not symmetric")
    g = (g + g.T) / 2
    recon = expm(2 * J @ g)
    if np.abs(recon - s).max() > tol:
        raise LogBranchFailure("exp(2 J G) does not reconstruct the input matrix")
    return g
