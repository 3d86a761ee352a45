"""Exception types shared across the rotor package."""


class RotorError(Exception):
    """Base class for all rotor-specific errors."""


class WilliamsonViolation(RotorError):
    """Rotation velocity too large for a symplectic diagonalization.

    Raised when theta_dot >= min(omega1, omega2), where the quadratic
    Hamiltonian matrix stops being positive definite and the normal-mode
    construction produces complex entries.
    """


class InfeasibleDesign(RotorError):
    """No commensurate protocol exists for the requested parameters."""


class LogBranchFailure(RotorError):
    """The principal real matrix logarithm of a symplectic matrix failed.

    Either the matrix has eigenvalues on the closed negative real axis or
    the reconstruction exp(2*J*G) does not reproduce the input to
    tolerance.  The failure is reported rather than silently switching
    branches.
    """


class TruncationTooSmall(RotorError):
    """A Fock-space truncation cannot represent the requested state."""


class DegenerateOverlap(RotorError):
    """An overlap is too small for its phase to be meaningful."""


class ConvergenceFailure(RotorError):
    """An iterative refinement (truncation doubling, quadrature halving)
    failed to converge within its configured limits."""
