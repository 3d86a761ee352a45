"""Truncated two-mode Fock-space simulation of the rotating-frame dynamics.

States live on the number basis |n1, n2> of the two static-trap
oscillators, truncated to 0 <= n_j < nmax and stored row-major as an
(nmax, nmax) coefficient array.  The Hamiltonian is time independent
during a constant-velocity rotation, so evolution uses one Hermitian
eigendecomposition per (config, nmax) rather than time stepping; the
propagator is then exact up to truncation.

Two structural facts keep the eigenproblem cheap.  The coupling only
connects states whose total occupation differs by 0 or 2, so the matrix
splits into an even and an odd parity sector.  And the diagonal phase
rotation ``i**n1`` turns every coupling element real, so each sector is a
real symmetric matrix; both reductions are exact and verified against the
dense complex solver in the tests.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.special import gammainc

from .classical import flow_matrix
from .core import J
from .designer import SensitivityReport
from .errors import (
    ConvergenceFailure,
    DegenerateOverlap,
    LogBranchFailure,
    TruncationTooSmall,
)
from .symplectic import normal_modes

#: rms spread of the ground-state position density, the natural length for
#: "within one ground-state width" statements.
GROUND_STATE_WIDTH = 1 / np.sqrt(2)

_COHERENT_TAIL_TOL = 1e-10


# ---------------------------------------------------------------------------
# basis utilities


def hermite_functions(nmax, x):
    """Orthonormal harmonic-oscillator eigenfunctions phi_0..phi_{nmax-1}.

    Evaluated on a point grid by the stable three-term recurrence on the
    normalized functions, which avoids the factorial overflow of the
    polynomial route for large n.

    Returns
    -------
    ndarray of shape (nmax, x.size)
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((nmax, x.size))
    out[0] = np.pi**-0.25 * np.exp(-(x**2) / 2)
    if nmax > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, nmax - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def _mode_matrices(nmax):
    """Single-mode ladder, position and momentum matrices (dense, small)."""
    a = np.diag(np.sqrt(np.arange(1, nmax)), 1)
    q = (a + a.T) / np.sqrt(2)
    p = (a - a.T) / (1j * np.sqrt(2))
    return a, q, p


def _index_grids(nmax):
    n1 = np.repeat(np.arange(nmax), nmax)
    n2 = np.tile(np.arange(nmax), nmax)
    return n1, n2


def phase_space_operators(nmax):
    """Sparse (q1, q2, p1, p2) on the two-mode truncated basis."""
    _, q, p = _mode_matrices(nmax)
    eye = sp.identity(nmax, format="csr")
    qs, ps = sp.csr_matrix(q), sp.csr_matrix(p)
    return (
        sp.kron(qs, eye, format="csr"),
        sp.kron(eye, qs, format="csr"),
        sp.kron(ps, eye, format="csr"),
        sp.kron(eye, ps, format="csr"),
    )


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class QuantumState:
    """Normalized coefficients over the truncated |n1, n2> basis."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("coefficients must form a square (nmax, nmax) array")
        norm = np.linalg.norm(c)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state must be normalized (|psi| = {norm:.12g})")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def nmax(self):
        return self.coeffs.shape[0]

    @property
    def vector(self):
        """Row-major flattening, index n1 * nmax + n2."""
        return self.coeffs.ravel()


def fock_state(n1, n2, nmax):
    """The basis state |n1, n2>."""
    if not (0 <= n1 < nmax and 0 <= n2 < nmax):
        raise TruncationTooSmall(f"|{n1},{n2}> does not fit below nmax = {nmax}")
    c = np.zeros((nmax, nmax), dtype=complex)
    c[n1, n2] = 1.0
    return QuantumState(c)


def entangled_state(nmax):
    """The one-quantum superposition (|0,1> + |1,0>)/sqrt(2)."""
    c = np.zeros((nmax, nmax), dtype=complex)
    c[0, 1] = c[1, 0] = 1 / np.sqrt(2)
    return QuantumState(c)


def _coherent_coefficients(alpha, nmax):
    n = np.arange(nmax)
    if alpha == 0:
        out = np.zeros(nmax, dtype=complex)
        out[0] = 1.0
        return out
    log_mag = (
        n * np.log(abs(alpha))
        - 0.5 * np.array([math.lgamma(k + 1) for k in n])
        - abs(alpha) ** 2 / 2
    )
    return np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))


def coherent_state(alpha1, alpha2, nmax):
    """Two-mode coherent state |alpha1, alpha2>, renormalized after truncation.

    Raises
    ------
    TruncationTooSmall
        If either mode leaves more than 1e-10 of its population above the
        truncation (Poisson tail with mean |alpha|^2).
    """
    for alpha in (alpha1, alpha2):
        tail = float(gammainc(nmax, abs(alpha) ** 2))
        if tail >= _COHERENT_TAIL_TOL:
            raise TruncationTooSmall(
                f"|alpha|^2 = {abs(alpha)**2:.4g} leaves tail weight {tail:.3e} "
                f"above nmax = {nmax}"
            )
    c = np.outer(_coherent_coefficients(alpha1, nmax), _coherent_coefficients(alpha2, nmax))
    return QuantumState(c / np.linalg.norm(c))


def expand_state(state, nmax):
    """Embed a state into a larger truncation (zero padding)."""
    if nmax < state.nmax:
        raise ValueError("can only expand to a larger nmax")
    if nmax == state.nmax:
        return state
    c = np.zeros((nmax, nmax), dtype=complex)
    c[: state.nmax, : state.nmax] = state.coeffs
    return QuantumState(c)


def top_shell_weight(state):
    """Population on the outermost shell (n1 = nmax-1 or n2 = nmax-1)."""
    c = state.coeffs
    return float((np.abs(c[-1, :]) ** 2).sum() + (np.abs(c[:-1, -1]) ** 2).sum())


def mean_excitation(state):
    """Expected total occupation <a1+ a1 + a2+ a2>."""
    n1, n2 = _index_grids(state.nmax)
    return float(np.sum(np.abs(state.vector) ** 2 * (n1 + n2)))


def survival_probability(psi0, psit):
    """|<psi_t | psi_0>|^2 of two states on the same truncation."""
    if psi0.nmax != psit.nmax:
        raise ValueError("states live on different truncations")
    return float(abs(np.vdot(psit.vector, psi0.vector)) ** 2)


def phase_space_expectations(state):
    """(<q1>, <q2>, <p1>, <p2>) of a state, computed mode-wise."""
    c = state.coeffs
    n = np.sqrt(np.arange(1, state.nmax))
    a1 = np.sum(n[:, None] * np.conj(c[:-1, :]) * c[1:, :])
    a2 = np.sum(n[None, :] * np.conj(c[:, :-1]) * c[:, 1:])
    return np.array(
        [
            np.sqrt(2) * a1.real,
            np.sqrt(2) * a2.real,
            np.sqrt(2) * a1.imag,
            np.sqrt(2) * a2.imag,
        ]
    )


# ---------------------------------------------------------------------------
# Hamiltonian and propagation


@dataclass
class FockHamiltonian:
    """Hermitian matrix of the rotating-frame Hamiltonian on the truncated
    basis, row-major ordering (n1, n2).  ``matrix`` is stored sparse; the
    spectral factorization is built lazily and cached for reuse across
    evolution times."""

    matrix: sp.csr_matrix
    nmax: int
    config: object
    _spectral: tuple | None = field(default=None, repr=False, compare=False)

    def dense(self):
        return self.matrix.toarray()


def build_fock_hamiltonian(config, nmax):
    """Quantize the rotating-frame Hamiltonian on an nmax x nmax Fock grid.

    H = omega1 (a1+ a1 + 1/2) + omega2 (a2+ a2 + 1/2)
        - theta_dot (q1 p2 / eta - eta q2 p1)
    with q_j = (a_j + a_j+)/sqrt(2) and p_j = (a_j - a_j+)/(i sqrt(2)).
    """
    if nmax < 2:
        raise ValueError("nmax must be at least 2")
    w1, w2, td = config.omega1, config.omega2, config.theta_dot
    eta = config.eta
    _, q, p = _mode_matrices(nmax)
    number = np.diag(np.arange(nmax, dtype=float))
    eye = sp.identity(nmax, format="csr")
    half = sp.csr_matrix(number + np.eye(nmax) / 2)
    qs, ps = sp.csr_matrix(q), sp.csr_matrix(p)
    h = (
        w1 * sp.kron(half, eye)
        + w2 * sp.kron(eye, half)
        - td * ((1 / eta) * sp.kron(qs, ps) - eta * sp.kron(ps, qs))
    ).tocsr()
    herm = h - h.getH()
    resid = np.abs(herm.data).max() if herm.nnz else 0.0
    if resid > 1e-12 * np.abs(h.data).max():
        raise ValueError("constructed matrix is not Hermitian")
    return FockHamiltonian(matrix=h, nmax=nmax, config=config)


def _spectral_decomposition(h):
    """Eigen-factorization of the Hamiltonian, cached on the instance.

    Returns (phases, sectors) where sectors is a list of (indices,
    eigenvalues, eigenvector matrix).  When the phase rotation i**n1
    renders the matrix real and the parity sectors decouple (always true
    for matrices built here), the eigenvector blocks are real and half
    sized; otherwise a dense complex factorization of the full matrix is
    used.
    """
    if h._spectral is not None:
        return h._spectral
    d = h.nmax**2
    n1, n2 = _index_grids(h.nmax)
    phases = (1j) ** (n1 % 4)
    rot = (sp.diags(np.conj(phases)) @ h.matrix @ sp.diags(phases)).tocsr()
    scale = np.abs(h.matrix.data).max()
    imag_resid = np.abs(rot.imag.data).max() if rot.imag.nnz else 0.0
    even = np.where((n1 + n2) % 2 == 0)[0]
    odd = np.where((n1 + n2) % 2 == 1)[0]
    cross = rot[even][:, odd]
    cross_resid = np.abs(cross.data).max() if cross.nnz else 0.0
    if imag_resid <= 1e-12 * scale and cross_resid <= 1e-12 * scale:
        real = rot.real.tocsr()
        sectors = []
        for idx in (even, odd):
            w, v = np.linalg.eigh(real[idx][:, idx].toarray())
            sectors.append((idx, w, v))
    else:
        w, v = np.linalg.eigh(h.matrix.toarray())
        phases = np.ones(d)
        sectors = [(np.arange(d), w, v)]
    h._spectral = (phases, sectors)
    return h._spectral


def eigenvalues(h):
    """Sorted eigenvalues of the truncated Hamiltonian."""
    _, sectors = _spectral_decomposition(h)
    return np.sort(np.concatenate([w for _, w, _ in sectors]))


def evolve_series(state, h, times):
    """Coefficients of exp(-i H t) |psi> for every t in ``times``.

    Returns
    -------
    ndarray of shape (len(times), nmax, nmax)
    """
    if state.nmax != h.nmax:
        raise ValueError("state and Hamiltonian use different truncations")
    times = np.atleast_1d(np.asarray(times, dtype=float))
    phases, sectors = _spectral_decomposition(h)
    u = np.conj(phases) * state.vector
    out = np.empty((h.nmax**2, times.size), dtype=complex)
    for idx, w, v in sectors:
        y = v.conj().T @ u[idx]
        out[idx] = v @ (np.exp(-1j * np.outer(w, times)) * y[:, None])
    out *= phases[:, None]
    return np.ascontiguousarray(out.T).reshape(times.size, h.nmax, h.nmax)


def evolve(state, h, t):
    """Propagate a state for a time t under a time-independent Hamiltonian.

    Unitary by construction: the returned state passes the normalization
    check without renormalizing.
    """
    return QuantumState(evolve_series(state, h, [float(t)])[0])


# ---------------------------------------------------------------------------
# observables over time


@dataclass(frozen=True)
class ObservableSeries:
    """A real observable sampled over time."""

    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have matching shapes")


def survival_series(psi0, h, times):
    """P(t) = |<psi(t)|psi(0)>|^2 on a time grid."""
    coeffs = evolve_series(psi0, h, times)
    overlaps = np.tensordot(coeffs.conj(), psi0.coeffs, axes=([1, 2], [0, 1]))
    return ObservableSeries(times, np.abs(overlaps) ** 2, label="survival")


def excitation_series(psi0, h, times):
    """<N(t)> = <a1+ a1 + a2+ a2>(t) on a time grid."""
    coeffs = evolve_series(psi0, h, times)
    n1, n2 = _index_grids(h.nmax)
    weights = (n1 + n2).reshape(h.nmax, h.nmax)
    values = np.sum(np.abs(coeffs) ** 2 * weights[None], axis=(1, 2))
    return ObservableSeries(times, values, label="mean_excitation")


def revival_phase(psi0, protocol, nmax=None):
    """Unit-modulus overlap <psi0|psi(T)> / |<psi0|psi(T)>| after one period.

    For a commensurate design the evolution multiplies every stationary
    component by the same sign, so the overlap phase is (-1)**(n1 + n2);
    the zero-point factor exp(-i (O1 + O2) T / 2) equals that same sign at
    t = T, so no further correction is applied.

    Raises
    ------
    DegenerateOverlap
        If |<psi0|psi(T)>| < 1e-6, where the phase carries no information.
    """
    if nmax is not None and nmax != psi0.nmax:
        psi0 = expand_state(psi0, nmax)
    h = build_fock_hamiltonian(protocol.config, psi0.nmax)
    psi_t = evolve(psi0, h, protocol.duration)
    overlap = np.vdot(psi0.vector, psi_t.vector)
    if abs(overlap) < 1e-6:
        raise DegenerateOverlap(f"|overlap| = {abs(overlap):.3e} too small for a phase")
    return overlap / abs(overlap)


# ---------------------------------------------------------------------------
# truncation convergence


def converge_truncation(
    protocol,
    make_state,
    nmax_start=16,
    p_tol=1e-8,
    shell_tol=1e-8,
    nmax_cap=128,
):
    """Double nmax until the revival survival stabilizes.

    ``make_state(nmax)`` must return the initial state at a given
    truncation.  Doubling stops once P(T) changes by less than ``p_tol``
    between consecutive sizes and the top-shell weight (of both the
    initial and the final state) stays below ``shell_tol``.

    Returns
    -------
    (nmax, trace) : converged truncation and a list of per-step records
        (dicts with nmax, survival, shell_weight).
    """
    trace = []
    prev_p = None
    nmax = int(nmax_start)
    while nmax <= nmax_cap:
        psi0 = make_state(nmax)
        h = build_fock_hamiltonian(protocol.config, nmax)
        psi_t = evolve(psi0, h, protocol.duration)
        p_final = survival_probability(psi0, psi_t)
        shell = max(top_shell_weight(psi0), top_shell_weight(psi_t))
        trace.append({"nmax": nmax, "survival": p_final, "shell_weight": shell})
        if prev_p is not None and abs(p_final - prev_p) < p_tol and shell < shell_tol:
            return nmax, trace
        prev_p = p_final
        nmax *= 2
    raise ConvergenceFailure(
        f"survival not converged below nmax = {nmax_cap}: trace = {trace}"
    )


def default_start_nmax(states_mean_excitation):
    """Starting truncation heuristic, 4 <N(0)> + 10 floored at 16."""
    return max(16, int(np.ceil(4 * states_mean_excitation + 10)))


# ---------------------------------------------------------------------------
# wavepacket track


@dataclass(frozen=True)
class TrackGrid:
    """Time-integrated probability density over a position grid.

    ``density[i, j]`` is the integral of |psi(q1_i, q2_j, t)|^2 dt over one
    rotation, so the full grid integrates to the duration T (up to grid and
    truncation loss).  ``diagnostics`` records quadrature convergence data.
    """

    q1_axis: np.ndarray
    q2_axis: np.ndarray
    density: np.ndarray
    diagnostics: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.density.shape != (self.q1_axis.size, self.q2_axis.size):
            raise ValueError("density shape must match the axes")
        if self.density.min() < 0:
            raise ValueError("density must be non-negative")

    def time_integral(self):
        dq1 = self.q1_axis[1] - self.q1_axis[0]
        dq2 = self.q2_axis[1] - self.q2_axis[0]
        return float(self.density.sum() * dq1 * dq2)


def classical_orbit(protocol, centroid, n_samples=1024):
    """Position samples (n, 2) of the classical orbit started at ``centroid``."""
    modes = normal_modes(protocol.config)
    v0 = np.asarray(centroid, dtype=float)
    ts = np.linspace(0.0, protocol.duration, n_samples)
    return np.array([(flow_matrix(modes, t) @ v0)[:2] for t in ts])


def _default_track_axes(protocol, psi0, points, pad_widths):
    orbit = classical_orbit(protocol, phase_space_expectations(psi0))
    pad = pad_widths * GROUND_STATE_WIDTH
    q1 = np.linspace(orbit[:, 0].min() - pad, orbit[:, 0].max() + pad, points)
    q2 = np.linspace(orbit[:, 1].min() - pad, orbit[:, 1].max() + pad, points)
    return q1, q2


def wavepacket_track(
    psi0,
    protocol,
    q1_axis=None,
    q2_axis=None,
    time_steps=2000,
    grid_points=201,
    pad_widths=3.0,
    quad_tol=0.01,
):
    """Accumulate the position density of an evolving state over one period.

    The density is the trapezoidal time quadrature of |psi(q1, q2, t)|^2
    with ``time_steps`` uniform steps on [0, T]; a halved-step comparison
    must agree to ``quad_tol`` in L1 or the quadrature is deemed
    unconverged.  Default axes cover the classical orbit of the state's
    centroid plus ``pad_widths`` ground-state widths.

    Raises
    ------
    ConvergenceFailure
        If halving the quadrature step changes the density by more than
        ``quad_tol`` relative L1.
    """
    if q1_axis is None or q2_axis is None:
        q1_axis, q2_axis = _default_track_axes(protocol, psi0, grid_points, pad_widths)
    q1_axis = np.asarray(q1_axis, dtype=float)
    q2_axis = np.asarray(q2_axis, dtype=float)
    steps = int(time_steps)
    if steps % 2:
        steps += 1
    h = build_fock_hamiltonian(protocol.config, psi0.nmax)
    times = np.linspace(0.0, protocol.duration, steps + 1)
    dt = times[1] - times[0]
    w_full = np.full(times.size, dt)
    w_full[0] = w_full[-1] = dt / 2
    w_half = np.zeros(times.size)
    w_half[::2] = 2 * dt
    w_half[0] = w_half[-1] = dt

    basis1 = hermite_functions(psi0.nmax, q1_axis)
    basis2 = hermite_functions(psi0.nmax, q2_axis)
    dens_full = np.zeros((q1_axis.size, q2_axis.size))
    dens_half = np.zeros_like(dens_full)
    shell_max = 0.0
    chunk = max(1, int(2e8 // (q1_axis.size * q2_axis.size * 16)))
    for start in range(0, times.size, chunk):
        stop = min(start + chunk, times.size)
        coeffs = evolve_series(psi0, h, times[start:stop])
        shell_max = max(
            shell_max,
            float(
                np.max(
                    (np.abs(coeffs[:, -1, :]) ** 2).sum(axis=1)
                    + (np.abs(coeffs[:, :-1, -1]) ** 2).sum(axis=1)
                )
            ),
        )
        amp = np.matmul(np.matmul(basis1.T[None], coeffs), basis2)
        prob = np.abs(amp) ** 2
        dens_full += np.einsum("t,txy->xy", w_full[start:stop], prob)
        dens_half += np.einsum("t,txy->xy", w_half[start:stop], prob)

    l1 = dens_full.sum()
    quad_err = float(np.abs(dens_full - dens_half).sum() / l1)
    if quad_err > quad_tol:
        raise ConvergenceFailure(
            f"time quadrature not converged: halving changes the track by {quad_err:.3e}"
        )
    diagnostics = {
        "time_steps": steps,
        "quadrature_rel_change": quad_err,
        "max_top_shell_weight": shell_max,
        "nmax": psi0.nmax,
    }
    return TrackGrid(q1_axis, q2_axis, dens_full, diagnostics)


# ---------------------------------------------------------------------------
# stability under timing errors


def stability_sweep(psi0, protocol, epsilons, nmax=None):
    """Survival probability P(T + eps) for each timing offset eps."""
    if nmax is not None and nmax != psi0.nmax:
        psi0 = expand_state(psi0, nmax)
    h = build_fock_hamiltonian(protocol.config, psi0.nmax)
    epsilons = np.asarray(epsilons, dtype=float)
    series = survival_series(psi0, h, protocol.duration + epsilons)
    return ObservableSeries(epsilons, series.values, label="survival_vs_offset")


def fit_quadratic_decay(series, window=None):
    """Least-squares curvature c of 1 - P = c * eps^2 near eps = 0.

    ``window`` restricts the fit to |eps| <= window (absolute time units).
    """
    eps = series.times
    loss = 1.0 - series.values
    if window is not None:
        keep = np.abs(eps) <= window
        eps, loss = eps[keep], loss[keep]
    denom = np.sum(eps**4)
    if denom == 0:
        raise ValueError("need nonzero offsets to fit a curvature")
    return float(np.sum(eps**2 * loss) / denom)


def energy_variance(psi0, h):
    """<H^2> - <H>^2 of a state (exact on the truncated basis)."""
    v = psi0.vector
    hv = h.matrix @ v
    mean = np.vdot(v, hv).real
    return float(np.vdot(hv, hv).real - mean**2)


def measure_sensitivity(protocol, psi0=None, nmax=32, n_eps=25, window_frac=0.01):
    """Fit the quadratic survival decay and compare with the energy variance.

    With no initial state the static-trap ground state is used, whose
    variance reduces to the closed form of
    :func:`rotor.designer.ground_state_sensitivity`.

    Returns
    -------
    SensitivityReport with delta_h_sq (exact variance), fitted_rate and
    relative_error filled in.
    """
    if psi0 is None:
        psi0 = fock_state(0, 0, nmax)
    h = build_fock_hamiltonian(protocol.config, psi0.nmax)
    variance = energy_variance(psi0, h)
    window = window_frac * protocol.duration
    eps = np.linspace(-window, window, n_eps)
    sweep = stability_sweep(psi0, protocol, eps)
    fitted = fit_quadratic_decay(sweep)
    return SensitivityReport(
        delta_h_sq=variance,
        fitted_rate=fitted,
        relative_error=abs(fitted - variance) / variance,
    )


# ---------------------------------------------------------------------------
# operator-identity verification


def _quadratic_operator(g, nmax):
    """Dense matrix of sum_jk g[j,k] v_j v_k on the truncated basis."""
    ops = [m.toarray() for m in phase_space_operators(nmax)]
    out = np.zeros((nmax**2, nmax**2), dtype=complex)
    for j in range(4):
        mixed = sum(g[j, k] * ops[k] for k in range(4))
        out += ops[j] @ mixed
    return out


def _unitary_from_quadratic(g, nmax):
    """exp(i * v^T g v) via per-parity-sector Hermitian eigendecomposition."""
    quad = _quadratic_operator(g, nmax)
    n1, n2 = _index_grids(nmax)
    u = np.zeros_like(quad)
    for s in (0, 1):
        idx = np.where((n1 + n2) % 2 == s)[0]
        block = quad[np.ix_(idx, idx)]
        w, v = np.linalg.eigh(block)
        u[np.ix_(idx, idx)] = (v * np.exp(1j * w)) @ v.conj().T
    return u


def conjugation_check(g, transform, nmax, levels=8):
    """Residual of the operator identity U+ v_j U = (S^-1 v)_j.

    ``g`` must generate ``transform`` through S = exp(2 J G); the unitary
    U = exp(i v^T G v) is built on the truncated basis and the identity is
    evaluated on the sub-block of states with n1, n2 < ``levels``, where
    truncation effects are negligible.

    Returns
    -------
    float: the largest spectral norm over j of the restricted residual.

    Raises
    ------
    LogBranchFailure
        If exp(2 J G) does not reproduce the transform to 1e-10.
    """
    s = transform.s
    if np.abs(expm(2 * J @ g) - s).max() > 1e-10:
        raise LogBranchFailure("generator does not reproduce the transform")
    s_inv = transform.inverse
    u = _unitary_from_quadratic(g, nmax)
    ops = [m.toarray() for m in phase_space_operators(nmax)]
    n1, n2 = _index_grids(nmax)
    keep = np.where((n1 < levels) & (n2 < levels))[0]
    u_dag = u.conj().T
    worst = 0.0
    for j in range(4):
        target = sum(s_inv[j, k] * ops[k] for k in range(4))
        resid = u_dag @ ops[j] @ u - target
        sub = resid[np.ix_(keep, keep)]
        worst = max(worst, float(np.linalg.norm(sub, 2)))
    return worst
