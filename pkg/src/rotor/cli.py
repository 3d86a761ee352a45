"""Command-line front end: design, analyze, simulate, and sweep workflows.

Every run writes its data files plus a ``manifest.json`` capturing the
command, raw parameters, tolerances and output list; ``rotor rerun
manifest.json`` reproduces the outputs from that record.  CSV bodies are
deterministic (17 significant digits, no timestamps), and each file carries
the manifest hash in a leading ``#`` comment.

Exit codes: 0 success, 1 usage error, 2 infeasible or invalid physics,
3 convergence failure.
"""

import argparse
import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammainc

from . import __version__
from .classical import sample_trajectory, trajectory_to_csv
from .core import PhaseSpaceState, TrapConfig
from .designer import (
    design_protocol,
    ground_state_sensitivity,
    minimal_time,
)
from .errors import (
    ConvergenceFailure,
    InfeasibleDesign,
    TruncationTooSmall,
    WilliamsonViolation,
)
from .quantum import (
    QuantumState,
    build_fock_hamiltonian,
    coherent_state,
    converge_truncation,
    default_start_nmax,
    entangled_state,
    evolve_series,
    excitation_series,
    fit_quadratic_decay,
    fock_state,
    phase_space_expectations,
    revival_phase,
    stability_sweep,
    survival_series,
    wavepacket_track,
)
from .symplectic import normal_frequencies

DEFAULT_CONVERGENCE_TOL = 1e-8


# ---------------------------------------------------------------------------
# manifest and file helpers


@dataclass
class RunManifest:
    """Reproducibility record written next to every run's outputs."""

    tool: str
    version: str
    command: str
    parameters: dict
    tolerances: dict = field(default_factory=dict)
    nmax_trace: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    def canonical_json(self):
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    def hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def write(self, out_dir):
        path = Path(out_dir) / "manifest.json"
        path.write_text(self.canonical_json() + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path):
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**data)


def _fmt(x):
    return f"{float(x):.17g}"


def write_csv(path, header, rows, manifest_hash):
    """Deterministic CSV: '#' comment with the manifest hash, then the body."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# manifest sha256: {manifest_hash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _finish(manifest, out_dir, writers):
    """Hash the manifest (outputs listed, bodies pending), then write files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest.outputs = sorted(writers)
    digest = manifest.hash()
    for name, writer in writers.items():
        writer(out_dir / name, digest)
    manifest.write(out_dir)
    print(f"wrote {', '.join(manifest.outputs)} + manifest.json -> {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing helpers


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def parse_angle(text):
    """Angles in radians; accepts forms like 'pi', '2pi', 'pi/2', '3pi/4', '1.2'."""
    s = str(text).strip().lower().replace(" ", "")
    if "pi" in s:
        head, _, tail = s.partition("pi")
        value = float(head) if head not in ("", "+", "-") else float(head + "1")
        if tail.startswith("/"):
            value /= float(tail[1:])
        elif tail:
            raise ValueError(f"cannot parse angle {text!r}")
        return value * np.pi
    return float(s)


def parse_complex(text):
    return complex(str(text).strip().replace(" ", ""))


def _add_frequency(parser, name, required=False):
    group = parser.add_mutually_exclusive_group(required=required)
    group.add_argument(
        f"--{name}-khz",
        type=float,
        help=f"{name} as a plain frequency in kHz (times 2*pi internally)",
    )
    group.add_argument(
        f"--{name}-rad", type=float, help=f"{name} as a raw angular frequency"
    )


def resolve_frequency(params, name):
    """Angular frequency from raw parameters; kHz inputs give rad/ms units
    (durations in ms), raw inputs stay in the caller's units."""
    khz = params.get(f"{name}_khz")
    rad = params.get(f"{name}_rad")
    if khz is not None:
        return 2 * np.pi * float(khz), "khz"
    if rad is None:
        raise InfeasibleDesign(f"missing --{name}-khz or --{name}-rad")
    return float(rad), "rad"


def _freq_label(unit):
    return "2pi_khz" if unit == "khz" else "rad"


def _time_label(unit):
    return "ms" if unit == "khz" else "inverse_omega1_units"


def _freq_out(value, unit):
    return value / (2 * np.pi) if unit == "khz" else value


def _tolerances():
    tol = float(os.environ.get("ROTOR_TOL", DEFAULT_CONVERGENCE_TOL))
    return {"convergence": tol, "shell": tol}


def _protocol_from(params):
    omega1, unit = resolve_frequency(params, "omega1")
    theta_f = parse_angle(params["theta_f"])
    return design_protocol(omega1, theta_f, int(params["n1"]), int(params["n2"])), unit


def _state_builder(spec):
    spec = str(spec)
    if spec == "ground":
        return (lambda nmax: fock_state(0, 0, nmax)), 0.0
    if spec == "entangled":
        return entangled_state, 1.0
    if spec.startswith("coherent:"):
        parts = spec[len("coherent:"):].split(",")
        if len(parts) != 2:
            raise InfeasibleDesign("coherent state spec must be coherent:a1,a2")
        a1, a2 = (parse_complex(p) for p in parts)
        return (lambda nmax: coherent_state(a1, a2, nmax)), abs(a1) ** 2 + abs(a2) ** 2
    raise InfeasibleDesign(f"unknown state spec {spec!r}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_design(params, out_dir):
    tolerances = _tolerances()
    theta_f = parse_angle(params["theta_f"])
    n1, n2 = int(params["n1"]), int(params["n2"])
    if params.get("table1"):
        unit = "khz"
        freqs = [2 * np.pi * f for f in (1.0, 2.0, 5.0, 10.0)]
    else:
        omega1, unit = resolve_frequency(params, "omega1")
        freqs = [omega1]
    rows = []
    for omega1 in freqs:
        p = design_protocol(omega1, theta_f, n1, n2)
        o1, o2 = p.normal_frequencies()
        rows.append(
            [
                _freq_out(p.omega1, unit),
                _freq_out(p.omega2, unit),
                _freq_out(p.theta_dot, unit),
                p.duration,
                p.kappa_minus,
                p.kappa_plus,
                _freq_out(o1, unit),
                _freq_out(o2, unit),
                n1,
                n2,
                theta_f,
                minimal_time(p.omega1, theta_f),
                _freq_out(_freq_out(ground_state_sensitivity(p).delta_h_sq, unit), unit),
            ]
        )
    fl, tl = _freq_label(unit), _time_label(unit)
    header = [
        f"omega1_{fl}",
        f"omega2_{fl}",
        f"theta_dot_{fl}",
        f"duration_{tl}",
        "kappa_minus",
        "kappa_plus",
        f"omega_cap1_{fl}",
        f"omega_cap2_{fl}",
        "n1",
        "n2",
        "theta_f_rad",
        f"minimal_time_{tl}",
        f"delta_h_sq_{fl}_sq",
    ]
    for row in rows:
        print(
            f"omega1 = {row[0]:.4f} ({fl}) -> omega2 = {row[1]:.4f}, "
            f"theta_dot = {row[2]:.4f}, T = {row[3]:.4f} {tl} "
            f"(kappa- = {row[4]:.4f}, kappa+ = {row[5]:.4f})"
        )
    manifest = RunManifest("rotor", __version__, "design", params, tolerances)
    return _finish(
        manifest,
        out_dir,
        {"design.csv": lambda path, digest: write_csv(path, header, rows, digest)},
    )


def cmd_modes(params, out_dir):
    omega1, unit = resolve_frequency(params, "omega1")
    omega2, _ = resolve_frequency(params, "omega2")
    sweep = params.get("sweep")
    rows = []
    if sweep:
        for td in np.linspace(0.0, omega1, int(sweep), endpoint=False):
            o1, o2 = normal_frequencies(TrapConfig(omega1, omega2, td))
            rows.append([_freq_out(td, unit), _freq_out(o1, unit), _freq_out(o2, unit)])
    else:
        td, _ = resolve_frequency(params, "theta_dot")
        if td >= omega1:
            raise WilliamsonViolation(
                f"theta_dot at or beyond the maximum allowed rotation velocity "
                f"(omega1 = {_freq_out(omega1, unit):.6g} {_freq_label(unit)})"
            )
        o1, o2 = normal_frequencies(TrapConfig(omega1, omega2, td))
        rows.append([_freq_out(td, unit), _freq_out(o1, unit), _freq_out(o2, unit)])
        print(
            f"Omega1 = {rows[0][1]:.6f}, Omega2 = {rows[0][2]:.6f} ({_freq_label(unit)})"
        )
    fl = _freq_label(unit)
    header = [f"theta_dot_{fl}", f"omega_cap1_{fl}", f"omega_cap2_{fl}"]
    manifest = RunManifest("rotor", __version__, "modes", params, _tolerances())
    return _finish(
        manifest,
        out_dir,
        {"modes.csv": lambda path, digest: write_csv(path, header, rows, digest)},
    )


def cmd_simulate(params, out_dir):
    tolerances = _tolerances()
    protocol, unit = _protocol_from(params)
    make_state, n0 = _state_builder(params["state"])
    observables = [o.strip().upper() for o in str(params["observables"]).split(",")]
    for o in observables:
        if o not in ("N", "P"):
            raise InfeasibleDesign(f"unknown observable {o!r} (use N,P)")

    if params.get("nmax"):
        nmax, trace = int(params["nmax"]), []
    else:
        nmax, trace = converge_truncation(
            protocol,
            make_state,
            nmax_start=default_start_nmax(n0),
            p_tol=tolerances["convergence"],
            shell_tol=tolerances["shell"],
            nmax_cap=int(params.get("nmax_cap") or 128),
        )
    psi0 = make_state(nmax)
    h = build_fock_hamiltonian(protocol.config, nmax)
    times = np.linspace(0.0, protocol.duration, int(params["samples"]))
    columns = {"t": times}
    if "N" in observables:
        n_series = excitation_series(psi0, h, times)
        columns["mean_excitation"] = n_series.values
        print(f"<N(T)> - <N(0)> = {n_series.values[-1] - n_series.values[0]:.3e}")
    if "P" in observables:
        p_series = survival_series(psi0, h, times)
        columns["survival"] = p_series.values
        print(f"1 - P(T) = {1.0 - p_series.values[-1]:.3e}")
    phase = revival_phase(psi0, protocol)
    print(f"revival phase = {phase.real:+.6f} {phase.imag:+.6f}j (nmax = {nmax})")

    if params.get("ehrenfest"):
        coeffs = evolve_series(psi0, h, times)
        centroid0 = phase_space_expectations(psi0)
        classical = sample_trajectory(
            PhaseSpaceState.from_vector(centroid0), protocol.config, times
        )
        worst = 0.0
        for k in range(times.size):
            mean = phase_space_expectations(QuantumState(coeffs[k]))
            worst = max(worst, float(np.abs(mean - classical.states[k]).max()))
        print(f"max |<v>(t) - classical v(t)| = {worst:.3e}")

    rows = list(zip(*columns.values()))
    header = list(columns.keys())
    manifest = RunManifest("rotor", __version__, "simulate", params, tolerances, trace)
    return _finish(
        manifest,
        out_dir,
        {"observables.csv": lambda path, digest: write_csv(path, header, rows, digest)},
    )


def _initial_point(params):
    if params.get("alpha1") is not None or params.get("alpha2") is not None:
        a1 = parse_complex(params.get("alpha1") or 0)
        a2 = parse_complex(params.get("alpha2") or 0)
        return PhaseSpaceState(
            np.sqrt(2) * a1.real, np.sqrt(2) * a2.real,
            np.sqrt(2) * a1.imag, np.sqrt(2) * a2.imag,
        )
    return PhaseSpaceState(
        float(params.get("q1") or 0.0),
        float(params.get("q2") or 0.0),
        float(params.get("p1") or 0.0),
        float(params.get("p2") or 0.0),
    )


def cmd_classical(params, out_dir):
    protocol, unit = _protocol_from(params)
    state0 = _initial_point(params)
    frame = params.get("frame") or "rotating"
    times = np.linspace(0.0, protocol.duration, int(params["samples"]))
    trajectory = sample_trajectory(state0, protocol.config, times, frame=frame)
    closure = np.linalg.norm(trajectory.states[-1] - trajectory.states[0])
    if frame == "rotating":
        print(f"|v(T) - v(0)| = {closure:.3e} (closed orbit)")
    name = f"trajectory_{frame}.csv"
    manifest = RunManifest("rotor", __version__, "classical", params, _tolerances())

    def _write(path, digest):
        trajectory_to_csv(trajectory, path, comments=[f"manifest sha256: {digest}"])

    return _finish(manifest, out_dir, {name: _write})


def _auto_track_nmax(a1, a2):
    """Smallest multiple of 8 whose per-mode Poisson tail is below 1e-10."""
    need = 16
    for alpha_sq in (abs(a1) ** 2, abs(a2) ** 2):
        n = 16
        while gammainc(n, alpha_sq) >= 1e-10:
            n += 8
        need = max(need, n)
    return need


def cmd_track(params, out_dir):
    tolerances = _tolerances()
    protocol, unit = _protocol_from(params)
    a1, a2 = parse_complex(params["alpha1"]), parse_complex(params["alpha2"])
    nmax = int(params["nmax"]) if params.get("nmax") else _auto_track_nmax(a1, a2)
    psi0 = coherent_state(a1, a2, nmax)
    grid = wavepacket_track(
        psi0,
        protocol,
        time_steps=int(params["steps"]),
        grid_points=int(params["grid_points"]),
    )
    print(
        f"nmax = {nmax}; integral(track)/T = {grid.time_integral() / protocol.duration:.6f}; "
        f"max top-shell weight = {grid.diagnostics['max_top_shell_weight']:.3e}"
    )
    centroid = phase_space_expectations(psi0)
    times = np.linspace(0.0, protocol.duration, int(params["steps"]) + 1)
    trajectory = sample_trajectory(
        PhaseSpaceState.from_vector(centroid), protocol.config, times
    )
    rows = [
        [q1, q2, grid.density[i, j]]
        for i, q1 in enumerate(grid.q1_axis)
        for j, q2 in enumerate(grid.q2_axis)
    ]
    manifest = RunManifest(
        "rotor",
        __version__,
        "track",
        params,
        tolerances,
        [{"nmax": nmax, **grid.diagnostics}],
    )

    def _write_traj(path, digest):
        trajectory_to_csv(trajectory, path, comments=[f"manifest sha256: {digest}"])

    return _finish(
        manifest,
        out_dir,
        {
            "track.csv": lambda path, digest: write_csv(
                path, ["q1", "q2", "density"], rows, digest
            ),
            "trajectory_rotating.csv": _write_traj,
        },
    )


def cmd_stability(params, out_dir):
    tolerances = _tolerances()
    omega1, unit = resolve_frequency(params, "omega1")
    theta_f = parse_angle(params["theta_f"])
    n1 = int(params["n1"])
    n2_list = [int(x) for x in str(params["n2_list"]).split(",")]
    make_state, n0 = _state_builder(params.get("state") or "ground")
    eps_frac = float(params["eps_range"])
    n_eps = int(params["eps_points"])

    writers = {}
    trace = []
    for n2 in n2_list:
        protocol = design_protocol(omega1, theta_f, n1, n2)
        nmax, conv = converge_truncation(
            protocol,
            make_state,
            nmax_start=default_start_nmax(n0),
            p_tol=tolerances["convergence"],
            shell_tol=tolerances["shell"],
            nmax_cap=int(params.get("nmax_cap") or 128),
        )
        trace.append({"n2": n2, "nmax": nmax, "steps": conv})
        psi0 = make_state(nmax)
        eps = np.linspace(-eps_frac, eps_frac, n_eps) * protocol.duration
        sweep = stability_sweep(psi0, protocol, eps)
        fitted = fit_quadratic_decay(sweep, window=0.01 * protocol.duration)
        predicted = ground_state_sensitivity(protocol).delta_h_sq
        rel = abs(fitted - predicted) / predicted
        print(
            f"n2 = {n2}: fitted curvature = {fitted:.6e}, "
            f"closed form = {predicted:.6e}, rel err = {rel:.3e}"
        )
        rows = list(zip(eps, sweep.values))
        writers[f"stability_n2_{n2}.csv"] = (
            lambda path, digest, rows=rows: write_csv(
                path, ["eps", "survival"], rows, digest
            )
        )
    manifest = RunManifest("rotor", __version__, "stability", params, tolerances, trace)
    return _finish(manifest, out_dir, writers)


def cmd_rerun(params, out_dir):
    manifest = RunManifest.load(params["manifest"])
    handler = _HANDLERS[manifest.command]
    if params.get("out_dir_override"):
        target = Path(params["out_dir_override"])
    else:
        target = Path(params["manifest"]).parent
    previous = os.environ.get("ROTOR_TOL")
    if "convergence" in manifest.tolerances:
        os.environ["ROTOR_TOL"] = repr(manifest.tolerances["convergence"])
    try:
        return handler(manifest.parameters, target)
    finally:
        if previous is None:
            os.environ.pop("ROTOR_TOL", None)
        else:
            os.environ["ROTOR_TOL"] = previous


_HANDLERS = {
    "design": cmd_design,
    "modes": cmd_modes,
    "simulate": cmd_simulate,
    "classical": cmd_classical,
    "track": cmd_track,
    "stability": cmd_stability,
}


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = _Parser(
        prog="rotor",
        description="Design and verify excitation-free rotations of an "
        "anisotropic 2D trap.",
    )
    parser.add_argument("--version", action="version", version=f"rotor {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_out(p, default_name):
        p.add_argument("--out-dir", default=f"rotor-out/{default_name}")

    def add_protocol(p, freq_required=True):
        _add_frequency(p, "omega1", required=freq_required)
        p.add_argument("--theta-f", default="pi/2", help="angle: pi/2, 2pi, 0.7 ...")
        p.add_argument("--n1", type=int, default=1)
        p.add_argument("--n2", type=int, default=2)

    p = sub.add_parser("design", help="derive a commensurate rotation protocol")
    add_protocol(p, freq_required=False)
    p.add_argument("--table1", action="store_true",
                   help="emit the reference rows omega1/2pi = 1, 2, 5, 10 kHz")
    add_out(p, "design")

    p = sub.add_parser("modes", help="normal-mode frequencies of a given trap")
    _add_frequency(p, "omega1", required=True)
    _add_frequency(p, "omega2", required=True)
    _add_frequency(p, "theta-dot")
    p.add_argument("--sweep", type=int, help="sample N velocities in [0, omega1)")
    add_out(p, "modes")

    p = sub.add_parser("simulate", help="quantum observables over one rotation")
    add_protocol(p)
    p.add_argument("--state", default="ground",
                   help="ground | entangled | coherent:a1,a2")
    p.add_argument("--observables", default="N,P")
    p.add_argument("--samples", type=int, default=600)
    p.add_argument("--nmax", type=int, help="fixed truncation (skips convergence)")
    p.add_argument("--nmax-cap", type=int, default=128,
                   help="largest truncation the convergence loop may try")
    p.add_argument("--ehrenfest", action="store_true",
                   help="compare quantum centroid with the classical trajectory")
    add_out(p, "simulate")

    p = sub.add_parser("classical", help="exact classical trajectory")
    add_protocol(p)
    p.add_argument("--q1", type=float)
    p.add_argument("--q2", type=float)
    p.add_argument("--p1", type=float)
    p.add_argument("--p2", type=float)
    p.add_argument("--alpha1", help="centroid from a coherent amplitude")
    p.add_argument("--alpha2")
    p.add_argument("--frame", choices=("rotating", "lab", "normal"), default="rotating")
    p.add_argument("--samples", type=int, default=1001)
    add_out(p, "classical")

    p = sub.add_parser("track", help="time-integrated wavepacket density")
    add_protocol(p)
    p.add_argument("--alpha1", required=True)
    p.add_argument("--alpha2", required=True)
    p.add_argument("--nmax", type=int)
    p.add_argument("--grid-points", type=int, default=201)
    p.add_argument("--steps", type=int, default=2000)
    add_out(p, "track")

    p = sub.add_parser("stability", help="survival under timing offsets")
    _add_frequency(p, "omega1", required=True)
    p.add_argument("--theta-f", default="pi/2")
    p.add_argument("--n1", type=int, default=1)
    p.add_argument("--n2-list", default="2,5,10")
    p.add_argument("--state", default="ground")
    p.add_argument("--eps-range", type=float, default=0.05,
                   help="half width of the offset sweep as a fraction of T")
    p.add_argument("--eps-points", type=int, default=101)
    p.add_argument("--nmax-cap", type=int, default=128,
                   help="largest truncation the convergence loop may try")
    add_out(p, "stability")

    p = sub.add_parser("rerun", help="reproduce a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out-dir", dest="out_dir_override")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code or 0
    command = args.command
    params = {k: v for k, v in vars(args).items() if k not in ("command", "out_dir")}
    out_dir = getattr(args, "out_dir", None) or getattr(args, "out_dir_override", None)
    if command == "rerun":
        handler = cmd_rerun
        out_dir = args.out_dir_override or "."
    else:
        handler = _HANDLERS[command]
    try:
        return handler(params, Path(out_dir))
    except (InfeasibleDesign, WilliamsonViolation, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceFailure, TruncationTooSmall) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
