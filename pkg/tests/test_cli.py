import json

import numpy as np
import pytest

from rotor.cli import RunManifest, main, parse_angle, parse_complex


def read_body(path):
    """CSV content without '#' comment lines."""
    return [l for l in path.read_text().splitlines() if not l.startswith("#")]


def load_columns(path):
    lines = read_body(path)
    header = lines[0].split(",")
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    return {name: data[:, i] for i, name in enumerate(header)}


class TestParsing:
    @pytest.mark.parametrize(
        "text, expected",
        [
            ("pi", np.pi),
            ("2pi", 2 * np.pi),
            ("pi/2", np.pi / 2),
            ("3pi/4", 3 * np.pi / 4),
            ("-pi/2", -np.pi / 2),
            ("0.75", 0.75),
            ("1.5e-1", 0.15),
        ],
    )
    def test_angles(self, text, expected):
        assert parse_angle(text) == pytest.approx(expected, rel=1e-15)

    def test_bad_angle(self):
        with pytest.raises(ValueError):
            parse_angle("pix2")

    def test_complex(self):
        assert parse_complex("0.5") == 0.5
        assert parse_complex("0.5+0.5j") == 0.5 + 0.5j


class TestDesignCommand:
    def test_reference_row(self, tmp_path, capsys):
        code = main(
            [
                "design",
                "--omega1-khz", "1",
                "--theta-f", "pi/2",
                "--n1", "1",
                "--n2", "2",
                "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        cols = load_columns(tmp_path / "design.csv")
        assert round(cols["omega2_2pi_khz"][0], 2) == 1.79
        assert round(cols["theta_dot_2pi_khz"][0], 2) == 0.23
        assert round(cols["duration_ms"][0], 2) == 1.08
        assert cols["delta_h_sq_2pi_khz_sq"][0] == pytest.approx(4.7379e-3, rel=1e-4)

    def test_table_mode(self, tmp_path):
        assert main(["design", "--table1", "--out-dir", str(tmp_path)]) == 0
        cols = load_columns(tmp_path / "design.csv")
        np.testing.assert_array_equal(cols["omega1_2pi_khz"], [1, 2, 5, 10])
        # durations scale as 1/omega1
        np.testing.assert_allclose(
            cols["duration_ms"] * cols["omega1_2pi_khz"],
            cols["duration_ms"][0],
            rtol=1e-12,
        )

    def test_infeasible_exit_code(self, tmp_path, capsys):
        code = main(
            ["design", "--omega1-khz", "1", "--theta-f", "2pi", "--out-dir", str(tmp_path)]
        )
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_usage_error_exit_code(self, capsys):
        assert main(["design", "--omega1-khz", "oops"]) == 1
        assert main(["no-such-command"]) == 1


class TestModesCommand:
    def test_static_point(self, tmp_path, capsys):
        code = main(
            [
                "modes",
                "--omega1-rad", "1.0",
                "--omega2-rad", "1.5",
                "--theta-dot-rad", "0.0",
                "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        cols = load_columns(tmp_path / "modes.csv")
        assert cols["omega_cap1_rad"][0] == pytest.approx(1.0)
        assert cols["omega_cap2_rad"][0] == pytest.approx(1.5)

    def test_sweep_monotone(self, tmp_path):
        code = main(
            [
                "modes",
                "--omega1-rad", "1.0",
                "--omega2-rad", "1.5",
                "--sweep", "50",
                "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        cols = load_columns(tmp_path / "modes.csv")
        assert np.all(np.diff(cols["omega_cap1_rad"]) < 0)
        assert np.all(np.diff(cols["omega_cap2_rad"]) > 0)

    def test_velocity_bound_flagged(self, tmp_path, capsys):
        code = main(
            [
                "modes",
                "--omega1-rad", "1.0",
                "--omega2-rad", "1.5",
                "--theta-dot-rad", "1.0",
                "--out-dir", str(tmp_path),
            ]
        )
        assert code == 2
        assert "maximum allowed" in capsys.readouterr().err


class TestSimulateCommand:
    def test_ground_state_run(self, tmp_path, capsys):
        code = main(
            [
                "simulate",
                "--omega1-khz", "1",
                "--state", "ground",
                "--samples", "50",
                "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "revival phase" in out
        cols = load_columns(tmp_path / "observables.csv")
        assert abs(cols["survival"][-1] - 1.0) < 1e-6
        assert abs(cols["mean_excitation"][-1] - cols["mean_excitation"][0]) < 1e-6
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["outputs"] == ["observables.csv"]
        assert manifest["nmax_trace"]

    def test_convergence_failure_exit(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ROTOR_TOL", "0")
        code = main(
            [
                "simulate",
                "--omega1-khz", "1",
                "--state", "ground",
                "--samples", "10",
                "--nmax-cap", "32",
                "--out-dir", str(tmp_path),
            ]
        )
        assert code == 3

    def test_tolerance_env_recorded(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ROTOR_TOL", "1e-6")
        main(
            [
                "simulate",
                "--omega1-khz", "1",
                "--state", "ground",
                "--samples", "10",
                "--out-dir", str(tmp_path),
            ]
        )
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["tolerances"]["convergence"] == 1e-6


class TestClassicalCommand:
    def test_closed_orbit_output(self, tmp_path, capsys):
        code = main(
            [
                "classical",
                "--omega1-khz", "1",
                "--alpha1", "5.65685424949238",
                "--alpha2", "1.4142135623730951",
                "--samples", "200",
                "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        lines = read_body(tmp_path / "trajectory_rotating.csv")
        first = [float(x) for x in lines[1].split(",")]
        last = [float(x) for x in lines[-1].split(",")]
        assert first[1] == pytest.approx(8.0, abs=1e-7)
        assert np.abs(np.array(first[1:]) - np.array(last[1:])).max() < 1e-7

    def test_lab_frame_file_name(self, tmp_path):
        main(
            [
                "classical",
                "--omega1-khz", "1",
                "--q1", "1.0",
                "--frame", "lab",
                "--samples", "20",
                "--out-dir", str(tmp_path),
            ]
        )
        assert (tmp_path / "trajectory_lab.csv").exists()


class TestTrackCommand:
    def test_small_track(self, tmp_path, capsys):
        code = main(
            [
                "track",
                "--omega1-khz", "1",
                "--alpha1", "1.0",
                "--alpha2", "0.5",
                "--grid-points", "61",
                "--steps", "300",
                "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        assert (tmp_path / "track.csv").exists()
        assert (tmp_path / "trajectory_rotating.csv").exists()
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["nmax_trace"][0]["nmax"] == 16


class TestStabilityCommand:
    def test_two_series(self, tmp_path, capsys):
        code = main(
            [
                "stability",
                "--omega1-khz", "1",
                "--n2-list", "2,5",
                "--eps-points", "21",
                "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert out.count("rel err") == 2
        for n2 in (2, 5):
            cols = load_columns(tmp_path / f"stability_n2_{n2}.csv")
            mid = cols["survival"][np.argmin(np.abs(cols["eps"]))]
            assert mid == pytest.approx(1.0, abs=1e-6)


class TestReproducibility:
    def test_identical_runs_identical_bodies(self, tmp_path):
        args = ["design", "--table1"]
        main(args + ["--out-dir", str(tmp_path / "a")])
        main(args + ["--out-dir", str(tmp_path / "b")])
        assert (tmp_path / "a/design.csv").read_bytes() == (
            tmp_path / "b/design.csv"
        ).read_bytes()

    def test_rerun_from_manifest(self, tmp_path):
        main(
            [
                "simulate",
                "--omega1-khz", "1",
                "--state", "entangled",
                "--samples", "40",
                "--out-dir", str(tmp_path / "orig"),
            ]
        )
        code = main(
            [
                "rerun",
                str(tmp_path / "orig/manifest.json"),
                "--out-dir", str(tmp_path / "redo"),
            ]
        )
        assert code == 0
        assert (tmp_path / "orig/observables.csv").read_bytes() == (
            tmp_path / "redo/observables.csv"
        ).read_bytes()
        orig = json.loads((tmp_path / "orig/manifest.json").read_text())
        redo = json.loads((tmp_path / "redo/manifest.json").read_text())
        assert orig == redo

    def test_manifest_round_trip(self, tmp_path):
        main(["design", "--table1", "--out-dir", str(tmp_path)])
        manifest = RunManifest.load(tmp_path / "manifest.json")
        assert manifest.canonical_json() + "\n" == (
            tmp_path / "manifest.json"
        ).read_text()

    def test_csv_carries_manifest_hash(self, tmp_path):
        main(["design", "--table1", "--out-dir", str(tmp_path)])
        manifest = RunManifest.load(tmp_path / "manifest.json")
        first = (tmp_path / "design.csv").read_text().splitlines()[0]
        assert manifest.hash() in first
