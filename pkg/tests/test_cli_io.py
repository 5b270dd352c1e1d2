"""Tests for config parsing, the CSV/JSON formats, and the command-line tool."""

import json
import math

import numpy as np
import pytest
import yaml

from rodobs.cli_io import (
    ConfigError,
    config_defaults,
    load_config,
    main,
    quat_to_rotation,
    read_measurements,
    read_trajectory,
    rotation_to_quat,
    save_resolved_config,
    write_measurements,
    write_metrics,
    write_trajectory,
)
from rodobs.discretization import Grid, SolverConfig, Trajectory, reconstruct_poses
from rodobs.harness import Metrics, TensionProfile
from rodobs.liegroup import exp_pose
from rodobs.observer import TipMeasurement


def _write_yaml(path, payload):
    path.write_text(yaml.safe_dump(payload))
    return str(path)


class TestConfigDefaults:
    def test_headline_values(self):
        d = config_defaults()
        assert d["material"]["length"] == 0.45
        assert d["material"]["radius"] == 0.0016
        assert d["grid"]["nodes"] == 21
        assert d["solver"]["kind"] == "adaptive"
        assert d["solver"]["method"] == "lsoda"
        assert d["tension"]["mode"] == "profile"
        assert d["observer"]["init"] == "straight"
        assert d["run"]["horizon"] == 5.0

    def test_empty_file_resolves_to_defaults(self, tmp_path):
        p = tmp_path / "empty.yaml"
        p.write_text("")
        cfg, resolved = load_config(p)
        assert resolved == config_defaults()
        assert cfg.grid == Grid(n_nodes=21, length=0.45)
        assert cfg.solver == SolverConfig()
        assert isinstance(cfg.tension, TensionProfile)


class TestLoadConfig:
    def test_partial_override_keeps_other_defaults(self, tmp_path):
        p = _write_yaml(tmp_path / "c.yaml", {"run": {"horizon": 1.0}})
        cfg, resolved = load_config(p)
        assert cfg.run.horizon == 1.0
        assert resolved["run"]["output_rate"] == 100.0
        assert resolved["material"]["length"] == 0.45

    def test_unknown_key_reports_dotted_path(self, tmp_path):
        p = _write_yaml(tmp_path / "c.yaml", {"solver": {"steps": 5}})
        with pytest.raises(ConfigError, match="solver.steps"):
            load_config(p)

    def test_unknown_top_level_key(self, tmp_path):
        p = _write_yaml(tmp_path / "c.yaml", {"frobnicate": 1})
        with pytest.raises(ConfigError, match="frobnicate"):
            load_config(p)

    def test_bad_value_reports_dotted_path(self, tmp_path):
        p = _write_yaml(tmp_path / "c.yaml", {"grid": {"nodes": 20}})
        with pytest.raises(ConfigError, match="grid.nodes"):
            load_config(p)

    def test_bool_is_not_a_number(self, tmp_path):
        p = _write_yaml(tmp_path / "c.yaml", {"material": {"length": True}})
        with pytest.raises(ConfigError, match="material.length"):
            load_config(p)

    def test_invalid_yaml(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("material: [unclosed\n")
        with pytest.raises(ConfigError, match="YAML"):
            load_config(p)

    def test_constant_tension_mode(self, tmp_path):
        p = _write_yaml(
            tmp_path / "c.yaml",
            {"tension": {"mode": "constant", "constant": 3.0}},
        )
        cfg, _ = load_config(p)
        assert cfg.tension == 3.0

    def test_profile_knots_are_used(self, tmp_path):
        p = _write_yaml(
            tmp_path / "c.yaml",
            {"tension": {"knots": [[0.0, 1.0], [1.0, 5.0]]}},
        )
        cfg, _ = load_config(p)
        assert isinstance(cfg.tension, TensionProfile)
        assert cfg.tension(0.0) == pytest.approx(1.0)
        assert cfg.tension(2.0) == pytest.approx(5.0)

    def test_rotation_noise_converted_to_radians(self, tmp_path):
        p = _write_yaml(tmp_path / "c.yaml", {"noise": {"rotation_std_deg": 1.0}})
        cfg, _ = load_config(p)
        assert cfg.noise.rotation_std == pytest.approx(math.radians(1.0))

    def test_solver_method_passes_through(self, tmp_path):
        p = _write_yaml(tmp_path / "c.yaml", {"solver": {"method": "bdf2"}})
        cfg, _ = load_config(p)
        assert cfg.solver.method == "bdf2"

    def test_saved_resolved_config_reloads_identically(self, tmp_path):
        p = _write_yaml(
            tmp_path / "c.yaml",
            {"run": {"seed": 3}, "observer": {"gain_p": 0.1}},
        )
        _, resolved = load_config(p)
        echo = tmp_path / "resolved.yaml"
        save_resolved_config(resolved, echo)
        _, resolved2 = load_config(echo)
        assert resolved2 == resolved


class TestQuaternions:
    def test_identity(self):
        np.testing.assert_allclose(rotation_to_quat(np.eye(3)), [1, 0, 0, 0], atol=1e-15)
        np.testing.assert_allclose(quat_to_rotation([1, 0, 0, 0]), np.eye(3), atol=1e-15)

    def test_random_roundtrip(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            rot = exp_pose(np.concatenate((rng.standard_normal(3), np.zeros(3))))[:3, :3]
            quat = rotation_to_quat(rot)
            assert quat.shape == (4,)
            assert np.linalg.norm(quat) == pytest.approx(1.0, abs=1e-12)
            np.testing.assert_allclose(quat_to_rotation(quat), rot, atol=1e-12)

    def test_unnormalized_quaternion_is_normalized(self):
        rot = quat_to_rotation([2.0, 0.0, 0.0, 0.0])
        np.testing.assert_allclose(rot, np.eye(3), atol=1e-15)


def _measurement_stream(m=6):
    rng = np.random.default_rng(42)
    out = []
    for k in range(m):
        pose = exp_pose(0.3 * rng.standard_normal(6))
        out.append(TipMeasurement(0.01 * k, pose, rng.standard_normal(6)))
    return out


class TestMeasurementCsv:
    def test_roundtrip(self, tmp_path):
        stream = _measurement_stream()
        tensions = np.linspace(0.0, 5.0, len(stream))
        path = tmp_path / "meas.csv"
        write_measurements(path, stream, tensions)
        back, tensions2 = read_measurements(path)
        assert len(back) == len(stream)
        np.testing.assert_array_equal(tensions2, tensions)
        for a, b in zip(stream, back):
            assert b.time == a.time
            np.testing.assert_array_equal(b.twist, a.twist)
            np.testing.assert_allclose(b.pose, a.pose, atol=1e-12)

    def test_tension_alignment_required(self, tmp_path):
        stream = _measurement_stream(4)
        with pytest.raises(ValueError, match="align"):
            write_measurements(tmp_path / "meas.csv", stream, np.zeros(3))

    def test_header_is_checked(self, tmp_path):
        stream = _measurement_stream(3)
        path = tmp_path / "meas.csv"
        write_measurements(path, stream, np.zeros(3))
        body = path.read_text().splitlines()
        body[0] = body[0].replace("tension", "force")
        path.write_text("\n".join(body) + "\n")
        with pytest.raises(ValueError, match="header"):
            read_measurements(path)


def _small_trajectory(m=3, n=5):
    grid = Grid(n_nodes=n, length=0.45)
    rng = np.random.default_rng(11)
    strain = np.tile([0.0, 0.0, 0.0, 1.0, 0.0, 0.0], (m, n, 1))
    strain += 0.1 * rng.standard_normal((m, n, 6))
    velocity = rng.standard_normal((m, n, 6))
    poses = np.empty((m, n, 4, 4))
    for k in range(m):
        poses[k] = reconstruct_poses(strain[k], grid)
    return Trajectory(
        times=0.02 * np.arange(m, dtype=float),
        strain=strain,
        velocity=velocity,
        poses=poses,
        grid=grid,
    )


class TestTrajectoryCsv:
    def test_roundtrip(self, tmp_path):
        traj = _small_trajectory()
        path = tmp_path / "traj.csv"
        write_trajectory(path, traj)
        back = read_trajectory(path)
        np.testing.assert_array_equal(back.times, traj.times)
        np.testing.assert_array_equal(back.strain, traj.strain)
        np.testing.assert_array_equal(back.velocity, traj.velocity)
        np.testing.assert_allclose(back.poses, traj.poses, atol=1e-12)
        assert back.grid.n_nodes == traj.grid.n_nodes
        assert back.grid.length == pytest.approx(traj.grid.length, abs=1e-15)

    def test_header_is_checked(self, tmp_path):
        path = tmp_path / "traj.csv"
        write_trajectory(path, _small_trajectory())
        body = path.read_text().splitlines()
        body[0] = body[0].replace("curv_x", "kappa_x")
        path.write_text("\n".join(body) + "\n")
        with pytest.raises(ValueError, match="header"):
            read_trajectory(path)

    def test_empty_body_rejected(self, tmp_path):
        path = tmp_path / "traj.csv"
        write_trajectory(path, _small_trajectory())
        path.write_text(path.read_text().splitlines()[0] + "\n")
        with pytest.raises(ValueError, match="no data rows"):
            read_trajectory(path)

    def test_ragged_file_rejected(self, tmp_path):
        path = tmp_path / "traj.csv"
        write_trajectory(path, _small_trajectory())
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(ValueError, match="ragged"):
            read_trajectory(path)

    def test_row_order_enforced(self, tmp_path):
        path = tmp_path / "traj.csv"
        write_trajectory(path, _small_trajectory())
        lines = path.read_text().splitlines()
        lines[1], lines[2] = lines[2], lines[1]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError, match="grouped by sample"):
            read_trajectory(path)


class TestMetricsJson:
    def test_metrics_payload(self, tmp_path):
        metrics = Metrics(
            rmse_angle=0.1, rmse_x=0.01, rmse_y=0.02, rmse_position=0.022,
            rmse_angular_velocity=0.5, rmse_vx=0.03, rmse_vy=0.04,
            initial_pose_error=1.0, final_pose_error=0.01,
            convergence_time=None,
        )
        path = tmp_path / "metrics.json"
        write_metrics(path, metrics, extra={"reference": "truth"})
        payload = json.loads(path.read_text())
        assert payload["rmse_position_m"] == 0.022
        assert payload["convergence_time_s"] is None
        assert payload["reference"] == "truth"

    def test_plain_dict_payload(self, tmp_path):
        path = tmp_path / "metrics.json"
        write_metrics(path, {"a": 1})
        assert json.loads(path.read_text()) == {"a": 1}


# ---------------------------------------------------------------------------
# command-line flows (short horizon, deterministic fixed-step)


@pytest.fixture(scope="module")
def cli_config(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    payload = {
        "run": {"horizon": 0.2, "output_rate": 50.0},
        "solver": {"fixed_dt": 1.0e-4},
    }
    path = root / "short.yaml"
    path.write_text(yaml.safe_dump(payload))
    return str(path)


@pytest.fixture(scope="module")
def simulate_dir(cli_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("sim_out")
    code = main(["simulate", cli_config, "--fixed-step", "--out-dir", str(out)])
    assert code == 0
    return out


class TestCommandLine:
    def test_simulate_outputs(self, simulate_dir):
        resolved = yaml.safe_load((simulate_dir / "resolved_config.yaml").read_text())
        assert resolved["solver"]["kind"] == "fixed"
        assert resolved["run"]["horizon"] == 0.2
        stream, tensions = read_measurements(simulate_dir / "measurements.csv")
        assert len(stream) == 11
        assert tensions.shape == (11,)
        truth = read_trajectory(simulate_dir / "truth_trajectory.csv")
        assert truth.times.shape == (11,)
        assert truth.strain.shape == (11, 21, 6)

    def test_estimate_and_evaluate(self, cli_config, simulate_dir, tmp_path, capsys):
        est_dir = tmp_path / "est"
        code = main([
            "estimate", cli_config, str(simulate_dir / "measurements.csv"),
            "--fixed-step", "--out-dir", str(est_dir),
        ])
        assert code == 0
        payload = json.loads((est_dir / "metrics.json").read_text())
        assert payload["reference"] == "measurements"
        assert np.isfinite(payload["rmse_position_m"])
        est = read_trajectory(est_dir / "estimate_trajectory.csv")
        assert est.times.shape == (11,)

        eval_dir = tmp_path / "eval"
        code = main([
            "evaluate", str(est_dir / "estimate_trajectory.csv"),
            str(simulate_dir / "truth_trajectory.csv"), "--out-dir", str(eval_dir),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "rmse_position_m" in out
        payload = json.loads((eval_dir / "metrics.json").read_text())
        assert payload["reference"] == "truth"

    def test_estimate_with_gain_file(self, cli_config, simulate_dir, tmp_path):
        gains = tmp_path / "gains.yaml"
        gains.write_text(yaml.safe_dump({"proportional": 0.05, "derivative": 0.05}))
        out = tmp_path / "est_gains"
        code = main([
            "estimate", cli_config, str(simulate_dir / "measurements.csv"),
            "--fixed-step", "--gains", str(gains), "--out-dir", str(out),
        ])
        assert code == 0
        assert (out / "metrics.json").exists()

    def test_seed_override_is_echoed(self, cli_config, simulate_dir, tmp_path):
        out = tmp_path / "seeded"
        code = main(["simulate", cli_config, "--fixed-step", "--seed", "7",
                     "--out-dir", str(out)])
        assert code == 0
        resolved = yaml.safe_load((out / "resolved_config.yaml").read_text())
        assert resolved["run"]["seed"] == 7

    def test_missing_config_fails(self, capsys):
        assert main(["simulate"]) == 1
        assert "no config given" in capsys.readouterr().err

    def test_conflicting_config_paths_fail(self, cli_config, tmp_path, capsys):
        other = tmp_path / "other.yaml"
        other.write_text("")
        assert main(["simulate", cli_config, "--config", str(other)]) == 1
        assert "twice" in capsys.readouterr().err

    def test_invalid_config_fails_cleanly(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("grid:\n  nodes: 20\n")
        assert main(["simulate", str(bad)]) == 1
        assert "grid.nodes" in capsys.readouterr().err

    def test_bad_gains_argument_fails_cleanly(self, cli_config, simulate_dir, tmp_path, capsys):
        code = main([
            "estimate", cli_config, str(simulate_dir / "measurements.csv"),
            "--gains", "not_a_file.yaml", "--out-dir", str(tmp_path),
        ])
        assert code == 1
        assert "neither a number" in capsys.readouterr().err
