"""Config files, CSV/JSON formats, and the command-line entry point.

Config files are YAML; every key is optional and defaults to the headline
benchmark values.  Unknown keys are rejected with their dotted path, and
the fully resolved config is echoed next to the outputs of each run so a
result directory is self-describing.

CSV formats (always written with full float precision):

* measurement stream, one row per sample:
      t,qw,qx,qy,qz,px,py,pz,wx,wy,wz,vx,vy,vz,tension
  quaternion is the tip orientation (w first), p the tip position, (w, v)
  the body angular/linear tip velocity, tension the tendon tension.
* trajectory, long format, one row per (sample, node):
      t,node,s,px,py,pz,qw,qx,qy,qz,
      curv_x,curv_y,curv_z,stretch_x,stretch_y,stretch_z,
      omega_x,omega_y,omega_z,vel_x,vel_y,vel_z
  curv/stretch are the strain twist, omega/vel the velocity twist (angular
  block first, matching the in-memory layout).

Metrics land in a JSON sidecar.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml
from scipy.spatial.transform import Rotation as _Rotation

from .discretization import Grid, SolverConfig, Trajectory
from .harness import (
    ExperimentConfig,
    Metrics,
    NoiseSettings,
    ObserverSettings,
    RunSettings,
    TensionProfile,
    TwinData,
    TwinSettings,
    convergence_time,
    gain_sweep,
    generate_twin_truth,
    measurement_series,
    rmse_after_transient,
    run_estimation,
    tip_series,
)
from .liegroup import make_pose
from .observer import ObserverGains, TipMeasurement
from .rod_model import ExternalLoad, MaterialGeometry, TendonRouting

__all__ = [
    "ConfigError",
    "load_config",
    "config_defaults",
    "save_resolved_config",
    "write_measurements",
    "read_measurements",
    "write_trajectory",
    "read_trajectory",
    "write_metrics",
    "rotation_to_quat",
    "quat_to_rotation",
    "main",
]


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config schema


def _leaf(default, cast):
    return {"__leaf__": True, "default": default, "cast": cast}


def _float_cast(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"expected a number, got {v!r}")
    return float(v)


def _pos(v):
    v = _float_cast(v)
    if v <= 0.0:
        raise ValueError(f"must be positive, got {v!r}")
    return v


def _nonneg(v):
    v = _float_cast(v)
    if v < 0.0:
        raise ValueError(f"must be non-negative, got {v!r}")
    return v


def _unit_interval_open(v):
    v = _float_cast(v)
    if not 0.0 < v < 0.5:
        raise ValueError(f"must lie in (0, 0.5), got {v!r}")
    return v


def _bool(v):
    if not isinstance(v, bool):
        raise ValueError(f"expected true/false, got {v!r}")
    return v


def _int_cast(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValueError(f"expected an integer, got {v!r}")
    return v


def _odd_nodes(v):
    v = _int_cast(v)
    if v < 5 or v % 2 == 0:
        raise ValueError(f"must be odd and >= 5, got {v!r}")
    return v


def _odd_window(v):
    v = _int_cast(v)
    if v < 1 or v % 2 == 0:
        raise ValueError(f"must be odd and >= 1, got {v!r}")
    return v


def _vec3(v):
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise ValueError(f"expected a list of 3 numbers, got {v!r}")
    return [_float_cast(x) for x in v]


def _knots(v):
    if not isinstance(v, (list, tuple)) or not v:
        raise ValueError("expected a non-empty list of [time, tension] pairs")
    out = []
    for item in v:
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise ValueError(f"expected [time, tension] pairs, got {item!r}")
        out.append([_float_cast(item[0]), _nonneg(item[1])])
    return out


def _choice(*options):
    def cast(v):
        if v not in options:
            raise ValueError(f"expected one of {options}, got {v!r}")
        return v

    return cast


_DEFAULT_KNOTS = [[0.0, 0.0], [0.5, 0.0], [1.5, 8.0], [2.5, 8.0], [3.5, 2.0], [5.0, 2.0]]

_SCHEMA = {
    "material": {
        "length": _leaf(0.45, _pos),
        "radius": _leaf(0.0016, _pos),
        "density": _leaf(20321.0, _pos),
        "youngs_modulus": _leaf(68.9e9, _pos),
        "shear_modulus": _leaf(26.0e9, _pos),
        "poisson": _leaf(0.325, _unit_interval_open),
    },
    "tendon": {
        "offset": _leaf([0.0, 0.025, 0.0], _vec3),
    },
    "loads": {
        "gravity": _leaf([0.0, -9.81, 0.0], _vec3),
        "tip_force": _leaf([0.0, -0.4905, 0.0], _vec3),
    },
    "grid": {
        "nodes": _leaf(21, _odd_nodes),
    },
    "solver": {
        "kind": _leaf("adaptive", _choice("adaptive", "fixed")),
        "method": _leaf("lsoda", _choice("lsoda", "bdf2", "dop853")),
        "rtol": _leaf(1e-6, _pos),
        "atol": _leaf(1e-8, _pos),
        "max_step": _leaf(0.0, _nonneg),
        "fixed_dt": _leaf(1e-4, _pos),
    },
    "tension": {
        "mode": _leaf("profile", _choice("profile", "constant")),
        "constant": _leaf(0.0, _nonneg),
        "knots": _leaf(_DEFAULT_KNOTS, _knots),
    },
    "run": {
        "horizon": _leaf(5.0, _pos),
        "output_rate": _leaf(100.0, _pos),
        "seed": _leaf(0, _int_cast),
    },
    "twin": {
        "density_scale": _leaf(1.05, _pos),
        "damping_scale": _leaf(1e-4, _nonneg),
    },
    "noise": {
        "position_std": _leaf(0.5e-3, _nonneg),
        "rotation_std_deg": _leaf(0.2, _nonneg),
        "angular_velocity_std": _leaf(0.02, _nonneg),
        "linear_velocity_std": _leaf(0.01, _nonneg),
        "tension_std": _leaf(0.0, _nonneg),
    },
    "observer": {
        "gain_p": _leaf(0.05, _nonneg),
        "gain_d": _leaf(0.05, _nonneg),
        "error": _leaf("skew", _choice("skew", "log")),
        "use_measured_rotation": _leaf(False, _bool),
        "smoothing_window": _leaf(5, _odd_window),
        "max_staleness": _leaf(0.1, _pos),
        "init": _leaf("straight", _choice("straight", "equilibrium", "truth")),
    },
}


def _merge(raw, schema, path=""):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(raw).__name__}")
    for key in raw:
        full = f"{path}.{key}" if path else str(key)
        if key not in schema:
            raise ConfigError(f"unknown key '{full}'")
    out = {}
    for key, spec in schema.items():
        full = f"{path}.{key}" if path else str(key)
        if isinstance(spec, dict) and spec.get("__leaf__"):
            if key in raw:
                try:
                    out[key] = spec["cast"](raw[key])
                except ValueError as exc:
                    raise ConfigError(f"{full}: {exc}") from None
            else:
                out[key] = spec["default"]
        else:
            out[key] = _merge(raw.get(key), spec, full)
    return out


def config_defaults():
    """The fully resolved default config as a plain dict."""
    return _merge({}, _SCHEMA)


def _to_experiment(resolved):
    mat = resolved["material"]
    geometry = MaterialGeometry(
        length=mat["length"],
        radius=mat["radius"],
        density=mat["density"],
        youngs=mat["youngs_modulus"],
        shear=mat["shear_modulus"],
        poisson=mat["poisson"],
    )
    tension_cfg = resolved["tension"]
    if tension_cfg["mode"] == "constant":
        tension = tension_cfg["constant"]
    else:
        tension = TensionProfile(tuple(map(tuple, tension_cfg["knots"])))
    noise = resolved["noise"]
    obs = resolved["observer"]
    return ExperimentConfig(
        geometry=geometry,
        routing=TendonRouting(tuple(resolved["tendon"]["offset"])),
        load=ExternalLoad(
            gravity=tuple(resolved["loads"]["gravity"]),
            tip_force=tuple(resolved["loads"]["tip_force"]),
        ),
        grid=Grid(n_nodes=resolved["grid"]["nodes"], length=mat["length"]),
        solver=SolverConfig(
            kind=resolved["solver"]["kind"],
            method=resolved["solver"]["method"],
            rtol=resolved["solver"]["rtol"],
            atol=resolved["solver"]["atol"],
            max_step=resolved["solver"]["max_step"],
            fixed_dt=resolved["solver"]["fixed_dt"],
        ),
        tension=tension,
        run=RunSettings(
            horizon=resolved["run"]["horizon"],
            output_rate=resolved["run"]["output_rate"],
            seed=resolved["run"]["seed"],
        ),
        twin=TwinSettings(
            density_scale=resolved["twin"]["density_scale"],
            damping_scale=resolved["twin"]["damping_scale"],
        ),
        noise=NoiseSettings(
            position_std=noise["position_std"],
            rotation_std=math.radians(noise["rotation_std_deg"]),
            angular_velocity_std=noise["angular_velocity_std"],
            linear_velocity_std=noise["linear_velocity_std"],
            tension_std=noise["tension_std"],
        ),
        observer=ObserverSettings(
            gain_p=obs["gain_p"],
            gain_d=obs["gain_d"],
            error_kind=obs["error"],
            use_measured_rotation=obs["use_measured_rotation"],
            smoothing_window=obs["smoothing_window"],
            max_staleness=obs["max_staleness"],
            init=obs["init"],
        ),
    )


def load_config(path):
    """Parse and validate a YAML config file.

    Returns (ExperimentConfig, resolved dict).  A missing/empty file body
    means 'all defaults'; unknown keys and out-of-range values raise
    ConfigError with the offending dotted path.
    """
    text = Path(path).read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    resolved = _merge(raw, _SCHEMA)
    return _to_experiment(resolved), resolved


def save_resolved_config(resolved, path):
    Path(path).write_text(yaml.safe_dump(resolved, sort_keys=False))


# ---------------------------------------------------------------------------
# quaternions and CSV formats


def rotation_to_quat(rot):
    """3x3 rotation -> unit quaternion (w, x, y, z), scalar first."""
    q = _Rotation.from_matrix(np.asarray(rot, dtype=float)).as_quat()
    return np.array([q[3], q[0], q[1], q[2]])


def quat_to_rotation(quat):
    """Unit quaternion (w, x, y, z) -> 3x3 rotation; normalizes the input."""
    w, x, y, z = (float(v) for v in quat)
    return _Rotation.from_quat([x, y, z, w]).as_matrix()


_MEAS_HEADER = ["t", "qw", "qx", "qy", "qz", "px", "py", "pz",
                "wx", "wy", "wz", "vx", "vy", "vz", "tension"]

_TRAJ_HEADER = ["t", "node", "s", "px", "py", "pz", "qw", "qx", "qy", "qz",
                "curv_x", "curv_y", "curv_z", "stretch_x", "stretch_y", "stretch_z",
                "omega_x", "omega_y", "omega_z", "vel_x", "vel_y", "vel_z"]


def _fmt(x):
    return format(float(x), ".17g")


def write_measurements(path, measurements, tensions):
    """Measurement stream -> CSV; tensions aligned with the sample list."""
    tensions = np.asarray(tensions, dtype=float)
    if tensions.shape[0] != len(measurements):
        raise ValueError("tension array must align with the measurement list")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_MEAS_HEADER)
        for m, tension in zip(measurements, tensions):
            quat = rotation_to_quat(m.pose[:3, :3])
            row = [m.time, *quat, *m.pose[:3, 3], *m.twist, tension]
            writer.writerow([_fmt(v) for v in row])


def read_measurements(path):
    """CSV -> (list of tip measurements, tension array)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _MEAS_HEADER:
            raise ValueError(
                f"unexpected measurement CSV header {header!r}; expected {_MEAS_HEADER!r}"
            )
        measurements = []
        tensions = []
        for row in reader:
            if not row:
                continue
            vals = [float(v) for v in row]
            rot = quat_to_rotation(vals[1:5])
            pose = make_pose(rot, vals[5:8])
            measurements.append(TipMeasurement(vals[0], pose, np.array(vals[8:14])))
            tensions.append(vals[14])
    return measurements, np.array(tensions)


def write_trajectory(path, traj):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TRAJ_HEADER)
        s = traj.grid.s
        for k in range(traj.times.shape[0]):
            for i in range(traj.grid.n_nodes):
                pose = traj.poses[k, i]
                quat = rotation_to_quat(pose[:3, :3])
                row = [traj.times[k], i, s[i], *pose[:3, 3], *quat,
                       *traj.strain[k, i], *traj.velocity[k, i]]
                writer.writerow([_fmt(row[0]), str(i)] + [_fmt(v) for v in row[2:]])


def read_trajectory(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _TRAJ_HEADER:
            raise ValueError(
                f"unexpected trajectory CSV header {header!r}; expected {_TRAJ_HEADER!r}"
            )
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise ValueError("trajectory CSV has no data rows")
    nodes = sorted({int(r[1]) for r in rows})
    n = len(nodes)
    if nodes != list(range(n)):
        raise ValueError("trajectory CSV nodes must be 0..N-1")
    if len(rows) % n != 0:
        raise ValueError("trajectory CSV is ragged (samples x nodes mismatch)")
    m = len(rows) // n
    times = np.empty(m)
    strain = np.empty((m, n, 6))
    velocity = np.empty((m, n, 6))
    poses = np.empty((m, n, 4, 4))
    length = 0.0
    for idx, r in enumerate(rows):
        k, i = divmod(idx, n)
        if int(r[1]) != i:
            raise ValueError("trajectory CSV rows must be grouped by sample, node-ordered")
        times[k] = r[0]
        length = max(length, r[2])
        poses[k, i] = make_pose(quat_to_rotation(r[6:10]), r[3:6])
        strain[k, i] = r[10:16]
        velocity[k, i] = r[16:22]
    grid = Grid(n_nodes=n, length=length)
    return Trajectory(times=times, strain=strain, velocity=velocity, poses=poses, grid=grid)


def write_metrics(path, metrics, extra=None):
    payload = metrics.as_dict() if isinstance(metrics, Metrics) else dict(metrics)
    if extra:
        payload.update(extra)
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# command line


def _parse_gains(text):
    """--gains accepts a scalar (isotropic P and D) or a YAML/JSON file with
    'proportional' and 'derivative' entries (scalars or 6x6 matrices)."""
    try:
        return ObserverGains.scalar(float(text))
    except ValueError:
        pass
    path = Path(text)
    if not path.exists():
        raise ConfigError(f"--gains: {text!r} is neither a number nor an existing file")
    data = yaml.safe_load(path.read_text())
    if not isinstance(data, dict) or not {"proportional", "derivative"} <= set(data):
        raise ConfigError("--gains file needs 'proportional' and 'derivative' entries")

    def as_matrix(v):
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return float(v) * np.eye(6)
        arr = np.asarray(v, dtype=float)
        if arr.shape != (6, 6):
            raise ConfigError("--gains matrices must be 6x6")
        return arr

    return ObserverGains(as_matrix(data["proportional"]), as_matrix(data["derivative"]))


def _apply_overrides(cfg, args):
    run = cfg.run
    solver = cfg.solver
    observer = cfg.observer
    if getattr(args, "seed", None) is not None:
        run = replace(run, seed=args.seed)
    if getattr(args, "fixed_step", False):
        solver = replace(solver, kind="fixed")
    if getattr(args, "err", None):
        observer = replace(observer, error_kind=args.err)
    return replace(cfg, run=run, solver=solver, observer=observer)


def _load_cfg_arg(args):
    path = args.config_path or args.config
    if path is None:
        raise ConfigError("no config given (positional or --config)")
    if args.config_path and args.config and args.config_path != args.config:
        raise ConfigError("config given twice with different values")
    cfg, resolved = load_config(path)
    cfg = _apply_overrides(cfg, args)
    resolved["run"]["seed"] = cfg.run.seed
    resolved["solver"]["kind"] = cfg.solver.kind
    resolved["observer"]["error"] = cfg.observer.error_kind
    return cfg, resolved


def _out_dir(args):
    out = Path(getattr(args, "out_dir", None) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_simulate(args):
    cfg, resolved = _load_cfg_arg(args)
    twin = generate_twin_truth(cfg)
    out = _out_dir(args)
    write_trajectory(out / "truth_trajectory.csv", twin.truth)
    write_measurements(out / "measurements.csv", twin.measurements, twin.tension_values)
    save_resolved_config(resolved, out / "resolved_config.yaml")
    print(f"wrote {out / 'truth_trajectory.csv'}")
    print(f"wrote {out / 'measurements.csv'}")
    print(f"wrote {out / 'resolved_config.yaml'}")
    return 0


def _cmd_estimate(args):
    cfg, resolved = _load_cfg_arg(args)
    measurements, tensions = read_measurements(args.measurements)
    if cfg.observer.init == "truth":
        raise ConfigError("observer.init 'truth' needs an in-memory twin; use simulate+estimate configs with 'straight' or 'equilibrium'")
    gains = _parse_gains(args.gains) if args.gains else None
    times = np.array([m.time for m in measurements])
    horizon = float(times[-1] - times[0])
    run = replace(cfg.run, horizon=min(cfg.run.horizon, horizon) if horizon > 0 else cfg.run.horizon)
    cfg = replace(cfg, run=run)
    twin = TwinData(truth=None, truth_model=None, measurements=measurements,
                    tension_values=tensions)
    estimate = run_estimation(cfg, twin, gains=gains)
    out = _out_dir(args)
    write_trajectory(out / "estimate_trajectory.csv", estimate)
    est_tip = tip_series(estimate)
    meas_tip = measurement_series(measurements)
    metrics = rmse_after_transient(est_tip, meas_tip, error_kind=cfg.observer.error_kind)
    write_metrics(out / "metrics.json", metrics, extra={"reference": "measurements"})
    save_resolved_config(resolved, out / "resolved_config.yaml")
    print(f"wrote {out / 'estimate_trajectory.csv'}")
    print(f"wrote {out / 'metrics.json'} (error vs measured tip stream)")
    return 0


def _cmd_evaluate(args):
    est = read_trajectory(args.estimate)
    truth = read_trajectory(args.truth)
    est_tip = tip_series(est)
    truth_tip = tip_series(truth)
    metrics = rmse_after_transient(est_tip, truth_tip, error_kind=args.err or "skew")
    out = _out_dir(args)
    write_metrics(out / "metrics.json", metrics, extra={"reference": "truth"})
    for key, value in metrics.as_dict().items():
        print(f"{key}: {value}")
    print(f"wrote {out / 'metrics.json'}")
    return 0


def _cmd_sweep(args):
    cfg, resolved = _load_cfg_arg(args)
    if args.gains:
        try:
            levels = [float(v) for v in args.gains.split(",")]
        except ValueError:
            raise ConfigError("--gains for sweep must be a comma-separated list of numbers")
    else:
        levels = [0.005, 0.05, 0.5]
    results = gain_sweep(cfg, levels)
    out = _out_dir(args)
    rows = []
    print(f"{'gain':>10} {'t_conv [s]':>12} {'rmse pos [m]':>14} {'rmse angle [rad]':>17}")
    for gain, metrics in results:
        t_conv = metrics.convergence_time
        rows.append({"gain": gain, **metrics.as_dict()})
        t_txt = "none" if t_conv is None else f"{t_conv:.3f}"
        print(f"{gain:>10.4g} {t_txt:>12} {metrics.rmse_position:>14.6f} {metrics.rmse_angle:>17.6f}")
    Path(out / "sweep.json").write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    save_resolved_config(resolved, out / "resolved_config.yaml")
    print(f"wrote {out / 'sweep.json'}")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="rodobs",
        description="Elastic-rod twin simulation and tip-driven state estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_positional=True):
        if config_positional:
            p.add_argument("config_path", nargs="?", default=None,
                           help="YAML config file (or use --config)")
            p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument("--out-dir", default=None, help="output directory (default: .)")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--fixed-step", action="store_true",
                       help="use the deterministic fixed-step integrator")
        p.add_argument("--err", choices=["skew", "log"], default=None,
                       help="tip pose-error map")

    p_sim = sub.add_parser("simulate", help="run the twin truth model, write trajectory + measurements")
    add_common(p_sim)
    p_sim.set_defaults(fn=_cmd_simulate)

    p_est = sub.add_parser("estimate", help="run the estimator against a measurement CSV")
    add_common(p_est)
    p_est.add_argument("measurements", help="measurement CSV from 'simulate' (or a sensor)")
    p_est.add_argument("--gains", default=None,
                       help="scalar gain for P and D, or YAML/JSON file with 6x6 matrices")
    p_est.set_defaults(fn=_cmd_estimate)

    p_eval = sub.add_parser("evaluate", help="compare two trajectory CSVs (estimate vs truth)")
    p_eval.add_argument("estimate", help="estimate trajectory CSV")
    p_eval.add_argument("truth", help="truth trajectory CSV")
    p_eval.add_argument("--out-dir", default=None)
    p_eval.add_argument("--err", choices=["skew", "log"], default=None)
    p_eval.set_defaults(fn=_cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="estimator gain sweep against one shared twin")
    add_common(p_sweep)
    p_sweep.add_argument("--gains", default=None,
                         help="comma-separated gain levels (default 0.005,0.05,0.5)")
    p_sweep.set_defaults(fn=_cmd_sweep)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
