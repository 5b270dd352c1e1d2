"""Twin-simulation experiments: ground truth, corrupted measurements,
estimation runs, and the metrics used to judge them.

A twin experiment builds TWO models from one config: the truth plant
(density scaled, small strain-rate damping, i.e. deliberately mismatched)
and the nominal estimator model.  The truth is simulated from its own
static equilibrium under the configured tendon-tension profile; its tip
pose/twist stream is corrupted with per-channel Gaussian noise and handed
to the estimator, which starts from a deviated state (straight rod by
default).  Metrics compare the estimate against the uncorrupted truth.

The static shooting oracle integrates the equilibrium balance as an
initial-value problem in arclength with an adaptive Runge-Kutta scheme and
solves for the unknown base internal wrench, sharing no code with the
finite-difference discretization; it is the independent cross-check for
statics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import root as _scipy_root

from .discretization import (
    Grid,
    RodState,
    SolverConfig,
    Trajectory,
    discrete_equilibrium,
    simulate,
)
from .liegroup import exp_pose, hat3, make_pose, pose_error_log, pose_error_skew
from .observer import ObserverGains, TipMeasurement, run_observer
from .rod_model import (
    ExternalLoad,
    MaterialGeometry,
    RodModel,
    TendonRouting,
    proportional_damping,
    section_stiffness,
)

__all__ = [
    "TensionProfile",
    "RunSettings",
    "TwinSettings",
    "NoiseSettings",
    "ObserverSettings",
    "ExperimentConfig",
    "TwinData",
    "TipSeries",
    "Metrics",
    "ExperimentResult",
    "default_config",
    "build_truth_model",
    "build_observer_model",
    "generate_twin_truth",
    "smooth_measurements",
    "run_estimation",
    "run_experiment",
    "static_equilibrium_oracle",
    "OracleSolution",
    "tip_series",
    "measurement_series",
    "pose_error_norms",
    "planar_angle",
    "rmse_after_transient",
    "convergence_time",
    "error_energy_series",
    "gain_sweep",
    "compare_runs",
    "zoh_signal",
]


@dataclass(frozen=True)
class TensionProfile:
    """Piecewise tension signal: C1 smoothstep ramps between (time, value)
    knots, held constant outside the first/last knot.  Values in newtons,
    non-negative."""

    knots: tuple = ((0.0, 0.0), (0.5, 0.0), (1.5, 8.0), (2.5, 8.0), (3.5, 2.0), (5.0, 2.0))

    def __post_init__(self):
        knots = tuple((float(t), float(v)) for t, v in self.knots)
        if len(knots) < 1:
            raise ValueError("need at least one knot")
        times = [t for t, _ in knots]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("knot times must be strictly increasing")
        if any(v < 0.0 for _, v in knots):
            raise ValueError("tension must be non-negative")
        object.__setattr__(self, "knots", knots)

    def __call__(self, t):
        knots = self.knots
        if t <= knots[0][0]:
            return knots[0][1]
        if t >= knots[-1][0]:
            return knots[-1][1]
        for (t0, v0), (t1, v1) in zip(knots, knots[1:]):
            if t <= t1:
                x = (t - t0) / (t1 - t0)
                return v0 + (v1 - v0) * x * x * (3.0 - 2.0 * x)
        return knots[-1][1]


@dataclass(frozen=True)
class RunSettings:
    horizon: float = 5.0
    output_rate: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.horizon <= 0.0 or self.output_rate <= 0.0:
            raise ValueError("horizon and output_rate must be positive")


@dataclass(frozen=True)
class TwinSettings:
    """How the ground-truth plant deviates from the estimator's model."""

    density_scale: float = 1.05
    damping_scale: float = 1e-4

    def __post_init__(self):
        if self.density_scale <= 0.0 or self.damping_scale < 0.0:
            raise ValueError("density_scale must be positive, damping_scale >= 0")


@dataclass(frozen=True)
class NoiseSettings:
    """Per-channel measurement noise (standard deviations, SI units/rad)."""

    position_std: float = 0.5e-3
    rotation_std: float = math.radians(0.2)
    angular_velocity_std: float = 0.02
    linear_velocity_std: float = 0.01
    tension_std: float = 0.0

    def __post_init__(self):
        for name in (
            "position_std",
            "rotation_std",
            "angular_velocity_std",
            "linear_velocity_std",
            "tension_std",
        ):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def silent(self):
        return (
            self.position_std == 0.0
            and self.rotation_std == 0.0
            and self.angular_velocity_std == 0.0
            and self.linear_velocity_std == 0.0
            and self.tension_std == 0.0
        )


@dataclass(frozen=True)
class ObserverSettings:
    """Estimator tuning: gains are scalars (meaning s*I) or 6x6 matrices."""

    gain_p: object = 0.05
    gain_d: object = 0.05
    error_kind: str = "skew"
    use_measured_rotation: bool = False
    smoothing_window: int = 5
    max_staleness: float = 0.1
    init: str = "straight"

    def __post_init__(self):
        if self.error_kind not in ("skew", "log"):
            raise ValueError("error_kind must be 'skew' or 'log'")
        if self.init not in ("straight", "equilibrium", "truth"):
            raise ValueError("init must be 'straight', 'equilibrium' or 'truth'")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ValueError("smoothing_window must be odd and >= 1")
        if self.max_staleness <= 0.0:
            raise ValueError("max_staleness must be positive")

    def gains(self):
        def as_matrix(g):
            if np.isscalar(g):
                return float(g) * np.eye(6)
            return np.asarray(g, dtype=float)

        return ObserverGains(as_matrix(self.gain_p), as_matrix(self.gain_d))


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    geometry: MaterialGeometry = field(default_factory=MaterialGeometry)
    routing: TendonRouting = field(default_factory=TendonRouting)
    load: ExternalLoad = field(
        default_factory=lambda: ExternalLoad(tip_force=(0.0, -0.4905, 0.0))
    )
    grid: Grid = field(default_factory=Grid)
    solver: SolverConfig = field(default_factory=SolverConfig)
    tension: object = field(default_factory=TensionProfile)
    run: RunSettings = field(default_factory=RunSettings)
    twin: TwinSettings = field(default_factory=TwinSettings)
    noise: NoiseSettings = field(default_factory=NoiseSettings)
    observer: ObserverSettings = field(default_factory=ObserverSettings)

    def tension_at(self, t):
        return float(self.tension(t)) if callable(self.tension) else float(self.tension)


def default_config():
    """The headline twin benchmark configuration."""
    return ExperimentConfig()


def build_truth_model(cfg):
    """Ground-truth plant: scaled density plus strain-rate damping."""
    damping = None
    if cfg.twin.damping_scale > 0.0:
        damping = proportional_damping(section_stiffness(cfg.geometry), cfg.twin.damping_scale)
    load = replace(
        cfg.load, damping=None if damping is None else tuple(map(tuple, damping))
    )
    return RodModel.build(
        geometry=cfg.geometry,
        routing=cfg.routing,
        load=load,
        density_scale=cfg.twin.density_scale,
    )


def build_observer_model(cfg):
    """Nominal model the estimator believes in (no damping, as-configured)."""
    return RodModel.build(geometry=cfg.geometry, routing=cfg.routing, load=cfg.load)


@dataclass(eq=False)
class TwinData:
    """Ground truth plus what a sensor would deliver.

    truth/truth_model may be None when the measurement stream came from a
    file rather than an in-memory simulation.
    """

    truth: Trajectory
    truth_model: RodModel
    measurements: list
    tension_values: np.ndarray

    @property
    def times(self):
        if self.truth is not None:
            return self.truth.times
        return np.array([m.time for m in self.measurements])


def generate_twin_truth(cfg):
    """Simulate the perturbed plant from its own static equilibrium and
    corrupt its tip stream with the configured noise."""
    truth_model = build_truth_model(cfg)
    initial = discrete_equilibrium(truth_model, cfg.grid, tension=cfg.tension_at(0.0))
    truth = simulate(
        initial,
        truth_model,
        cfg.grid,
        cfg.tension,
        cfg.run.horizon,
        cfg.solver,
        output_rate=cfg.run.output_rate,
    )
    m = truth.times.shape[0]
    tension_clean = np.array([cfg.tension_at(t) for t in truth.times])
    noise = cfg.noise
    if noise.silent:
        pos_n = np.zeros((m, 3))
        rot_n = np.zeros((m, 3))
        ang_n = np.zeros((m, 3))
        lin_n = np.zeros((m, 3))
        ten_n = np.zeros(m)
    else:
        streams = np.random.SeedSequence(cfg.run.seed).spawn(5)
        rngs = [np.random.default_rng(s) for s in streams]
        pos_n = rngs[0].normal(0.0, noise.position_std, (m, 3))
        rot_n = rngs[1].normal(0.0, noise.rotation_std, (m, 3))
        ang_n = rngs[2].normal(0.0, noise.angular_velocity_std, (m, 3))
        lin_n = rngs[3].normal(0.0, noise.linear_velocity_std, (m, 3))
        ten_n = rngs[4].normal(0.0, noise.tension_std, m)
    measurements = []
    for k in range(m):
        pose = truth.tip_poses[k]
        rot = pose[:3, :3]
        if noise.rotation_std > 0.0:
            rot = rot @ exp_pose(np.concatenate((rot_n[k], np.zeros(3))))[:3, :3]
        noisy_pose = make_pose(rot, pose[:3, 3] + pos_n[k])
        twist = truth.tip_twists[k].copy()
        twist[:3] += ang_n[k]
        twist[3:] += lin_n[k]
        measurements.append(TipMeasurement(float(truth.times[k]), noisy_pose, twist))
    tension_values = np.clip(tension_clean + ten_n, 0.0, None)
    return TwinData(
        truth=truth,
        truth_model=truth_model,
        measurements=measurements,
        tension_values=tension_values,
    )


def smooth_measurements(measurements, window):
    """Centered moving average over the twist channels (window odd; shrinks
    near the stream ends).  Poses pass through untouched."""
    if window == 1:
        return list(measurements)
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be odd and >= 1")
    twists = np.array([m.twist for m in measurements])
    half = window // 2
    m = len(measurements)
    out = []
    for k in range(m):
        lo = max(0, k - half)
        hi = min(m, k + half + 1)
        avg = twists[lo:hi].mean(axis=0)
        out.append(TipMeasurement(measurements[k].time, measurements[k].pose, avg))
    return out


def zoh_signal(times, values):
    """Zero-order hold through samples: value of the latest time <= t."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)

    def signal(t):
        idx = int(np.searchsorted(times, t + 1e-9, side="right")) - 1
        return float(values[max(idx, 0)])

    return signal


def _initial_estimate(cfg, observer_model, twin):
    mode = cfg.observer.init
    if mode == "straight":
        return RodState.straight(cfg.grid, observer_model.strain_ref)
    if mode == "equilibrium":
        return discrete_equilibrium(
            observer_model, cfg.grid, tension=cfg.tension_at(0.0)
        )
    if twin.truth is None:
        raise ValueError("observer init 'truth' requires an in-memory twin simulation")
    return twin.truth.state_at(0)


def run_estimation(cfg, twin, gains=None):
    """Feed the twin's measurement stream to the estimator; returns its
    trajectory.  gains overrides the configured ObserverGains."""
    observer_model = build_observer_model(cfg)
    measurements = smooth_measurements(twin.measurements, cfg.observer.smoothing_window)
    initial = _initial_estimate(cfg, observer_model, twin)
    tension = zoh_signal(twin.times, twin.tension_values)
    return run_observer(
        initial,
        observer_model,
        cfg.grid,
        measurements,
        tension,
        cfg.run.horizon,
        cfg.solver,
        cfg.observer.gains() if gains is None else gains,
        error_kind=cfg.observer.error_kind,
        use_measured_rotation=cfg.observer.use_measured_rotation,
        output_rate=cfg.run.output_rate,
        max_staleness=cfg.observer.max_staleness,
    )


# ---------------------------------------------------------------------------
# independent static oracle (shooting on the equilibrium balance)


@dataclass(eq=False)
class OracleSolution:
    s: np.ndarray
    poses: np.ndarray
    strain: np.ndarray
    base_wrench: np.ndarray
    boundary_residual: float

    @property
    def tip_pose(self):
        return self.poses[-1]


def _strain_from_wrench(phi, model, tension):
    """Invert Phi = K(xi - xi*) + T(d x t_hat, t_hat) for xi (fixed point;
    the tension term is a tiny contraction for physical stiffnesses)."""
    kdiag = model.stiffness_diag
    sref = model.strain_ref
    off = model.routing.offset_vector
    xi = sref + phi / kdiag
    if tension == 0.0:
        return xi
    for _ in range(60):
        tangent = xi[3:] + np.cross(xi[:3], off)
        nrm = np.linalg.norm(tangent)
        if nrm <= 1e-9:
            raise RuntimeError("degenerate tendon tangent in oracle constitutive inverse")
        that = tangent / nrm
        pull = np.concatenate((tension * np.cross(off, that), tension * that))
        nxt = sref + (phi - pull) / kdiag
        if np.max(np.abs(nxt - xi)) < 1e-14:
            return nxt
        xi = nxt
    raise RuntimeError("constitutive inverse did not converge")


def static_equilibrium_oracle(model, grid, tension=0.0, rtol=1e-10, atol=1e-12):
    """Equilibrium of the CONTINUOUS rod by shooting on the base wrench.

    States (R, p, Phi) march tip-ward under the static balance; a root find
    adjusts the base internal wrench until the tip wrench matches the dead
    tip load.  Returns the solution sampled at the grid nodes.  Independent
    of the finite-difference machinery by construction.
    """
    rho_a = model.linear_density
    grav = model.load.gravity_vector
    force = model.load.tip_force_vector

    def rhs(s, y):
        rot = y[:9].reshape(3, 3)
        phi = y[12:18]
        xi = _strain_from_wrench(phi, model, tension)
        u, q = xi[:3], xi[3:]
        drot = rot @ hat3(u)
        dpos = rot @ q
        dphi = np.empty(6)
        dphi[:3] = -np.cross(u, phi[:3]) - np.cross(q, phi[3:])
        dphi[3:] = -np.cross(u, phi[3:])
        dphi[3:] -= rho_a * (rot.T @ grav)
        return np.concatenate((drot.ravel(), dpos, dphi))

    def shoot(phi0, dense=False):
        y0 = np.concatenate((np.eye(3).ravel(), np.zeros(3), phi0))
        sol = solve_ivp(
            rhs,
            (0.0, grid.length),
            y0,
            method="RK45",
            rtol=rtol,
            atol=atol,
            dense_output=dense,
        )
        if not sol.success:
            raise RuntimeError(f"oracle integration failed: {sol.message}")
        return sol

    def boundary_mismatch(phi0):
        sol = shoot(phi0)
        y_tip = sol.y[:, -1]
        rot_tip = y_tip[:9].reshape(3, 3)
        target = np.zeros(6)
        target[3:] = rot_tip.T @ force
        return y_tip[12:18] - target

    # straight-rod force balance as the starting guess for the base wrench
    guess = np.zeros(6)
    guess[3:] = force + grid.length * rho_a * grav
    result = _scipy_root(boundary_mismatch, guess, method="hybr", tol=1e-12)
    residual = float(np.linalg.norm(boundary_mismatch(result.x)))
    if not result.success or residual > 1e-8:
        raise RuntimeError(
            f"oracle shooting did not converge (boundary residual {residual:.3g})"
        )
    sol = shoot(result.x, dense=True)
    s_nodes = grid.s
    poses = np.empty((s_nodes.shape[0], 4, 4))
    strain = np.empty((s_nodes.shape[0], 6))
    for i, s in enumerate(s_nodes):
        y = sol.sol(s)
        poses[i] = make_pose(y[:9].reshape(3, 3), y[9:12])
        strain[i] = _strain_from_wrench(y[12:18], model, tension)
    return OracleSolution(
        s=s_nodes,
        poses=poses,
        strain=strain,
        base_wrench=result.x.copy(),
        boundary_residual=residual,
    )


# ---------------------------------------------------------------------------
# metrics


@dataclass(eq=False)
class TipSeries:
    times: np.ndarray
    poses: np.ndarray
    twists: np.ndarray


def tip_series(traj):
    return TipSeries(traj.times.copy(), traj.tip_poses.copy(), traj.tip_twists.copy())


def measurement_series(measurements):
    return TipSeries(
        np.array([m.time for m in measurements]),
        np.array([m.pose for m in measurements]),
        np.array([m.twist for m in measurements]),
    )


def planar_angle(rot):
    """Rotation angle about the world z axis (planar experiments)."""
    return float(math.atan2(rot[1, 0], rot[0, 0]))


def pose_error_norms(est, ref, error_kind="skew"):
    """Norm of the 6-vector tip pose mismatch at each shared sample."""
    if est.times.shape != ref.times.shape or np.max(np.abs(est.times - ref.times)) > 1e-9:
        raise ValueError("series must share the same sample times")
    err_fn = pose_error_skew if error_kind == "skew" else pose_error_log
    return np.array(
        [np.linalg.norm(err_fn(est.poses[k], ref.poses[k])) for k in range(est.times.shape[0])]
    )


@dataclass
class Metrics:
    """Tip-channel accuracy after transients, plus convergence bookkeeping."""

    rmse_angle: float
    rmse_x: float
    rmse_y: float
    rmse_position: float
    rmse_angular_velocity: float
    rmse_vx: float
    rmse_vy: float
    initial_pose_error: float
    final_pose_error: float
    convergence_time: float = None
    pose_transient: float = 0.12
    velocity_transient: float = 0.2

    def as_dict(self):
        return {
            "rmse_angle_rad": self.rmse_angle,
            "rmse_x_m": self.rmse_x,
            "rmse_y_m": self.rmse_y,
            "rmse_position_m": self.rmse_position,
            "rmse_angular_velocity_rad_s": self.rmse_angular_velocity,
            "rmse_vx_m_s": self.rmse_vx,
            "rmse_vy_m_s": self.rmse_vy,
            "initial_pose_error": self.initial_pose_error,
            "final_pose_error": self.final_pose_error,
            "convergence_time_s": self.convergence_time,
            "pose_transient_s": self.pose_transient,
            "velocity_transient_s": self.velocity_transient,
        }


def _rms(values):
    return float(np.sqrt(np.mean(np.square(values))))


def rmse_after_transient(est, ref, pose_transient=0.12, velocity_transient=0.2, error_kind="skew"):
    """Channel RMSEs with the initial transient cut: pose channels discard
    pose_transient seconds, velocity channels velocity_transient seconds."""
    if est.times.shape != ref.times.shape or np.max(np.abs(est.times - ref.times)) > 1e-9:
        raise ValueError("series must share the same sample times")
    t_rel = est.times - est.times[0]
    keep_pose = t_rel >= pose_transient - 1e-9
    keep_vel = t_rel >= velocity_transient - 1e-9
    if not keep_pose.any() or not keep_vel.any():
        raise ValueError("horizon shorter than the transient cuts")
    ang_est = np.array([planar_angle(p[:3, :3]) for p in est.poses])
    ang_ref = np.array([planar_angle(p[:3, :3]) for p in ref.poses])
    dpos = est.poses[:, :3, 3] - ref.poses[:, :3, 3]
    dtw = est.twists - ref.twists
    errs = pose_error_norms(est, ref, error_kind)
    return Metrics(
        rmse_angle=_rms((ang_est - ang_ref)[keep_pose]),
        rmse_x=_rms(dpos[keep_pose, 0]),
        rmse_y=_rms(dpos[keep_pose, 1]),
        rmse_position=_rms(np.linalg.norm(dpos[keep_pose], axis=1)),
        rmse_angular_velocity=_rms(dtw[keep_vel, 2]),
        rmse_vx=_rms(dtw[keep_vel, 3]),
        rmse_vy=_rms(dtw[keep_vel, 4]),
        initial_pose_error=float(errs[0]),
        final_pose_error=float(errs[-1]),
        convergence_time=convergence_time(est, ref, error_kind=error_kind),
        pose_transient=pose_transient,
        velocity_transient=velocity_transient,
    )


def convergence_time(est, ref, threshold=0.1, error_kind="skew"):
    """First time (relative to the series start) after which the tip pose
    error stays below threshold * initial error for the remainder; None if
    it never settles.  Resolution is one sample interval."""
    errs = pose_error_norms(est, ref, error_kind)
    initial = errs[0]
    if initial == 0.0:
        return 0.0
    bar = threshold * initial
    above = np.nonzero(errs > bar)[0]
    if above.size == 0:
        return 0.0
    last = int(above[-1])
    if last == errs.shape[0] - 1:
        return None
    return float(est.times[last + 1] - est.times[0])


def error_energy_series(est, truth, model, grid):
    """Mechanical energy of the estimate-truth mismatch field over time,
    weighted by the estimator model's inertia and stiffness."""
    if est.times.shape != truth.times.shape:
        raise ValueError("trajectories must share sample times")
    weights = np.full(grid.n_nodes, grid.spacing)
    weights[0] = weights[-1] = 0.5 * grid.spacing
    jdiag = model.inertia_diag
    kdiag = model.stiffness_diag
    dxi = est.strain - truth.strain
    deta = est.velocity - truth.velocity
    kin = 0.5 * np.sum(weights[None, :] * np.sum(deta**2 * jdiag, axis=2), axis=1)
    ela = 0.5 * np.sum(weights[None, :] * np.sum(dxi**2 * kdiag, axis=2), axis=1)
    return kin + ela


@dataclass(eq=False)
class ExperimentResult:
    twin: TwinData
    estimate: Trajectory
    metrics: Metrics


def run_experiment(cfg):
    """Full pipeline: twin truth -> corrupted stream -> estimator -> metrics."""
    twin = generate_twin_truth(cfg)
    estimate = run_estimation(cfg, twin)
    metrics = rmse_after_transient(
        tip_series(estimate),
        tip_series(twin.truth),
        error_kind=cfg.observer.error_kind,
    )
    return ExperimentResult(twin=twin, estimate=estimate, metrics=metrics)


def gain_sweep(cfg, scalars, twin=None):
    """Run the estimator at several isotropic gain levels against ONE shared
    twin; returns a list of (gain, Metrics) in the given order."""
    if twin is None:
        twin = generate_twin_truth(cfg)
    truth = tip_series(twin.truth)
    out = []
    for s in scalars:
        est = run_estimation(cfg, twin, gains=ObserverGains.scalar(float(s)))
        out.append((float(s), rmse_after_transient(tip_series(est), truth,
                                                   error_kind=cfg.observer.error_kind)))
    return out


def compare_runs(named_configs):
    """Run several full experiments; returns {name: Metrics}."""
    return {name: run_experiment(cfg).metrics for name, cfg in named_configs.items()}
