"""Dynamics of tendon-driven elastic rods and tip-driven state estimation.

The package simulates a clamped elastic rod (geometrically exact, linear
constitutive law) actuated by a tendon and loaded at the tip, and estimates
its full strain/velocity state online from tip pose and velocity
measurements injected as boundary feedback.  A twin-experiment harness,
an independent static oracle, CSV/YAML IO and a CLI sit on top.

Kernel backend: set RODOBS_BACKEND=numpy to force the pure-numpy fallback
(default is the jit-compiled path when numba is importable).
"""

from .backend import name as backend_name
from .discretization import (
    Grid,
    RodState,
    SolverConfig,
    Trajectory,
    discrete_equilibrium,
    reconstruct_poses,
    rhs_dynamics,
    simulate,
    spatial_derivative,
    step,
    total_energy,
)
from .harness import (
    ExperimentConfig,
    Metrics,
    TensionProfile,
    convergence_time,
    default_config,
    generate_twin_truth,
    rmse_after_transient,
    run_estimation,
    run_experiment,
    static_equilibrium_oracle,
)
from .liegroup import (
    ad,
    exp_pose,
    hat3,
    hat6,
    log_pose,
    pose_compose,
    pose_error_log,
    pose_error_skew,
    pose_inverse,
    vee3,
    vee6,
)
from .observer import ObserverGains, TipMeasurement, correction_wrench, observer_rhs, run_observer
from .rod_model import (
    ExternalLoad,
    MaterialGeometry,
    RodModel,
    TendonRouting,
    actuation_wrench,
    elastic_wrench,
    gravity_wrench,
    section_inertia,
    section_stiffness,
    tip_load_wrench,
)

__version__ = "0.1.0"
