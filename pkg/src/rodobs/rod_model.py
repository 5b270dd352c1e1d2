"""Physical description of a tendon-driven elastic rod.

Section matrices come from a circular solid cross-section of radius r:

* inertia  J = diag(2, 1, 1) * rho * pi r^4 / 4  (+)  I3 * rho * pi r^2,
* stiffness K = diag(2G, E, E) * pi r^4 / 4  (+)  diag(E, G, G) * pi r^2,

angular block first, matching the project twist layout.  The undeformed
strain is [0, 0, 0, 1, 0, 0]: straight rod, local x tangent to the
centerline, unit stretch.

The internal load state at a cross-section is a wrench Phi (moment, force)
in the body frame.  With a single straight-routed tendon at offset d from
the centerline carrying tension T >= 0, the constitutive total is

    Phi = K (xi - xi_star) + D dxi/dt - actuation_wrench(xi, d, T)

where actuation_wrench = -T * (d x t_hat, t_hat) and t_hat is the unit
tangent of the tendon path in the body frame.  The sign makes tension
compress the rod axially and bend it toward the tendon side, so its linear
block always has norm T.  Damping D is zero for the nominal plant; twin
(ground-truth) models may carry a small diagonal D proportional to K.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "MaterialGeometry",
    "TendonRouting",
    "ExternalLoad",
    "RodModel",
    "section_inertia",
    "section_stiffness",
    "reference_strain",
    "elastic_wrench",
    "actuation_wrench",
    "gravity_wrench",
    "tip_load_wrench",
    "proportional_damping",
]

_TANGENT_EPS = 1e-9


@dataclass(frozen=True)
class MaterialGeometry:
    """Rod geometry and material constants (SI units).

    density may be the physically measured value or an effective value
    calibrated to include payload/fixture mass lumped along the rod.
    """

    length: float = 0.45
    radius: float = 0.0016
    density: float = 20321.0
    youngs: float = 68.9e9
    shear: float = 26.0e9
    poisson: float = 0.325

    def __post_init__(self):
        for name in ("length", "radius", "density", "youngs", "shear"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.poisson < 0.5:
            raise ValueError("poisson ratio must lie in (0, 0.5)")

    @property
    def area(self):
        return np.pi * self.radius**2

    @property
    def second_moment(self):
        """Area moment of inertia of the circular section about a diameter."""
        return np.pi * self.radius**4 / 4.0


@dataclass(frozen=True)
class TendonRouting:
    """Single tendon routed parallel to the centerline at a fixed offset.

    offset is the hole position in the cross-section frame, meters; its x
    component must vanish (the hole lies in the section plane).
    """

    offset: tuple = (0.0, 0.025, 0.0)

    def __post_init__(self):
        off = np.asarray(self.offset, dtype=float)
        if off.shape != (3,):
            raise ValueError("offset must be a 3-vector")
        if off[0] != 0.0:
            raise ValueError("offset must lie in the cross-section plane (x component 0)")
        object.__setattr__(self, "offset", tuple(off))

    @property
    def offset_vector(self):
        return np.asarray(self.offset, dtype=float)


@dataclass(frozen=True)
class ExternalLoad:
    """Distributed and boundary loads: gravity field and a dead tip force.

    Both are world-frame vectors; damping, when present, is a 6x6 matrix
    acting on the strain rate (twin models only).
    """

    gravity: tuple = (0.0, -9.81, 0.0)
    tip_force: tuple = (0.0, 0.0, 0.0)
    damping: tuple = None

    def __post_init__(self):
        g = np.asarray(self.gravity, dtype=float)
        f = np.asarray(self.tip_force, dtype=float)
        if g.shape != (3,) or f.shape != (3,):
            raise ValueError("gravity and tip_force must be 3-vectors")
        object.__setattr__(self, "gravity", tuple(g))
        object.__setattr__(self, "tip_force", tuple(f))
        if self.damping is not None:
            d = np.asarray(self.damping, dtype=float)
            if d.shape != (6, 6):
                raise ValueError("damping must be a 6x6 matrix")
            if np.min(np.linalg.eigvalsh(0.5 * (d + d.T))) < -1e-12:
                raise ValueError("damping must be positive semidefinite")
            object.__setattr__(self, "damping", tuple(map(tuple, d)))

    @property
    def gravity_vector(self):
        return np.asarray(self.gravity, dtype=float)

    @property
    def tip_force_vector(self):
        return np.asarray(self.tip_force, dtype=float)

    @property
    def damping_matrix(self):
        if self.damping is None:
            return np.zeros((6, 6))
        return np.asarray(self.damping, dtype=float)


def section_inertia(geometry):
    """6x6 cross-section inertia per unit length (angular block first)."""
    rho = geometry.density
    i2 = geometry.second_moment
    a = geometry.area
    out = np.zeros((6, 6))
    out[:3, :3] = np.diag([2.0, 1.0, 1.0]) * rho * i2
    out[3:, 3:] = np.eye(3) * rho * a
    return out


def section_stiffness(geometry):
    """6x6 linear elastic section stiffness (angular block first)."""
    e = geometry.youngs
    g = geometry.shear
    i2 = geometry.second_moment
    a = geometry.area
    out = np.zeros((6, 6))
    out[:3, :3] = np.diag([2.0 * g, e, e]) * i2
    out[3:, 3:] = np.diag([e, g, g]) * a
    return out


def reference_strain():
    """Undeformed strain twist: zero curvature, unit stretch along x."""
    return np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0])


def elastic_wrench(strain, strain_ref, stiffness):
    """Linear constitutive law K (xi - xi*)."""
    return np.asarray(stiffness, dtype=float) @ (
        np.asarray(strain, dtype=float) - np.asarray(strain_ref, dtype=float)
    )


def actuation_wrench(strain, offset, tension):
    """Wrench the tendon removes from the section load, -T (d x t_hat, t_hat).

    t_hat is the unit tangent of the tendon path, (q + u x d) normalized,
    for strain [u, q] and hole offset d.  Tension must be non-negative;
    a near-zero tangent norm (pathological strain) raises.
    """
    if tension < 0.0:
        raise ValueError("tendon tension must be non-negative")
    strain = np.asarray(strain, dtype=float)
    off = np.asarray(offset, dtype=float)
    tangent = strain[3:] + np.cross(strain[:3], off)
    nrm = float(np.linalg.norm(tangent))
    if nrm <= _TANGENT_EPS:
        raise ValueError("tendon tangent is degenerate (section fully collapsed)")
    that = tangent / nrm
    out = np.empty(6)
    out[:3] = -tension * np.cross(off, that)
    out[3:] = -tension * that
    return out


def gravity_wrench(rotation, geometry, gravity):
    """Distributed gravity wrench per unit length in the body frame.

    (0, rho A R^T g): gravity exerts no distributed moment about the
    centerline of a symmetric section.
    """
    rot = np.asarray(rotation, dtype=float)
    g = np.asarray(gravity, dtype=float)
    out = np.zeros(6)
    out[3:] = geometry.density * geometry.area * (rot.T @ g)
    return out


def tip_load_wrench(tip_rotation, force):
    """Boundary wrench of a dead world-frame force at the tip: (0, R^T F)."""
    rot = np.asarray(tip_rotation, dtype=float)
    out = np.zeros(6)
    out[3:] = rot.T @ np.asarray(force, dtype=float)
    return out


def proportional_damping(stiffness, scale):
    """Diagonal strain-rate damping D = scale * diag(K)."""
    return np.diag(scale * np.diag(np.asarray(stiffness, dtype=float)))


@dataclass(frozen=True, eq=False)
class RodModel:
    """Everything the semi-discrete dynamics needs, precomputed.

    Build via RodModel.build; density_scale lets a twin model carry a
    perturbed inertia while keeping the same stiffness provenance explicit.
    """

    geometry: MaterialGeometry
    routing: TendonRouting
    load: ExternalLoad
    inertia: np.ndarray = field(repr=False, default=None)
    stiffness: np.ndarray = field(repr=False, default=None)
    strain_ref: np.ndarray = field(repr=False, default=None)

    @classmethod
    def build(cls, geometry=None, routing=None, load=None, density_scale=1.0):
        geometry = geometry if geometry is not None else MaterialGeometry()
        routing = routing if routing is not None else TendonRouting()
        load = load if load is not None else ExternalLoad()
        if density_scale != 1.0:
            geometry = replace(geometry, density=geometry.density * density_scale)
        return cls(
            geometry=geometry,
            routing=routing,
            load=load,
            inertia=section_inertia(geometry),
            stiffness=section_stiffness(geometry),
            strain_ref=reference_strain(),
        )

    @property
    def inertia_diag(self):
        return np.diag(self.inertia)

    @property
    def stiffness_diag(self):
        return np.diag(self.stiffness)

    @property
    def damping_matrix(self):
        return self.load.damping_matrix

    @property
    def linear_density(self):
        """Mass per unit length rho A."""
        return self.geometry.density * self.geometry.area

    def with_load(self, load):
        return RodModel(
            geometry=self.geometry,
            routing=self.routing,
            load=load,
            inertia=self.inertia,
            stiffness=self.stiffness,
            strain_ref=self.strain_ref,
        )
