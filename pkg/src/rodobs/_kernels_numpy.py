"""Vectorized numpy implementation of the grid-level hot kernels.

Mirrors `_kernels_numba` function-for-function; the backend module picks one
of the two at import time (env flag RODOBS_BACKEND) and the test suite pins
both for equivalence checks.  Keep the two files in lockstep.

Array layouts: strain/velocity fields are (N, 6) with the angular block
first; poses are (N, 4, 4).  All section matrices are diagonal here and
passed as their length-6 diagonals; damping may be a full 6x6.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"

_SMALL_ANGLE = 1.0e-6
_TANGENT_EPS = 1e-9


def se3_exp_batch(twists, scale):
    """Rodrigues exponential of hat6(t_i) * scale for a batch of twists.

    twists: (M, 6) -> (M, 4, 4).
    """
    twists = np.asarray(twists, dtype=float)
    m = twists.shape[0]
    w = twists[:, :3] * scale
    v = twists[:, 3:] * scale
    angle = np.sqrt(np.sum(w * w, axis=1))
    small = angle < _SMALL_ANGLE
    a2 = angle * angle
    with np.errstate(invalid="ignore", divide="ignore"):
        ca = np.where(small, 1.0 - a2 / 6.0, np.sin(angle) / np.where(small, 1.0, angle))
        cb = np.where(small, 0.5 - a2 / 24.0, (1.0 - np.cos(angle)) / np.where(small, 1.0, a2))
        cc = np.where(
            small,
            1.0 / 6.0 - a2 / 120.0,
            (angle - np.sin(angle)) / np.where(small, 1.0, a2 * angle),
        )
    wh = np.zeros((m, 3, 3))
    wh[:, 0, 1] = -w[:, 2]
    wh[:, 0, 2] = w[:, 1]
    wh[:, 1, 0] = w[:, 2]
    wh[:, 1, 2] = -w[:, 0]
    wh[:, 2, 0] = -w[:, 1]
    wh[:, 2, 1] = w[:, 0]
    wh2 = wh @ wh
    eye = np.eye(3)
    rot = eye[None, :, :] + ca[:, None, None] * wh + cb[:, None, None] * wh2
    vmat = eye[None, :, :] + cb[:, None, None] * wh + cc[:, None, None] * wh2
    out = np.zeros((m, 4, 4))
    out[:, :3, :3] = rot
    out[:, :3, 3] = np.einsum("mij,mj->mi", vmat, v)
    out[:, 3, 3] = 1.0
    return out


def reconstruct_poses(strain, h, base):
    """Chain the pose field from the base: g_{i+1} = g_i exp(avg strain * h).

    The per-interval twist is the arithmetic mean of the endpoint strains,
    which keeps the reconstruction second-order accurate on smooth fields
    and exact for constant ones.
    """
    strain = np.asarray(strain, dtype=float)
    n = strain.shape[0]
    steps = se3_exp_batch(0.5 * (strain[:-1] + strain[1:]), h)
    poses = np.empty((n, 4, 4))
    poses[0] = base
    for i in range(n - 1):
        poses[i + 1] = poses[i] @ steps[i]
    return poses


def spatial_derivative(field, h):
    """Second-order first derivative along the grid: central interior,
    one-sided three-point stencils at both ends.  field: (N, ...)."""
    field = np.asarray(field, dtype=float)
    out = np.empty_like(field)
    out[1:-1] = (field[2:] - field[:-2]) / (2.0 * h)
    out[0] = (-3.0 * field[0] + 4.0 * field[1] - field[2]) / (2.0 * h)
    out[-1] = (3.0 * field[-1] - 4.0 * field[-2] + field[-3]) / (2.0 * h)
    return out


def _cross(a, b):
    """Row-wise cross product for (N, 3) arrays (np.cross, fixed axes)."""
    return np.cross(a, b)


def compat_rate(strain, velocity, h):
    """Strain rate from the compatibility relation: d xi = D_s eta + ad_xi eta."""
    strain = np.asarray(strain, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    out = spatial_derivative(velocity, h)
    u = strain[:, :3]
    q = strain[:, 3:]
    w = velocity[:, :3]
    v = velocity[:, 3:]
    out[:, :3] += _cross(u, w)
    out[:, 3:] += _cross(q, w) + _cross(u, v)
    return out


def internal_wrench(
    strain,
    strain_rate,
    kdiag,
    dmat,
    use_damping,
    strain_ref,
    offset,
    tension,
):
    """Total section wrench Phi = K(xi - xi*) + D dxi + T (d x t_hat, t_hat).

    The tension term is the negated tendon actuation wrench; see rod_model.
    """
    strain = np.asarray(strain, dtype=float)
    phi = (strain - strain_ref[None, :]) * kdiag[None, :]
    if use_damping:
        phi += strain_rate @ dmat.T
    if tension != 0.0:
        u = strain[:, :3]
        q = strain[:, 3:]
        tangent = q + _cross(u, np.broadcast_to(offset, u.shape))
        nrm = np.sqrt(np.sum(tangent * tangent, axis=1))
        if np.any(nrm <= _TANGENT_EPS):
            raise ValueError("tendon tangent is degenerate (section fully collapsed)")
        that = tangent / nrm[:, None]
        phi[:, :3] += tension * _cross(np.broadcast_to(offset, u.shape), that)
        phi[:, 3:] += tension * that
    return phi


def rod_rhs(
    strain,
    velocity,
    poses,
    h,
    jdiag,
    kdiag,
    dmat,
    use_damping,
    strain_ref,
    rho_a,
    gravity,
    offset,
    tension,
    phi_tip,
    clamp_base,
):
    """Time derivatives (d strain, d velocity) of the semi-discrete rod.

    The tip row of the internal wrench field is replaced by phi_tip (the
    boundary condition) BEFORE any spatial stencil reads it, so the
    prescribed boundary wrench participates in the one-sided derivative at
    the tip and in the central stencil of the node below it.  clamp_base
    zeroes the base velocity rate (clamped end); passing False exposes the
    raw balance there, which the static-equilibrium solver needs.
    """
    strain = np.asarray(strain, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    dstrain = compat_rate(strain, velocity, h)
    phi = internal_wrench(
        strain, dstrain, kdiag, dmat, use_damping, strain_ref, offset, tension
    )
    phi[-1] = phi_tip
    dvel = spatial_derivative(phi, h)
    u = strain[:, :3]
    q = strain[:, 3:]
    w = velocity[:, :3]
    v = velocity[:, 3:]
    # transport of the internal wrench: -ad_xi^T Phi
    dvel[:, :3] += _cross(u, phi[:, :3]) + _cross(q, phi[:, 3:])
    dvel[:, 3:] += _cross(u, phi[:, 3:])
    # convective momentum term: +ad_eta^T (J eta)
    mom_ang = w * jdiag[None, :3]
    mom_lin = v * jdiag[None, 3:]
    dvel[:, :3] += -_cross(w, mom_ang) - _cross(v, mom_lin)
    dvel[:, 3:] += -_cross(w, mom_lin)
    # distributed gravity (0, rho A R^T g)
    dvel[:, 3:] += rho_a * np.einsum("nji,j->ni", poses[:, :3, :3], gravity)
    dvel /= jdiag[None, :]
    if clamp_base:
        dvel[0] = 0.0
    return dstrain, dvel
