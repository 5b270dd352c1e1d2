"""Rotation and rigid-transform algebra used by the rod model.

Conventions, fixed project-wide:

* A twist is a length-6 float vector with the ANGULAR block first:
  ``t = [angular(3), linear(3)]``.  Velocity twists pair (angular velocity,
  linear velocity) in the body frame; strain twists pair (curvature/torsion,
  stretch/shear).
* A pose is a 4x4 homogeneous matrix ``[[R, p], [0, 1]]`` with R a rotation
  and p a position.
* ``exp_pose(t, theta)`` is the closed-form (Rodrigues) exponential of the
  4x4 matrix ``hat6(t) * theta``; rotation angles below ``SMALL_ANGLE``
  switch to series expansions so the formulas stay finite at zero.

All functions are pure, operate on float64 numpy arrays, and allocate their
outputs.  They are not vectorized; batch variants for the hot loops live in
the kernel modules.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "SMALL_ANGLE",
    "hat3",
    "vee3",
    "hat6",
    "vee6",
    "ad",
    "exp_pose",
    "log_pose",
    "make_pose",
    "identity_pose",
    "pose_compose",
    "pose_inverse",
    "pose_error_skew",
    "pose_error_log",
    "rotation_angle",
    "check_rotation",
    "check_pose",
]

# Below this rotation angle the trig coefficient ratios in exp/log are
# evaluated by Taylor series instead of sin/cos quotients.
SMALL_ANGLE = 1.0e-6


def hat3(v):
    """3-vector -> 3x3 antisymmetric matrix, hat3(v) @ x == cross(v, x)."""
    v = np.asarray(v, dtype=float)
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee3(m, tol=1e-9):
    """Inverse of hat3.  Rejects matrices that are not antisymmetric.

    The result averages the two off-diagonal triangles, so input that is
    antisymmetric only to rounding still maps to the nearest 3-vector.
    """
    m = np.asarray(m, dtype=float)
    dev = np.max(np.abs(m + m.T))
    if dev > tol:
        raise ValueError(f"matrix is not antisymmetric within {tol:g} (deviation {dev:g})")
    return 0.5 * np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]])


def hat6(t):
    """Twist -> 4x4 matrix [[hat3(ang), lin], [0, 0]]."""
    t = np.asarray(t, dtype=float)
    out = np.zeros((4, 4))
    out[:3, :3] = hat3(t[:3])
    out[:3, 3] = t[3:]
    return out


def vee6(m, tol=1e-9):
    """Inverse of hat6.  Rejects matrices outside the admissible pattern."""
    m = np.asarray(m, dtype=float)
    bad = np.max(np.abs(m[3, :]))
    if bad > tol:
        raise ValueError(f"last row must vanish within {tol:g} (deviation {bad:g})")
    out = np.empty(6)
    out[:3] = vee3(m[:3, :3], tol=tol)
    out[3:] = m[:3, 3]
    return out


def ad(t):
    """Adjoint of a twist: ad(a) @ b is the twist bracket [a, b].

    Block form [[hat3(w), 0], [hat3(v), hat3(w)]] for t = [w, v].  Its
    transpose (with a minus sign) moves wrenches between frames in the
    momentum balance.
    """
    t = np.asarray(t, dtype=float)
    w = hat3(t[:3])
    out = np.zeros((6, 6))
    out[:3, :3] = w
    out[3:, 3:] = w
    out[3:, :3] = hat3(t[3:])
    return out


def _rot_coeffs(angle):
    """(sin a / a, (1 - cos a) / a^2, (a - sin a) / a^3), series below SMALL_ANGLE."""
    if angle < SMALL_ANGLE:
        a2 = angle * angle
        return 1.0 - a2 / 6.0, 0.5 - a2 / 24.0, 1.0 / 6.0 - a2 / 120.0
    a2 = angle * angle
    s, c = np.sin(angle), np.cos(angle)
    return s / angle, (1.0 - c) / a2, (angle - s) / (a2 * angle)


def exp_pose(t, theta=1.0):
    """Closed-form exponential of hat6(t) * theta -> pose.

    For t = [w, v]: R = I + A hat(w th) + B hat(w th)^2 and p = V (v th)
    with V = I + B hat(w th) + C hat(w th)^2, where A, B, C are the usual
    Rodrigues coefficient ratios of the rotation angle |w| th.
    """
    t = np.asarray(t, dtype=float)
    w = t[:3] * theta
    v = t[3:] * theta
    angle = float(np.linalg.norm(w))
    a_c, b_c, c_c = _rot_coeffs(angle)
    wh = hat3(w)
    wh2 = wh @ wh
    eye = np.eye(3)
    rot = eye + a_c * wh + b_c * wh2
    vmat = eye + b_c * wh + c_c * wh2
    out = np.eye(4)
    out[:3, :3] = rot
    out[:3, 3] = vmat @ v
    return out


def log_pose(g, tol=1e-9):
    """Principal twist t with exp_pose(t) == g, as a 6-vector.

    Raises ValueError when the rotation angle is within SMALL_ANGLE of pi,
    where the principal branch is not unique.
    """
    g = np.asarray(g, dtype=float)
    check_pose(g, tol=max(tol, 1e-8))
    rot = g[:3, :3]
    cos_a = 0.5 * (np.trace(rot) - 1.0)
    angle = float(np.arccos(np.clip(cos_a, -1.0, 1.0)))
    if angle > np.pi - SMALL_ANGLE:
        raise ValueError("rotation angle within 1e-6 of pi: principal log is ill-defined")
    if angle < SMALL_ANGLE:
        # hat(w) ~ (R - R^T)/2 to third order in the angle
        w = 0.5 * np.array(
            [rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]]
        )
    else:
        w = (
            angle
            / (2.0 * np.sin(angle))
            * np.array([rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]])
        )
    wh = hat3(w)
    wh2 = wh @ wh
    if angle < SMALL_ANGLE:
        a2 = angle * angle
        # (1/a^2) * (1 - A/(2B)) -> 1/12 + a^2/720 + ...
        gamma = 1.0 / 12.0 + a2 / 720.0
    else:
        a_c = np.sin(angle) / angle
        b_c = (1.0 - np.cos(angle)) / (angle * angle)
        gamma = (1.0 - 0.5 * a_c / b_c) / (angle * angle)
    vinv = np.eye(3) - 0.5 * wh + gamma * wh2
    out = np.empty(6)
    out[:3] = w
    out[3:] = vinv @ g[:3, 3]
    return out


def make_pose(rot, pos):
    """Assemble a pose from a 3x3 rotation and a 3-vector position."""
    out = np.eye(4)
    out[:3, :3] = np.asarray(rot, dtype=float)
    out[:3, 3] = np.asarray(pos, dtype=float)
    return out


def identity_pose():
    return np.eye(4)


def pose_compose(a, b):
    """Chain two poses (matrix product)."""
    return np.asarray(a, dtype=float) @ np.asarray(b, dtype=float)


def pose_inverse(g):
    """Inverse pose without a general 4x4 solve: [[R^T, -R^T p], [0, 1]]."""
    g = np.asarray(g, dtype=float)
    rot = g[:3, :3]
    out = np.eye(4)
    out[:3, :3] = rot.T
    out[:3, 3] = -rot.T @ g[:3, 3]
    return out


def pose_error_skew(g_est, g_ref):
    """Pose mismatch as (antisymmetric-part rotation error, raw position gap).

    Returns the 6-vector ``[vee3(R^T Rh - Rh^T R)/2, ph - p]`` for estimate
    (Rh, ph) against reference (R, p).  To first order in a small relative
    motion this equals (estimate - reference), so it is the cheap,
    chart-free mismatch used in boundary feedback.  The angular part vanishes
    also at a relative rotation of exactly pi; the linear part is the
    position gap in the world frame, not rotated into a body frame.
    """
    g_est = np.asarray(g_est, dtype=float)
    g_ref = np.asarray(g_ref, dtype=float)
    m = g_ref[:3, :3].T @ g_est[:3, :3]
    out = np.empty(6)
    out[0] = 0.5 * (m[2, 1] - m[1, 2])
    out[1] = 0.5 * (m[0, 2] - m[2, 0])
    out[2] = 0.5 * (m[1, 0] - m[0, 1])
    out[3:] = g_est[:3, 3] - g_ref[:3, 3]
    return out


def pose_error_log(g_est, g_ref):
    """Pose mismatch as the log of the relative pose g_ref^-1 g_est.

    Agrees with pose_error_skew to first order in the relative motion (taken
    at a common base pose with identity rotation); unlike it, the linear
    part is expressed in the reference body frame and the angular part stays
    faithful at large relative rotations (up to the branch cut at pi).
    """
    return log_pose(pose_compose(pose_inverse(g_ref), g_est))


def rotation_angle(rot):
    """Principal rotation angle of a 3x3 rotation matrix, in [0, pi]."""
    rot = np.asarray(rot, dtype=float)
    return float(np.arccos(np.clip(0.5 * (np.trace(rot) - 1.0), -1.0, 1.0)))


def check_rotation(rot, tol=1e-10):
    """Raise unless rot is orthonormal with determinant +1 within tol."""
    rot = np.asarray(rot, dtype=float)
    dev = np.max(np.abs(rot.T @ rot - np.eye(3)))
    if dev > tol:
        raise ValueError(f"matrix is not orthonormal within {tol:g} (deviation {dev:g})")
    det = float(np.linalg.det(rot))
    if abs(det - 1.0) > tol:
        raise ValueError(f"determinant {det!r} is not +1 within {tol:g}")


def check_pose(g, tol=1e-10):
    """Raise unless g is a valid homogeneous transform within tol."""
    g = np.asarray(g, dtype=float)
    if g.shape != (4, 4):
        raise ValueError(f"pose must be 4x4, got {g.shape}")
    check_rotation(g[:3, :3], tol=tol)
    dev = np.max(np.abs(g[3, :] - np.array([0.0, 0.0, 0.0, 1.0])))
    if dev > tol:
        raise ValueError(f"last row must be [0 0 0 1] within {tol:g} (deviation {dev:g})")
