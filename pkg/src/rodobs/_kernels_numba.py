"""Jit-compiled implementation of the grid-level hot kernels.

Function-for-function mirror of `_kernels_numpy` (same signatures, same
math, scalar loops instead of vectorized ops).  Keep the two files in
lockstep; the equivalence test drives both on the same inputs.

First call per process pays the compile; cache=True persists the compiled
artifacts next to the package so subsequent runs start warm.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NAME = "numba"

_SMALL_ANGLE = 1.0e-6
_TANGENT_EPS = 1e-9


@njit(cache=True)
def _exp_into(twist, scale, out):
    """Rodrigues exponential of hat6(twist)*scale written into out (4x4)."""
    wx = twist[0] * scale
    wy = twist[1] * scale
    wz = twist[2] * scale
    vx = twist[3] * scale
    vy = twist[4] * scale
    vz = twist[5] * scale
    a2 = wx * wx + wy * wy + wz * wz
    angle = np.sqrt(a2)
    if angle < _SMALL_ANGLE:
        ca = 1.0 - a2 / 6.0
        cb = 0.5 - a2 / 24.0
        cc = 1.0 / 6.0 - a2 / 120.0
    else:
        s = np.sin(angle)
        c = np.cos(angle)
        ca = s / angle
        cb = (1.0 - c) / a2
        cc = (angle - s) / (a2 * angle)
    # R = (1 - cb a^2) I + cb w w^T + ca hat(w); same shape for V with (cb, cc)
    r_iso = 1.0 - cb * a2
    v_iso = 1.0 - cc * a2
    out[0, 0] = r_iso + cb * wx * wx
    out[0, 1] = cb * wx * wy - ca * wz
    out[0, 2] = cb * wx * wz + ca * wy
    out[1, 0] = cb * wy * wx + ca * wz
    out[1, 1] = r_iso + cb * wy * wy
    out[1, 2] = cb * wy * wz - ca * wx
    out[2, 0] = cb * wz * wx - ca * wy
    out[2, 1] = cb * wz * wy + ca * wx
    out[2, 2] = r_iso + cb * wz * wz
    p0 = (v_iso + cc * wx * wx) * vx + (cc * wx * wy - cb * wz) * vy + (cc * wx * wz + cb * wy) * vz
    p1 = (cc * wy * wx + cb * wz) * vx + (v_iso + cc * wy * wy) * vy + (cc * wy * wz - cb * wx) * vz
    p2 = (cc * wz * wx - cb * wy) * vx + (cc * wz * wy + cb * wx) * vy + (v_iso + cc * wz * wz) * vz
    out[0, 3] = p0
    out[1, 3] = p1
    out[2, 3] = p2
    out[3, 0] = 0.0
    out[3, 1] = 0.0
    out[3, 2] = 0.0
    out[3, 3] = 1.0


@njit(cache=True)
def se3_exp_batch(twists, scale):
    m = twists.shape[0]
    out = np.empty((m, 4, 4))
    for k in range(m):
        _exp_into(twists[k], scale, out[k])
    return out


@njit(cache=True)
def reconstruct_poses(strain, h, base):
    n = strain.shape[0]
    poses = np.empty((n, 4, 4))
    for r in range(4):
        for c in range(4):
            poses[0, r, c] = base[r, c]
    step = np.empty((4, 4))
    mid = np.empty(6)
    for i in range(n - 1):
        for c in range(6):
            mid[c] = 0.5 * (strain[i, c] + strain[i + 1, c])
        _exp_into(mid, h, step)
        for r in range(4):
            for c in range(4):
                acc = 0.0
                for k in range(4):
                    acc += poses[i, r, k] * step[k, c]
                poses[i + 1, r, c] = acc
    return poses


@njit(cache=True)
def spatial_derivative(field, h):
    n = field.shape[0]
    k = field.shape[1]
    out = np.empty((n, k))
    inv = 1.0 / (2.0 * h)
    for c in range(k):
        out[0, c] = (-3.0 * field[0, c] + 4.0 * field[1, c] - field[2, c]) * inv
        out[n - 1, c] = (3.0 * field[n - 1, c] - 4.0 * field[n - 2, c] + field[n - 3, c]) * inv
    for i in range(1, n - 1):
        for c in range(k):
            out[i, c] = (field[i + 1, c] - field[i - 1, c]) * inv
    return out


@njit(cache=True)
def compat_rate(strain, velocity, h):
    out = spatial_derivative(velocity, h)
    n = strain.shape[0]
    for i in range(n):
        ux = strain[i, 0]
        uy = strain[i, 1]
        uz = strain[i, 2]
        qx = strain[i, 3]
        qy = strain[i, 4]
        qz = strain[i, 5]
        wx = velocity[i, 0]
        wy = velocity[i, 1]
        wz = velocity[i, 2]
        vx = velocity[i, 3]
        vy = velocity[i, 4]
        vz = velocity[i, 5]
        out[i, 0] += uy * wz - uz * wy
        out[i, 1] += uz * wx - ux * wz
        out[i, 2] += ux * wy - uy * wx
        out[i, 3] += (qy * wz - qz * wy) + (uy * vz - uz * vy)
        out[i, 4] += (qz * wx - qx * wz) + (uz * vx - ux * vz)
        out[i, 5] += (qx * wy - qy * wx) + (ux * vy - uy * vx)
    return out


@njit(cache=True)
def internal_wrench(strain, strain_rate, kdiag, dmat, use_damping, strain_ref, offset, tension):
    n = strain.shape[0]
    phi = np.empty((n, 6))
    for i in range(n):
        for c in range(6):
            phi[i, c] = kdiag[c] * (strain[i, c] - strain_ref[c])
        if use_damping:
            for r in range(6):
                acc = 0.0
                for c in range(6):
                    acc += dmat[r, c] * strain_rate[i, c]
                phi[i, r] = phi[i, r] + acc
    if tension != 0.0:
        dx = offset[0]
        dy = offset[1]
        dz = offset[2]
        for i in range(n):
            ux = strain[i, 0]
            uy = strain[i, 1]
            uz = strain[i, 2]
            tx = strain[i, 3] + uy * dz - uz * dy
            ty = strain[i, 4] + uz * dx - ux * dz
            tz = strain[i, 5] + ux * dy - uy * dx
            nrm = np.sqrt(tx * tx + ty * ty + tz * tz)
            if nrm <= _TANGENT_EPS:
                raise ValueError("tendon tangent is degenerate (section fully collapsed)")
            tx /= nrm
            ty /= nrm
            tz /= nrm
            phi[i, 0] += tension * (dy * tz - dz * ty)
            phi[i, 1] += tension * (dz * tx - dx * tz)
            phi[i, 2] += tension * (dx * ty - dy * tx)
            phi[i, 3] += tension * tx
            phi[i, 4] += tension * ty
            phi[i, 5] += tension * tz
    return phi


@njit(cache=True)
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
    n = strain.shape[0]
    inv = 1.0 / (2.0 * h)
    dstrain = compat_rate(strain, velocity, h)
    phi = internal_wrench(strain, dstrain, kdiag, dmat, use_damping, strain_ref, offset, tension)
    for c in range(6):
        phi[n - 1, c] = phi_tip[c]
    dvel = np.empty((n, 6))
    gx = gravity[0]
    gy = gravity[1]
    gz = gravity[2]
    for i in range(n):
        if i == 0:
            a0 = (-3.0 * phi[0, 0] + 4.0 * phi[1, 0] - phi[2, 0]) * inv
            a1 = (-3.0 * phi[0, 1] + 4.0 * phi[1, 1] - phi[2, 1]) * inv
            a2 = (-3.0 * phi[0, 2] + 4.0 * phi[1, 2] - phi[2, 2]) * inv
            a3 = (-3.0 * phi[0, 3] + 4.0 * phi[1, 3] - phi[2, 3]) * inv
            a4 = (-3.0 * phi[0, 4] + 4.0 * phi[1, 4] - phi[2, 4]) * inv
            a5 = (-3.0 * phi[0, 5] + 4.0 * phi[1, 5] - phi[2, 5]) * inv
        elif i == n - 1:
            a0 = (3.0 * phi[i, 0] - 4.0 * phi[i - 1, 0] + phi[i - 2, 0]) * inv
            a1 = (3.0 * phi[i, 1] - 4.0 * phi[i - 1, 1] + phi[i - 2, 1]) * inv
            a2 = (3.0 * phi[i, 2] - 4.0 * phi[i - 1, 2] + phi[i - 2, 2]) * inv
            a3 = (3.0 * phi[i, 3] - 4.0 * phi[i - 1, 3] + phi[i - 2, 3]) * inv
            a4 = (3.0 * phi[i, 4] - 4.0 * phi[i - 1, 4] + phi[i - 2, 4]) * inv
            a5 = (3.0 * phi[i, 5] - 4.0 * phi[i - 1, 5] + phi[i - 2, 5]) * inv
        else:
            a0 = (phi[i + 1, 0] - phi[i - 1, 0]) * inv
            a1 = (phi[i + 1, 1] - phi[i - 1, 1]) * inv
            a2 = (phi[i + 1, 2] - phi[i - 1, 2]) * inv
            a3 = (phi[i + 1, 3] - phi[i - 1, 3]) * inv
            a4 = (phi[i + 1, 4] - phi[i - 1, 4]) * inv
            a5 = (phi[i + 1, 5] - phi[i - 1, 5]) * inv
        ux = strain[i, 0]
        uy = strain[i, 1]
        uz = strain[i, 2]
        qx = strain[i, 3]
        qy = strain[i, 4]
        qz = strain[i, 5]
        wx = velocity[i, 0]
        wy = velocity[i, 1]
        wz = velocity[i, 2]
        vx = velocity[i, 3]
        vy = velocity[i, 4]
        vz = velocity[i, 5]
        pa0 = phi[i, 0]
        pa1 = phi[i, 1]
        pa2 = phi[i, 2]
        pl0 = phi[i, 3]
        pl1 = phi[i, 4]
        pl2 = phi[i, 5]
        # transport of the internal wrench: -ad_xi^T Phi
        a0 += (uy * pa2 - uz * pa1) + (qy * pl2 - qz * pl1)
        a1 += (uz * pa0 - ux * pa2) + (qz * pl0 - qx * pl2)
        a2 += (ux * pa1 - uy * pa0) + (qx * pl1 - qy * pl0)
        a3 += uy * pl2 - uz * pl1
        a4 += uz * pl0 - ux * pl2
        a5 += ux * pl1 - uy * pl0
        # convective momentum term: +ad_eta^T (J eta)
        m0 = jdiag[0] * wx
        m1 = jdiag[1] * wy
        m2 = jdiag[2] * wz
        l0 = jdiag[3] * vx
        l1 = jdiag[4] * vy
        l2 = jdiag[5] * vz
        a0 -= (wy * m2 - wz * m1) + (vy * l2 - vz * l1)
        a1 -= (wz * m0 - wx * m2) + (vz * l0 - vx * l2)
        a2 -= (wx * m1 - wy * m0) + (vx * l1 - vy * l0)
        a3 -= wy * l2 - wz * l1
        a4 -= wz * l0 - wx * l2
        a5 -= wx * l1 - wy * l0
        # distributed gravity (0, rho A R^T g)
        a3 += rho_a * (poses[i, 0, 0] * gx + poses[i, 1, 0] * gy + poses[i, 2, 0] * gz)
        a4 += rho_a * (poses[i, 0, 1] * gx + poses[i, 1, 1] * gy + poses[i, 2, 1] * gz)
        a5 += rho_a * (poses[i, 0, 2] * gx + poses[i, 1, 2] * gy + poses[i, 2, 2] * gz)
        dvel[i, 0] = a0 / jdiag[0]
        dvel[i, 1] = a1 / jdiag[1]
        dvel[i, 2] = a2 / jdiag[2]
        dvel[i, 3] = a3 / jdiag[3]
        dvel[i, 4] = a4 / jdiag[4]
        dvel[i, 5] = a5 / jdiag[5]
    if clamp_base:
        for c in range(6):
            dvel[0, c] = 0.0
    return dstrain, dvel
