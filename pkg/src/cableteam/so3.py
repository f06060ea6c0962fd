"""Rotation-group and linear-algebra primitives shared by every module.

Conventions used throughout the package:

* rotation matrices map body coordinates into world coordinates,
* Euler angles follow the ZYX convention and are stored as (yaw, pitch, roll),
* ``hat(a) @ b == np.cross(a, b)`` for all 3-vectors.

Batched variants (``*_batch``) operate on stacks of inputs and exist so the
sigma-point filter can propagate all points in one shot.
"""
from __future__ import annotations

import numpy as np

EPS_SMALL_ANGLE = 1e-8


class GimbalLock(ValueError):
    """Pitch too close to +-pi/2 for a unique ZYX decomposition."""


class SingularConfiguration(ValueError):
    """Tension map has lost row rank (e.g. collinear attach points)."""


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product over trailing axis; much cheaper than np.cross for the
    small stacks used in the control loop."""
    out = np.empty(np.broadcast(a, b).shape)
    out[..., 0] = a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1]
    out[..., 1] = a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2]
    out[..., 2] = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    return out


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix of a 3-vector, hat(v) @ b = v x b."""
    x, y, z = v
    return np.array([[0.0, -z, y],
                     [z, 0.0, -x],
                     [-y, x, 0.0]])


def vee(m: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Inverse of :func:`hat`. Rejects matrices that are not skew within tol."""
    if np.max(np.abs(m + m.T)) >= tol:
        raise ValueError("vee expects a skew-symmetric matrix")
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def so3_exp(a: np.ndarray) -> np.ndarray:
    """Rodrigues formula; second-order Taylor branch below EPS_SMALL_ANGLE."""
    angle = float(np.linalg.norm(a))
    k = hat(a)
    if angle < EPS_SMALL_ANGLE:
        return np.eye(3) + k + 0.5 * (k @ k)
    s = np.sin(angle) / angle
    c = (1.0 - np.cos(angle)) / (angle * angle)
    return np.eye(3) + s * k + c * (k @ k)


def so3_log(r: np.ndarray) -> np.ndarray:
    """Axis-angle of a rotation via the trace formula (angle in [0, pi))."""
    cos_angle = np.clip(0.5 * (np.trace(r) - 1.0), -1.0, 1.0)
    angle = float(np.arccos(cos_angle))
    w = 0.5 * np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    if angle < EPS_SMALL_ANGLE:
        return w
    if np.pi - angle < 1e-6:
        # Near pi the off-diagonal difference vanishes; recover the axis from
        # the dominant diagonal entry instead.
        diag = np.diag(r)
        i = int(np.argmax(diag))
        axis = np.zeros(3)
        axis[i] = np.sqrt(max(0.0, (diag[i] + 1.0) * 0.5))
        j, k = (i + 1) % 3, (i + 2) % 3
        axis[j] = r[i, j] / (2.0 * axis[i])
        axis[k] = r[i, k] / (2.0 * axis[i])
        if np.dot(axis, w) < 0.0:
            axis = -axis
        return angle * axis
    return (angle / np.sin(angle)) * w


def wrap_angle(a):
    """Wrap angles to (-pi, pi]; values already in range pass through exactly."""
    a = np.asarray(a, dtype=float)
    needs = (a > np.pi) | (a <= -np.pi)
    return np.where(needs, np.pi - np.mod(np.pi - a, 2.0 * np.pi), a)


def euler_zyx_to_rot(e: np.ndarray) -> np.ndarray:
    """Rotation from ZYX Euler angles stored as (yaw, pitch, roll)."""
    cy, sy = np.cos(e[0]), np.sin(e[0])
    cp, sp = np.cos(e[1]), np.sin(e[1])
    cr, sr = np.cos(e[2]), np.sin(e[2])
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def rot_to_euler_zyx(r: np.ndarray) -> np.ndarray:
    """ZYX Euler angles (yaw, pitch, roll). Raises GimbalLock near pitch +-pi/2."""
    sp = -r[2, 0]
    if abs(sp) >= 1.0 - 1e-9:
        raise GimbalLock("pitch within tolerance of +-pi/2")
    return np.array([
        np.arctan2(r[1, 0], r[0, 0]),
        np.arcsin(sp),
        np.arctan2(r[2, 1], r[2, 2]),
    ])


def euler_zyx_rates_to_omega(e: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Body angular velocity from ZYX Euler angles and their time derivatives.

    Both arguments are ordered (yaw, pitch, roll).
    """
    yd, pd, rd = rates
    cp, sp = np.cos(e[1]), np.sin(e[1])
    cr, sr = np.cos(e[2]), np.sin(e[2])
    return np.array([
        rd - yd * sp,
        pd * cr + yd * cp * sr,
        yd * cp * cr - pd * sr,
    ])


def pinv_full_row(p: np.ndarray) -> np.ndarray:
    """Minimum-norm right inverse P^T (P P^T)^{-1} of a full-row-rank matrix.

    Solves the 6x6 normal system by Cholesky when well conditioned and falls
    back to an SVD-based solve otherwise.
    """
    ppt = p @ p.T
    try:
        chol = np.linalg.cholesky(ppt)
        d = np.diagonal(chol)
        if (np.max(d) / np.min(d)) ** 2 < 1e12:
            y = np.linalg.solve(chol, p)
            return np.linalg.solve(chol.T, y).T
    except np.linalg.LinAlgError:
        pass
    u, s, vt = np.linalg.svd(ppt)
    if s[-1] < 1e-12 * s[0]:
        raise SingularConfiguration("tension map P P^T is numerically singular")
    return p.T @ (vt.T @ ((u.T / s[:, None])))


def nullspace_basis(p: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the null space of a 6 x 3n full-row-rank matrix.

    Uses an SVD with rank cutoff sigma < 1e-9 * sigma_max; the returned basis
    has exactly 3n - 6 columns.
    """
    rows, cols = p.shape
    _, s, vt = np.linalg.svd(p)
    if np.sum(s > 1e-9 * s[0]) < rows:
        raise SingularConfiguration("tension map is rank deficient")
    return vt[rows:].T


def project_rotation(r: np.ndarray) -> np.ndarray:
    """Closest rotation matrix (polar factor) to an almost-orthonormal matrix."""
    u, _, vt = np.linalg.svd(r)
    out = u @ vt
    if np.linalg.det(out) < 0.0:
        u[:, -1] = -u[:, -1]
        out = u @ vt
    return out


def renormalize_rotations(rs: np.ndarray, iterations: int = 2) -> np.ndarray:
    """Pull nearly-orthonormal matrices back onto SO(3).

    Newton iteration for the polar factor, R <- R (3 I - R^T R) / 2; valid for
    small drift (the per-step integration residue), batched over leading axes.
    """
    out = rs
    eye = np.eye(3)
    for _ in range(iterations):
        rtr = np.einsum("...ji,...jk->...ik", out, out)
        out = 0.5 * np.einsum("...ij,...jk->...ik", out, 3.0 * eye - rtr)
    return out


def is_rotation(r: np.ndarray, tol: float = 1e-9) -> bool:
    return (np.max(np.abs(r.T @ r - np.eye(3))) < tol
            and abs(np.linalg.det(r) - 1.0) < tol)


# Batched helpers for sigma-point propagation.

def hat_batch(v: np.ndarray) -> np.ndarray:
    """(N,3) -> (N,3,3) skew matrices."""
    n = v.shape[0]
    out = np.zeros((n, 3, 3))
    out[:, 0, 1] = -v[:, 2]
    out[:, 0, 2] = v[:, 1]
    out[:, 1, 0] = v[:, 2]
    out[:, 1, 2] = -v[:, 0]
    out[:, 2, 0] = -v[:, 1]
    out[:, 2, 1] = v[:, 0]
    return out


def so3_exp_batch(a: np.ndarray) -> np.ndarray:
    """(N,3) axis-angle -> (N,3,3) rotations, small-angle safe."""
    angle = np.linalg.norm(a, axis=1)
    k = hat_batch(a)
    k2 = k @ k
    small = angle < EPS_SMALL_ANGLE
    ang_safe = np.where(small, 1.0, angle)
    s = np.where(small, 1.0, np.sin(ang_safe) / ang_safe)
    c = np.where(small, 0.5, (1.0 - np.cos(ang_safe)) / (ang_safe * ang_safe))
    return np.eye(3) + s[:, None, None] * k + c[:, None, None] * k2


def euler_zyx_to_rot_batch(e: np.ndarray) -> np.ndarray:
    """(N,3) Euler (yaw, pitch, roll) -> (N,3,3)."""
    cy, sy = np.cos(e[:, 0]), np.sin(e[:, 0])
    cp, sp = np.cos(e[:, 1]), np.sin(e[:, 1])
    cr, sr = np.cos(e[:, 2]), np.sin(e[:, 2])
    out = np.empty((e.shape[0], 3, 3))
    out[:, 0, 0] = cy * cp
    out[:, 0, 1] = cy * sp * sr - sy * cr
    out[:, 0, 2] = cy * sp * cr + sy * sr
    out[:, 1, 0] = sy * cp
    out[:, 1, 1] = sy * sp * sr + cy * cr
    out[:, 1, 2] = sy * sp * cr - cy * sr
    out[:, 2, 0] = -sp
    out[:, 2, 1] = cp * sr
    out[:, 2, 2] = cp * cr
    return out


def rot_to_euler_zyx_batch(r: np.ndarray) -> tuple[np.ndarray, bool]:
    """(N,3,3) -> (N,3) Euler angles plus a flag for gimbal-adjacent inputs.

    Unlike the scalar version this clamps instead of raising: a sigma point
    grazing the singularity must not abort the filter, only get flagged.
    """
    sp = np.clip(-r[:, 2, 0], -1.0, 1.0)
    near = bool(np.any(np.abs(sp) > 1.0 - 1e-9))
    out = np.empty((r.shape[0], 3))
    out[:, 0] = np.arctan2(r[:, 1, 0], r[:, 0, 0])
    out[:, 1] = np.arcsin(sp)
    out[:, 2] = np.arctan2(r[:, 2, 1], r[:, 2, 2])
    return out, near
