"""Rotation representations and the closed-form alignment solvers.

Rotations live in two forms: 3x3 proper orthogonal matrices and axis-angle
3-vectors (radians * unit axis). Degrees appear only at the BVH boundary.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial.transform import Rotation as _ScipyRotation

from .errors import ValidationError

# series switch-over for sin(a)/a style terms
_TINY_ANGLE = 1e-8
_TINY_VECTOR = 1e-9

EULER_ORDERS = ("XYZ", "XZY", "YXZ", "YZX", "ZXY", "ZYX")


def skew(v):
    """Cross-product matrix [v]_x so that skew(v) @ w == cross(v, w)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def axis_angle_to_matrix(theta):
    """Rodrigues formula, series-safe near zero angle."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise ValidationError("axis-angle vector must be finite")
    a2 = float(theta @ theta)
    a = np.sqrt(a2)
    K = skew(theta)
    if a < _TINY_ANGLE:
        # sin(a)/a -> 1 - a^2/6, (1-cos a)/a^2 -> 1/2 - a^2/24
        s = 1.0 - a2 / 6.0
        c = 0.5 - a2 / 24.0
    else:
        s = np.sin(a) / a
        c = (1.0 - np.cos(a)) / a2
    return np.eye(3) + s * K + c * (K @ K)


def is_rotation_matrix(R, atol=1e-6):
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    if not np.allclose(R.T @ R, np.eye(3), atol=atol):
        return False
    return np.linalg.det(R) > 0.0


def matrix_to_axis_angle(R, validate=True):
    """Canonical axis-angle of a rotation matrix, with ||theta|| in [0, pi].

    Near-pi extraction uses the dominant column of (R + I)/2; the axis sign
    tie-break makes the first nonzero component positive. validate=False
    skips the orthonormality check for inputs already known to be rotations.
    """
    R = np.asarray(R, dtype=float)
    if validate and not is_rotation_matrix(R):
        raise ValidationError("input is not a rotation matrix")
    cos_a = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    angle = np.arccos(cos_a)
    vee = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if angle < _TINY_ANGLE:
        return vee  # first-order: vee(R - R^T)/2 ~ theta
    if np.pi - angle < 1e-6:
        # R ~ 2*a a^T - I, so (R + I)/2 ~ a a^T; its strongest column is ~ a_k * a
        B = (R + np.eye(3)) / 2.0
        k = int(np.argmax(np.diag(B)))
        axis = B[:, k]
        n = np.linalg.norm(axis)
        if n < _TINY_VECTOR:
            raise ValidationError("degenerate near-pi rotation matrix")
        axis = axis / n
        for comp in axis:
            if abs(comp) > 1e-12:
                if comp < 0.0:
                    axis = -axis
                break
        # keep the sign consistent with the skew part when it is informative
        s = float(vee @ axis)
        if abs(s) > 1e-9 and s < 0.0:
            axis = -axis
        return angle * axis
    axis = vee / np.sin(angle)
    n = np.linalg.norm(axis)
    return angle * axis / n


def canonicalize_axis_angle(theta):
    """Wrap the angle into [0, pi] by axis flip; collapse tiny angles to zero."""
    theta = np.asarray(theta, dtype=float)
    a = float(np.linalg.norm(theta))
    if a < 1e-12:
        return np.zeros(3)
    axis = theta / a
    a = np.fmod(a, 2.0 * np.pi)
    if a < 0.0:
        a += 2.0 * np.pi
    if a > np.pi:
        a = 2.0 * np.pi - a
        axis = -axis
    if a < 1e-12:
        return np.zeros(3)
    return a * axis


def _perpendicular(a):
    # cross with the standard basis vector of least |component|: deterministic
    k = int(np.argmin(np.abs(a)))
    e = np.zeros(3)
    e[k] = 1.0
    p = np.cross(a, e)
    return p / np.linalg.norm(p)


def rotation_between_vectors(a, b):
    """Minimal-angle rotation mapping direction a onto direction b.

    Antiparallel inputs rotate by pi about a deterministic perpendicular axis.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < _TINY_VECTOR or nb < _TINY_VECTOR:
        raise ValidationError("rotation_between_vectors: near-zero input vector")
    ah = a / na
    bh = b / nb
    c = float(np.clip(ah @ bh, -1.0, 1.0))
    axis = np.cross(ah, bh)
    n = np.linalg.norm(axis)
    if c < -1.0 + 1e-12 or (n < 1e-12 and c < 0.0):
        return axis_angle_to_matrix(np.pi * _perpendicular(ah))
    if n < 1e-12:
        return np.eye(3)
    angle = np.arccos(c)
    return axis_angle_to_matrix(angle * axis / n)


def orthogonal_procrustes(rest_dirs, obs_dirs, weights=None):
    """Best proper rotation mapping rest directions onto observed directions.

    Minimizes sum_k w_k ||R v_rest_k - v_obs_k||^2 over SO(3) via SVD of the
    cross-covariance with determinant-sign correction (never a reflection).
    Returns (R, degenerate) where degenerate flags an all-zero covariance
    (identity returned in that case).
    """
    rest = np.atleast_2d(np.asarray(rest_dirs, dtype=float))
    obs = np.atleast_2d(np.asarray(obs_dirs, dtype=float))
    if rest.shape != obs.shape or rest.shape[0] < 1 or rest.shape[1] != 3:
        raise ValidationError("orthogonal_procrustes: direction lists must match, Kx3")
    if weights is None:
        w = np.ones(rest.shape[0])
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (rest.shape[0],) or np.any(w < 0.0):
            raise ValidationError("orthogonal_procrustes: bad weights")
    if rest.shape[0] == 1:
        # single pair degenerates to minimal-angle alignment
        return rotation_between_vectors(rest[0], obs[0]), False
    H = (obs * w[:, None]).T @ rest  # maps rest-frame onto obs-frame
    if np.linalg.norm(H) < 1e-12:
        return np.eye(3), True
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(U @ Vt))
    if d == 0.0:
        d = 1.0
    D = np.diag([1.0, 1.0, d])
    return U @ D @ Vt, False


def _elementary(axis, angle):
    c, s = np.cos(angle), np.sin(angle)
    if axis == "X":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=float)
    if axis == "Y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=float)
    if axis == "Z":
        return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=float)
    raise ValidationError(f"unknown rotation axis {axis!r}")


def euler_to_matrix(angles, order):
    """Intrinsic Euler angles (radians, in channel order) to a matrix.

    order is one of the six 3-letter axis strings; the matrix is the product
    of the elementary rotations in the order written (BVH channel semantics).
    """
    order = order.upper()
    if order not in EULER_ORDERS:
        raise ValidationError(f"unsupported Euler order {order!r}")
    angles = np.asarray(angles, dtype=float)
    R = np.eye(3)
    for axis, ang in zip(order, angles):
        R = R @ _elementary(axis, float(ang))
    return R


def matrix_to_euler(R, order):
    """Inverse of euler_to_matrix; at gimbal lock scipy's tie-break applies."""
    order = order.upper()
    if order not in EULER_ORDERS:
        raise ValidationError(f"unsupported Euler order {order!r}")
    if not is_rotation_matrix(R):
        raise ValidationError("input is not a rotation matrix")
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # gimbal-lock warning; tie-break documented
        return _ScipyRotation.from_matrix(np.asarray(R, dtype=float)).as_euler(order)


def batch_axis_angle_to_matrix(thetas):
    """Rodrigues formula for an (N, 3) stack of axis-angle vectors."""
    thetas = np.asarray(thetas, dtype=float)
    n = thetas.shape[0]
    a2 = np.einsum("ic,ic->i", thetas, thetas)
    a = np.sqrt(a2)
    K = np.zeros((n, 3, 3))
    K[:, 0, 1] = -thetas[:, 2]
    K[:, 0, 2] = thetas[:, 1]
    K[:, 1, 0] = thetas[:, 2]
    K[:, 1, 2] = -thetas[:, 0]
    K[:, 2, 0] = -thetas[:, 1]
    K[:, 2, 1] = thetas[:, 0]
    small = a < _TINY_ANGLE
    s = np.empty(n)
    c = np.empty(n)
    s[small] = 1.0 - a2[small] / 6.0
    c[small] = 0.5 - a2[small] / 24.0
    if np.any(~small):
        s[~small] = np.sin(a[~small]) / a[~small]
        c[~small] = (1.0 - np.cos(a[~small])) / a2[~small]
    return np.eye(3) + s[:, None, None] * K + c[:, None, None] * (K @ K)


def batch_axis_angle_jacobian(thetas):
    """d(Rodrigues)/d(theta) for an (N, 3) stack; result (N, 3, 3, 3)."""
    thetas = np.asarray(thetas, dtype=float)
    n = thetas.shape[0]
    a2 = np.einsum("ic,ic->i", thetas, thetas)
    R = batch_axis_angle_to_matrix(thetas)
    K = np.zeros((n, 3, 3))
    K[:, 0, 1] = -thetas[:, 2]
    K[:, 0, 2] = thetas[:, 1]
    K[:, 1, 0] = thetas[:, 2]
    K[:, 1, 2] = -thetas[:, 0]
    K[:, 2, 0] = -thetas[:, 1]
    K[:, 2, 1] = thetas[:, 0]
    # v_a = theta_a theta + theta x ((I - R) e_a); the cross products for all
    # three axes are the columns of K (I - R)
    cross_cols = K @ (np.eye(3) - R)  # (n, c, a)
    v = thetas[:, :, None] * thetas[:, None, :]  # v[i, a, c] = theta_a theta_c
    v = v + cross_cols.transpose(0, 2, 1)
    V = np.zeros((n, 3, 3, 3))  # skew(v_a) per axis
    V[:, :, 0, 1] = -v[:, :, 2]
    V[:, :, 0, 2] = v[:, :, 1]
    V[:, :, 1, 0] = v[:, :, 2]
    V[:, :, 1, 2] = -v[:, :, 0]
    V[:, :, 2, 0] = -v[:, :, 1]
    V[:, :, 2, 1] = v[:, :, 0]
    small = a2 < 1e-14
    scale = 1.0 / np.where(small, 1.0, a2)
    J = np.einsum("i,iacd,ide->iace", scale, V, R)
    if np.any(small):
        limit = np.stack([skew(e) for e in np.eye(3)])  # [e_a]_x
        J[small] = limit
    return J


def axis_angle_jacobian(theta):
    """d(Rodrigues matrix)/d(theta) as a (3, 3, 3) array, J[a] = dR/dtheta_a.

    Uses the closed form d R/d theta_a =
    ((theta_a [theta]_x + [theta x ((I - R) e_a)]_x) / ||theta||^2) R,
    with the small-angle limit [e_a]_x.
    """
    theta = np.asarray(theta, dtype=float)
    a2 = float(theta @ theta)
    J = np.empty((3, 3, 3))
    if a2 < 1e-14:
        for a in range(3):
            e = np.zeros(3)
            e[a] = 1.0
            J[a] = skew(e)
        return J
    R = axis_angle_to_matrix(theta)
    I = np.eye(3)
    for a in range(3):
        e = I[a]
        v = theta[a] * theta + np.cross(theta, (I - R) @ e)
        J[a] = (skew(v) / a2) @ R
    return J
