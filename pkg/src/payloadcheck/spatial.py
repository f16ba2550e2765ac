"""Spatial (6D) vector algebra.

Conventions
-----------
* Motion and force vectors are stored angular part first, linear part second.
* A :class:`SpatialTransform` ``X = (E, r)`` maps coordinates expressed in a
  *parent* frame to coordinates expressed in a *child* frame.  ``E`` rotates
  parent coordinates into child coordinates and ``r`` is the position of the
  child origin, written in parent coordinates.  Hence::

      motion:  w' = E w,            v' = E (v - r x w)
      force:   n' = E (n - r x f),  f' = E f

* Rigid-body inertia is stored about the center of mass, together with the
  center of mass position in the owning frame.

Every array argument may carry leading batch dimensions; ``rotate`` and the
cross products act on the trailing axis only.  This keeps per-row arithmetic
identical regardless of how a batch is split, which the sweep code relies on
for thread-count-independent output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ORTHO_TOL = 1e-9


def rotate(R: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``R @ v`` over trailing axes, with a fixed summation order."""
    return R[..., :, 0] * v[..., None, 0] + R[..., :, 1] * v[..., None, 1] + R[..., :, 2] * v[..., None, 2]


def rotate_t(R: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``R.T @ v`` over trailing axes."""
    return R[..., 0, :] * v[..., 0, None] + R[..., 1, :] * v[..., 1, None] + R[..., 2, :] * v[..., 2, None]


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack((a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0), axis=-1)


def skew(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def axis_angle_matrix(axis, angle) -> np.ndarray:
    """Rotation matrix for a rotation of ``angle`` about unit ``axis`` (Rodrigues).

    ``angle`` may be an array; the result then has shape ``angle.shape + (3, 3)``.
    """
    k = np.asarray(axis, dtype=float)
    th = np.asarray(angle, dtype=float)
    c = np.cos(th)[..., None, None]
    s = np.sin(th)[..., None, None]
    K = skew(k)
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def rpy_matrix(rpy) -> np.ndarray:
    """URDF fixed-axis roll/pitch/yaw, i.e. ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    r, p, y = (float(a) for a in rpy)
    cr, sr = np.cos(r), np.sin(r)
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ]
    )


def matrix_rpy(R) -> tuple[float, float, float]:
    """Inverse of :func:`rpy_matrix` (pitch kept in [-pi/2, pi/2])."""
    R = np.asarray(R, dtype=float)
    pitch = float(np.arctan2(-R[2, 0], np.hypot(R[0, 0], R[1, 0])))
    if abs(abs(pitch) - np.pi / 2) < 1e-12:
        yaw = 0.0
        roll = float(np.arctan2(np.sign(pitch) * R[0, 1], R[1, 1]))
    else:
        roll = float(np.arctan2(R[2, 1], R[2, 2]))
        yaw = float(np.arctan2(R[1, 0], R[0, 0]))
    return roll, pitch, yaw


def is_rotation(R, tol: float = ORTHO_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(np.max(np.abs(R.T @ R - np.eye(3))) <= tol and abs(np.linalg.det(R) - 1.0) <= tol)


@dataclass(frozen=True)
class MotionVector:
    angular: np.ndarray
    linear: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate((self.angular, self.linear), axis=-1)


@dataclass(frozen=True)
class ForceVector:
    moment: np.ndarray
    force: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate((self.moment, self.force), axis=-1)


def power(v: MotionVector, f: ForceVector):
    """Scalar pairing ``<v, f>`` (angular . moment + linear . force)."""
    return np.sum(v.angular * f.moment, axis=-1) + np.sum(v.linear * f.force, axis=-1)


@dataclass(frozen=True)
class SpatialTransform:
    rotation: np.ndarray
    translation: np.ndarray

    @staticmethod
    def identity() -> SpatialTransform:
        return SpatialTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_pose(R, p) -> SpatialTransform:
        """Transform into a frame whose orientation is ``R`` and origin ``p`` in the parent."""
        R = np.asarray(R, dtype=float)
        return SpatialTransform(np.swapaxes(R, -1, -2), np.asarray(p, dtype=float))

    @staticmethod
    def translation_only(p) -> SpatialTransform:
        return SpatialTransform(np.eye(3), np.asarray(p, dtype=float))

    def pose(self) -> tuple[np.ndarray, np.ndarray]:
        """Orientation and origin of the child frame, in parent coordinates."""
        return np.swapaxes(self.rotation, -1, -2), self.translation

    def is_valid(self, tol: float = ORTHO_TOL) -> bool:
        return is_rotation(self.rotation, tol) and bool(np.all(np.isfinite(self.translation)))


def compose(a: SpatialTransform, b: SpatialTransform) -> SpatialTransform:
    """Chain ``a`` (frame 0 -> 1) and ``b`` (frame 1 -> 2) into frame 0 -> 2."""
    return SpatialTransform(b.rotation @ a.rotation, a.translation + rotate_t(a.rotation, b.translation))


def invert(x: SpatialTransform) -> SpatialTransform:
    return SpatialTransform(np.swapaxes(x.rotation, -1, -2), -rotate(x.rotation, x.translation))


def transform_motion(x: SpatialTransform, v: MotionVector) -> MotionVector:
    E, r = x.rotation, x.translation
    return MotionVector(rotate(E, v.angular), rotate(E, v.linear - cross(r, v.angular)))


def transform_force(x: SpatialTransform, f: ForceVector) -> ForceVector:
    E, r = x.rotation, x.translation
    return ForceVector(rotate(E, f.moment - cross(r, f.force)), rotate(E, f.force))


def transform_force_inverse(x: SpatialTransform, f: ForceVector) -> ForceVector:
    """Apply ``invert(x)`` to a force: child coordinates back to parent coordinates."""
    E, r = x.rotation, x.translation
    fp = rotate_t(E, f.force)
    return ForceVector(rotate_t(E, f.moment) + cross(r, fp), fp)


@dataclass(frozen=True)
class SpatialInertia:
    mass: float
    com: np.ndarray
    inertia_about_com: np.ndarray

    @staticmethod
    def zero() -> SpatialInertia:
        return SpatialInertia(0.0, np.zeros(3), np.zeros((3, 3)))

    @staticmethod
    def point_mass(mass: float, com=(0.0, 0.0, 0.0)) -> SpatialInertia:
        return SpatialInertia(float(mass), np.asarray(com, dtype=float), np.zeros((3, 3)))

    def inertia_about_origin(self) -> np.ndarray:
        c = self.com
        return self.inertia_about_com + self.mass * (np.dot(c, c) * np.eye(3) - np.outer(c, c))

    def matrix(self) -> np.ndarray:
        """6x6 spatial inertia about the frame origin (angular rows first)."""
        C = skew(self.com)
        out = np.empty((6, 6))
        out[:3, :3] = self.inertia_about_origin()
        out[:3, 3:] = self.mass * C
        out[3:, :3] = -self.mass * C
        out[3:, 3:] = self.mass * np.eye(3)
        return out

    def diagnostics(self) -> list[str]:
        """Invariant violations as human-readable strings (empty when valid)."""
        out = []
        I = np.asarray(self.inertia_about_com, dtype=float)
        if not np.isfinite(self.mass) or self.mass < 0:
            out.append(f"negative or non-finite mass {self.mass}")
        if not (np.all(np.isfinite(I)) and np.all(np.isfinite(self.com))):
            out.append("non-finite inertia or com")
            return out
        if np.max(np.abs(I - I.T)) > 1e-12:
            out.append("inertia not symmetric")
        eig = np.linalg.eigvalsh(0.5 * (I + I.T))
        if eig[0] < -1e-12:
            out.append(f"inertia not positive semidefinite (min eigenvalue {eig[0]:.3g})")
        elif self.mass > 0:
            a, b, c = eig
            if a + b < c - 1e-9:
                out.append("principal moments violate the triangle inequality")
        return out


def shift_inertia(i: SpatialInertia, displacement) -> SpatialInertia:
    """Re-express ``i`` in a frame where the current frame's origin sits at ``displacement``.

    The body does not move; only its center-of-mass coordinates change
    (``com + displacement``).  Combine with :meth:`SpatialInertia.inertia_about_origin`
    to obtain the parallel-axis inertia about the new origin.
    """
    return SpatialInertia(i.mass, i.com + np.asarray(displacement, dtype=float), i.inertia_about_com)


def rotate_inertia(i: SpatialInertia, R) -> SpatialInertia:
    """Re-express ``i`` in a frame rotated by ``R`` (new coords = ``R @`` old coords)."""
    R = np.asarray(R, dtype=float)
    return SpatialInertia(i.mass, R @ i.com, R @ i.inertia_about_com @ R.T)


def compose_inertia(a: SpatialInertia, b: SpatialInertia) -> SpatialInertia:
    m = a.mass + b.mass
    if m == 0.0:
        return SpatialInertia(0.0, np.zeros(3), a.inertia_about_com + b.inertia_about_com)
    if b.mass == 0.0 and not np.any(b.inertia_about_com):
        return a
    if a.mass == 0.0 and not np.any(a.inertia_about_com):
        return b
    c = (a.mass * a.com + b.mass * b.com) / m
    I = np.zeros((3, 3))
    for body in (a, b):
        d = body.com - c
        I = I + body.inertia_about_com + body.mass * (np.dot(d, d) * np.eye(3) - np.outer(d, d))
    return SpatialInertia(m, c, 0.5 * (I + I.T))
