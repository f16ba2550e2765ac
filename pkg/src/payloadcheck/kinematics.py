"""Forward kinematics, geometric Jacobian and damped-least-squares IK.

The inner loops (chain product, Jacobian, DLS iteration) are jitted with
numba; the Python functions below are thin wrappers that validate inputs
and translate failures into exceptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from payloadcheck.errors import DimensionMismatch, JointLimitHit, NoConvergence, SingularityStall
from payloadcheck.model import JointKind, RobotModel


@dataclass(frozen=True)
class EePose:
    rotation: np.ndarray
    position: np.ndarray


@dataclass(frozen=True)
class FkResult:
    """Base-frame poses of every link plus the end-effector.

    ``axes``/``origins`` hold the world-frame axis and origin of each actuated
    joint, in coordinate order.
    """

    link_rotations: np.ndarray  # (L, 3, 3)
    link_positions: np.ndarray  # (L, 3)
    axes: np.ndarray  # (n, 3)
    origins: np.ndarray  # (n, 3)
    ee: EePose


@dataclass(frozen=True)
class IkParams:
    damping: float = 1e-2
    max_iters: int = 200
    pos_tol: float = 1e-4
    rot_tol: float = 1e-3
    # largest joint-space step per iteration (rad or m); keeps far targets from overshooting
    max_step: float = 0.5


def _check_q(model: RobotModel, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (model.dof,):
        raise DimensionMismatch(f"expected {model.dof} joint values, got shape {q.shape}")
    return q


_KIND_CODE = {JointKind.REVOLUTE: 0, JointKind.PRISMATIC: 1, JointKind.FIXED: 2}


def _plan(model: RobotModel):
    """Packed per-joint constants for the kernels, cached on the (immutable) model."""
    plan = model.__dict__.get("_kinematic_plan")
    if plan is None:
        poses = [j.origin.pose() for j in model.joints]
        Re, pe = model.ee_offset.pose()
        nj = len(model.joints)
        plan = (
            np.array([_KIND_CODE[j.kind] for j in model.joints], dtype=np.int64),
            np.array([R for R, _ in poses], dtype=float).reshape(nj, 3, 3),
            np.array([p for _, p in poses], dtype=float).reshape(nj, 3),
            np.array([j.axis for j in model.joints], dtype=float).reshape(nj, 3),
            np.ascontiguousarray(Re, dtype=float),
            np.ascontiguousarray(pe, dtype=float),
        )
        model.__dict__["_kinematic_plan"] = plan
    return plan


# ------------------------------------------------------------------ kernels


@numba.njit(cache=True, nogil=True)
def _mm(A, B):
    C = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            C[i, j] = A[i, 0] * B[0, j] + A[i, 1] * B[1, j] + A[i, 2] * B[2, j]
    return C


@numba.njit(cache=True, nogil=True)
def _mv(A, v):
    out = np.empty(3)
    for i in range(3):
        out[i] = A[i, 0] * v[0] + A[i, 1] * v[1] + A[i, 2] * v[2]
    return out


@numba.njit(cache=True, nogil=True)
def _axis_rot(k, th):
    cs = np.cos(th)
    sn = np.sin(th)
    t = 1.0 - cs
    R = np.empty((3, 3))
    R[0, 0] = cs + t * k[0] * k[0]
    R[0, 1] = t * k[0] * k[1] - sn * k[2]
    R[0, 2] = t * k[0] * k[2] + sn * k[1]
    R[1, 0] = t * k[0] * k[1] + sn * k[2]
    R[1, 1] = cs + t * k[1] * k[1]
    R[1, 2] = t * k[1] * k[2] - sn * k[0]
    R[2, 0] = t * k[0] * k[2] - sn * k[1]
    R[2, 1] = t * k[1] * k[2] + sn * k[0]
    R[2, 2] = cs + t * k[2] * k[2]
    return R


@numba.njit(cache=True, nogil=True)
def _fk_kernel(kinds, Ro, po, ax, Re, pe, q):
    nj = kinds.shape[0]
    n = q.shape[0]
    Rs = np.zeros((nj + 1, 3, 3))
    ps = np.zeros((nj + 1, 3))
    axes = np.zeros((n, 3))
    origins = np.zeros((n, 3))
    R = np.eye(3)
    p = np.zeros(3)
    Rs[0] = R
    c = 0
    for j in range(nj):
        p = p + _mv(R, po[j])
        R = _mm(R, Ro[j])
        k = ax[j]
        if kinds[j] == 0:
            axes[c] = _mv(R, k)
            origins[c] = p
            R = _mm(R, _axis_rot(k, q[c]))
            c += 1
        elif kinds[j] == 1:
            axes[c] = _mv(R, k)
            origins[c] = p
            p = p + _mv(R, k * q[c])
            c += 1
        Rs[j + 1] = R
        ps[j + 1] = p
    return Rs, ps, axes, origins, _mm(R, Re), p + _mv(R, pe)


@numba.njit(cache=True, nogil=True)
def _jac_kernel(kinds, axes, origins, p_ee):
    n = axes.shape[0]
    J = np.zeros((6, n))
    c = 0
    for j in range(kinds.shape[0]):
        if kinds[j] == 2:
            continue
        a = axes[c]
        if kinds[j] == 0:
            r = p_ee - origins[c]
            J[0, c] = a[0]
            J[1, c] = a[1]
            J[2, c] = a[2]
            J[3, c] = a[1] * r[2] - a[2] * r[1]
            J[4, c] = a[2] * r[0] - a[0] * r[2]
            J[5, c] = a[0] * r[1] - a[1] * r[0]
        else:
            J[3, c] = a[0]
            J[4, c] = a[1]
            J[5, c] = a[2]
        c += 1
    return J


@numba.njit(cache=True, nogil=True)
def _rot_log(R):
    cos = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    cos = min(1.0, max(-1.0, cos))
    th = np.arccos(cos)
    w = np.empty(3)
    w[0] = R[2, 1] - R[1, 2]
    w[1] = R[0, 2] - R[2, 0]
    w[2] = R[1, 0] - R[0, 1]
    if th < 1e-6:
        return 0.5 * w
    if np.pi - th > 1e-4:
        return (th / (2.0 * np.sin(th))) * w
    # near a half turn: axis from the symmetric part, sign from the skew part
    B = 0.5 * (R + R.T) - cos * np.eye(3)
    i = 0
    for j in range(1, 3):
        if B[j, j] > B[i, i]:
            i = j
    k = B[i] / np.sqrt(max(B[i, i], 1e-300))
    k = k / np.sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
    if k[0] * w[0] + k[1] * w[1] + k[2] * w[2] < 0:
        k = -k
    return th * k


@numba.njit(cache=True, nogil=True)
def _residual(kinds, Ro, po, ax, Re, pe, q, R_t, p_t):
    _, _, axes, origins, Rc, pc = _fk_kernel(kinds, Ro, po, ax, Re, pe, q)
    e = np.empty(6)
    e[:3] = _rot_log(_mm(R_t, Rc.T))
    e[3:] = p_t - pc
    return e, _jac_kernel(kinds, axes, origins, pc), pc


@numba.njit(cache=True, nogil=True)
def _dls(J, e, damping):
    A = J @ J.T
    for i in range(6):
        A[i, i] += damping * damping
    return J.T @ np.linalg.solve(A, e)


@numba.njit(cache=True, nogil=True)
def _ik_kernel(kinds, Ro, po, ax, Re, pe, q0, lo, hi, R_t, p_t, damping, max_iters, pos_tol, rot_tol, max_step):
    q = q0.copy()
    for it in range(max_iters + 1):
        e, J, _ = _residual(kinds, Ro, po, ax, Re, pe, q, R_t, p_t)
        pos_err = np.sqrt(e[3] ** 2 + e[4] ** 2 + e[5] ** 2)
        rot_err = np.sqrt(e[0] ** 2 + e[1] ** 2 + e[2] ** 2)
        if pos_err < pos_tol and rot_err < rot_tol:
            inside = True
            for i in range(q.shape[0]):
                if q[i] < lo[i] or q[i] > hi[i]:
                    inside = False
            if inside:
                return q, True, pos_err, rot_err
        if it == max_iters:
            return q, False, pos_err, rot_err
        dq = _dls(J, e, damping)
        step = np.max(np.abs(dq))
        if step > max_step:
            dq = dq * (max_step / step)
        q = np.minimum(np.maximum(q + dq, lo), hi)
    return q, False, 0.0, 0.0


@numba.njit(cache=True, nogil=True)
def _track_kernel(kinds, Ro, po, ax, Re, pe, q0, R_t, p_t, damping, tol, iters):
    q = q0.copy()
    for _ in range(iters):
        e, J, pc = _residual(kinds, Ro, po, ax, Re, pe, q, R_t, p_t)
        if np.max(np.abs(e)) < tol:
            return q, pc
        q = q + _dls(J, e, damping)
    _, _, _, _, _, pc = _fk_kernel(kinds, Ro, po, ax, Re, pe, q)
    return q, pc


# --------------------------------------------------------------- public API


def forward_kinematics(model: RobotModel, q) -> FkResult:
    q = np.ascontiguousarray(_check_q(model, q))
    Rs, ps, axes, origins, Ree, pee = _fk_kernel(*_plan(model), q)
    return FkResult(Rs, ps, axes, origins, EePose(Ree, pee))


def ee_pose(model: RobotModel, q) -> EePose:
    return forward_kinematics(model, q).ee


def geometric_jacobian(model: RobotModel, q) -> np.ndarray:
    """6 x n Jacobian at the end-effector origin, angular rows first, base frame."""
    fk = forward_kinematics(model, q)
    return _jac_kernel(_plan(model)[0], fk.axes, fk.origins, fk.ee.position)


def rotation_log(R) -> np.ndarray:
    """Axis-angle vector of rotation matrix ``R``."""
    return _rot_log(np.ascontiguousarray(R, dtype=float))


def orientation_error(R_target, R_current) -> np.ndarray:
    """Axis-angle vector of ``R_target @ R_current.T`` (base frame)."""
    return rotation_log(np.asarray(R_target) @ np.asarray(R_current).T)


def solve_ik(model: RobotModel, target: EePose, seed, params: IkParams = IkParams()) -> np.ndarray:
    """Damped least squares from ``seed``, clamping to position limits each iteration.

    Raises :class:`NoConvergence` when ``params.max_iters`` runs out.
    """
    q0 = np.ascontiguousarray(_check_q(model, seed))
    q, ok, pos_err, rot_err = _ik_kernel(
        *_plan(model),
        q0,
        model.lower_limits,
        model.upper_limits,
        np.ascontiguousarray(target.rotation, dtype=float),
        np.ascontiguousarray(target.position, dtype=float),
        float(params.damping),
        int(params.max_iters),
        float(params.pos_tol),
        float(params.rot_tol),
        float(params.max_step),
    )
    if not ok:
        raise NoConvergence(
            f"IK did not converge in {params.max_iters} iterations "
            f"(pos err {pos_err:.3g} m, rot err {rot_err:.3g} rad)"
        )
    return q


def resolved_rate_path(
    model: RobotModel,
    start_q,
    direction,
    distance: float,
    speed: float,
    dt: float,
    damping: float = 1e-2,
) -> np.ndarray:
    """Joint configurations moving the end effector in a straight line.

    Each step tracks the next point of the constant-speed line
    ``p0 + direction * min(k * speed * dt, distance)`` with the start
    orientation held, using closed-loop damped least-squares corrections
    so integration error does not accumulate.  Returns a ``(K + 1, n)``
    array starting with ``start_q``.
    """
    q = np.ascontiguousarray(_check_q(model, start_q)).copy()
    direction = np.asarray(direction, dtype=float)
    if not (speed > 0 and dt > 0):
        raise ValueError("speed and dt must be positive")
    if distance < 0:
        raise ValueError("distance must be non-negative")
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    if distance == 0:
        return q[None, :].copy()
    plan = _plan(model)
    lo, hi = model.lower_limits, model.upper_limits
    fk0 = forward_kinematics(model, q)
    p0, R0 = fk0.ee.position, np.ascontiguousarray(fk0.ee.rotation)
    n_steps = max(1, math.ceil(distance / (speed * dt) - 1e-9))
    path = np.empty((n_steps + 1, model.dof))
    path[0] = q
    prev_s = 0.0
    stalled = 0
    for k in range(1, n_steps + 1):
        p_t = p0 + direction * min(k * speed * dt, distance)
        q, pc = _track_kernel(*plan, q, R0, p_t, float(damping), 1e-10, 8)
        if np.any(q < lo) or np.any(q > hi):
            bad = int(np.argmax((q < lo) | (q > hi)))
            raise JointLimitHit(f"joint {bad} leaves its position limits at step {k}")
        s = float(np.dot(pc - p0, direction))
        if s - prev_s < 1e-6:
            stalled += 1
            if stalled >= 10:
                raise SingularityStall(f"end effector stopped advancing near step {k}")
        else:
            stalled = 0
        prev_s = s
        path[k] = q
    return path
