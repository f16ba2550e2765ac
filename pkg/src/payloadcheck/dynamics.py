"""Recursive Newton-Euler inverse dynamics.

All quantities live in link-local coordinates as spatial (angular, linear)
pairs, with the transform convention of :mod:`payloadcheck.spatial`.
Gravity enters as a fictitious upward acceleration of the base, so neither
recursion carries a separate gravity term.

Inputs may be a single state (shape ``(n,)``) or a batch (shape ``(N, n)``).
The jitted kernel handles one waypoint at a time with a fixed operation
order, so a batch result never depends on how the batch was split.
"""

from __future__ import annotations

import numba
import numpy as np

from payloadcheck.errors import DimensionMismatch, NonFiniteInput
from payloadcheck.model import JointKind, RobotModel

# waypoints per block when callers fan out over threads
CHUNK = 16384

_KIND_CODE = {JointKind.REVOLUTE: 0, JointKind.PRISMATIC: 1, JointKind.FIXED: 2}


def _plan(model: RobotModel):
    """Packed chain constants, cached on the (immutable) model."""
    plan = model.__dict__.get("_dynamics_plan")
    if plan is None:
        joints = model.joints
        nj = len(joints)
        cols = np.full(nj, -1, dtype=np.int64)
        for k, i in enumerate(model.actuated_indices):
            cols[i] = k
        bodies = [l.inertia for l in model.links[1:]]
        plan = (
            np.array([_KIND_CODE[j.kind] for j in joints], dtype=np.int64),
            cols,
            np.array([j.origin.rotation for j in joints], dtype=float).reshape(nj, 3, 3),
            np.array([j.origin.translation for j in joints], dtype=float).reshape(nj, 3),
            np.array([j.axis for j in joints], dtype=float).reshape(nj, 3),
            np.array([b.mass for b in bodies], dtype=float),
            np.array([b.com for b in bodies], dtype=float).reshape(nj, 3),
            np.array([b.inertia_about_com for b in bodies], dtype=float).reshape(nj, 3, 3),
        )
        model.__dict__["_dynamics_plan"] = plan
    return plan


@numba.njit(cache=True, inline="always")
def _cross(a0, a1, a2, b0, b1, b2):
    return a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0


@numba.njit(cache=True, inline="always")
def _rot(R, x0, x1, x2):
    return (
        R[0, 0] * x0 + R[0, 1] * x1 + R[0, 2] * x2,
        R[1, 0] * x0 + R[1, 1] * x1 + R[1, 2] * x2,
        R[2, 0] * x0 + R[2, 1] * x1 + R[2, 2] * x2,
    )


@numba.njit(cache=True, inline="always")
def _rot_t(R, x0, x1, x2):
    return (
        R[0, 0] * x0 + R[1, 0] * x1 + R[2, 0] * x2,
        R[0, 1] * x0 + R[1, 1] * x1 + R[2, 1] * x2,
        R[0, 2] * x0 + R[1, 2] * x1 + R[2, 2] * x2,
    )


@numba.njit(cache=True, inline="always")
def _axis_turn(k, c, s, x0, x1, x2):
    """Rotate x by angle (cos c, sin s) about unit k (Rodrigues)."""
    kx0, kx1, kx2 = _cross(k[0], k[1], k[2], x0, x1, x2)
    d = (1.0 - c) * (k[0] * x0 + k[1] * x1 + k[2] * x2)
    return x0 * c + s * kx0 + d * k[0], x1 * c + s * kx1 + d * k[1], x2 * c + s * kx2 + d * k[2]


@numba.njit(cache=True, nogil=True)
def _rnea_kernel(kinds, cols, E, r, ax, mass, com, Ic, Q, Qd, Qdd, g, out):
    nj = kinds.shape[0]
    # per-link velocity (w, v), acceleration (dw, dv), force (n, f), joint cos/sin
    w = np.empty((nj, 3))
    v = np.empty((nj, 3))
    n = np.empty((nj, 3))
    f = np.empty((nj, 3))
    cs = np.zeros(nj)
    sn = np.zeros(nj)
    for row in range(Q.shape[0]):
        # base: at rest, accelerating upward against gravity
        w0 = w1 = w2 = 0.0
        v0 = v1 = v2 = 0.0
        a0 = a1 = a2 = 0.0
        b0, b1, b2 = -g[0], -g[1], -g[2]
        for j in range(nj):
            Ej = E[j]
            r0, r1, r2 = r[j, 0], r[j, 1], r[j, 2]
            # constant placement: w' = E w, v' = E (v - r x w)
            c0, c1, c2 = _cross(r0, r1, r2, w0, w1, w2)
            nw0, nw1, nw2 = _rot(Ej, w0, w1, w2)
            v0, v1, v2 = _rot(Ej, v0 - c0, v1 - c1, v2 - c2)
            w0, w1, w2 = nw0, nw1, nw2
            c0, c1, c2 = _cross(r0, r1, r2, a0, a1, a2)
            na0, na1, na2 = _rot(Ej, a0, a1, a2)
            b0, b1, b2 = _rot(Ej, b0 - c0, b1 - c1, b2 - c2)
            a0, a1, a2 = na0, na1, na2
            k = ax[j]
            col = cols[j]
            if kinds[j] == 0:
                c = np.cos(Q[row, col])
                s = -np.sin(Q[row, col])
                cs[j] = c
                sn[j] = s
                w0, w1, w2 = _axis_turn(k, c, s, w0, w1, w2)
                v0, v1, v2 = _axis_turn(k, c, s, v0, v1, v2)
                a0, a1, a2 = _axis_turn(k, c, s, a0, a1, a2)
                b0, b1, b2 = _axis_turn(k, c, s, b0, b1, b2)
                qd = Qd[row, col]
                s0, s1, s2 = k[0] * qd, k[1] * qd, k[2] * qd
                w0, w1, w2 = w0 + s0, w1 + s1, w2 + s2
                # a = X a_parent + S qdd + v x (S qd)
                c0, c1, c2 = _cross(w0, w1, w2, s0, s1, s2)
                qdd = Qdd[row, col]
                a0, a1, a2 = a0 + k[0] * qdd + c0, a1 + k[1] * qdd + c1, a2 + k[2] * qdd + c2
                c0, c1, c2 = _cross(v0, v1, v2, s0, s1, s2)
                b0, b1, b2 = b0 + c0, b1 + c1, b2 + c2
            elif kinds[j] == 1:
                d = Q[row, col]
                d0, d1, d2 = k[0] * d, k[1] * d, k[2] * d
                c0, c1, c2 = _cross(d0, d1, d2, w0, w1, w2)
                v0, v1, v2 = v0 - c0, v1 - c1, v2 - c2
                c0, c1, c2 = _cross(d0, d1, d2, a0, a1, a2)
                b0, b1, b2 = b0 - c0, b1 - c1, b2 - c2
                qd = Qd[row, col]
                s0, s1, s2 = k[0] * qd, k[1] * qd, k[2] * qd
                v0, v1, v2 = v0 + s0, v1 + s1, v2 + s2
                c0, c1, c2 = _cross(w0, w1, w2, s0, s1, s2)
                qdd = Qdd[row, col]
                b0, b1, b2 = b0 + k[0] * qdd + c0, b1 + k[1] * qdd + c1, b2 + k[2] * qdd + c2
            w[j, 0], w[j, 1], w[j, 2] = w0, w1, w2
            v[j, 0], v[j, 1], v[j, 2] = v0, v1, v2

            # body force f = I a + v x* (I v), inertia about com at offset h
            m = mass[j]
            h0, h1, h2 = com[j, 0], com[j, 1], com[j, 2]
            I = Ic[j]
            c0, c1, c2 = _cross(w0, w1, w2, h0, h1, h2)
            p0, p1, p2 = m * (v0 + c0), m * (v1 + c1), m * (v2 + c2)
            L0, L1, L2 = _rot(I, w0, w1, w2)
            c0, c1, c2 = _cross(h0, h1, h2, p0, p1, p2)
            L0, L1, L2 = L0 + c0, L1 + c1, L2 + c2
            c0, c1, c2 = _cross(a0, a1, a2, h0, h1, h2)
            F0, F1, F2 = m * (b0 + c0), m * (b1 + c1), m * (b2 + c2)
            N0, N1, N2 = _rot(I, a0, a1, a2)
            c0, c1, c2 = _cross(h0, h1, h2, F0, F1, F2)
            N0, N1, N2 = N0 + c0, N1 + c1, N2 + c2
            c0, c1, c2 = _cross(w0, w1, w2, L0, L1, L2)
            e0, e1, e2 = _cross(v0, v1, v2, p0, p1, p2)
            n[j, 0], n[j, 1], n[j, 2] = N0 + c0 + e0, N1 + c1 + e1, N2 + c2 + e2
            c0, c1, c2 = _cross(w0, w1, w2, p0, p1, p2)
            f[j, 0], f[j, 1], f[j, 2] = F0 + c0, F1 + c1, F2 + c2

        for j in range(nj - 1, -1, -1):
            n0, n1, n2 = n[j, 0], n[j, 1], n[j, 2]
            f0, f1, f2 = f[j, 0], f[j, 1], f[j, 2]
            k = ax[j]
            col = cols[j]
            if kinds[j] == 0:
                out[row, col] = k[0] * n0 + k[1] * n1 + k[2] * n2
                # undo the joint rotation (angle +q)
                n0, n1, n2 = _axis_turn(k, cs[j], -sn[j], n0, n1, n2)
                f0, f1, f2 = _axis_turn(k, cs[j], -sn[j], f0, f1, f2)
            elif kinds[j] == 1:
                out[row, col] = k[0] * f0 + k[1] * f1 + k[2] * f2
                d = Q[row, col]
                c0, c1, c2 = _cross(k[0] * d, k[1] * d, k[2] * d, f0, f1, f2)
                n0, n1, n2 = n0 + c0, n1 + c1, n2 + c2
            if j == 0:
                break
            # back to the parent: f_p = E^T f, n_p = E^T n + r x f_p
            Ej = E[j]
            fp0, fp1, fp2 = _rot_t(Ej, f0, f1, f2)
            np0, np1, np2 = _rot_t(Ej, n0, n1, n2)
            c0, c1, c2 = _cross(r[j, 0], r[j, 1], r[j, 2], fp0, fp1, fp2)
            n[j - 1, 0] += np0 + c0
            n[j - 1, 1] += np1 + c1
            n[j - 1, 2] += np2 + c2
            f[j - 1, 0] += fp0
            f[j - 1, 1] += fp1
            f[j - 1, 2] += fp2


def _as_batch(model: RobotModel, x, what: str):
    a = np.asarray(x, dtype=float)
    if a.ndim == 0 or a.ndim > 2 or a.shape[-1] != model.dof:
        raise DimensionMismatch(f"{what}: expected trailing dimension {model.dof}, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteInput(f"{what} contains non-finite entries")
    return a


def _rnea(model: RobotModel, q, qd, qdd, gravity) -> np.ndarray:
    q = _as_batch(model, q, "q")
    single = q.ndim == 1
    qd = np.zeros_like(q) if qd is None else _as_batch(model, qd, "qdot")
    qdd = np.zeros_like(q) if qdd is None else _as_batch(model, qdd, "qddot")
    if qd.shape != q.shape or qdd.shape != q.shape:
        raise DimensionMismatch(f"state shapes differ: {q.shape}, {qd.shape}, {qdd.shape}")
    Q = np.ascontiguousarray(np.atleast_2d(q))
    Qd = np.ascontiguousarray(np.atleast_2d(qd))
    Qdd = np.ascontiguousarray(np.atleast_2d(qdd))
    out = np.zeros((Q.shape[0], model.dof))
    if len(model.joints):
        _rnea_kernel(*_plan(model), Q, Qd, Qdd, np.asarray(gravity, dtype=float), out)
    return out[0] if single else out


def rnea(model: RobotModel, q, qdot=None, qddot=None) -> np.ndarray:
    """Joint torques (forces, for prismatic joints) that realize ``(q, qdot, qddot)``.

    Any payload must already be merged with :func:`payloadcheck.model.attach_payload`.
    ``qdot``/``qddot`` default to zero.  Accepts shape ``(n,)`` or ``(N, n)``.
    """
    return _rnea(model, q, qdot, qddot, model.gravity)


def gravity_torques(model: RobotModel, q) -> np.ndarray:
    return _rnea(model, q, None, None, model.gravity)


def mass_matrix(model: RobotModel, q) -> np.ndarray:
    """Joint-space inertia matrix, one RNEA column per unit acceleration."""
    q = _as_batch(model, q, "q")
    if q.ndim != 1:
        raise DimensionMismatch("mass_matrix takes a single configuration")
    n = model.dof
    cols = _rnea(model, np.tile(q, (n, 1)), None, np.eye(n), np.zeros(3))
    return cols.T
