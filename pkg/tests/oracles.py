"""Closed-form reference dynamics written independently of the package."""

import numpy as np

G = 9.81


def pendulum_1r(q, qd, qdd, m=1.0, lc=1.0, I=0.0):
    """Single link in a vertical plane, angle measured up from horizontal."""
    return (m * lc * lc + I) * qdd + m * G * lc * np.cos(q)


def planar_2r(q, qd, qdd, m1=1.0, m2=1.0, l1=1.0, lc1=0.5, lc2=0.5, I1=1.0 / 12, I2=1.0 / 12):
    """Textbook two-link arm M(q) qdd + C(q, qd) qd + g(q) in a vertical plane."""
    q1, q2 = q
    c2, s2 = np.cos(q2), np.sin(q2)
    M11 = m1 * lc1**2 + I1 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * c2) + I2
    M12 = m2 * (lc2**2 + l1 * lc2 * c2) + I2
    M22 = m2 * lc2**2 + I2
    M = np.array([[M11, M12], [M12, M22]])
    h = m2 * l1 * lc2 * s2
    cor = np.array([-h * (2 * qd[0] * qd[1] + qd[1] ** 2), h * qd[0] ** 2])
    g1 = (m1 * lc1 + m2 * l1) * G * np.cos(q1) + m2 * lc2 * G * np.cos(q1 + q2)
    g2 = m2 * lc2 * G * np.cos(q1 + q2)
    return M @ qdd + cor + np.array([g1, g2]), M


def homogeneous_chain(model, q):
    """EE position and rotation by plain 4x4 matrix products."""
    T = np.eye(4)
    c = 0
    for j in model.joints:
        R, p = j.origin.pose()
        A = np.eye(4)
        A[:3, :3], A[:3, 3] = R, p
        T = T @ A
        if j.kind.value == "revolute":
            k = j.axis
            K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
            th = q[c]
            B = np.eye(4)
            B[:3, :3] = np.eye(3) + np.sin(th) * K + (1 - np.cos(th)) * K @ K
            T = T @ B
            c += 1
        elif j.kind.value == "prismatic":
            B = np.eye(4)
            B[:3, 3] = j.axis * q[c]
            T = T @ B
            c += 1
    R, p = model.ee_offset.pose()
    A = np.eye(4)
    A[:3, :3], A[:3, 3] = R, p
    T = T @ A
    return T[:3, :3], T[:3, 3]
