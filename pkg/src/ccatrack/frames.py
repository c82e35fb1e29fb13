"""Rotations between the global, body and array frames.

Frames are right-handed with z up. A body frame is x forward, y left,
z up; attitude ``(yaw, pitch, roll)`` maps body to global as
``Rz(yaw) @ Ry(-pitch) @ Rx(roll)`` so positive pitch raises the nose and
positive roll lowers the right wing.
"""

from __future__ import annotations

import numpy as np


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return _stack(c, s, "x")


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return _stack(c, s, "y")


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return _stack(c, s, "z")


def _stack(c, s, axis):
    c = np.asarray(c, float)
    s = np.asarray(s, float)
    o, i = np.zeros_like(c), np.ones_like(c)
    if axis == "x":
        rows = [[i, o, o], [o, c, -s], [o, s, c]]
    elif axis == "y":
        rows = [[c, o, s], [o, i, o], [-s, o, c]]
    else:
        rows = [[c, -s, o], [s, c, o], [o, o, i]]
    m = np.array(rows, dtype=float)  # (3, 3, ...)
    return np.moveaxis(m, (0, 1), (-2, -1))


def body_to_global(yaw, pitch, roll):
    """Rotation matrix (or stack of them) taking body vectors to global."""
    return rot_z(yaw) @ rot_y(-np.asarray(pitch, float)) @ rot_x(roll)


def direction_angles(u):
    """Azimuth in [0, 2pi) and elevation from +z in [0, pi] of vectors ``u``."""
    u = np.asarray(u, float)
    n = np.linalg.norm(u, axis=-1)
    az = np.mod(np.arctan2(u[..., 1], u[..., 0]), 2 * np.pi)
    el = np.arccos(np.clip(u[..., 2] / n, -1.0, 1.0))
    return az, el


def unit_from_angles(alpha, beta):
    alpha = np.asarray(alpha, float)
    beta = np.asarray(beta, float)
    return np.stack(
        [np.sin(beta) * np.cos(alpha), np.sin(beta) * np.sin(alpha), np.cos(beta)], axis=-1
    )
