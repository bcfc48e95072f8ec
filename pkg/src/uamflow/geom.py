"""Spherical geometry primitives.

Points are numpy arrays whose last axis has length 3. Every function
broadcasts over leading axes so batches of points can be processed at once.
"""

from __future__ import annotations

import numpy as np

INPUT_TOL = 1e-6
OUTPUT_TOL = 1e-9
ANTIPODAL_TOL = 1e-6


class DegenerateGeometryError(ValueError):
    """Raised when a great circle (or tangent direction) is not unique."""


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _norm(a):
    return np.sqrt(_dot(a, a))


def _check_on_sphere(p, radius, name="point"):
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError(f"{name} has non-finite components")
    dev = np.abs(_norm(p) - radius)
    if np.any(dev > INPUT_TOL * radius):
        raise ValueError(f"{name} is off the sphere of radius {radius} (max deviation {np.max(dev):.3g})")
    return p


def _unit_angle(p1, p2):
    # atan2 form of the spherical law of cosines; stable for tiny and near-pi angles
    cross = np.cross(p1, p2)
    return np.arctan2(_norm(cross), _dot(p1, p2))


def gc_distance(p1, p2, radius=1.0):
    """Great-circle arc length between two on-sphere points."""
    p1 = _check_on_sphere(p1, radius, "p1")
    p2 = _check_on_sphere(p2, radius, "p2")
    return radius * _unit_angle(p1, p2)


def slerp(p1, p2, ell):
    """Constant-speed point at fraction ``ell`` of the arc from p1 to p2.

    ``ell`` may be a scalar or an array broadcastable against the points.
    Endpoints are returned exactly for ell == 0 and ell == 1.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    radius = _norm(p1)
    _check_on_sphere(p2, radius, "p2")
    ell = np.asarray(ell, dtype=float)
    omega = _unit_angle(p1, p2)
    if np.any(omega > np.pi - ANTIPODAL_TOL):
        raise DegenerateGeometryError("slerp between antipodal points: great circle not unique")

    omega_b = np.expand_dims(omega, -1)
    ell_b = np.expand_dims(ell, -1)
    sin_om = np.sin(omega_b)
    small = sin_om < 1e-15
    safe = np.where(small, 1.0, sin_om)
    w1 = np.where(small, 1.0 - ell_b, np.sin((1.0 - ell_b) * omega_b) / safe)
    w2 = np.where(small, ell_b, np.sin(ell_b * omega_b) / safe)
    out = w1 * p1 + w2 * p2
    out = out * (np.expand_dims(radius, -1) / np.expand_dims(_norm(out), -1))
    out = np.where(ell_b == 0.0, p1 * np.ones_like(out), out)
    out = np.where(ell_b == 1.0, p2 * np.ones_like(out), out)
    return out


def tangent_dir(p1, p2):
    """Unit tangent at p1 pointing along the great circle toward p2."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    radius = _norm(p1)
    n1 = p1 / np.expand_dims(radius, -1)
    if np.any(_unit_angle(p1, p2) > np.pi - ANTIPODAL_TOL):
        raise DegenerateGeometryError("tangent direction toward the antipode is not unique")
    perp = p2 - np.expand_dims(_dot(p2, n1), -1) * n1
    length = _norm(perp)
    if np.any(length <= 1e-12 * radius):
        raise DegenerateGeometryError("tangent direction between coincident points")
    return perp / np.expand_dims(length, -1)


def rodrigues_rotate(d, axis, psi):
    """Rotate ``d`` about the unit ``axis`` by ``psi`` radians (right-hand rule)."""
    d = np.asarray(d, dtype=float)
    axis = np.asarray(axis, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(axis)) and np.all(np.isfinite(psi))):
        raise ValueError("non-finite input to rodrigues_rotate")
    c = np.expand_dims(np.cos(psi), -1)
    s = np.expand_dims(np.sin(psi), -1)
    return d * c + np.cross(axis, d) * s + axis * np.expand_dims(_dot(axis, d), -1) * (1.0 - c)


def to_spherical(p):
    """Return (theta, phi): polar angle in [0, pi], azimuth folded into [0, 2*pi)."""
    p = np.asarray(p, dtype=float)
    r = _norm(p)
    theta = np.arccos(np.clip(p[..., 2] / r, -1.0, 1.0))
    phi = np.arctan2(p[..., 1], p[..., 0])
    phi = np.where(phi < 0.0, phi + 2.0 * np.pi, phi)
    # poles have undefined azimuth; fold the 2*pi rounding edge back to 0
    at_pole = np.hypot(p[..., 0], p[..., 1]) == 0.0
    phi = np.where(at_pole | (phi >= 2.0 * np.pi), 0.0, phi)
    return theta, phi


def from_spherical(theta, phi, radius=1.0):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return radius * np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def step_along(p, direction, arc, radius=1.0):
    """Advance ``p`` by arc length ``arc`` along the tangent ``direction``.

    This is an exact great-circle advance, not a Euclidean step followed by
    projection.
    """
    arc = np.asarray(arc, dtype=float)
    if np.any(arc < 0):
        raise ValueError("arc length must be non-negative")
    p = np.asarray(p, dtype=float)
    direction = np.asarray(direction, dtype=float)
    ang = np.expand_dims(arc / radius, -1)
    out = p * np.cos(ang) + direction * (radius * np.sin(ang))
    return out * (radius / np.expand_dims(_norm(out), -1))


def chord(p1, p2):
    """Euclidean distance, used for inter-drone spacing."""
    return _norm(np.asarray(p1, dtype=float) - np.asarray(p2, dtype=float))
