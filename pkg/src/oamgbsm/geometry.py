"""Direction vectors, UCA element placement, antenna orientation and the
per-mode antenna gains used by the channel model.

Rotation convention: an antenna with orientation ``[phi_x, phi_y, phi_z]``
maps local coordinates to global ones by ``R = Rz(phi_z) @ Ry(phi_y) @ Rx(phi_x)``
(right-hand rule about each axis). Patterns are evaluated in the local frame,
so global directions are taken through ``R.T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import SPEED_OF_LIGHT, TWO_PI, clip_elevation, wrap_azimuth


@dataclass(frozen=True)
class Direction:
    theta: float
    phi: float
    omega: np.ndarray = field(repr=False, compare=False)


def unit_vector(theta, phi) -> np.ndarray:
    """``[cos(phi) sin(theta), sin(phi) sin(theta), cos(theta)]``, last axis = xyz."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([np.cos(phi) * st, np.sin(phi) * st, np.cos(theta)], axis=-1)


def vector_angles(omega):
    """Inverse of :func:`unit_vector` for (arrays of) non-zero 3-vectors.

    At the poles the azimuth is undefined and reported as 0.
    """
    omega = np.asarray(omega, dtype=float)
    # atan2 keeps full precision near the poles where arccos does not
    theta = np.arctan2(np.hypot(omega[..., 0], omega[..., 1]), omega[..., 2])
    phi = wrap_azimuth(np.arctan2(omega[..., 1], omega[..., 0]))
    return theta, phi


def direction_vector(theta: float, phi: float) -> Direction:
    omega = unit_vector(theta, phi)
    if 0.0 <= theta <= math.pi:
        t, p = float(theta), wrap_azimuth(phi)
    else:
        t, p = vector_angles(omega)
        t, p = float(t), float(p)
    return Direction(t, p, omega)


def rotation_matrix(rotation_rad) -> np.ndarray:
    """Local-to-global rotation ``Rz @ Ry @ Rx`` for ``[phi_x, phi_y, phi_z]``."""
    ax, ay, az = (float(a) for a in rotation_rad)
    cx, sx = math.cos(ax), math.sin(ax)
    cy, sy = math.cos(ay), math.sin(ay)
    cz, sz = math.cos(az), math.sin(az)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rz @ ry @ rx


def _is_identity(rotation_rad) -> bool:
    return all(float(a) == 0.0 for a in rotation_rad)


def rotate_direction(theta, phi, rotation_rad):
    """Express a global direction in an antenna's local frame.

    Works element-wise on arrays. With zero rotation the inputs come back
    unchanged (azimuth wrapped), which keeps azimuth meaningful at the pole.
    """
    if _is_identity(rotation_rad):
        return clip_elevation(theta), wrap_azimuth(phi)
    r = rotation_matrix(rotation_rad)
    local = unit_vector(theta, phi) @ r  # row-vector form of R.T @ omega
    t, p = vector_angles(local)
    if np.ndim(t) == 0:
        return float(t), float(p)
    return t, p


def unrotate_direction(theta_local, phi_local, rotation_rad):
    """Inverse of :func:`rotate_direction`: local angles back to global ones."""
    if _is_identity(rotation_rad):
        return clip_elevation(theta_local), wrap_azimuth(phi_local)
    r = rotation_matrix(rotation_rad)
    glob = unit_vector(theta_local, phi_local) @ r.T
    t, p = vector_angles(glob)
    if np.ndim(t) == 0:
        return float(t), float(p)
    return t, p


@dataclass(frozen=True)
class ArrayGeometry:
    """A UCA: element count, radius, center position and orientation."""

    n_elements: int
    radius_m: float
    center_m: np.ndarray = field(compare=False)
    rotation_rad: np.ndarray = field(compare=False)
    element_positions_m: np.ndarray = field(repr=False, compare=False)

    @property
    def element_angles(self) -> np.ndarray:
        """Placement angle 2 pi (n-1)/N of each element in the local x-y plane."""
        return TWO_PI * np.arange(self.n_elements) / self.n_elements

    @property
    def boresight(self) -> np.ndarray:
        """Global unit vector of the local +z axis."""
        return rotation_matrix(self.rotation_rad)[:, 2]

    def __eq__(self, other):
        if not isinstance(other, ArrayGeometry):
            return NotImplemented
        return (self.n_elements == other.n_elements and self.radius_m == other.radius_m
                and np.array_equal(self.center_m, other.center_m)
                and np.array_equal(self.rotation_rad, other.rotation_rad))

    def __hash__(self):
        return hash((self.n_elements, self.radius_m, tuple(self.center_m), tuple(self.rotation_rad)))


def uca_positions(n_elements: int, radius_m: float, center_m=(0.0, 0.0, 0.0),
                  rotation_rad=(0.0, 0.0, 0.0)) -> ArrayGeometry:
    """Place N elements on a circle; element 1 sits on the local +x axis."""
    n_elements = int(n_elements)
    if n_elements < 1:
        raise ValueError("a UCA needs at least one element")
    if not radius_m >= 0:
        raise ValueError("radius must be non-negative")
    center = np.array(center_m, dtype=float).reshape(3)
    rot = np.array(rotation_rad, dtype=float).reshape(3)
    psi = TWO_PI * np.arange(n_elements) / n_elements
    local = np.stack([radius_m * np.cos(psi), radius_m * np.sin(psi), np.zeros(n_elements)], axis=-1)
    positions = local @ rotation_matrix(rot).T + center
    for arr in (center, rot, positions):
        arr.setflags(write=False)
    return ArrayGeometry(n_elements, float(radius_m), center, rot, positions)


def steering_gain(p_m, direction, f_hz):
    """Array-location phase ``exp(j 2 pi (f/c) p . omega)``.

    ``direction`` is a :class:`Direction` or a unit 3-vector; ``f_hz`` may be an
    array, in which case one gain per frequency is returned.
    """
    omega = direction.omega if isinstance(direction, Direction) else np.asarray(direction, dtype=float)
    proj = float(np.dot(np.asarray(p_m, dtype=float), omega))
    phase = TWO_PI * np.asarray(f_hz, dtype=float) / SPEED_OF_LIGHT * proj
    out = np.exp(1j * phase)
    return complex(out) if np.ndim(out) == 0 else out


def oam_mode_gain(m, theta_local, phi_local):
    """Front-hemisphere OAM mode gain: ``exp(j m phi)`` for theta <= pi/2, else 0."""
    theta_local = np.asarray(theta_local, dtype=float)
    phi_local = np.asarray(phi_local, dtype=float)
    gain = np.where(theta_local <= math.pi / 2, np.exp(1j * m * phi_local), 0.0 + 0.0j)
    return complex(gain) if gain.ndim == 0 else gain


def uca_mode_gain(m, theta_local, phi_local, f_hz, n_elements, radius_m):
    """Far-field gain of OAM mode ``m`` synthesized over the UCA elements.

    Elements are fed with ``exp(j m psi_n) / sqrt(N)``; the result is
    ``sqrt(N) sum_q j^q J_q(k R sin theta) exp(j q phi)`` over ``q = m mod N``,
    gated to the front hemisphere like :func:`oam_mode_gain`.

    Broadcasting: angle arrays of shape ``S`` and ``f_hz`` of shape ``(K,)``
    give an output of shape ``S + (K,)``.
    """
    theta_local = np.asarray(theta_local, dtype=float)[..., None]
    phi_local = np.asarray(phi_local, dtype=float)[..., None]
    k = TWO_PI * np.atleast_1d(np.asarray(f_hz, dtype=float)) / SPEED_OF_LIGHT
    psi = TWO_PI * np.arange(n_elements) / n_elements
    kr_sin = (k * radius_m * np.sin(theta_local))[..., None]
    phase = m * psi + kr_sin * np.cos(phi_local[..., None] - psi)
    gain = np.exp(1j * phase).sum(axis=-1) / math.sqrt(n_elements)
    return np.where(theta_local <= math.pi / 2, gain, 0.0)
