"""Deterministic CTF construction from multipath components.

Each path contributes::

    s[n_r, n_t, k] = alpha * c_r(k) * conj(c_t(k)) * g_t[n_t] * conj(g_r[n_r]) * exp(-j 2 pi f_k tau)

where ``c`` is the array-location phase evaluated at the array center and
``g`` the OAM mode gain in the antenna's local frame. Two gain models are
available through ``LinkConfig.pattern``:

``"mode"``
    ideal mode pattern ``exp(j m phi)`` on the front hemisphere (default).
``"uca"``
    the same mode synthesized over the physical UCA elements, which adds the
    ``J_m(k R sin theta)`` elevation dependence of a real circular array.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import SPEED_OF_LIGHT, TWO_PI, Ctf, FrequencyGrid, MpcParams, OamModeSet, mpc_arrays
from .geometry import ArrayGeometry, oam_mode_gain, rotate_direction, uca_mode_gain, unit_vector

PATTERNS = ("mode", "uca")


@dataclass(frozen=True)
class LinkConfig:
    tx_geometry: ArrayGeometry
    rx_geometry: ArrayGeometry
    tx_modes: OamModeSet
    rx_modes: OamModeSet
    grid: FrequencyGrid
    pattern: str = "mode"

    def __post_init__(self):
        if len(self.tx_modes) != self.tx_geometry.n_elements:
            raise ValueError("tx mode count must equal tx element count")
        if len(self.rx_modes) != self.rx_geometry.n_elements:
            raise ValueError("rx mode count must equal rx element count")
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {PATTERNS}, got {self.pattern!r}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.rx_modes), len(self.tx_modes), self.grid.n_points


def side_response(geometry: ArrayGeometry, modes: OamModeSet, theta, phi,
                  freqs: np.ndarray, pattern: str, receive: bool) -> np.ndarray:
    """Per-mode response of one link end for global directions.

    Returns shape ``angles.shape + (n_modes, n_freqs)``. The transmit side
    carries ``conj(c_t) g_t``; the receive side ``c_r conj(g_r)``.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    freqs = np.asarray(freqs, dtype=float)
    theta_l, phi_l = rotate_direction(theta, phi, geometry.rotation_rad)
    theta_l = np.asarray(theta_l, dtype=float)
    phi_l = np.asarray(phi_l, dtype=float)

    proj = unit_vector(theta, phi) @ geometry.center_m
    loc = np.exp(1j * TWO_PI / SPEED_OF_LIGHT * proj[..., None] * freqs)  # angles + (K,)

    m = np.array(modes.modes)
    if pattern == "mode":
        gain = oam_mode_gain(m, theta_l[..., None], phi_l[..., None])  # angles + (M,)
        gain = np.broadcast_to(gain[..., None], gain.shape + (freqs.size,))
    else:
        gain = np.stack([uca_mode_gain(mm, theta_l, phi_l, freqs, geometry.n_elements,
                                       geometry.radius_m) for mm in m], axis=-2)
    if receive:
        return loc[..., None, :] * np.conj(gain)
    return np.conj(loc)[..., None, :] * gain


def mpc_responses(mpcs: Sequence[MpcParams], link: LinkConfig):
    """Receive responses (L, N_r, K), transmit responses (L, N_t, K) and delay
    phases (L, K) for a list of paths."""
    cols = mpc_arrays(mpcs)
    f = link.grid.points
    rx = side_response(link.rx_geometry, link.rx_modes, cols["theta_r"], cols["phi_r"], f,
                       link.pattern, receive=True)
    tx = side_response(link.tx_geometry, link.tx_modes, cols["theta_t"], cols["phi_t"], f,
                       link.pattern, receive=False)
    delay = np.exp(-1j * TWO_PI * np.outer(cols["tau"], f))
    return cols["alpha"], rx, tx, delay


def _path_tensor(alpha, rx, tx, delay) -> np.ndarray:
    return alpha * rx[:, None, :] * tx[None, :, :] * delay[None, None, :]


def mpc_ctf(theta: MpcParams, link: LinkConfig) -> Ctf:
    """CTF tensor of a single multipath component."""
    alpha, rx, tx, delay = mpc_responses([theta], link)
    return Ctf(_path_tensor(alpha[0], rx[0], tx[0], delay[0]), link.grid, link.tx_modes, link.rx_modes)


def synthesize_values(mpcs: Sequence[MpcParams], link: LinkConfig) -> np.ndarray:
    """Sum of all path tensors, accumulated in path order with Kahan compensation."""
    total = np.zeros(link.shape, dtype=complex)
    if not mpcs:
        return total
    alpha, rx, tx, delay = mpc_responses(mpcs, link)
    comp = np.zeros_like(total)
    for l in range(len(mpcs)):
        y = _path_tensor(alpha[l], rx[l], tx[l], delay[l]) - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def synthesize_ctf(mpcs: Sequence[MpcParams], link: LinkConfig) -> Ctf:
    return Ctf(synthesize_values(mpcs, link), link.grid, link.tx_modes, link.rx_modes)
