"""Shared value types: frequency grids, OAM mode sets, multipath parameters,
channel transfer functions and the seeded random streams every stochastic
routine draws from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SPEED_OF_LIGHT = 299792458.0  # m/s
TWO_PI = 2.0 * math.pi

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid of ``n_points`` frequencies spanning
    ``[center - bandwidth/2, center + bandwidth/2]`` inclusive."""

    center_hz: float
    bandwidth_hz: float
    points: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 1:
            raise ValueError("frequency grid needs at least one point")
        if pts.size > 1 and np.any(np.diff(pts) <= 0):
            raise ValueError("frequency points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return int(self.points.size)

    @property
    def spacing_hz(self) -> float:
        """Frequency step (0 for a single-point grid)."""
        if self.n_points == 1:
            return 0.0
        return self.bandwidth_hz / (self.n_points - 1)

    def __eq__(self, other):
        if not isinstance(other, FrequencyGrid):
            return NotImplemented
        return (self.center_hz == other.center_hz
                and self.bandwidth_hz == other.bandwidth_hz
                and np.array_equal(self.points, other.points))

    def __hash__(self):
        return hash((self.center_hz, self.bandwidth_hz, self.n_points))


def make_frequency_grid(center_hz: float, bandwidth_hz: float, n_points: int) -> FrequencyGrid:
    """Build a uniform frequency grid with inclusive end points.

    Args:
        center_hz: Center frequency in Hz, must be positive.
        bandwidth_hz: Total span in Hz. Zero only for a one-point grid.
        n_points: Number of frequency samples N_f.

    Returns:
        FrequencyGrid whose first and last points sit exactly at the band edges.
    """
    if not (math.isfinite(center_hz) and center_hz > 0):
        raise ValueError(f"center frequency must be positive, got {center_hz!r}")
    n_points = int(n_points)
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    if not (math.isfinite(bandwidth_hz) and bandwidth_hz >= 0):
        raise ValueError(f"bandwidth must be non-negative, got {bandwidth_hz!r}")
    if n_points == 1:
        if bandwidth_hz != 0:
            raise ValueError("a single-point grid must have zero bandwidth")
        pts = np.array([float(center_hz)])
    else:
        if bandwidth_hz == 0:
            raise ValueError("zero bandwidth is only allowed for n_points = 1")
        lo = center_hz - bandwidth_hz / 2.0
        # index-based construction keeps the endpoints exact and spacing uniform
        pts = lo + bandwidth_hz * (np.arange(n_points) / (n_points - 1))
        pts[-1] = center_hz + bandwidth_hz / 2.0
    return FrequencyGrid(float(center_hz), float(bandwidth_hz), pts)


@dataclass(frozen=True)
class OamModeSet:
    """OAM mode labels carried by the elements of one UCA."""

    n_elements: int
    modes: tuple[int, ...]

    def __post_init__(self):
        if len(self.modes) != self.n_elements:
            raise ValueError("mode list length must equal the element count")

    def __len__(self):
        return self.n_elements

    def index_of(self, mode: int) -> int:
        return self.modes.index(int(mode))


def mode_index_map(n_elements: int) -> OamModeSet:
    """Map element index n = 1..N to OAM mode floor((2-N)/2) + n - 1."""
    n_elements = int(n_elements)
    if n_elements < 1:
        raise ValueError("a UCA needs at least one element")
    lowest = (2 - n_elements) // 2
    return OamModeSet(n_elements, tuple(lowest + k for k in range(n_elements)))


@dataclass(frozen=True)
class MpcParams:
    """One multipath component: complex gain, delay and the four angles.

    Angles are in radians; elevations in [0, pi], azimuths in [0, 2 pi).
    """

    alpha: complex
    tau: float
    theta_t: float
    phi_t: float
    theta_r: float
    phi_r: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        for name in ("tau", "theta_t", "phi_t", "theta_r", "phi_r"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, value)
        if not (math.isfinite(self.alpha.real) and math.isfinite(self.alpha.imag)):
            raise ValueError("alpha must be finite")
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        for name in ("theta_t", "theta_r"):
            v = getattr(self, name)
            if not 0.0 <= v <= math.pi:
                raise ValueError(f"{name} must lie in [0, pi], got {v}")
        for name in ("phi_t", "phi_r"):
            v = getattr(self, name)
            if not 0.0 <= v < TWO_PI:
                raise ValueError(f"{name} must lie in [0, 2pi), got {v}")

    @property
    def power(self) -> float:
        return abs(self.alpha) ** 2

    def replace(self, **changes) -> "MpcParams":
        values = dict(alpha=self.alpha, tau=self.tau, theta_t=self.theta_t,
                      phi_t=self.phi_t, theta_r=self.theta_r, phi_r=self.phi_r)
        values.update(changes)
        return MpcParams(**values)

    @classmethod
    def canonical(cls, alpha, tau, theta_t, phi_t, theta_r, phi_r) -> "MpcParams":
        """Build from possibly out-of-range values: delay floored at 0,
        elevations clipped to [0, pi], azimuths wrapped to [0, 2 pi)."""
        return cls(alpha, max(float(tau), 0.0),
                   clip_elevation(theta_t), wrap_azimuth(phi_t),
                   clip_elevation(theta_r), wrap_azimuth(phi_r))


def wrap_azimuth(phi):
    """Wrap azimuth(s) into [0, 2 pi)."""
    out = np.mod(phi, TWO_PI)
    # np.mod can return exactly 2 pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def clip_elevation(theta):
    out = np.clip(theta, 0.0, math.pi)
    if np.ndim(out) == 0:
        return float(out)
    return out


def mpc_arrays(mpcs: Sequence[MpcParams]) -> dict[str, np.ndarray]:
    """Column arrays for a list of MPCs (empty arrays for an empty list)."""
    return {
        "alpha": np.array([m.alpha for m in mpcs], dtype=complex),
        "tau": np.array([m.tau for m in mpcs], dtype=float),
        "theta_t": np.array([m.theta_t for m in mpcs], dtype=float),
        "phi_t": np.array([m.phi_t for m in mpcs], dtype=float),
        "theta_r": np.array([m.theta_r for m in mpcs], dtype=float),
        "phi_r": np.array([m.phi_r for m in mpcs], dtype=float),
    }


@dataclass(frozen=True)
class Ctf:
    """Channel transfer function H[n_r, n_t, k] between OAM modes."""

    values: np.ndarray = field(repr=False)
    grid: FrequencyGrid
    tx_modes: OamModeSet
    rx_modes: OamModeSet

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        expected = (len(self.rx_modes), len(self.tx_modes), self.grid.n_points)
        if vals.shape != expected:
            raise ValueError(f"CTF shape {vals.shape} does not match modes/grid {expected}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("CTF entries must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    def power(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))

    def with_values(self, values) -> "Ctf":
        return Ctf(values, self.grid, self.tx_modes, self.rx_modes)


class RngStream:
    """Deterministic random stream keyed by ``(seed, stream_id)``.

    Bits come from Philox4x64-10 with key ``[seed mod 2**64, stream_id mod 2**64]``;
    the 256-bit counter starts at 0 and is incremented before each block, so
    the first four words are the block at counter 1. Every variate is a fixed
    transform of the raw 64-bit words ``w`` so that other implementations can reproduce it:

    * uniform:  ``((w >> 11) + 0.5) * 2**-53``, strictly inside (0, 1)
    * normal:   Box-Muller cosine branch on two consecutive uniforms
    * sign:     ``+1`` if the uniform is below 0.5, else ``-1``
    * permutation: Fisher-Yates from the last slot down, ``j = floor(u * (i + 1))``

    A stream has a single owner; split work across ``stream_id`` values instead
    of sharing one stream between threads.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        key = np.array([self.seed & _MASK64, self.stream_id & _MASK64], dtype=np.uint64)
        self._bits = np.random.Philox(key=key)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def raw(self, size: int) -> np.ndarray:
        return self._bits.random_raw(int(size))

    def uniform(self, size: int | None = None):
        n = 1 if size is None else int(size)
        words = self.raw(n)
        u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
        return float(u[0]) if size is None else u

    def normal(self, size: int | None = None, scale: float = 1.0):
        n = 1 if size is None else int(size)
        u = self.uniform(2 * n)
        z = np.sqrt(-2.0 * np.log(u[0::2])) * np.cos(TWO_PI * u[1::2])
        z = scale * z
        return float(z[0]) if size is None else z

    def signs(self, size: int) -> np.ndarray:
        return np.where(self.uniform(size) < 0.5, 1.0, -1.0)

    def permutation(self, n: int) -> np.ndarray:
        perm = np.arange(int(n))
        if n > 1:
            u = self.uniform(n - 1)
            for step, i in enumerate(range(n - 1, 0, -1)):
                j = int(u[step] * (i + 1))
                perm[i], perm[j] = perm[j], perm[i]
        return perm


def rng_stream(seed: int, stream_id: int = 0) -> RngStream:
    return RngStream(seed, stream_id)
