"""Spreads, inter-mode correlation, PSDs, CDFs and capacity of OAM channels."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as sp_stats

from .core import TWO_PI, Ctf, MpcParams, mpc_arrays

DENOMINATORS = ("standard", "verbatim")
CAPACITY_NORMALIZATIONS = ("per_point", "whole", "none")


@dataclass(frozen=True)
class SpreadReport:
    """RMS delay spread in seconds and the four RMS angle spreads in radians."""

    tau_rms_s: float
    theta_t_rms: float
    phi_t_rms: float
    theta_r_rms: float
    phi_r_rms: float

    def to_dict(self) -> dict:
        return dict(vars(self))


@dataclass(frozen=True)
class CorrelationMatrix:
    rho: np.ndarray
    modes: tuple


@dataclass(frozen=True)
class DelayPsd:
    edges: np.ndarray
    power: np.ndarray
    power_db: np.ndarray


@dataclass(frozen=True)
class AngularRecord:
    theta_t: float
    phi_t: float
    theta_r: float
    phi_r: float
    power_db: float


def _weights(mpcs: Sequence[MpcParams]):
    cols = mpc_arrays(mpcs)
    amp = np.abs(cols["alpha"])
    p = amp ** 2
    if p.size == 0 or not np.sum(p) > 0:
        raise ValueError("need at least one MPC with non-zero power")
    return cols, amp, p


def _central_spread(values, p, amp, denominator):
    if denominator not in DENOMINATORS:
        raise ValueError(f"denominator must be one of {DENOMINATORS}")
    total = np.sum(p)
    second = np.sum(p * values ** 2) / total
    if denominator == "standard":
        mean = np.sum(p * values) / total
        # centring first avoids cancellation between two large moments
        var = np.sum(p * (values - mean) ** 2) / total
    else:
        # unsquared magnitudes in the mean term, as in the printed formula
        mean = np.sum(p * values) / np.sum(amp)
        var = second - mean ** 2
    return math.sqrt(max(float(var), 0.0))


def rms_delay_spread(mpcs: Sequence[MpcParams], denominator: str = "standard") -> float:
    """Power-weighted RMS delay spread.

    ``denominator="verbatim"`` divides the mean-delay term by ``sum |alpha|``
    instead of ``sum |alpha|^2``; that form is not scale invariant and a
    negative variance is clipped to 0.
    """
    cols, amp, p = _weights(mpcs)
    return _central_spread(cols["tau"], p, amp, denominator)


def _azimuth_deviation(phi, p):
    """Azimuths unwrapped around their power-weighted circular mean."""
    center = np.angle(np.sum(p * np.exp(1j * phi)))
    return (phi - center + math.pi) % TWO_PI - math.pi


def rms_angle_spreads(mpcs: Sequence[MpcParams], denominator: str = "standard") -> SpreadReport:
    """RMS delay spread plus the four RMS angle spreads.

    Azimuths are taken relative to their circular mean so a cluster straddling
    0/2 pi is not split in two. Elevations are used as they are.
    """
    cols, amp, p = _weights(mpcs)
    out = {"tau_rms_s": _central_spread(cols["tau"], p, amp, denominator)}
    for key in ("theta_t", "phi_t", "theta_r", "phi_r"):
        values = cols[key]
        if key.startswith("phi"):
            values = _azimuth_deviation(values, p)
        out[f"{key}_rms"] = _central_spread(values, p, amp, denominator)
    return SpreadReport(**out)


def mode_correlation(ctf_snapshots: Sequence[Ctf]) -> CorrelationMatrix:
    """Correlation between same-mode channels ``H_{n,n}`` of a mode set.

    For every frequency point the expectation runs over snapshots; the
    normalized coefficients are then averaged over frequency. A single
    snapshot degenerates to the per-point product, which has unit magnitude.
    """
    if len(ctf_snapshots) == 0:
        raise ValueError("need at least one snapshot")
    shape = ctf_snapshots[0].shape
    for c in ctf_snapshots:
        if c.shape != shape:
            raise ValueError("all snapshots must share one shape")
    n_r, n_t, n_f = shape
    if n_r != n_t:
        raise ValueError("mode correlation needs equal transmit and receive mode counts")
    stack = np.stack([np.asarray(c.values) for c in ctf_snapshots])  # (S, N, N, K)
    idx = np.arange(n_r)
    diag = stack[:, idx, idx, :]  # (S, N, K)
    power = np.mean(np.abs(diag) ** 2, axis=0)  # (N, K)
    if np.any(power == 0):
        raise ValueError("a mode channel has zero power at some frequency point")
    cross = np.einsum("sak,sbk->abk", diag, np.conj(diag)) / diag.shape[0]
    norm = np.sqrt(power[:, None, :] * power[None, :, :])
    rho = np.mean(cross / norm, axis=-1)
    # enforce the structural properties exactly
    rho = 0.5 * (rho + rho.conj().T)
    np.fill_diagonal(rho, 1.0)
    mag = np.abs(rho)
    rho = np.where(mag > 1.0, rho / np.maximum(mag, 1.0), rho)
    return CorrelationMatrix(rho, tuple(ctf_snapshots[0].rx_modes.modes))


def capacity_bits(ctf: Ctf, snr_linear, normalization: str = "per_point"):
    """Equal-power MIMO capacity in bit/s/Hz averaged over frequency.

    ``normalization`` scales each frequency point (``"per_point"``) or the
    whole tensor (``"whole"``) to unit mean entry power, or leaves it as is
    (``"none"``). All-zero points under per-point scaling contribute 0.
    Returns a float for scalar SNR and an array otherwise.
    """
    if normalization not in CAPACITY_NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {CAPACITY_NORMALIZATIONS}")
    h = np.asarray(ctf.values)
    n_r, n_t, n_f = h.shape
    if n_f == 0:
        raise ValueError("empty frequency grid")
    snr = np.asarray(snr_linear, dtype=float)
    if not np.all(snr > 0):
        raise ValueError("snr must be > 0")
    hk = np.moveaxis(h, -1, 0)  # (K, N_r, N_t)
    if normalization == "per_point":
        scale = np.mean(np.abs(hk) ** 2, axis=(1, 2))
        scale = np.where(scale > 0, scale, 1.0)
        hk = hk / np.sqrt(scale)[:, None, None]
    elif normalization == "whole":
        scale = np.mean(np.abs(hk) ** 2)
        if scale == 0:
            raise ValueError("all-zero CTF cannot be normalized")
        hk = hk / math.sqrt(scale)
    # log2 det(I + a H H^H) = sum log2(1 + a s_i^2)
    sv2 = np.linalg.svd(hk, compute_uv=False) ** 2  # (K, min(N_r, N_t))
    gains = snr.reshape(snr.shape + (1, 1)) / n_t * sv2
    cap = np.mean(np.sum(np.log2(1.0 + gains), axis=-1), axis=-1)
    return float(cap) if cap.ndim == 0 else cap


def delay_psd(mpcs: Sequence[MpcParams], delay_bins) -> DelayPsd:
    """Path power accumulated into delay bins, linear and in dB relative to the peak.

    ``delay_bins`` are bin edges; bins are half-open except the last, which
    includes its right edge. Empty bins are ``-inf`` dB.
    """
    edges = np.asarray(delay_bins, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("delay_bins must be at least two increasing edges")
    cols = mpc_arrays(mpcs)
    tau, p = cols["tau"], np.abs(cols["alpha"]) ** 2
    if np.any(tau < edges[0]) or np.any(tau > edges[-1]):
        raise ValueError("delay bins do not cover every path delay")
    idx = np.clip(np.searchsorted(edges, tau, side="right") - 1, 0, edges.size - 2)
    power = np.zeros(edges.size - 1)
    np.add.at(power, idx, p)
    peak = power.max() if power.size else 0.0
    with np.errstate(divide="ignore"):
        power_db = 10.0 * np.log10(power / peak) if peak > 0 else np.full_like(power, -np.inf)
    return DelayPsd(edges, power, power_db)


def angular_psd(mpcs: Sequence[MpcParams]) -> list:
    """One record per path: its four angles and its power relative to the strongest path."""
    if not mpcs:
        return []
    p = np.array([m.power for m in mpcs])
    peak = p.max()
    if not peak > 0:
        raise ValueError("need at least one MPC with non-zero power")
    with np.errstate(divide="ignore"):
        rel = 10.0 * np.log10(p / peak)
    return [AngularRecord(m.theta_t, m.phi_t, m.theta_r, m.phi_r, float(r))
            for m, r in zip(mpcs, rel)]


def empirical_cdf(samples) -> list:
    """Step CDF as ``(value, P[X <= value])`` pairs; repeated values appear once."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("need at least one sample")
    values, counts = np.unique(x, return_counts=True)
    probs = np.cumsum(counts) / x.size
    return [(float(v), float(q)) for v, q in zip(values, probs)]


def log_spread_fit(spreads) -> tuple[float, float]:
    """Normal fit (mean, std) of ``log10`` of positive spreads."""
    s = np.asarray(spreads, dtype=float)
    if s.size == 0 or np.any(s <= 0):
        raise ValueError("spreads must be positive")
    mu, sigma = sp_stats.norm.fit(np.log10(s))
    return float(mu), float(sigma)


def ctf_to_cir(ctf: Ctf):
    """Impulse response per mode pair by inverse FFT over frequency.

    Returns ``(delays_s, cir)`` with ``cir`` shaped like the CTF values.
    """
    n_f = ctf.grid.n_points
    if n_f < 2:
        raise ValueError("need at least two frequency points")
    cir = np.fft.ifft(np.asarray(ctf.values), axis=-1)
    delays = np.arange(n_f) / (n_f * ctf.grid.spacing_hz)
    return delays, cir
