"""Bessel-based OAM field and path-loss formulas plus log-normal shadowing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .core import SPEED_OF_LIGHT, TWO_PI, RngStream

BESSEL_NULL_FLOOR = 1e-300
MAX_BESSEL_ORDER = 64


class NullDepthError(ArithmeticError):
    """A Bessel factor of the path-loss formula sits in a mode null."""

    def __init__(self, m_t, m_r, message):
        super().__init__(message)
        self.m_t = m_t
        self.m_r = m_r


@dataclass(frozen=True)
class PathLossFit:
    """Coefficients of ``A + B lg(|J_mt(.)| |J_mr(.)|) + D lg(d) + E lg(f_GHz)``.

    The Bessel arguments are ``C f_GHz R / sqrt(R**2 + d**2)``. Coefficients are
    stored with the sign they carry in the fitted table rows.
    """

    a_db: float
    b: float
    c_scale: float
    d_exp: float
    e_freq: float
    scenario_name: str = ""

    def __post_init__(self):
        for name in ("a_db", "b", "c_scale", "d_exp", "e_freq"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.d_exp <= 0:
            raise ValueError("d_exp must be > 0")


# fitted same-mode rows (5.8 GHz measurement campaign)
TABLE_FITS = {
    "indoor_los": PathLossFit(8.692, 16.69, 262.9, 17.3, 20.0, "indoor_los"),
    "through_wall": PathLossFit(18.58, 6.064, 47.65, 17.3, 24.9, "through_wall"),
    "outdoor_los": PathLossFit(18.65, 10.16, 418.1, 17.3, 20.0, "outdoor_los"),
}


@dataclass(frozen=True)
class ShadowingModel:
    sigma_psi_db: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma_psi_db) and self.sigma_psi_db >= 0):
            raise ValueError("sigma_psi_db must be >= 0")


def bessel_j(order: int, x):
    """Bessel function of the first kind J_order(x) for integer order.

    Negative orders use J_{-m}(x) = (-1)^m J_m(x).
    """
    order = int(order)
    if abs(order) > MAX_BESSEL_ORDER:
        raise ValueError(f"|order| must be <= {MAX_BESSEL_ORDER}")
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_arr)):
        raise ValueError("Bessel argument must be finite")
    value = special.jv(abs(order), x_arr)
    if order < 0 and order % 2:
        value = -value
    return float(value) if value.ndim == 0 else value


def theoretical_field(m: int, r_t_m: float, f_hz: float, rho_m: float, theta: float,
                      phi: float, n_elements: int) -> complex:
    """Far field of OAM mode ``m`` from an N-element UCA of radius ``r_t_m``
    at spherical position ``(rho, theta, phi)``."""
    if not rho_m > 0:
        raise ValueError("rho must be > 0 (the field is singular at the source)")
    if not f_hz > 0:
        raise ValueError("frequency must be > 0")
    k = TWO_PI * f_hz / SPEED_OF_LIGHT
    amplitude = math.sqrt(n_elements) * SPEED_OF_LIGHT / (2 * TWO_PI * f_hz)
    radial = np.exp(-1j * k * rho_m) / rho_m
    return complex(amplitude * (1j ** (m % 4)) * bessel_j(m, k * r_t_m * math.sin(theta))
                   * radial * np.exp(1j * m * phi))


def bessel_gain_product(fit: PathLossFit, m_t: int, m_r: int, f_ghz: float, d_m: float,
                        r_t_m: float, r_r_m: float) -> tuple[float, float]:
    """The two Bessel magnitudes of the fit: transmit mode at the receive
    radius, receive mode at the transmit radius."""
    arg_t = fit.c_scale * f_ghz * r_r_m / math.sqrt(r_r_m ** 2 + d_m ** 2)
    arg_r = fit.c_scale * f_ghz * r_t_m / math.sqrt(r_t_m ** 2 + d_m ** 2)
    return abs(bessel_j(m_t, arg_t)), abs(bessel_j(m_r, arg_r))


def path_loss_db(fit: PathLossFit, m_t: int, m_r: int, f_ghz: float, d_m: float,
                 r_t_m: float, r_r_m: float) -> float:
    """Fitted OAM path loss in dB from transmit mode ``m_t`` to receive mode ``m_r``.

    Raises:
        NullDepthError: either Bessel factor is below 1e-300 (infinite loss).
    """
    if not d_m > 0:
        raise ValueError("distance must be > 0")
    if not f_ghz > 0:
        raise ValueError("frequency must be > 0")
    g_t, g_r = bessel_gain_product(fit, m_t, m_r, f_ghz, d_m, r_t_m, r_r_m)
    if g_t < BESSEL_NULL_FLOOR or g_r < BESSEL_NULL_FLOOR:
        raise NullDepthError(m_t, m_r, f"mode pair (m_t={m_t}, m_r={m_r}) is in a Bessel null "
                                       f"at d={d_m} m, f={f_ghz} GHz")
    # lg(|a||b|) split into two logs so tiny products cannot underflow
    return (fit.a_db + fit.b * (math.log10(g_t) + math.log10(g_r))
            + fit.d_exp * math.log10(d_m) + fit.e_freq * math.log10(f_ghz))


def sample_shadowing_db(model: ShadowingModel, rng: RngStream) -> float:
    """One zero-mean normal shadow-fading draw in dB."""
    z = rng.normal()
    if model.sigma_psi_db == 0:
        return 0.0
    return model.sigma_psi_db * z


def db_to_power(db):
    """Linear power ratio 10^(dB/10)."""
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def db_to_amplitude(db):
    """Linear field ratio 10^(dB/20)."""
    return 10.0 ** (np.asarray(db, dtype=float) / 20.0)


def power_to_db(p):
    return 10.0 * np.log10(np.asarray(p, dtype=float))
