"""Stochastic channel realizations: LOS geometry, delays, cluster powers,
angles, ray coupling, CTF synthesis, then path loss and shadowing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Ctf, MpcParams, RngStream, clip_elevation, wrap_azimuth
from .geometry import vector_angles
from .propagation import PathLossFit, ShadowingModel, db_to_amplitude, path_loss_db, sample_shadowing_db
from .synthesis import LinkConfig, synthesize_values

# equal-power intra-cluster offsets for unit RMS spread (20 rays)
RAY_OFFSETS_20 = (0.0447, -0.0447, 0.1413, -0.1413, 0.2492, -0.2492, 0.3715, -0.3715,
                  0.5129, -0.5129, 0.6797, -0.6797, 0.8844, -0.8844, 1.1481, -1.1481,
                  1.5195, -1.5195, 2.1551, -2.1551)

# sub-stream labels; realization r uses stream_id = r * STREAMS_PER_REALIZATION + label
STREAM_DELAYS = 0
STREAM_CLUSTER_SHADOWING = 1
STREAM_AZIMUTH = 2
STREAM_ELEVATION = 3
STREAM_COUPLING = 4
STREAM_LINK_SHADOWING = 5
STREAM_PHASES = 6
STREAMS_PER_REALIZATION = 16

ANGLE_SIGN_MODES = ("sign", "uniform")
Y_STD_MODES = ("los_angle", "spread")
POWER_EXPONENTS = ("decaying", "verbatim")


@dataclass(frozen=True)
class ScenarioParams:
    """Large-scale parameters of one propagation scenario.

    ``as_rms_rad`` holds the RMS spreads of (EOD, AOD, EOA, AOA), i.e. the
    order (theta_t, phi_t, theta_r, phi_r). ``mu_lg_eod`` is the mean of
    log10(ESD / 1 degree).
    """

    name: str
    los: bool
    l_clusters: int
    m_rays: int
    r_tau: float
    tau_rms_s: float
    as_rms_rad: tuple[float, float, float, float]
    zeta_db: float
    k_factor_db: float
    c_phi_nlos: float
    c_theta_nlos: float
    c_asa_rad: float
    c_asd_rad: float
    c_esa_rad: float
    mu_offset_eod_rad: float
    mu_lg_eod: float
    pathloss_fit: PathLossFit
    sigma_psi_db: float
    ray_offsets: Optional[tuple[float, ...]] = None
    angle_sign_mode: str = "sign"
    y_std_mode: str = "los_angle"
    power_exponent: str = "decaying"
    cluster_floor_db: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "as_rms_rad", tuple(float(a) for a in self.as_rms_rad))
        if self.l_clusters < 1:
            raise ValueError("l_clusters must be >= 1")
        if self.m_rays < 1:
            raise ValueError("m_rays must be >= 1")
        if not self.r_tau > 1:
            raise ValueError(f"r_tau must be > 1, got {self.r_tau}")
        if not self.tau_rms_s > 0:
            raise ValueError(f"tau_rms_s must be > 0, got {self.tau_rms_s}")
        if len(self.as_rms_rad) != 4:
            raise ValueError("as_rms_rad needs four spreads (theta_t, phi_t, theta_r, phi_r)")
        spreads = dict(as_rms_rad=min(self.as_rms_rad), zeta_db=self.zeta_db,
                       c_asa_rad=self.c_asa_rad, c_asd_rad=self.c_asd_rad,
                       c_esa_rad=self.c_esa_rad, sigma_psi_db=self.sigma_psi_db)
        for name, value in spreads.items():
            if not value >= 0:
                raise ValueError(f"{name} must be >= 0")
        if not (self.c_phi_nlos > 0 and self.c_theta_nlos > 0):
            raise ValueError("c_phi_nlos and c_theta_nlos must be > 0")
        if self.angle_sign_mode not in ANGLE_SIGN_MODES:
            raise ValueError(f"angle_sign_mode must be one of {ANGLE_SIGN_MODES}")
        if self.y_std_mode not in Y_STD_MODES:
            raise ValueError(f"y_std_mode must be one of {Y_STD_MODES}")
        if self.power_exponent not in POWER_EXPONENTS:
            raise ValueError(f"power_exponent must be one of {POWER_EXPONENTS}")
        if self.ray_offsets is not None:
            object.__setattr__(self, "ray_offsets", tuple(float(a) for a in self.ray_offsets))
            if len(self.ray_offsets) != self.m_rays:
                raise ValueError("ray_offsets length must equal m_rays")
        elif self.m_rays not in (1, len(RAY_OFFSETS_20)):
            raise ValueError("ray_offsets must be given when m_rays is neither 1 nor 20")

    @property
    def offsets(self) -> np.ndarray:
        if self.ray_offsets is not None:
            return np.array(self.ray_offsets)
        if self.m_rays == 1:
            return np.zeros(1)
        return np.array(RAY_OFFSETS_20)

    @property
    def shadowing(self) -> ShadowingModel:
        return ShadowingModel(self.sigma_psi_db)


@dataclass
class GenerationDraws:
    """Every random quantity consumed by one realization, for audit."""

    x_l: np.ndarray = None
    z_l: np.ndarray = None
    x_sign_l: dict = field(default_factory=dict)
    y_l: dict = field(default_factory=dict)
    coupling_perms: np.ndarray = None
    ray_phases: np.ndarray = None
    psi_db: float = 0.0

    def to_dict(self) -> dict:
        return {
            "x_l": self.x_l.tolist(),
            "z_l": self.z_l.tolist(),
            "x_sign_l": {k: v.tolist() for k, v in self.x_sign_l.items()},
            "y_l": {k: v.tolist() for k, v in self.y_l.items()},
            "coupling_perms": self.coupling_perms.tolist(),
            "ray_phases": self.ray_phases.tolist(),
            "psi_db": self.psi_db,
        }


@dataclass
class GeneratedChannel:
    mpcs: list
    ctf_normalized: Ctf
    ctf_final: Ctf
    draws: GenerationDraws
    path_loss_db: np.ndarray
    los_angles: dict
    raw_delays: np.ndarray
    scaled_delays: np.ndarray
    cluster_powers: np.ndarray
    cluster_angles: dict
    ray_angles: np.ndarray
    cluster_index: np.ndarray


def los_angles(link: LinkConfig) -> dict:
    """Global LOS departure (at Tx) and arrival (at Rx) angles from the array centers."""
    los = np.asarray(link.rx_geometry.center_m) - np.asarray(link.tx_geometry.center_m)
    if not np.linalg.norm(los) > 0:
        raise ValueError("transmit and receive centers coincide; LOS direction undefined")
    theta_t, phi_t = vector_angles(los)
    theta_r, phi_r = vector_angles(-los)
    return {"theta_t": float(theta_t), "phi_t": float(phi_t),
            "theta_r": float(theta_r), "phi_r": float(phi_r)}


def los_delay_divisor(k_db: float) -> float:
    return 0.7705 - 0.0433 * k_db + 0.0002 * k_db ** 2 + 0.000017 * k_db ** 3


def _los_scaling_poly(k_db: float) -> float:
    return 1.1035 - 0.028 * k_db - 0.002 * k_db ** 2 + 0.0001 * k_db ** 3


def generate_delays(params: ScenarioParams, rng: RngStream, draws: GenerationDraws | None = None):
    """Cluster delays: exponential draws, shifted to start at 0 and sorted.

    Returns ``(raw, scaled)``; ``scaled`` differs from ``raw`` only for LOS,
    where it is divided by the K-factor dependent compensation polynomial.
    """
    x = rng.uniform(params.l_clusters)
    if draws is not None:
        draws.x_l = x
    tau = -params.r_tau * params.tau_rms_s * np.log(x)
    raw = np.sort(tau - tau.min())
    if params.los:
        return raw, raw / los_delay_divisor(params.k_factor_db)
    return raw, raw.copy()


def generate_powers(raw_delays, params: ScenarioParams, rng: RngStream,
                    draws: GenerationDraws | None = None):
    """Normalized cluster powers and per-ray powers from unscaled delays."""
    raw_delays = np.asarray(raw_delays, dtype=float)
    z = rng.normal(raw_delays.size, scale=params.zeta_db)
    if draws is not None:
        draws.z_l = z
    rate = (params.r_tau - 1.0) / (params.r_tau * params.tau_rms_s)
    sign = -1.0 if params.power_exponent == "decaying" else 1.0
    # exponent shifted by its maximum; the shift cancels in the normalization
    log_p = sign * raw_delays * rate - z / 10.0 * math.log(10.0)
    p = np.exp(log_p - log_p.max())
    p = p / p.sum()
    if params.los:
        k_r = 10.0 ** (params.k_factor_db / 10.0)
        p = p / (k_r + 1.0)
        p[0] += k_r / (k_r + 1.0)
    return p, p / params.m_rays


def azimuth_scaling_factor(params: ScenarioParams) -> float:
    if params.los:
        return params.c_phi_nlos * _los_scaling_poly(params.k_factor_db)
    return params.c_phi_nlos


def elevation_scaling_factor(params: ScenarioParams) -> float:
    if params.los:
        return params.c_theta_nlos * _los_scaling_poly(params.k_factor_db)
    return params.c_theta_nlos


def _side_keys(side: str):
    if side == "arrival":
        return "r"
    if side == "departure":
        return "t"
    raise ValueError("side must be 'arrival' or 'departure'")


def _cluster_draws(params: ScenarioParams, n: int, rng: RngStream, los_angle: float, spread: float):
    if params.angle_sign_mode == "sign":
        x = rng.signs(n)
    else:
        x = rng.uniform(n)
    y_std = abs(los_angle) / 7.0 if params.y_std_mode == "los_angle" else spread / 7.0
    y = rng.normal(n, scale=y_std)
    return x, y


def generate_azimuths(side: str, cluster_powers, params: ScenarioParams, los_angle_rad: float,
                      rng: RngStream, draws: GenerationDraws | None = None):
    """Cluster and ray azimuths for arrival (AOA) or departure (AOD).

    Returns ``(cluster_angles (L,), ray_angles (L, M))`` wrapped to [0, 2 pi).
    """
    s = _side_keys(side)
    p = np.asarray(cluster_powers, dtype=float)
    spread = params.as_rms_rad[3] if s == "r" else params.as_rms_rad[1]
    x, y = _cluster_draws(params, p.size, rng, los_angle_rad, spread)
    if draws is not None:
        draws.x_sign_l["phi_" + s] = x
        draws.y_l["phi_" + s] = y
    ratio = np.clip(p / p.max(), np.finfo(float).tiny, 1.0)
    term = 2.0 * (spread / 1.4) * np.sqrt(-np.log(ratio)) / azimuth_scaling_factor(params)
    dev = term * x + y
    if params.los:
        dev = dev - dev[0]
    cluster = dev + los_angle_rad
    ray_spread = params.c_asa_rad if s == "r" else params.c_asd_rad
    rays = cluster[:, None] + ray_spread * params.offsets[None, :]
    return wrap_azimuth(cluster), wrap_azimuth(rays)


def generate_elevations(side: str, cluster_powers, params: ScenarioParams, los_angle_rad: float,
                        rng: RngStream, draws: GenerationDraws | None = None):
    """Cluster and ray elevations for arrival (EOA) or departure (EOD), clipped to [0, pi]."""
    s = _side_keys(side)
    p = np.asarray(cluster_powers, dtype=float)
    spread = params.as_rms_rad[2] if s == "r" else params.as_rms_rad[0]
    x, y = _cluster_draws(params, p.size, rng, los_angle_rad, spread)
    if draws is not None:
        draws.x_sign_l["theta_" + s] = x
        draws.y_l["theta_" + s] = y
    ratio = np.clip(p / p.max(), np.finfo(float).tiny, 1.0)
    term = spread * np.log(ratio) / elevation_scaling_factor(params)
    dev = term * x - y
    if params.los:
        dev = dev - dev[0]
    elif s == "t":
        dev = dev - params.mu_offset_eod_rad
    cluster = dev + los_angle_rad
    if s == "r":
        ray_spread = params.c_esa_rad
    else:
        ray_spread = 0.375 * math.radians(10.0 ** params.mu_lg_eod)
    rays = cluster[:, None] + ray_spread * params.offsets[None, :]
    return clip_elevation(cluster), clip_elevation(rays)


def couple_rays(azimuths: dict, elevations: dict, rng: RngStream):
    """Randomly pair rays within each cluster.

    ``azimuths`` maps ``"arrival"``/``"departure"`` to (L, M) ray arrays, and
    likewise ``elevations``. AOA keeps its order; AOD, EOA and EOD each get an
    independent per-cluster permutation. Returns ``(angles, perms)`` where
    ``angles`` has shape (L, M, 4) in (theta_t, phi_t, theta_r, phi_r) order and
    ``perms`` (L, 3, M) lists the AOD, EOA, EOD permutations.
    """
    aoa = np.asarray(azimuths["arrival"], dtype=float)
    aod = np.asarray(azimuths["departure"], dtype=float)
    eoa = np.asarray(elevations["arrival"], dtype=float)
    eod = np.asarray(elevations["departure"], dtype=float)
    if not (aoa.shape == aod.shape == eoa.shape == eod.shape) or aoa.ndim != 2:
        raise ValueError("all four ray-angle arrays must share one (L, M) shape")
    n_clusters, m_rays = aoa.shape
    perms = np.empty((n_clusters, 3, m_rays), dtype=int)
    out = np.empty((n_clusters, m_rays, 4))
    for l in range(n_clusters):
        for j in range(3):
            perms[l, j] = rng.permutation(m_rays)
        out[l, :, 0] = eod[l, perms[l, 2]]
        out[l, :, 1] = aod[l, perms[l, 0]]
        out[l, :, 2] = eoa[l, perms[l, 1]]
        out[l, :, 3] = aoa[l]
    return out, perms


def mode_pair_path_loss(fit: PathLossFit, link: LinkConfig, d_m: float) -> np.ndarray:
    """Fitted path loss (dB) for every (rx mode, tx mode) pair at the grid center."""
    f_ghz = link.grid.center_hz / 1e9
    r_t = link.tx_geometry.radius_m
    r_r = link.rx_geometry.radius_m
    pl = np.empty((len(link.rx_modes), len(link.tx_modes)))
    for i, m_r in enumerate(link.rx_modes.modes):
        for j, m_t in enumerate(link.tx_modes.modes):
            pl[i, j] = path_loss_db(fit, m_t, m_r, f_ghz, d_m, r_t, r_r)
    return pl


def generate_channel(scenario: ScenarioParams, link: LinkConfig, d_m: float, seed: int,
                     realization: int = 0) -> GeneratedChannel:
    """Run the full realization procedure for one drop.

    Raises:
        NullDepthError: a mode pair of the path-loss fit sits in a Bessel null.
    """
    if not d_m > 0:
        raise ValueError("distance must be > 0")
    base = int(realization) * STREAMS_PER_REALIZATION

    def stream(label):
        return RngStream(seed, base + label)

    draws = GenerationDraws()
    los = los_angles(link)
    pl_db = mode_pair_path_loss(scenario.pathloss_fit, link, d_m)

    raw, scaled = generate_delays(scenario, stream(STREAM_DELAYS), draws)
    powers, _ = generate_powers(raw, scenario, stream(STREAM_CLUSTER_SHADOWING), draws)

    if scenario.cluster_floor_db is not None:
        keep = powers >= powers.max() * 10.0 ** (-abs(scenario.cluster_floor_db) / 10.0)
        raw, scaled, powers = raw[keep], scaled[keep], powers[keep] / powers[keep].sum()

    az_rng = stream(STREAM_AZIMUTH)
    el_rng = stream(STREAM_ELEVATION)
    aoa_c, aoa = generate_azimuths("arrival", powers, scenario, los["phi_r"], az_rng, draws)
    aod_c, aod = generate_azimuths("departure", powers, scenario, los["phi_t"], az_rng, draws)
    eoa_c, eoa = generate_elevations("arrival", powers, scenario, los["theta_r"], el_rng, draws)
    eod_c, eod = generate_elevations("departure", powers, scenario, los["theta_t"], el_rng, draws)

    angles, perms = couple_rays({"arrival": aoa, "departure": aod},
                                {"arrival": eoa, "departure": eod}, stream(STREAM_COUPLING))
    draws.coupling_perms = perms

    n_clusters, m_rays = aoa.shape
    phases = 2.0 * math.pi * stream(STREAM_PHASES).uniform(n_clusters * m_rays)
    draws.ray_phases = phases
    amplitude = np.sqrt(powers / m_rays)

    mpcs = []
    for l in range(n_clusters):
        for m in range(m_rays):
            th_t, ph_t, th_r, ph_r = angles[l, m]
            alpha = amplitude[l] * np.exp(1j * phases[l * m_rays + m])
            mpcs.append(MpcParams(alpha, scaled[l], th_t, ph_t, th_r, ph_r))

    normalized = synthesize_values(mpcs, link)
    psi = sample_shadowing_db(scenario.shadowing, stream(STREAM_LINK_SHADOWING))
    draws.psi_db = psi
    final = normalized * db_to_amplitude(-pl_db - psi)[:, :, None]

    mk = lambda v: Ctf(v, link.grid, link.tx_modes, link.rx_modes)  # noqa: E731
    return GeneratedChannel(
        mpcs=mpcs,
        ctf_normalized=mk(normalized),
        ctf_final=mk(final),
        draws=draws,
        path_loss_db=pl_db,
        los_angles=los,
        raw_delays=raw,
        scaled_delays=scaled,
        cluster_powers=powers,
        cluster_angles={"phi_r": aoa_c, "phi_t": aod_c, "theta_r": eoa_c, "theta_t": eod_c},
        ray_angles=angles,
        cluster_index=np.repeat(np.arange(n_clusters), m_rays),
    )
