"""SAGE extraction of multipath parameters from a CTF.

The signal model is the synthesis model itself. Each path is estimated from
its own admissible data (the CTF minus every other current path), maximizing

    J(theta) = |<x_l, s(theta)>|^2 / ||s(theta)||^2

coordinate-wise: delay, then departure angles, then arrival angles, and
finally the closed-form gain ``<x_l, s> / ||s||^2``. Each coordinate is
searched on a grid and then polished with bounded Brent (parabolic) steps.
Paths are initialized by successive interference cancellation.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .core import TWO_PI, Ctf, MpcParams
from .synthesis import LinkConfig, side_response

_TABLE_BYTES_LIMIT = 2 ** 28


@dataclass(frozen=True)
class SageConfig:
    """Search settings.

    ``max_delay_s`` defaults to the unambiguous delay range 1 / (frequency step).
    ``converge_tol`` is measured in grid cells.
    """

    n_paths: int
    max_iter: int = 20
    delay_grid: float = 1e-9
    angle_grid_rad: float = math.radians(2.0)
    converge_tol: float = 1e-2
    refine_steps: int = 3
    max_delay_s: Optional[float] = None
    init_sweeps: int = 2

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not (self.delay_grid > 0 and self.angle_grid_rad > 0):
            raise ValueError("grid resolutions must be > 0")
        if self.converge_tol < 0 or self.refine_steps < 0 or self.init_sweeps < 0:
            raise ValueError("converge_tol, refine_steps and init_sweeps must be >= 0")


@dataclass
class SageEstimate:
    mpcs: list
    residual_power: float
    iterations_run: int
    converged: bool
    residual_history: list = field(default_factory=list)


@dataclass
class _Path:
    """Mutable working copy of one path's parameters."""

    alpha: complex
    tau: float
    theta_t: float
    phi_t: float
    theta_r: float
    phi_r: float

    @classmethod
    def from_mpc(cls, m: MpcParams) -> "_Path":
        return cls(m.alpha, m.tau, m.theta_t, m.phi_t, m.theta_r, m.phi_r)

    def to_mpc(self) -> MpcParams:
        return MpcParams.canonical(self.alpha, self.tau, self.theta_t, self.phi_t,
                                   self.theta_r, self.phi_r)

    def vector(self) -> np.ndarray:
        return np.array([self.tau, self.theta_t, self.phi_t, self.theta_r, self.phi_r])


def _angle_grid(step: float):
    n_theta = int(round(math.pi / step)) + 1
    theta = np.linspace(0.0, math.pi, n_theta)
    n_phi = max(int(round(TWO_PI / step)), 1)
    phi = TWO_PI * np.arange(n_phi) / n_phi
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    return tt.ravel(), pp.ravel()


class SageEngine:
    """Candidate tables and objective evaluations for one link and config."""

    def __init__(self, link: LinkConfig, config: SageConfig):
        self.link = link
        self.config = config
        self.freqs = link.grid.points
        n_f = self.freqs.size

        if n_f > 1:
            span = config.max_delay_s
            if span is None:
                span = 1.0 / link.grid.spacing_hz
            self.tau_grid = np.arange(0.0, span, config.delay_grid)
        else:
            self.tau_grid = np.zeros(1)
        # conj of the delay phase: exp(+j 2 pi f tau)
        self.delay_table = np.exp(1j * TWO_PI * np.outer(self.tau_grid, self.freqs))

        theta, phi = _angle_grid(config.angle_grid_rad)
        self.tx_table = self._side_table(theta, phi, receive=False)
        self.rx_table = self._side_table(theta, phi, receive=True)

    def _side_table(self, theta, phi, receive):
        geometry = self.link.rx_geometry if receive else self.link.tx_geometry
        modes = self.link.rx_modes if receive else self.link.tx_modes
        per_candidate = len(modes) * self.freqs.size * 16
        chunk = max(1, _TABLE_BYTES_LIMIT // (8 * per_candidate))
        keep_t, keep_p, blocks = [], [], []
        for start in range(0, theta.size, chunk):
            t = theta[start:start + chunk]
            p = phi[start:start + chunk]
            resp = side_response(geometry, modes, t, p, self.freqs, self.link.pattern, receive)
            alive = np.any(resp != 0, axis=(1, 2))
            keep_t.append(t[alive])
            keep_p.append(p[alive])
            blocks.append(resp[alive])
        resp = np.concatenate(blocks)
        table = {
            "theta": np.concatenate(keep_t),
            "phi": np.concatenate(keep_p),
            # conj(response) flattened over (mode, freq) for one matrix-vector product
            "conj_flat": np.ascontiguousarray(np.conj(resp).reshape(resp.shape[0], -1)),
            "power": np.sum(np.abs(resp) ** 2, axis=1),  # (G, K)
        }
        return table

    # --- responses at a single point -------------------------------------------------
    def tx(self, theta, phi) -> np.ndarray:
        return side_response(self.link.tx_geometry, self.link.tx_modes, theta, phi, self.freqs,
                             self.link.pattern, receive=False)

    def rx(self, theta, phi) -> np.ndarray:
        return side_response(self.link.rx_geometry, self.link.rx_modes, theta, phi, self.freqs,
                             self.link.pattern, receive=True)

    def delay(self, tau) -> np.ndarray:
        return np.exp(-1j * TWO_PI * self.freqs * tau)

    def signal(self, p: _Path) -> np.ndarray:
        rx = self.rx(p.theta_r, p.phi_r)
        tx = self.tx(p.theta_t, p.phi_t)
        return p.alpha * rx[:, None, :] * tx[None, :, :] * self.delay(p.tau)[None, None, :]

    @staticmethod
    def _correlate(x, rx, tx, d):
        """(<s, x>, ||s||^2) for unit-gain s = rx * tx * d."""
        num = np.einsum("rk,tk,k,rtk->", np.conj(rx), np.conj(tx), np.conj(d), x)
        den = float(np.sum(np.sum(np.abs(rx) ** 2, axis=0) * np.sum(np.abs(tx) ** 2, axis=0)))
        return num, den

    def objective(self, x, p: _Path) -> float:
        num, den = self._correlate(x, self.rx(p.theta_r, p.phi_r), self.tx(p.theta_t, p.phi_t),
                                   self.delay(p.tau))
        return abs(num) ** 2 / den if den > 0 else 0.0

    def gain(self, x, p: _Path) -> complex:
        num, den = self._correlate(x, self.rx(p.theta_r, p.phi_r), self.tx(p.theta_t, p.phi_t),
                                   self.delay(p.tau))
        return num / den if den > 0 else 0j

    # --- coordinate searches ---------------------------------------------------------
    def _refine(self, func, x0, cell, lo=-np.inf, hi=np.inf):
        """Maximize ``func`` inside one grid cell either side of ``x0``."""
        a, b = max(x0 - cell, lo), min(x0 + cell, hi)
        if not b > a:
            return x0, func(x0)
        res = minimize_scalar(lambda v: -func(v), bounds=(a, b), method="bounded",
                              options={"xatol": cell * 1e-7})
        f0 = func(x0)
        if -res.fun > f0:
            return float(res.x), -float(res.fun)
        return x0, f0

    def update_delay(self, x, p: _Path):
        rx = self.rx(p.theta_r, p.phi_r)
        tx = self.tx(p.theta_t, p.phi_t)
        z = np.einsum("rk,tk,rtk->k", np.conj(rx), np.conj(tx), x)
        den = float(np.sum(np.sum(np.abs(rx) ** 2, axis=0) * np.sum(np.abs(tx) ** 2, axis=0)))
        if den == 0:
            return
        score = np.abs(self.delay_table @ z) ** 2
        cur_val = abs(np.dot(np.conj(self.delay(p.tau)), z)) ** 2
        g = int(np.argmax(score))
        best = float(self.tau_grid[g])

        def f(tau):
            return abs(np.dot(np.conj(self.delay(tau)), z)) ** 2

        for _ in range(max(self.config.refine_steps, 1) if self.config.refine_steps else 0):
            best, _ = self._refine(f, best, self.config.delay_grid, lo=0.0)
        if f(best) >= cur_val:
            p.tau = best

    def _update_angles(self, x, p: _Path, transmit: bool):
        d = self.delay(p.tau)
        if transmit:
            other = self.rx(p.theta_r, p.phi_r)
            y = np.einsum("rk,rtk,k->tk", np.conj(other), x, np.conj(d))
            table, resp = self.tx_table, self.tx
            cur = (p.theta_t, p.phi_t)
        else:
            other = self.tx(p.theta_t, p.phi_t)
            y = np.einsum("tk,rtk,k->rk", np.conj(other), x, np.conj(d))
            table, resp = self.rx_table, self.rx
            cur = (p.theta_r, p.phi_r)
        a = np.sum(np.abs(other) ** 2, axis=0)  # (K,)

        def f(theta, phi):
            r = resp(theta, phi)
            den = float(np.sum(np.sum(np.abs(r) ** 2, axis=0) * a))
            if den == 0:
                return 0.0
            return abs(np.sum(np.conj(r) * y)) ** 2 / den

        num = table["conj_flat"] @ y.ravel()
        den = table["power"] @ a
        score = np.divide(np.abs(num) ** 2, den, out=np.zeros_like(den), where=den > 0)
        g = int(np.argmax(score))
        theta, phi = float(table["theta"][g]), float(table["phi"][g])
        cell = self.config.angle_grid_rad
        for _ in range(self.config.refine_steps):
            theta, _ = self._refine(lambda v: f(v, phi), theta, cell, lo=0.0, hi=math.pi)
            phi, _ = self._refine(lambda v: f(theta, v), phi, cell)
        if f(theta, phi) >= f(*cur):
            theta, phi = min(max(theta, 0.0), math.pi), phi % TWO_PI
            if transmit:
                p.theta_t, p.phi_t = theta, phi
            else:
                p.theta_r, p.phi_r = theta, phi

    def m_step(self, x, p: _Path) -> _Path:
        p = _Path(p.alpha, p.tau, p.theta_t, p.phi_t, p.theta_r, p.phi_r)
        self.update_delay(x, p)
        self._update_angles(x, p, transmit=True)
        self._update_angles(x, p, transmit=False)
        p.alpha = self.gain(x, p)
        return p

    def initial_path(self, y) -> _Path:
        """Single-path start: non-coherent delay, non-coherent departure
        angles, coherent arrival angles, then a few M-step sweeps."""
        n_r, n_t, n_f = y.shape
        delay_score = np.sum(np.abs(self.delay_table @ y.reshape(-1, n_f).T) ** 2, axis=1)
        tau = float(self.tau_grid[int(np.argmax(delay_score))])

        def f_tau(v):
            return float(np.sum(np.abs(y.reshape(-1, n_f) @ np.conj(self.delay(v))) ** 2))

        for _ in range(self.config.refine_steps):
            tau, _ = self._refine(f_tau, tau, self.config.delay_grid, lo=0.0)

        w = y * np.conj(self.delay(tau))[None, None, :]
        proj = self.tx_table["conj_flat"] @ w.reshape(n_r, -1).T  # (G, N_r)
        tx_energy = self.tx_table["power"].sum(axis=1)
        score = np.divide(np.sum(np.abs(proj) ** 2, axis=1), tx_energy,
                          out=np.zeros_like(tx_energy), where=tx_energy > 0)
        g = int(np.argmax(score))
        p = _Path(0j, tau, float(self.tx_table["theta"][g]), float(self.tx_table["phi"][g]),
                  0.0, 0.0)
        # arrival angles from the coherent search with the departure fixed
        g_rx = int(np.argmax(self.rx_table["power"].sum(axis=1) > 0))
        p.theta_r, p.phi_r = float(self.rx_table["theta"][g_rx]), float(self.rx_table["phi"][g_rx])
        self._update_angles(y, p, transmit=False)
        p.alpha = self.gain(y, p)
        for _ in range(self.config.init_sweeps):
            p = self.m_step(y, p)
        return p


@functools.lru_cache(maxsize=2)
def _engine(link: LinkConfig, config: SageConfig) -> SageEngine:
    return SageEngine(link, config)


def get_engine(link: LinkConfig, config: SageConfig) -> SageEngine:
    """Shared engine for a link and the grid-related part of a config."""
    key = SageConfig(1, delay_grid=config.delay_grid, angle_grid_rad=config.angle_grid_rad,
                     refine_steps=config.refine_steps, max_delay_s=config.max_delay_s)
    engine = _engine(link, key)
    if engine.config != config:
        view = SageEngine.__new__(SageEngine)
        view.__dict__.update(engine.__dict__)
        view.config = config
        return view
    return engine


def _check(ctf: Ctf, link: LinkConfig) -> np.ndarray:
    x = np.asarray(ctf.values)
    if x.shape != link.shape:
        raise ValueError(f"CTF shape {x.shape} does not match link {link.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("CTF must be finite")
    return x


def sage_initialize(ctf: Ctf, link: LinkConfig, config: SageConfig) -> list:
    """Successive-interference-cancellation start for ``config.n_paths`` paths."""
    x = _check(ctf, link)
    if not np.any(x != 0):
        raise ValueError("cannot estimate paths from an all-zero CTF")
    engine = get_engine(link, config)
    return [p.to_mpc() for p in _initialize(engine, x)]


def _initialize(engine: SageEngine, x) -> list:
    residual = np.array(x, dtype=complex)
    paths = []
    for _ in range(engine.config.n_paths):
        p = engine.initial_path(residual)
        residual = residual - engine.signal(p)
        paths.append(p)
    return paths


def sage_e_step(ctf, mpcs: Sequence[MpcParams], path_index: int, link: LinkConfig) -> np.ndarray:
    """Admissible data for one path: the CTF minus every other path's contribution."""
    x = np.asarray(ctf.values if isinstance(ctf, Ctf) else ctf, dtype=complex)
    if not 0 <= path_index < len(mpcs):
        raise IndexError("path_index out of range")
    from .synthesis import synthesize_values

    others = [m for i, m in enumerate(mpcs) if i != path_index]
    return x - synthesize_values(others, link)


def sage_m_step(residual, current: MpcParams, link: LinkConfig, config: SageConfig) -> MpcParams:
    """Coordinate-wise maximization for one path on its admissible data."""
    x = np.asarray(residual.values if isinstance(residual, Ctf) else residual, dtype=complex)
    engine = get_engine(link, config)
    return engine.m_step(x, _Path.from_mpc(current)).to_mpc()


def _max_change(old: Sequence[_Path], new: Sequence[_Path], config: SageConfig) -> float:
    worst = 0.0
    for a, b in zip(old, new):
        d = np.abs(a.vector() - b.vector())
        for i in (2, 4):  # azimuths wrap around
            d[i] = min(d[i], TWO_PI - d[i])
        worst = max(worst, d[0] / config.delay_grid, float(np.max(d[1:])) / config.angle_grid_rad)
    return worst


def sage_estimate(ctf: Ctf, link: LinkConfig, config: SageConfig,
                  init: Optional[Sequence[MpcParams]] = None) -> SageEstimate:
    """Full SAGE run: initialization, then cyclic E/M sweeps over all paths.

    Stops once the largest parameter change of a sweep is below
    ``config.converge_tol`` grid cells, or after ``config.max_iter`` sweeps.
    """
    x = _check(ctf, link)
    total = float(np.sum(np.abs(x) ** 2))
    if total == 0:
        raise ValueError("cannot estimate paths from an all-zero CTF")
    engine = get_engine(link, config)
    if init is None:
        paths = _initialize(engine, x)
    else:
        if len(init) != config.n_paths:
            raise ValueError("init must hold n_paths components")
        paths = [_Path.from_mpc(m) for m in init]

    signals = [engine.signal(p) for p in paths]
    model = np.sum(signals, axis=0)
    history = [float(np.sum(np.abs(x - model) ** 2)) / total]
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        old = [_Path(**vars(p)) for p in paths]
        for l in range(len(paths)):
            x_l = x - (model - signals[l])
            paths[l] = engine.m_step(x_l, paths[l])
            new_signal = engine.signal(paths[l])
            model = model - signals[l] + new_signal
            signals[l] = new_signal
        # refresh the running sum so round-off cannot accumulate across sweeps
        model = np.sum(signals, axis=0)
        history.append(float(np.sum(np.abs(x - model) ** 2)) / total)
        if _max_change(old, paths, config) < config.converge_tol:
            converged = True
            break

    mpcs = [p.to_mpc() for p in paths]
    return SageEstimate(mpcs, history[-1], iterations, converged, history)
