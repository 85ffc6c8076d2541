"""Independent reference implementations used to pin expected values.

Nothing here imports the package under test.
"""

import cmath
import math

import mpmath
import numpy as np
from scipy.spatial.transform import Rotation

MASK64 = (1 << 64) - 1
_PHILOX_M = (0xD2E7470EE14C6C93, 0xCA5A826395121157)
_PHILOX_W = (0x9E3779B97F4A7C15, 0xBB67AE8584CAA73B)
C = 299792458.0


def philox4x64_10(counter, key):
    """One Philox4x64-10 block in plain integer arithmetic."""
    x = list(counter)
    k0, k1 = key
    for _ in range(10):
        p0 = _PHILOX_M[0] * x[0]
        p1 = _PHILOX_M[1] * x[2]
        hi0, lo0 = p0 >> 64, p0 & MASK64
        hi1, lo1 = p1 >> 64, p1 & MASK64
        x = [hi1 ^ x[1] ^ k0, lo1, hi0 ^ x[3] ^ k1, lo0]
        k0 = (k0 + _PHILOX_W[0]) & MASK64
        k1 = (k1 + _PHILOX_W[1]) & MASK64
    return x


def philox_words(seed, stream_id, n, first_counter=1):
    """Raw words of a stream keyed by (seed, stream_id), blocks at counters 1, 2, ..."""
    out = []
    ctr = first_counter
    while len(out) < n:
        out.extend(philox4x64_10([ctr, 0, 0, 0], [seed & MASK64, stream_id & MASK64]))
        ctr += 1
    return out[:n]


def uniform_from_word(w):
    return ((w >> 11) + 0.5) * 2.0 ** -53


def mp_path_loss(a, b, c, d_exp, e, m_t, m_r, f_ghz, d, r_t, r_r, dps=50):
    """Fitted path-loss row evaluated in arbitrary precision."""
    with mpmath.workdps(dps):
        f = mpmath.mpf(f_ghz)
        dd = mpmath.mpf(d)
        rt, rr = mpmath.mpf(r_t), mpmath.mpf(r_r)
        x_t = mpmath.mpf(c) * f * rr / mpmath.sqrt(rr ** 2 + dd ** 2)
        x_r = mpmath.mpf(c) * f * rt / mpmath.sqrt(rt ** 2 + dd ** 2)
        jt = abs(mpmath.besselj(m_t, x_t))
        jr = abs(mpmath.besselj(m_r, x_r))
        val = (mpmath.mpf(a) + mpmath.mpf(b) * mpmath.log10(jt * jr)
               + mpmath.mpf(d_exp) * mpmath.log10(dd) + mpmath.mpf(e) * mpmath.log10(f))
        return float(val)


def mp_bessel(m, x, dps=40):
    with mpmath.workdps(dps):
        return float(mpmath.besselj(m, x))


def local_angles(theta, phi, rot):
    """Global direction -> antenna-local (theta, phi) using scipy's extrinsic x-y-z Euler rotation."""
    r = Rotation.from_euler("xyz", rot).as_matrix()
    w = np.array([math.cos(phi) * math.sin(theta), math.sin(phi) * math.sin(theta), math.cos(theta)])
    v = r.T @ w
    t = math.atan2(math.hypot(v[0], v[1]), v[2])
    p = math.atan2(v[1], v[0]) % (2 * math.pi)
    return t, p


def direct_ctf(paths, tx_center, tx_rot, rx_center, rx_rot, tx_modes, rx_modes, freqs):
    """Loop-based CTF for the ideal mode pattern.

    ``paths`` holds tuples (alpha, tau, theta_t, phi_t, theta_r, phi_r).
    """
    out = np.zeros((len(rx_modes), len(tx_modes), len(freqs)), dtype=complex)
    for alpha, tau, th_t, ph_t, th_r, ph_r in paths:
        wt = np.array([math.cos(ph_t) * math.sin(th_t), math.sin(ph_t) * math.sin(th_t), math.cos(th_t)])
        wr = np.array([math.cos(ph_r) * math.sin(th_r), math.sin(ph_r) * math.sin(th_r), math.cos(th_r)])
        lt, pt = local_angles(th_t, ph_t, tx_rot) if any(tx_rot) else (th_t, ph_t)
        lr, pr = local_angles(th_r, ph_r, rx_rot) if any(rx_rot) else (th_r, ph_r)
        for i, m_r in enumerate(rx_modes):
            g_r = cmath.exp(1j * m_r * pr) if lr <= math.pi / 2 else 0.0
            for j, m_t in enumerate(tx_modes):
                g_t = cmath.exp(1j * m_t * pt) if lt <= math.pi / 2 else 0.0
                for k, f in enumerate(freqs):
                    c_t = cmath.exp(2j * math.pi * f / C * float(np.dot(tx_center, wt)))
                    c_r = cmath.exp(2j * math.pi * f / C * float(np.dot(rx_center, wr)))
                    out[i, j, k] += (alpha * c_r * c_t.conjugate() * g_t * g_r.conjugate()
                                     * cmath.exp(-2j * math.pi * f * tau))
    return out


def uca_element_gain(m, theta_l, phi_l, f, n, radius):
    """Mode pattern built element by element: sum_n e^{j m psi_n} e^{j k R sin(theta) cos(phi - psi_n)} / sqrt(N)."""
    if theta_l > math.pi / 2:
        return 0j
    k = 2 * math.pi * f / C
    total = 0j
    for q in range(n):
        psi = 2 * math.pi * q / n
        total += cmath.exp(1j * m * psi) * cmath.exp(1j * k * radius * math.sin(theta_l) * math.cos(phi_l - psi))
    return total / math.sqrt(n)
