"""Lossless CTF and MPC file formats (CSV v1 and a JSON equivalent).

CTF-CSV v1::

    #format=ctf-csv
    #version=1
    #n_r=8
    #n_t=8
    #n_f=51
    #center_hz=5800000000
    #bandwidth_hz=100000000
    #tx_modes=-3;-2;-1;0;1;2;3;4
    #rx_modes=-3;-2;-1;0;1;2;3;4
    #seed=7
    n_r,n_t,k,f_hz,re,im
    -3,-3,0,5750000000,0.12,-0.5
    ...

The ``n_r``/``n_t`` columns carry the receive/transmit OAM mode numbers, ``k``
is the frequency index. Rows run over receive mode, then transmit mode, then
frequency. Every float is written with 17 significant digits so reading back
reproduces the values bit for bit.

MPC-CSV v1 has two comment lines (format, version), the header
``alpha_re,alpha_im,tau_s,theta_t,phi_t,theta_r,phi_r`` and one row per path.
"""

from __future__ import annotations

import json
import os
from typing import Optional, Sequence

import numpy as np

from .core import Ctf, FrequencyGrid, MpcParams, OamModeSet, make_frequency_grid

CTF_FORMAT = "ctf-csv"
MPC_FORMAT = "mpc-csv"
SUPPORTED_VERSIONS = (1,)
CTF_COLUMNS = ("n_r", "n_t", "k", "f_hz", "re", "im")
MPC_COLUMNS = ("alpha_re", "alpha_im", "tau_s", "theta_t", "phi_t", "theta_r", "phi_r")
_FREQ_RTOL = 1e-9


class FormatError(ValueError):
    """Malformed or inconsistent data file."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}" + (f":{line}" if line is not None else "") + ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


def fmt(x: float) -> str:
    """Locale-independent 17-significant-digit float text."""
    return format(float(x), ".17g")


def _modes_text(modes: OamModeSet) -> str:
    return ";".join(str(m) for m in modes.modes)


def _is_json(path) -> bool:
    return str(path).lower().endswith(".json")


def _check_version(value, path, line=None):
    try:
        version = int(value)
    except (TypeError, ValueError):
        version = value
    if version not in SUPPORTED_VERSIONS:
        raise FormatError(f"unsupported format version {value!r}; supported versions: "
                          f"{', '.join(map(str, SUPPORTED_VERSIONS))}", path, line)


# --- CTF ---------------------------------------------------------------------------

def ctf_header(ctf: Ctf, seed: Optional[int] = None) -> dict:
    n_r, n_t, n_f = ctf.shape
    return {
        "format": CTF_FORMAT,
        "version": 1,
        "n_r": n_r,
        "n_t": n_t,
        "n_f": n_f,
        "center_hz": fmt(ctf.grid.center_hz),
        "bandwidth_hz": fmt(ctf.grid.bandwidth_hz),
        "tx_modes": _modes_text(ctf.tx_modes),
        "rx_modes": _modes_text(ctf.rx_modes),
        "seed": "" if seed is None else int(seed),
    }


def ctf_to_text(ctf: Ctf, seed: Optional[int] = None) -> str:
    lines = [f"#{k}={v}" for k, v in ctf_header(ctf, seed).items()]
    lines.append(",".join(CTF_COLUMNS))
    values = np.asarray(ctf.values)
    freqs = [fmt(f) for f in ctf.grid.points]
    for i, m_r in enumerate(ctf.rx_modes.modes):
        for j, m_t in enumerate(ctf.tx_modes.modes):
            row = values[i, j]
            for k in range(row.size):
                v = row[k]
                lines.append(f"{m_r},{m_t},{k},{freqs[k]},{fmt(v.real)},{fmt(v.imag)}")
    return "\n".join(lines) + "\n"


def write_ctf(path, ctf: Ctf, seed: Optional[int] = None) -> None:
    """Write a CTF as CTF-CSV v1, or as JSON when ``path`` ends in ``.json``."""
    if _is_json(path):
        text = ctf_to_json(ctf, seed)
    else:
        text = ctf_to_text(ctf, seed)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _parse_modes(text, path, key) -> OamModeSet:
    try:
        modes = tuple(int(t) for t in str(text).split(";") if t != "")
        return OamModeSet(len(modes), modes)
    except ValueError as exc:
        raise FormatError(f"bad {key}: {exc}", path) from None


def _grid_from_header(h, path) -> FrequencyGrid:
    try:
        return make_frequency_grid(float(h["center_hz"]), float(h["bandwidth_hz"]), int(h["n_f"]))
    except KeyError as exc:
        raise FormatError(f"missing header key {exc.args[0]!r}", path) from None
    except ValueError as exc:
        raise FormatError(f"bad frequency grid: {exc}", path) from None


def read_ctf_header(path) -> dict:
    header = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].rstrip("\n").partition("=")
            header[key.strip()] = value.strip()
    return header


def read_ctf(path) -> Ctf:
    """Read a CTF file written by :func:`write_ctf`.

    Raises:
        FormatError: unknown version, shape mismatch or malformed rows.
    """
    if _is_json(path):
        return ctf_from_json(open(path, encoding="utf-8").read(), path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header, body_start = {}, 0
    for idx, line in enumerate(lines):
        if not line.startswith("#"):
            body_start = idx
            break
        key, _, value = line[1:].partition("=")
        header[key.strip()] = value.strip()
    else:
        raise FormatError("no column header row", path)
    if header.get("format") != CTF_FORMAT:
        raise FormatError(f"not a {CTF_FORMAT} file (format={header.get('format')!r})", path)
    _check_version(header.get("version"), path)
    grid = _grid_from_header(header, path)
    tx_modes = _parse_modes(header.get("tx_modes", ""), path, "tx_modes")
    rx_modes = _parse_modes(header.get("rx_modes", ""), path, "rx_modes")
    try:
        n_r, n_t, n_f = int(header["n_r"]), int(header["n_t"]), int(header["n_f"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad shape header: {exc}", path) from None
    if (len(rx_modes), len(tx_modes)) != (n_r, n_t):
        raise FormatError("mode lists do not match n_r/n_t", path)
    if lines[body_start].strip() != ",".join(CTF_COLUMNS):
        raise FormatError(f"expected column header {','.join(CTF_COLUMNS)!r}", path, body_start + 1)

    rows = [ln for ln in lines[body_start + 1:]]
    while rows and rows[-1].strip() == "":
        rows.pop()
    expected = n_r * n_t * n_f
    if len(rows) != expected:
        raise FormatError(f"header promises {expected} rows (n_r*n_t*n_f) but found {len(rows)}", path)
    values = np.empty((n_r, n_t, n_f), dtype=complex)
    seen = np.zeros((n_r, n_t, n_f), dtype=bool)
    points = grid.points
    for offset, line in enumerate(rows):
        lineno = body_start + 2 + offset
        parts = line.split(",")
        if len(parts) != len(CTF_COLUMNS):
            raise FormatError(f"expected {len(CTF_COLUMNS)} fields, got {len(parts)}", path, lineno)
        try:
            m_r, m_t, k = int(parts[0]), int(parts[1]), int(parts[2])
            f_hz, re, im = float(parts[3]), float(parts[4]), float(parts[5])
            i, j = rx_modes.index_of(m_r), tx_modes.index_of(m_t)
        except ValueError as exc:
            raise FormatError(f"malformed row: {exc}", path, lineno) from None
        if not 0 <= k < n_f:
            raise FormatError(f"frequency index {k} out of range", path, lineno)
        if abs(f_hz - points[k]) > _FREQ_RTOL * abs(points[k]):
            raise FormatError(f"f_hz {f_hz} disagrees with the header grid", path, lineno)
        if seen[i, j, k]:
            raise FormatError("duplicate row", path, lineno)
        seen[i, j, k] = True
        values[i, j, k] = complex(re, im)
    try:
        return Ctf(values, grid, tx_modes, rx_modes)
    except ValueError as exc:
        raise FormatError(str(exc), path) from None


def ctf_to_json(ctf: Ctf, seed: Optional[int] = None) -> str:
    doc = ctf_header(ctf, seed)
    doc["format"] = "ctf-json"
    doc["center_hz"] = float(ctf.grid.center_hz)
    doc["bandwidth_hz"] = float(ctf.grid.bandwidth_hz)
    doc["tx_modes"] = list(ctf.tx_modes.modes)
    doc["rx_modes"] = list(ctf.rx_modes.modes)
    doc["seed"] = None if seed is None else int(seed)
    values = np.asarray(ctf.values)
    doc["re"] = values.real.tolist()
    doc["im"] = values.imag.tolist()
    # json writes floats with repr(), the shortest exact round-trip form
    return json.dumps(doc, indent=1) + "\n"


def ctf_from_json(text: str, path=None) -> Ctf:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    if doc.get("format") != "ctf-json":
        raise FormatError("not a ctf-json document", path)
    _check_version(doc.get("version"), path)
    grid = _grid_from_header(doc, path)
    tx = tuple(int(m) for m in doc["tx_modes"])
    rx = tuple(int(m) for m in doc["rx_modes"])
    values = np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc["im"], dtype=float)
    if values.shape != (len(rx), len(tx), grid.n_points):
        raise FormatError(f"value shape {values.shape} does not match the header", path)
    return Ctf(values, grid, OamModeSet(len(tx), tx), OamModeSet(len(rx), rx))


# --- MPC ---------------------------------------------------------------------------

def mpcs_to_text(mpcs: Sequence[MpcParams]) -> str:
    lines = [f"#format={MPC_FORMAT}", "#version=1", ",".join(MPC_COLUMNS)]
    for m in mpcs:
        a = complex(m.alpha)
        lines.append(",".join(fmt(v) for v in (a.real, a.imag, m.tau, m.theta_t, m.phi_t,
                                                m.theta_r, m.phi_r)))
    return "\n".join(lines) + "\n"


def write_mpcs(path, mpcs: Sequence[MpcParams]) -> None:
    """Write paths as MPC-CSV v1, or JSON when ``path`` ends in ``.json``."""
    if _is_json(path):
        rows = [dict(zip(MPC_COLUMNS, (complex(m.alpha).real, complex(m.alpha).imag, m.tau,
                                       m.theta_t, m.phi_t, m.theta_r, m.phi_r))) for m in mpcs]
        text = json.dumps({"format": "mpc-json", "version": 1, "mpcs": rows}, indent=1) + "\n"
    else:
        text = mpcs_to_text(mpcs)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _mpc_from_values(vals, path, line) -> MpcParams:
    try:
        a_re, a_im, tau, th_t, ph_t, th_r, ph_r = (float(v) for v in vals)
        return MpcParams(complex(a_re, a_im), tau, th_t, ph_t, th_r, ph_r)
    except ValueError as exc:
        raise FormatError(f"invalid MPC row: {exc}", path, line) from None


def read_mpcs(path) -> list:
    """Read paths written by :func:`write_mpcs`, enforcing MPC range invariants."""
    if _is_json(path):
        try:
            doc = json.loads(open(path, encoding="utf-8").read())
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
        if doc.get("format") != "mpc-json":
            raise FormatError("not an mpc-json document", path)
        _check_version(doc.get("version"), path)
        out = []
        for i, row in enumerate(doc.get("mpcs", [])):
            try:
                vals = [row[c] for c in MPC_COLUMNS]
            except (KeyError, TypeError):
                raise FormatError(f"mpc {i} lacks one of {MPC_COLUMNS}", path) from None
            out.append(_mpc_from_values(vals, path, None))
        return out

    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    header_seen = False
    out = []
    meta = {}
    for lineno, line in enumerate(lines, start=1):
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
            continue
        if line.strip() == "":
            continue
        if not header_seen:
            if line.strip() != ",".join(MPC_COLUMNS):
                raise FormatError(f"expected column header {','.join(MPC_COLUMNS)!r}", path, lineno)
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != len(MPC_COLUMNS):
            raise FormatError(f"expected {len(MPC_COLUMNS)} fields, got {len(parts)}", path, lineno)
        out.append(_mpc_from_values(parts, path, lineno))
    if "format" in meta and meta["format"] != MPC_FORMAT:
        raise FormatError(f"not a {MPC_FORMAT} file", path)
    if "version" in meta:
        _check_version(meta["version"], path)
    if not header_seen:
        raise FormatError("missing column header", path)
    return out


# --- plain tables ------------------------------------------------------------------

def write_table(path, columns: Sequence[str], rows: Sequence[Sequence], fmt_name: str = "csv") -> None:
    """Write a table as CSV or as a JSON list of records. Floats use 17 digits in CSV."""

    def cell(v):
        if isinstance(v, (float, np.floating)):
            return fmt(v)
        return str(v)

    def record_value(v):
        v = v.item() if isinstance(v, np.generic) else v
        # JSON has no inf/nan literals
        if isinstance(v, float) and not np.isfinite(v):
            return None
        return v

    if fmt_name == "json":
        records = [dict(zip(columns, (record_value(v) for v in row))) for row in rows]
        text = json.dumps(records, indent=1) + "\n"
    elif fmt_name == "csv":
        text = "\n".join([",".join(columns)] + [",".join(cell(v) for v in row) for row in rows]) + "\n"
    else:
        raise ValueError(f"unknown table format {fmt_name!r}")
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
