"""Run configuration: JSON loading, schema validation, defaults and seed policy."""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

from .core import FrequencyGrid, OamModeSet, make_frequency_grid, mode_index_map
from .generator import ScenarioParams
from .geometry import uca_positions
from .propagation import TABLE_FITS, PathLossFit
from .synthesis import LinkConfig

SEED_ENV_VAR = "OAM_SIM_SEED"

LINK_DEFAULTS = {
    "n_elements": 8,
    "radius_m": 0.055,
    "center_hz": 5.8e9,
    "bandwidth_hz": 1e8,
    "n_points": 51,
    "pattern": "mode",
    "layout": "facing",
    "height_m": 1.2,
}
OUTPUT_DEFAULTS = {
    "ctf": "ctf.csv",
    "ctf_normalized": "ctf_normalized.csv",
    "mpcs": "mpcs.csv",
    "draws": "draws.json",
}
_SCENARIO_META = ("description", "placeholder_fields", "placeholder_note")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is a dotted path, ``line`` a 1-based line."""

    def __init__(self, message, field=None, line=None, path=None):
        parts = []
        if path is not None:
            parts.append(str(path) + (f":{line}" if line is not None else ""))
        if field:
            parts.append(field)
        super().__init__(": ".join(parts + [message]))
        self.field = field
        self.line = line
        self.path = path


@dataclass
class RunConfig:
    scenario: ScenarioParams
    link: LinkConfig
    distance_m: float
    seed: Optional[int]
    ensemble: int
    outputs: dict
    resolved: dict
    source: Optional[str] = None


def _data_file(*parts) -> Path:
    return Path(str(resources.files("oamgbsm").joinpath("data", *parts)))


def bundled_config_path(name: str = "indoor_los") -> Path:
    return _data_file("configs", f"{name}.json")


def bundled_scenarios() -> list:
    return sorted(p.stem for p in _data_file("scenarios").glob("*.json"))


def _schema(name: str) -> dict:
    return json.loads(_data_file("schemas", f"{name}.schema.json").read_text(encoding="utf-8"))


_CONSTRAINT_TEXT = {
    "exclusiveMinimum": ">", "minimum": ">=", "exclusiveMaximum": "<", "maximum": "<=",
}


def _validate(doc, schema_name, prefix, path):
    validator = jsonschema.Draft202012Validator(_schema(schema_name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    err = errors[0]
    field = ".".join([prefix] * bool(prefix) + [str(p) for p in err.absolute_path]) or None
    message = err.message
    op = _CONSTRAINT_TEXT.get(err.validator)
    if op is not None:
        name = str(err.absolute_path[-1]) if err.absolute_path else "value"
        message += f" (constraint: {name} {op} {err.validator_value})"
    raise ConfigError(message, field=field, path=path)


def _read_json(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno,
                          path=path) from None


def scenario_from_dict(doc: dict, field_prefix: str = "scenario", path=None) -> ScenarioParams:
    """Validate and build a :class:`ScenarioParams` from its JSON form."""
    _validate(doc, "scenario", field_prefix, path)
    fields = {k: v for k, v in doc.items() if k not in _SCENARIO_META}
    fit = fields.pop("pathloss_fit")
    if isinstance(fit, str):
        fields["pathloss_fit"] = TABLE_FITS[fit]
    else:
        fields["pathloss_fit"] = PathLossFit(scenario_name=doc["name"], **fit)
    fields["as_rms_rad"] = tuple(fields["as_rms_rad"])
    if fields.get("ray_offsets") is not None:
        fields["ray_offsets"] = tuple(fields["ray_offsets"])
    try:
        return ScenarioParams(**fields)
    except ValueError as exc:
        raise ConfigError(str(exc), field=field_prefix, path=path) from None


def load_scenario(ref, base_dir=None) -> tuple[ScenarioParams, dict]:
    """Resolve a scenario by bundled name, file path or inline dict."""
    if isinstance(ref, dict):
        return scenario_from_dict(ref), dict(ref)
    candidate = Path(ref)
    if base_dir is not None and not candidate.is_absolute():
        candidate = Path(base_dir) / candidate
    if ref in bundled_scenarios():
        candidate = _data_file("scenarios", f"{ref}.json")
    elif not candidate.is_file():
        raise ConfigError(f"unknown scenario {ref!r}; bundled scenarios: {', '.join(bundled_scenarios())}",
                          field="scenario")
    doc = _read_json(candidate)
    return scenario_from_dict(doc, path=candidate), doc


def build_link(link: dict, distance_m: float) -> LinkConfig:
    """LinkConfig from resolved link fields.

    The ``facing`` layout puts the transmitter at (0, 0, h) facing +x and the
    receiver at (d, 0, h) facing -x; ``explicit`` uses the ``tx``/``rx`` blocks.
    """
    n = link["n_elements"]
    if link["layout"] == "facing":
        h = link["height_m"]
        tx_place = {"center_m": [0.0, 0.0, h], "rotation_rad": [0.0, math.pi / 2, 0.0]}
        rx_place = {"center_m": [distance_m, 0.0, h], "rotation_rad": [0.0, -math.pi / 2, 0.0]}
    else:
        if "tx" not in link or "rx" not in link:
            raise ConfigError("explicit layout needs both tx and rx placements", field="link")
        tx_place, rx_place = link["tx"], link["rx"]
    tx_geo = uca_positions(n, link["radius_m"], tx_place["center_m"], tx_place.get("rotation_rad", (0, 0, 0)))
    rx_geo = uca_positions(n, link["radius_m"], rx_place["center_m"], rx_place.get("rotation_rad", (0, 0, 0)))
    tx_modes = OamModeSet(n, tuple(link["tx_modes"])) if "tx_modes" in link else mode_index_map(n)
    rx_modes = OamModeSet(n, tuple(link["rx_modes"])) if "rx_modes" in link else mode_index_map(n)
    grid: FrequencyGrid = make_frequency_grid(link["center_hz"], link["bandwidth_hz"], link["n_points"])
    return LinkConfig(tx_geo, rx_geo, tx_modes, rx_modes, grid, link["pattern"])


def resolve_seed(cli_seed: Optional[int], file_seed: Optional[int], required: bool = True) -> Optional[int]:
    """Seed precedence: command line, then the environment variable, then the file."""
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get(SEED_ENV_VAR)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR}={env!r} is not an integer", field="seed") from None
    if file_seed is not None:
        return int(file_seed)
    if required:
        raise ConfigError(f"a seed is required: set it in the config, via --seed or {SEED_ENV_VAR}",
                          field="seed")
    return None


def load_config(path, seed: Optional[int] = None, require_seed: bool = True) -> RunConfig:
    """Load, validate and resolve a JSON run configuration.

    Raises:
        ConfigError: unreadable JSON (with line number), schema violations
            (with the dotted field path), or a missing seed.
    """
    path = Path(path)
    doc = _read_json(path)
    _validate(doc, "config", "", path)
    scenario, scenario_doc = load_scenario(doc["scenario"], base_dir=path.parent)
    link_fields = {**LINK_DEFAULTS, **doc.get("link", {})}
    if link_fields["layout"] == "explicit":
        link_fields.pop("height_m")
    try:
        link = build_link(link_fields, float(doc["distance_m"]))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), field="link", path=path) from None
    run_seed = resolve_seed(seed, doc.get("seed"), required=require_seed)
    outputs = {**OUTPUT_DEFAULTS, **doc.get("outputs", {})}
    ensemble = int(doc.get("ensemble", 1))
    resolved = {
        "scenario": copy.deepcopy(scenario_doc),
        "link": link_fields,
        "distance_m": float(doc["distance_m"]),
        "seed": run_seed,
        "ensemble": ensemble,
        "outputs": outputs,
    }
    return RunConfig(scenario, link, float(doc["distance_m"]), run_seed, ensemble, outputs,
                     resolved, str(path))
