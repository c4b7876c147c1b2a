"""
Configuration defaults and file handling.

Settings are a two-level mapping section -> key -> value. Files are INI
(`[section]` headers with key=value lines) or JSON when the name ends in
.json; either way they are merged over DEFAULT_SETTINGS and any key the
defaults do not know is rejected.
"""
import configparser
import copy
import json
import logging
import os

from core import PROFILE_KINDS, Boundary, Domain, Geometry, profile_from_config
from errors import ConfigError

logger = logging.getLogger(__name__)

SETTINGS_FILE = "dwsl.ini"
LOG_FILE = ""

# Every numeric knob with its default. Lists are comma-separated strings,
# ranges like 1..100 are expanded by parse_int_list.
DEFAULT_SETTINGS = {
    "general": {
        "log_level": "INFO",
        "log_file": LOG_FILE,
        "threads": 0,
        "output": "-",
    },
    "profile": {
        "kind": "strip",
        "Btilde": 1.0,
        "sigma": 0.25,
        "alpha": 1.0,
        "amplitude": 1.0,
        "c": 1.0,
        "samples": "",
    },
    "geometry": {
        "domain": "torus",
        "boundary": "periodic",
    },
    "branch": {
        "parity": "even",
        "m": 0,
        "n": "",
        "h": "0.04,0.02,0.01,0.005",
        "half_integer_n": False,
    },
    "spectrum": {
        "re_lo": -0.6,
        "re_hi": 0.1,
        "im_lo": 5.0,
        "im_hi": 60.0,
        "n": "0..8",
        "mode_dump": "",
    },
    "quasimode": {
        "n": "1..100",
        "margin": 0.05,
        "sigma_support": "",
        "cutoff": "bump",
        "samples": 8193,
    },
    "resolvent": {
        "s_lo": 20.0,
        "s_hi": 200.0,
        "count": 40,
        "grid_N": 2048,
        "n_max": "",
        "window": "",
        "eps": "",
    },
    "simulate": {
        "data": "1:0:1,1:1:0.5,1:2:0.25",
        "T": 100.0,
        "dt": 1e-3,
        "grid_N": 256,
        "samples": 1000,
        "per_mode": False,
        "fit_model": "exponential",
    },
    "semigroup": {
        "cutoff": 16,
        "s_list": "5,10,20,40,60,80,100",
        "alpha": 2.0 / 3.0,
        "z_count": 20,
        "seed": 0,
    },
    "verify": {
        "quick": False,
    },
}


def get_script_dir():
    """Get the directory where the script is located"""
    return os.path.dirname(os.path.abspath(__file__))


def coerce(default, value, where):
    """Convert a loaded value to the type of its default"""
    try:
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in ("1", "true", "yes", "on"):
                return True
            if text in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad value for {where}: {e}") from e


def merge_settings(loaded, base=None):
    """{**defaults, **loaded} per section, rejecting unknown sections and keys"""
    base = copy.deepcopy(DEFAULT_SETTINGS if base is None else base)
    for section, values in loaded.items():
        if section not in DEFAULT_SETTINGS:
            raise ConfigError(f"unknown config section [{section}]")
        unknown = set(values) - set(DEFAULT_SETTINGS[section])
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
        typed = {k: coerce(DEFAULT_SETTINGS[section][k], v, f"{section}.{k}") for k, v in values.items()}
        base[section] = {**base[section], **typed}
    return base


def _read_file(path):
    if path.endswith(".json"):
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
            raise ConfigError(f"{path}: expected an object of sections")
        return data
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    with open(path, "r", encoding="utf-8") as f:
        parser.read_file(f)
    return {section: dict(parser.items(section)) for section in parser.sections()}


def load_settings(path=None):
    """Load settings from an INI or JSON file merged over the defaults

    Args:
        path: config file, or None for the defaults alone

    Returns:
        dict: section -> key -> typed value
    """
    if path is None:
        return copy.deepcopy(DEFAULT_SETTINGS)
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        loaded = _read_file(path)
    except (json.JSONDecodeError, configparser.Error, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    logger.info("loaded settings from %s", path)
    return merge_settings(loaded)


def _ini_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_settings(settings, as_json=False):
    if as_json:
        return json.dumps(settings, indent=4) + "\n"
    lines = []
    for section, values in settings.items():
        lines.append(f"[{section}]")
        lines.extend(f"{k} = {_ini_value(v)}" for k, v in values.items())
        lines.append("")
    return "\n".join(lines)


def save_settings(settings, path=SETTINGS_FILE):
    """Save settings as INI, or JSON when the path ends in .json"""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(render_settings(settings, as_json=path.endswith(".json")))
        return True
    except OSError as e:
        logger.error("error saving settings to %s: %s", path, e)
        return False


PROFILE_FIELDS = {
    "strip": ("Btilde", "sigma"),
    "smoothexp": ("alpha", "sigma", "amplitude"),
    "constant": ("c",),
    "sampled": ("samples",),
}


def profile_from_settings(section):
    """Damping profile from the [profile] section"""
    kind = str(section.get("kind", "")).lower()
    if kind not in PROFILE_KINDS:
        raise ConfigError(f"unknown profile kind {kind!r}, expected one of {sorted(PROFILE_KINDS)}")
    entries = {"kind": kind}
    for key in PROFILE_FIELDS[kind]:
        entries[key] = str(section[key])
    return profile_from_config(entries)


def geometry_from_settings(section):
    try:
        return Geometry(Domain(section["domain"]), Boundary(section["boundary"]))
    except ValueError as e:
        raise ConfigError(f"bad geometry: {e}") from e


def parse_float_list(text, where="list"):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"bad number in {where}: {e}") from e


def parse_int_list(text, where="list"):
    """'1..5' -> [1, 2, 3, 4, 5]; '1,3,7' -> [1, 3, 7]; both forms may mix"""
    out = []
    try:
        for part in str(text).split(","):
            part = part.strip()
            if not part:
                continue
            if ".." in part:
                lo, hi = part.split("..", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError as e:
        raise ConfigError(f"bad integer in {where}: {e}") from e
    return out


def parse_data_spec(text):
    """'n:m:a,...' -> [(n, m, a)] with complex amplitudes allowed"""
    spec = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        fields = part.split(":")
        if len(fields) != 3:
            raise ConfigError(f"data entries are n:m:amplitude, got {part!r}")
        try:
            spec.append((int(fields[0]), int(fields[1]), complex(fields[2])))
        except ValueError as e:
            raise ConfigError(f"bad data entry {part!r}: {e}") from e
    return spec
