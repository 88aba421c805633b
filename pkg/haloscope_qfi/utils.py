import copy
import contextlib
import dataclasses
import enum
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import numpy as np
import simplejson as json
import yaml

from .exceptions import ConfigError, ParameterDomainError

logger = logging.getLogger("haloscope_qfi")


def load_config(path=None, config_file="config.defaults.yaml"):
    """
    Load a YAML config tree
    """
    if path is None:
        path = os.path.dirname(os.path.abspath(__file__))
    try:
        with open(os.path.join(path, config_file)) as cyaml:
            config = yaml.load(cyaml, Loader=yaml.FullLoader)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read {config_file}: {e}")

    if not isinstance(config, dict):
        raise ConfigError(f"{config_file} does not hold a key/value tree")
    return config


def merge_config(base, override, prefix=""):
    """Deep-merge ``override`` into a copy of ``base``; unknown keys are rejected."""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if key not in merged:
            raise ConfigError(f"unknown config key {prefix}{key}")
        if isinstance(merged[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {prefix}{key} expects a mapping")
            merged[key] = merge_config(merged[key], value, prefix=f"{prefix}{key}.")
        else:
            merged[key] = value
    return merged


cfg = load_config()["haloscope_qfi"]


@contextlib.contextmanager
def config_override(sections):
    """
    Apply ``{section: values}`` to the shared config tree for the duration of
    the block. Sections are updated in place, so module-level aliases such
    as ``NUMERICS`` see the new values until the block exits.
    """
    saved = {}
    try:
        for section, values in (sections or {}).items():
            if section not in cfg:
                raise ConfigError(f"unknown config section {section}")
            merged = merge_config(cfg[section], values, prefix=f"{section}.")
            saved[section] = copy.deepcopy(cfg[section])
            cfg[section].update(merged)
        yield cfg
    finally:
        for section, values in saved.items():
            cfg[section].clear()
            cfg[section].update(values)


def time_stamp():
    """

    :return: UTC time as a formatted string
    """
    return datetime.now(timezone.utc).strftime("%Y%m%d_%H:%M:%S")


def log(message, level="info"):
    logger.log(getattr(logging, level.upper()), f"{time_stamp()}: {message}")


class Encoder(json.JSONEncoder):
    """Serializes numpy containers, dataclasses and enums"""

    def default(self, o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, complex):
            return [o.real, o.imag]
        if dataclasses.is_dataclass(o):
            return {
                f.name: getattr(o, f.name)
                for f in dataclasses.fields(o)
                if not callable(getattr(o, f.name))
            }
        if isinstance(o, enum.Enum):
            return o.value
        return json.JSONEncoder.default(self, o)


def to_json(obj):
    return json.dumps(obj, indent=2, ignore_nan=True, sort_keys=True, cls=Encoder)


def to_csv(frame, path_or_buf=None):
    """Deterministic CSV: header row, no index, 17 significant digits."""
    return frame.to_csv(path_or_buf, index=False, float_format="%.17g")


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    return 10.0 * np.log10(value)


def parse_gain(text):
    """Accept ``"10dB"`` / ``"10 db"`` or a plain linear number."""
    raw = str(text).strip()
    try:
        if raw.lower().endswith("db"):
            value = float(db_to_linear(float(raw[:-2])))
        else:
            value = float(raw)
    except ValueError:
        raise ParameterDomainError(f"cannot parse gain {text!r}")
    if value < 1.0:
        raise ParameterDomainError(f"squeezing gain must be >= 1, got {value}")
    return value


def make_grid(section):
    """Build a strictly increasing grid from a ``{start, stop, num[, scale]}`` mapping."""
    try:
        start, stop, num = float(section["start"]), float(section["stop"]), int(section["num"])
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"malformed grid {section!r}: {e}")
    if num < 1 or (num > 1 and not stop > start):
        raise ConfigError(f"grid must be strictly monotone, got {section!r}")
    if section.get("scale", "linear") == "log":
        if start <= 0:
            raise ConfigError(f"log grid needs positive bounds, got {section!r}")
        return np.logspace(np.log10(start), np.log10(stop), num)
    return np.linspace(start, stop, num)


def parse_axis(text):
    """Parse ``start:stop:num`` into a validated grid mapping."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid {text!r} is not start:stop:num")
    section = {"start": parts[0], "stop": parts[1], "num": parts[2]}
    make_grid(section)
    return section


def resolve_threads(threads):
    if threads is None or int(threads) == 0:
        return os.cpu_count() or 1
    return max(int(threads), 1)


def parallel_map(func, items, threads=1):
    """Map ``func`` over ``items``; results come back in input order."""
    items = list(items)
    threads = resolve_threads(threads)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(func, items))
