"""Run configuration: strict INI schema shared by every CLI subcommand.

Unknown sections or keys are rejected (typos must not silently fall back to
defaults), values are converted to their declared types, and ``--set
section.key=value`` overrides are applied before validation.
"""

import configparser
from dataclasses import dataclass, field

from .potentials import make_potential


class ConfigError(Exception):
    """Invalid configuration file, key, or value."""


def _int(text):
    return int(text)


def _float(text):
    return float(text)


def _floats(text):
    return tuple(float(p) for p in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(p) for p in text.replace(",", " ").split())


def _str(text):
    return text.strip()


def _pair(text):
    parts = tuple(int(p) for p in text.replace(",", " ").split())
    if len(parts) != 2:
        raise ValueError("expected two indices")
    return parts


# section -> key -> (converter, default); a None default means "not set"
SCHEMA = {
    "potential": {
        "kind": (_str, "toda"),
        "d": (_int, None),
        "alpha": (_float, None),
        "c3": (_float, None),
        "c4": (_float, None),
        "p": (_int, None),
        "scale": (_float, None),
        "gamma_v": (_float, None),
    },
    "lattice": {
        "n": (_int, 64),
        "beta": (_float, None),
        "lam": (_floats, (0.0,)),
    },
    "run": {
        "t_final": (_float, 0.1),
        "dt_micro": (_float, None),
        "obs_stride": (_int, 4),
        "replicas": (_int, 8),
        "seed": (_int, 0),
        "blowup_threshold": (_float, 1e8),
        "record_times": (_floats, None),
    },
    "fields": {
        "phi": (_str, "sin2"),
        "species": (_int, 0),
        "pair": (_pair, (0, 0)),
        "ell_values": (_ints, None),
        "eps": (_float, 0.125),
    },
    "sbe": {
        "m": (_int, 64),
        "dt": (_float, None),
        "coupling": (_str, "auto"),
        "replicas": (_int, None),
    },
    "sweep": {
        "betas": (_floats, (0.1, 0.03, 0.01)),
        "count": (_int, 4000),
        "ns": (_ints, (32, 128, 512)),
    },
    "sample": {
        "count": (_int, 1000),
        "burn_in": (_int, 1000),
        "thin": (_int, 5),
    },
}

_POTENTIAL_PARAM_KEYS = ("d", "alpha", "c3", "c4", "p", "scale", "gamma_v")


@dataclass
class Config:
    values: dict = field(default_factory=dict)

    def get(self, section, key):
        return self.values[section][key]

    def section(self, section):
        return dict(self.values[section])

    def build_potential(self):
        """Instantiate the configured potential; unused params are rejected."""
        kind = self.get("potential", "kind")
        params = {
            k: self.get("potential", k)
            for k in _POTENTIAL_PARAM_KEYS
            if self.get("potential", k) is not None
        }
        try:
            return make_potential(kind, **params)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"potential: {exc}") from exc


def default_config():
    values = {
        sec: {key: dflt for key, (_, dflt) in keys.items()}
        for sec, keys in SCHEMA.items()
    }
    return Config(values)


def _convert(section, key, raw):
    try:
        conv, _ = SCHEMA[section][key]
    except KeyError:
        raise ConfigError(f"unknown key [{section}] {key}") from None
    try:
        return conv(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for [{section}] {key}: {raw!r} ({exc})") from exc


def load_config(path=None, overrides=()):
    """Parse an INI file (optional) and apply ``section.key=value`` overrides."""
    cfg = default_config()
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            read = parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]")
            for key, raw in parser.items(section):
                cfg.values[section][key] = _convert(section, key, raw)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        target, raw = item.split("=", 1)
        section, key = target.split(".", 1)
        section = section.strip()
        key = key.strip()
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        cfg.values[section][key] = _convert(section, key, raw.strip())
    return cfg
