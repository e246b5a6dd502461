"""System configuration and the flat ``key = value`` config format.

Config files carry one ``key = value`` pair per line with ``#`` comments.
Keys ending in ``_db``/``_dbm``/``_deg`` are converted to linear units or
radians on load; everything inside :class:`SystemConfig` is SI and radians.
"""

from dataclasses import dataclass, fields, replace
import math

import numpy as np


class ConfigError(ValueError):
    """Bad, missing, duplicated or unknown configuration entry."""


@dataclass(frozen=True)
class SystemConfig:
    # reference system parameters
    t_s: float = 10.0
    n_slots: int = 500
    m_t: int = 8
    m_r: int = 8
    l_x: int = 80
    l_y: int = 80
    sigma2_r: float = 1e-10
    p_max_w: float = 0.1
    beta0: float = 1e-3
    sigma2_s_w: float = 1e-10
    sigma2_omega_varphi: float = 0.1
    sigma2_omega_phi: float = 0.1
    dt_symbol_s: float = 1e-7
    sigma2_c_w: float = 1e-10
    f_c_hz: float = 30e9
    dt_slot_s: float = 0.02
    # geometry
    rsu_position: tuple = (0.0, 0.0, 20.0)
    vehicle_position: tuple = (-100.0, 20.0, 0.0)
    speed_mps: float = 20.0
    # IOS -> in-vehicle device link
    beta_h: float = 1e-4
    device_azimuth: float = math.radians(30.0)
    device_elevation: float = math.radians(60.0)
    # filter constants for distance / velocity
    sigma2_omega_d: float = 0.25
    sigma2_omega_v: float = 0.01
    a_d: float = 1.0
    a_v: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if abs(self.n_slots * self.dt_slot_s - self.t_s) > 1e-9:
            raise ConfigError(f"n_slots * dt_slot_s = {self.n_slots * self.dt_slot_s} != t_s = {self.t_s}")
        for name in ("m_t", "m_r", "l_x", "l_y", "n_slots"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("sigma2_r", "p_max_w", "beta0", "sigma2_s_w", "sigma2_omega_varphi",
                     "sigma2_omega_phi", "dt_symbol_s", "sigma2_c_w", "dt_slot_s", "beta_h",
                     "sigma2_omega_d", "sigma2_omega_v", "a_d", "a_v"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if np.allclose(self.rsu_position, self.vehicle_position):
            raise ConfigError("rsu and vehicle positions coincide")

    @property
    def n_elements(self):
        return self.l_x * self.l_y

    def with_(self, **changes):
        return replace(self, **changes)


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


# file key -> (field, converter)
_INT = int
_KEYS = {
    "t_s": ("t_s", float),
    "n_slots": ("n_slots", _INT),
    "m_t": ("m_t", _INT),
    "m_r": ("m_r", _INT),
    "l_x": ("l_x", _INT),
    "l_y": ("l_y", _INT),
    "sigma2_r": ("sigma2_r", float),
    "p_max_w": ("p_max_w", float),
    "beta0_db": ("beta0", lambda s: db_to_linear(float(s))),
    "sigma2_s_dbm": ("sigma2_s_w", lambda s: dbm_to_watts(float(s))),
    "sigma2_omega_varphi": ("sigma2_omega_varphi", float),
    "sigma2_omega_phi": ("sigma2_omega_phi", float),
    "dt_symbol_s": ("dt_symbol_s", float),
    "sigma2_c_dbm": ("sigma2_c_w", lambda s: dbm_to_watts(float(s))),
    "f_c_hz": ("f_c_hz", float),
    "dt_slot_s": ("dt_slot_s", float),
    "rsu_x_m": ("rsu_position", 0),
    "rsu_y_m": ("rsu_position", 1),
    "rsu_z_m": ("rsu_position", 2),
    "vehicle_x_m": ("vehicle_position", 0),
    "vehicle_y_m": ("vehicle_position", 1),
    "vehicle_z_m": ("vehicle_position", 2),
    "speed_mps": ("speed_mps", float),
    "beta_h_db": ("beta_h", lambda s: db_to_linear(float(s))),
    "device_azimuth_deg": ("device_azimuth", lambda s: math.radians(float(s))),
    "device_elevation_deg": ("device_elevation", lambda s: math.radians(float(s))),
    "sigma2_omega_d": ("sigma2_omega_d", float),
    "sigma2_omega_v": ("sigma2_omega_v", float),
    "a_d": ("a_d", float),
    "a_v": ("a_v", float),
    "seed": ("seed", _INT),
}

# keys every config file must state explicitly
REQUIRED_KEYS = (
    "t_s", "n_slots", "m_t", "m_r", "l_x", "l_y", "sigma2_r", "p_max_w", "beta0_db",
    "sigma2_s_dbm", "sigma2_omega_varphi", "sigma2_omega_phi", "dt_symbol_s",
    "sigma2_c_dbm", "f_c_hz", "dt_slot_s",
)

KNOWN_KEYS = tuple(_KEYS)


def _convert(key, raw, where):
    field, conv = _KEYS[key]
    if isinstance(conv, int):
        conv = float
    try:
        if conv is _INT:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        return conv(raw)
    except ValueError:
        raise ConfigError(f"{where}: value {raw!r} for {key!r} is not numeric") from None


def parse_pairs(pairs, require_all=True):
    """Build a :class:`SystemConfig` from ``[(key, raw_value, where), ...]``."""
    seen = {}
    for key, raw, where in pairs:
        if key not in _KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        seen[key] = _convert(key, raw, where)
    if require_all:
        missing = [k for k in REQUIRED_KEYS if k not in seen]
        if missing:
            raise ConfigError(f"missing key {missing[0]!r}")
    return apply_values(SystemConfig(), seen)


def apply_values(cfg, values):
    """Return ``cfg`` with file-key ``values`` (already converted) applied."""
    changes = {}
    vectors = {name: list(getattr(cfg, name)) for name in ("rsu_position", "vehicle_position")}
    for key, value in values.items():
        field, conv = _KEYS[key]
        if isinstance(conv, int):
            vectors[field][conv] = float(value)
            changes[field] = tuple(vectors[field])
        else:
            changes[field] = value
    try:
        return replace(cfg, **changes)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def parse_config_text(text, source="<config>", require_all=True):
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"{source}:{lineno}"
        if "=" not in body:
            raise ConfigError(f"{where}: expected 'key = value', got {body!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        pairs.append((key, raw, where))
    return parse_pairs(pairs, require_all=require_all)


def parse_config(path):
    """Read a config file. Unknown, duplicate and missing required keys are errors."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, source=str(path))


def parse_override(text):
    """Split a ``key=value`` override, converting the value like a file entry."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not key=value")
    key, raw = (part.strip() for part in text.split("=", 1))
    if key not in _KEYS:
        raise ConfigError(f"override: unknown key {key!r}")
    return key, _convert(key, raw, "override")


def config_field_names():
    return [f.name for f in fields(SystemConfig)]


REFERENCE_CONFIG_TEXT = """\
# reference system parameters
t_s = 10
n_slots = 500
m_t = 8
m_r = 8
l_x = 80
l_y = 80
sigma2_r = 1e-10
p_max_w = 0.1
beta0_db = -30
sigma2_s_dbm = -70
sigma2_omega_varphi = 0.1
sigma2_omega_phi = 0.1
dt_symbol_s = 1e-7
sigma2_c_dbm = -70
f_c_hz = 30e9
dt_slot_s = 0.02

# geometry
rsu_x_m = 0
rsu_y_m = 0
rsu_z_m = 20
vehicle_x_m = -100
vehicle_y_m = 20
vehicle_z_m = 0
speed_mps = 20

# device link and filter constants
beta_h_db = -40
device_azimuth_deg = 30
device_elevation_deg = 60
sigma2_omega_d = 0.25
sigma2_omega_v = 0.01
a_d = 1
a_v = 0.25
seed = 0
"""


def reference_config():
    return parse_config_text(REFERENCE_CONFIG_TEXT, source="<reference>")
