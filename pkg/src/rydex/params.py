"""Parameter containers and the JSON configuration schema.

All internal quantities are SI with angular frequencies in rad/s. Config files
carry the unit in every key name; each quantity has one canonical SI key
(used when writing snapshots, so a snapshot re-parses bit-identically) and
optionally a few convenience aliases (``*_hz``, ``*_ea0``, ...).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .constants import AMU, C0, EA0, HBAR, K_B, TWO_PI
from .errors import ConfigError

__all__ = [
    "AtomicParams",
    "ReceiverChain",
    "LinkConfig",
    "Config",
    "load_config",
    "default_config",
    "config_to_dict",
    "DEFAULT_CONFIG_NAME",
]

DEFAULT_CONFIG_NAME = "cs133_default.json"


@dataclass(frozen=True)
class AtomicParams:
    """Four-level atom, lasers, LO and vapor cell at one operating point.

    Rates and Rabi frequencies are angular (rad/s). ``omega_lo`` is derived
    from ``e_lo`` and ``mu_rf`` so that sweeps over the LO field stay
    consistent.
    """

    omega_p: float
    omega_c: float
    delta_p: float
    delta_c: float
    delta_lo: float
    gamma: float
    gamma2: float
    gamma3: float
    gamma4: float
    mu12: float
    mu_rf: float
    n0: float
    cell_length: float
    lambda_p: float
    lambda_c: float
    lambda_lo: float
    temperature: float
    atom_mass: float
    probe_power_in: float
    pd_quantum_efficiency: float
    e_lo: float

    def __post_init__(self):
        positive = ("omega_p", "omega_c", "gamma", "gamma2", "gamma3", "gamma4",
                    "mu12", "mu_rf", "n0", "cell_length", "lambda_p", "lambda_c",
                    "lambda_lo", "atom_mass", "probe_power_in", "e_lo")
        for name in positive:
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigError(f"atomic.{name} must be > 0 (got {value!r})")
        for name in ("delta_p", "delta_c", "delta_lo"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(f"atomic.{name} must be finite")
        if not (np.isfinite(self.temperature) and self.temperature >= 0):
            raise ConfigError("atomic.temperature must be >= 0 K")
        if not (0 < self.pd_quantum_efficiency <= 1):
            raise ConfigError("atomic.pd_quantum_efficiency must lie in (0, 1]")

    @property
    def omega_lo(self) -> float:
        return self.mu_rf * self.e_lo / HBAR

    @property
    def k_p(self) -> float:
        return TWO_PI / self.lambda_p

    @property
    def k_c(self) -> float:
        return TWO_PI / self.lambda_c

    @property
    def k_lo(self) -> float:
        return TWO_PI / self.lambda_lo

    @property
    def f_lo(self) -> float:
        return C0 / self.lambda_lo

    @property
    def omega_probe_optical(self) -> float:
        """Optical angular frequency of the probe laser."""
        return TWO_PI * C0 / self.lambda_p

    @property
    def sigma_v(self) -> float:
        """1-D thermal velocity spread sqrt(kB T / m) [m/s]."""
        return math.sqrt(K_B * self.temperature / self.atom_mass)

    @property
    def absorption_prefactor(self) -> float:
        """k_p N0 mu12^2 / (eps0 hbar Omega_p) [1/m]; alpha = -prefactor * Im rho21."""
        from .constants import EPS0
        return self.k_p * self.n0 * self.mu12**2 / (EPS0 * HBAR * self.omega_p)

    def replace(self, **changes) -> "AtomicParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ReceiverChain:
    """Photodiode bias network, TIA and load."""

    r_t: float = 10e3
    i_n_tia: float = 1.8e-12
    v_n_tia: float = 2.8e-9
    z_in: float = 60.0
    r_s: float = 1e3
    r_l: float = 50.0
    rin_dbc_hz: float = -140.0

    def __post_init__(self):
        for name in ("r_t", "z_in", "r_s", "r_l"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"receiver.{name} must be > 0")
        for name in ("i_n_tia", "v_n_tia"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"receiver.{name} must be >= 0")

    @property
    def k_c(self) -> float:
        """Current-divider ratio at the TIA input."""
        return self.r_s / (self.r_s + self.z_in)

    def replace(self, **changes) -> "ReceiverChain":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class LinkConfig:
    """Waveform-level and MIMO link settings."""

    f_if: float = 150e3
    tx_power_dbm: float = 10.0
    bs_gain_db: float = 5.0
    ue_gain_classical_db: float = 1.76
    distance: float = 200.0
    symbol_period: float = 10e-6
    rk_step: float = 1e-9
    v_ref: float = 1.0
    bandwidth: float = 100e3
    modulation_order: int = 16
    n_symbols: int = 400
    samples_per_symbol: int = 40
    pulse: str = "sinc"
    rolloff: float = 0.35
    pulse_span: int = 16
    seed: int = 2025
    classical_nf_db: float = 2.0
    mc_spacing_wavelengths: float = 0.5
    mc_dipole_length_wavelengths: float = 0.5
    gq_improvement_db: float = 0.0

    def __post_init__(self):
        for name in ("f_if", "distance", "symbol_period", "rk_step", "v_ref", "bandwidth",
                     "mc_spacing_wavelengths", "mc_dipole_length_wavelengths"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"link.{name} must be > 0")
        if self.rk_step > 1e-9 + 1e-21:
            raise ConfigError("link.rk_step_s must be <= 1 ns")
        if self.modulation_order not in (4, 16, 64, 256):
            raise ConfigError("link.modulation_order must be a square QAM order (4, 16, 64, 256)")
        if self.pulse not in ("sinc", "rrc"):
            raise ConfigError("link.pulse must be 'sinc' or 'rrc'")
        if self.n_symbols < 1 or self.samples_per_symbol < 2 or self.pulse_span < 1:
            raise ConfigError("link.n_symbols/samples_per_symbol/pulse_span out of range")

    @property
    def symbol_rate(self) -> float:
        return 1.0 / self.symbol_period

    def replace(self, **changes) -> "LinkConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Config:
    atomic: AtomicParams
    receiver: ReceiverChain
    link: LinkConfig
    description: str = ""


# --- schema ---------------------------------------------------------------
# canonical key -> attribute; aliases map alias key -> (attribute, converter)

def _scale(f: float) -> Callable[[float], float]:
    return lambda v: float(v) * f


_ATOMIC_CANON = {
    "omega_p_rad_s": "omega_p", "omega_c_rad_s": "omega_c",
    "delta_p_rad_s": "delta_p", "delta_c_rad_s": "delta_c", "delta_lo_rad_s": "delta_lo",
    "gamma_rad_s": "gamma", "gamma2_rad_s": "gamma2",
    "gamma3_rad_s": "gamma3", "gamma4_rad_s": "gamma4",
    "mu12_c_m": "mu12", "mu_rf_c_m": "mu_rf", "n0_m3": "n0", "cell_length_m": "cell_length",
    "lambda_p_m": "lambda_p", "lambda_c_m": "lambda_c", "lambda_lo_m": "lambda_lo",
    "temperature_k": "temperature", "atom_mass_kg": "atom_mass",
    "probe_power_w": "probe_power_in", "pd_quantum_efficiency": "pd_quantum_efficiency",
    "e_lo_v_per_m": "e_lo",
}
_ATOMIC_ALIAS = {
    **{k.replace("_rad_s", "_hz"): (v, _scale(TWO_PI)) for k, v in _ATOMIC_CANON.items()
       if k.endswith("_rad_s")},
    "mu12_ea0": ("mu12", _scale(EA0)),
    "mu_rf_ea0": ("mu_rf", _scale(EA0)),
    "atom_mass_amu": ("atom_mass", _scale(AMU)),
    "f_lo_hz": ("lambda_lo", lambda v: C0 / float(v)),
    "probe_power_uw": ("probe_power_in", _scale(1e-6)),
}

_RECEIVER_CANON = {
    "r_t_ohm": "r_t", "i_n_tia_a_per_rthz": "i_n_tia", "v_n_tia_v_per_rthz": "v_n_tia",
    "z_in_ohm": "z_in", "r_s_ohm": "r_s", "r_l_ohm": "r_l", "rin_dbc_hz": "rin_dbc_hz",
}
_RECEIVER_ALIAS = {
    "i_n_tia_pa_per_rthz": ("i_n_tia", _scale(1e-12)),
    "v_n_tia_nv_per_rthz": ("v_n_tia", _scale(1e-9)),
}

_LINK_CANON = {
    "f_if_hz": "f_if", "tx_power_dbm": "tx_power_dbm", "bs_gain_db": "bs_gain_db",
    "ue_gain_classical_db": "ue_gain_classical_db", "distance_m": "distance",
    "symbol_period_s": "symbol_period", "rk_step_s": "rk_step", "v_ref_v": "v_ref",
    "bandwidth_hz": "bandwidth", "modulation_order": "modulation_order",
    "n_symbols": "n_symbols", "samples_per_symbol": "samples_per_symbol",
    "pulse": "pulse", "rolloff": "rolloff", "pulse_span_symbols": "pulse_span",
    "seed": "seed", "classical_nf_db": "classical_nf_db",
    "mc_spacing_wavelengths": "mc_spacing_wavelengths",
    "mc_dipole_length_wavelengths": "mc_dipole_length_wavelengths",
    "gq_improvement_db": "gq_improvement_db",
}
_LINK_ALIAS = {
    "symbol_period_us": ("symbol_period", _scale(1e-6)),
    "rk_step_ns": ("rk_step", _scale(1e-9)),
}

_INT_FIELDS = {"modulation_order", "n_symbols", "samples_per_symbol", "pulse_span", "seed"}
_STR_FIELDS = {"pulse"}


def _parse_section(section: str, raw: dict, canon: dict, alias: dict, cls, required: bool):
    if not isinstance(raw, dict):
        raise ConfigError(f"section '{section}' must be a JSON object")
    values: dict[str, Any] = {}
    source: dict[str, str] = {}
    for key, value in raw.items():
        if key in canon:
            attr, conv = canon[key], None
        elif key in alias:
            attr, conv = alias[key]
        else:
            raise ConfigError(f"unknown key '{section}.{key}' (keys must carry their unit, "
                              f"e.g. one of {sorted(canon)[:4]}...)")
        if attr in values:
            raise ConfigError(f"'{section}.{key}' duplicates '{section}.{source[attr]}'")
        if attr in _STR_FIELDS:
            if not isinstance(value, str):
                raise ConfigError(f"'{section}.{key}' must be a string")
            values[attr] = value
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"'{section}.{key}' must be a number")
            if attr in _INT_FIELDS:
                if int(value) != value:
                    raise ConfigError(f"'{section}.{key}' must be an integer")
                values[attr] = int(value)
            else:
                values[attr] = conv(value) if conv else float(value)
        source[attr] = key
    if required:
        missing = [f.name for f in dataclasses.fields(cls) if f.name not in values]
        if missing:
            inv = {v: k for k, v in canon.items()}
            raise ConfigError(f"section '{section}' is missing "
                              + ", ".join(f"'{inv.get(m, m)}'" for m in missing))
    return cls(**values)


def _load_raw(raw: dict) -> Config:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - {"atomic", "receiver", "link", "description"}
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    if "atomic" not in raw:
        raise ConfigError("config is missing the 'atomic' section")
    atomic = _parse_section("atomic", raw["atomic"], _ATOMIC_CANON, _ATOMIC_ALIAS,
                            AtomicParams, required=True)
    receiver = _parse_section("receiver", raw.get("receiver", {}), _RECEIVER_CANON,
                              _RECEIVER_ALIAS, ReceiverChain, required=False)
    link = _parse_section("link", raw.get("link", {}), _LINK_CANON, _LINK_ALIAS,
                          LinkConfig, required=False)
    return Config(atomic, receiver, link, str(raw.get("description", "")))


def load_config(path: str | Path | None = None) -> Config:
    """Load a JSON config. ``None`` or the bare default name loads the packaged file."""
    if path is None or (str(path) == DEFAULT_CONFIG_NAME and not Path(path).exists()):
        text = resources.files("rydex.data").joinpath(DEFAULT_CONFIG_NAME).read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config '{path}': {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return _load_raw(raw)


def config_from_dict(raw: dict) -> Config:
    return _load_raw(raw)


def default_config() -> Config:
    return load_config(None)


def config_to_dict(cfg: Config) -> dict:
    """Snapshot using canonical SI keys only (exact round trip)."""
    def dump(obj, canon):
        return {key: getattr(obj, attr) for key, attr in canon.items()}
    out = {
        "atomic": dump(cfg.atomic, _ATOMIC_CANON),
        "receiver": dump(cfg.receiver, _RECEIVER_CANON),
        "link": dump(cfg.link, _LINK_CANON),
    }
    if cfg.description:
        out["description"] = cfg.description
    return out
