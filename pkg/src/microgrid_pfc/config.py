"""
Run configuration: typed sections addressed by dotted keys.

File format, one setting per line::

    # comment
    sim.inertia_h_s = 50
    controller.kp = 1.0
    scenario.id = pv_drop

Unknown keys, malformed lines and out-of-range values raise
:class:`ConfigError` naming the offending key.
"""

from __future__ import annotations

import math
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .controller import FopidParams
from .simcore import SimConfig


class ConfigError(ValueError):
    def __init__(self, key: str, msg: str):
        self.key = key
        super().__init__(f"{key}: {msg}" if key else msg)


SCENARIO_IDS = ("pv_drop", "wind_trip", "acm_start")
CASE_IDS = ("v2g_off", "ev100", "ev200")


@dataclass(frozen=True)
class DieselSettings:
    p_rated_mw: float = 15.0
    droop_r_pu: float = 0.05
    t_gov_s: float = 0.5
    t_dispatch_s: float = 60.0

    def __post_init__(self):
        _positive(self, "p_rated_mw", "droop_r_pu", "t_gov_s")
        _nonneg(self, "t_dispatch_s")


@dataclass(frozen=True)
class PvSettings:
    p_rated_mw: float = 8.0
    sunrise_s: float = 25_000.0
    sunset_s: float = 61_400.0
    peak_w_m2: float = 1000.0
    i_l_a: float = 8.0
    i_o_a: float = 1e-10
    xi: float = 1.3
    v_t_v: float = 0.02585
    r_s_ohm: float = 0.005
    r_sh_ohm: float = 1000.0
    n_series: int = 1200
    mppt_step_v: float = 0.001
    mppt_tol: float = 0.05
    profile_file: str = ""

    def __post_init__(self):
        _positive(self, "p_rated_mw", "i_l_a", "i_o_a", "v_t_v", "r_sh_ohm", "n_series", "mppt_step_v")
        _nonneg(self, "r_s_ohm", "mppt_tol", "peak_w_m2")
        if not 1.0 <= self.xi <= 2.0:
            raise ValueError("xi must lie in [1, 2]")
        if not 0 <= self.sunrise_s < self.sunset_s <= 86_400:
            raise ValueError("need 0 <= sunrise_s < sunset_s <= 86400")


@dataclass(frozen=True)
class WindSettings:
    p_rated_mw: float = 4.5
    rho_kg_m3: float = 1.225
    cp: float = 0.45
    v_rated_m_s: float = 13.5
    v_trip_m_s: float = 15.0
    v_reconnect_m_s: float = 13.5
    mean_m_s: float = 10.0
    swing_m_s: float = 3.5
    profile_file: str = ""

    def __post_init__(self):
        _positive(self, "p_rated_mw", "rho_kg_m3", "v_rated_m_s", "v_trip_m_s")
        _nonneg(self, "mean_m_s", "swing_m_s", "v_reconnect_m_s")
        if not 0 < self.cp <= 0.593:
            raise ValueError("cp must lie in (0, 0.593]")
        if self.v_reconnect_m_s > self.v_trip_m_s:
            raise ValueError("v_reconnect_m_s must not exceed v_trip_m_s")


@dataclass(frozen=True)
class LoadSettings:
    p_nominal_mw: float = 10.0
    power_factor: float = 0.95
    night_pu: float = 0.7
    day_pu: float = 1.0
    profile_file: str = ""

    def __post_init__(self):
        _nonneg(self, "p_nominal_mw")
        if not 0 < self.power_factor <= 1:
            raise ValueError("power_factor must lie in (0, 1]")
        for name in ("night_pu", "day_pu"):
            if not 0 <= getattr(self, name) <= 1.5:
                raise ValueError(f"{name} must lie in [0, 1.5]")


@dataclass(frozen=True)
class AcmSettings:
    s_rated_mva: float = 0.78
    power_factor: float = 0.9
    inrush_factor: float = 7.0
    start_window_s: float = 20.0

    def __post_init__(self):
        _nonneg(self, "s_rated_mva")
        _positive(self, "start_window_s")
        if not 6.0 <= self.inrush_factor <= 8.0:
            raise ValueError("inrush_factor must lie in [6, 8]")
        if not 0 < self.power_factor <= 1:
            raise ValueError("power_factor must lie in (0, 1]")


@dataclass(frozen=True)
class FleetSettings:
    n_evs: int = -1                 # -1: taken from the case
    seed: int = 0
    capacity_kwh: float = 40.0
    charger_kw: float = 45.0
    p_cap_mw: float = 4.0
    cap_per_ev_mw: float = 0.0      # > 0: cap scales with fleet size instead
    k_ev: float = 0.333
    t_ev_s: float = 1.0
    soc_min: float = 0.2
    soc_max: float = 0.8
    eta: float = 1.0
    roster_file: str = ""

    def __post_init__(self):
        if self.n_evs < -1:
            raise ValueError("n_evs must be >= 0 (or -1 for the case default)")
        _positive(self, "capacity_kwh", "k_ev", "t_ev_s", "eta")
        _nonneg(self, "charger_kw", "p_cap_mw", "cap_per_ev_mw")
        if not 0 <= self.soc_min < self.soc_max <= 1:
            raise ValueError("need 0 <= soc_min < soc_max <= 1")


@dataclass(frozen=True)
class ScenarioSettings:
    id: str = "pv_drop"
    case: str = "v2g_off"
    contingency: bool = True
    pv_dip_start_s: float = 43_200.0
    pv_dip_duration_s: float = 300.0
    pv_derate: float = 0.2
    gust_start_s: float = 79_200.0
    gust_duration_s: float = 600.0
    gust_speed_m_s: float = 16.0
    acm_start_s: float = 43_200.0

    def __post_init__(self):
        if self.id not in SCENARIO_IDS:
            raise ValueError(f"unknown scenario {self.id!r} (expected one of {', '.join(SCENARIO_IDS)})")
        if self.case not in CASE_IDS:
            raise ValueError(f"unknown case {self.case!r} (expected one of {', '.join(CASE_IDS)})")
        if not 0 <= self.pv_derate <= 1:
            raise ValueError("pv_derate must lie in [0, 1]")
        _nonneg(self, "pv_dip_start_s", "pv_dip_duration_s", "gust_start_s", "gust_duration_s",
                "gust_speed_m_s", "acm_start_s")


@dataclass(frozen=True)
class OutputSettings:
    out_dir: str = ""


@dataclass(frozen=True)
class RunConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    diesel: DieselSettings = field(default_factory=DieselSettings)
    pv: PvSettings = field(default_factory=PvSettings)
    wind: WindSettings = field(default_factory=WindSettings)
    load: LoadSettings = field(default_factory=LoadSettings)
    acm: AcmSettings = field(default_factory=AcmSettings)
    fleet: FleetSettings = field(default_factory=FleetSettings)
    controller: FopidParams = field(default_factory=FopidParams)
    scenario: ScenarioSettings = field(default_factory=ScenarioSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    def with_values(self, values: dict[str, object]) -> "RunConfig":
        """Apply ``{"section.key": value}`` overrides (strings are coerced)."""
        cfg = self
        for key, raw in values.items():
            cfg = _set(cfg, key, raw)
        return cfg


def _positive(obj, *names):
    for n in names:
        v = getattr(obj, n)
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{n} must be > 0")


def _nonneg(obj, *names):
    for n in names:
        v = getattr(obj, n)
        if not (math.isfinite(v) and v >= 0):
            raise ValueError(f"{n} must be >= 0")


def _coerce(key: str, raw, typ):
    if not isinstance(raw, str):
        value = raw
    elif typ is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            value = True
        elif low in ("0", "false", "no", "off"):
            value = False
        else:
            raise ConfigError(key, f"expected a boolean, got {raw!r}")
    elif typ is int:
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(key, f"expected an integer, got {raw!r}") from None
    elif typ is float:
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(key, f"expected a number, got {raw!r}") from None
    else:
        value = raw.strip()
    if typ is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    return value


def _set(cfg: RunConfig, key: str, raw) -> RunConfig:
    parts = key.strip().split(".")
    if len(parts) != 2:
        raise ConfigError(key, "expected a 'section.name' key")
    sec_name, name = parts
    sections = {f.name for f in fields(RunConfig)}
    if sec_name not in sections:
        raise ConfigError(key, f"unknown section {sec_name!r}")
    section = getattr(cfg, sec_name)
    hints = typing.get_type_hints(type(section))
    if name not in {f.name for f in fields(section)}:
        raise ConfigError(key, "unknown key")
    value = _coerce(key, raw, hints[name])
    try:
        new_section = replace(section, **{name: value})
    except (ValueError, TypeError) as exc:
        raise ConfigError(key, str(exc)) from None
    return replace(cfg, **{sec_name: new_section})


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Split config text into an ordered ``{key: raw_value}`` mapping."""
    out: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("", f"{source}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("", f"{source}:{n}: empty key")
        out[key] = value
    return out


def parse_config(path: str | Path | None = None, flags: dict[str, object] | None = None,
                 base: RunConfig | None = None) -> RunConfig:
    """Resolve defaults, then the file, then ``flags`` (dotted keys) on top."""
    cfg = base or RunConfig()
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
        cfg = cfg.with_values(parse_config_text(text, str(path)))
    if flags:
        cfg = cfg.with_values(flags)
    return cfg


def dump_config(cfg: RunConfig) -> str:
    """Every setting as ``section.key = value`` lines; parses back to ``cfg``."""
    lines = []
    for sec in fields(RunConfig):
        section = getattr(cfg, sec.name)
        for f in fields(section):
            lines.append(f"{sec.name}.{f.name} = {getattr(section, f.name)!r}".replace("'", ""))
    return "\n".join(lines) + "\n"
