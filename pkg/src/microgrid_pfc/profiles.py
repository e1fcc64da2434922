"""24-hour environment profiles sampled at a fixed resolution and held between samples."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DAY_S = 86_400.0
NATIVE_STEP_S = 60.0


@dataclass(frozen=True)
class Profile:
    values: np.ndarray
    step_s: float = NATIVE_STEP_S

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("profile needs a non-empty 1-D value array")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        if not self.step_s > 0:
            raise ValueError("profile step must be > 0")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        return (isinstance(other, Profile) and self.step_s == other.step_s
                and np.array_equal(self.values, other.values))

    __hash__ = None


def hold_value(profile: Profile, t_s: float) -> float:
    """Zero-order hold: the sample at or before ``t_s`` (clamped to the ends)."""
    k = int(math.floor(t_s / profile.step_s))
    k = min(max(k, 0), profile.values.size - 1)
    return float(profile.values[k])


def _sample_times(step_s: float = NATIVE_STEP_S) -> np.ndarray:
    return np.arange(0.0, DAY_S, step_s)


def clear_sky_irradiance(sunrise_s: float = 25_000.0, sunset_s: float = 61_400.0,
                         peak_w_m2: float = 1000.0, step_s: float = NATIVE_STEP_S) -> Profile:
    """Clipped half-sine between sunrise and sunset, peaking mid-way."""
    t = _sample_times(step_s)
    phase = (t - sunrise_s) / (sunset_s - sunrise_s)
    g = np.where((phase > 0) & (phase < 1), peak_w_m2 * np.sin(np.pi * phase), 0.0)
    return Profile(np.maximum(g, 0.0), step_s)


def residential_multiplier(night_pu: float = 0.7, day_pu: float = 1.0,
                           step_s: float = NATIVE_STEP_S) -> Profile:
    """Flat night level, ramp up 06:00-08:00, day level until 22:00, ease back by 24:00."""
    t = _sample_times(step_s)
    m = np.interp(t, [0.0, 21_600.0, 28_800.0, 79_200.0, DAY_S],
                  [night_pu, night_pu, day_pu, day_pu, night_pu])
    return Profile(m, step_s)


def diurnal_wind(mean_m_s: float = 10.0, swing_m_s: float = 3.5, peak_s: float = 79_200.0,
                 step_s: float = NATIVE_STEP_S) -> Profile:
    """Cosine wind-speed day peaking at ``peak_s`` (mean + swing)."""
    t = _sample_times(step_s)
    v = mean_m_s + swing_m_s * np.cos(2.0 * np.pi * (t - peak_s) / DAY_S)
    return Profile(np.maximum(v, 0.0), step_s)


def load_profile_csv(path: str | Path) -> Profile:
    """Read a ``time_s,value`` CSV with uniformly spaced samples starting at 0."""
    path = Path(path)
    times, values = [], []
    with path.open(newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or len(header) < 2:
            raise ValueError(f"{path}: expected a header 'time_s,value'")
        for n, row in enumerate(rows, start=2):
            if not row:
                continue
            try:
                times.append(float(row[0]))
                values.append(float(row[1]))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}:{n}: malformed row {row!r}") from exc
    if len(times) < 2:
        raise ValueError(f"{path}: need at least two samples")
    t = np.asarray(times)
    steps = np.diff(t)
    if t[0] != 0.0 or not np.allclose(steps, steps[0]) or steps[0] <= 0:
        raise ValueError(f"{path}: samples must start at 0 and be uniformly spaced")
    return Profile(np.asarray(values), float(steps[0]))
