"""
Primary frequency controller for the EV fleet.

Pipeline per step: dead band -> FOPID on the speed error -> mode gate ->
rate limiter -> saturation. The FOPID operators use the Grünwald-Letnikov
sum truncated to ``memory_len`` samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .fleet import Mode


@dataclass(frozen=True)
class FopidParams:
    """Controller gains and limits.

    The error fed to the FOPID is ``error_gain * (f_ref - f)``; with the
    default ``2*pi`` it is the angular speed error in rad/s. In regulation
    the fleet set point is ``g1 * u * output_scale_mw``.
    """
    kp: float = 1.0
    ki: float = 0.02
    kd: float = 0.01
    lam: float = 1.0
    mu: float = 1.0
    memory_len: int = 1000
    g1: float = -1.0
    k1: float = 0.01
    k2_threshold: float = 0.5
    dead_band_pu: float = 0.001
    dead_band_offset: bool = False
    rate_limit_mw_per_s: float = 20.0
    output_scale_mw: float = 10.0
    error_gain: float = 2.0 * math.pi

    def __post_init__(self):
        if self.memory_len < 1:
            raise ValueError("memory_len must be >= 1")
        if self.dead_band_pu < 0:
            raise ValueError("dead_band_pu must be >= 0")
        for name in ("lam", "mu"):
            if not 0.0 < getattr(self, name) < 2.0:
                raise ValueError(f"{name} must lie in (0, 2)")
        if not self.rate_limit_mw_per_s > 0:
            raise ValueError("rate_limit_mw_per_s must be > 0")
        for name in ("kp", "ki", "kd", "g1", "k1", "k2_threshold", "output_scale_mw", "error_gain"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


# ---------------------------------------------------------------------------
# Grünwald-Letnikov machinery
# ---------------------------------------------------------------------------

def gl_weights(order: float, n: int) -> np.ndarray:
    """First ``n`` GL binomial weights: w0 = 1, wj = w(j-1) (1 - (order+1)/j)."""
    return _gl_weights(float(order), int(n))


@njit(cache=True)
def _gl_weights(order, n):
    w = np.empty(n)
    if n == 0:
        return w
    w[0] = 1.0
    for j in range(1, n):
        w[j] = w[j - 1] * (1.0 - (order + 1.0) / j)
    return w


def effective_length(w: np.ndarray) -> int:
    """Length of ``w`` with trailing exact zeros dropped (integer orders)."""
    nz = np.flatnonzero(w)
    return int(nz[-1]) + 1 if nz.size else 0


@njit(cache=True)
def _gl_sum(buf, head, count, mem, w, n_w):
    """sum_j w[j] * e[k-j] over the stored samples; ``buf`` is a doubled ring."""
    n = min(count, n_w)
    s = 0.0
    for j in range(n):
        s += w[j] * buf[head + mem - j]
    return s


def gl_fractional_op(history, order: float, dt_s: float, memory_len: int | None = None) -> float:
    """
    Truncated Grünwald-Letnikov operator of ``order`` at the newest sample.

    Parameters
    ----------
    history : sequence of float
        Error samples, oldest first; the last element is e(t_k).
    order : float
        Positive for a derivative, negative for an integral, ``|order| < 2``.
    dt_s : float
        Sample spacing [s].
    memory_len : int, optional
        Number of samples kept in the sum; defaults to the whole history.

    Returns
    -------
    float
        ``dt**(-order) * sum_{j<L} w_j e(t_{k-j})``.
    """
    h = np.asarray(history, dtype=np.float64)
    if h.size == 0:
        raise ValueError("history must be non-empty")
    if not abs(order) < 2:
        raise ValueError("|order| must be < 2")
    L = h.size if memory_len is None else min(int(memory_len), h.size)
    w = gl_weights(order, L)
    return float(dt_s ** (-order) * np.dot(w, h[::-1][:L]))


# ---------------------------------------------------------------------------
# controller state
# ---------------------------------------------------------------------------

@dataclass
class ControllerState:
    """Error ring plus the previous output.

    The ring is stored twice over (length ``2*memory_len``) so the newest
    ``memory_len`` samples are always contiguous ending at ``head + memory_len``.
    """
    memory_len: int
    buf: np.ndarray = None
    head: int = -1
    count: int = 0
    last_output_mw: float = 0.0
    mode: Mode = Mode.IDLE

    def __post_init__(self):
        if self.buf is None:
            self.buf = np.zeros(2 * self.memory_len)

    @property
    def error_history(self) -> np.ndarray:
        """Stored errors, oldest first."""
        n = self.count
        return self.buf[self.head + self.memory_len - n + 1: self.head + self.memory_len + 1].copy()

    def copy(self) -> "ControllerState":
        return replace(self, buf=self.buf.copy())


@njit(cache=True)
def _push(buf, head, count, mem, e):
    head = (head + 1) % mem
    buf[head] = e
    buf[head + mem] = e
    return head, min(count + 1, mem)


@njit(cache=True)
def _dead_band(delta_f_hz, f_nom_hz, band_pu, offset):
    band = band_pu * f_nom_hz
    if abs(delta_f_hz) <= band:
        return 0.0
    if offset:
        return delta_f_hz - band if delta_f_hz > 0 else delta_f_hz + band
    return delta_f_hz


@njit(cache=True)
def _fopid(buf, head, count, mem, e, kp, ki, kd, lam, mu, dt_s, w_int, n_int, w_der, n_der):
    i_term = dt_s ** lam * _gl_sum(buf, head, count, mem, w_int, n_int)
    d_term = dt_s ** (-mu) * _gl_sum(buf, head, count, mem, w_der, n_der)
    return kp * e + ki * i_term + kd * d_term


@njit(cache=True)
def _select_mode(p_t, u, se, k1, k2, dt_s):
    if p_t < 0.0 and abs(u) > k2 * (k1 / dt_s) and se > 0.0:
        return 2
    if p_t > 0.0:
        return 1
    return 0


@njit(cache=True)
def _limit(raw, last, max_chg, max_dis, rate, dt_s):
    step = rate * dt_s
    out = min(max(raw, last - step), last + step)
    return min(max(out, -max_dis), max_chg)


@njit(cache=True)
def _raw_setpoint(mode, u, p_t, max_chg, g1, scale):
    if mode == 2:
        return g1 * u * scale
    if mode == 1:
        return min(p_t, max_chg)
    return 0.0


def dead_band_filter(delta_f_hz: float, f_nom_hz: float = 50.0, dead_band_pu: float = 0.001,
                     offset: bool = False) -> float:
    """Zero inside ``|df|/f_nom <= band``; pass-through (or shifted, with ``offset``) outside."""
    return _dead_band(float(delta_f_hz), float(f_nom_hz), float(dead_band_pu), offset)


def _weights_for(p: FopidParams):
    w_int = gl_weights(-p.lam, p.memory_len)
    w_der = gl_weights(p.mu, p.memory_len)
    return w_int, effective_length(w_int), w_der, effective_length(w_der)


def fopid_output(state: ControllerState, filtered_error: float, p: FopidParams,
                 dt_s: float) -> tuple[float, ControllerState]:
    """Append the error and return ``(u, new_state)`` with
    ``u = kp e + ki D^-lam e + kd D^mu e``."""
    if state.memory_len != p.memory_len:
        raise ValueError("controller state and params disagree on memory_len")
    st = state.copy()
    st.head, st.count = _push(st.buf, st.head, st.count, st.memory_len, float(filtered_error))
    w_int, n_int, w_der, n_der = _weights_for(p)
    u = _fopid(st.buf, st.head, st.count, st.memory_len, float(filtered_error),
               p.kp, p.ki, p.kd, p.lam, p.mu, dt_s, w_int, n_int, w_der, n_der)
    return u, st


def select_mode(p_t_mw: float, u_signal: float, se_percent: float, p: FopidParams,
                dt_s: float = 0.01) -> Mode:
    """Regulation if ``p_t < 0``, ``|u| > k2 * k1/dt`` and some EV is available;
    Charging if ``p_t > 0``; Idle otherwise."""
    return Mode(_select_mode(p_t_mw, u_signal, se_percent, p.k1, p.k2_threshold, dt_s))


def apply_limiters(raw_cmd_mw: float, last_output_mw: float, limits: tuple[float, float],
                   rate_limit_mw_per_s: float, dt_s: float) -> float:
    """Rate limit against the previous output, then saturate into ``[-max_dis, max_chg]``."""
    max_chg, max_dis = limits
    if max_chg < 0 or max_dis < 0:
        raise ValueError("limits must be >= 0")
    return _limit(raw_cmd_mw, last_output_mw, max_chg, max_dis, rate_limit_mw_per_s, dt_s)


def controller_step(state: ControllerState, delta_f_hz: float, p_t_mw: float,
                    limits: tuple[float, float], se_pct: float, p: FopidParams,
                    dt_s: float, f_nom_hz: float = 50.0) -> tuple[float, ControllerState]:
    """One controller update.

    Returns the fleet power set point in MW (positive = charging) and the new
    state. The set point already respects the rate limit and ``limits``.
    """
    for x in (delta_f_hz, p_t_mw, se_pct):
        if not math.isfinite(x):
            raise ValueError("controller inputs must be finite")
    df = dead_band_filter(delta_f_hz, f_nom_hz, p.dead_band_pu, p.dead_band_offset)
    u, st = fopid_output(state, -p.error_gain * df, p, dt_s)
    mode = _select_mode(p_t_mw, u, se_pct, p.k1, p.k2_threshold, dt_s)
    raw = _raw_setpoint(mode, u, p_t_mw, limits[0], p.g1, p.output_scale_mw)
    out = apply_limiters(raw, state.last_output_mw, limits, p.rate_limit_mw_per_s, dt_s)
    st.last_output_mw = out
    st.mode = Mode(mode)
    return out, st
