"""
Independent reference computations used to check the production code.

Everything here is deliberately naive: plain Python loops, bisection instead
of Newton, brute-force sweeps, direct counting. Nothing in this module calls
the compiled kernels.
"""

from __future__ import annotations

import math
from collections.abc import Sequence


def cell_current_bisect(v: float, i_l: float, i_o: float, xi: float, v_t: float, r_s: float,
                        r_sh: float, lo: float | None = None, hi: float | None = None,
                        iters: int = 200) -> float:
    """Root of the single-diode relation by bisection.

    The residual ``I_L - I_o(exp((V+I R_s)/(xi V_T)) - 1) - (V+I R_s)/R_sh - I``
    is strictly decreasing in ``I``. The default bracket is ``[-I_L, 2 I_L]``;
    it is widened downward when the root lies below it (far beyond V_oc).
    """
    def f(i):
        vd = v + i * r_s
        return i_l - i_o * math.expm1(min(vd / (xi * v_t), 700.0)) - vd / r_sh - i

    scale = max(abs(i_l), 1e-12)
    lo = -scale if lo is None else lo
    hi = 2.0 * scale if hi is None else hi
    while f(lo) < 0:
        lo *= 2.0
    while f(hi) > 0:
        hi *= 2.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def mpp_sweep(i_l: float, i_o: float, xi: float, v_t: float, r_s: float, r_sh: float,
              v_step: float = 1e-3, v_max: float = 1.0) -> tuple[float, float]:
    """Brute-force cell MPP over ``V = 0, v_step, ...`` using the bisection solver."""
    best_v, best_p = 0.0, 0.0
    n = int(round(v_max / v_step))
    for k in range(n + 1):
        v = k * v_step
        p = v * cell_current_bisect(v, i_l, i_o, xi, v_t, r_s, r_sh, iters=80)
        if p > best_p:
            best_v, best_p = v, p
    return best_v, best_p


def pid_reference(errors: Sequence[float], kp: float, ki: float, kd: float, dt: float,
                  window: int | None = None) -> list[float]:
    """Integer-order PID: rectangle-rule integral (optionally over the last
    ``window`` samples) and backward-difference derivative with e(-1) = 0."""
    out = []
    acc = 0.0
    prev = 0.0
    for k, e in enumerate(errors):
        if window is None:
            acc += e
            integ = acc * dt
        else:
            integ = sum(errors[max(0, k - window + 1): k + 1]) * dt
        out.append(kp * e + ki * integ + kd * (e - prev) / dt)
        prev = e
    return out


def running_sum_integral(values: Sequence[float], dt: float) -> float:
    s = 0.0
    for x in values:
        s += x
    return s * dt


def swing_euler_by_hand(df_hz: float, p_mw: float, h: float, d: float, s_mva: float,
                        f_nom: float, dt: float) -> float:
    """``f_nom * (x + dt*(P/S - D x)/(2H))`` with ``x = df/f_nom``, term by term."""
    x = df_hz / f_nom
    p_pu = p_mw / s_mva
    rate = (p_pu - d * x) / (2.0 * h)
    return f_nom * (x + rate * dt)


def swing_steady_state(p_mw: float, d: float, s_mva: float, f_nom: float) -> float:
    return f_nom * (p_mw / s_mva) / d


def droop_target_by_hand(p_ref: float, df_hz: float, f_nom: float, r: float, p_rated: float) -> float:
    t = p_ref - (df_hz / f_nom) / r * p_rated
    return max(0.0, min(p_rated, t))


def first_order_step(t: float, gain: float, tau: float, u: float) -> float:
    """Analytic response of ``tau y' = gain u - y`` from rest."""
    return gain * u * (1.0 - math.exp(-t / tau))


def count_in_band(plugged: Sequence[bool], soc: Sequence[float], lo: float = 0.2,
                  hi: float = 0.8) -> float:
    if not soc:
        return 0.0
    c = 0
    for p, s in zip(plugged, soc):
        if p and lo < s < hi:
            c += 1
    return 100.0 * c / len(soc)


def extrema_scan(values: Sequence[float]) -> tuple[float, float]:
    lo = hi = values[0]
    for v in values[1:]:
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    return lo, hi


def sequential_limiter(raw: float, last: float, rate: float, dt: float, max_chg: float,
                       max_dis: float) -> float:
    step = rate * dt
    if raw > last + step:
        raw = last + step
    if raw < last - step:
        raw = last - step
    if raw > max_chg:
        raw = max_chg
    if raw < -max_dis:
        raw = -max_dis
    return raw


def derived_examples() -> list[tuple[str, float]]:
    """Values behind the hand-derived examples, in a fixed order."""
    return [
        ("swing: df=0, P=1.5 MW, H=5, D=1, S=15, dt=0.01 -> df [Hz]",
         swing_euler_by_hand(0.0, 1.5, 5.0, 1.0, 15.0, 50.0, 0.01)),
        ("swing steady state: P=1.5 MW, D=1, S=15 -> df [Hz]", swing_steady_state(1.5, 1.0, 15.0, 50.0)),
        ("droop: df=-0.5 Hz, R=0.05, 15 MW, p_ref=0 -> target [MW]",
         droop_target_by_hand(0.0, -0.5, 50.0, 0.05, 15.0)),
        ("cell current, R_s=0, R_sh=1e12, V=0, I_L=8 -> I [A]",
         cell_current_bisect(0.0, 8.0, 1e-10, 1.3, 0.02585, 0.0, 1e12)),
        ("cell current, default cell at V=0.6 -> I [A]",
         cell_current_bisect(0.6, 8.0, 1e-10, 1.3, 0.02585, 0.005, 1000.0)),
        ("cell MPP, default cell, 1 mV sweep -> P [W]",
         mpp_sweep(8.0, 1e-10, 1.3, 0.02585, 0.005, 1000.0)[1]),
        ("ACM inrush: 7 x 2 MVA x 0.9 -> P [MW]", 7 * 2.0 * 0.9),
        ("EV response at t=T_ev, K=0.333, cmd=3 MW -> P [MW]", first_order_step(1.0, 0.333, 1.0, 3.0)),
        ("SOC after 1 h at 10 kW on 40 kWh from 0.5", 0.5 + 10.0 * 3600.0 / 3600.0 / 40.0),
        ("GL order -1, 250 ones, dt=0.01", running_sum_integral([1.0] * 250, 0.01)),
        ("PID single sample e=1, Kp=1 Ki=0.02 Kd=0.01, dt=0.01",
         pid_reference([1.0], 1.0, 0.02, 0.01, 0.01)[0]),
        ("limiter: last=0, raw=4, rate=2 MW/s, dt=0.5 -> [MW]",
         sequential_limiter(4.0, 0.0, 2.0, 0.5, 4.0, 4.0)),
        ("SE%: 100 units, 37 plugged in band",
         count_in_band([k < 37 for k in range(100)], [0.5] * 100)),
        ("extrema of [50, 49.5, 50.3]", extrema_scan([50.0, 49.5, 50.3])[0]),
    ]
