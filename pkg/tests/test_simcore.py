import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from microgrid_pfc import oracles
from microgrid_pfc.controller import FopidParams
from microgrid_pfc.fleet import build_fleet
from microgrid_pfc.loads import AsyncMachine, ResidentialLoad
from microgrid_pfc.profiles import Profile
from microgrid_pfc.simcore import (Components, Event, EventKind, SimConfig, SimulationFault, Simulator,
                                   simulate, step_index, swing_step)
from microgrid_pfc.sources import DieselGen, PvFarm, WindFarm


def small_grid(wind=14.0, load_pu=0.7, events=(), fleet=None):
    """No PV, flat wind and load; 14 m/s clamps wind at its 4.5 MW rating."""
    return Components(DieselGen(), PvFarm(), WindFarm(wind_profile=Profile(np.full(2, wind))),
                      ResidentialLoad(profile=Profile(np.full(2, load_pu))), AsyncMachine(),
                      fleet if fleet is not None else build_fleet(0), FopidParams(), list(events))

# ---------------------------------------------------------------- swing


def test_swing_single_step_example():
    cfg = SimConfig(inertia_h_s=5.0, damping_d_pu=1.0)
    got = swing_step(0.0, 1.5, cfg)
    assert got == pytest.approx(0.005, rel=1e-12)
    assert got == oracles.swing_euler_by_hand(0.0, 1.5, 5.0, 1.0, 15.0, 50.0, 0.01)


def test_swing_steady_state():
    cfg = SimConfig(inertia_h_s=5.0, damping_d_pu=1.0)
    df = 0.0
    for _ in range(40_000):      # 40 time constants of 2H/D
        df = swing_step(df, 1.5, cfg)
    assert df == pytest.approx(oracles.swing_steady_state(1.5, 1.0, 15.0, 50.0), rel=1e-9)
    assert df == pytest.approx(5.0)


@given(st.floats(-2, 2), st.floats(-20, 20))
def test_swing_matches_hand_formula(df, p):
    cfg = SimConfig()
    assert swing_step(df, p, cfg) == pytest.approx(
        oracles.swing_euler_by_hand(df, p, 50.0, 8.0, 15.0, 50.0, 0.01), rel=1e-14, abs=1e-15)


def test_swing_rejects_non_finite():
    with pytest.raises(SimulationFault):
        swing_step(0.0, math.inf, SimConfig())

# ---------------------------------------------------------------- config and indexing


@pytest.mark.parametrize("kw", [dict(dt_s=0.0), dict(duration_s=0.015), dict(sample_every_s=0.005),
                                dict(inertia_h_s=0.0), dict(damping_d_pu=-1.0)])
def test_sim_config_invariants(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_sample_count():
    assert SimConfig(duration_s=60.0).n_samples == 61
    assert SimConfig().n_steps == 8_640_000


def test_step_index_snaps_representation_noise():
    assert step_index(0.35, 0.01) == 35
    assert step_index(43_200.0, 0.01) == 4_320_000
    assert step_index(0.351, 0.01) == 36

# ---------------------------------------------------------------- whole-loop behaviour


def test_balanced_grid_stays_put():
    r = simulate(SimConfig(duration_s=60.0), small_grid())
    assert len(r.trace) == 61
    assert np.all(r.trace.delta_f_hz == 0.0)
    assert r.trace.p_diesel_mw[-1] == pytest.approx(2.5)
    assert r.error is None


def test_generation_step_raises_frequency():
    r = simulate(SimConfig(duration_s=120.0), small_grid(10.0, events=[Event(1.0, EventKind.WIND_SPEED, 13.5)]))
    d = r.trace.delta_f_hz
    assert d[0] == d[1] == 0.0
    peak = int(np.argmax(d))
    assert d[peak] > 0.1
    assert np.all(np.diff(d[1:peak + 1]) > 0)


def test_load_step_lowers_frequency():
    r = simulate(SimConfig(duration_s=60.0), small_grid(events=[Event(5.0, EventKind.ACM_START)]))
    assert r.trace.delta_f_hz.min() < -0.05
    assert np.all(r.trace.delta_f_hz[:6] == 0.0)


def test_deterministic_bytes():
    args = (SimConfig(duration_s=30.0), small_grid(events=[Event(2.0, EventKind.ACM_START)],
                                                   fleet=build_fleet(50, 1)))
    a, b = simulate(*args).trace, simulate(*args).trace
    for name in ("delta_f_hz", "p_ev_mw", "mean_soc", "mode"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_input_components_not_mutated():
    fleet = build_fleet(20, 1)
    soc0 = fleet.soc.copy()
    comp = small_grid(events=[Event(0.0, EventKind.ACM_START)], fleet=fleet)
    simulate(SimConfig(duration_s=20.0), comp)
    assert np.array_equal(comp.fleet.soc, soc0)


def _acm_run(dt):
    cfg = SimConfig(dt_s=dt, duration_s=20.0)
    return simulate(cfg, small_grid(events=[Event(0.0, EventKind.ACM_START)])).trace.delta_f_hz


def test_first_order_convergence():
    ref = _acm_run(0.01 / 64)
    e1 = np.max(np.abs(_acm_run(0.01) - ref))
    e2 = np.max(np.abs(_acm_run(0.005) - ref))
    assert 1.7 <= e1 / e2 <= 2.3


@given(st.floats(5.0, 12.0), st.floats(0.5, 1.0))    # load above peak wind keeps diesel off its floor
def test_equilibrium_is_invariant(wind, load_pu):
    r = simulate(SimConfig(duration_s=5.0), small_grid(wind, load_pu))
    # diesel set point is load - wind, so re-adding them can leave one ulp
    assert np.max(np.abs(r.trace.delta_f_hz)) < 1e-12


def test_events_fire_at_their_sample():
    r = simulate(SimConfig(duration_s=10.0), small_grid(events=[Event(3.0, EventKind.ACM_START)]))
    load = r.trace.p_load_mw
    # the sample at t carries the step that ended at t; the event step starts at 3 s
    assert np.all(load[:4] == 7.0) and load[4] > 7.0


def test_event_outside_horizon_rejected():
    with pytest.raises(ValueError):
        Simulator(SimConfig(duration_s=10.0), small_grid(events=[Event(11.0, EventKind.ACM_START)]))

# ---------------------------------------------------------------- stepping API and faults


def test_step_api_matches_batch_run():
    cfg = SimConfig(duration_s=3.0)
    comp = small_grid(events=[Event(0.5, EventKind.ACM_START)])
    sim = Simulator(cfg, comp)
    states = [sim.step() for _ in range(cfg.n_steps)]
    assert sim.done
    with pytest.raises(ValueError):
        sim.step()
    batch = simulate(cfg, comp).trace
    assert states[-1].delta_f_hz == batch.delta_f_hz[-1]
    assert states[-1].t_s == pytest.approx(3.0)


def test_step_conservation_matches_swing():
    cfg = SimConfig(duration_s=5.0)
    sim = Simulator(cfg, small_grid(events=[Event(0.2, EventKind.ACM_START)], fleet=build_fleet(100, 0)))
    prev = sim.state
    for _ in range(cfg.n_steps):
        cur = sim.step()
        assert cur.delta_f_hz == swing_step(prev.delta_f_hz, cur.p_imbalance_mw, cfg)
        prev = cur
    assert sim.diagnostics.conservation_mismatches == 0


def test_fault_returns_partial_trace():
    cfg = SimConfig(duration_s=60.0, inertia_h_s=1e-6)
    r = simulate(cfg, small_grid(events=[Event(1.0, EventKind.ACM_START)]))
    assert isinstance(r.error, SimulationFault) and r.error.component == "swing"
    assert 1 <= len(r.trace) < cfg.n_samples
    assert np.all(np.isfinite(r.trace.delta_f_hz))


def test_fault_is_sticky():
    sim = Simulator(SimConfig(duration_s=60.0, inertia_h_s=1e-6),
                    small_grid(events=[Event(1.0, EventKind.ACM_START)]))
    sim.run()
    with pytest.raises(SimulationFault):
        sim.advance(1)
