import pytest
from hypothesis import given, strategies as st

from microgrid_pfc.config import ConfigError, RunConfig, dump_config, parse_config, parse_config_text


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("")
    assert parse_config(p) == RunConfig()


def test_file_values_and_comments(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# inertia study\nsim.inertia_h_s = 30   # lower\n\ncontroller.kp = 1.5\nscenario.id = wind_trip\n")
    cfg = parse_config(p)
    assert cfg.sim.inertia_h_s == 30.0 and cfg.controller.kp == 1.5 and cfg.scenario.id == "wind_trip"


def test_flags_override_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("sim.inertia_h_s = 30\n")
    cfg = parse_config(p, {"sim.inertia_h_s": "40"})
    assert cfg.sim.inertia_h_s == 40.0


def test_typed_flag_values():
    cfg = parse_config(None, {"fleet.n_evs": 50, "sim.dt_s": 0.005, "scenario.contingency": "off"})
    assert cfg.fleet.n_evs == 50 and cfg.sim.dt_s == 0.005 and cfg.scenario.contingency is False


def test_out_of_range_names_key():
    with pytest.raises(ConfigError) as info:
        parse_config(None, {"controller.dead_band_pu": "-1"})
    assert info.value.key == "controller.dead_band_pu"
    assert "controller.dead_band_pu" in str(info.value)


@pytest.mark.parametrize("key", ["controller.gain", "nosuch.kp", "kp"])
def test_unknown_key(key):
    with pytest.raises(ConfigError, match="unknown|section"):
        parse_config(None, {key: "1"})


@pytest.mark.parametrize("key,value", [("sim.dt_s", "fast"), ("fleet.n_evs", "1.5"),
                                       ("scenario.contingency", "maybe")])
def test_bad_type(key, value):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        parse_config(None, {key: value})


def test_malformed_line_reports_line_number():
    with pytest.raises(ConfigError, match="run.cfg:2"):
        parse_config_text("sim.dt_s = 0.01\nthis is not a setting\n", "run.cfg")


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config("/nonexistent/run.cfg")


def test_dump_round_trip(tmp_path):
    cfg = RunConfig().with_values({"controller.lam": 0.9, "scenario.case": "ev200", "fleet.seed": 7})
    p = tmp_path / "dump.cfg"
    p.write_text(dump_config(cfg))
    assert parse_config(p) == cfg


@given(st.floats(1.0, 100.0), st.floats(0.0, 20.0), st.floats(0.05, 2.0))
def test_dump_round_trip_property(h, d, kp):
    cfg = RunConfig().with_values({"sim.inertia_h_s": h, "sim.damping_d_pu": d, "controller.kp": kp})
    assert RunConfig().with_values(parse_config_text(dump_config(cfg))) == cfg
