import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from socialsim.config import load_config, parse_config
from socialsim.errors import ConfigError

BASE = {
    "world": {"synthetic": {"n_pois": 10, "size_km": 5}},
    "agents": {"generator": {"count": 3}},
}


def errors_of(data, **kw):
    with pytest.raises(ConfigError) as info:
        parse_config(data, **kw)
    return info.value.errors


def test_fixture_round_trip_is_a_fixed_point(fixture_config):
    cfg = load_config(fixture_config)
    again = parse_config(yaml.safe_load(cfg.dump_yaml()))
    assert again.to_dict() == cfg.to_dict()
    assert parse_config(again.to_dict()).dump_yaml() == cfg.dump_yaml()


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    days=st.integers(0, 60),
    count=st.integers(0, 50),
    level=st.floats(0, 1),
    w=st.tuples(st.floats(0.01, 5), st.floats(0, 5), st.floats(0, 5)),
    mode=st.sampled_from(["sequential", "concurrent"]),
)
def test_round_trip_property(seed, days, count, level, w, mode):
    data = {
        **BASE, "seed": seed, "days": days,
        "agents": {"generator": {"count": count}},
        "restrictions": [{"start_day": 1, "level": level}],
        "tpb_weights": {"attitude": w[0], "norm": w[1], "control": w[2]},
        "execution": {"mode": mode},
    }
    cfg = parse_config(data)
    assert parse_config(cfg.to_dict()).to_dict() == cfg.to_dict()


def test_unknown_keys_rejected():
    errs = errors_of({**BASE, "colour": "blue"})
    assert any("colour" in e for e in errs)
    errs = errors_of({**BASE, "world": {"synthetic": {"n_pois": 10, "sizekm": 3}}})
    assert any("world.synthetic.sizekm" in e for e in errs)


def test_field_level_errors():
    errs = errors_of({**BASE, "restrictions": [{"start_day": 2, "level": 1.5}]})
    assert any(e.startswith("restrictions.0.level") for e in errs)
    assert errors_of({**BASE, "days": 2, "ticks": 10})
    assert errors_of({**BASE, "world": {}})
    assert errors_of({**BASE, "restrictions": [{"start_day": 5, "level": 0.2}, {"start_day": 3, "level": 0.5}]})


def test_satisfaction_only_for_physiological_needs():
    errs = errors_of({**BASE, "satisfaction": {"call": {"social": 0.3}}})
    assert any("physiological" in e for e in errs)


def test_growth_only_for_physiological_needs():
    needs = {"hunger": {"tier": "physiological", "growth": 0.04}, "social": {"tier": "social", "growth": 0.1}}
    assert errors_of({**BASE, "needs": needs, "satisfaction": {}})


def test_referenced_paths_must_exist(tmp_path):
    errs = errors_of({**BASE, "world": {"dataset": "missing.jsonl"}}, base_dir=tmp_path)
    assert any("world.dataset" in e for e in errs)
    (tmp_path / "pois.jsonl").write_text("")
    cfg = parse_config({**BASE, "world": {"dataset": "pois.jsonl"}}, base_dir=tmp_path)
    assert cfg.world.dataset == str(tmp_path / "pois.jsonl")


def test_unreadable_or_invalid_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("seed: [unclosed")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_run_length_overrides(fixture_config):
    cfg = load_config(fixture_config)
    assert cfg.n_ticks == 7 * 48
    assert cfg.with_overrides(ticks=5).n_ticks == 5
    assert cfg.with_overrides(ticks=5).with_overrides(days=2).n_ticks == 96


def test_backend_seed_defaults_to_run_seed(fixture_config):
    cfg = load_config(fixture_config)
    assert cfg.backend_seed == 3
    assert cfg.with_overrides(**{"backend.seed": 9}).backend_seed == 9
