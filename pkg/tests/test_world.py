import time

import pytest

from socialsim.cognition import CognitionBackend
from socialsim.cognition.oracle import OracleBackend
from socialsim.config import load_config, parse_config
from socialsim.engine import Simulation, initialize, step
from socialsim.errors import ConfigError, InvalidInputError
from socialsim.experiment import resume, simulate
from socialsim.planning import BehaviorCandidate, TpbScores, TpbWeights, restrict_control, select_action
from socialsim.world import (
    TICKS_PER_DAY,
    Ablation,
    AgentProfile,
    Poi,
    apply_restriction_schedule,
    build_world,
    load_world,
    synthetic_city,
    tick_of,
    iso_time,
)

MINIMAL = {
    "world": {"pois": [{"id": "h1", "category": "home", "x": 0, "y": 0},
                       {"id": "r1", "category": "restaurant", "x": 1, "y": 0}]},
    "agents": {"profiles": [{"id": "a1", "name": "Ana", "home_poi": "h1"}]},
    "days": 1,
}


def small(cfg_path, **over):
    return load_config(cfg_path).with_overrides(**over)


def test_minimal_config_loads():
    w = load_world(parse_config(MINIMAL))
    assert sorted(w.pois) == ["h1", "r1"] and w.agent_ids == ["a1"]
    assert w.agents["a1"].location == "h1"


def test_duplicate_poi_rejected():
    bad = {**MINIMAL, "world": {"pois": MINIMAL["world"]["pois"] * 2}}
    with pytest.raises(ConfigError) as info:
        parse_config(bad)
    assert any("duplicate POI" in e for e in info.value.errors)
    with pytest.raises(InvalidInputError):
        build_world([Poi("p", "home", 0, 0), Poi("p", "park", 1, 1)], [])


def test_unknown_home_rejected():
    bad = {**MINIMAL, "agents": {"profiles": [{"id": "a1", "name": "Ana", "home_poi": "nowhere"}]}}
    with pytest.raises(ConfigError):
        load_world(parse_config(bad))


def test_hundred_agent_city_loads_fast(fixture_config):
    cfg = small(fixture_config, **{"agents.generator.count": 100})
    start = time.perf_counter()
    w = load_world(cfg)
    assert time.perf_counter() - start < 1.0
    assert len(w.agents) == 100 and len(w.pois) == 50


def test_synthetic_city_is_deterministic():
    assert synthetic_city(30, 10, 5) == synthetic_city(30, 10, 5)
    assert synthetic_city(30, 10, 5) != synthetic_city(30, 10, 6)


def test_clock_helpers():
    assert iso_time(0) == "2024-01-01T00:00:00"
    assert iso_time(49) == "2024-01-02T00:30:00"
    assert tick_of(iso_time(1234)) == 1234


def test_empty_world_only_advances_clock():
    w = build_world([], [])
    b = OracleBackend(0)
    for _ in range(3):
        _, res = step(w, b)
        assert res == []
    assert w.clock == 3 and not w.agents


def test_zero_ticks_gives_empty_logs(tmp_path, fixture_config):
    res = simulate(small(fixture_config, ticks=0), tmp_path)
    assert res.trajectories == [] and res.decisions == []
    for kind in ("trajectory", "decision"):
        assert len(res.paths[kind].read_text().splitlines()) == 1  # header only


def test_one_record_per_agent_per_tick(fixture_config):
    cfg = small(fixture_config, **{"agents.generator.count": 4}, days=1)
    res = simulate(cfg, None, keep_records=True)
    keys = [(r["agent_id"], r["tick"]) for r in res.trajectories]
    assert len(keys) == len(set(keys)) == 4 * TICKS_PER_DAY
    assert all(r["poi_id"] is not None or r["in_transit"] for r in res.trajectories)


HUNGRY_POIS = [Poi("h1", "home", 0, 0), Poi("w1", "workplace", 12, 0), Poi("r1", "restaurant", 12.5, 0.5),
               Poi("r2", "restaurant", 3, 3)]


def test_hunger_forced_agent_reaches_restaurant():
    # seed 4 is pinned: at this seed the agent's own preference favours eating out
    w = build_world(HUNGRY_POIS, [AgentProfile("a1", "Ana", "h1", work_poi="w1")], seed=4)
    b = OracleBackend(4)
    initialize(w, b)
    w.clock = 24
    agent = w.agents["a1"]
    agent.location, agent.position = "w1", (12.0, 0.0)
    agent.needs = agent.needs.with_values({"hunger": 1.0})
    _, res = step(w, b)
    decision = res[0].decision
    assert decision["chosen"] == "eat_out:r1"
    # dwell durations plus the travel ticks
    budget = sum(s["duration"] for s in decision["sequence"]["steps"]) + w.transit_ticks("w1", "r1")
    places = [res[0].trajectory["poi_id"]]
    for _ in range(budget - 1):
        _, more = step(w, b)
        places.append(more[0].trajectory["poi_id"])
    assert "r1" in places
    assert w.pois["r1"].category == "restaurant"
    # hunger was relieved once the meal completed
    step(w, b)
    assert agent.needs["hunger"] < 1.0


def test_without_motivation_trajectories_differ(tmp_path, fixture_config):
    cfg = small(fixture_config, **{"agents.generator.count": 5}, days=2)
    full = simulate(cfg, tmp_path / "full")
    wom = simulate(cfg.with_overrides(**{"ablation.disable_motivation": True}), tmp_path / "woM")
    assert full.paths["trajectory"].read_bytes() != wom.paths["trajectory"].read_bytes()
    recs = wom.decisions or __import__("socialsim.records", fromlist=["read_jsonl"]).read_jsonl(wom.paths["decision"])
    # needs stay frozen at their initial values
    first = {}
    for r in recs:
        first.setdefault(r["agent_id"], r["needs"])
        assert r["needs"] == first[r["agent_id"]]


def test_ablation_flags_keep_the_schema(fixture_config):
    cfg = small(fixture_config, **{"agents.generator.count": 3}, days=1)
    base = simulate(cfg, None, keep_records=True)
    keys = set(base.decisions[0]) | {"__traj__"}
    for flag in ("disable_motivation", "disable_planning", "disable_learning"):
        other = simulate(cfg.with_overrides(**{f"ablation.{flag}": True}), None, keep_records=True)
        assert {k for r in other.decisions for k in r} | {"__traj__"} == keys
        assert set(other.trajectories[0]) == set(base.trajectories[0])


def test_without_learning_writes_no_memory(fixture_config):
    cfg = small(fixture_config, **{"agents.generator.count": 3, "ablation.disable_learning": True}, days=1)
    res = simulate(cfg, None, keep_records=True)
    assert res.memory == [] and all(r["memory_writes"] == [] for r in res.decisions)


def test_sequential_and_concurrent_agree(tmp_path, fixture_config):
    cfg = small(fixture_config, **{"agents.generator.count": 6}, days=2)
    a = simulate(cfg, tmp_path / "seq")
    b = simulate(cfg.with_overrides(**{"execution.mode": "concurrent", "execution.workers": 4}), tmp_path / "conc")
    for kind in ("trajectory", "decision", "memory"):
        assert a.paths[kind].read_bytes() == b.paths[kind].read_bytes(), kind


class CrashAt(CognitionBackend):
    """Oracle that dies with an unexpected error once the clock reaches ``tick``."""

    def __init__(self, seed, tick):
        self.inner, self.tick = OracleBackend(seed), tick

    def respond(self, request):
        if request.key and isinstance(request.key[1], int) and request.key[1] >= self.tick:
            raise RuntimeError("simulated crash")
        return self.inner.respond(request)


def test_crash_then_resume_matches_uninterrupted_run(tmp_path, fixture_config):
    cfg = small(fixture_config, **{"agents.generator.count": 5}, days=3)
    clean = simulate(cfg, tmp_path / "clean")
    with pytest.raises(RuntimeError):
        simulate(cfg, tmp_path / "crashed", backend=CrashAt(cfg.backend_seed, 2 * TICKS_PER_DAY + 10))
    assert (tmp_path / "crashed" / "checkpoints" / "day_0002.pkl").exists()
    resumed = resume(tmp_path / "crashed")
    for kind in ("trajectory", "decision", "memory", "transcript"):
        assert resumed.paths[kind].read_bytes() == clean.paths[kind].read_bytes(), kind


def test_no_partial_tick_after_crash(tmp_path, fixture_config):
    cfg = small(fixture_config, **{"agents.generator.count": 4}, days=1)
    with pytest.raises(RuntimeError):
        simulate(cfg, tmp_path, backend=CrashAt(cfg.backend_seed, 7))
    from socialsim.records import read_jsonl

    ticks = [r["tick"] for r in read_jsonl(tmp_path / "trajectories.jsonl")]
    # the crash tick is the first one with a backend call at or after tick 7
    assert sorted(set(ticks)) == list(range(max(ticks) + 1)) and max(ticks) >= 6
    assert len(ticks) == 4 * (max(ticks) + 1)


def test_restriction_levels():
    cand = BehaviorCandidate("eat_out:r1", "Eat out", "r1", "physical", "eat_out")
    remote = BehaviorCandidate("eat_delivery", "Order food", None, "remote", "eat_delivery")
    strong = TpbScores(1.0, 1.0, 1.0)
    assert restrict_control(strong, cand, 0.0) == strong
    assert restrict_control(strong, cand, 1.0).control == 0.0
    assert restrict_control(strong, remote, 1.0) == strong
    weak = TpbScores(0.4, 0.4, 0.4)
    picked = select_action([(cand, restrict_control(TpbScores(0.9, 0.9, 0.9), cand, 1.0)), (remote, weak)], TpbWeights())
    # 0.6 for the restricted trip still beats 0.4; a level-1 world removes control entirely
    assert picked.candidate is cand
    picked = select_action([(cand, restrict_control(TpbScores(0.5, 0.5, 0.9), cand, 1.0)), (remote, TpbScores(0.5, 0.5, 0.5))], TpbWeights())
    assert picked.candidate is remote


def test_level_one_world_keeps_everyone_home(fixture_config):
    cfg = small(fixture_config, **{"agents.generator.count": 8}, days=2,
                restrictions=[{"start_day": 0, "level": 1.0}])
    res = simulate(cfg, None, keep_records=True)
    for r in res.decisions:
        for c in r["candidates"] or []:
            if c["modality"] == "physical" and c["scores"]:
                assert c["scores"]["control"] == 0.0
    physical = sum(1 for r in res.decisions for c in (r["candidates"] or [])
                   if r["chosen"] == c["id"] and c["modality"] == "physical" and c["target_poi"])
    remote = sum(1 for r in res.decisions for c in (r["candidates"] or []) if r["chosen"] == c["id"] and c["modality"] == "remote")
    assert remote > physical


def test_restriction_change_notifies_each_agent():
    w = build_world(HUNGRY_POIS, [AgentProfile("a1", "Ana", "h1"), AgentProfile("a2", "Bo", "h1")])
    apply_restriction_schedule(w, [(0, 0.0)])
    assert not w.passive_event_queue
    apply_restriction_schedule(w, [(0, 0.8)])
    assert w.restriction_level == 0.8
    assert [len(w.passive_event_queue[a]) for a in ("a1", "a2")] == [1, 1]
    with pytest.raises(InvalidInputError):
        apply_restriction_schedule(w, [(0, 1.5)])


def test_staged_restriction_drops_mobility(fixture_config):
    from socialsim.metrics import extract_trips, weekly_mobility

    cfg = small(fixture_config, days=14, restrictions=[{"start_day": 7, "level": 0.8}])
    res = simulate(cfg, None, keep_records=True)
    weeks = weekly_mobility(extract_trips(res.trajectories), 2)
    assert weeks[1] < weeks[0]


def test_ablation_labels():
    assert Ablation().label == "full"
    assert Ablation(disable_planning=True).label == "woP"
