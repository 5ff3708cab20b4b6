import json
import subprocess
import sys

import pytest

from socialsim import cli
from socialsim.metrics import evaluate
from socialsim.records import read_jsonl
from socialsim.report import load_run

SMALL = ["--days", "1", "--set", "agents.generator.count=4"]


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def simulate(capsys, fixture_config, out, *extra):
    return run(capsys, "simulate", fixture_config, "-o", out, *SMALL, *extra)


def test_simulate_writes_all_outputs(tmp_path, capsys, fixture_config):
    code, out, _ = simulate(capsys, fixture_config, tmp_path)
    assert code == 0
    printed = dict(line.split(": ", 1) for line in out.splitlines())
    assert set(printed) == {"trajectory", "decision", "memory", "transcript"}
    assert all((tmp_path / p.rsplit("/", 1)[-1]).exists() for p in printed.values())
    assert (tmp_path / "run.json").exists()


def test_invalid_config_exits_2_with_field(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("world: {synthetic: {n_pois: 5}}\nagents: {generator: {count: 2}}\nrestrictions: [{start_day: 1, level: 3}]\n")
    code, _, err = run(capsys, "simulate", bad, "-o", tmp_path / "out")
    assert code == 2 and "restrictions.0.level" in err
    code, _, err = run(capsys, "simulate", tmp_path / "missing.yaml", "-o", tmp_path / "out")
    assert code == 2


def test_seed_override_is_deterministic(tmp_path, capsys, fixture_config):
    for name, seed in (("a", 5), ("b", 5), ("c", 6)):
        assert simulate(capsys, fixture_config, tmp_path / name, "--seed", seed)[0] == 0
    traj = {n: (tmp_path / n / "trajectories.jsonl").read_bytes() for n in "abc"}
    assert traj["a"] == traj["b"] != traj["c"]


@pytest.mark.parametrize("axes, labels", [("M", {"full", "woM"}), ("MPL", {"full", "woM", "woP", "woL"})])
def test_ablate_runs_each_axis(tmp_path, capsys, fixture_config, axes, labels):
    code, out, _ = run(capsys, "ablate", fixture_config, "-o", tmp_path, "--axes", axes, *SMALL)
    assert code == 0 and "manifest:" in out
    manifest = json.loads((tmp_path / "ablation.json").read_text())
    assert {r["label"] for r in manifest["runs"]} == labels
    by_label = {r["label"]: r for r in manifest["runs"]}
    for pair in manifest["pairs"]:
        a, b = by_label[pair["full"]], by_label[pair["ablation"]]
        assert json.dumps([a["seed"], a["backend_seed"]]) == json.dumps([b["seed"], b["backend_seed"]])


def test_evaluate_single_run_without_reference(tmp_path, capsys, fixture_config):
    simulate(capsys, fixture_config, tmp_path / "run")
    code, out, _ = run(capsys, "evaluate", tmp_path / "run", "--out", tmp_path / "rep")
    assert code == 0 and "report.json" in out
    doc = json.loads((tmp_path / "rep" / "report.json").read_text())
    assert all("divergence" not in m for m in doc["metrics"])
    # the report agrees with calling the metrics directly
    data = load_run(tmp_path / "run")
    direct = evaluate(data.trajectories, data.decisions, data.profiles, label=data.label).to_dict()
    assert json.loads(json.dumps(direct)) == {k: v for k, v in doc.items() if k not in ("schema", "version")}


def test_evaluate_with_reference_and_ablation(tmp_path, capsys, fixture_config):
    run(capsys, "ablate", fixture_config, "-o", tmp_path / "abl", "--axes", "M", *SMALL)
    ref = tmp_path / "ref.csv"
    ref.write_text("agent_id,timestamp,poi_id,poi_category,x,y\n"
                   "u1,2024-01-01T08:00:00,p1,workplace,0,0\nu1,2024-01-01T18:00:00,p2,park,3,4\n"
                   "u2,2024-01-01T09:00:00,p3,restaurant,1,1\nu2,2024-01-01T12:00:00,p4,home,7,1\n")
    code, out, _ = run(capsys, "ingest", ref, "--kind", "trajectory_reference", "--out", tmp_path / "ref.jsonl")
    assert code == 0 and "4 records" in out
    code, _, _ = run(capsys, "evaluate", tmp_path / "abl", "--reference", tmp_path / "ref.jsonl.manifest.json",
                     "--social-proportion", "20", "--out", tmp_path / "rep")
    assert code == 0
    table = json.loads((tmp_path / "rep" / "comparison.json").read_text())
    assert table["labels"] == ["full", "woM"]
    keys = {r["key"] for r in table["rows"]}
    assert "radius_of_gyration.jsd" in keys and "social_trips.proportion_rel_error" in keys
    assert (tmp_path / "rep" / "comparison.csv").read_text().startswith("key,full,woM\n")
    for label in ("full", "woM"):
        rep = json.loads((tmp_path / "rep" / label / "report.json").read_text())
        assert any("divergence" in m for m in rep["metrics"])


def test_ingest_reports_rejected_rows(tmp_path, capsys):
    src = tmp_path / "pois.csv"
    src.write_text("id,category,x,y\nh1,home,0,0\nh2,home,oops,0\n")
    code, out, _ = run(capsys, "ingest", src, "--kind", "poi_table")
    assert code == 0 and "1 records" in out and "row 2:" in out


def test_replay_counts_entries(tmp_path, capsys, fixture_config):
    simulate(capsys, fixture_config, tmp_path)
    agent = json.loads((tmp_path / "run.json").read_text())["profiles"][0]["id"]
    code, out, _ = run(capsys, "replay", tmp_path, agent, "--day", "0", "--json")
    assert code == 0
    entries = [json.loads(line) for line in out.splitlines()]
    decisions = [r for r in read_jsonl(tmp_path / "decisions.jsonl") if r["agent_id"] == agent and r["tick"] < 48]
    nodes = [n for n in read_jsonl(tmp_path / "memory.jsonl") if n["agent_id"] == agent and n["timestamp"] < 48]
    assert len(entries) == len(decisions) + len(nodes)
    assert [e["tick"] for e in entries] == sorted(e["tick"] for e in entries)
    code, text, _ = run(capsys, "replay", tmp_path, agent)
    assert code == 0 and len(text.splitlines()) == len(entries)


def test_replay_unknown_agent_exits_2(tmp_path, capsys, fixture_config):
    simulate(capsys, fixture_config, tmp_path)
    code, _, err = run(capsys, "replay", tmp_path, "nobody")
    assert code == 2 and "nobody" in err


def test_runtime_failure_exits_3(tmp_path, capsys, fixture_config, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(cli, "simulate", boom)
    code, _, err = simulate(capsys, fixture_config, tmp_path)
    assert code == 3 and "disk on fire" in err


def test_resume_requires_output(capsys, fixture_config):
    code, _, err = run(capsys, "simulate", fixture_config, "--resume")
    assert code == 2 and "--output" in err


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "socialsim.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "0.1.0" in proc.stdout


def test_evaluate_plots(tmp_path, capsys, fixture_config):
    pytest.importorskip("matplotlib")
    simulate(capsys, fixture_config, tmp_path / "run")
    code, out, _ = run(capsys, "evaluate", tmp_path / "run", "--plots", "--out", tmp_path / "rep")
    assert code == 0 and "plots cdf" in out
    for name in ("radius_distribution.png", "social_trip_cdf.png", "weekly_trend.png"):
        assert (tmp_path / "rep" / name).read_bytes()[:4] == b"\x89PNG"
