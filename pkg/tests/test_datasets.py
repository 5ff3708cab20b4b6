import json

import pytest

from socialsim.datasets import DatasetManifest, export, ingest, read_groups, read_pois, read_reference
from socialsim.errors import InvalidInputError, SchemaVersionError
from socialsim.records import read_jsonl, write_jsonl

TRAJ_HEADER = "agent_id,timestamp,poi_id,poi_category,x,y\n"


def canonical_trajectory_rows(n):
    rows = []
    for i in range(n):
        agent = f"u{i % 3}"
        hour = 8 + i // 3
        rows.append(f"{agent},2024-01-0{1 + i % 2}T{hour:02d}:30:00,p{i},cafe,{1.5 + i},{-2.25 * i}\n")
    # canonical order is (agent, tick)
    return sorted(rows, key=lambda r: (r.split(",")[0], r.split(",")[1]))


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_ten_row_trajectory_file(tmp_path):
    src = write(tmp_path / "ref.csv", TRAJ_HEADER + "".join(canonical_trajectory_rows(10)))
    m = ingest(src, "trajectory_reference")
    assert m.record_count == 10 and m.rejected == []
    recs = read_reference(m.path)
    assert len(recs) == 10 and {"agent_id", "tick", "time", "poi_id", "location"} <= set(recs[0])
    assert DatasetManifest.load(m.path + ".manifest.json").record_count == 10


def test_bad_rows_reported_with_row_numbers(tmp_path):
    rows = canonical_trajectory_rows(4)
    rows.insert(1, "u9,yesterday-ish,p9,cafe,1,1\n")
    rows.insert(3, "u8,2024-01-01T10:00:00,,cafe,1,1\n")
    src = write(tmp_path / "ref.csv", TRAJ_HEADER + "".join(rows))
    m = ingest(src, "trajectory_reference", tmp_path / "out.jsonl")
    assert m.record_count == 4
    assert [(r["row"], "timestamp" in r["reason"]) for r in m.rejected] == [(2, True), (4, False)]
    assert "poi_id" in m.rejected[1]["reason"]


def test_duplicate_keys_and_pre_epoch_rejected(tmp_path):
    src = write(tmp_path / "ref.csv", TRAJ_HEADER + "u1,2024-01-01T08:00:00,a,cafe,0,0\n"
                "u1,2024-01-01T08:10:00,b,cafe,0,0\nu2,2023-12-31T23:00:00,c,cafe,0,0\n")
    m = ingest(src, "trajectory_reference")
    assert m.record_count == 1 and [r["row"] for r in m.rejected] == [2, 3]


@pytest.mark.parametrize(
    "kind, header, rows",
    [
        ("trajectory_reference", TRAJ_HEADER, None),
        ("poi_table", "id,category,x,y\n", ["h1,home,0.0,1.5\n", "p2,park,3.25,-4.0\n", "r1,restaurant,10.0,2.0\n"]),
        ("group_profiles", "agent_id,income_group\n", ["a1,high\n", "a2,low\n", "a3,other\n"]),
    ],
)
def test_ingest_export_round_trip_is_byte_identical(tmp_path, kind, header, rows):
    text = header + "".join(rows if rows is not None else canonical_trajectory_rows(10))
    src = write(tmp_path / "in.csv", text)
    m = ingest(src, kind, tmp_path / "canon.jsonl")
    export(m.path, tmp_path / "out.csv")
    assert (tmp_path / "out.csv").read_bytes() == src.read_bytes()


def test_geographic_aliases_and_range(tmp_path):
    src = write(tmp_path / "pois.csv", "id,category,lat,lon\nh1,home,40.71,-74.0\nbad,park,95,0\n")
    m = ingest(src, "poi_table", coordinates="geographic")
    assert m.record_count == 1 and m.rejected[0]["row"] == 2
    assert read_pois(m.path)[0].location == (40.71, -74.0)


def test_jsonl_input_and_groups(tmp_path):
    src = tmp_path / "groups.jsonl"
    src.write_text("\n".join(json.dumps(r) for r in [{"agent_id": "a", "income_group": "HIGH"},
                                                       {"agent_id": "b", "income_group": "middle"}]))
    m = ingest(src, "group_profiles")
    assert read_groups(m.path) == {"a": "high"} and m.rejected_count == 1


def test_unknown_kind_and_missing_file(tmp_path):
    with pytest.raises(InvalidInputError):
        ingest(tmp_path / "x.csv", "weather")
    with pytest.raises(InvalidInputError):
        ingest(tmp_path / "x.csv", "poi_table")


def test_manifest_kind_must_match_file(tmp_path):
    src = write(tmp_path / "pois.csv", "id,category,x,y\nh1,home,0,0\n")
    m = ingest(src, "poi_table", tmp_path / "pois.jsonl")
    doc = json.loads((tmp_path / "pois.jsonl.manifest.json").read_text())
    doc["kind"] = "group_profiles"
    (tmp_path / "wrong.json").write_text(json.dumps(doc))
    with pytest.raises(InvalidInputError):
        DatasetManifest.load(tmp_path / "wrong.json")
    assert DatasetManifest.load(m.path + ".manifest.json").kind == "poi_table"


def test_readers_reject_unknown_major_version(tmp_path):
    p = tmp_path / "t.jsonl"
    write_jsonl(p, "trajectory", [{"a": 1}])
    assert read_jsonl(p, "trajectory") == [{"a": 1}]
    lines = p.read_text().splitlines()
    lines[0] = json.dumps({"schema": "socialsim.trajectory", "version": "2.0"})
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(SchemaVersionError):
        read_jsonl(p, "trajectory")
    with pytest.raises(SchemaVersionError):
        read_jsonl(p, "decision")


def test_world_from_ingested_pois(tmp_path):
    from socialsim.config import parse_config
    from socialsim.world import load_world

    src = write(tmp_path / "pois.csv", "id,category,x,y\nh1,home,0,0\nr1,restaurant,1,0\nw1,workplace,2,2\n")
    ingest(src, "poi_table", tmp_path / "pois.jsonl")
    cfg = parse_config({"world": {"dataset": "pois.jsonl"}, "agents": {"generator": {"count": 2}}}, base_dir=tmp_path)
    w = load_world(cfg)
    assert sorted(w.pois) == ["h1", "r1", "w1"]
