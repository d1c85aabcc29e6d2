import csv
import io
import json
import os

import pytest

from ibcd.cli import main, parse_int_list

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")
SMALL = ["--scenes-per-size", "3", "--clean-scenes", "2"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_int_list():
    assert parse_int_list("3,6,9") == [3, 6, 9]
    assert parse_int_list("1..4,7") == [1, 2, 3, 4, 7]
    assert parse_int_list("none") == []


def test_ibcd_csv_golden(capsys):
    code, out, _ = run(capsys, "ibcd", "--width", "32", "--stride", "5", "--interval", "2",
                       "--sizes", "3,6,9,12,15", "--seed", "7", "--scenes-per-size", "4",
                       "--clean-scenes", "2", "--format", "csv")
    assert code == 0
    with open(os.path.join(GOLDEN, "ibcd_seed7.csv")) as fh:
        assert out == fh.read()


def test_ibcd_json_keys_golden(capsys):
    code, out, _ = run(capsys, "ibcd", "--seed", "7", "--sizes", "3,6", *SMALL)
    doc = json.loads(out)
    keys = {"top": sorted(doc), "row": sorted(doc["rows"][0]),
            "clean": sorted(doc["clean"]), "config": sorted(doc["config"])}
    with open(os.path.join(GOLDEN, "ibcd_json_keys.json")) as fh:
        assert keys == json.load(fh)
    assert doc["schema_version"] == 1


def test_out_file_and_determinism(tmp_path, capsys):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert main(["ibcd", "--seed", "3", "--sizes", "4,8", *SMALL, "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert capsys.readouterr().out == ""


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"width": 24, "height": 24, "stride": 3, "sizes": [4],
                               "scenes_per_size": 2, "clean_scenes": 0, "seed": 11}))
    _, out, _ = run(capsys, "ibcd", "--config", str(cfg))
    doc = json.loads(out)
    assert doc["config"]["width"] == 24 and doc["config"]["stride"] == 3
    _, out, _ = run(capsys, "ibcd", "--config", str(cfg), "--stride", "2", "--seed", "12")
    doc = json.loads(out)
    assert doc["config"]["stride"] == 2 and doc["config"]["seed"] == 12
    assert doc["config"]["width"] == 24


def test_estimate_clean_only(capsys):
    code, out, _ = run(capsys, "estimate", "--scenes-per-size", "0", "--clean-scenes", "5",
                       "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 5
    assert {r["estimated_size"] for r in rows} == {"0"}


def test_estimate_reports_counts(capsys):
    _, out, _ = run(capsys, "estimate", "--sizes", "6", "--scenes-per-size", "2",
                    "--clean-scenes", "0")
    rows = json.loads(out)["rows"]
    assert all(r["estimated_size"] >= 6 and r["query_count"] > r["search_count"] for r in rows)


def test_bench_intervals(capsys):
    code, out, _ = run(capsys, "bench", "--intervals", "1..4", "--sliding", "off",
                       "--sizes", "6,10", "--scenes-per-size", "6", "--clean-scenes", "0",
                       "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [int(r["interval"]) for r in rows] == [1, 2, 3, 4]
    counts = [float(r["mean_search_count"]) for r in rows]
    assert counts == sorted(counts, reverse=True)


def test_certify_and_smooth(capsys):
    code, out, _ = run(capsys, "certify", "--size", "0..3", *SMALL, "--format", "csv")
    assert code == 0 and out.splitlines()[0] == "size,clean_acc,certified_acc,n_scenes"
    code, out, _ = run(capsys, "smooth", "--size", "1,2", "--kind", "block",
                       "--width", "12", "--height", "12", "--stride", "2", "--sizes", "3",
                       *SMALL, "--tau", "0.2")
    doc = json.loads(out)
    assert code == 0 and doc["config"]["backend"] == "block"
    assert len(doc["max_certifiable_patch"]) == 5


def test_oracle_command(capsys):
    code, out, _ = run(capsys, "oracle", "--sizes", "4,9", *SMALL, "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and {r["violations"] for r in rows} == {"0"}


@pytest.mark.parametrize("argv", [
    ["ibcd", "--sizes", "17"],
    ["ibcd", "--stride", "40"],
    ["estimate", "--tau", "0.5", "--object-max-side", "3"],
])
def test_invalid_config_exit_code(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == "" and "error" in err


def test_unknown_flag(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["ibcd", "--no-such-flag"])
    assert ei.value.code != 0
    assert "unrecognized" in capsys.readouterr().err


def test_missing_config_file(capsys):
    code, _, err = run(capsys, "ibcd", "--config", "/nonexistent/cfg.json")
    assert code == 2 and "error" in err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"colour": "blue"}')
    code, _, err = run(capsys, "ibcd", "--config", str(cfg))
    assert code == 2 and "colour" in err
