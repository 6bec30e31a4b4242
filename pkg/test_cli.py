from __future__ import annotations

import json
import os

import pytest

import config
from main import main

GRAPH_DIR = os.path.join(config.BASE_DIR, "data", "graphs")
FIG1 = os.path.join(GRAPH_DIR, "fig1.json")
FIG2 = os.path.join(GRAPH_DIR, "fig2.json")


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    assert code == 0, captured.err
    return captured.out


def test_gen_is_deterministic(capsys):
    first = _run(capsys, "--seed", "3", "gen", "--n", "15", "--extra-edges", "2")
    second = _run(capsys, "--seed", "3", "gen", "--n", "15", "--extra-edges", "2")
    assert first == second
    doc = json.loads(first)
    assert len(doc["nodes"]) == 15


def test_gen_from_workflow(capsys):
    path = os.path.join(config.BASE_DIR, "data", "workflows", "forkjoin-demo-001.json")
    doc = json.loads(_run(capsys, "gen", "--workflow", path))
    assert len(doc["nodes"]) == 4


def test_reruns_are_byte_identical(capsys, tmp_path):
    mapping_path = tmp_path / "sp.json"
    _run(capsys, "--seed", "5", "--out", str(mapping_path), "map", "--algo", "sp_firstfit", "--graph", FIG2)
    commands = [
        ("--seed", "5", "map", "--algo", "sp_firstfit", "--graph", FIG2),
        ("--seed", "5", "map", "--algo", "nsga2", "--graph", FIG2, "--generations", "5", "--population", "8"),
        ("--seed", "5", "decompose", "--graph", FIG2),
        ("--seed", "5", "decompose", "--graph", FIG2, "--dot"),
        ("--seed", "5", "eval", "--graph", FIG2, "--mapping", str(mapping_path)),
        ("--seed", "5", "--format", "csv", "eval", "--graph", FIG2, "--mapping", str(mapping_path)),
        ("--seed", "5", "compare", "--graph", FIG2, "--mappings", str(mapping_path)),
    ]
    for argv in commands:
        assert _run(capsys, *argv) == _run(capsys, *argv)


def test_decompose_fig1(capsys):
    doc = json.loads(_run(capsys, "decompose", "--graph", FIG1))
    assert len(doc["trees"]) == 1
    assert doc["cuts"] == []


def test_decompose_dot(capsys):
    out = _run(capsys, "decompose", "--graph", FIG2, "--cut-rule", "smallest-outsize-first", "--dot")
    assert out.startswith("digraph forest {")


def test_map_emits_mapping_json(capsys):
    doc = json.loads(_run(capsys, "map", "--algo", "sp_firstfit", "--graph", FIG1, "--platform",
                          config.DEFAULT_PLATFORM_FILE))
    assert doc["algorithm"] == "sp_firstfit"
    assert [entry["task"] for entry in doc["assignment"]] == list(range(6))
    assert doc["makespan"] > 0


def test_map_eval_and_compare_agree(capsys, tmp_path):
    mapping_path = tmp_path / "heft.json"
    _run(capsys, "--out", str(mapping_path), "map", "--algo", "heft", "--graph", FIG2)
    mapped = json.loads(mapping_path.read_text())

    timeline = json.loads(_run(capsys, "eval", "--graph", FIG2, "--mapping", str(mapping_path)))
    assert timeline["makespan"] == pytest.approx(mapped["makespan"])
    assert len(timeline["timeline"]) == 6

    csv = _run(capsys, "--format", "csv", "eval", "--graph", FIG2, "--mapping", str(mapping_path))
    assert csv.splitlines()[0] == "task,unit,start,finish"

    table = _run(capsys, "compare", "--graph", FIG2, "--mappings", str(mapping_path), str(mapping_path))
    lines = table.splitlines()
    assert lines[0] == "file,algorithm,makespan_baseline,makespan_mapped,rel_improvement"
    assert len(lines) == 3


def test_bench_quick_spec(capsys, tmp_path):
    spec = os.path.join(config.BASE_DIR, "data", "experiments", "quick.json")
    out = tmp_path / "results.csv"
    summary = tmp_path / "summary.csv"
    _run(capsys, "--out", str(out), "bench", "--spec", spec, "--summary", str(summary))
    lines = out.read_text().splitlines()
    assert lines[0] == "axis,algorithm,seed,makespan_baseline,makespan_mapped,rel_improvement,mapper_ms,eval_calls"
    assert len(lines) == 1 + 2 * 3 * 2
    assert len(summary.read_text().splitlines()) == 1 + 2 * 3


def test_usage_error_exits_with_1(capsys):
    with pytest.raises(SystemExit) as info:
        main(["map", "--graph", FIG1])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["map", "--algo", "annealing", "--graph", FIG1])
    assert info.value.code == 1


def test_data_errors_exit_with_2(capsys, tmp_path):
    assert main(["decompose", "--graph", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nodes": [{"id": 0, "colour": "red"}]}))
    assert main(["map", "--algo", "heft", "--graph", str(bad)]) == 2


def test_mapping_with_an_unknown_unit_exits_with_2(capsys, tmp_path):
    mapping_path = tmp_path / "bad-unit.json"
    mapping_path.write_text(json.dumps({"assignment": [{"task": v, "unit": 9 if v == 3 else 0} for v in range(6)]}))
    assert main(["compare", "--graph", FIG2, "--mappings", str(mapping_path)]) == 2
    assert main(["eval", "--graph", FIG2, "--mapping", str(mapping_path)]) == 2
