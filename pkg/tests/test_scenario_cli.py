"""Scenario parsing, report formatting and the command-line pipeline."""

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from jetfrac.cli import main, run_scenario
from jetfrac.report import (
    csv_body,
    figure_candidate_energies,
    figure_loglog_decay,
    format_value,
    sha256_of,
    write_csv,
    write_json,
)
from jetfrac.scenario import (
    ScenarioError,
    build_displacement,
    parse_scenario,
    parse_scenario_text,
)

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"

MINIMAL_EVALUATE = """
name: toy
experiment: evaluate
grid:
  outer: [[-1.0, 1.0], [-1.0, 1.0]]
  inner: [[-0.5, 0.5], [-0.5, 0.5]]
  cell_size: 0.25
model:
  eps: 0.1
  kappa: 1.0
fields:
  - name: two_piece_stretch
    delta: 0.4
  - name: identity
"""


# ---------------------------------------------------------------------------
# report cells and files
# ---------------------------------------------------------------------------


def test_format_value_rules():
    assert format_value(None) == "INF"
    assert format_value(float("inf")) == "INF"
    assert format_value(float("-inf")) == "-INF"
    assert format_value(True) == "true"
    assert format_value(False) == "false"
    assert format_value(3) == "3"
    assert format_value(np.int64(7)) == "7"
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(2.0) == "2"
    assert format_value("label") == "label"
    with pytest.raises(ValueError, match="NaN"):
        format_value(float("nan"))


def test_write_csv_roundtrip(tmp_path):
    path = write_csv(tmp_path / "t.csv", ["a", "b"], [[1, None], [0.5, True]])
    text = path.read_text()
    assert text == "a,b\n1,INF\n0.5,true\n"
    assert csv_body(path) == "1,INF\n0.5,true\n"
    assert not list(tmp_path.glob("*.tmp"))  # atomic write left no debris


def test_write_json_sorted_keys(tmp_path):
    path = write_json(tmp_path / "t.json", {"zeta": 1, "alpha": {"b": 2, "a": 3}})
    text = path.read_text()
    assert text.index('"alpha"') < text.index('"zeta"')
    assert json.loads(text) == {"zeta": 1, "alpha": {"b": 2, "a": 3}}


def test_sha256_of_matches_hashlib(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"abc")
    assert sha256_of(p) == hashlib.sha256(b"abc").hexdigest()


def test_figures_render_to_files(tmp_path):
    eps = [0.1, 0.05, 0.025]
    p1 = figure_loglog_decay(tmp_path / "d.png", eps, {"gap": [1.0, 0.5, 0.25]}, "t")
    assert p1.stat().st_size > 0
    # an all-zero series must not crash or warn about empty legends
    p2 = figure_loglog_decay(tmp_path / "z.png", eps, {"gap": [0.0, 0.0, 0.0]}, "t")
    assert p2.stat().st_size > 0
    p3 = figure_candidate_energies(tmp_path / "c.png", [1.0, float("inf"), 0.5], 2, "t")
    assert p3.stat().st_size > 0


# ---------------------------------------------------------------------------
# scenario parsing
# ---------------------------------------------------------------------------


def test_parse_minimal_evaluate():
    sc = parse_scenario_text(MINIMAL_EVALUATE, source="toy.yaml")
    assert sc.name == "toy"
    assert sc.experiment == "evaluate"
    assert sc.seed == 0
    assert sc.grid.cell_size == 0.25
    assert sc.model.eps == 0.1
    assert len(sc.field_specs) == 2
    assert sc.digest == hashlib.sha256(MINIMAL_EVALUATE.encode()).hexdigest()
    assert sc.sweep_eps() == (0.1,)


def test_parse_collects_every_problem():
    bad = """
name: broken
experiment: polish
seed: -3
surprise: 1
grid:
  outer: [[0.0, 1.0], [0.0, 1.0]]
  inner: [[0.25, 0.75], [0.25, 0.75]]
  cell_size: 0.125
model:
  eps: 0.1
  kappa: 1.0
"""
    with pytest.raises(ScenarioError) as err:
        parse_scenario_text(bad)
    msgs = "\n".join(err.value.problems)
    assert "unknown top-level keys: surprise" in msgs
    assert "experiment must be one of" in msgs
    assert "seed must be" in msgs
    # the collector keeps going after the first problem
    assert len(err.value.problems) >= 3


def test_parse_checks_experiment_requirements():
    text = MINIMAL_EVALUATE.replace("experiment: evaluate", "experiment: minimize")
    with pytest.raises(ScenarioError, match="requires a crack family"):
        parse_scenario_text(text)


def test_parse_rejects_invalid_yaml_and_non_mapping():
    with pytest.raises(ScenarioError, match="not valid YAML"):
        parse_scenario_text("a: [unclosed")
    with pytest.raises(ScenarioError, match="mapping"):
        parse_scenario_text("- just\n- a\n- list\n")


def test_parse_missing_file():
    with pytest.raises(ScenarioError, match="not found"):
        parse_scenario("/nonexistent/path.yaml")


def test_partition_two_piece_requires_cut():
    text = MINIMAL_EVALUATE + "partition:\n  kind: two_piece\n"
    with pytest.raises(ScenarioError, match="cut"):
        parse_scenario_text(text)
    ok = MINIMAL_EVALUATE + "partition:\n  kind: two_piece\n  cut: 0.0\n"
    sc = parse_scenario_text(ok)
    assert sc.partition_spec == {"kind": "two_piece", "cut": 0.0}


def test_shipped_scenarios_all_parse():
    paths = sorted(SCENARIOS.glob("*.yaml"))
    assert len(paths) >= 6
    for p in paths:
        sc = parse_scenario(p)
        assert sc.name


def test_crack_candidates_become_facet_sets():
    sc = parse_scenario(SCENARIOS / "stretch_skew_minimize.yaml")
    fam = sc.crack_family
    assert frozenset() in fam.candidates
    assert len(fam) == 17
    fam.validate(sc.grid)
    # every non-empty candidate is a set of axis-0 facets
    for cand in fam.candidates:
        assert all(f[0] == 0 for f in cand)


def test_build_displacement_dispatch():
    sc = parse_scenario(SCENARIOS / "boxed_step_recovery.yaml")
    u = build_displacement(sc)
    assert u.jumps  # the box boundary is declared
    sc2 = parse_scenario(SCENARIOS / "quadratic_recovery.yaml")
    u2 = build_displacement(sc2)
    assert u2.jumps == frozenset()
    broken = parse_scenario_text(
        MINIMAL_EVALUATE.replace("experiment: evaluate", "experiment: evaluate")
    )
    with pytest.raises(ScenarioError):
        build_displacement(broken)  # no displacement spec present


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def test_cli_validate_ok(capsys):
    code = main(["validate", "--scenario", str(SCENARIOS / "two_piece_stretch.yaml")])
    assert code == 0
    assert "OK" in capsys.readouterr().out


def test_cli_parse_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("experiment: nope\n")
    assert main(["validate", "--scenario", str(bad)]) == 2
    assert "scenario error" in capsys.readouterr().err
    assert main(["validate", "--scenario", str(tmp_path / "missing.yaml")]) == 2


def test_cli_verb_must_match_experiment(tmp_path, capsys):
    sc = SCENARIOS / "two_piece_stretch.yaml"
    code = main(["minimize", "--scenario", str(sc), "--out", str(tmp_path)])
    assert code == 2
    assert "declares experiment" in capsys.readouterr().err


def test_cli_rejects_bad_thread_count(tmp_path, capsys):
    sc = SCENARIOS / "two_piece_stretch.yaml"
    code = main(
        ["evaluate", "--scenario", str(sc), "--out", str(tmp_path), "--threads", "0"]
    )
    assert code == 2


def test_cli_evaluate_produces_outputs(tmp_path):
    sc = SCENARIOS / "two_piece_stretch.yaml"
    out = tmp_path / "run"
    code = main(["evaluate", "--scenario", str(sc), "--out", str(out)])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["experiment"] == "evaluate"
    assert manifest["flagged"] is False
    assert len(manifest["outputs"]) == 3
    for entry in manifest["outputs"]:
        p = out / entry["path"]
        assert p.is_file()
        assert sha256_of(p) == entry["sha256"]
    suffixes = {Path(e["path"]).suffix for e in manifest["outputs"]}
    assert suffixes == {".csv", ".json", ".png"}
    # the strict energy of the zero-offset field reports the INF sentinel
    csv_text = next(out.glob("*_evaluate.csv")).read_text()
    assert "INF" in csv_text


def test_cli_runs_are_deterministic(tmp_path):
    sc = SCENARIOS / "two_piece_stretch.yaml"
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / tag
        assert main(["evaluate", "--scenario", str(sc), "--out", str(out)]) == 0
        outs.append(out)
    csv_a = next(outs[0].glob("*.csv")).read_bytes()
    csv_b = next(outs[1].glob("*.csv")).read_bytes()
    assert csv_a == csv_b
    man_a = json.loads((outs[0] / "manifest.json").read_text())
    man_b = json.loads((outs[1] / "manifest.json").read_text())
    hashes_a = {e["path"]: e["sha256"] for e in man_a["outputs"]}
    hashes_b = {e["path"]: e["sha256"] for e in man_b["outputs"]}
    assert hashes_a == hashes_b


def test_run_scenario_seed_override(tmp_path):
    sc = parse_scenario(SCENARIOS / "two_piece_stretch.yaml")
    manifest, code = run_scenario(sc, tmp_path, seed=1234)
    assert code == 0
    assert manifest["seed"] == 1234
    assert manifest["scenario_digest"] == sc.digest
    assert manifest["wall_clock_s"] >= 0.0
