"""Tests for the batch driver: commands, exit codes, report shape."""

import json

import pytest

from gverify.cli import main
from gverify.doubleverify import DoubleStructureFunctions
from gverify.kernel import ExprError, KernelError


SOLVABLE = {
    "base": [["t", 0]], "fibers": [["e1", 1], ["e2", 1]],
    "anchor": [["0"], ["0"]],
    "structure": [[["0", "0"], ["0", "-1"]], [["0", "1"], ["0", "0"]]],
}
SOLVABLE_DUAL = {
    "base": [["t", 0]], "fibers": [["f1", 1], ["f2", 1]],
    "anchor": [["0"], ["0"]],
    "structure": [[["0", "0"], ["0", "-1"]], [["0", "1"], ["0", "0"]]],
}

HEISENBERG = [[[0, 0, 0], [0, 0, 1], [0, 0, 0]],
              [[0, 0, -1], [0, 0, 0], [0, 0, 0]],
              [[0, 0, 0], [0, 0, 0], [0, 0, 0]]]

MIXED_DOUBLE = {
    "base": [["x1", 0], ["x2", 0]], "side1": [0], "side2": [0], "core": [0],
    "q1": {"Qia": [["1", "x2"]], "QmuB": [["x1"]]},
    "q2": {"Qaa": [["x1", "2"]], "Qmuj": [["3"]]},
}


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run(capsys, *argv):
    status = main(list(argv))
    out = capsys.readouterr().out
    return status, (json.loads(out) if out else None)


def test_zero_structure_commute_passes(tmp_path, capsys):
    path = write(tmp_path, "zero.json",
                 {"base": [["x", 0]], "side1": 1, "side2": 1, "core": 1})
    status, doc = run(capsys, "check-double", path,
                      "--conditions", "commute")
    assert status == 0
    assert doc["passed"]
    assert [c["label"] for c in doc["checks"]] == ["commute"]
    assert all(not c["residuals"] for c in doc["checks"])
    assert doc["tool"]["name"] == "gverify"
    assert len(doc["correspondence"]) == 9
    assert len(doc["anchor_correspondence"]) == 8


def test_check_double_runs_all_conditions_by_default(tmp_path, capsys):
    path = write(tmp_path, "zero.json",
                 {"base": [["x", 0]], "side1": 1, "side2": 1, "core": 1})
    status, doc = run(capsys, "check-double", path)
    assert status == 0
    assert [c["label"] for c in doc["checks"]] == ["I", "II", "III",
                                                   "commute"]
    assert doc["configuration"]["conditions"] == ["I", "II", "III",
                                                  "commute"]


def test_cotangent_double_pass_and_fail(tmp_path, capsys):
    good = write(tmp_path, "good.json",
                 {"QE": SOLVABLE, "QEstar": SOLVABLE_DUAL})
    status, doc = run(capsys, "cotangent-double", good)
    assert status == 0
    assert doc["diagnostics"]["h_bracket_zero"]
    bad = write(tmp_path, "bad.json", {
        "QE": {"base": [], "fibers": [["e1", 1], ["e2", 1], ["e3", 1]],
               "anchor": [[], [], []], "structure": HEISENBERG},
        "QEstar": {"base": [], "fibers": [["f1", 1], ["f2", 1], ["f3", 1]],
                   "anchor": [[], [], []], "structure": HEISENBERG}})
    status, doc = run(capsys, "cotangent-double", bad)
    assert status == 1
    failing = {c["label"] for c in doc["checks"] if not c["passed"]}
    assert {"III", "commute"} <= failing
    assert not doc["diagnostics"]["fields_commute"]


def test_neighbors_graph(tmp_path, capsys):
    status, doc = run(capsys, "neighbors")
    assert status == 0
    assert doc["node_count"] == 12
    assert len(doc["nodes"]) == 12
    assert all(len(n["edges"]) == 4 for n in doc["nodes"])
    assert len(doc["structure_bearing"]) == 5


def test_reports_are_byte_identical(tmp_path, capsys):
    path = write(tmp_path, "mixed.json", MIXED_DOUBLE)
    out1 = tmp_path / "r1.json"
    out2 = tmp_path / "r2.json"
    s1 = main(["equivalence", path, "--report", str(out1)])
    s2 = main(["equivalence", path, "--report", str(out2)])
    assert s1 == s2 == 1
    assert capsys.readouterr().out == ""
    assert out1.read_bytes() == out2.read_bytes()


def test_residual_polynomials_reparse_canonically(tmp_path, capsys):
    path = write(tmp_path, "mixed.json", MIXED_DOUBLE)
    status, doc = run(capsys, "check-double", path)
    assert status == 1
    sf = DoubleStructureFunctions(
        MIXED_DOUBLE["base"], MIXED_DOUBLE["side1"], MIXED_DOUBLE["side2"],
        MIXED_DOUBLE["core"], MIXED_DOUBLE["q1"], MIXED_DOUBLE["q2"])
    t2, t1 = sf.tangent_charts()
    charts = [sf.base_chart, sf.double_chart, sf.rev1_chart, sf.rev2_chart,
              sf.side1_chart, sf.side2_chart, sf.schouten_chart, t1, t2]
    texts = [r["poly"] for c in doc["checks"] for r in c["residuals"]]
    assert texts
    for text in texts:
        reparsed = None
        for chart in charts:
            try:
                reparsed = chart.poly(text).text()
            except KernelError:
                continue
            break
        assert reparsed == text


def test_wrong_rank_block_is_a_shape_error(tmp_path, capsys):
    path = write(tmp_path, "wrong.json", {
        "base": [["x", 0]], "side1": 2, "side2": 1, "core": 1,
        "q1": {"Qia": [["x"]]}})
    status, doc = run(capsys, "check-double", path)
    assert status == 3
    assert doc["error"]["kind"] == "shape"
    assert doc["error"]["block"] == "Qia"


def test_expression_parse_error_carries_position(tmp_path, capsys):
    path = write(tmp_path, "bad.json", {
        "base": [["x", 0]], "side1": 1, "side2": 1, "core": 1,
        "q1": {"Qia": [["x +"]]}})
    status, doc = run(capsys, "check-double", path)
    assert status == 2
    assert doc["error"]["kind"] == "parse"
    assert doc["error"]["line"] == 1 and doc["error"]["column"] == 4


def test_json_parse_error_carries_position(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"base": [,]}')
    status, doc = run(capsys, "validate", str(path))
    assert status == 2
    assert doc["error"]["kind"] == "parse"
    assert doc["error"]["line"] == 1


def test_odd_power_entry_is_a_normalization_error(tmp_path, capsys):
    path = write(tmp_path, "odd.json", {
        "base": [["th", 1], ["x", 0]], "side1": 1, "side2": 1, "core": 1,
        "q1": {"Qia": [["th^2", "0"]]}})
    status, doc = run(capsys, "validate", path)
    assert status == 2
    assert doc["error"]["kind"] == "normalization"
    assert "th" in doc["error"]["message"]


def test_validate_lists_blocks_with_shapes(tmp_path, capsys):
    path = write(tmp_path, "mixed.json", MIXED_DOUBLE)
    status, doc = run(capsys, "validate", path)
    assert status == 0
    assert doc["validated_sections"] == ["double"]
    byname = {b["key"]: b for b in doc["blocks"]}
    assert len(byname) == 12
    assert byname["Qia"]["shape"] == [1, 2]
    assert byname["Qia"]["axes"] == ["side1", "base"]
    assert byname["Qia"]["nonzero_entries"] == 2


def test_nfold_command(tmp_path, capsys):
    doc = {"nfold": {"n": 2,
                     "coordinates": [["x", 0, [0, 0]], ["a", 1, [1, 0]],
                                     ["b", 1, [0, 1]]],
                     "fields": [{"x": "a"}, {"x": "b"}]}}
    path = write(tmp_path, "nf.json", doc)
    status, report = run(capsys, "nfold-check", path)
    assert status == 0
    doc["nfold"]["fields"][1] = {"x": "b * x"}
    path = write(tmp_path, "nf2.json", doc)
    status, report = run(capsys, "nfold-check", path)
    assert status == 1
    assert any(r["family"] == "commute"
               for r in report["checks"][0]["residuals"])


def test_check_antialgebroid(tmp_path, capsys):
    good = write(tmp_path, "alg.json", {"antialgebroid": {
        "base": [["x", 0]], "fibers": [["xi1", 1], ["xi2", 1]],
        "anchor": [["1"], ["x"]],
        "structure": [[[0, 0], [1, 0]], [[-1, 0], [0, 0]]]}})
    status, doc = run(capsys, "check-antialgebroid", good)
    assert status == 0
    # [e1,e2] = e1, [e2,e3] = e2, [e3,e1] = e3 violates Jacobi
    st = [[[0] * 3 for _ in range(3)] for _ in range(3)]
    for i, j, k in ((0, 1, 0), (1, 2, 1), (2, 0, 2)):
        st[i][j][k], st[j][i][k] = 1, -1
    bad = write(tmp_path, "badalg.json", {"antialgebroid": {
        "base": [], "fibers": [["e1", 1], ["e2", 1], ["e3", 1]],
        "anchor": None, "structure": st}})
    status, doc = run(capsys, "check-antialgebroid", bad)
    assert status == 1
    assert any(r["family"] == "square"
               for r in doc["checks"][0]["residuals"])


def test_missing_section_is_a_shape_error(tmp_path, capsys):
    path = write(tmp_path, "empty.json", {})
    status, doc = run(capsys, "cotangent-double", path)
    assert status == 3
    assert "QE" in doc["error"]["message"]


def test_environment_fallbacks(tmp_path, capsys, monkeypatch):
    good = write(tmp_path, "good.json",
                 {"QE": SOLVABLE, "QEstar": SOLVABLE_DUAL})
    monkeypatch.setenv("GV_SAMPLES", "3")
    monkeypatch.setenv("GV_SEED", "5")
    status, doc = run(capsys, "cotangent-double", good)
    assert status == 0
    assert doc["configuration"]["samples"] == 3
    assert doc["configuration"]["seed"] == 5
    assert doc["diagnostics"]["hamiltonian_morphism_samples"] == 3
    status, doc = run(capsys, "cotangent-double", good, "--samples", "2")
    assert doc["configuration"]["samples"] == 2  # flag beats environment
    assert doc["diagnostics"]["hamiltonian_morphism_samples"] == 2


def test_report_flag_writes_file_only(tmp_path, capsys):
    path = write(tmp_path, "zero.json",
                 {"base": [["x", 0]], "side1": 1, "side2": 1, "core": 1})
    out = tmp_path / "report.json"
    status = main(["check-double", path, "--report", str(out)])
    assert status == 0
    assert capsys.readouterr().out == ""
    assert json.loads(out.read_text())["passed"]


def test_missing_input_file(tmp_path, capsys):
    status, doc = run(capsys, "validate", str(tmp_path / "absent.json"))
    assert status == 2
    assert doc["error"]["kind"] == "parse"
