"""Batch driver: read JSON structure documents, run selected checks,
and emit deterministic machine-readable reports.

Commands
--------
check-antialgebroid   single-bundle consistency checks
check-double          Conditions I/II/III/commutativity on tensor blocks
equivalence           all four checks plus the implication table
neighbors             the twelve-node reversion/dualization graph
cotangent-double      build a double from a dual pair and verify it
nfold-check           pairwise commutation for n directions
validate              schema and shape validation without running checks

Exit status: 0 all selected checks pass, 1 check failure, 2 parse
error, 3 shape error.  The JSON report is written to ``--report`` or
standard output; identical input and configuration produce
byte-identical reports.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .algebroid import AlgebroidError, Antialgebroid
from .bundles import DEFAULT_TRUNCATION, BundleError, neighbor_graph
from .doubleverify import (
    ANCHOR_CORRESPONDENCE,
    BLOCK_AXES,
    BialgebroidData,
    CORRESPONDENCE,
    DoubleError,
    DoubleStructureFunctions,
    PRINT_NOTES,
    Q1_KEYS,
    Q2_KEYS,
    ShapeError,
    commutativity,
    condition_I,
    condition_II,
    condition_III,
    cotangent_double,
    equivalence_report,
    nfold_check,
)
from .fields import Derivation
from .kernel import Chart, ExprError, KernelError, NormalizationError

_CONVENTION = (
    "tensor blocks are keyed by index pattern with lower indices "
    "before the upper one, e.g. Q[ai|B] has lower indices a, i and "
    "upper index B; residual polynomials are strings in the kernel "
    "expression grammar and re-parse to their canonical form")

_CONDITIONS = ("I", "II", "III", "commute")

_CHECKS = {
    "I": condition_I,
    "II": condition_II,
    "III": condition_III,
    "commute": commutativity,
}


class InputError(KernelError):
    """A document problem that is neither a parse nor a shape error."""


# -- document loading ---------------------------------------------------


def _load(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise ExprError("cannot read input: %s" % exc.strerror, 0, 0)
    except json.JSONDecodeError as exc:
        raise ExprError("invalid JSON: %s" % exc.msg, exc.lineno, exc.colno)
    if not isinstance(doc, dict):
        raise ExprError("the document root must be a JSON object", 1, 1)
    return doc


def _section(doc: dict, key: str) -> dict:
    node = doc.get(key)
    if node is None:
        raise InputError("the document lacks the %r section required "
                         "by this command" % key)
    if not isinstance(node, dict):
        raise InputError("section %r must be a JSON object" % key)
    return node


def _strict_scan(chart: Chart, node) -> None:
    # entries that are zero only because an odd generator was raised to
    # a power are almost certainly input mistakes; reject them here
    if isinstance(node, (list, tuple)):
        for child in node:
            _strict_scan(chart, child)
    elif isinstance(node, dict):
        for child in node.values():
            _strict_scan(chart, child)
    elif isinstance(node, str):
        chart.poly(node, strict_odd_powers=True)


def _build_sf(doc: dict, degree: int) -> DoubleStructureFunctions:
    for key in ("base", "side1", "side2", "core"):
        if key not in doc:
            raise InputError("the document lacks the %r field required "
                             "for double-structure commands" % key)
    sf = DoubleStructureFunctions(
        doc["base"], doc["side1"], doc["side2"], doc["core"],
        doc.get("q1"), doc.get("q2"),
        max_degree=doc.get("max_degree", degree))
    _strict_scan(sf.base_chart, doc.get("q1"))
    _strict_scan(sf.base_chart, doc.get("q2"))
    return sf


def _build_algebroid(node: dict, where: str) -> Antialgebroid:
    for key in ("base", "fibers"):
        if key not in node:
            raise InputError("section %r lacks the %r field" % (where, key))
    alg = Antialgebroid(node["base"], node["fibers"], node.get("anchor"),
                        node.get("structure"))
    _strict_scan(alg.chart, node.get("anchor"))
    _strict_scan(alg.chart, node.get("structure"))
    return alg


def _build_nfold(node: dict):
    try:
        n = int(node["n"])
        coords = node["coordinates"]
        raw_fields = node["fields"]
    except KeyError as exc:
        raise InputError("the nfold section lacks the %r field"
                         % exc.args[0])
    chart = Chart("nfold", weight_len=n)
    for entry in coords:
        name, parity, weight = entry
        chart.add(str(name), int(parity), tuple(int(w) for w in weight))
    fields = []
    for coeffs in raw_fields:
        fields.append(Derivation(chart, {
            chart.var(str(name)): chart.poly(str(text))
            for name, text in sorted(coeffs.items())}))
    return n, fields


# -- report assembly ----------------------------------------------------


def _document(command: str, config: dict, body: dict) -> dict:
    doc = {
        "tool": {"name": "gverify", "version": __version__},
        "command": command,
        "configuration": config,
        "convention": _CONVENTION,
    }
    doc.update(body)
    return doc


def _emit(doc: dict, report_path: str | None) -> None:
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if report_path:
        with open(report_path, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _correspondence_body() -> dict:
    return {
        "correspondence": [dict(e) for e in CORRESPONDENCE],
        "anchor_correspondence": [dict(e) for e in ANCHOR_CORRESPONDENCE],
        "print_notes": list(PRINT_NOTES),
    }


def _derivation_residuals(family: str, prefix: tuple, field) -> list[dict]:
    out = []
    for v in field.chart.variables:
        c = field.coefficient(v)
        if not c.is_zero:
            out.append({"family": family,
                        "indices": list(prefix) + [v.name],
                        "poly": c.text()})
    return out


# -- commands -----------------------------------------------------------


def _cmd_check_antialgebroid(doc, args, config):
    alg = _build_algebroid(_section(doc, "antialgebroid"), "antialgebroid")
    residuals = _derivation_residuals("square", (), alg.residual())
    for (i, j, k), comps in sorted(alg.jacobi_residuals().items()):
        for pos, p in enumerate(comps):
            if not p.is_zero:
                residuals.append({"family": "frame-jacobi",
                                  "indices": [i + 1, j + 1, k + 1, pos + 1],
                                  "poly": p.text()})
    for (i, j), fld in sorted(alg.anchor_compat_residuals().items()):
        residuals.extend(
            _derivation_residuals("anchor-morphism", (i + 1, j + 1), fld))
    passed = not residuals
    body = {"checks": [{"label": "antialgebroid", "passed": passed,
                        "notes": [], "residuals": residuals}],
            "passed": passed}
    return (0 if passed else 1), _document("check-antialgebroid", config,
                                           body)


def _cmd_check_double(doc, args, config):
    sf = _build_sf(doc, args.degree)
    selected = args.conditions or list(_CONDITIONS)
    config["conditions"] = list(selected)
    checks = [_CHECKS[name](sf).to_dict() for name in selected]
    passed = all(c["passed"] for c in checks)
    body = {"checks": checks, "passed": passed}
    body.update(_correspondence_body())
    return (0 if passed else 1), _document("check-double", config, body)


def _cmd_equivalence(doc, args, config):
    sf = _build_sf(doc, args.degree)
    summary = equivalence_report(sf)
    data = summary.to_dict()
    passed = all(r["passed"] for r in data["reports"].values())
    body = {"checks": [data["reports"][k] for k in sorted(data["reports"])],
            "implications": data["implications"],
            "passed": passed}
    body.update(_correspondence_body())
    return (0 if passed else 1), _document("equivalence", config, body)


def _cmd_neighbors(doc, args, config):
    graph = neighbor_graph()
    nodes = []
    for label in sorted(graph):
        node = graph[label]
        nodes.append({
            "label": node.label,
            "word": list(node.word),
            "structure_bearing": node.structure_bearing,
            "edges": {op: other for op, other in sorted(node.edges.items())},
        })
    body = {
        "nodes": nodes,
        "node_count": len(nodes),
        "structure_bearing": sorted(
            n["label"] for n in nodes if n["structure_bearing"]),
        "passed": True,
    }
    return 0, _document("neighbors", config, body)


def _cmd_cotangent_double(doc, args, config):
    data = BialgebroidData(
        _build_algebroid(_section(doc, "QE"), "QE"),
        _build_algebroid(_section(doc, "QEstar"), "QEstar"))
    cd = cotangent_double(data, samples=args.samples, seed=args.seed)
    checks = [_CHECKS[name](cd.sf).to_dict() for name in _CONDITIONS]
    passed = all(c["passed"] for c in checks)
    body = {"checks": checks, "passed": passed,
            "diagnostics": cd.diagnostics}
    body.update(_correspondence_body())
    return (0 if passed else 1), _document("cotangent-double", config, body)


def _cmd_nfold_check(doc, args, config):
    n, fields = _build_nfold(_section(doc, "nfold"))
    report = nfold_check(n, fields).to_dict()
    body = {"checks": [report], "passed": report["passed"]}
    return (0 if report["passed"] else 1), _document("nfold-check", config,
                                                     body)


def _cmd_validate(doc, args, config):
    blocks = []
    sections = []
    if "base" in doc:
        sf = _build_sf(doc, args.degree)
        sections.append("double")
        for tensor, keys in (("q1", Q1_KEYS), ("q2", Q2_KEYS)):
            for key in keys:
                axes = BLOCK_AXES[key]
                shape = []
                for kind in axes:
                    shape.append({"base": sf.nx, "side1": sf.nu,
                                  "side2": sf.nw, "core": sf.nz}[kind])
                node = sf.block(key)
                stack, nonzero = [node], 0
                while stack:
                    item = stack.pop()
                    if isinstance(item, list):
                        stack.extend(item)
                    elif not item.is_zero:
                        nonzero += 1
                blocks.append({"tensor": tensor, "key": key,
                               "axes": list(axes), "shape": shape,
                               "nonzero_entries": nonzero})
    for key in ("antialgebroid", "QE", "QEstar"):
        if key in doc:
            _build_algebroid(_section(doc, key), key)
            sections.append(key)
    if "nfold" in doc:
        _build_nfold(_section(doc, "nfold"))
        sections.append("nfold")
    if not sections:
        raise InputError("the document contains no recognized sections")
    body = {"validated_sections": sorted(sections), "blocks": blocks,
            "diagnostics": [], "passed": True}
    return 0, _document("validate", config, body)


_COMMANDS = {
    "check-antialgebroid": _cmd_check_antialgebroid,
    "check-double": _cmd_check_double,
    "equivalence": _cmd_equivalence,
    "neighbors": _cmd_neighbors,
    "cotangent-double": _cmd_cotangent_double,
    "nfold-check": _cmd_nfold_check,
    "validate": _cmd_validate,
}


# -- argument handling --------------------------------------------------


def _env_int(name: str, fallback: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return fallback
    try:
        return int(raw)
    except ValueError:
        raise InputError("environment variable %s must be an integer, "
                         "got %r" % (name, raw))


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gverify",
        description="exact checks for graded bracket and bundle structures")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help="run the %s command" % name)
        if name == "neighbors":
            p.add_argument("input", nargs="?", default=None,
                           help="ignored; the graph needs no input")
        else:
            p.add_argument("input", help="path to the JSON input document")
        p.add_argument("--report", default=None, metavar="PATH",
                       help="write the JSON report here instead of stdout")
        p.add_argument("--degree", type=int, default=None,
                       help="truncation degree (default GV_DEGREE or %d)"
                       % DEFAULT_TRUNCATION)
        p.add_argument("--samples", type=int, default=None,
                       help="random sample count for property commands "
                       "(default GV_SAMPLES or 0)")
        p.add_argument("--seed", type=int, default=None,
                       help="random seed (default GV_SEED or 0)")
        if name == "check-double":
            p.add_argument("--conditions", nargs="+", default=None,
                           choices=list(_CONDITIONS),
                           help="subset of checks to run (default: all)")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.degree is None:
        args.degree = _env_int("GV_DEGREE", DEFAULT_TRUNCATION)
    if args.samples is None:
        args.samples = _env_int("GV_SAMPLES", 0)
    if args.seed is None:
        args.seed = _env_int("GV_SEED", 0)
    config = {"degree": args.degree, "samples": args.samples,
              "seed": args.seed, "input": args.input}
    try:
        doc = _load(args.input) if args.input else {}
        status, report = _COMMANDS[args.command](doc, args, config)
    except ExprError as exc:
        _emit(_document(args.command, config, {"error": {
            "kind": "parse", "message": str(exc),
            "line": exc.line, "column": exc.column}}), args.report)
        print("gverify: parse error: %s" % exc, file=sys.stderr)
        return 2
    except NormalizationError as exc:
        _emit(_document(args.command, config, {"error": {
            "kind": "normalization", "message": str(exc)}}), args.report)
        print("gverify: normalization error: %s" % exc, file=sys.stderr)
        return 2
    except ShapeError as exc:
        _emit(_document(args.command, config, {"error": {
            "kind": "shape", "message": str(exc),
            "block": exc.block}}), args.report)
        print("gverify: shape error: %s" % exc, file=sys.stderr)
        return 3
    except (AlgebroidError, BundleError, DoubleError, InputError,
            KernelError) as exc:
        _emit(_document(args.command, config, {"error": {
            "kind": "shape", "message": str(exc)}}), args.report)
        print("gverify: %s" % exc, file=sys.stderr)
        return 3
    _emit(report, args.report)
    return status


if __name__ == "__main__":
    sys.exit(main())
