"""Commuting pairs of weight-graded odd fields on doubly fibered charts.

The centerpiece of the package.  ``DoubleStructureFunctions`` holds the
coefficient tensors of two odd vector fields of weights (1,0) and (0,1)
on a chart with two fiber directions and a core.  From it we build the
fields themselves, their partial parity reversions and restrictions, and
run four independent checks:

* ``condition_I`` -- each reverted field is fiberwise linear over its own
  side and tangent to the zero section, restricting to the side field;
* ``condition_II`` -- each reverted field is related to the tangent lift
  of the opposite side field under the anchor map;
* ``condition_III`` -- the second field acts as a derivation of an odd
  bracket carried by the core-dualized chart, squares to zero there, and
  projects onto the second side field;
* ``commutativity`` -- the two fields supercommute and each squares to
  zero on the full double chart.

In the all-even case the residuals of these checks organize into the
classical equation families ``anchor1``..``anchor6`` and
``bialg1``..``bialg9``; the module evaluates reference forms of those
families and records a frozen signed correspondence between engine
residual classes and the reference forms (``CORRESPONDENCE``), flagging
reference forms that do not match the engine (``PRINT_NOTES``).

``cotangent_double`` realizes a pair of algebroids in duality as such a
commuting pair on a cotangent chart, and ``nfold_check`` generalizes the
commutation check to n fields on an n-fold graded chart.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .algebroid import AlgebroidError, Antialgebroid
from .bundles import DEFAULT_TRUNCATION
from .fields import BracketTable, Derivation, commutator, related
from .kernel import (
    EVEN,
    ODD,
    Chart,
    KernelError,
    ParityError,
    Poly,
    Variable,
    WeightError,
)

__all__ = [
    "DoubleError",
    "ShapeError",
    "EvenCaseError",
    "Q1_KEYS",
    "Q2_KEYS",
    "BLOCK_AXES",
    "SYMMETRIC_BLOCKS",
    "DoubleStructureFunctions",
    "FieldSet",
    "build_fields",
    "Residual",
    "ConditionReport",
    "weight_components",
    "condition_I",
    "condition_II",
    "condition_III",
    "commutativity",
    "equivalence_report",
    "EquivalenceSummary",
    "schouten_table",
    "dual_field",
    "commutator_classes",
    "leibniz_classes",
    "anchor_classes",
    "printed_anchor_families",
    "printed_bialg_families",
    "PRINT_NOTES",
    "CORRESPONDENCE",
    "ANCHOR_CORRESPONDENCE",
    "BialgebroidData",
    "CotangentDouble",
    "cotangent_double",
    "extract_structure_functions",
    "nfold_check",
    "random_poly",
    "random_field",
    "random_structure",
]


class DoubleError(KernelError):
    """Structure-function data violates a semantic rule."""


class ShapeError(DoubleError):
    """A tensor block has the wrong nesting shape."""

    def __init__(self, message: str, block: str | None = None):
        super().__init__(message)
        self.block = block


class EvenCaseError(DoubleError):
    """An all-even-only operation was asked of super data."""


# Tensor blocks of the weight-(1,0) field, in storage order: lower
# indices left to right as displayed, then the upper index last.
Q1_KEYS = ("Qia", "Qjik", "QaiB", "QmuB", "QajiL", "QmuiL")
# Mirror blocks of the weight-(0,1) field.
Q2_KEYS = ("Qaa", "Qiaj", "Qmuj", "QbaG", "QibaL", "QmuaL")

# Axis kinds per block; "side1"/"side2"/"core"/"base" pick the rank.
BLOCK_AXES = {
    "Qia": ("side1", "base"),
    "Qjik": ("side1", "side1", "side1"),
    "QaiB": ("side2", "side1", "side2"),
    "QmuB": ("core", "side2"),
    "QajiL": ("side2", "side1", "side1", "core"),
    "QmuiL": ("core", "side1", "core"),
    "Qaa": ("side2", "base"),
    "Qiaj": ("side1", "side2", "side1"),
    "Qmuj": ("core", "side1"),
    "QbaG": ("side2", "side2", "side2"),
    "QibaL": ("side1", "side2", "side2", "core"),
    "QmuaL": ("core", "side2", "core"),
}

# Blocks with a graded-symmetric pair of lower indices (axis positions).
SYMMETRIC_BLOCKS = {
    "Qjik": (0, 1),
    "QbaG": (0, 1),
    "QajiL": (1, 2),
    "QibaL": (1, 2),
}

_HALF = Fraction(1, 2)


def _sym_sign(p1: int, p2: int) -> int:
    # Exchange sign for the shifted frame pair: -1 exactly when both
    # unshifted parities are even (both shifted coordinates odd).
    return -1 if (p1 % 2 == 0 and p2 % 2 == 0) else 1


def _on(chart: Chart, p: Poly) -> Poly:
    return p if p.chart is chart else p.substitute({}, target=chart)


class DoubleStructureFunctions:
    """Coefficient tensors of a candidate commuting field pair.

    ``base`` is a sequence of ``(name, parity)`` pairs; ``side1``,
    ``side2`` and ``core`` are parity sequences for the unshifted frames
    (an int is accepted as an all-even rank).  ``q1``/``q2`` map block
    keys from ``Q1_KEYS``/``Q2_KEYS`` to nested lists of entries; an
    entry may be a polynomial, a string in the expression grammar, or a
    number, and must be a function of the base coordinates alone of
    degree at most ``max_degree``.  Missing blocks are zero.
    """

    def __init__(self, base, side1, side2, core, q1=None, q2=None,
                 max_degree: int = DEFAULT_TRUNCATION):
        self.base = tuple((str(n), int(p) % 2) for n, p in base)
        self.side1 = self._parities(side1)
        self.side2 = self._parities(side2)
        self.core = self._parities(core)
        self.max_degree = int(max_degree)
        self._guard_names()

        self.base_chart = Chart("functions", weight_len=2)
        for n, p in self.base:
            self.base_chart.add(n, p, (0, 0))
        self.base_vars = list(self.base_chart.variables)

        self.q1 = self._read_blocks(q1, Q1_KEYS)
        self.q2 = self._read_blocks(q2, Q2_KEYS)
        self._validate_blocks()

        self._groups: dict[str, dict[str, tuple[Variable, ...]]] = {}
        self._build_charts()
        self._tangent = None

    # -- construction helpers -----------------------------------------

    @staticmethod
    def _parities(spec) -> tuple[int, ...]:
        if isinstance(spec, int):
            return (0,) * spec
        return tuple(int(p) % 2 for p in spec)

    @property
    def nx(self) -> int:
        return len(self.base)

    @property
    def nu(self) -> int:
        return len(self.side1)

    @property
    def nw(self) -> int:
        return len(self.side2)

    @property
    def nz(self) -> int:
        return len(self.core)

    @property
    def is_even(self) -> bool:
        return not any(self.base_parities + self.side1 + self.side2 + self.core)

    @property
    def base_parities(self) -> tuple[int, ...]:
        return tuple(p for _, p in self.base)

    def _guard_names(self):
        reserved = set()
        for fmt, count in (
            ("xi%d", self.nu), ("u%d", self.nu), ("xi_%d", self.nu),
            ("xi%dd", self.nu), ("eta%d", self.nw), ("w%d", self.nw),
            ("eta%dd", self.nw), ("z%d", self.nz), ("th%d", self.nz),
            ("z_%d", self.nz), ("xd%d", self.nx),
        ):
            reserved.update(fmt % (k + 1) for k in range(count))
        seen = set()
        for n, _ in self.base:
            if n in reserved:
                raise DoubleError("base coordinate name %r collides with a "
                                  "generated fiber name" % n)
            if n in seen:
                raise DoubleError("duplicate base coordinate name %r" % n)
            seen.add(n)

    def _axis_len(self, kind: str) -> int:
        return {"base": self.nx, "side1": self.nu,
                "side2": self.nw, "core": self.nz}[kind]

    def _read_blocks(self, data, keys):
        data = dict(data) if data else {}
        unknown = sorted(set(data) - set(keys))
        if unknown:
            raise ShapeError("unknown tensor block %r" % unknown[0],
                             block=unknown[0])
        out = {}
        for key in keys:
            shape = tuple(self._axis_len(kind) for kind in BLOCK_AXES[key])
            out[key] = self._walk(data.get(key), shape, key)
        return out

    def _walk(self, node, shape, key):
        if not shape:
            return self._entry(node, key)
        if node is None:
            return [self._walk(None, shape[1:], key) for _ in range(shape[0])]
        if not isinstance(node, (list, tuple)):
            raise ShapeError("block %r: expected a list of length %d"
                             % (key, shape[0]), block=key)
        if len(node) != shape[0]:
            raise ShapeError("block %r: axis has length %d, expected %d"
                             % (key, len(node), shape[0]), block=key)
        return [self._walk(child, shape[1:], key) for child in node]

    def _entry(self, node, key) -> Poly:
        if node is None:
            return self.base_chart.zero()
        if isinstance(node, Poly):
            return _on(self.base_chart, node)
        if isinstance(node, str):
            return self.base_chart.poly(node)
        return self.base_chart.const(node)

    def _index_parity(self, kind: str, pos: int) -> int:
        seq = {"base": self.base_parities, "side1": self.side1,
               "side2": self.side2, "core": self.core}[kind]
        return seq[pos]

    def _validate_blocks(self):
        for keys, blocks in ((Q1_KEYS, self.q1), (Q2_KEYS, self.q2)):
            for key in keys:
                axes = BLOCK_AXES[key]
                shape = tuple(self._axis_len(kind) for kind in axes)
                for idx in itertools.product(*(range(n) for n in shape)):
                    e = blocks[key]
                    for k in idx:
                        e = e[k]
                    if e.is_zero:
                        continue
                    want = sum(self._index_parity(kind, k)
                               for kind, k in zip(axes, idx)) % 2
                    got = e.parity_or_none()
                    if got is None or got != want:
                        raise ParityError(
                            "block %s entry %s must have parity %d"
                            % (key, idx, want))
                    if e.degree_in(self.base_vars) > self.max_degree:
                        raise DoubleError(
                            "block %s entry %s exceeds degree %d"
                            % (key, idx, self.max_degree))
                sym = SYMMETRIC_BLOCKS.get(key)
                if sym is not None:
                    self._check_symmetry(key, blocks[key], axes, shape, sym)

    def _check_symmetry(self, key, block, axes, shape, sym):
        a1, a2 = sym
        kind = axes[a1]
        for idx in itertools.product(*(range(n) for n in shape)):
            swapped = list(idx)
            swapped[a1], swapped[a2] = idx[a2], idx[a1]
            sign = _sym_sign(self._index_parity(kind, idx[a1]),
                            self._index_parity(kind, idx[a2]))
            e = block
            f = block
            for k in idx:
                e = e[k]
            for k in swapped:
                f = f[k]
            if e != f * sign:
                raise DoubleError(
                    "block %s is not graded symmetric at %s" % (key, idx))

    # -- charts --------------------------------------------------------

    def _mk_chart(self, name, specs):
        c = Chart(name, weight_len=2)
        groups = {"x": []}
        for n, p in self.base:
            c.add(n, p, (0, 0))
            groups["x"].append(c.var(n))
        for gname, fmt, pars, weight, shift in specs:
            groups[gname] = []
            for k, p in enumerate(pars):
                c.add(fmt % (k + 1), (p + shift) % 2, weight)
                groups[gname].append(c.var(fmt % (k + 1)))
        self._groups[name] = {g: tuple(vs) for g, vs in groups.items()}
        return c

    def _build_charts(self):
        s1, s2, co = self.side1, self.side2, self.core
        self.double_chart = self._mk_chart("double", [
            ("xi", "xi%d", s1, (1, 0), 1),
            ("eta", "eta%d", s2, (0, 1), 1),
            ("z", "z%d", co, (1, 1), 0),
        ])
        self.rev1_chart = self._mk_chart("rev1", [
            ("xi", "xi%d", s1, (1, 0), 1),
            ("w", "w%d", s2, (0, 1), 0),
            ("th", "th%d", co, (1, 1), 1),
        ])
        self.rev2_chart = self._mk_chart("rev2", [
            ("u", "u%d", s1, (1, 0), 0),
            ("eta", "eta%d", s2, (0, 1), 1),
            ("th", "th%d", co, (1, 1), 1),
        ])
        self.side1_chart = self._mk_chart("side1", [
            ("xi", "xi%d", s1, (1, 0), 1),
        ])
        self.side2_chart = self._mk_chart("side2", [
            ("eta", "eta%d", s2, (0, 1), 1),
        ])
        self.schouten_chart = self._mk_chart("dualized", [
            ("z_", "z_%d", co, (1, 0), 0),
            ("eta", "eta%d", s2, (0, 1), 1),
            ("xi_", "xi_%d", s1, (1, 1), 1),
        ])

    def tangent_charts(self):
        """Tangent prolongations of the two side charts (built once)."""
        if self._tangent is None:
            t2 = Chart("t-side2", weight_len=2)
            for n, p in self.base:
                t2.add(n, p, (0, 0))
            for k, p in enumerate(self.side2):
                t2.add("eta%d" % (k + 1), (p + 1) % 2, (0, 1))
            for k, (n, p) in enumerate(self.base):
                t2.add("xd%d" % (k + 1), p, (1, 0))
            for k, p in enumerate(self.side2):
                t2.add("eta%dd" % (k + 1), (p + 1) % 2, (1, 1))
            self._groups["t-side2"] = {
                "x": tuple(t2.var(n) for n, _ in self.base),
                "eta": tuple(t2.var("eta%d" % (k + 1)) for k in range(self.nw)),
                "xd": tuple(t2.var("xd%d" % (k + 1)) for k in range(self.nx)),
                "etad": tuple(t2.var("eta%dd" % (k + 1)) for k in range(self.nw)),
            }
            t1 = Chart("t-side1", weight_len=2)
            for n, p in self.base:
                t1.add(n, p, (0, 0))
            for k, p in enumerate(self.side1):
                t1.add("xi%d" % (k + 1), (p + 1) % 2, (1, 0))
            for k, (n, p) in enumerate(self.base):
                t1.add("xd%d" % (k + 1), p, (0, 1))
            for k, p in enumerate(self.side1):
                t1.add("xi%dd" % (k + 1), (p + 1) % 2, (1, 1))
            self._groups["t-side1"] = {
                "x": tuple(t1.var(n) for n, _ in self.base),
                "xi": tuple(t1.var("xi%d" % (k + 1)) for k in range(self.nu)),
                "xd": tuple(t1.var("xd%d" % (k + 1)) for k in range(self.nx)),
                "xid": tuple(t1.var("xi%dd" % (k + 1)) for k in range(self.nu)),
            }
            self._tangent = (t2, t1)
        return self._tangent

    def groups(self, chart: Chart) -> dict[str, tuple[Variable, ...]]:
        return self._groups[chart.name]

    def block(self, key: str):
        if key in Q1_KEYS:
            return self.q1[key]
        if key in Q2_KEYS:
            return self.q2[key]
        raise ShapeError("unknown tensor block %r" % key, block=key)


# -- field assembly ----------------------------------------------------


def _side1_field(sf, chart, xis, etas=None, zs=None) -> Derivation:
    """The weight-(1,0) field on ``chart`` from the ``q1`` blocks.

    ``etas``/``zs`` are None on the bare side chart, where only the base
    and side-1 components exist.
    """
    q = sf.q1
    xs = [chart.var(n) for n, _ in sf.base]
    coeffs = {}
    for a, xv in enumerate(xs):
        t = chart.zero()
        for i, iv in enumerate(xis):
            e = q["Qia"][i][a]
            if not e.is_zero:
                t = t + iv.poly() * _on(chart, e)
        coeffs[xv] = t
    for k, kv in enumerate(xis):
        t = chart.zero()
        for i, iv in enumerate(xis):
            for j, jv in enumerate(xis):
                e = q["Qjik"][j][i][k]
                if not e.is_zero:
                    t = t + iv.poly() * jv.poly() * _on(chart, e) * _HALF
        coeffs[kv] = t
    if etas is not None:
        for b, bv in enumerate(etas):
            t = chart.zero()
            for i, iv in enumerate(xis):
                for al, av in enumerate(etas):
                    e = q["QaiB"][al][i][b]
                    if not e.is_zero:
                        t = t + iv.poly() * av.poly() * _on(chart, e)
            for m, mv in enumerate(zs):
                e = q["QmuB"][m][b]
                if not e.is_zero:
                    t = t + mv.poly() * _on(chart, e)
            coeffs[bv] = t
        for lam, lv in enumerate(zs):
            t = chart.zero()
            for i, iv in enumerate(xis):
                for j, jv in enumerate(xis):
                    for al, av in enumerate(etas):
                        e = q["QajiL"][al][j][i][lam]
                        if not e.is_zero:
                            t = t + (iv.poly() * jv.poly() * av.poly()
                                     * _on(chart, e) * _HALF)
            for i, iv in enumerate(xis):
                for m, mv in enumerate(zs):
                    e = q["QmuiL"][m][i][lam]
                    if not e.is_zero:
                        t = t + iv.poly() * mv.poly() * _on(chart, e)
            coeffs[lv] = t
    return Derivation(chart, coeffs)


def _side2_field(sf, chart, xis, etas, zs=None) -> Derivation:
    """The weight-(0,1) field on ``chart`` from the ``q2`` blocks."""
    q = sf.q2
    xs = [chart.var(n) for n, _ in sf.base]
    coeffs = {}
    for a, xv in enumerate(xs):
        t = chart.zero()
        for al, av in enumerate(etas):
            e = q["Qaa"][al][a]
            if not e.is_zero:
                t = t + av.poly() * _on(chart, e)
        coeffs[xv] = t
    if xis is not None:
        for j, jv in enumerate(xis):
            t = chart.zero()
            for al, av in enumerate(etas):
                for i, iv in enumerate(xis):
                    e = q["Qiaj"][i][al][j]
                    if not e.is_zero:
                        t = t + av.poly() * iv.poly() * _on(chart, e)
            for m, mv in enumerate(zs):
                e = q["Qmuj"][m][j]
                if not e.is_zero:
                    t = t + mv.poly() * _on(chart, e)
            coeffs[jv] = t
    for g, gv in enumerate(etas):
        t = chart.zero()
        for al, av in enumerate(etas):
            for b, bv in enumerate(etas):
                e = q["QbaG"][b][al][g]
                if not e.is_zero:
                    t = t + av.poly() * bv.poly() * _on(chart, e) * _HALF
        coeffs[gv] = t
    if xis is not None:
        for lam, lv in enumerate(zs):
            t = chart.zero()
            for al, av in enumerate(etas):
                for b, bv in enumerate(etas):
                    for i, iv in enumerate(xis):
                        e = q["QibaL"][i][b][al][lam]
                        if not e.is_zero:
                            t = t + (av.poly() * bv.poly() * iv.poly()
                                     * _on(chart, e) * _HALF)
            for al, av in enumerate(etas):
                for m, mv in enumerate(zs):
                    e = q["QmuaL"][m][al][lam]
                    if not e.is_zero:
                        t = t + av.poly() * mv.poly() * _on(chart, e)
            coeffs[lv] = t
    return Derivation(chart, coeffs)


@dataclass(frozen=True)
class FieldSet:
    """The six fields built from one set of structure functions."""

    q1: Derivation
    q2: Derivation
    q1_pi: Derivation
    q2_pi: Derivation
    q1_0: Derivation
    q2_0: Derivation


def build_fields(sf: DoubleStructureFunctions) -> FieldSet:
    """Assemble the field pair, its reversions, and its restrictions."""
    dc = sf.double_chart
    g = sf.groups(dc)
    q1 = _side1_field(sf, dc, g["xi"], g["eta"], g["z"])
    q2 = _side2_field(sf, dc, g["xi"], g["eta"], g["z"])
    g1 = sf.groups(sf.rev1_chart)
    q1_pi = _side1_field(sf, sf.rev1_chart, g1["xi"], g1["w"], g1["th"])
    g2 = sf.groups(sf.rev2_chart)
    q2_pi = _side2_field(sf, sf.rev2_chart, g2["u"], g2["eta"], g2["th"])
    q1_0 = _side1_field(sf, sf.side1_chart, sf.groups(sf.side1_chart)["xi"])
    q2_0 = _side2_field(sf, sf.side2_chart, None,
                        sf.groups(sf.side2_chart)["eta"])
    fields = FieldSet(q1, q2, q1_pi, q2_pi, q1_0, q2_0)
    for label, f, want in (("Q1", q1, (1, 0)), ("Q2", q2, (0, 1)),
                           ("Q1pi", q1_pi, (1, 0)), ("Q2pi", q2_pi, (0, 1)),
                           ("Q1side", q1_0, (1, 0)), ("Q2side", q2_0, (0, 1))):
        if f.is_zero:
            continue
        if f.parity() != ODD:
            raise ParityError("field %s is not odd" % label)
        if f.weight() != want:
            raise WeightError("field %s has weight %s, expected %s"
                              % (label, f.weight(), want), [f.weight()])
    return fields


# -- residual bookkeeping ----------------------------------------------


@dataclass(frozen=True)
class Residual:
    """One labeled residual polynomial of a check."""

    family: str
    indices: tuple
    poly: Poly

    def to_dict(self) -> dict:
        return {"family": self.family, "indices": list(self.indices),
                "poly": self.poly.text()}


def _res_key(r: Residual):
    tagged = tuple((0, x) if isinstance(x, int) else (1, str(x))
                   for x in r.indices)
    return (r.family, len(tagged), tagged)


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one check: labeled residuals plus free-form notes."""

    label: str
    residuals: tuple[Residual, ...]
    notes: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(r.poly.is_zero for r in self.residuals)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "passed": self.passed,
            "notes": list(self.notes),
            "residuals": [r.to_dict() for r in self.residuals],
        }


def _report(label, residuals, notes=()) -> ConditionReport:
    keep = tuple(sorted((r for r in residuals if not r.poly.is_zero),
                        key=_res_key))
    return ConditionReport(label, keep, tuple(notes))


def weight_components(p: Poly) -> dict[tuple, Poly]:
    """Split a polynomial into its weight-homogeneous parts."""
    vars_ = p.chart.variables
    parts: dict[tuple, dict] = {}
    for mono, coeff in p.terms.items():
        w = [0] * p.chart.weight_len
        for idx, exp in mono:
            for s, comp in enumerate(vars_[idx].weight):
                w[s] += exp * comp
        parts.setdefault(tuple(w), {})[mono] = coeff
    return {w: Poly(p.chart, terms) for w, terms in parts.items()}


# -- condition I: fiberwise linearity and restriction -------------------


def condition_I(sf: DoubleStructureFunctions,
                fields: FieldSet | None = None) -> ConditionReport:
    """Weight scan, zero-section tangency, and restriction matching.

    The check is purely monomial-by-monomial, so a hand-built field with
    an illegal weight component is reported rather than rejected.
    """
    fields = fields or build_fields(sf)
    residuals = []
    jobs = (
        ("Q1pi", fields.q1_pi, (1, 0), sf.rev1_chart, ("w", "th"),
         sf.side1_chart, fields.q1_0),
        ("Q2pi", fields.q2_pi, (0, 1), sf.rev2_chart, ("u", "th"),
         sf.side2_chart, fields.q2_0),
    )
    for label, fld, want, chart, off_groups, side_chart, side_field in jobs:
        groups = sf.groups(chart)
        off_vars = [v for gname in off_groups for v in groups[gname]]
        zero_images = {v: side_chart.zero() for v in off_vars}
        for v in chart.variables:
            c = fld.coefficient(v)
            if c.is_zero:
                continue
            for w, part in sorted(weight_components(c).items()):
                rel = tuple(a - b for a, b in zip(w, v.weight))
                if rel != want:
                    residuals.append(Residual(
                        "weight", (label, v.name, str(rel)), part))
        for v in off_vars:
            r = fld.coefficient(v).substitute(zero_images, target=side_chart)
            if not r.is_zero:
                residuals.append(Residual("tangent", (label, v.name), r))
        for v in side_chart.variables:
            mine = fld.coefficient(chart.var(v.name)).substitute(
                zero_images, target=side_chart)
            diff = mine - side_field.coefficient(v)
            if not diff.is_zero:
                residuals.append(Residual("restriction", (label, v.name), diff))
    return _report("I", residuals)


# -- class extraction machinery ----------------------------------------


def _strip_tuples(groupvars: Mapping[str, tuple], pattern: tuple[str, ...]):
    """Enumerate ordered strip tuples for a monomial pattern.

    Within a run of equal kinds the positions increase, strictly for odd
    variables and weakly for even ones.
    """
    runs = [(kind, len(list(g))) for kind, g in itertools.groupby(pattern)]
    pools = []
    for kind, count in runs:
        vs = groupvars[kind]
        if vs and vs[0].is_odd:
            pools.append(list(itertools.combinations(range(len(vs)), count)))
        else:
            pools.append(list(itertools.combinations_with_replacement(
                range(len(vs)), count)))
    for combo in itertools.product(*pools):
        positions = [p for chunk in combo for p in chunk]
        vars_ = []
        k = 0
        for kind, count in runs:
            for _ in range(count):
                vars_.append(groupvars[kind][positions[k]])
                k += 1
        yield tuple(p + 1 for p in positions), tuple(vars_)


def _rebuild_factor(vars_: tuple[Variable, ...]) -> Fraction:
    f = Fraction(1)
    for _, count in itertools.groupby(vars_, key=lambda v: v.index):
        m = len(list(count))
        for k in range(2, m + 1):
            f /= k
    return f


def _extract_classes(sf, chart, poly, specs, label, out, leftovers,
                     dicts=None):
    """Split one residual polynomial into labeled base-function classes.

    ``specs`` is a sequence of ``(family, pattern, key_fn)``; ``key_fn``
    maps the 1-based strip positions to the family's index tuple.  Any
    part of ``poly`` not reproduced by the classes lands in
    ``leftovers`` under the given label.
    """
    groups = sf.groups(chart)
    fiber = [v for g, vs in groups.items() if g != "x" for v in vs]
    rebuilt = chart.zero()
    for family, pattern, key_fn in specs:
        for positions, vars_ in _strip_tuples(groups, pattern):
            c = poly.coefficient_of(vars_) if vars_ else poly
            key = key_fn(positions)
            clean = c.degree_in(fiber) == 0
            if dicts is not None:
                dicts.setdefault(family, {})[key] = (
                    _on(sf.base_chart, c) if clean else sf.base_chart.zero())
            if not c.is_zero:
                if clean:
                    out.append(Residual(family, key, c))
                else:
                    leftovers.append(Residual("unclassified", key, c))
            if vars_:
                rebuilt = rebuilt + (Poly.monomial(vars_)
                                     * c * _rebuild_factor(vars_))
            else:
                rebuilt = rebuilt + c
    rest = poly - rebuilt
    if not rest.is_zero:
        leftovers.append(Residual("unclassified", (label,), rest))


# -- condition II: anchor relatedness ----------------------------------


def _tangent_lift(field: Derivation, chart: Chart,
                  dotted: Mapping[str, str]) -> Derivation:
    """Prolong a side field to the tangent chart of its side.

    Transported coefficients drive the undotted coordinates; their
    dot-derivatives (dotting each coordinate into its partner) drive the
    dotted ones.
    """
    dot = Derivation(chart, {chart.var(n): chart.var(d).poly()
                             for n, d in dotted.items()})
    coeffs = {}
    for v in field.chart.variables:
        c = _on(chart, field.coefficient(v))
        coeffs[chart.var(v.name)] = c
        coeffs[chart.var(dotted[v.name])] = dot.apply(c)
    return Derivation(chart, coeffs)


def _anchor_pullbacks(sf):
    """Images of the dotted tangent coordinates under the two anchors."""
    t2, t1 = sf.tangent_charts()
    r2 = sf.groups(sf.rev2_chart)
    pb_ab = {}
    for a in range(sf.nx):
        t = sf.rev2_chart.zero()
        for i, iv in enumerate(r2["u"]):
            e = sf.q1["Qia"][i][a]
            if not e.is_zero:
                t = t + iv.poly() * _on(sf.rev2_chart, e)
        pb_ab[sf.groups(t2)["xd"][a]] = t
    for b in range(sf.nw):
        t = sf.rev2_chart.zero()
        for i, iv in enumerate(r2["u"]):
            for al, av in enumerate(r2["eta"]):
                e = sf.q1["QaiB"][al][i][b]
                if not e.is_zero:
                    t = t + iv.poly() * av.poly() * _on(sf.rev2_chart, e)
        for m, mv in enumerate(r2["th"]):
            e = sf.q1["QmuB"][m][b]
            if not e.is_zero:
                t = t - mv.poly() * _on(sf.rev2_chart, e)
        pb_ab[sf.groups(t2)["etad"][b]] = t
    r1 = sf.groups(sf.rev1_chart)
    pb_ba = {}
    for a in range(sf.nx):
        t = sf.rev1_chart.zero()
        for al, av in enumerate(r1["w"]):
            e = sf.q2["Qaa"][al][a]
            if not e.is_zero:
                t = t + av.poly() * _on(sf.rev1_chart, e)
        pb_ba[sf.groups(t1)["xd"][a]] = t
    for j in range(sf.nu):
        t = sf.rev1_chart.zero()
        for al, av in enumerate(r1["w"]):
            for i, iv in enumerate(r1["xi"]):
                e = sf.q2["Qiaj"][i][al][j]
                if not e.is_zero:
                    t = t + av.poly() * iv.poly() * _on(sf.rev1_chart, e)
        for m, mv in enumerate(r1["th"]):
            e = sf.q2["Qmuj"][m][j]
            if not e.is_zero:
                t = t - mv.poly() * _on(sf.rev1_chart, e)
        pb_ba[sf.groups(t1)["xid"][j]] = t
    return pb_ab, pb_ba


def _condition_II_raw(sf, fields):
    """Relatedness residuals for both directions, keyed by target var."""
    fields = fields or build_fields(sf)
    t2, t1 = sf.tangent_charts()
    pb_ab, pb_ba = _anchor_pullbacks(sf)
    lift2 = _tangent_lift(fields.q2_0, t2, dict(
        [(n, "xd%d" % (k + 1)) for k, (n, _) in enumerate(sf.base)]
        + [("eta%d" % (k + 1), "eta%dd" % (k + 1)) for k in range(sf.nw)]))
    lift1 = _tangent_lift(fields.q1_0, t1, dict(
        [(n, "xd%d" % (k + 1)) for k, (n, _) in enumerate(sf.base)]
        + [("xi%d" % (k + 1), "xi%dd" % (k + 1)) for k in range(sf.nu)]))
    res_ab = related(pb_ab, fields.q2_pi, lift2)
    res_ba = related(pb_ba, fields.q1_pi, lift1)
    return res_ab, res_ba


def condition_II(sf: DoubleStructureFunctions,
                 fields: FieldSet | None = None) -> ConditionReport:
    """Each reverted field must be anchor-related to the opposite lift."""
    res_ab, res_ba = _condition_II_raw(sf, fields)
    residuals: list[Residual] = []
    notes: list[str] = []
    if not sf.is_even:
        for direction, res in (("AB", res_ab), ("BA", res_ba)):
            for v, r in res.items():
                if not r.is_zero:
                    residuals.append(Residual("related", (direction, v.name), r))
        notes.append("super data: whole relatedness residuals reported; "
                     "the anchor1..anchor6 families apply to the all-even "
                     "case only")
        return _report("II", residuals, notes)
    dicts: dict[str, dict] = {}
    leftovers: list[Residual] = []
    _classify_anchor(sf, res_ab, res_ba, residuals, leftovers, dicts)
    residuals.extend(leftovers)
    return _report("II", residuals, notes)


def _classify_anchor(sf, res_ab, res_ba, out, leftovers, dicts):
    t2, t1 = sf.tangent_charts()
    g2, g1 = sf.groups(t2), sf.groups(t1)
    for v, r in res_ab.items():
        gname, pos = _locate(g2, v)
        if gname == "xd":
            a = pos + 1
            _extract_classes(sf, sf.rev2_chart, r, (
                ("anchor2", ("u", "eta"), lambda p, a=a: (p[0], p[1], a)),
                ("anchor1", ("th",), lambda p, a=a: (p[0], a)),
            ), ("AB", v.name), out, leftovers, dicts)
        elif gname == "etad":
            gidx = pos + 1
            _extract_classes(sf, sf.rev2_chart, r, (
                ("anchor3", ("u", "eta", "eta"),
                 lambda p, g=gidx: (p[0], p[1], p[2], g)),
                ("anchor4", ("eta", "th"),
                 lambda p, g=gidx: (p[0], p[1], g)),
            ), ("AB", v.name), out, leftovers, dicts)
        elif not r.is_zero:
            out.append(Residual("transport", ("AB", v.name), r))
    for v, r in res_ba.items():
        gname, pos = _locate(g1, v)
        if gname == "xd":
            a = pos + 1
            _extract_classes(sf, sf.rev1_chart, r, (
                ("anchor2-swap", ("xi", "w"), lambda p, a=a: (p[0], p[1], a)),
                ("anchor1-swap", ("th",), lambda p, a=a: (p[0], a)),
            ), ("BA", v.name), out, leftovers, dicts)
        elif gname == "xid":
            k = pos + 1
            _extract_classes(sf, sf.rev1_chart, r, (
                ("anchor5", ("xi", "xi", "w"),
                 lambda p, k=k: (p[0], p[1], p[2], k)),
                ("anchor6", ("xi", "th"), lambda p, k=k: (p[0], p[1], k)),
            ), ("BA", v.name), out, leftovers, dicts)
        elif not r.is_zero:
            out.append(Residual("transport", ("BA", v.name), r))


def _locate(groups, v):
    for gname, vs in groups.items():
        for pos, w in enumerate(vs):
            if w is v:
                return gname, pos
    raise DoubleError("variable %r not in chart groups" % v.name)


def anchor_classes(sf: DoubleStructureFunctions,
                   fields: FieldSet | None = None):
    """Complete anchor-family dictionaries plus unclassified leftovers.

    All-even only.  Returns ``(families, leftovers)`` where families
    maps ``anchor1``..``anchor6`` (and the ``-swap`` duplicates from the
    opposite direction) to dicts of base-chart residuals keyed by
    1-based indices.
    """
    if not sf.is_even:
        raise EvenCaseError("anchor families are defined for all-even data")
    res_ab, res_ba = _condition_II_raw(sf, fields)
    out: list[Residual] = []
    leftovers: list[Residual] = []
    dicts: dict[str, dict] = {}
    _classify_anchor(sf, res_ab, res_ba, out, leftovers, dicts)
    return dicts, tuple(leftovers)


# -- condition III: derivation of the dual bracket ----------------------

# The signs and index placements below were fixed by requiring that the
# Leibniz residuals of the dualized table against the dual-side field
# reproduce the commutator classes family by family, with a uniform
# nonzero scalar per family, across random all-even data and the graded
# reference doubles.  The base-frame entry is pinned to +1, which breaks
# the global-sign degeneracy of the table.


def schouten_table(sf: DoubleStructureFunctions) -> BracketTable:
    """The odd bracket carried by the core-dualized chart."""
    qs = sf.schouten_chart
    g = sf.groups(qs)
    xs, zs, es, xis = g["x"], g["z_"], g["eta"], g["xi_"]
    entries = {}
    for a, xv in enumerate(xs):
        for i, iv in enumerate(xis):
            e = sf.q1["Qia"][i][a]
            if not e.is_zero:
                entries[(xv, iv)] = _on(qs, e)
    for i in range(sf.nu):
        for j in range(i, sf.nu):
            t = qs.zero()
            for l in range(sf.nu):
                e = sf.q1["Qjik"][i][j][l]
                if not e.is_zero:
                    t = t - _on(qs, e) * xis[l].poly()
            for al, av in enumerate(es):
                for lam in range(sf.nz):
                    e = sf.q1["QajiL"][al][i][j][lam]
                    if not e.is_zero:
                        t = t + av.poly() * _on(qs, e) * zs[lam].poly()
            if not t.is_zero:
                entries[(xis[i], xis[j])] = t
    for i, iv in enumerate(xis):
        for al, av in enumerate(es):
            t = qs.zero()
            for b, bv in enumerate(es):
                e = sf.q1["QaiB"][b][i][al]
                if not e.is_zero:
                    t = t - bv.poly() * _on(qs, e)
            if not t.is_zero:
                entries[(iv, av)] = t
    for i, iv in enumerate(xis):
        for m, mv in enumerate(zs):
            t = qs.zero()
            for lam in range(sf.nz):
                e = sf.q1["QmuiL"][m][i][lam]
                if not e.is_zero:
                    t = t + _on(qs, e) * zs[lam].poly()
            if not t.is_zero:
                entries[(iv, mv)] = t
    for al, av in enumerate(es):
        for m, mv in enumerate(zs):
            e = sf.q1["QmuB"][m][al]
            if not e.is_zero:
                entries[(av, mv)] = -_on(qs, e)
    return BracketTable(qs, ODD, entries)


def dual_field(sf: DoubleStructureFunctions) -> Derivation:
    """The weight-(0,1) field acting on the core-dualized chart."""
    qs = sf.schouten_chart
    g = sf.groups(qs)
    xs, zs, es, xis = g["x"], g["z_"], g["eta"], g["xi_"]
    coeffs = {}
    for a, xv in enumerate(xs):
        t = qs.zero()
        for al, av in enumerate(es):
            e = sf.q2["Qaa"][al][a]
            if not e.is_zero:
                t = t + av.poly() * _on(qs, e)
        coeffs[xv] = t
    for i, iv in enumerate(xis):
        t = qs.zero()
        for al, av in enumerate(es):
            for j in range(sf.nu):
                e = sf.q2["Qiaj"][i][al][j]
                if not e.is_zero:
                    t = t - av.poly() * _on(qs, e) * xis[j].poly()
        for al, av in enumerate(es):
            for b, bv in enumerate(es):
                for lam in range(sf.nz):
                    e = sf.q2["QibaL"][i][b][al][lam]
                    if not e.is_zero:
                        t = t - (av.poly() * bv.poly() * _on(qs, e)
                                 * zs[lam].poly() * _HALF)
        coeffs[iv] = t
    for gdx, gv in enumerate(es):
        t = qs.zero()
        for al, av in enumerate(es):
            for b, bv in enumerate(es):
                e = sf.q2["QbaG"][b][al][gdx]
                if not e.is_zero:
                    t = t + av.poly() * bv.poly() * _on(qs, e) * _HALF
        coeffs[gv] = t
    for m, mv in enumerate(zs):
        t = qs.zero()
        for j in range(sf.nu):
            e = sf.q2["Qmuj"][m][j]
            if not e.is_zero:
                t = t + _on(qs, e) * xis[j].poly()
        for al, av in enumerate(es):
            for lam in range(sf.nz):
                e = sf.q2["QmuaL"][m][al][lam]
                if not e.is_zero:
                    t = t - av.poly() * _on(qs, e) * zs[lam].poly()
        coeffs[mv] = t
    return Derivation(qs, coeffs)


def _leibniz_class_specs(sf, v, w):
    """Class specs for one index-ordered pair of dualized generators."""
    g = sf.groups(sf.schouten_chart)
    kv, pv = _locate(g, v)
    kw, pw = _locate(g, w)
    i, j = pv + 1, pw + 1
    pair = (kv, kw)
    if pair == ("x", "xi_"):
        return (("bialg3", ("eta",), lambda p: (j, p[0], i)),)
    if pair == ("x", "z_"):
        return (("bialg1", (), lambda p: (j, i)),)
    if pair == ("z_", "z_"):
        return (("bialg2", ("z_",), lambda p: (i, j, p[0])),)
    if pair == ("z_", "eta"):
        return (("bialg6", ("eta",), lambda p: (p[0], i, j)),)
    if pair == ("z_", "xi_"):
        return (("bialg4", ("xi_",), lambda p: (j, i, p[0])),
                ("bialg5", ("z_", "eta"), lambda p: (j, p[1], i, p[0])))
    if pair == ("eta", "xi_"):
        return (("bialg9", ("eta", "eta"), lambda p: (j, p[0], p[1], i)),)
    if pair == ("xi_", "xi_"):
        if pv == pw:
            return ()
        return (("bialg7", ("eta", "xi_"), lambda p: (i, j, p[0], p[1])),
                ("bialg8", ("z_", "eta", "eta"),
                 lambda p: (i, j, p[1], p[2], p[0])))
    return ()


def _condition_III_parts(sf, fields):
    fields = fields or build_fields(sf)
    table = schouten_table(sf)
    qstar = dual_field(sf)
    leib = table.leibniz_residuals(qstar)
    jac = table.jacobi_residuals()
    square = commutator(qstar, qstar).scale(_HALF)
    proj = related({}, qstar, fields.q2_0)
    return table, qstar, leib, jac, square, proj


def condition_III(sf: DoubleStructureFunctions,
                  fields: FieldSet | None = None) -> ConditionReport:
    """The dual-side field must be a square-zero derivation of the
    dualized bracket and project onto the bare side-2 field."""
    fields = fields or build_fields(sf)
    table, qstar, leib, jac, square, proj = _condition_III_parts(sf, fields)
    residuals: list[Residual] = []
    notes: list[str] = []
    if sf.is_even:
        leftovers: list[Residual] = []
        for (v, w), r in leib.items():
            specs = _leibniz_class_specs(sf, v, w)
            if specs:
                _extract_classes(sf, sf.schouten_chart, r, specs,
                                 (v.name, w.name), residuals, leftovers)
            elif not r.is_zero:
                leftovers.append(Residual("unclassified", (v.name, w.name), r))
        residuals.extend(leftovers)
    else:
        for (v, w), r in leib.items():
            if not r.is_zero:
                residuals.append(Residual("pair", (v.name, w.name), r))
        notes.append("super data: whole pair residuals reported; the "
                     "bialg1..bialg9 families apply to the all-even case "
                     "only")
    for (u, v, w), r in jac.items():
        if not r.is_zero:
            residuals.append(Residual("table-jacobi",
                                      (u.name, v.name, w.name), r))
    for v in sf.schouten_chart.variables:
        r = square.coefficient(v)
        if not r.is_zero:
            residuals.append(Residual("dual-square", (v.name,), r))
    for v, r in proj.items():
        if not r.is_zero:
            residuals.append(Residual("projection", (v.name,), r))
    return _report("III", residuals, notes)


def leibniz_classes(sf: DoubleStructureFunctions,
                    fields: FieldSet | None = None):
    """Complete bialg-family dictionaries from the derivation check.

    All-even only.  Returns ``(families, leftovers)``.
    """
    if not sf.is_even:
        raise EvenCaseError("bialg families are defined for all-even data")
    fields = fields or build_fields(sf)
    _, _, leib, _, _, _ = _condition_III_parts(sf, fields)
    dicts: dict[str, dict] = {}
    out: list[Residual] = []
    leftovers: list[Residual] = []
    for (v, w), r in leib.items():
        specs = _leibniz_class_specs(sf, v, w)
        if specs:
            _extract_classes(sf, sf.schouten_chart, r, specs,
                             (v.name, w.name), out, leftovers, dicts)
        elif not r.is_zero:
            leftovers.append(Residual("unclassified", (v.name, w.name), r))
    return dicts, tuple(leftovers)


# -- commutativity ------------------------------------------------------

_COMM_CLASS_SPECS = (
    ("x", (("bialg3", ("xi", "eta")), ("bialg1", ("z",)))),
    ("xi", (("bialg7", ("xi", "xi", "eta")), ("bialg4", ("xi", "z")))),
    ("eta", (("bialg9", ("xi", "eta", "eta")), ("bialg6", ("eta", "z")))),
    ("z", (("bialg2", ("z", "z")), ("bialg5", ("xi", "eta", "z")),
           ("bialg8", ("xi", "xi", "eta", "eta")))),
)


def _commutator_classes(sf, fields, out, leftovers, dicts):
    fields = fields or build_fields(sf)
    c = commutator(fields.q1, fields.q2)
    dc = sf.double_chart
    g = sf.groups(dc)
    for gname, class_list in _COMM_CLASS_SPECS:
        for upos, v in enumerate(g[gname]):
            r = c.coefficient(v)
            specs = tuple(
                (family, pattern,
                 (lambda p, u=upos + 1: tuple(p) + (u,)))
                for family, pattern in class_list)
            _extract_classes(sf, dc, r, specs, (v.name,), out, leftovers,
                             dicts)
    return c


def commutator_classes(sf: DoubleStructureFunctions,
                       fields: FieldSet | None = None):
    """Complete bialg-family dictionaries from the supercommutator.

    All-even only.  Returns ``(families, leftovers)``.
    """
    if not sf.is_even:
        raise EvenCaseError("bialg families are defined for all-even data")
    out: list[Residual] = []
    leftovers: list[Residual] = []
    dicts: dict[str, dict] = {}
    _commutator_classes(sf, fields, out, leftovers, dicts)
    return dicts, tuple(leftovers)


def commutativity(sf: DoubleStructureFunctions,
                  fields: FieldSet | None = None) -> ConditionReport:
    """The two fields must supercommute and square to zero."""
    fields = fields or build_fields(sf)
    residuals: list[Residual] = []
    notes: list[str] = []
    if sf.is_even:
        leftovers: list[Residual] = []
        _commutator_classes(sf, fields, residuals, leftovers, None)
        residuals.extend(leftovers)
        notes.append("commutator coefficients are labeled by their "
                     "bialg family; see CORRESPONDENCE for the signed "
                     "match with the reference forms")
    else:
        c = commutator(fields.q1, fields.q2)
        for v in sf.double_chart.variables:
            r = c.coefficient(v)
            if not r.is_zero:
                residuals.append(Residual("commutator", (v.name,), r))
    for label, f in (("square1", fields.q1), ("square2", fields.q2)):
        h = commutator(f, f).scale(_HALF)
        for v in sf.double_chart.variables:
            r = h.coefficient(v)
            if not r.is_zero:
                residuals.append(Residual(label, (v.name,), r))
    return _report("commute", residuals, notes)


# -- equivalence summary ------------------------------------------------


@dataclass
class EquivalenceSummary:
    """All four reports plus the implication table between them."""

    reports: dict
    implications: dict

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.reports.values())

    def to_dict(self) -> dict:
        return {
            "reports": {k: r.to_dict() for k, r in self.reports.items()},
            "implications": dict(self.implications),
        }


def equivalence_report(sf: DoubleStructureFunctions) -> EquivalenceSummary:
    """Run all four checks and tabulate the implications between them."""
    if not sf.is_even:
        raise EvenCaseError("the equivalence summary is defined for "
                            "all-even data")
    fields = build_fields(sf)
    reports = {
        "I": condition_I(sf, fields),
        "II": condition_II(sf, fields),
        "III": condition_III(sf, fields),
        "commute": commutativity(sf, fields),
    }
    iii = reports["III"].passed
    implications = {
        "III_implies_II": (not iii) or reports["II"].passed,
        "III_iff_commutativity": iii == reports["commute"].passed,
    }
    return EquivalenceSummary(reports, implications)


# -- reference equation families ---------------------------------------

# Weight of the alternated (antisymmetrized) terms of anchor3/anchor5.
_ALT = Fraction(1, 2)

# The reference displays use the opposite core orientation for the
# side-1 field: performing the two shift steps in the other order sends
# every core coordinate z to -z, and exactly the side-1 blocks of net
# core degree one pick up a sign.  Translating those two blocks lets
# each display be compared with the engine classes entry by entry; the
# uniform leftover scalars are frozen in ``ANCHOR_CORRESPONDENCE`` and
# ``CORRESPONDENCE``.
_REFERENCE_FLIPS = ("QmuB", "QajiL")


def _negate_block(node):
    if isinstance(node, list):
        return [_negate_block(child) for child in node]
    return -node


def _reference_q1(sf: DoubleStructureFunctions):
    """Side-1 blocks translated into the reference core orientation."""
    q1 = dict(sf.q1)
    for key in _REFERENCE_FLIPS:
        q1[key] = _negate_block(sf.q1[key])
    return q1


def printed_anchor_families(sf: DoubleStructureFunctions):
    """Evaluate the reference forms of the six anchor families.

    Returns a dict mapping family names to dicts of base-chart values
    keyed by 1-based index tuples.  These are the displayed forms,
    evaluated on orientation-translated side-1 blocks; the engine
    classes match them up to the signs recorded in
    ``ANCHOR_CORRESPONDENCE``.
    """
    q1, q2, X = _reference_q1(sf), sf.q2, sf.base_vars
    zero = sf.base_chart.zero
    fam: dict[str, dict] = {}

    d: dict = {}
    for m in range(sf.nz):
        for a in range(sf.nx):
            t = zero()
            for b in range(sf.nw):
                t = t + q1["QmuB"][m][b] * q2["Qaa"][b][a]
            for j in range(sf.nu):
                t = t - q2["Qmuj"][m][j] * q1["Qia"][j][a]
            d[(m + 1, a + 1)] = t
    fam["anchor1"] = d

    d = {}
    for i in range(sf.nu):
        for al in range(sf.nw):
            for a in range(sf.nx):
                t = zero()
                for b in range(sf.nw):
                    t = t + q1["QaiB"][al][i][b] * q2["Qaa"][b][a]
                for b, xv in enumerate(X):
                    t = t + q1["Qia"][i][b] * q2["Qaa"][al][a].partial(xv)
                    t = t - q2["Qaa"][al][b] * q1["Qia"][i][a].partial(xv)
                for j in range(sf.nu):
                    t = t - q2["Qiaj"][i][al][j] * q1["Qia"][j][a]
                d[(i + 1, al + 1, a + 1)] = t
    fam["anchor2"] = d

    d = {}
    for i in range(sf.nu):
        for al, be in itertools.combinations(range(sf.nw), 2):
            for g in range(sf.nw):
                t1 = zero()
                for de in range(sf.nw):
                    t1 = (t1 + q1["QaiB"][al][i][de] * q2["QbaG"][be][de][g]
                          - q1["QaiB"][be][i][de] * q2["QbaG"][al][de][g])
                t2 = zero()
                for b, xv in enumerate(X):
                    t2 = t2 + q1["Qia"][i][b] * q2["QbaG"][be][al][g].partial(xv)
                t3 = zero()
                for a, xv in enumerate(X):
                    t3 = (t3 + q2["Qaa"][al][a] * q1["QaiB"][be][i][g].partial(xv)
                          - q2["Qaa"][be][a] * q1["QaiB"][al][i][g].partial(xv))
                t4 = zero()
                for j in range(sf.nu):
                    t4 = (t4 + q2["Qiaj"][i][al][j] * q1["QaiB"][be][j][g]
                          - q2["Qiaj"][i][be][j] * q1["QaiB"][al][j][g])
                t5 = zero()
                for de in range(sf.nw):
                    t5 = t5 + q2["QbaG"][be][al][de] * q1["QaiB"][de][i][g]
                t6 = zero()
                for lam in range(sf.nz):
                    t6 = t6 + q2["QibaL"][i][be][al][lam] * q1["QmuB"][lam][g]
                d[(i + 1, al + 1, be + 1, g + 1)] = (
                    t1 * _ALT + t2 * _HALF - t3 * _ALT - t4 * _ALT
                    - t5 * _HALF - t6 * _HALF)
    fam["anchor3"] = d

    d = {}
    for be in range(sf.nw):
        for m in range(sf.nz):
            for g in range(sf.nw):
                t = zero()
                for al in range(sf.nw):
                    t = t + q1["QmuB"][m][al] * q2["QbaG"][be][al][g]
                for a, xv in enumerate(X):
                    t = t + q2["Qaa"][be][a] * q1["QmuB"][m][g].partial(xv)
                for j in range(sf.nu):
                    t = t - q2["Qmuj"][m][j] * q1["QaiB"][be][j][g]
                for lam in range(sf.nz):
                    t = t + q2["QmuaL"][m][be][lam] * q1["QmuB"][lam][g]
                d[(be + 1, m + 1, g + 1)] = t
    fam["anchor4"] = d

    d = {}
    for i, j in itertools.combinations(range(sf.nu), 2):
        for al in range(sf.nw):
            for k in range(sf.nu):
                t1 = zero()
                for l in range(sf.nu):
                    t1 = (t1 + q2["Qiaj"][i][al][l] * q1["Qjik"][j][l][k]
                          - q2["Qiaj"][j][al][l] * q1["Qjik"][i][l][k])
                t2 = zero()
                for b, xv in enumerate(X):
                    t2 = t2 + q2["Qaa"][al][b] * q1["Qjik"][j][i][k].partial(xv)
                t3 = zero()
                for a, xv in enumerate(X):
                    t3 = (t3 + q1["Qia"][i][a] * q2["Qiaj"][j][al][k].partial(xv)
                          - q1["Qia"][j][a] * q2["Qiaj"][i][al][k].partial(xv))
                t4 = zero()
                for be in range(sf.nw):
                    t4 = (t4 + q1["QaiB"][al][i][be] * q2["Qiaj"][j][be][k]
                          - q1["QaiB"][al][j][be] * q2["Qiaj"][i][be][k])
                t5 = zero()
                for l in range(sf.nu):
                    t5 = t5 + q1["Qjik"][j][i][l] * q2["Qiaj"][l][al][k]
                t6 = zero()
                for lam in range(sf.nz):
                    t6 = t6 + q1["QajiL"][al][j][i][lam] * q2["Qmuj"][lam][k]
                d[(i + 1, j + 1, al + 1, k + 1)] = (
                    t1 * _ALT + t2 * _HALF - t3 * _ALT - t4 * _ALT
                    - t5 * _HALF - t6 * _HALF)
    fam["anchor5"] = d

    d = {}
    for j in range(sf.nu):
        for m in range(sf.nz):
            for k in range(sf.nu):
                t = zero()
                for i in range(sf.nu):
                    t = t + q2["Qmuj"][m][i] * q1["Qjik"][j][i][k]
                for a, xv in enumerate(X):
                    t = t + q1["Qia"][j][a] * q2["Qmuj"][m][k].partial(xv)
                for be in range(sf.nw):
                    t = t - q1["QmuB"][m][be] * q2["Qiaj"][j][be][k]
                for lam in range(sf.nz):
                    t = t + q1["QmuiL"][m][j][lam] * q2["Qmuj"][lam][k]
                d[(j + 1, m + 1, k + 1)] = t
    fam["anchor6"] = d
    return fam


def printed_bialg_families(sf: DoubleStructureFunctions):
    """Evaluate the reference forms of the nine bialg families.

    Returns a dict mapping family names to dicts of base-chart values
    keyed by 1-based index tuples.  The displays are evaluated on
    orientation-translated side-1 blocks (see ``_reference_q1``); where
    a display is internally inconsistent, the minimal repaired reading
    is evaluated.  See ``PRINT_NOTES`` and ``CORRESPONDENCE``.
    """
    q1, q2, X = _reference_q1(sf), sf.q2, sf.base_vars
    zero = sf.base_chart.zero
    fam: dict[str, dict] = {}

    d: dict = {}
    for m in range(sf.nz):
        for a in range(sf.nx):
            t = zero()
            for al in range(sf.nw):
                t = t + q2["Qaa"][al][a] * q1["QmuB"][m][al]
            for i in range(sf.nu):
                t = t - q2["Qmuj"][m][i] * q1["Qia"][i][a]
            d[(m + 1, a + 1)] = t
    fam["bialg1"] = d

    d = {}
    for m, n in itertools.combinations_with_replacement(range(sf.nz), 2):
        for lam in range(sf.nz):
            t = zero()
            for i in range(sf.nu):
                t = (t + q2["Qmuj"][m][i] * q1["QmuiL"][n][i][lam]
                     + q2["Qmuj"][n][i] * q1["QmuiL"][m][i][lam])
            for al in range(sf.nw):
                t = (t + q1["QmuB"][m][al] * q2["QmuaL"][n][al][lam]
                     + q1["QmuB"][n][al] * q2["QmuaL"][m][al][lam])
            d[(m + 1, n + 1, lam + 1)] = t
    fam["bialg2"] = d

    d = {}
    for j in range(sf.nu):
        for al in range(sf.nw):
            for a in range(sf.nx):
                t = zero()
                for be in range(sf.nw):
                    t = t + q1["QaiB"][al][j][be] * q2["Qaa"][be][a]
                for b, xv in enumerate(X):
                    t = (t + q1["Qia"][j][b] * q2["Qaa"][al][a].partial(xv)
                         + q2["Qaa"][al][b] * q1["Qia"][j][a].partial(xv))
                for i in range(sf.nu):
                    t = t - q2["Qiaj"][j][al][i] * q1["Qia"][i][a]
                d[(j + 1, al + 1, a + 1)] = t
    fam["bialg3"] = d

    d = {}
    for j in range(sf.nu):
        for m in range(sf.nz):
            for i in range(sf.nu):
                t = zero()
                for a, xv in enumerate(X):
                    t = t + q1["Qia"][j][a] * q2["Qmuj"][m][i].partial(xv)
                for k in range(sf.nu):
                    t = t + q2["Qmuj"][m][k] * q1["Qjik"][j][k][i]
                for al in range(sf.nw):
                    t = t - q1["QmuB"][m][al] * q2["Qiaj"][j][al][i]
                for lam in range(sf.nz):
                    t = t - q1["QmuiL"][m][j][lam] * q2["Qmuj"][lam][i]
                d[(j + 1, m + 1, i + 1)] = t
    fam["bialg4"] = d

    d = {}
    for j in range(sf.nu):
        for be in range(sf.nw):
            for m in range(sf.nz):
                for lam in range(sf.nz):
                    t = zero()
                    for i in range(sf.nu):
                        t = t - q2["Qmuj"][m][i] * q1["QajiL"][be][j][i][lam]
                        t = t + q1["QmuiL"][m][i][lam] * q2["Qiaj"][j][be][i]
                    for al in range(sf.nw):
                        t = t - q1["QaiB"][be][j][al] * q2["QmuaL"][m][al][lam]
                        t = t - q1["QmuB"][m][al] * q2["QibaL"][j][be][al][lam]
                    for nu in range(sf.nz):
                        t = (t + q1["QmuiL"][nu][j][lam] * q2["QmuaL"][m][be][nu]
                             - q1["QmuiL"][m][j][nu] * q2["QmuaL"][nu][be][lam])
                    for a, xv in enumerate(X):
                        t = (t + q1["Qia"][j][a] * q2["QmuaL"][m][be][lam].partial(xv)
                             - q2["Qaa"][be][a] * q1["QmuiL"][m][j][lam].partial(xv))
                    d[(j + 1, be + 1, m + 1, lam + 1)] = t
    fam["bialg5"] = d

    d = {}
    for al in range(sf.nw):
        for m in range(sf.nz):
            for g in range(sf.nw):
                t = zero()
                for i in range(sf.nu):
                    t = t + q2["Qmuj"][m][i] * q1["QaiB"][al][i][g]
                for lam in range(sf.nz):
                    t = t - q1["QmuB"][lam][g] * q2["QmuaL"][m][al][lam]
                for be in range(sf.nw):
                    t = t - q1["QmuB"][m][be] * q2["QbaG"][al][be][g]
                for a, xv in enumerate(X):
                    t = t - q2["Qaa"][al][a] * q1["QmuB"][m][g].partial(xv)
                d[(al + 1, m + 1, g + 1)] = t
    fam["bialg6"] = d

    d = {}
    for i, j in itertools.combinations(range(sf.nu), 2):
        for al in range(sf.nw):
            for k in range(sf.nu):
                t = zero()
                for be in range(sf.nw):
                    t = (t - q1["QaiB"][al][j][be] * q2["Qiaj"][i][be][k]
                         + q1["QaiB"][al][i][be] * q2["Qiaj"][j][be][k])
                for l in range(sf.nu):
                    t = (t - q1["Qjik"][j][l][k] * q2["Qiaj"][i][al][l]
                         + q1["Qjik"][i][l][k] * q2["Qiaj"][j][al][l]
                         - q1["Qjik"][i][j][l] * q2["Qiaj"][l][al][k])
                for a, xv in enumerate(X):
                    t = (t - q1["Qia"][j][a] * q2["Qiaj"][i][al][k].partial(xv)
                         + q1["Qia"][i][a] * q2["Qiaj"][j][al][k].partial(xv)
                         - q2["Qaa"][al][a] * q1["Qjik"][i][j][k].partial(xv))
                for m in range(sf.nz):
                    t = t + q1["QajiL"][al][i][j][m] * q2["Qmuj"][m][k]
                d[(i + 1, j + 1, al + 1, k + 1)] = t
    fam["bialg7"] = d

    d = {}
    for i, j in itertools.combinations(range(sf.nu), 2):
        for al, be in itertools.combinations(range(sf.nw), 2):
            for lam in range(sf.nz):
                lhs = zero()
                for l in range(sf.nu):
                    lhs = lhs + q1["Qjik"][i][j][l] * q2["QibaL"][l][be][al][lam]
                for g in range(sf.nw):
                    lhs = lhs + q2["QbaG"][be][al][g] * q1["QajiL"][g][i][j][lam]
                for a, xv in enumerate(X):
                    lhs = (lhs
                           + q2["Qaa"][al][a] * q1["QajiL"][be][i][j][lam].partial(xv)
                           - q2["Qaa"][be][a] * q1["QajiL"][al][i][j][lam].partial(xv))
                for m in range(sf.nz):
                    lhs = (lhs - q1["QajiL"][al][i][j][m] * q2["QmuaL"][m][be][lam]
                           + q1["QajiL"][be][i][j][m] * q2["QmuaL"][m][al][lam])
                rhs = zero()
                for l in range(sf.nu):
                    rhs = (rhs + q1["QajiL"][be][j][l][lam] * q2["Qiaj"][i][al][l]
                           - q1["QajiL"][al][j][l][lam] * q2["Qiaj"][i][be][l]
                           - q1["QajiL"][be][i][l][lam] * q2["Qiaj"][j][al][l]
                           + q1["QajiL"][al][i][l][lam] * q2["Qiaj"][j][be][l])
                for g in range(sf.nw):
                    rhs = (rhs - q1["QaiB"][al][j][g] * q2["QibaL"][i][be][g][lam]
                           + q1["QaiB"][be][j][g] * q2["QibaL"][i][al][g][lam]
                           + q1["QaiB"][al][i][g] * q2["QibaL"][j][be][g][lam]
                           - q1["QaiB"][be][i][g] * q2["QibaL"][j][al][g][lam])
                for a, xv in enumerate(X):
                    rhs = (rhs
                           - q1["Qia"][j][a] * q2["QibaL"][i][be][al][lam].partial(xv)
                           + q1["Qia"][i][a] * q2["QibaL"][j][be][al][lam].partial(xv))
                for m in range(sf.nz):
                    rhs = (rhs - q2["QibaL"][i][be][al][m] * q1["QmuiL"][m][j][lam]
                           + q2["QibaL"][j][be][al][m] * q1["QmuiL"][m][i][lam])
                d[(i + 1, j + 1, al + 1, be + 1, lam + 1)] = lhs - rhs
    fam["bialg8"] = d

    d = {}
    for j in range(sf.nu):
        for al, be in itertools.combinations(range(sf.nw), 2):
            for g in range(sf.nw):
                t = zero()
                for k in range(sf.nu):
                    t = (t + q1["QaiB"][be][k][g] * q2["Qiaj"][j][al][k]
                         - q1["QaiB"][al][k][g] * q2["Qiaj"][j][be][k])
                for lam in range(sf.nz):
                    t = t + q2["QibaL"][j][be][al][lam] * q1["QmuB"][lam][g]
                for ep in range(sf.nw):
                    t = (t + q1["QaiB"][al][j][ep] * q2["QbaG"][be][ep][g]
                         - q1["QaiB"][be][j][ep] * q2["QbaG"][al][ep][g]
                         - q2["QbaG"][be][al][ep] * q1["QaiB"][ep][j][g])
                for a, xv in enumerate(X):
                    t = (t - q1["Qia"][j][a] * q2["QbaG"][be][al][g].partial(xv)
                         - q2["Qaa"][al][a] * q1["QaiB"][be][j][g].partial(xv)
                         + q2["Qaa"][be][a] * q1["QaiB"][al][j][g].partial(xv))
                d[(j + 1, al + 1, be + 1, g + 1)] = t
    fam["bialg9"] = d
    return fam


PRINT_NOTES = (
    "reference forms are evaluated verbatim from their displayed "
    "equations; where a display is internally inconsistent the minimal "
    "repaired reading is evaluated and flagged here",
    "the displays take the side-1 field through the opposite order of "
    "the two shift steps, which reverses the core orientation; the "
    "evaluators therefore negate the two side-1 blocks of net core "
    "degree one (QmuB, QajiL) before comparing, and the scalars in the "
    "correspondence tables are quoted after that translation",
    "the displayed core component of the weight-(1,0) field names a "
    "side-2 index on its core-transport factor where only the side-1 "
    "index is weight-legal; the engine uses the side-1 form",
    "the displayed partial reversion of the weight-(0,1) field carries "
    "a stray side-1 factor in one term and a stray core factor in "
    "another; the engine drops both",
    "one frame-frame entry of the dualized bracket is displayed with a "
    "core generator in its linear part where only a side-1 generator "
    "matches the grading; the engine uses the side-1 generator",
    "the reference form of bialg3 reuses a bound base index as a free "
    "side index; the repaired reading still differs from the engine "
    "class by the sign of one transport term (the engine class matches "
    "the anchor2 form instead)",
    "the reference form of bialg8 omits one contraction factor and "
    "misprints two upper indices; the evaluated form repairs all three",
    "the reference form of bialg9 contains one term whose free indices "
    "do not balance; the evaluated form uses the unique "
    "grading-consistent completion",
)

# Frozen signed correspondence for the supercommutator coefficients.
# ``sign`` relates the two engine computations of each family: the
# supercommutator class equals sign times the Leibniz class of the
# dualized table against the dual field, entry by entry, on every
# instance (pinned once on symbolic-constant data, asserted in tests).
# ``reference_scalar`` relates the supercommutator class to the
# displayed form after the core-orientation translation: class =
# scalar * display when a uniform scalar exists, else 0 — in which
# case the engine residual is authoritative and ``note`` records which
# displayed terms deviate.
CORRESPONDENCE = (
    {"family": "bialg1", "coordinate": "x", "pattern": ("z",),
     "sign": 1, "reference_scalar": -1, "matches_reference": True,
     "note": "uniform match after the core-orientation translation"},
    {"family": "bialg2", "coordinate": "z", "pattern": ("z", "z"),
     "sign": -1, "reference_scalar": 0, "matches_reference": False,
     "note": "the display's two core-contraction pairs (QmuB.QmuaL and "
             "QmuiL.Qmuj) carry a relative sign opposite to the engine "
             "class; no uniform scalar exists"},
    {"family": "bialg3", "coordinate": "x", "pattern": ("xi", "eta"),
     "sign": -1, "reference_scalar": 0, "matches_reference": False,
     "note": "after translation the display deviates only in the sign "
             "of its Qia-transport term (Qaa . d Qia); the engine class "
             "coincides with the anchor2 combination instead"},
    {"family": "bialg4", "coordinate": "xi", "pattern": ("xi", "z"),
     "sign": -1, "reference_scalar": 0, "matches_reference": False,
     "note": "after translation the display deviates only in the sign "
             "of its core-contraction term QmuiL.Qmuj"},
    {"family": "bialg5", "coordinate": "z", "pattern": ("xi", "eta", "z"),
     "sign": 1, "reference_scalar": 0, "matches_reference": False,
     "note": "after translation the display deviates in the signs of "
             "its QajiL.Qmuj term and of both base-transport terms "
             "(Qia . d QmuaL and Qaa . d QmuiL)"},
    {"family": "bialg6", "coordinate": "eta", "pattern": ("eta", "z"),
     "sign": 1, "reference_scalar": 1, "matches_reference": True,
     "note": "uniform match after the core-orientation translation"},
    {"family": "bialg7", "coordinate": "xi", "pattern": ("xi", "xi", "eta"),
     "sign": 1, "reference_scalar": 0, "matches_reference": False,
     "note": "after translation the display deviates in the signs of "
             "its QajiL.Qmuj term and of its Qaa-transport term "
             "(Qaa . d Qjik)"},
    {"family": "bialg8", "coordinate": "z",
     "pattern": ("xi", "xi", "eta", "eta"),
     "sign": -1, "reference_scalar": 0, "matches_reference": False,
     "note": "even after repairing the displayed omissions the display "
             "splits evenly (four product groups each way) against the "
             "engine class, and no reorientation of block signs "
             "reconciles it; the engine residual is authoritative and "
             "the display's status is recorded here rather than "
             "guessed at"},
    {"family": "bialg9", "coordinate": "eta", "pattern": ("xi", "eta", "eta"),
     "sign": -1, "reference_scalar": 0, "matches_reference": False,
     "note": "after translation the repaired display deviates in the "
             "signs of its QaiB.QbaG contraction and of its "
             "Qaa-transport term (Qaa . d QaiB)"},
)

# Same, for the anchor families produced by the relatedness check:
# engine class = sign * displayed form (after the core-orientation
# translation) on every key.  The "-swap" entries are the
# opposite-direction duplicates of the first two families.
_ALT_NOTE = ("the engine keeps one normalized entry per alternated "
             "index pair, so the displayed antisymmetrized sum counts "
             "twice")
ANCHOR_CORRESPONDENCE = (
    {"family": "anchor1", "sign": -1, "matches_reference": True,
     "note": "uniform match after the core-orientation translation"},
    {"family": "anchor2", "sign": -1, "matches_reference": True,
     "note": "uniform match; no translated block enters"},
    {"family": "anchor3", "sign": -2, "matches_reference": True,
     "note": _ALT_NOTE},
    {"family": "anchor4", "sign": 1, "matches_reference": True,
     "note": "uniform match after the core-orientation translation"},
    {"family": "anchor5", "sign": -2, "matches_reference": True,
     "note": _ALT_NOTE},
    {"family": "anchor6", "sign": -1, "matches_reference": True,
     "note": "uniform match after the core-orientation translation"},
    {"family": "anchor1-swap", "sign": -1, "matches_reference": True,
     "note": "uniform match after the core-orientation translation"},
    {"family": "anchor2-swap", "sign": 1, "matches_reference": True,
     "note": "uniform match; no translated block enters"},
)


# -- cotangent double of a pair of anchored brackets --------------------


@dataclass(frozen=True)
class BialgebroidData:
    """A pair of anchored bracket structures over one base, in duality.

    Both structures must share base coordinates and have fibers of equal
    rank and matching parities; the second is read as living on the
    dual frame of the first.
    """

    qe: Antialgebroid
    qestar: Antialgebroid

    def __post_init__(self):
        if self.qe.base != self.qestar.base:
            raise AlgebroidError(
                "the two structures must share base coordinates")
        if len(self.qe.fibers) != len(self.qestar.fibers):
            raise AlgebroidError("the two structures must have equal rank")
        pe = tuple(p for _, p in self.qe.fibers)
        ps = tuple(p for _, p in self.qestar.fibers)
        if pe != ps:
            raise AlgebroidError("fiber parities of the two structures "
                                 "must agree slot by slot")


# Per-parity sign of the conjugate-momentum factor in the Hamiltonian
# of a field, indexed by the coordinate's parity.  Calibrated so that
# the Hamiltonian map is a strict morphism: the Hamiltonian field of
# H_X extends X and {H_X, H_Y} = H_[X,Y].
_HAM_TWIST = (-1, 1)


def _ham_eps(parity: int) -> int:
    return _HAM_TWIST[parity % 2]


def _hamiltonian(table: BracketTable, field: Derivation,
                 conj: Mapping[str, str]) -> Poly:
    """The fiberwise-linear Hamiltonian generating a lifted field."""
    ct = table.chart
    h = ct.zero()
    for v in field.chart.variables:
        c = field.coefficient(v)
        if c.is_zero:
            continue
        h = h + (_on(ct, c) * ct.var(conj[v.name]).poly()
                 * _ham_eps(v.parity))
    return h


def _cotangent_chart(name: str, alg: Antialgebroid) -> Chart:
    ct = Chart(name, weight_len=2)
    for n, p in alg.base:
        ct.add(n, p, (0, 0))
    for n, p in alg.fibers:
        ct.add(n, p, (1, 0))
    for n, p in alg.fibers:
        ct.add(n + "_p", p, (0, 1))
    for n, p in alg.base:
        ct.add(n + "_p", p, (1, 1))
    return ct


def _conjugation_table(ct: Chart, alg: Antialgebroid) -> BracketTable:
    entries = {}
    for n, _ in tuple(alg.base) + tuple(alg.fibers):
        entries[(ct.var(n), ct.var(n + "_p"))] = ct.one()
    return BracketTable(ct, EVEN, entries)


def extract_structure_functions(x1: Derivation, x2: Derivation, base,
                                xi_vars, eta_vars, z_vars,
                                max_degree: int | None = None,
                                ) -> DoubleStructureFunctions:
    """Read tensor blocks off a weight-(1,0)/(0,1) field pair.

    ``xi_vars``/``eta_vars``/``z_vars`` are the weight-(1,0), (0,1) and
    (1,1) coordinates of the common chart, in frame order; ``base``
    lists (name, parity) for the weight-(0,0) coordinates.  Entries are
    recovered by stripping coordinate monomials in display order, with
    graded-symmetric blocks completed from their ordered entries.
    """
    chart = x1.chart
    xi_vars = list(xi_vars)
    eta_vars = list(eta_vars)
    z_vars = list(z_vars)
    base = tuple((str(n), int(p) % 2) for n, p in base)
    base_vars = [chart.var(n) for n, _ in base]
    s1 = [(v.parity + 1) % 2 for v in xi_vars]
    s2 = [(v.parity + 1) % 2 for v in eta_vars]
    co = [v.parity for v in z_vars]
    nx, nu, nw, nz = len(base), len(xi_vars), len(eta_vars), len(z_vars)

    def fill_pair(block, pars, positions, strip_of):
        # ordered entries from strips, mirrors from graded symmetry
        a1, a2 = positions
        for p1 in range(len(pars)):
            for p2 in range(p1, len(pars)):
                sign = _sym_sign(pars[p1], pars[p2])
                if p1 == p2 and sign == -1:
                    continue
                for idx, val in strip_of(p1, p2):
                    e = block
                    for k in idx[:-1]:
                        e = e[k]
                    e[idx[-1]] = val
                    if p1 != p2:
                        mirror = list(idx)
                        mirror[a1], mirror[a2] = idx[a2], idx[a1]
                        e = block
                        for k in mirror[:-1]:
                            e = e[k]
                        e[mirror[-1]] = val * sign
        return block

    def zeros(shape):
        if not shape:
            return chart.zero()
        return [zeros(shape[1:]) for _ in range(shape[0])]

    q1: dict = {}
    q1["Qia"] = [[x1.coefficient(base_vars[a]).coefficient_of([xi_vars[i]])
                  for a in range(nx)] for i in range(nu)]
    q1["Qjik"] = fill_pair(
        zeros((nu, nu, nu)), s1, (0, 1),
        lambda i, j: (((j, i, k),
                       x1.coefficient(xi_vars[k]).coefficient_of(
                           [xi_vars[i], xi_vars[j]]))
                      for k in range(nu)))
    q1["QaiB"] = [[[x1.coefficient(eta_vars[b]).coefficient_of(
        [xi_vars[i], eta_vars[al]]) for b in range(nw)]
        for i in range(nu)] for al in range(nw)]
    q1["QmuB"] = [[x1.coefficient(eta_vars[b]).coefficient_of([z_vars[m]])
                   for b in range(nw)] for m in range(nz)]
    q1["QajiL"] = fill_pair(
        zeros((nw, nu, nu, nz)), s1, (1, 2),
        lambda i, j: (((al, j, i, lam),
                       x1.coefficient(z_vars[lam]).coefficient_of(
                           [xi_vars[i], xi_vars[j], eta_vars[al]]))
                      for al in range(nw) for lam in range(nz)))
    q1["QmuiL"] = [[[x1.coefficient(z_vars[lam]).coefficient_of(
        [xi_vars[i], z_vars[m]]) for lam in range(nz)]
        for i in range(nu)] for m in range(nz)]

    q2: dict = {}
    q2["Qaa"] = [[x2.coefficient(base_vars[a]).coefficient_of([eta_vars[al]])
                  for a in range(nx)] for al in range(nw)]
    q2["Qiaj"] = [[[x2.coefficient(xi_vars[j]).coefficient_of(
        [eta_vars[al], xi_vars[i]]) for j in range(nu)]
        for al in range(nw)] for i in range(nu)]
    q2["Qmuj"] = [[x2.coefficient(xi_vars[j]).coefficient_of([z_vars[m]])
                   for j in range(nu)] for m in range(nz)]
    q2["QbaG"] = fill_pair(
        zeros((nw, nw, nw)), s2, (0, 1),
        lambda al, be: (((be, al, g),
                         x2.coefficient(eta_vars[g]).coefficient_of(
                             [eta_vars[al], eta_vars[be]]))
                        for g in range(nw)))
    q2["QibaL"] = fill_pair(
        zeros((nu, nw, nw, nz)), s2, (1, 2),
        lambda al, be: (((i, be, al, lam),
                         x2.coefficient(z_vars[lam]).coefficient_of(
                             [eta_vars[al], eta_vars[be], xi_vars[i]]))
                        for i in range(nu) for lam in range(nz)))
    q2["QmuaL"] = [[[x2.coefficient(z_vars[lam]).coefficient_of(
        [eta_vars[al], z_vars[m]]) for lam in range(nz)]
        for al in range(nw)] for m in range(nz)]

    if max_degree is None:
        observed = 0
        for blocks in (q1, q2):
            for block in blocks.values():
                stack = [block]
                while stack:
                    node = stack.pop()
                    if isinstance(node, list):
                        stack.extend(node)
                    else:
                        observed = max(observed, node.degree_in(base_vars))
        max_degree = max(DEFAULT_TRUNCATION, observed)
    return DoubleStructureFunctions(base, s1, s2, co, q1, q2,
                                    max_degree=max_degree)


@dataclass(frozen=True)
class CotangentDouble:
    """A dual pair realized as a commuting field pair on one chart."""

    sf: DoubleStructureFunctions
    chart: Chart
    table: BracketTable
    h1: Poly
    h2: Poly
    x1: Derivation
    x2: Derivation
    diagnostics: dict


def cotangent_double(b: BialgebroidData, samples: int = 0,
                     seed: int = 0) -> CotangentDouble:
    """Realize a dual pair on the shifted cotangent chart of one side.

    Both structures must individually pass their consistency checks;
    their compatibility is exactly what the resulting double leaves
    open, and shows up as the (non-)commutation of the two Hamiltonian
    fields.  With ``samples`` positive, the morphism law
    {H_X, H_Y} = H_[X,Y] is additionally spot-checked on random pairs.
    """
    for label, alg in (("first", b.qe), ("second", b.qestar)):
        if not alg.is_consistent():
            raise AlgebroidError(
                "the %s structure fails its own consistency check" % label)
    ct = _cotangent_chart("cotangent", b.qe)
    table = _conjugation_table(ct, b.qe)
    conj1 = {n: n + "_p" for n, _ in tuple(b.qe.base) + tuple(b.qe.fibers)}
    h1 = _hamiltonian(table, b.qe.q_field(), conj1)

    cd = _cotangent_chart("cotangent-dual", b.qestar)
    table_d = _conjugation_table(cd, b.qestar)
    conj2 = {n: n + "_p"
             for n, _ in tuple(b.qestar.base) + tuple(b.qestar.fibers)}
    h2d = _hamiltonian(table_d, b.qestar.q_field(), conj2)
    images = {}
    for k, (n, _) in enumerate(b.qestar.fibers):
        partner = b.qe.fibers[k][0]
        images[cd.var(n)] = ct.var(partner + "_p").poly()
        images[cd.var(n + "_p")] = ct.var(partner).poly()
    h2 = h2d.substitute(images, target=ct)

    x1 = table.hamiltonian_field(h1)
    x2 = table.hamiltonian_field(h2)
    for label, f, want in (("first", x1, (1, 0)), ("second", x2, (0, 1))):
        if f.is_zero:
            continue
        if f.parity() != ODD or f.weight() != want:
            raise DoubleError("internal: the %s lifted field is not an "
                              "odd weight-%s field" % (label, (want,)))

    xi_vars = [ct.var(n) for n, _ in b.qe.fibers]
    eta_vars = [ct.var(n + "_p") for n, _ in b.qe.fibers]
    z_vars = [ct.var(n + "_p") for n, _ in b.qe.base]
    sf = extract_structure_functions(x1, x2, b.qe.base,
                                     xi_vars, eta_vars, z_vars)
    re1 = _side1_field(sf, ct, xi_vars, eta_vars, z_vars)
    re2 = _side2_field(sf, ct, xi_vars, eta_vars, z_vars)
    if re1 != x1 or re2 != x2:
        raise DoubleError("internal: reassembly mismatch on the "
                          "cotangent chart")

    hb = table.bracket(h1, h2)
    diagnostics = {
        "h_bracket": hb.text(),
        "h_bracket_zero": hb.is_zero,
        "fields_commute": commutator(x1, x2).is_zero,
        "weights": {"h1": list(h1.weight()), "h2": list(h2.weight()),
                    "x1": list(x1.weight()), "x2": list(x2.weight())},
    }
    if samples > 0:
        rng = random.Random(seed)
        holds = True
        for _ in range(samples):
            fx = random_field(rng, b.qe.chart)
            fy = random_field(rng, b.qe.chart)
            hx = _hamiltonian(table, fx, conj1)
            hy = _hamiltonian(table, fy, conj1)
            hxy = _hamiltonian(table, commutator(fx, fy), conj1)
            if table.bracket(hx, hy) != hxy:
                holds = False
                break
        diagnostics["hamiltonian_morphism_samples"] = samples
        diagnostics["hamiltonian_morphism_holds"] = holds
    return CotangentDouble(sf, ct, table, h1, h2, x1, x2, diagnostics)


# -- n-fold commutation -------------------------------------------------


def nfold_check(spec, fields: Sequence[Derivation]) -> ConditionReport:
    """Pairwise commutation and squares for n fields on an n-fold chart.

    ``spec`` is the number of directions or an object with an ``n``
    attribute.  Field r (1-based) must be odd of weight e_r.  The
    report carries ``commute`` residuals for distinct pairs, ``square``
    residuals for each field against itself, and a ``bilinear`` family
    confirming that the total field's self-commutator splits into those
    parts.
    """
    n = spec if isinstance(spec, int) else spec.n
    fields = list(fields)
    if len(fields) != n:
        raise DoubleError("expected %d fields, got %d" % (n, len(fields)))
    if not fields:
        return _report("nfold", ())
    chart = fields[0].chart
    for f in fields[1:]:
        if f.chart is not chart:
            raise DoubleError("all fields must live on one chart")
    if chart.weight_len != n:
        raise DoubleError("chart carries %d weight slots, expected %d"
                          % (chart.weight_len, n))
    for r, f in enumerate(fields):
        if f.is_zero:
            continue
        if f.parity() != ODD:
            raise ParityError("field %d must be odd" % (r + 1))
        want = tuple(1 if s == r else 0 for s in range(n))
        got = f.weight()
        if got != want:
            raise WeightError("field %d has weight %s, expected %s"
                              % (r + 1, got, want), [got])
    residuals = []
    parts = {}
    for r in range(n):
        for s in range(r, n):
            if r == s:
                h = commutator(fields[r], fields[r]).scale(_HALF)
                fam = "square"
            else:
                h = commutator(fields[r], fields[s])
                fam = "commute"
            parts[(r, s)] = h
            for v in chart.variables:
                c = h.coefficient(v)
                if not c.is_zero:
                    residuals.append(Residual(fam, (r + 1, s + 1, v.name), c))
    total = fields[0]
    for f in fields[1:]:
        total = total + f
    bil = commutator(total, total).scale(_HALF)
    for h in parts.values():
        bil = bil - h
    for v in chart.variables:
        c = bil.coefficient(v)
        if not c.is_zero:
            residuals.append(Residual("bilinear", (v.name,), c))
    return _report("nfold", residuals)


# -- random data --------------------------------------------------------


def random_poly(rng: random.Random, chart: Chart, parity: int,
                max_degree: int = 1, variables=None,
                coeff_range: int = 3) -> Poly:
    """A sparse parity-homogeneous polynomial with small integer
    coefficients; roughly half of the candidate monomials are dropped.
    """
    vs = list(variables) if variables is not None else list(chart.variables)
    out = chart.zero()
    for deg in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(vs, deg):
            mp = sum(v.parity for v in combo) % 2
            if mp != parity % 2:
                continue
            c = rng.randint(-coeff_range, coeff_range)
            if not c:
                continue
            term = chart.const(c)
            for v in combo:
                term = term * v.poly()
            out = out + term
    return out


def random_field(rng: random.Random, chart: Chart,
                 max_degree: int = 2) -> Derivation:
    """A parity-homogeneous derivation with random polynomial
    coefficients."""
    parity = rng.randint(0, 1)
    coeffs = {}
    for v in chart.variables:
        coeffs[v] = random_poly(rng, chart, (parity + v.parity) % 2,
                                max_degree)
    return Derivation(chart, coeffs)


def random_structure(rng: random.Random, nx: int = 2, side1: int = 2,
                     side2: int = 2, core: int = 2, degree: int = 1,
                     base_parities=None, side1_parities=None,
                     side2_parities=None, core_parities=None,
                     ) -> DoubleStructureFunctions:
    """Random structure functions with all shape and symmetry rules met.

    The generic result fails every nontrivial check, which is exactly
    what the engine cross-validations need.
    """
    bp = (tuple(int(p) % 2 for p in base_parities)
          if base_parities is not None else (0,) * nx)
    s1 = (tuple(int(p) % 2 for p in side1_parities)
          if side1_parities is not None else (0,) * side1)
    s2 = (tuple(int(p) % 2 for p in side2_parities)
          if side2_parities is not None else (0,) * side2)
    co = (tuple(int(p) % 2 for p in core_parities)
          if core_parities is not None else (0,) * core)
    base = [("x%d" % (k + 1), bp[k]) for k in range(nx)]
    tmp = Chart("seed", weight_len=2)
    for n, p in base:
        tmp.add(n, p, (0, 0))
    pars = {"base": bp, "side1": s1, "side2": s2, "core": co}

    def zeros(shape):
        if not shape:
            return tmp.zero()
        return [zeros(shape[1:]) for _ in range(shape[0])]

    def assign(block, idx, value):
        for k in idx[:-1]:
            block = block[k]
        block[idx[-1]] = value

    out = {}
    for key in Q1_KEYS + Q2_KEYS:
        axes = BLOCK_AXES[key]
        shape = tuple(len(pars[k]) for k in axes)
        blk = zeros(shape)
        sym = SYMMETRIC_BLOCKS.get(key)
        for idx in itertools.product(*(range(m) for m in shape)):
            want = sum(pars[k][i] for k, i in zip(axes, idx)) % 2
            if sym is None:
                assign(blk, idx, random_poly(rng, tmp, want, degree))
                continue
            a1, a2 = sym
            if idx[a1] > idx[a2]:
                continue
            sign = _sym_sign(pars[axes[a1]][idx[a1]],
                             pars[axes[a1]][idx[a2]])
            if idx[a1] == idx[a2]:
                if sign == 1:
                    assign(blk, idx, random_poly(rng, tmp, want, degree))
                continue
            e = random_poly(rng, tmp, want, degree)
            assign(blk, idx, e)
            mirror = list(idx)
            mirror[a1], mirror[a2] = idx[a2], idx[a1]
            assign(blk, tuple(mirror), e * sign)
        out[key] = blk
    q1 = {k: out[k] for k in Q1_KEYS}
    q2 = {k: out[k] for k in Q2_KEYS}
    return DoubleStructureFunctions(base, s1, s2, co, q1, q2,
                                    max_degree=max(degree,
                                                   DEFAULT_TRUNCATION))
