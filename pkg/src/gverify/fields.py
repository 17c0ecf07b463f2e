"""Graded derivations and coordinate bracket tables.

A derivation is stored through its coefficients: X = sum_v X^v d_v with
the coefficient written to the left of the partial derivative.  A
bracket table stores the values of a graded biderivation on coordinate
pairs and extends them to arbitrary polynomials by the Leibniz rules

    {f, g*h} = {f, g}*h + (-1)^((pf + eps)*pg) * g * {f, h}
    {f, g}   = -(-1)^((pf + eps)*(pg + eps)) * {g, f}

where eps is the parity of the bracket (0: Poisson-type, 1: Schouten-type).
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Mapping

from .kernel import (
    EVEN,
    ODD,
    Chart,
    ChartMismatchError,
    KernelError,
    ParityError,
    Poly,
    Variable,
    WeightError,
)


class Derivation:
    """A vector field on a chart, coefficients left of the derivatives."""

    __slots__ = ("chart", "coeffs")

    def __init__(self, chart: Chart, coeffs: Mapping[Variable, Poly]):
        self.chart = chart
        clean: dict[int, Poly] = {}
        for v, p in coeffs.items():
            if v.chart is not chart:
                raise ChartMismatchError("coefficient key %r not from chart %r" % (v.name, chart.name))
            if p.chart is not chart:
                raise ChartMismatchError("coefficient of %r lives on the wrong chart" % v.name)
            if not p.is_zero:
                clean[v.index] = p
        self.coeffs = clean

    def coefficient(self, v: Variable) -> Poly:
        return self.coeffs.get(v.index, self.chart.zero())

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def parity(self) -> int:
        """Common parity of X^v d_v terms; zero field counts as even."""
        p = None
        vars_ = self.chart.variables
        for idx, c in self.coeffs.items():
            tp = (c.parity() + vars_[idx].parity) % 2
            if p is None:
                p = tp
            elif p != tp:
                raise ParityError("derivation mixes parities")
        return EVEN if p is None else p

    def weight(self) -> tuple[int, ...]:
        """Common weight of the terms X^v d_v (weight of X^v minus that of v)."""
        w = None
        vars_ = self.chart.variables
        for idx, c in self.coeffs.items():
            cw = c.weight()
            vw = vars_[idx].weight
            tw = tuple(a - b for a, b in zip(cw, vw))
            if w is None:
                w = tw
            elif w != tw:
                raise WeightError("derivation mixes weights: %s vs %s" % (w, tw), [w, tw])
        return w if w is not None else (0,) * self.chart.weight_len

    def apply(self, f: Poly) -> Poly:
        if f.chart is not self.chart:
            raise ChartMismatchError("argument lives on a different chart")
        out = self.chart.zero()
        vars_ = self.chart.variables
        for idx, c in self.coeffs.items():
            d = f.partial(vars_[idx])
            if not d.is_zero:
                out = out + c * d
        return out

    def __call__(self, f: Poly) -> Poly:
        return self.apply(f)

    # pointwise module structure (used to form residual combinations)

    def __add__(self, other: "Derivation") -> "Derivation":
        if other.chart is not self.chart:
            raise ChartMismatchError("derivations on different charts")
        vars_ = self.chart.variables
        merged: dict[Variable, Poly] = {}
        for idx in set(self.coeffs) | set(other.coeffs):
            v = vars_[idx]
            merged[v] = self.coefficient(v) + other.coefficient(v)
        return Derivation(self.chart, merged)

    def __neg__(self) -> "Derivation":
        vars_ = self.chart.variables
        return Derivation(self.chart, {vars_[i]: -c for i, c in self.coeffs.items()})

    def __sub__(self, other: "Derivation") -> "Derivation":
        return self + (-other)

    def scale(self, q) -> "Derivation":
        q = Fraction(q)
        vars_ = self.chart.variables
        return Derivation(self.chart, {vars_[i]: c * q for i, c in self.coeffs.items()})

    def __eq__(self, other):
        return (
            isinstance(other, Derivation)
            and self.chart is other.chart
            and self.coeffs == other.coeffs
        )

    __hash__ = None

    def __repr__(self) -> str:
        vars_ = self.chart.variables
        parts = [
            "(%s)*d_%s" % (self.coeffs[i].text(), vars_[i].name)
            for i in sorted(self.coeffs)
        ]
        return "Derivation(%s)" % (" + ".join(parts) if parts else "0")


def commutator(x: Derivation, y: Derivation) -> Derivation:
    """Graded commutator [X, Y] = X Y - (-1)^(px py) Y X as a derivation."""
    if x.chart is not y.chart:
        raise ChartMismatchError("commutator of derivations on different charts")
    chart = x.chart
    sign = -1 if (x.parity() & y.parity()) else 1
    vars_ = chart.variables
    coeffs: dict[Variable, Poly] = {}
    for idx in set(x.coeffs) | set(y.coeffs):
        v = vars_[idx]
        c = x.apply(y.coefficient(v)) - y.apply(x.coefficient(v)) * sign
        coeffs[v] = c
    return Derivation(chart, coeffs)


def homological_residual(q: Derivation) -> Derivation:
    """[Q, Q]/2; zero exactly when the odd field Q squares to zero."""
    if q.is_zero:
        return q
    if q.parity() != ODD:
        raise ParityError("homological test requires an odd field")
    return commutator(q, q).scale(Fraction(1, 2))


def is_homological(q: Derivation) -> bool:
    return homological_residual(q).is_zero


def related(
    pullback: Mapping[Variable, Poly], x: Derivation, y: Derivation
) -> dict[Variable, Poly]:
    """Residuals of phi-relatedness of X (source) and Y (target).

    `pullback` sends each target-chart generator to its expression on the
    source chart; generators left out resolve by name.  For every target
    generator g the residual X(phi* g) - phi*(Y(g)) is returned; X and Y
    are related when all residuals vanish.
    """
    source = x.chart
    target = y.chart
    images = dict(pullback)
    out: dict[Variable, Poly] = {}
    for g in target.variables:
        lhs = x.apply(g.poly().substitute(images, target=source))
        rhs = y.apply(g.poly()).substitute(images, target=source)
        out[g] = lhs - rhs
    return out


class BracketTable:
    """A graded biderivation given by its values on coordinate pairs.

    Entries are stored on index-ordered pairs (v, w) with v.index <=
    w.index; the transposed value follows from graded antisymmetry.  The
    parity rule parity({v,w}) = pv + pw + eps is enforced, as is the
    vanishing of {v, v} whenever antisymmetry forces it.
    """

    __slots__ = ("chart", "eps", "entries")

    def __init__(self, chart: Chart, eps: int, entries: Mapping[tuple[Variable, Variable], Poly]):
        if eps not in (EVEN, ODD):
            raise ParityError("bracket parity must be 0 or 1")
        self.chart = chart
        self.eps = eps
        table: dict[tuple[int, int], Poly] = {}
        for (v, w), p in entries.items():
            if v.chart is not chart or w.chart is not chart:
                raise ChartMismatchError("table key not from chart %r" % chart.name)
            if p.chart is not chart:
                raise ChartMismatchError("table entry lives on the wrong chart")
            if p.is_zero:
                continue
            if v.index > w.index:
                sign = -1 if ((v.parity ^ eps) & (w.parity ^ eps)) else 1
                v, w = w, v
                p = p * (-sign)
            key = (v.index, w.index)
            if key in table:
                raise KernelError("duplicate table entry for (%s, %s)" % (v.name, w.name))
            if p.parity() != (v.parity + w.parity + eps) % 2:
                raise ParityError(
                    "entry {%s, %s} must have parity %d"
                    % (v.name, w.name, (v.parity + w.parity + eps) % 2)
                )
            if v.index == w.index and ((v.parity + eps) % 2 == 0):
                raise KernelError(
                    "{%s, %s} must vanish by graded antisymmetry" % (v.name, v.name)
                )
            table[key] = p
        self.entries = table

    def value(self, v: Variable, w: Variable) -> Poly:
        """{v, w} for chart generators, with the antisymmetry sign applied."""
        if v.index <= w.index:
            p = self.entries.get((v.index, w.index))
            return p if p is not None else self.chart.zero()
        p = self.entries.get((w.index, v.index))
        if p is None:
            return self.chart.zero()
        sign = -1 if ((v.parity ^ self.eps) & (w.parity ^ self.eps)) else 1
        return p * (-sign)

    def _row_derivation(self, v: Variable) -> Derivation:
        # {v, .} is a derivation of parity pv + eps
        coeffs = {w: self.value(v, w) for w in self.chart.variables}
        return Derivation(self.chart, coeffs)

    def bracket(self, f: Poly, g: Poly) -> Poly:
        """Extend the table to arbitrary polynomials by the Leibniz rules."""
        if f.chart is not self.chart or g.chart is not self.chart:
            raise ChartMismatchError("bracket arguments must live on the table's chart")
        out = self.chart.zero()
        for mono, coeff in f.terms.items():
            out = out + self._bracket_mono(mono, g) * coeff
        return out

    def _bracket_mono(self, mono, g: Poly) -> Poly:
        # {v * rest, g} = (-1)^((pg + eps) * p(rest)) {v, g} * rest + v * {rest, g}
        chart = self.chart
        if not mono:
            return chart.zero()
        vars_ = chart.variables
        idx, exp = mono[0]
        v = vars_[idx]
        rest = mono[1:] if exp == 1 else ((idx, exp - 1),) + mono[1:]
        first = self._row_derivation(v).apply(g)
        if not rest:
            return first
        rest_poly = Poly(chart, {rest: Fraction(1)})
        rest_parity = rest_poly.parity()
        try:
            g_parity = g.parity()
        except ParityError:
            # split inhomogeneous second arguments and recurse linearly
            out = chart.zero()
            for m2, c2 in g.terms.items():
                out = out + self._bracket_mono(mono, Poly(chart, {m2: c2}))
            return out
        sign = -1 if ((g_parity ^ self.eps) & rest_parity) else 1
        out = first * rest_poly * sign
        out = out + v.poly() * self._bracket_mono(rest, g)
        return out

    def leibniz_residuals(self, q: Derivation) -> dict[tuple[Variable, Variable], Poly]:
        """Failure of Q to be a derivation of the bracket, on generator pairs.

        residual(v, w) = Q({v,w}) - {Q(v), w} - (-1)^(pQ*(pv+eps)) {v, Q(w)}

        Because both sides are biderivations in (v, w), vanishing on all
        generator pairs is equivalent to vanishing on all polynomials.
        """
        pq = q.parity()
        out: dict[tuple[Variable, Variable], Poly] = {}
        gens = self.chart.variables
        for i, v in enumerate(gens):
            for w in gens[i:]:
                r = q.apply(self.value(v, w))
                r = r - self.bracket(q.apply(v.poly()), w.poly())
                sign = -1 if (pq & ((v.parity ^ self.eps) & 1)) else 1
                r = r - self.bracket(v.poly(), q.apply(w.poly())) * sign
                out[(v, w)] = r
        return out

    def jacobi_residuals(self) -> dict[tuple[Variable, Variable, Variable], Poly]:
        """Graded Jacobi identity on generator triples.

        residual(u,v,w) = {u,{v,w}} - {{u,v},w} - (-1)^((pu+eps)(pv+eps)) {v,{u,w}}
        """
        out: dict[tuple[Variable, Variable, Variable], Poly] = {}
        eps = self.eps
        for u, v, w in combinations_with_replacement(self.chart.variables, 3):
            r = self.bracket(u.poly(), self.bracket(v.poly(), w.poly()))
            r = r - self.bracket(self.bracket(u.poly(), v.poly()), w.poly())
            sign = -1 if ((u.parity ^ eps) & (v.parity ^ eps)) else 1
            r = r - self.bracket(v.poly(), self.bracket(u.poly(), w.poly())) * sign
            out[(u, v, w)] = r
        return out

    def hamiltonian_field(self, h: Poly) -> Derivation:
        """The derivation {h, .}."""
        coeffs = {v: self.bracket(h, v.poly()) for v in self.chart.variables}
        return Derivation(self.chart, coeffs)
