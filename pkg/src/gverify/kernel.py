"""Exact supercommutative polynomial arithmetic over tagged coordinates.

Every computation in this package reduces to algebra in a ring of
polynomials whose generators carry a parity (0 or 1) and an integer
weight vector.  Odd generators anticommute and square to zero; all
coefficients are exact rationals.  A ``Chart`` owns an ordered set of
generators, a ``Poly`` is a sparse sum of canonically ordered monomials.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence

EVEN = 0
ODD = 1

# A monomial is a tuple of (variable index, exponent) pairs, ascending in
# the variable index.  Odd variables always carry exponent 1.  The Koszul
# sign produced while sorting factors is folded into the coefficient, so
# a stored monomial is always the sign-free canonical representative.
Mono = tuple[tuple[int, int], ...]

_ONE: Mono = ()


class KernelError(Exception):
    """Base class for algebra errors raised by this module."""


class ChartMismatchError(KernelError):
    pass


class ParityError(KernelError):
    pass


class WeightError(KernelError):
    def __init__(self, message: str, weights: Sequence[tuple[int, ...]] = ()):
        super().__init__(message)
        self.weights = tuple(weights)


class NormalizationError(KernelError):
    """An explicit power of an odd generator (and similar degeneracies)."""


class ExprError(KernelError):
    """Parse failure, carrying 1-based line/column of the offending token."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__("%s (line %d, column %d)" % (message, line, column))
        self.line = line
        self.column = column


class Variable:
    __slots__ = ("chart", "name", "parity", "weight", "index")

    def __init__(self, chart: "Chart", name: str, parity: int, weight: tuple[int, ...], index: int):
        self.chart = chart
        self.name = name
        self.parity = parity
        self.weight = weight
        self.index = index

    @property
    def is_odd(self) -> bool:
        return self.parity == ODD

    def poly(self) -> "Poly":
        return Poly(self.chart, {((self.index, 1),): Fraction(1)})

    def __repr__(self) -> str:
        return "Variable(%r, parity=%d, weight=%r)" % (self.name, self.parity, self.weight)


class Chart:
    """An ordered collection of parity/weight tagged generators.

    The declaration order fixes the canonical monomial order; builders are
    expected to declare base coordinates first and fiber families after.
    """

    def __init__(self, name: str, weight_len: int = 1):
        if weight_len < 0:
            raise KernelError("weight length must be non-negative")
        self.name = name
        self.weight_len = weight_len
        self.variables: list[Variable] = []
        self._by_name: dict[str, Variable] = {}
        self._parities: list[int] = []

    def add(self, name: str, parity: int = EVEN, weight: Sequence[int] | None = None) -> Variable:
        if name in self._by_name:
            raise KernelError("duplicate variable %r in chart %r" % (name, self.name))
        if parity not in (EVEN, ODD):
            raise ParityError("parity of %r must be 0 or 1, got %r" % (name, parity))
        w = tuple(weight) if weight is not None else (0,) * self.weight_len
        if len(w) != self.weight_len:
            raise WeightError(
                "variable %r has weight of length %d, chart %r uses %d"
                % (name, len(w), self.name, self.weight_len)
            )
        v = Variable(self, name, parity, w, len(self.variables))
        self.variables.append(v)
        self._by_name[name] = v
        self._parities.append(parity)
        return v

    def add_family(
        self, names: Iterable[str], parities: Iterable[int], weight: Sequence[int]
    ) -> tuple[Variable, ...]:
        return tuple(self.add(n, p, weight) for n, p in zip(names, parities, strict=True))

    def var(self, name: str) -> Variable:
        try:
            return self._by_name[name]
        except KeyError:
            raise KernelError("chart %r has no variable %r" % (self.name, name)) from None

    def has(self, name: str) -> bool:
        return name in self._by_name

    def zero(self) -> "Poly":
        return Poly(self, {})

    def one(self) -> "Poly":
        return self.const(1)

    def const(self, value) -> "Poly":
        q = Fraction(value)
        return Poly(self, {} if q == 0 else {_ONE: q})

    def poly(self, text: str, strict_odd_powers: bool = False) -> "Poly":
        """Parse an expression in this chart's generators."""
        return _parse(self, text, strict_odd_powers)

    def __repr__(self) -> str:
        return "Chart(%r, %d variables)" % (self.name, len(self.variables))


def _mono_parity(chart: Chart, mono: Mono) -> int:
    p = 0
    par = chart._parities
    for idx, exp in mono:
        p ^= par[idx] & exp
    return p & 1


def _merge_monos(chart: Chart, m1: Mono, m2: Mono):
    """Concatenate two canonical monomials, returning (mono, sign).

    Returns None when an odd generator repeats (its square vanishes).
    The sign counts transpositions of odd pairs needed to interleave the
    second factor sequence into the first.
    """
    if not m1:
        return m2, 1
    if not m2:
        return m1, 1
    par = chart._parities
    # suffix count of odd factors of m1 from position i onward
    n1 = len(m1)
    odd_suffix = [0] * (n1 + 1)
    for i in range(n1 - 1, -1, -1):
        odd_suffix[i] = odd_suffix[i + 1] + (par[m1[i][0]] & 1)
    out: list[tuple[int, int]] = []
    sign = 1
    i = j = 0
    while i < n1 and j < len(m2):
        i1, e1 = m1[i]
        i2, e2 = m2[j]
        if i1 < i2:
            out.append((i1, e1))
            i += 1
        elif i1 > i2:
            if par[i2] and (odd_suffix[i] & 1):
                sign = -sign
            out.append((i2, e2))
            j += 1
        else:
            if par[i1]:
                return None
            out.append((i1, e1 + e2))
            i += 1
            j += 1
    out.extend(m1[i:])
    out.extend(m2[j:])
    return tuple(out), sign


class Poly:
    """A sparse polynomial: mapping from canonical monomials to rationals."""

    __slots__ = ("chart", "terms")

    def __init__(self, chart: Chart, terms: dict[Mono, Fraction]):
        self.chart = chart
        self.terms = terms

    # -- constructors -------------------------------------------------

    @staticmethod
    def monomial(variables: Sequence[Variable], coeff=1) -> "Poly":
        """Product of the given variables (in the given order) times coeff."""
        if not variables:
            raise KernelError("monomial() needs at least one variable; use Chart.const")
        chart = variables[0].chart
        acc = chart.const(coeff)
        for v in variables:
            if v.chart is not chart:
                raise ChartMismatchError("variables from different charts")
            acc = acc * v.poly()
        return acc

    # -- helpers ------------------------------------------------------

    def _check(self, other: "Poly"):
        if self.chart is not other.chart:
            raise ChartMismatchError(
                "operands live on different charts (%r vs %r)"
                % (self.chart.name, other.chart.name)
            )

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    # -- ring operations ----------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Poly):
            other = self.chart.const(other)
        self._check(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            s = terms.get(m)
            if s is None:
                terms[m] = c
            else:
                s = s + c
                if s:
                    terms[m] = s
                else:
                    del terms[m]
        return Poly(self.chart, terms)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.chart, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Poly):
            other = self.chart.const(other)
        return self.__add__(other.__neg__())

    def __rsub__(self, other):
        return self.chart.const(other).__sub__(self)

    def __mul__(self, other):
        if not isinstance(other, Poly):
            q = Fraction(other)
            if q == 0:
                return self.chart.zero()
            return Poly(self.chart, {m: c * q for m, c in self.terms.items()})
        self._check(other)
        chart = self.chart
        terms: dict[Mono, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                merged = _merge_monos(chart, m1, m2)
                if merged is None:
                    continue
                m, sign = merged
                c = c1 * c2 if sign > 0 else -c1 * c2
                s = terms.get(m)
                if s is None:
                    terms[m] = c
                else:
                    s = s + c
                    if s:
                        terms[m] = s
                    else:
                        del terms[m]
        return Poly(chart, terms)

    def __rmul__(self, other):
        # scalars commute with everything, so this is safe
        return self.__mul__(other)

    def __pow__(self, n: int):
        if n < 0:
            raise KernelError("negative powers are not defined")
        result = self.chart.one()
        for _ in range(n):
            result = result * self
        return result

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.chart is other.chart and self.terms == other.terms
        return self.terms == self.chart.const(other).terms

    __hash__ = None

    # -- graded structure ---------------------------------------------

    def parity(self) -> int:
        """Parity of a parity-homogeneous polynomial (0 for the zero poly)."""
        p = None
        for m in self.terms:
            mp = _mono_parity(self.chart, m)
            if p is None:
                p = mp
            elif p != mp:
                raise ParityError("polynomial mixes even and odd terms")
        return EVEN if p is None else p

    def parity_or_none(self):
        try:
            return self.parity()
        except ParityError:
            return None

    @property
    def is_parity_homogeneous(self) -> bool:
        return self.parity_or_none() is not None

    def weight(self) -> tuple[int, ...]:
        """Weight vector of a weight-homogeneous polynomial.

        The zero polynomial has every weight; by convention the zero
        vector is returned.  Inhomogeneous input raises WeightError
        listing the distinct weights found.
        """
        found: list[tuple[int, ...]] = []
        vars_ = self.chart.variables
        for m in self.terms:
            w = [0] * self.chart.weight_len
            for idx, exp in m:
                vw = vars_[idx].weight
                for k in range(len(w)):
                    w[k] += vw[k] * exp
            tw = tuple(w)
            if tw not in found:
                found.append(tw)
        if not found:
            return (0,) * self.chart.weight_len
        if len(found) > 1:
            found.sort()
            raise WeightError(
                "polynomial mixes weights: %s" % ", ".join(map(str, found)), found
            )
        return found[0]

    def degree_in(self, variables: Iterable[Variable]) -> int:
        """Maximal total degree in the given variables (0 for zero poly)."""
        idxs = {v.index for v in variables}
        deg = 0
        for m in self.terms:
            d = sum(exp for idx, exp in m if idx in idxs)
            deg = max(deg, d)
        return deg

    def truncate_in(self, variables: Iterable[Variable], max_degree: int) -> "Poly":
        """Drop terms whose total degree in `variables` exceeds max_degree."""
        idxs = {v.index for v in variables}
        terms = {
            m: c
            for m, c in self.terms.items()
            if sum(exp for idx, exp in m if idx in idxs) <= max_degree
        }
        return Poly(self.chart, terms)

    def coefficient_of(self, variables: Sequence[Variable]) -> "Poly":
        """Left coefficient of the monomial formed by `variables`.

        Computed by iterated left derivatives, stripping the leading
        variable first, so for odd factors the appropriate Koszul signs
        are produced.  Each variable may appear once; the result no
        longer involves the stripped variables.
        """
        p = self
        for v in variables:
            p = p.partial(v)
        return p

    # -- calculus -----------------------------------------------------

    def partial(self, v: Variable) -> "Poly":
        """Left partial derivative with respect to a generator.

        The generator is commuted to the front of each monomial (picking
        up a Koszul sign from the odd factors it crosses) and stripped.
        """
        if v.chart is not self.chart:
            raise ChartMismatchError("derivative variable from a different chart")
        par = self.chart._parities
        terms: dict[Mono, Fraction] = {}
        target = v.index
        for m, c in self.terms.items():
            odd_before = 0
            for pos, (idx, exp) in enumerate(m):
                if idx == target:
                    if par[target] and (odd_before & 1):
                        c2 = -c
                    else:
                        c2 = c
                    if exp > 1:
                        c2 = c2 * exp
                        nm = m[:pos] + ((idx, exp - 1),) + m[pos + 1 :]
                    else:
                        nm = m[:pos] + m[pos + 1 :]
                    s = terms.get(nm)
                    if s is None:
                        terms[nm] = c2
                    else:
                        s = s + c2
                        if s:
                            terms[nm] = s
                        else:
                            del terms[nm]
                    break
                if par[idx]:
                    odd_before += exp
        return Poly(self.chart, terms)

    def substitute(
        self,
        images: Mapping[Variable, "Poly"] | None = None,
        target: Chart | None = None,
    ) -> "Poly":
        """Apply an algebra map determined by generator images.

        Unmapped generators resolve to the same-named generator of the
        target chart (which is the chart of the first image, or this
        chart, when not given).  Images must be parity-homogeneous of the
        parity of the generator they replace.
        """
        images = dict(images) if images else {}
        if target is None:
            for img in images.values():
                target = img.chart
                break
            else:
                target = self.chart
        resolved: dict[int, Poly] = {}
        for v, img in images.items():
            if v.chart is not self.chart:
                raise ChartMismatchError("substitution key %r not from this chart" % v.name)
            if img.chart is not target:
                raise ChartMismatchError("image of %r lives on the wrong chart" % v.name)
            if not img.is_zero and img.parity_or_none() != v.parity:
                raise ParityError(
                    "image of %r must be parity-homogeneous of parity %d" % (v.name, v.parity)
                )
            resolved[v.index] = img
        out = target.zero()
        src_vars = self.chart.variables
        for m, c in self.terms.items():
            acc = target.const(c)
            for idx, exp in m:
                img = resolved.get(idx)
                if img is None:
                    sv = src_vars[idx]
                    if target is self.chart:
                        img = sv.poly()
                    else:
                        if not target.has(sv.name):
                            raise ChartMismatchError(
                                "no image given for %r and target chart %r has no such name"
                                % (sv.name, target.name)
                            )
                        tv = target.var(sv.name)
                        if tv.parity != sv.parity:
                            raise ParityError(
                                "name-resolved image of %r changes parity" % sv.name
                            )
                        img = tv.poly()
                    resolved[idx] = img
                for _ in range(exp):
                    acc = acc * img
                if acc.is_zero:
                    break
            out = out + acc
        return out

    # -- rendering ----------------------------------------------------

    def text(self) -> str:
        """Deterministic rendering that re-parses to the same polynomial."""
        if not self.terms:
            return "0"
        vars_ = self.chart.variables
        parts: list[str] = []
        for m in sorted(self.terms):
            c = self.terms[m]
            factors = []
            for idx, exp in m:
                name = vars_[idx].name
                factors.append(name if exp == 1 else "%s^%d" % (name, exp))
            body = "*".join(factors)
            if not factors:
                mag = str(abs(c))
            elif abs(c) == 1:
                mag = body
            else:
                mag = "%s*%s" % (abs(c), body)
            if not parts:
                parts.append(mag if c > 0 else "-" + mag)
            else:
                parts.append((" + " if c > 0 else " - ") + mag)
        return "".join(parts)

    def __str__(self) -> str:
        return self.text()

    def __repr__(self) -> str:
        return "Poly(%s)" % self.text()


# ---------------------------------------------------------------------------
# expression parsing


_TOKEN_NUM = "num"
_TOKEN_NAME = "name"
_TOKEN_OP = "op"
_TOKEN_END = "end"


def _tokenize(text: str):
    tokens = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        start_col = col
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append((_TOKEN_NUM, text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_'"):
                j += 1
            tokens.append((_TOKEN_NAME, text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch in "+-*^()/":
            tokens.append((_TOKEN_OP, ch, line, start_col))
            i += 1
            col += 1
            continue
        raise ExprError("unexpected character %r" % ch, line, start_col)
    tokens.append((_TOKEN_END, "", line, col))
    return tokens


class _Parser:
    def __init__(self, chart: Chart, text: str, strict_odd_powers: bool):
        self.chart = chart
        self.tokens = _tokenize(text)
        self.pos = 0
        self.strict = strict_odd_powers

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def fail(self, message, token=None):
        kind, value, line, col = token or self.peek()
        raise ExprError(message, line, col)

    def parse(self) -> Poly:
        p = self.expr()
        kind, value, line, col = self.peek()
        if kind != _TOKEN_END:
            self.fail("unexpected %r after expression" % value)
        return p

    def expr(self) -> Poly:
        p = self.term()
        while True:
            kind, value, _, _ = self.peek()
            if kind == _TOKEN_OP and value in "+-":
                self.take()
                q = self.term()
                p = p + q if value == "+" else p - q
            else:
                return p

    def term(self) -> Poly:
        p = self.unary()
        while True:
            kind, value, _, _ = self.peek()
            if kind == _TOKEN_OP and value == "*":
                self.take()
                p = p * self.unary()
            else:
                return p

    def unary(self) -> Poly:
        kind, value, _, _ = self.peek()
        if kind == _TOKEN_OP and value == "-":
            self.take()
            return -self.unary()
        return self.power()

    def power(self) -> Poly:
        base, base_tok = self.atom()
        kind, value, _, _ = self.peek()
        if kind == _TOKEN_OP and value == "^":
            self.take()
            ekind, evalue, eline, ecol = self.take()
            if ekind != _TOKEN_NUM:
                raise ExprError("exponent must be a non-negative integer", eline, ecol)
            exp = int(evalue)
            if self.strict and exp >= 2 and base_tok is not None:
                v = base_tok
                if v.parity == ODD:
                    raise NormalizationError(
                        "odd variable %r raised to power %d" % (v.name, exp)
                    )
            return base**exp
        return base

    def atom(self):
        kind, value, line, col = self.take()
        if kind == _TOKEN_NUM:
            num = int(value)
            pk, pv, _, _ = self.peek()
            if pk == _TOKEN_OP and pv == "/":
                self.take()
                dkind, dvalue, dline, dcol = self.take()
                if dkind != _TOKEN_NUM:
                    raise ExprError("denominator must be an integer", dline, dcol)
                den = int(dvalue)
                if den == 0:
                    raise ExprError("zero denominator", dline, dcol)
                return self.chart.const(Fraction(num, den)), None
            return self.chart.const(num), None
        if kind == _TOKEN_NAME:
            if not self.chart.has(value):
                raise ExprError("unknown variable %r" % value, line, col)
            v = self.chart.var(value)
            return v.poly(), v
        if kind == _TOKEN_OP and value == "(":
            p = self.expr()
            ck, cv, cline, ccol = self.take()
            if not (ck == _TOKEN_OP and cv == ")"):
                raise ExprError("expected ')'", cline, ccol)
            return p, None
        if kind == _TOKEN_OP and value == "/":
            raise ExprError("'/' is only allowed between integer literals", line, col)
        raise ExprError("unexpected %r" % (value or "end of input"), line, col)


def _parse(chart: Chart, text: str, strict_odd_powers: bool) -> Poly:
    return _Parser(chart, text, strict_odd_powers).parse()
