"""Anchored bracket structures encoded as degree-one odd fields.

The data lives on a chart with base coordinates (weight 0) and
parity-shifted fiber coordinates (weight 1): the fiber coordinate for a
frame section e_i carries the opposite parity.  An anchor tensor and a
structure tensor assemble into the odd weight-one field

    Q = xi^i Q_i^a d/dx^a  +  1/2 xi^i xi^j Q_ji^k d/dxi^k

and Q squaring to zero is equivalent to the anchored graded Jacobi
identities of the underlying bracket.  The module exposes both sides:
the field with its square, and frame-level brackets, anchor
compatibility and Jacobi residuals computed directly, so either can
serve as a check on the other.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Sequence

from .fields import Derivation, commutator, homological_residual
from .kernel import (
    EVEN,
    ODD,
    Chart,
    KernelError,
    ParityError,
    Poly,
    Variable,
)


class AlgebroidError(KernelError):
    """Malformed anchored-bracket data."""


Section = Sequence[Poly]


class Antialgebroid:
    """Base + shifted fiber chart with anchor and structure tensors.

    `base` lists (name, parity) for base coordinates; `fibers` lists
    (name, parity) for the shifted fiber coordinates, so an ordinary
    even frame section has an odd fiber coordinate here.  `anchor[i][a]`
    and `structure[i][j][k]` are base functions; `structure[i][j][k]`
    is the coefficient written against the (i, j) frame pair and must
    obey the shifted symmetry structure[j][i] = (-1)^(pxi_i pxi_j)
    structure[i][j].
    """

    def __init__(
        self,
        base: Sequence[tuple[str, int]],
        fibers: Sequence[tuple[str, int]],
        anchor,
        structure,
    ):
        self.base = tuple((n, int(p)) for n, p in base)
        self.fibers = tuple((n, int(p)) for n, p in fibers)
        chart = Chart("algebroid", 1)
        for n, p in self.base:
            chart.add(n, p, (0,))
        for n, p in self.fibers:
            chart.add(n, p, (1,))
        self.chart = chart
        self.base_vars = [chart.var(n) for n, _ in self.base]
        self.fiber_vars = [chart.var(n) for n, _ in self.fibers]
        nb, nf = len(self.base), len(self.fibers)
        self.anchor = self._table(anchor, (nf, nb))
        self.structure = self._table(structure, (nf, nf, nf))
        self._validate()
        self._q = None

    def _table(self, data, shape):
        if data is None:
            def zeros(s):
                if not s:
                    return self.chart.zero()
                return [zeros(s[1:]) for _ in range(s[0])]

            return zeros(shape)

        def walk(node, s):
            if not s:
                if isinstance(node, Poly):
                    return node if node.chart is self.chart else node.substitute({}, target=self.chart)
                if isinstance(node, str):
                    return self.chart.poly(node)
                return self.chart.const(node)
            if len(node) != s[0]:
                raise AlgebroidError("tensor axis has length %d, expected %d" % (len(node), s[0]))
            return [walk(child, s[1:]) for child in node]

        return walk(data, shape)

    def _validate(self):
        nf = len(self.fibers)
        fpar = [v.parity for v in self.fiber_vars]
        bpar = [v.parity for v in self.base_vars]
        for i in range(nf):
            for a in range(len(self.base)):
                entry = self.anchor[i][a]
                self._base_only(entry, "anchor[%d][%d]" % (i, a))
                want = (1 + fpar[i] + bpar[a]) % 2
                if not entry.is_zero and entry.parity_or_none() != want:
                    raise ParityError(
                        "anchor[%d][%d] must have parity %d" % (i, a, want)
                    )
        for i in range(nf):
            for j in range(nf):
                for k in range(nf):
                    entry = self.structure[i][j][k]
                    self._base_only(entry, "structure[%d][%d][%d]" % (i, j, k))
                    want = (1 + fpar[i] + fpar[j] + fpar[k]) % 2
                    if not entry.is_zero and entry.parity_or_none() != want:
                        raise ParityError(
                            "structure[%d][%d][%d] must have parity %d" % (i, j, k, want)
                        )
                    sign = -1 if (fpar[i] & fpar[j]) else 1
                    mirrored = self.structure[j][i][k] * sign
                    if entry != mirrored:
                        raise AlgebroidError(
                            "structure[%d][%d] breaks the shifted symmetry "
                            "against structure[%d][%d]" % (i, j, j, i)
                        )

    def _base_only(self, p: Poly, label: str):
        if p.degree_in(self.fiber_vars) > 0:
            raise AlgebroidError("%s must be a base function" % label)

    # -- the field -----------------------------------------------------

    def q_field(self) -> Derivation:
        """The degree-one odd field assembled from anchor and structure."""
        if self._q is not None:
            return self._q
        chart = self.chart
        coeffs: dict[Variable, Poly] = {}
        for a, xv in enumerate(self.base_vars):
            total = chart.zero()
            for i, fv in enumerate(self.fiber_vars):
                total = total + fv.poly() * self.anchor[i][a]
            coeffs[xv] = total
        half = Fraction(1, 2)
        for k, kv in enumerate(self.fiber_vars):
            total = chart.zero()
            for i, iv in enumerate(self.fiber_vars):
                for j, jv in enumerate(self.fiber_vars):
                    entry = self.structure[i][j][k]
                    if entry.is_zero:
                        continue
                    total = total + jv.poly() * iv.poly() * entry * half
            coeffs[kv] = total
        q = Derivation(chart, coeffs)
        if not q.is_zero:
            if q.parity() != ODD:
                raise ParityError("assembled field is not odd")
            if q.weight() != (1,):
                raise AlgebroidError("assembled field is not of weight one")
        self._q = q
        return q

    def residual(self) -> Derivation:
        """[Q, Q]/2; identically zero exactly for a consistent structure."""
        return homological_residual(self.q_field())

    def is_consistent(self) -> bool:
        return self.residual().is_zero

    # -- sections ------------------------------------------------------

    def section(self, components) -> list[Poly]:
        out = []
        for comp in components:
            if isinstance(comp, Poly):
                p = comp if comp.chart is self.chart else comp.substitute({}, target=self.chart)
            elif isinstance(comp, str):
                p = self.chart.poly(comp)
            else:
                p = self.chart.const(comp)
            self._base_only(p, "section component")
            out.append(p)
        if len(out) != len(self.fibers):
            raise AlgebroidError("section needs %d components" % len(self.fibers))
        return out

    def section_parity(self, u: Section) -> int:
        """Common parity of u = u^i e_i; components see the frame parity."""
        parity = None
        for i, comp in enumerate(u):
            if comp.is_zero:
                continue
            frame_parity = (self.fiber_vars[i].parity + 1) % 2
            p = comp.parity_or_none()
            if p is None:
                raise ParityError("section component %d is not homogeneous" % i)
            total = (p + frame_parity) % 2
            if parity is None:
                parity = total
            elif parity != total:
                raise ParityError("section is not parity-homogeneous")
        return EVEN if parity is None else parity

    def iota(self, u: Section) -> Derivation:
        """Contraction: the vertical field (-1)^(pu) u^i d/dxi^i."""
        pu = self.section_parity(u)
        sign = -1 if pu else 1
        coeffs = {
            fv: u[i] * sign for i, fv in enumerate(self.fiber_vars)
        }
        return Derivation(self.chart, coeffs)

    def anchor_field(self, u: Section) -> Derivation:
        """The base vector field u^i Q_i^a d/dx^a."""
        coeffs: dict[Variable, Poly] = {}
        for a, xv in enumerate(self.base_vars):
            total = self.chart.zero()
            for i in range(len(self.fibers)):
                total = total + u[i] * self.anchor[i][a]
            coeffs[xv] = total
        return Derivation(self.chart, coeffs)

    def anchor_by_commutator(self, u: Section) -> Derivation:
        """Base components of [Q, iota(u)]; must agree with anchor_field."""
        field = commutator(self.q_field(), self.iota(u))
        coeffs = {xv: field.coefficient(xv) for xv in self.base_vars}
        return Derivation(self.chart, coeffs)

    def bracket(self, u: Section, v: Section) -> list[Poly]:
        """Closed-form bracket of sections.

        [u,v]^k = rho(u) v^k - (-1)^(pu pv) rho(v) u^k
                  - sum_ij (-1)^((pe_i)(pv+1)) u^i v^j Q_ji^k
        """
        pu, pv = self.section_parity(u), self.section_parity(v)
        rho_u, rho_v = self.anchor_field(u), self.anchor_field(v)
        sign_uv = -1 if (pu & pv) else 1
        out = []
        for k in range(len(self.fibers)):
            term = rho_u.apply(v[k]) - sign_uv * rho_v.apply(u[k])
            for i in range(len(self.fibers)):
                pe_i = (self.fiber_vars[i].parity + 1) % 2
                s = -1 if (pe_i & ((pv + 1) % 2)) else 1
                for j in range(len(self.fibers)):
                    entry = self.structure[j][i][k]
                    if entry.is_zero:
                        continue
                    term = term - s * (u[i] * v[j] * entry)
            out.append(term)
        return out

    def bracket_by_commutators(self, u: Section, v: Section) -> list[Poly]:
        """The bracket recovered from [[Q, iota(u)], iota(v)].

        The double commutator equals (-1)^(pu) iota([u, v]); unwinding
        iota's own sign leaves (-1)^(pv) on the fiber components.
        """
        pv = self.section_parity(v)
        inner = commutator(self.q_field(), self.iota(u))
        outer = commutator(inner, self.iota(v))
        sign = -1 if pv else 1
        out = []
        for fv in self.fiber_vars:
            out.append(outer.coefficient(fv) * sign)
        return out

    def frame(self, i: int) -> list[Poly]:
        return [
            self.chart.one() if k == i else self.chart.zero()
            for k in range(len(self.fibers))
        ]

    def frame_bracket(self, i: int, j: int) -> list[Poly]:
        """[e_i, e_j]^k = (-1)^(pe_j) Q_ij^k as stored."""
        pe_j = (self.fiber_vars[j].parity + 1) % 2
        sign = -1 if pe_j else 1
        return [self.structure[i][j][k] * sign for k in range(len(self.fibers))]

    # -- structure checks ---------------------------------------------

    def anchor_compat_residuals(self) -> dict[tuple[int, int], Derivation]:
        """rho([e_i, e_j]) - [rho(e_i), rho(e_j)] on frame pairs."""
        out = {}
        nf = len(self.fibers)
        for i in range(nf):
            for j in range(i, nf):
                lhs = self.anchor_field(self.bracket(self.frame(i), self.frame(j)))
                rhs = commutator(self.anchor_field(self.frame(i)), self.anchor_field(self.frame(j)))
                out[(i, j)] = lhs - rhs
        return out

    def jacobi_residuals(self) -> dict[tuple[int, int, int], list[Poly]]:
        """Graded Jacobi of the closed-form bracket on frame triples."""
        out = {}
        nf = len(self.fibers)
        for i in range(nf):
            for j in range(nf):
                for k in range(nf):
                    ei, ej, ek = self.frame(i), self.frame(j), self.frame(k)
                    pi = (self.fiber_vars[i].parity + 1) % 2
                    pj = (self.fiber_vars[j].parity + 1) % 2
                    lhs = self.bracket(ei, self.bracket(ej, ek))
                    m1 = self.bracket(self.bracket(ei, ej), ek)
                    m2 = self.bracket(ej, self.bracket(ei, ek))
                    sign = -1 if (pi & pj) else 1
                    out[(i, j, k)] = [
                        lhs[m] - m1[m] - sign * m2[m] for m in range(nf)
                    ]
        return out

    def leibniz_residual(self, u: Section, f: Poly, v: Section) -> list[Poly]:
        """[u, f v] - rho(u)(f) v - (-1)^(pu pf) f [u, v], componentwise."""
        pu = self.section_parity(u)
        pf = f.parity()
        fv = [f * comp for comp in v]
        lhs = self.bracket(u, fv)
        rho_uf = self.anchor_field(u).apply(f)
        sign = -1 if (pu & pf) else 1
        base = self.bracket(u, v)
        return [
            lhs[k] - rho_uf * v[k] - sign * (f * base[k])
            for k in range(len(self.fibers))
        ]

    def check(self) -> dict:
        """Field-level and frame-level diagnostics in one report."""
        res = self.residual()
        frame_ok = all(
            all(p.is_zero for p in r) for r in self.jacobi_residuals().values()
        )
        anchor_ok = all(d.is_zero for d in self.anchor_compat_residuals().values())
        return {
            "homological": res.is_zero,
            "square_residual": res,
            "frame_jacobi": frame_ok,
            "anchor_compatible": anchor_ok,
            "consistent": res.is_zero and frame_ok and anchor_ok,
        }

    # -- tangent prolongation -----------------------------------------

    def tangent_chart(self, dot_suffix: str = "_d") -> Chart:
        """Chart of the tangent prolongation with a second weight slot.

        Plain coordinates keep their weight in the first slot; dotted
        companions add one in the second slot and keep the parity.
        """
        chart = Chart("tangent", 2)
        for n, p in self.base:
            chart.add(n, p, (0, 0))
        for n, p in self.fibers:
            chart.add(n, p, (1, 0))
        for n, p in self.base:
            chart.add(n + dot_suffix, p, (0, 1))
        for n, p in self.fibers:
            chart.add(n + dot_suffix, p, (1, 1))
        return chart

    def complete_lift(self, dot_suffix: str = "_d") -> tuple[Chart, Derivation]:
        """Prolong Q to the tangent chart.

        The lift keeps the plain components and adds, for each
        coordinate v, the dotted derivative of Q's v-component as the
        component on the dotted companion; the even shift derivation
        sum w_dot d/dw produces those derivatives.
        """
        chart = self.tangent_chart(dot_suffix)
        plain = list(self.base_vars) + list(self.fiber_vars)
        dot = Derivation(
            chart,
            {
                chart.var(v.name): chart.var(v.name + dot_suffix).poly()
                for v in plain
            },
        )
        q = self.q_field()
        coeffs: dict[Variable, Poly] = {}
        for v in plain:
            comp = q.coefficient(v).substitute({}, target=chart)
            coeffs[chart.var(v.name)] = comp
            coeffs[chart.var(v.name + dot_suffix)] = dot.apply(comp)
        return chart, Derivation(chart, coeffs)
