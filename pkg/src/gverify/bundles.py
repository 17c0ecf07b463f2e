"""Multi-graded vector bundle charts, transition laws and functors.

An n-fold bundle carries one fiber family for every nonempty subset S of
the n directions; the coordinate v_(S) has weight equal to the indicator
vector of S.  A transition assigns to each family one tensor per set
partition of S, one multilinear term per partition:

    v_(S) = v'_(S) T  +  sum over finer partitions (B1 < B2 < ... < Bk)
            of  v'_(B1) v'_(B2) ... v'_(Bk) T[...]

with blocks ordered by (size, smallest element) and base-dependent
coefficients written to the right.  The double (n = 2) case is wrapped
with the familiar side/core vocabulary, partial parity reversions,
duals, the core pairing, and the twelve-node neighbor graph.

Transition bases must be purely even; fibers may carry any parities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iter_product
from typing import Iterable, Mapping, Sequence

from .kernel import (
    EVEN,
    ODD,
    Chart,
    KernelError,
    ParityError,
    Poly,
    Variable,
)

Subset = tuple[int, ...]
PartKey = tuple[Subset, ...]
Tensor = dict[tuple[int, ...], Poly]

DEFAULT_TRUNCATION = 4


class BundleError(KernelError):
    """Malformed bundle data (shapes, parities, singular blocks)."""


def subsets_of(n: int) -> list[Subset]:
    """Nonempty subsets of {1..n}, by (size, lexicographic) order."""
    out: list[Subset] = []
    for mask in range(1, 1 << n):
        out.append(tuple(i + 1 for i in range(n) if mask >> i & 1))
    out.sort(key=lambda s: (len(s), s))
    return out


def block_order(blocks: Iterable[Subset]) -> PartKey:
    return tuple(sorted(blocks, key=lambda b: (len(b), b)))


def set_partitions(s: Subset) -> list[PartKey]:
    """All set partitions of s, canonically ordered blocks, coarse first."""
    if not s:
        return []
    first, rest = s[0], s[1:]
    if not rest:
        return [((first,),)]
    out = []
    for sub in set_partitions(rest):
        for i, blk in enumerate(sub):
            out.append(block_order(sub[:i] + (tuple(sorted((first,) + blk)),) + sub[i + 1 :]))
        out.append(block_order(((first,),) + sub))
    uniq = sorted(set(out), key=lambda p: (len(p), p))
    return uniq


# ---------------------------------------------------------------------------
# matrices of polynomials over an even base


def mat_const_part(m: Sequence[Sequence[Poly]]) -> list[list[Fraction]]:
    return [[p.terms.get((), Fraction(0)) for p in row] for row in m]


def _frac_mat_inverse(m: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(m)
    aug = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            raise BundleError("square transition block has singular constant term")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [x * inv for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def mat_mul(
    a: Sequence[Sequence[Poly]],
    b: Sequence[Sequence[Poly]],
    truncate: tuple[Sequence[Variable], int] | None = None,
) -> list[list[Poly]]:
    chart = a[0][0].chart
    out = []
    for i in range(len(a)):
        row = []
        for j in range(len(b[0])):
            acc = chart.zero()
            for k in range(len(b)):
                acc = acc + a[i][k] * b[k][j]
            if truncate is not None:
                acc = acc.truncate_in(*truncate)
            row.append(acc)
        out.append(row)
    return out


def mat_invert(
    m: Sequence[Sequence[Poly]], base_vars: Sequence[Variable], degree: int
) -> list[list[Poly]]:
    """Inverse of a square matrix over the base ring.

    The constant part is inverted exactly; the rest enters through a
    Neumann series truncated at total base degree `degree`.
    """
    if not m:
        return []
    chart = m[0][0].chart
    n = len(m)
    c_inv_f = _frac_mat_inverse(mat_const_part(m))
    c_inv = [[chart.const(q) for q in row] for row in c_inv_f]
    nil = [[m[i][j] - m[i][j].terms.get((), 0) for j in range(n)] for i in range(n)]
    if all(p.is_zero for row in nil for p in row):
        return c_inv
    trunc = (base_vars, degree)
    r = mat_mul(c_inv, nil, trunc)
    r = [[-p for p in row] for row in r]
    # sum_k r^k * c_inv, k up to the truncation degree
    acc = [[chart.const(int(i == j)) for j in range(n)] for i in range(n)]
    power = [[chart.const(int(i == j)) for j in range(n)] for i in range(n)]
    for _ in range(degree):
        power = mat_mul(power, r, trunc)
        if all(p.is_zero for row in power for p in row):
            break
        acc = [[acc[i][j] + power[i][j] for j in range(n)] for i in range(n)]
    return mat_mul(acc, c_inv, trunc)


def tensor_from_nested(nested, shape: tuple[int, ...], chart: Chart) -> Tensor:
    """Convert nested lists (Poly / str / number entries) to sparse form."""
    out: Tensor = {}

    def walk(node, prefix):
        depth = len(prefix)
        if depth == len(shape):
            if isinstance(node, Poly):
                p = node if node.chart is chart else node.substitute({}, target=chart)
            elif isinstance(node, str):
                p = chart.poly(node)
            else:
                p = chart.const(node)
            if not p.is_zero:
                out[prefix] = p
            return
        if len(node) != shape[depth]:
            raise BundleError(
                "tensor axis %d has length %d, expected %d" % (depth, len(node), shape[depth])
            )
        for i, child in enumerate(node):
            walk(child, prefix + (i,))

    walk(nested, ())
    return out


# ---------------------------------------------------------------------------
# n-fold bundles


@dataclass
class NFoldBundle:
    n: int
    base: tuple[tuple[str, int], ...]
    names: dict[Subset, tuple[str, ...]]
    parities: dict[Subset, tuple[int, ...]]
    transition: dict[Subset, dict[PartKey, Tensor]] | None = None
    _charts: dict = field(default_factory=dict, repr=False)

    @classmethod
    def build(
        cls,
        n: int,
        base: Sequence[tuple[str, int]],
        families: Mapping[Sequence[int], tuple[Sequence[str], Sequence[int]]],
        transition=None,
    ) -> "NFoldBundle":
        names: dict[Subset, tuple[str, ...]] = {}
        parities: dict[Subset, tuple[int, ...]] = {}
        for s in subsets_of(n):
            fam = families.get(s) or families.get(tuple(s))
            if fam is None:
                names[s] = ()
                parities[s] = ()
            else:
                fam_names, fam_par = fam
                if len(fam_names) != len(fam_par):
                    raise BundleError("family %r: names and parities differ in length" % (s,))
                names[s] = tuple(fam_names)
                parities[s] = tuple(int(p) for p in fam_par)
        for bname, bpar in base:
            if bpar != EVEN:
                raise BundleError("transition base coordinate %r must be even" % bname)
        self = cls(n, tuple((b, int(p)) for b, p in base), names, parities)
        if transition is not None:
            self.transition = self._normalize_transition(transition)
        return self

    # -- structure ----------------------------------------------------

    def rank(self, s: Subset) -> int:
        return len(self.names[s])

    def family_subsets(self) -> list[Subset]:
        return [s for s in subsets_of(self.n) if self.names[s]]

    def _normalize_transition(self, transition) -> dict[Subset, dict[PartKey, Tensor]]:
        chart = self.base_chart
        out: dict[Subset, dict[PartKey, Tensor]] = {}
        for s in self.family_subsets():
            block = transition.get(s) or transition.get(tuple(s)) or {}
            norm: dict[PartKey, Tensor] = {}
            for part in set_partitions(s):
                raw = block.get(part)
                shape = tuple(self.rank(b) for b in part) + (self.rank(s),)
                if raw is None:
                    if len(part) == 1:
                        # identity linear block by default
                        t: Tensor = {}
                        for i in range(self.rank(s)):
                            t[(i, i)] = chart.one()
                        norm[part] = t
                    continue
                if isinstance(raw, dict):
                    t = {
                        k: v if v.chart is chart else v.substitute({}, target=chart)
                        for k, v in raw.items()
                        if not v.is_zero
                    }
                else:
                    t = tensor_from_nested(raw, shape, chart)
                if any(self.rank(b) == 0 for b in part) or self.rank(s) == 0:
                    t = {}
                norm[part] = t
            for key in block:
                if block_order(key) not in set_partitions(s):
                    raise BundleError("partition key %r is not a partition of %r" % (key, s))
            out[s] = norm
        return out

    # -- charts -------------------------------------------------------

    def _build_chart(self, tag: str, primed: bool) -> Chart:
        chart = Chart(tag, self.n)
        for bname, bpar in self.base:
            chart.add(bname, bpar, (0,) * self.n)
        for s in subsets_of(self.n):
            w = tuple(1 if d in s else 0 for d in range(1, self.n + 1))
            for name, par in zip(self.names[s], self.parities[s]):
                chart.add(name + "'" if primed else name, par, w)
        return chart

    @property
    def chart(self) -> Chart:
        if "plain" not in self._charts:
            self._charts["plain"] = self._build_chart("bundle", False)
        return self._charts["plain"]

    @property
    def primed_chart(self) -> Chart:
        if "primed" not in self._charts:
            self._charts["primed"] = self._build_chart("bundle'", True)
        return self._charts["primed"]

    @property
    def base_chart(self) -> Chart:
        if "base" not in self._charts:
            chart = Chart("base", self.n)
            for bname, bpar in self.base:
                chart.add(bname, bpar, (0,) * self.n)
            self._charts["base"] = chart
        return self._charts["base"]

    def family_vars(self, s: Subset, primed: bool = False) -> list[Variable]:
        chart = self.primed_chart if primed else self.chart
        return [chart.var(n + "'" if primed else n) for n in self.names[s]]

    def base_vars(self, chart: Chart | None = None) -> list[Variable]:
        chart = chart or self.chart
        return [chart.var(b) for b, _ in self.base]

    # -- transition laws ----------------------------------------------

    def law(self, s: Subset, j: int) -> Poly:
        """v_(s)[j] expressed on the primed chart."""
        if self.transition is None:
            raise BundleError("bundle carries no transition data")
        chart = self.primed_chart
        out = chart.zero()
        for part, tensor in self.transition[s].items():
            fam_vars = [self.family_vars(b, primed=True) for b in part]
            for idx, entry in tensor.items():
                if idx[-1] != j:
                    continue
                term = entry.substitute({}, target=chart)
                mono = chart.one()
                for pos, b in enumerate(part):
                    mono = mono * fam_vars[pos][idx[pos]].poly()
                out = out + mono * term
        return out

    def chart_map(self) -> dict[Variable, Poly]:
        """Pullback of unprimed generators to the primed chart."""
        chart = self.chart
        primed = self.primed_chart
        images: dict[Variable, Poly] = {}
        for bname, _ in self.base:
            images[chart.var(bname)] = primed.var(bname).poly()
        for s in self.family_subsets():
            for j, name in enumerate(self.names[s]):
                images[chart.var(name)] = self.law(s, j)
        return images

    # -- validation ---------------------------------------------------

    def validate(self, degree: int = DEFAULT_TRUNCATION) -> dict:
        """Shape, parity, weight and invertibility diagnostics."""
        report = {"valid": True, "problems": [], "term_counts": {}}
        if self.transition is None:
            report["valid"] = False
            report["problems"].append("no transition data")
            return report
        for s in self.family_subsets():
            parts = self.transition[s]
            report["term_counts"][s] = len([p for p in parts if parts[p] or len(p) == 1])
            lin = parts.get((s,), {})
            size = self.rank(s)
            m = [[lin.get((i, j), self.base_chart.zero()) for j in range(size)] for i in range(size)]
            try:
                mat_invert(m, self.base_vars(self.base_chart), degree)
            except BundleError:
                report["valid"] = False
                report["problems"].append("linear block of %r is singular" % (s,))
            for part, tensor in parts.items():
                shape = tuple(self.rank(b) for b in part) + (size,)
                for idx, entry in tensor.items():
                    if len(idx) != len(shape) or any(
                        i < 0 or i >= d for i, d in zip(idx, shape)
                    ):
                        report["valid"] = False
                        report["problems"].append(
                            "tensor index %r out of range for %r %r" % (idx, s, part)
                        )
                        continue
                    want = self.parities[s][idx[-1]]
                    got = sum(
                        self.parities[b][idx[pos]] for pos, b in enumerate(part)
                    ) % 2
                    if got != want:
                        report["valid"] = False
                        report["problems"].append(
                            "parity violation in law of %r at %r (term parity %d, coordinate parity %d)"
                            % (s, idx, got, want)
                        )
        return report

    # -- functors -----------------------------------------------------

    def reverse_parity(self, direction: int) -> "NFoldBundle":
        """Flip parities of every family containing `direction`.

        Transition tensors are re-signed so that the law, rewritten with
        the direction's factor commuted to the front with the old
        parities and back with the new ones, keeps its meaning: each
        term gains (-1)^(sum of parities of the block factors standing
        before the flipped block).
        """
        if not 1 <= direction <= self.n:
            raise BundleError("direction %d out of range" % direction)
        parities = {
            s: tuple((p + 1) % 2 if direction in s else p for p in self.parities[s])
            if direction in s
            else self.parities[s]
            for s in self.parities
        }
        transition = None
        if self.transition is not None:
            transition = {}
            for s, parts in self.transition.items():
                new_parts: dict[PartKey, Tensor] = {}
                for part, tensor in parts.items():
                    if direction not in s or len(part) == 1:
                        new_parts[part] = dict(tensor)
                        continue
                    flip_pos = next(
                        pos for pos, b in enumerate(part) if direction in b
                    )
                    new_tensor: Tensor = {}
                    for idx, entry in tensor.items():
                        sgn = 0
                        for pos in range(flip_pos):
                            sgn += self.parities[part[pos]][idx[pos]]
                        new_tensor[idx] = -entry if sgn % 2 else entry
                    new_parts[part] = new_tensor
                transition[s] = new_parts
        out = NFoldBundle(self.n, self.base, dict(self.names), parities)
        if transition is not None:
            out.transition = out._normalize_transition(transition)
        return out

    def _extract(self, law_polys: dict[tuple[Subset, int], Poly], chart: Chart, primed: bool):
        """Recover transition tensors from law polynomials on `chart`."""
        var_info: dict[int, tuple[Subset, int]] = {}
        for s in self.family_subsets():
            for j, v in enumerate(self.family_vars(s, primed=primed)):
                var_info[v.index] = (s, j)
        base_idx = {v.index for v in self.base_vars(chart)}
        transition: dict[Subset, dict[PartKey, Tensor]] = {
            s: {} for s in self.family_subsets()
        }
        base_chart = self.base_chart
        for (s, j), poly in law_polys.items():
            for mono, coeff in poly.terms.items():
                fiber: list[tuple[Subset, int]] = []
                base_part: list[tuple[int, int]] = []
                bad = False
                for idx, exp in mono:
                    if idx in base_idx:
                        base_part.append((idx, exp))
                    elif idx in var_info:
                        if exp != 1:
                            bad = True
                            break
                        fiber.append(var_info[idx])
                    else:
                        bad = True
                        break
                if bad or not fiber:
                    raise BundleError(
                        "law of %r[%d] contains a non-multilinear term" % (s, j)
                    )
                part = tuple(f[0] for f in fiber)
                if block_order(part) != part or set(sum(part, ())) != set(s):
                    raise BundleError(
                        "law of %r[%d] contains a term outside the partition scheme"
                        % (s, j)
                    )
                idx_key = tuple(f[1] for f in fiber) + (j,)
                # transport the base factor back to the base chart by name
                names = {chart.variables[i].name: e for i, e in base_part}
                bmono = tuple(
                    sorted((base_chart.var(nm).index, e) for nm, e in names.items())
                )
                tensor = transition[s].setdefault(part, {})
                prev = tensor.get(idx_key, base_chart.zero())
                tensor[idx_key] = prev + Poly(base_chart, {bmono: coeff})
        for s in transition:
            for part in list(transition[s]):
                transition[s][part] = {
                    k: v for k, v in transition[s][part].items() if not v.is_zero
                }
        return transition

    def compose(self, inner: "NFoldBundle", degree: int = DEFAULT_TRUNCATION) -> "NFoldBundle":
        """Composite transition: self (C <- C'), inner (C' <- C'')."""
        if (
            inner.n != self.n
            or inner.names != self.names
            or inner.parities != self.parities
        ):
            raise BundleError("composed transitions must share the family structure")
        inner_map_raw = inner.chart_map()
        # map self's primed generators onto inner's primed chart
        primed = self.primed_chart
        images: dict[Variable, Poly] = {}
        for v in primed.variables:
            name = v.name[:-1] if v.name.endswith("'") else v.name
            images[v] = inner_map_raw[inner.chart.var(name)]
        bvars = inner.base_vars(inner.primed_chart)
        laws: dict[tuple[Subset, int], Poly] = {}
        for s in self.family_subsets():
            for j in range(self.rank(s)):
                p = self.law(s, j).substitute(images, target=inner.primed_chart)
                laws[(s, j)] = p.truncate_in(bvars, degree)
        transition = self._extract(laws, inner.primed_chart, primed=True)
        out = NFoldBundle(self.n, self.base, dict(self.names), dict(self.parities))
        out.transition = out._normalize_transition(transition)
        return out

    def invert(self, degree: int = DEFAULT_TRUNCATION) -> "NFoldBundle":
        """Transition data of the inverse chart change, degree-truncated."""
        if self.transition is None:
            raise BundleError("bundle carries no transition data")
        chart = self.chart
        bvars = self.base_vars(chart)
        base_chart = self.base_chart
        inv_laws: dict[tuple[Subset, int], Poly] = {}
        for s in self.family_subsets():
            size = self.rank(s)
            lin = self.transition[s].get((s,), {})
            m = [
                [lin.get((i, j), base_chart.zero()) for j in range(size)]
                for i in range(size)
            ]
            m_chart = [[p.substitute({}, target=chart) for p in row] for row in m]
            m_inv = mat_invert(m_chart, bvars, degree)
            rhs = []
            for j in range(size):
                r = self.family_vars(s)[j].poly()
                for part, tensor in self.transition[s].items():
                    if len(part) == 1:
                        continue
                    for idx, entry in tensor.items():
                        if idx[-1] != j:
                            continue
                        mono = chart.one()
                        for pos, b in enumerate(part):
                            mono = mono * inv_laws[(b, idx[pos])]
                        r = r - mono * entry.substitute({}, target=chart)
                rhs.append(r.truncate_in(bvars, degree))
            for jp in range(size):
                acc = chart.zero()
                for j in range(size):
                    acc = acc + rhs[j] * m_inv[j][jp]
                inv_laws[(s, jp)] = acc.truncate_in(bvars, degree)
        transition = self._extract(inv_laws, chart, primed=False)
        out = NFoldBundle(self.n, self.base, dict(self.names), dict(self.parities))
        out.transition = out._normalize_transition(transition)
        return out

    def tensor(self, s: Subset, part: PartKey) -> Tensor:
        if self.transition is None:
            raise BundleError("bundle carries no transition data")
        return self.transition[s].get(part, {})

    def transitions_equal(self, other: "NFoldBundle", scale: Mapping[Subset, int] | None = None) -> bool:
        """Tensor-level comparison, optionally scaling other's family blocks."""
        if self.transition is None or other.transition is None:
            raise BundleError("both bundles need transition data")
        for s in self.family_subsets():
            for part in set_partitions(s):
                a = self.tensor(s, part)
                b = other.tensor(s, part)
                keys = set(a) | set(b)
                for k in keys:
                    pa = a.get(k, self.base_chart.zero())
                    pb = b.get(k, self.base_chart.zero())
                    if pb.chart is not self.base_chart:
                        pb = pb.substitute({}, target=self.base_chart)
                    if scale:
                        fac = 1
                        for blk in part:
                            fac *= scale.get(blk, 1)
                        fac *= scale.get(s, 1)
                        pb = pb * fac
                    if pa != pb:
                        return False
        return True


# ---------------------------------------------------------------------------
# double bundles


@dataclass
class DualInfo:
    source: "DoubleBundle"
    direction: int


S1: Subset = (1,)
S2: Subset = (2,)
SC: Subset = (1, 2)
P_MIX: PartKey = ((1,), (2,))


class DoubleBundle:
    """The n = 2 wrapper: sides u (direction 1), w (direction 2), core z."""

    def __init__(self, nfold: NFoldBundle, dual_info: DualInfo | None = None):
        if nfold.n != 2:
            raise BundleError("DoubleBundle wraps 2-fold data only")
        self.nf = nfold
        self.dual_info = dual_info

    @classmethod
    def build(
        cls,
        base: Sequence[tuple[str, int]],
        side1: tuple[Sequence[str], Sequence[int]],
        side2: tuple[Sequence[str], Sequence[int]],
        core: tuple[Sequence[str], Sequence[int]],
        t_side1=None,
        t_side2=None,
        t_core=None,
        t_mix=None,
    ) -> "DoubleBundle":
        families = {S1: side1, S2: side2, SC: core}
        transition = None
        if any(t is not None for t in (t_side1, t_side2, t_core, t_mix)):
            transition = {
                S1: {(S1,): t_side1} if t_side1 is not None else {},
                S2: {(S2,): t_side2} if t_side2 is not None else {},
                SC: {},
            }
            if t_core is not None:
                transition[SC][(SC,)] = t_core
            if t_mix is not None:
                transition[SC][P_MIX] = t_mix
        return cls(NFoldBundle.build(2, base, families, transition))

    # vocabulary helpers

    @property
    def chart(self) -> Chart:
        return self.nf.chart

    @property
    def primed_chart(self) -> Chart:
        return self.nf.primed_chart

    def names(self, s: Subset) -> tuple[str, ...]:
        return self.nf.names[s]

    def parities(self, s: Subset) -> tuple[int, ...]:
        return self.nf.parities[s]

    def tensor_matrix(self, s: Subset) -> list[list[Poly]]:
        size = self.nf.rank(s)
        t = self.nf.tensor(s, (s,))
        z = self.nf.base_chart.zero()
        return [[t.get((i, j), z) for j in range(size)] for i in range(size)]

    def mixed_tensor(self) -> Tensor:
        return self.nf.tensor(SC, P_MIX)

    def reverse_parity(self, direction: int) -> "DoubleBundle":
        return DoubleBundle(self.nf.reverse_parity(direction))

    def validate(self, degree: int = DEFAULT_TRUNCATION) -> dict:
        return self.nf.validate(degree)

    # duals ------------------------------------------------------------

    def dualize(self, direction: int, degree: int = DEFAULT_TRUNCATION) -> "DoubleBundle":
        """Dual over the side-`direction` base.

        Keeps that side, turns the other side into the dual of the core
        (names suffixed with "_"), and the new core is the dual of the
        replaced side.  Transition data is derived from the requirement
        that the canonical pairings stay invariant; inverse tensors are
        degree-truncated.
        """
        if self.nf.transition is None:
            raise BundleError("dualize needs transition data")
        if direction not in (1, 2):
            raise BundleError("direction must be 1 or 2")
        base_chart = self.nf.base_chart
        bvars = self.nf.base_vars(base_chart)

        def transpose_inverse(m):
            if not m:
                return []
            mi = mat_invert(m, bvars, degree)
            return [[mi[j][i] for j in range(len(mi))] for i in range(len(mi[0]))]

        tz = self.tensor_matrix(SC)
        a = transpose_inverse(tz)  # z-dual side: z_mu = z'_mu' A[mu'][mu]
        dual_core_names = tuple(n + "_" for n in self.names(SC))
        dual_core_par = self.parities(SC)
        mix = self.mixed_tensor()
        nu, nw, nz = self.nf.rank(S1), self.nf.rank(S2), self.nf.rank(SC)
        if direction == 1:
            kept, kept_t = (self.names(S1), self.parities(S1)), self.tensor_matrix(S1)
            replaced_rank, replaced = nw, (self.names(S2), self.parities(S2))
            b = transpose_inverse(self.tensor_matrix(S2))
        else:
            kept, kept_t = (self.names(S2), self.parities(S2)), self.tensor_matrix(S2)
            replaced_rank, replaced = nu, (self.names(S1), self.parities(S1))
            b = transpose_inverse(self.tensor_matrix(S1))
        new_core_names = tuple(n + "_" for n in replaced[0])
        new_core_par = tuple(replaced[1])
        # mixed term of the dual core law
        new_mix: Tensor = {}
        for (i, alpha, mu), entry in mix.items():
            # original term u'^i w'^alpha T[i][alpha][mu]
            for mup in range(nz):
                amu = a[mup][mu]
                if amu.is_zero:
                    continue
                if direction == 1:
                    # core is w_: term u'^i z'_mup with coefficient -T A B
                    for alpha2 in range(nw):
                        bent = b[alpha][alpha2]
                        if bent.is_zero:
                            continue
                        key = (i, mup, alpha2)
                        prev = new_mix.get(key, base_chart.zero())
                        new_mix[key] = prev - entry * amu * bent
                else:
                    # core is u_: term z'_mup w'^alpha, reordered from w' z'
                    sgn = -1 if (self.parities(S2)[alpha] & dual_core_par[mup]) else 1
                    for i2 in range(nu):
                        bent = b[i][i2]
                        if bent.is_zero:
                            continue
                        key = (mup, alpha, i2)
                        prev = new_mix.get(key, base_chart.zero())
                        new_mix[key] = prev - entry * amu * bent * sgn
        new_mix = {
            k: v.truncate_in(bvars, degree) for k, v in new_mix.items()
        }
        new_mix = {k: v for k, v in new_mix.items() if not v.is_zero}
        def trunc(m):
            return [[p.truncate_in(bvars, degree) for p in row] for row in m]

        b_t = trunc(b)
        a_t = trunc(a)
        if direction == 1:
            families = {
                S1: kept,
                S2: (dual_core_names, dual_core_par),
                SC: (new_core_names, new_core_par),
            }
            transition = {
                S1: {(S1,): tensor_from_nested(kept_t, (nu, nu), base_chart)},
                S2: {(S2,): tensor_from_nested(a_t, (nz, nz), base_chart)},
                SC: {
                    (SC,): tensor_from_nested(b_t, (nw, nw), base_chart),
                    P_MIX: new_mix,
                },
            }
        else:
            families = {
                S1: (dual_core_names, dual_core_par),
                S2: kept,
                SC: (new_core_names, new_core_par),
            }
            transition = {
                S1: {(S1,): tensor_from_nested(a_t, (nz, nz), base_chart)},
                S2: {(S2,): tensor_from_nested(kept_t, (nw, nw), base_chart)},
                SC: {
                    (SC,): tensor_from_nested(b_t, (nu, nu), base_chart),
                    P_MIX: new_mix,
                },
            }
        nf = NFoldBundle.build(2, self.nf.base, families, transition)
        return DoubleBundle(nf, DualInfo(self, direction))


def side_bundle(db: DoubleBundle, direction: int):
    """The side vector bundle of the chosen direction: names, parities, matrix."""
    s = S1 if direction == 1 else S2
    return db.names(s), db.parities(s), db.tensor_matrix(s)


def core_bundle(db: DoubleBundle):
    """The core bundle (both side families set to zero): names, parities, matrix."""
    return db.names(SC), db.parities(SC), db.tensor_matrix(SC)


def _rehome_tensor(t: Tensor, chart: Chart) -> Tensor:
    return {
        k: v if v.chart is chart else v.substitute({}, target=chart)
        for k, v in t.items()
    }


def check_pi_commute(db: DoubleBundle) -> dict:
    """Compare the two orders of the two partial parity reversions.

    The two composites must agree on the side families and on the linear
    core block, while the mixed core tensors differ by an overall sign;
    equivalently they are intertwined by negating the core coordinates.
    """
    b12 = db.reverse_parity(1).reverse_parity(2)
    b21 = db.reverse_parity(2).reverse_parity(1)
    home = db.nf.base_chart
    mismatches = []
    if b12.nf.parities != b21.nf.parities:
        mismatches.append("parities differ")
    for s, part in ((S1, (S1,)), (S2, (S2,)), (SC, (SC,))):
        t12 = _rehome_tensor(b12.nf.tensor(s, part), home)
        t21 = _rehome_tensor(b21.nf.tensor(s, part), home)
        if t12 != t21:
            mismatches.append("linear block of %r differs" % (s,))
    m12 = _rehome_tensor(b12.nf.tensor(SC, P_MIX), home)
    m21 = _rehome_tensor(b21.nf.tensor(SC, P_MIX), home)
    keys = set(m12) | set(m21)
    z = home.zero()
    sign_ok = all(m12.get(k, z) == -m21.get(k, z) for k in keys)
    exact = all(m12.get(k, z) == m21.get(k, z) for k in keys)
    if not sign_ok:
        mismatches.append("mixed tensors are not opposite")
    return {
        "agree_up_to_core_sign": sign_ok and not mismatches,
        "exact": exact and not mismatches,
        "mismatches": mismatches,
    }


def pairing_check(
    dual_a: DoubleBundle,
    dual_b: DoubleBundle,
    degree: int = DEFAULT_TRUNCATION,
    plus_variant: bool = False,
) -> dict:
    """Invariance of the canonical pairing of the two duals over the co-core.

    The function u^i u_i - w^alpha w_alpha on the fiber product of D*A
    and D*B over the dual core base is transition-invariant; the report
    also states whether the '+' variant would be invariant, which happens
    exactly when the mixed tensor vanishes.
    """
    if dual_a.dual_info is None or dual_b.dual_info is None:
        raise BundleError("pairing_check expects two dual bundles")
    if dual_a.dual_info.source is not dual_b.dual_info.source:
        raise BundleError("duals come from different source bundles")
    if (dual_a.dual_info.direction, dual_b.dual_info.direction) != (1, 2):
        raise BundleError("pass the duals as (over side 1, over side 2)")
    src = dual_a.dual_info.source
    nf = src.nf
    base_chart = nf.base_chart
    bvars_names = [b for b, _ in nf.base]

    def mk_chart(tag, primed):
        suff = "'" if primed else ""
        c = Chart(tag, 2)
        for bname, bpar in nf.base:
            c.add(bname, bpar, (0, 0))
        for name, par in zip(src.names(S1), src.parities(S1)):
            c.add(name + suff, par, (1, 0))
        for name, par in zip(src.names(S2), src.parities(S2)):
            c.add(name + suff, par, (0, 1))
        for name, par in zip(dual_b.names(SC), dual_b.parities(SC)):
            c.add(name + suff, par, (1, 0))
        for name, par in zip(dual_a.names(SC), dual_a.parities(SC)):
            c.add(name + suff, par, (0, 1))
        for name, par in zip(dual_a.names(S2), dual_a.parities(S2)):
            c.add(name + suff, par, (1, 1))
        return c

    plain = mk_chart("pairing", False)
    primed = mk_chart("pairing'", True)

    def transport(bundle: DoubleBundle, s: Subset, j: int) -> Poly:
        # rebuild the law on the big primed chart by renaming generators
        law = bundle.nf.law(s, j)
        images = {
            v: primed.var(v.name).poly()
            for v in bundle.nf.primed_chart.variables
            if primed.has(v.name)
        }
        return law.substitute(images, target=primed)

    images: dict[Variable, Poly] = {}
    for bname in bvars_names:
        images[plain.var(bname)] = primed.var(bname).poly()
    for j, name in enumerate(src.names(S1)):
        images[plain.var(name)] = transport(src, S1, j)
    for j, name in enumerate(src.names(S2)):
        images[plain.var(name)] = transport(src, S2, j)
    for j, name in enumerate(dual_b.names(SC)):
        images[plain.var(name)] = transport(dual_b, SC, j)
    for j, name in enumerate(dual_a.names(SC)):
        images[plain.var(name)] = transport(dual_a, SC, j)
    za = [transport(dual_a, S2, j) for j in range(len(dual_a.names(S2)))]
    zb = [transport(dual_b, S1, j) for j in range(len(dual_b.names(S1)))]
    consistent = all(pa == pb for pa, pb in zip(za, zb))
    for j, name in enumerate(dual_a.names(S2)):
        images[plain.var(name)] = za[j]

    def form(chart: Chart, suffix: str, sign: int) -> Poly:
        p = chart.zero()
        for name in src.names(S1):
            p = p + chart.var(name + suffix).poly() * chart.var(name + "_" + suffix).poly()
        for name in src.names(S2):
            p = p + chart.var(name + suffix).poly() * chart.var(name + "_" + suffix).poly() * sign
        return p

    sign = 1 if plus_variant else -1
    lhs = form(plain, "", sign).substitute(images, target=primed)
    rhs = form(primed, "'", sign)
    pb = [primed.var(b) for b in bvars_names]
    residual = (lhs - rhs).truncate_in(pb, degree)
    mixed_zero = not src.mixed_tensor()
    return {
        "invariant": residual.is_zero,
        "residual": residual,
        "core_laws_consistent": consistent,
        "mixed_tensor_zero": mixed_zero,
    }


# ---------------------------------------------------------------------------
# the twelve-node neighbor graph

_CLASS_NAMES = {"D": "D", "A": "D*A", "B": "D*B"}
# per class: prefix contributed by each flip bit (flipping side r + core
# reverses the fibers over the opposite side's base)
_FLIP_PREFIX = {
    "D": {1: "PiB", 2: "PiA"},
    "A": {1: "PiK", 2: "PiA"},
    "B": {1: "PiB", 2: "PiK"},
}

STRUCTURE_BEARING = (
    "Pi2(D)",
    "PiK(D*A)",
    "Pi2(D*A)",
    "PiK(D*B)",
    "Pi2(D*B)",
)

_OPS = ("P1", "P2", "D1", "D2")


def _node_label(state: tuple[str, int, int]) -> str:
    cls, f1, f2 = state
    if f1 and f2:
        prefix = "Pi2"
    elif f1:
        prefix = _FLIP_PREFIX[cls][1]
    elif f2:
        prefix = _FLIP_PREFIX[cls][2]
    else:
        return _CLASS_NAMES[cls]
    return "%s(%s)" % (prefix, _CLASS_NAMES[cls])


def _apply_op(state: tuple[str, int, int], op: str) -> tuple[str, int, int]:
    cls, f1, f2 = state
    if op == "P1":
        return (cls, f1 ^ 1, f2)
    if op == "P2":
        return (cls, f1, f2 ^ 1)
    if op == "D1":
        if cls == "D":
            return ("A", f1, f1 ^ f2)
        if cls == "A":
            return ("D", f1, f1 ^ f2)
        return ("A", f1 ^ f2, f1)
    if op == "D2":
        if cls == "D":
            return ("B", f1 ^ f2, f2)
        if cls == "A":
            return ("B", f2, f1 ^ f2)
        return ("D", f1 ^ f2, f2)
    raise BundleError("unknown operation %r" % op)


def normalize_word(ops: Sequence[str]) -> str:
    """Label of the node reached from D by the given operation word."""
    state = ("D", 0, 0)
    for op in ops:
        state = _apply_op(state, op)
    return _node_label(state)


@dataclass
class NeighborNode:
    label: str
    state: tuple[str, int, int]
    word: tuple[str, ...]
    structure_bearing: bool
    edges: dict[str, str]
    bundle: DoubleBundle | None = None


def neighbor_graph(db: DoubleBundle | None = None, degree: int = DEFAULT_TRUNCATION) -> dict[str, NeighborNode]:
    """All twelve nodes with their four edges, deterministically ordered.

    When a seed bundle with transition data is given, each node also
    carries the bundle produced by applying its canonical word.
    """
    states = [
        (cls, f1, f2) for cls in ("D", "A", "B") for f1 in (0, 1) for f2 in (0, 1)
    ]
    words: dict[tuple[str, int, int], tuple[str, ...]] = {}
    for cls, f1, f2 in states:
        w: list[str] = []
        if cls == "A":
            w.append("D1")
        elif cls == "B":
            w.append("D2")
        if f1:
            w.append("P1")
        if f2:
            w.append("P2")
        words[(cls, f1, f2)] = tuple(w)
    nodes: dict[str, NeighborNode] = {}
    for state in states:
        label = _node_label(state)
        edges = {op: _node_label(_apply_op(state, op)) for op in _OPS}
        bundle = None
        if db is not None:
            bundle = db
            for op in words[state]:
                if op == "P1":
                    bundle = bundle.reverse_parity(1)
                elif op == "P2":
                    bundle = bundle.reverse_parity(2)
                elif op == "D1":
                    bundle = bundle.dualize(1, degree)
                else:
                    bundle = bundle.dualize(2, degree)
        nodes[label] = NeighborNode(
            label=label,
            state=state,
            word=words[state],
            structure_bearing=label in STRUCTURE_BEARING,
            edges=edges,
            bundle=bundle,
        )
    return nodes
