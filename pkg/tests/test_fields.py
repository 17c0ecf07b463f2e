"""Tests for graded derivations, commutators and bracket tables."""

import random
from fractions import Fraction

import pytest

from gverify.kernel import (
    EVEN,
    ODD,
    Chart,
    KernelError,
    ParityError,
    WeightError,
)
from gverify.fields import (
    BracketTable,
    Derivation,
    commutator,
    homological_residual,
    is_homological,
    related,
)


def make_chart():
    chart = Chart("m", 2)
    chart.add("x", EVEN, (0, 0))
    chart.add("y", EVEN, (0, 0))
    chart.add("xi", ODD, (1, 0))
    chart.add("eta", ODD, (0, 1))
    return chart


def random_poly(chart, rng, nterms=3, maxlen=3):
    names = [v.name for v in chart.variables]
    total = chart.zero()
    for _ in range(nterms):
        prod = chart.const(Fraction(rng.randint(-5, 5), rng.randint(1, 3)))
        for _ in range(rng.randint(0, maxlen)):
            prod = prod * chart.var(rng.choice(names)).poly()
        total = total + prod
    return total


def random_homogeneous(chart, rng, parity, nterms=3, maxlen=3):
    total = chart.zero()
    attempts = 0
    while attempts < 200:
        attempts += 1
        p = random_poly(chart, rng, 1, maxlen)
        if not p.is_zero and p.parity() == parity:
            total = total + p
            if len(total.terms) >= nterms:
                break
    return total


def random_field(chart, rng, parity):
    """A derivation with parity-homogeneous coefficients of fixed parity."""
    coeffs = {}
    for v in chart.variables:
        want = (parity + v.parity) % 2
        c = random_homogeneous(chart, rng, want, nterms=2, maxlen=2)
        coeffs[v] = c
    return Derivation(chart, coeffs)


def test_derivation_graded_leibniz():
    chart = make_chart()
    rng = random.Random(7)
    for _ in range(60):
        parity = rng.choice([EVEN, ODD])
        x = random_field(chart, rng, parity)
        f = random_homogeneous(chart, rng, rng.choice([EVEN, ODD]))
        g = random_poly(chart, rng)
        sign = -1 if (parity and f.parity_or_none()) else 1
        assert x.apply(f * g) == x.apply(f) * g + sign * (f * x.apply(g))


def test_commutator_is_operator_commutator():
    chart = make_chart()
    rng = random.Random(13)
    for _ in range(40):
        px, py = rng.choice([0, 1]), rng.choice([0, 1])
        x, y = random_field(chart, rng, px), random_field(chart, rng, py)
        f = random_poly(chart, rng)
        sign = -1 if (px and py) else 1
        assert commutator(x, y).apply(f) == x.apply(y.apply(f)) - sign * y.apply(x.apply(f))


def test_commutator_graded_antisymmetry_and_jacobi():
    chart = make_chart()
    rng = random.Random(19)
    for _ in range(25):
        px, py, pz = (rng.choice([0, 1]) for _ in range(3))
        x, y, z = (random_field(chart, rng, p) for p in (px, py, pz))
        sxy = -1 if (px and py) else 1
        assert commutator(x, y) == commutator(y, x).scale(-sxy)
        lhs = commutator(x, commutator(y, z))
        rhs = commutator(commutator(x, y), z) + commutator(y, commutator(x, z)).scale(sxy)
        assert lhs == rhs


def test_homological_field():
    chart = Chart("c", 1)
    x = chart.add("x", EVEN, (0,))
    xi = chart.add("xi", ODD, (1,))
    q = Derivation(chart, {x: xi.poly(), xi: chart.zero()})
    assert q.parity() == ODD
    assert is_homological(q)
    broken = Derivation(chart, {x: xi.poly(), xi: x.poly()})
    res = homological_residual(broken)
    assert not res.is_zero
    # [Q,Q]/2 applied to x picks up the obstruction
    assert res.apply(x.poly()) == x.poly()
    with pytest.raises(ParityError):
        homological_residual(Derivation(chart, {x: x.poly()}))


def test_derivation_weight():
    chart = make_chart()
    xi = chart.var("xi")
    x = chart.var("x")
    d = Derivation(chart, {x: chart.poly("xi*eta")})
    assert d.weight() == (1, 1)
    d2 = Derivation(chart, {xi: chart.poly("x*y")})
    assert d2.weight() == (-1, 0)
    with pytest.raises(WeightError):
        Derivation(chart, {x: chart.poly("xi*eta"), xi: chart.poly("x")}).weight()


def test_relatedness_residuals():
    src = Chart("src", 1)
    x = src.add("x", EVEN, (0,))
    tgt = Chart("tgt", 1)
    y = tgt.add("y", EVEN, (0,))
    pullback = {y: src.poly("2*x")}
    x_field = Derivation(src, {x: src.one()})
    y_good = Derivation(tgt, {y: tgt.const(2)})
    y_bad = Derivation(tgt, {y: y.poly()})
    assert all(r.is_zero for r in related(pullback, x_field, y_good).values())
    bad = related(pullback, x_field, y_bad)
    assert bad[y] == src.poly("2 - 2*x")


def test_relatedness_nonlinear_pullback():
    src = Chart("s", 1)
    x = src.add("x", EVEN, (0,))
    tgt = Chart("t", 1)
    y = tgt.add("y", EVEN, (0,))
    # phi(x) = x^2, X = x d/dx, Y = 2 y d/dy: X(phi* y) = 2x^2 = phi*(Y y)
    pullback = {y: src.poly("x^2")}
    x_field = Derivation(src, {x: x.poly()})
    y_field = Derivation(tgt, {y: tgt.poly("2*y")})
    assert all(r.is_zero for r in related(pullback, x_field, y_field).values())


# ---------------------------------------------------------------------------
# bracket tables


def poisson_chart():
    c = Chart("pq", 1)
    q = c.add("q", EVEN, (0,))
    p = c.add("p", EVEN, (0,))
    return c, q, p


def odd_chart():
    c = Chart("odd", 1)
    x = c.add("x", EVEN, (0,))
    th = c.add("th", ODD, (1,))
    return c, x, th


def test_poisson_table_basics():
    c, q, p = poisson_chart()
    t = BracketTable(c, EVEN, {(q, p): c.one()})
    assert t.bracket(c.poly("q^2*p"), q.poly()) == c.poly("-q^2")
    assert t.bracket(q.poly(), c.poly("q^2*p")) == c.poly("q^2")
    assert all(r.is_zero for r in t.jacobi_residuals().values())
    h = t.hamiltonian_field(c.poly("q^2*p"))
    assert h.coefficient(q) == c.poly("-q^2")
    assert h.coefficient(p) == c.poly("2*q*p")


def test_table_validation():
    c, x, th = odd_chart()
    # entry parity must be px + pth + eps
    with pytest.raises(ParityError):
        BracketTable(c, ODD, {(th, th): x.poly()})
    # {th, th} is forced to vanish for eps = 1
    with pytest.raises(KernelError):
        BracketTable(c, ODD, {(th, th): th.poly() * 2})
    # even diagonal is forced for eps = 0
    with pytest.raises(KernelError):
        BracketTable(c, EVEN, {(x, x): x.poly()})
    # legal: even generator diagonal with eps = 1
    t = BracketTable(c, ODD, {(x, x): c.poly("2*x*th")})
    assert t.value(x, x) == c.poly("2*x*th")


def test_bracket_graded_antisymmetry_any_table():
    c, x, th = odd_chart()
    rng = random.Random(3)
    t = BracketTable(
        c, ODD, {(x, x): c.poly("2*x*th"), (x, th): c.poly("1 + x^2"), }
    )
    for _ in range(40):
        f = random_homogeneous(c, rng, rng.choice([0, 1]), nterms=2)
        g = random_homogeneous(c, rng, rng.choice([0, 1]), nterms=2)
        if f.is_zero or g.is_zero:
            continue
        sign = -1 if ((f.parity() ^ 1) & (g.parity() ^ 1)) else 1
        assert t.bracket(f, g) == -sign * t.bracket(g, f)


def test_bracket_leibniz_in_both_slots():
    c, x, th = odd_chart()
    rng = random.Random(29)
    t = BracketTable(c, ODD, {(x, th): c.poly("1 + x")})
    for _ in range(40):
        f = random_homogeneous(c, rng, rng.choice([0, 1]), nterms=2)
        g = random_homogeneous(c, rng, rng.choice([0, 1]), nterms=2)
        h = random_poly(c, rng, nterms=2)
        if f.is_zero or g.is_zero:
            continue
        pf, pg = f.parity(), g.parity()
        # second slot
        sign = -1 if ((pf ^ 1) & pg) else 1
        assert t.bracket(f, g * h) == t.bracket(f, g) * h + sign * (g * t.bracket(f, h))
        # first slot, h homogeneous
        h2 = random_homogeneous(c, rng, rng.choice([0, 1]), nterms=2)
        if h2.is_zero:
            continue
        sign2 = -1 if ((h2.parity() ^ 1) & pg) else 1
        assert t.bracket(f * g, h2) == sign2 * (t.bracket(f, h2) * g) + f * t.bracket(g, h2)


def test_odd_symplectic_jacobi_and_hamiltonian():
    c, x, th = odd_chart()
    t = BracketTable(c, ODD, {(x, th): c.one()})
    assert all(r.is_zero for r in t.jacobi_residuals().values())
    # hamiltonian fields preserve the bracket ...
    for h in ("x^3", "x^2*th", "x*th"):
        xh = t.hamiltonian_field(c.poly(h))
        assert all(r.is_zero for r in t.leibniz_residuals(xh).values())
    # ... and [X_f, X_g] = X_{f,g}
    for f, g in (("x^3", "x*th"), ("x*th", "th"), ("x^2*th", "x*th")):
        xf = t.hamiltonian_field(c.poly(f))
        xg = t.hamiltonian_field(c.poly(g))
        assert commutator(xf, xg) == t.hamiltonian_field(t.bracket(c.poly(f), c.poly(g)))


def test_leibniz_residuals_detect_breakage():
    c, x, th = odd_chart()
    t = BracketTable(c, ODD, {(x, th): c.one()})
    good = t.hamiltonian_field(c.poly("x^3"))
    assert all(r.is_zero for r in t.leibniz_residuals(good).values())
    # a non-hamiltonian odd field leaves a residual on the diagonal pair
    q_bad = Derivation(c, {x: th.poly(), th: c.zero()})
    res = t.leibniz_residuals(q_bad)
    assert res[(x, x)] == c.const(2)
