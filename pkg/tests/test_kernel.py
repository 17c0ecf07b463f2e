"""Unit tests for the exact graded polynomial kernel.

Products and derivatives are checked against an independent word-algebra
oracle: elements are kept as lists of (coefficient, word) pairs, words
are normalized by adjacent transpositions with explicit sign tracking,
and repeated odd letters kill a word.  The oracle never calls into the
kernel's monomial merge.
"""

import random
from fractions import Fraction

import pytest

from gverify.kernel import (
    EVEN,
    ODD,
    Chart,
    ChartMismatchError,
    ExprError,
    NormalizationError,
    ParityError,
    Poly,
    WeightError,
)

NAMES = ["x", "y", "e", "xi", "eta", "th"]
PARITY = {"x": 0, "y": 0, "e": 0, "xi": 1, "eta": 1, "th": 1}
WEIGHT = {
    "x": (0, 0),
    "y": (0, 0),
    "e": (1, 0),
    "xi": (1, 0),
    "eta": (0, 1),
    "th": (1, 1),
}
POS = {n: i for i, n in enumerate(NAMES)}


def make_chart():
    chart = Chart("test", 2)
    for n in NAMES:
        chart.add(n, PARITY[n], WEIGHT[n])
    return chart


# ---------------------------------------------------------------------------
# the word-algebra oracle


def oracle_normalize(word):
    """Bubble-sort a word into chart order; return (tuple, sign) or (None, 0)."""
    word = list(word)
    sign = 1
    changed = True
    while changed:
        changed = False
        for i in range(len(word) - 1):
            if POS[word[i]] > POS[word[i + 1]]:
                if PARITY[word[i]] and PARITY[word[i + 1]]:
                    sign = -sign
                word[i], word[i + 1] = word[i + 1], word[i]
                changed = True
    for i in range(len(word) - 1):
        if word[i] == word[i + 1] and PARITY[word[i]]:
            return None, 0
    return tuple(word), sign


def oracle_collect(pairs):
    out = {}
    for coeff, word in pairs:
        norm, sign = oracle_normalize(word)
        if norm is None:
            continue
        val = out.get(norm, Fraction(0)) + sign * coeff
        if val:
            out[norm] = val
        else:
            out.pop(norm, None)
    return out


def oracle_mul(f, g):
    return oracle_collect(
        [(cf * cg, wf + wg) for cf, wf in f for cg, wg in g]
    )


def oracle_partial(f, name):
    """Left derivative: delete one occurrence, sign from odd letters before it."""
    out = []
    for coeff, word in f:
        for pos, letter in enumerate(word):
            if letter != name:
                continue
            odd_before = sum(PARITY[l] for l in word[:pos])
            sign = -1 if PARITY[name] and odd_before % 2 else 1
            out.append((sign * coeff, word[:pos] + word[pos + 1 :]))
    return oracle_collect(out)


def to_poly(chart, pairs):
    total = chart.zero()
    for coeff, word in pairs:
        prod = chart.const(coeff)
        for name in word:
            prod = prod * chart.var(name).poly()
        total = total + prod
    return total


def poly_to_words(p):
    out = {}
    for mono, coeff in p.terms.items():
        word = []
        for idx, exp in mono:
            word.extend([p.chart.variables[idx].name] * exp)
        out[tuple(word)] = coeff
    return out


def random_pairs(rng, nterms=4, maxlen=4):
    pairs = []
    for _ in range(nterms):
        coeff = Fraction(rng.randint(-6, 6), rng.randint(1, 4))
        if coeff == 0:
            coeff = Fraction(1)
        word = tuple(rng.choice(NAMES) for _ in range(rng.randint(0, maxlen)))
        pairs.append((coeff, word))
    return pairs


# ---------------------------------------------------------------------------
# frozen examples


def test_anticommutation_and_square_zero():
    chart = make_chart()
    xi, eta = chart.var("xi"), chart.var("eta")
    assert xi.poly() * eta.poly() == -(eta.poly() * xi.poly())
    assert (xi.poly() * xi.poly()).is_zero
    x = chart.var("x").poly()
    p = x + xi.poly() * eta.poly()
    assert p * p == x * x + 2 * x * xi.poly() * eta.poly()


def test_left_derivative_frozen_signs():
    chart = make_chart()
    xi, eta = chart.var("xi"), chart.var("eta")
    m = xi.poly() * eta.poly()
    assert m.partial(eta) == -xi.poly()
    assert m.partial(xi) == eta.poly()
    x = chart.var("x")
    assert (x.poly() ** 3).partial(x) == 3 * x.poly() ** 2
    # letter past two odd factors: d/dth (xi eta th) = + xi eta
    th = chart.var("th")
    assert (m * th.poly()).partial(th) == m


def test_product_matches_word_oracle():
    chart = make_chart()
    rng = random.Random(17)
    for _ in range(150):
        f = random_pairs(rng)
        g = random_pairs(rng)
        kernel = to_poly(chart, f) * to_poly(chart, g)
        assert poly_to_words(kernel) == oracle_mul(f, g)


def test_partial_matches_word_oracle():
    chart = make_chart()
    rng = random.Random(23)
    for _ in range(150):
        f = random_pairs(rng, nterms=5)
        name = rng.choice(NAMES)
        kernel = to_poly(chart, f).partial(chart.var(name))
        assert poly_to_words(kernel) == oracle_partial(f, name)


def test_product_rule_left_derivative():
    chart = make_chart()
    rng = random.Random(5)
    for _ in range(80):
        # parity-homogeneous f: fix a parity, keep only matching words
        want = rng.choice([EVEN, ODD])
        f = [
            (c, w)
            for c, w in random_pairs(rng, nterms=6)
            if sum(PARITY[l] for l in w) % 2 == want
        ]
        g = random_pairs(rng)
        v = chart.var(rng.choice(NAMES))
        pf, pg = to_poly(chart, f), to_poly(chart, g)
        lhs = (pf * pg).partial(v)
        sign = -1 if v.parity and want else 1
        rhs = pf.partial(v) * pg + sign * (pf * pg.partial(v))
        assert lhs == rhs


def test_partials_graded_commute():
    chart = make_chart()
    rng = random.Random(11)
    for _ in range(80):
        f = to_poly(chart, random_pairs(rng, nterms=5))
        v = chart.var(rng.choice(NAMES))
        w = chart.var(rng.choice(NAMES))
        sign = -1 if v.parity and w.parity else 1
        assert f.partial(v).partial(w) == sign * f.partial(w).partial(v)


# ---------------------------------------------------------------------------
# grading bookkeeping


def test_parity_and_weight_of_monomials():
    chart = make_chart()
    p = chart.poly("3*xi*eta*th")
    assert p.parity() == ODD
    assert p.weight() == (2, 2)
    q = chart.poly("x*e^2")
    assert q.parity() == EVEN
    assert q.weight() == (2, 0)


def test_weight_error_lists_offending_weights():
    chart = make_chart()
    with pytest.raises(WeightError) as err:
        chart.poly("xi + th").weight()
    assert set(err.value.weights) == {(1, 0), (1, 1)}


def test_parity_error_on_mixed_sum():
    chart = make_chart()
    p = chart.poly("x + xi")
    assert not p.is_parity_homogeneous
    assert p.parity_or_none() is None
    with pytest.raises(ParityError):
        p.parity()


def test_degree_truncate_coefficient():
    chart = make_chart()
    x, y = chart.var("x"), chart.var("y")
    p = chart.poly("x^3 + x*y + y + 2")
    assert p.degree_in([x]) == 3
    assert p.truncate_in([x], 1) == chart.poly("x*y + y + 2")
    assert p.truncate_in([x, y], 1) == chart.poly("y + 2")
    q = chart.poly("x*xi*eta + 7*xi")
    assert q.coefficient_of([chart.var("xi"), chart.var("eta")]) == x.poly()
    assert q.coefficient_of([chart.var("eta"), chart.var("xi")]) == -x.poly()


# ---------------------------------------------------------------------------
# rendering and parsing


def test_render_parse_round_trip_random():
    chart = make_chart()
    rng = random.Random(31)
    for _ in range(120):
        p = to_poly(chart, random_pairs(rng, nterms=5))
        assert chart.poly(p.text()) == p


def test_render_zero_and_fractions():
    chart = make_chart()
    assert chart.zero().text() == "0"
    p = chart.poly("5/3*x - y")
    assert chart.poly(p.text()) == p
    assert chart.poly("-x + 2") == chart.const(2) - chart.var("x").poly()


def test_primed_names_parse():
    chart = Chart("primes", 1)
    chart.add("a'", EVEN, (1,))
    chart.add("a", EVEN, (0,))
    p = chart.poly("a'*a + a'")
    assert chart.poly(p.text()) == p


def test_parser_error_positions():
    chart = make_chart()
    with pytest.raises(ExprError) as err:
        chart.poly("x + ")
    assert (err.value.line, err.value.column) == (1, 5)
    with pytest.raises(ExprError) as err:
        chart.poly("x +\n y * nope")
    assert err.value.line == 2
    assert "nope" in str(err.value)
    with pytest.raises(ExprError):
        chart.poly("(x")
    with pytest.raises(ExprError):
        chart.poly("x^y")
    with pytest.raises(ExprError):
        chart.poly("1/0")
    with pytest.raises(ExprError):
        chart.poly("x ? y")


def test_strict_odd_powers():
    chart = make_chart()
    assert chart.poly("xi^2").is_zero
    with pytest.raises(NormalizationError):
        chart.poly("xi^2", strict_odd_powers=True)
    # a non-generator base squaring to zero is normalization, not an error
    assert chart.poly("(xi + eta)^2", strict_odd_powers=True).is_zero
    assert chart.poly("x^2", strict_odd_powers=True) == chart.var("x").poly() ** 2


# ---------------------------------------------------------------------------
# substitution


def test_substitute_is_algebra_map():
    chart = make_chart()
    rng = random.Random(41)
    x, y = chart.var("x"), chart.var("y")
    xi, eta = chart.var("xi"), chart.var("eta")
    images = {
        x: chart.poly("y^2 + 1"),
        xi: chart.poly("2*eta + y*xi"),
    }
    for _ in range(60):
        f = to_poly(chart, random_pairs(rng))
        g = to_poly(chart, random_pairs(rng))
        assert (f * g).substitute(images) == f.substitute(images) * g.substitute(images)
        assert (f + g).substitute(images) == f.substitute(images) + g.substitute(images)


def test_substitute_composition():
    chart = make_chart()
    rng = random.Random(43)
    x, xi, eta = chart.var("x"), chart.var("xi"), chart.var("eta")
    phi = {x: chart.poly("x + y"), xi: chart.poly("xi + eta")}
    psi = {x: chart.poly("x*y"), eta: chart.poly("y*eta")}
    comp = {v: img.substitute(psi) for v, img in phi.items()}
    comp.setdefault(chart.var("eta"), chart.poly("y*eta"))
    comp.setdefault(chart.var("y"), chart.poly("y"))
    for _ in range(60):
        f = to_poly(chart, random_pairs(rng))
        assert f.substitute(phi).substitute(psi) == f.substitute(comp)


def test_substitute_cross_chart_by_name():
    chart = make_chart()
    other = Chart("other", 2)
    for n in NAMES:
        other.add(n, PARITY[n], WEIGHT[n])
    other.add("extra", EVEN, (0, 0))
    p = chart.poly("x*xi + 3*eta")
    moved = p.substitute({}, target=other)
    assert moved.chart is other
    assert moved == other.poly("x*xi + 3*eta")


def test_substitute_parity_validation():
    chart = make_chart()
    with pytest.raises(ParityError):
        chart.poly("xi").substitute({chart.var("xi"): chart.poly("x")})
    with pytest.raises(ChartMismatchError):
        other = Chart("o", 2)
        other.add("z", EVEN, (0, 0))
        chart.poly("x").substitute({other.var("z"): chart.poly("x")})


def test_chart_mismatch_on_arithmetic():
    a = make_chart()
    b = make_chart()
    with pytest.raises(ChartMismatchError):
        a.poly("x") + b.poly("x")
