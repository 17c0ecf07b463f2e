"""Tests for multi-graded bundle transitions, duals and the neighbor graph."""

import pytest

from gverify.bundles import (
    BundleError,
    DoubleBundle,
    NFoldBundle,
    P_MIX,
    S1,
    S2,
    SC,
    STRUCTURE_BEARING,
    check_pi_commute,
    neighbor_graph,
    normalize_word,
    pairing_check,
    set_partitions,
    subsets_of,
)


def even_double(mix=True):
    return DoubleBundle.build(
        base=[("x", 0)],
        side1=(("u1", "u2"), (0, 0)),
        side2=(("w1",), (0,)),
        core=(("z1",), (0,)),
        t_side1=[["1", "x"], ["0", "1"]],
        t_side2=[["2"]],
        t_core=[["1 + x"]],
        t_mix=[[["3*x"]], [["1"]]] if mix else None,
    )


def constant_double():
    return DoubleBundle.build(
        base=[("x", 0)],
        side1=(("u1",), (0,)),
        side2=(("w1",), (0,)),
        core=(("z1",), (0,)),
        t_side1=[["1"]],
        t_side2=[["2"]],
        t_core=[["3"]],
        t_mix=[[["5"]]],
    )


def identity_ok(nf):
    for s in nf.family_subsets():
        for part in set_partitions(s):
            for idx, p in nf.tensor(s, part).items():
                linear = len(part) == 1 and idx[0] == idx[-1]
                if linear and p.text() != "1":
                    return False
                if not linear and not p.is_zero:
                    return False
    return True


def test_subsets_and_partitions():
    assert subsets_of(2) == [(1,), (2,), (1, 2)]
    assert subsets_of(3)[:3] == [(1,), (2,), (3,)]
    assert set_partitions((1, 2)) == [((1, 2),), ((1,), (2,))]
    parts3 = set_partitions((1, 2, 3))
    assert len(parts3) == 5
    assert parts3[0] == ((1, 2, 3),)
    assert ((1,), (2,), (3,)) in parts3
    # blocks are ordered by (size, smallest element)
    assert ((3,), (1, 2)) in parts3


def test_chart_weights_and_law_text():
    db = even_double()
    chart = db.chart
    assert chart.var("u1").weight == (1, 0)
    assert chart.var("w1").weight == (0, 1)
    assert chart.var("z1").weight == (1, 1)
    assert db.nf.law(S1, 0).text() == "u1'"
    assert db.nf.law(S1, 1).text() == "x*u1' + u2'"
    assert db.nf.law(S2, 0).text() == "2*w1'"
    assert db.nf.law(SC, 0).text() == "3*x*u1'*w1' + x*z1' + u2'*w1' + z1'"


def test_validation_catches_parity_violation():
    bad = DoubleBundle.build(
        base=[("x", 0)],
        side1=(("u1",), (1,)),
        side2=(("w1",), (0,)),
        core=(("z1",), (0,)),
        t_side1=[["1"]],
        t_side2=[["1"]],
        t_core=[["1"]],
        t_mix=[[["1"]]],
    )
    report = bad.validate()
    assert not report["valid"]
    assert any("parity violation" in p for p in report["problems"])


def test_validation_catches_singular_block():
    bad = DoubleBundle.build(
        base=[("x", 0)],
        side1=(("u1",), (0,)),
        side2=(("w1",), (0,)),
        core=(("z1",), (0,)),
        t_side1=[["x"]],
        t_side2=[["1"]],
        t_core=[["1"]],
    )
    report = bad.validate()
    assert not report["valid"]
    assert any("singular" in p for p in report["problems"])


def test_invert_compose_identity():
    db = even_double()
    inv = db.nf.invert(degree=6)
    assert identity_ok(db.nf.compose(inv, degree=6))
    assert identity_ok(inv.compose(db.nf, degree=6))


def test_reverse_parity_involution_and_signs():
    db = even_double()
    flipped = db.reverse_parity(1)
    assert flipped.parities(S1) == (1, 1)
    assert flipped.parities(S2) == (0,)
    assert flipped.parities(SC) == (1,)
    back = flipped.reverse_parity(1)
    assert back.nf.parities == db.nf.parities
    assert back.nf.transitions_equal(db.nf)
    # direction 1 block leads the mixed term: no sign on the mixed tensor
    assert flipped.nf.transitions_equal(db.nf)
    # flipping direction 2 after direction 1 negates mixed entries with an
    # odd leading factor (here every u is odd)
    both = flipped.reverse_parity(2)
    m0 = db.mixed_tensor()
    m1 = both.mixed_tensor()
    home = db.nf.base_chart
    for k, v in m0.items():
        v1 = m1[k]
        if v1.chart is not home:
            v1 = v1.substitute({}, target=home)
        assert v1 == -v


def test_pi_commute_up_to_core_sign():
    rep = check_pi_commute(even_double())
    assert rep["agree_up_to_core_sign"] and not rep["exact"]
    rep0 = check_pi_commute(even_double(mix=False))
    assert rep0["agree_up_to_core_sign"] and rep0["exact"]


def test_dual_tensors_frozen_constant_example():
    db = constant_double()
    da = db.dualize(1)
    # side 2 becomes the dual core: (Tz^T)^(-1) = 1/3
    assert da.tensor_matrix(S2)[0][0].text() == "1/3"
    # core becomes the dual of the replaced side: (Tw^T)^(-1) = 1/2
    assert da.tensor_matrix(SC)[0][0].text() == "1/2"
    # mixed entry: -Tm * A * B = -5/6
    assert da.mixed_tensor()[(0, 0, 0)].text() == "-5/6"
    assert da.names(S2) == ("z1_",)
    assert da.names(SC) == ("w1_",)
    dbB = db.dualize(2)
    assert dbB.tensor_matrix(S1)[0][0].text() == "1/3"
    assert dbB.tensor_matrix(SC)[0][0].text() == "1"
    assert dbB.mixed_tensor()[(0, 0, 0)].text() == "-5/3"
    assert dbB.names(S1) == ("z1_",)
    assert dbB.names(SC) == ("u1_",)


def test_double_dual_round_trip_even():
    db = even_double()
    for direction in (1, 2):
        dd = db.dualize(direction, degree=6).dualize(direction, degree=6)
        assert dd.nf.parities == db.nf.parities
        assert dd.nf.transitions_equal(db.nf)


def test_double_dual_round_trip_odd_core_sign():
    db = even_double().reverse_parity(2)  # w, z odd
    dd = db.dualize(2, degree=6).dualize(2, degree=6)
    assert not dd.nf.transitions_equal(db.nf)
    assert dd.nf.transitions_equal(db.nf, scale={SC: -1})
    db1 = even_double().reverse_parity(1)  # u, z odd
    dd1 = db1.dualize(1, degree=6).dualize(1, degree=6)
    assert dd1.nf.transitions_equal(db1.nf)


def test_pairing_invariance():
    db = even_double()
    da, dbB = db.dualize(1, degree=6), db.dualize(2, degree=6)
    rep = pairing_check(da, dbB, degree=6)
    assert rep["invariant"]
    assert rep["core_laws_consistent"]
    assert not rep["mixed_tensor_zero"]
    # the '+' variant fails exactly when the mixed tensor is nonzero
    assert not pairing_check(da, dbB, degree=6, plus_variant=True)["invariant"]
    clean = even_double(mix=False)
    ca, cb = clean.dualize(1, degree=6), clean.dualize(2, degree=6)
    assert pairing_check(ca, cb, degree=6)["invariant"]
    assert pairing_check(ca, cb, degree=6, plus_variant=True)["invariant"]


def test_pairing_invariance_odd_fibers():
    for direction in (1, 2):
        db = even_double().reverse_parity(direction)
        rep = pairing_check(db.dualize(1, degree=6), db.dualize(2, degree=6), degree=6)
        assert rep["invariant"]


def test_pairing_provenance_errors():
    db = even_double()
    da, dbB = db.dualize(1), db.dualize(2)
    with pytest.raises(BundleError):
        pairing_check(da, da)
    with pytest.raises(BundleError):
        pairing_check(dbB, da)
    other = even_double()
    with pytest.raises(BundleError):
        pairing_check(da, other.dualize(2))
    with pytest.raises(BundleError):
        pairing_check(db, dbB)


def test_neighbor_graph_shape():
    g = neighbor_graph()
    assert len(g) == 12
    assert sorted(g) == sorted(
        [
            "D", "PiA(D)", "PiB(D)", "Pi2(D)",
            "D*A", "PiA(D*A)", "PiK(D*A)", "Pi2(D*A)",
            "D*B", "PiB(D*B)", "PiK(D*B)", "Pi2(D*B)",
        ]
    )
    assert all(len(n.edges) == 4 for n in g.values())
    # closure: every edge lands inside the graph
    assert all(t in g for n in g.values() for t in n.edges.values())
    starred = sorted(l for l in g if g[l].structure_bearing)
    assert starred == sorted(STRUCTURE_BEARING)
    assert len(starred) == 5


def test_neighbor_graph_involutions():
    g = neighbor_graph()
    for n in g.values():
        for op in ("P1", "P2"):
            assert g[n.edges[op]].edges[op] == n.label
        # each dual edge has a reciprocal dual edge from the target
        for op in ("D1", "D2"):
            target = g[n.edges[op]]
            assert any(target.edges[op2] == n.label for op2 in ("D1", "D2"))


def test_neighbor_graph_known_edges():
    g = neighbor_graph()
    assert g["D"].edges == {"P1": "PiB(D)", "P2": "PiA(D)", "D1": "D*A", "D2": "D*B"}
    assert g["Pi2(D)"].edges["D1"] == "PiK(D*A)"
    assert g["Pi2(D)"].edges["D2"] == "PiK(D*B)"
    assert g["D*A"].edges["D2"] == "D*B"
    assert g["PiK(D*A)"].edges["D1"] == "Pi2(D)"


def test_normalize_word():
    assert normalize_word([]) == "D"
    assert normalize_word(["P1", "P2"]) == "Pi2(D)"
    assert normalize_word(["D1", "P1"]) == "PiK(D*A)"
    assert normalize_word(["D2", "P2"]) == "PiK(D*B)"
    assert normalize_word(["P1", "P1", "D1", "D1"]) == "D"
    assert normalize_word(["D1", "D2", "D1", "D1"]) == "D"
    # six dual moves walk around the D -> *A -> *B triangle twice
    assert normalize_word(["D1", "D2", "D2", "D1", "D2", "D2"]) == "D"


def test_neighbor_graph_materialized():
    g = neighbor_graph(even_double(), degree=4)
    assert all(n.bundle is not None for n in g.values())
    assert g["Pi2(D*A)"].bundle.nf.parities == {S1: (1, 1), S2: (1,), SC: (0,)}
    assert g["PiK(D*B)"].bundle.nf.parities == {S1: (0,), S2: (1,), SC: (1, 1)}
    assert g["D"].bundle.nf.parities == {S1: (0, 0), S2: (0,), SC: (0,)}


def three_fold():
    return NFoldBundle.build(
        3,
        base=[("x", 0)],
        families={
            (1,): (("a1",), (0,)),
            (2,): (("b1",), (0,)),
            (3,): (("c1",), (0,)),
            (1, 2): (("p1",), (0,)),
            (1, 3): (("q1",), (0,)),
            (2, 3): (("r1",), (0,)),
            (1, 2, 3): (("t1",), (0,)),
        },
        transition={
            (1,): {((1,),): [["1 + x"]]},
            (2,): {((2,),): [["1"]]},
            (3,): {((3,),): [["2"]]},
            (1, 2): {((1, 2),): [["1"]], ((1,), (2,)): [[["x"]]]},
            (1, 3): {((1, 3),): [["1"]], ((1,), (3,)): [[["1"]]]},
            (2, 3): {((2, 3),): [["1"]]},
            (1, 2, 3): {
                ((1, 2, 3),): [["1 + x"]],
                ((1,), (2, 3)): [[["x"]]],
                ((2,), (1, 3)): [[["1"]]],
                ((3,), (1, 2)): [[["2*x"]]],
                ((1,), (2,), (3,)): [[[["5"]]]],
            },
        },
    )


def test_three_fold_top_law_has_all_partition_terms():
    nf = three_fold()
    assert nf.validate()["valid"]
    law = nf.law((1, 2, 3), 0)
    assert law.text() == (
        "x*a1'*r1' + 2*x*c1'*p1' + x*t1' + 5*a1'*b1'*c1' + b1'*q1' + t1'"
    )


def test_three_fold_invert_compose():
    nf = three_fold()
    inv = nf.invert(degree=5)
    assert identity_ok(nf.compose(inv, degree=5))
    assert identity_ok(inv.compose(nf, degree=5))


def test_three_fold_parity_reversal_involution():
    nf = three_fold().reverse_parity(2)
    assert nf.parities[(2,)] == (1,)
    assert nf.parities[(1, 2)] == (1,)
    assert nf.parities[(1, 2, 3)] == (1,)
    assert nf.parities[(1, 3)] == (0,)
    back = nf.reverse_parity(2)
    assert back.transitions_equal(three_fold())
