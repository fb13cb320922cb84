"""Operad and cooperad layer: trees, bar construction, nerve oracle, plethysm."""

import random
from math import factorial

import pytest

from tcalc.chain import DegreeWindow, sphere
from tcalc.equivariant import trivial_action
from tcalc.fields import F2, F3, QQ
from tcalc.operads import (
    BarConstruction, Cooperad, Operad, RightModule, SymmetricSequence,
    bar_construction, check_coassociativity, commutative_operad,
    partition_poset_nerve, plethysm, spectral_lie, tree_cooperad,
    tree_equivariant, unit_sequence, validate_right_module,
)
from tcalc.perms import YoungGroup, set_partitions


# ---------------------------------------------------------------------------
# tree model
# ---------------------------------------------------------------------------


def test_tree_complex_dims():
    t2 = tree_equivariant(QQ, 2).complex
    assert {k: t2.dim(k) for k in t2.support()} == {1: 1}
    t3 = tree_equivariant(QQ, 3).complex
    assert {k: t3.dim(k) for k in t3.support()} == {1: 1, 2: 3}
    t4 = tree_equivariant(QQ, 4).complex
    assert {k: t4.dim(k) for k in t4.support()} == {1: 1, 2: 10, 3: 15}


@pytest.mark.parametrize("n,F", [(2, QQ), (3, QQ), (4, QQ), (3, F2), (4, F2)])
def test_tree_homology_concentrated(n, F):
    t = tree_equivariant(F, n).complex
    for k in t.support():
        want = factorial(n - 1) if k == n - 1 else 0
        assert t.homology(k)[0] == want, (n, k)


def test_tree_action_coxeter():
    for n in (2, 3, 4):
        tree_equivariant(QQ, n).validate()


def test_cooperad_counit_laws():
    coop = tree_cooperad(QQ, 4)
    for n in range(1, 5):
        # indiscrete: unit (x) T_n component is the identity through T(1)
        blocks = (tuple(range(n)),)
        d = coop.decomposition(n, blocks)
        assert d is not None
        src = coop.term_complex(n)
        for k in src.dims:
            m = d.component(k)
            assert len(m.entries) == src.dim(k)
        # discrete: T_n (x) units
        blocks = tuple((i,) for i in range(n))
        d2 = coop.decomposition(n, blocks)
        for k in src.dims:
            m = d2.component(k)
            assert len(m.entries) == src.dim(k)


def test_cooperad_coassociative_all_small():
    for F in (QQ, F2):
        coop = tree_cooperad(F, 4)
        for n in (2, 3, 4):
            parts = set_partitions(list(range(n)))
            for coarse in parts:
                for fine in parts:
                    from tcalc.perms import refines
                    if refines(fine, coarse) and fine != coarse:
                        assert check_coassociativity(coop, n, coarse, fine), \
                            (F, n, coarse, fine)


def test_spectral_lie_homology():
    op = spectral_lie(QQ, 4)
    d2 = op.term_complex(2)
    assert d2.homology(-1)[0] == 1
    d3 = op.term_complex(3)
    assert d3.homology(-2)[0] == 2
    assert d3.homology(-1)[0] == 0
    d4 = op.term_complex(4)
    assert d4.homology(-3)[0] == 6


def test_spectral_lie_associativity_instance():
    # gamma(gamma(x; y) ; z) = gamma(x; gamma(y; z)) on a composable pattern:
    # arity pattern 2 -> (1, 2) -> ((1), (1, 1)) inside truncation 3
    from tcalc.chain import ChainMap, tensor_map
    from tcalc.operads import (_retarget, _retarget_map, _same_map,
                               tensor_reorder_map)
    from tcalc.chain import tensor_many
    op = spectral_lie(F2, 3)
    F = F2
    # route 1: (gamma_{2,(1,2)} (x) id (x) id (x) id) then gamma_{3,(1,1,1)}...
    # keep it concrete: m = P_2, comp = (1,2): s = 3
    g1 = op.composition(2, (1, 2))   # P_2 (x) P_1 (x) P_2 -> P_3
    g2 = op.composition(3, (1, 1, 1))  # P_3 (x) P_1^3 -> P_3
    g3 = op.composition(2, (1, 2))
    assert g1 is not None and g2 is not None
    p1, p2, p3 = op.term_complex(1), op.term_complex(2), op.term_complex(3)
    idp = ChainMap.identity(p1)
    big = g1
    for _ in range(3):
        big = tensor_map(big, idp)
    src = tensor_many([p2, p1, p2, p1, p1, p1])
    big = _retarget(big, src)
    mid = tensor_many([p3, p1, p1, p1])
    route1 = g2.compose(_retarget_map(big, mid))
    # route 2: gamma on inner factors first: P_1 . (1) and P_2 . (1,1)
    ga = op.composition(1, (1,))
    gb = op.composition(2, (1, 1))
    maps = [ChainMap.identity(p2), ga, gb]
    # factors must be grouped: [p2, (p1 ; p1), (p2 ; p1, p1)]
    perm = [0, 1, 3, 2, 4, 5]
    reorder = tensor_reorder_map([p2, p1, p2, p1, p1, p1], perm, F)
    big2 = maps[0]
    big2 = tensor_map(big2, ga)
    big2 = tensor_map(big2, gb)
    big2 = _retarget(big2, reorder.target)
    mid2 = tensor_many([p2, p1, p2])
    route2 = g3.compose(_retarget_map(big2.compose(reorder), mid2))
    assert _same_map(route1, route2)


# ---------------------------------------------------------------------------
# bar construction and nerve oracle
# ---------------------------------------------------------------------------


def test_bar_normalized_homology():
    com = commutative_operad(F2, 4)
    bc, normalized, coop = bar_construction(com)
    for n, rank in ((2, 1), (3, 2), (4, 6)):
        c = normalized[n]
        for k in c.support():
            want = rank if k == n - 1 else 0
            assert c.homology(k)[0] == want, (n, k)
    assert normalized[1].dims == {0: 1}


def test_bar_simplicial_identities():
    com = commutative_operad(QQ, 3)
    bc = BarConstruction(com)
    assert bc.simplicial_identities_hold()


def test_bar_leveled_dims_match_chain_count():
    com = commutative_operad(QQ, 4)
    bc = BarConstruction(com)
    # level s at arity n: weakly decreasing chains of s-1 partitions
    assert bc.levels[(1, 4)].dim(0) == 1
    assert bc.levels[(2, 4)].dim(0) == 15
    # normalized arity 4: 1, 13, 18
    n4 = bc.normalized[4]
    assert {k: n4.dim(k) for k in n4.support()} == {1: 1, 2: 13, 3: 18}


def test_partition_nerve_oracle():
    for n, rank in ((2, 1), (3, 2), (4, 6)):
        nerve, comparison = partition_poset_nerve(F2, n)
        dims = {k: comparison.homology(k)[0] for k in comparison.support()}
        dims = {k: v for k, v in dims.items() if v}
        assert dims == {n - 1: rank}, (n, dims)
    # n = 4 nerve has 13 vertices
    nerve, _ = partition_poset_nerve(QQ, 4)
    assert nerve.complex.dim(0) == 13
    nerve.validate()


def test_bar_vs_nerve_cross_oracle():
    com = commutative_operad(F3, 4)
    bc, normalized, _ = bar_construction(com)
    for n in (2, 3, 4):
        _, comparison = partition_poset_nerve(F3, n)
        a = {k: normalized[n].homology(k)[0] for k in range(0, 5)}
        b = {k: comparison.homology(k)[0] for k in range(0, 5)}
        assert a == b, n


# ---------------------------------------------------------------------------
# plethysm
# ---------------------------------------------------------------------------


def random_sequence(rng, F, N=3, tiny=True):
    terms = {}
    for n in range(1, N + 1):
        if rng.random() < 0.8:
            deg = rng.randint(0, 1)
            terms[n] = trivial_action(sphere(F, deg, label="a%d" % n),
                                      YoungGroup.full(n))
    if not terms:
        terms[1] = trivial_action(sphere(F, 0), YoungGroup.full(1))
    return SymmetricSequence(F, N, terms)


def test_plethysm_unit_laws():
    rng = random.Random(11)
    a = random_sequence(rng, F2)
    one = unit_sequence(F2, a.truncation)
    left = plethysm(a, one)
    right = plethysm(one_padded(one, a.truncation), a) if False else None
    for n in a.arities():
        assert left.term_complex(n).dims == a.term_complex(n).dims


def one_padded(one, N):
    return SymmetricSequence(one.field, N, dict(one.terms))


def test_plethysm_unit_left():
    rng = random.Random(13)
    a = random_sequence(rng, QQ)
    one = one_padded(unit_sequence(QQ), a.truncation)
    out = plethysm(one, a)
    for n in a.arities():
        assert out.term_complex(n).dims == a.term_complex(n).dims


def test_plethysm_dims_arity2():
    F = QQ
    a = random_sequence(random.Random(5), F)
    b = random_sequence(random.Random(6), F)
    out = plethysm(a, b)
    d_a1 = a.term_complex(1).total_dim()
    d_a2 = a.term_complex(2).total_dim()
    d_b1 = b.term_complex(1).total_dim()
    d_b2 = b.term_complex(2).total_dim()
    assert out.term_complex(2).total_dim() == d_a1 * d_b2 + d_a2 * d_b1 ** 2


def test_plethysm_associativity_dims():
    rng = random.Random(21)
    for _ in range(3):
        a = random_sequence(rng, F2)
        b = random_sequence(rng, F2)
        c = random_sequence(rng, F2)
        left = plethysm(plethysm(a, b), c)
        right = plethysm(a, plethysm(b, c))
        for n in range(1, 4):
            assert left.term_complex(n).dims == right.term_complex(n).dims, n


def test_plethysm_action_valid():
    rng = random.Random(31)
    a = random_sequence(rng, QQ, N=3)
    b = random_sequence(rng, QQ, N=3)
    out = plethysm(a, b)
    for n in out.arities():
        out.term(n).validate()


def test_plethysm_com_com():
    com = commutative_operad(QQ, 3).sequence
    out = plethysm(com, com)
    assert out.term_complex(2).total_dim() == 2


# ---------------------------------------------------------------------------
# operads and modules
# ---------------------------------------------------------------------------


def test_commutative_operad_terms():
    com = commutative_operad(F2, 4)
    for n in range(1, 5):
        assert com.term_complex(n).dims == {0: 1}
    g = com.composition(2, (1, 1))
    assert g is not None and g.component(0)[0, 0] == F2.one()


def test_unit_sequence_is_valid_module():
    for op in (commutative_operad(F2, 3), spectral_lie(F2, 3)):
        one = unit_sequence(op.field, op.truncation)
        action = {}
        # only the unit pattern exists for the unit sequence
        from tcalc.chain import ChainMap, tensor_many
        src = tensor_many([one.term_complex(1), op.term_complex(1)])
        from tcalc.sparse import SparseMatrix
        m = SparseMatrix(1, 1, op.field)
        m[0, 0] = op.field.one()
        action[(1, (1,))] = ChainMap(src, one.term_complex(1), {0: m},
                                     check=False)
        mod = RightModule(op, one, action)
        report = validate_right_module(mod)
        assert report["valid"], report


def test_corrupted_module_reported():
    op = spectral_lie(F2, 3)
    one = unit_sequence(op.field, op.truncation)
    from tcalc.chain import ChainMap, tensor_many
    src = tensor_many([one.term_complex(1), op.term_complex(1)])
    action = {(1, (1,)): ChainMap.zero(src, one.term_complex(1))}
    mod = RightModule(op, one, action)
    report = validate_right_module(mod)
    assert not report["valid"]
