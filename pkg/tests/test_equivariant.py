"""Tests for group actions, resolutions, orbits/fixed points, norm, Tate.

The periodic resolutions (2-periodic for Sigma_2, the mod-3 pattern for
Sigma_3) live here as independent oracles; the engine itself only knows the
generic greedy resolution.
"""

import pytest

from tcalc.chain import ChainComplex, ChainMap, DegreeWindow, sphere
from tcalc.equivariant import (
    EquivariantComplex, group_resolution, homotopy_fixed, homotopy_orbits,
    induced_from_trivial_subgroup, is_free, norm_map, permutation_module,
    regular_module, sign_action, strict_fixed, strict_orbits, tate,
    tensor_power, trivial_action,
)
from tcalc.fields import F2, F3, QQ
from tcalc.perms import YoungGroup, all_surjections, set_partitions
from tcalc.sparse import SparseMatrix

S2 = YoungGroup.of(2)
S3 = YoungGroup.of(3)


# ---------------------------------------------------------------------------
# groups / permutation modules
# ---------------------------------------------------------------------------


def test_young_group_basics():
    g = YoungGroup.of(2, 2)
    assert g.order == 4
    assert g.generator_positions() == [0, 2]
    assert len(g.elements()) == 4
    assert len(S3.elements()) == 6
    w = S3.reduced_word((2, 0, 1))
    # verify the word composes back to the permutation
    from tcalc.perms import compose, identity_perm, transposition
    p = identity_perm(3)
    for i in w:
        p = compose(p, transposition(3, i))
    assert p == (2, 0, 1)


def test_surjections_and_partitions():
    assert len(all_surjections(3, 2)) == 6
    assert len(all_surjections(2, 2)) == 2
    assert len(set_partitions([0, 1, 2])) == 5
    assert len(set_partitions([0, 1, 2, 3])) == 15


def test_regular_module_and_freeness():
    reg = regular_module(F2, S2)
    assert is_free(reg)
    assert reg.complex.dim(0) == 2
    triv = trivial_action(sphere(F2, 0), S2)
    assert not is_free(triv)


def test_injections_as_sigma2_set():
    # injections {1,2} -> {1,2}: free rank-2 module
    surj = all_surjections(2, 2)
    table = {0: [1, 0]}
    m = permutation_module(F2, S2, [("inj", s) for s in surj], table)
    assert is_free(m)


def test_coxeter_validation_rejects_bad_action():
    c = ChainComplex(F3, {0: 2})
    bad = SparseMatrix.from_rows([[1, 1], [0, 1]], F3)
    act = {0: ChainMap(c, c, {0: bad}, check=False)}
    with pytest.raises(ValueError):
        EquivariantComplex(c, S2, act)  # s^2 != 1 over F_3


# ---------------------------------------------------------------------------
# tensor powers
# ---------------------------------------------------------------------------


def test_tensor_power_koszul_sign():
    # (S^1)^{(x)2} = S^2 with swap acting by -1
    t = tensor_power(sphere(QQ, 1), 2)
    m = t.action[0].component(2)
    assert m[0, 0] == QQ.coerce(-1)
    # (S^2)^{(x)2} = S^4 with trivial swap
    t2 = tensor_power(sphere(QQ, 2), 2)
    assert t2.action[0].component(4)[0, 0] == QQ.one()


def test_tensor_power_relations():
    from tcalc.chain import direct_sum
    x = direct_sum([sphere(QQ, 0), sphere(QQ, 1)])
    t = tensor_power(x, 2)
    t.validate()
    t3 = tensor_power(sphere(F2, 1), 3)
    t3.validate()


# ---------------------------------------------------------------------------
# resolutions and derived functors
# ---------------------------------------------------------------------------


def test_resolution_sigma2_minimal():
    res = group_resolution(F2, S2)
    res.extend_to(6)
    assert res.ranks[:7] == [1, 1, 1, 1, 1, 1, 1]


def periodic_bs2_oracle(k):
    """H_s(B Sigma_2; F_2) = F_2 for all s >= 0 (2-periodic resolution)."""
    return 1 if k >= 0 else 0


def test_orbits_trivial_group():
    triv = trivial_action(sphere(F2, 0), YoungGroup.of(1))
    w = DegreeWindow(0, 4)
    o = homotopy_orbits(triv, w)
    assert o.homology_dims() == {0: 1}


def test_orbits_bs2_f2():
    a = trivial_action(sphere(F2, 0), S2)
    w = DegreeWindow(0, 5)
    o = homotopy_orbits(a, w)
    for k in range(0, 6):
        assert o.homology(k)[0] == periodic_bs2_oracle(k), k


def test_orbits_free_module():
    a = regular_module(F2, S2)
    w = DegreeWindow(0, 5)
    o = homotopy_orbits(a, w)
    dims = o.homology_dims()
    assert dims == {0: 1}


def test_fixed_bs2_f2():
    a = trivial_action(sphere(F2, 0), S2)
    w = DegreeWindow(-5, 0)
    f = homotopy_fixed(a, w)
    for k in range(-5, 1):
        assert f.homology(k)[0] == 1, k


def test_fixed_rational():
    a = trivial_action(sphere(QQ, 0), S2)
    w = DegreeWindow(-5, 0)
    f = homotopy_fixed(a, w)
    assert f.homology_dims() == {0: 1}


def test_orbits_sigma3_f3_periodic_oracle():
    # H_s(Sigma_3; F_3) = F_3 for s = 0, 3 mod 4 (4-periodic pattern)
    a = trivial_action(sphere(F3, 0), S3)
    w = DegreeWindow(0, 8)
    o = homotopy_orbits(a, w)
    expect = {0: 1, 3: 1, 4: 1, 7: 1, 8: 1}
    assert o.homology_dims() == expect


def test_orbits_sigma3_f2():
    # H_*(Sigma_3; F_2) = H_*(Sigma_2; F_2) (odd part invisible): dim 1 each degree
    a = trivial_action(sphere(F2, 0), S3)
    w = DegreeWindow(0, 5)
    o = homotopy_orbits(a, w)
    assert o.homology_dims() == {k: 1 for k in range(6)}


def test_window_stability_plus_two_stages():
    a = trivial_action(sphere(F2, 0), S2)
    w = DegreeWindow(0, 4)
    d1 = homotopy_orbits(a, w).homology_dims()
    d2 = homotopy_orbits(a, w, extra_stages=2).homology_dims()
    assert d1 == d2
    f1 = homotopy_fixed(a, DegreeWindow(-4, 0)).homology_dims()
    f2 = homotopy_fixed(a, DegreeWindow(-4, 0), extra_stages=2).homology_dims()
    assert f1 == f2


# ---------------------------------------------------------------------------
# norm and Tate
# ---------------------------------------------------------------------------


def complete_resolution_tate_oracle(k):
    """Tate of F_2 over Sigma_2 from the 2-periodic complete resolution:
    one-dimensional in every degree."""
    return 1


def test_tate_trivial_f2():
    a = trivial_action(sphere(F2, 0), S2)
    w = DegreeWindow(-4, 4)
    t = tate(a, w)
    for k in range(-4, 5):
        assert t.homology(k)[0] == complete_resolution_tate_oracle(k), k


def test_tate_rational_vanishes():
    a = trivial_action(sphere(QQ, 0), S2)
    t = tate(a, DegreeWindow(-4, 4))
    assert t.is_acyclic()


def test_tate_free_vanishes():
    a = regular_module(F2, S2)
    t = tate(a, DegreeWindow(-4, 4))
    assert t.is_acyclic()


def test_norm_quasi_iso_on_free_and_rational():
    from tcalc.chain import is_quasi_iso
    w = DegreeWindow(-3, 3)
    wide = w.expand(1)
    a = regular_module(F2, S2)
    nm = norm_map(a, wide)
    assert cone_acyclic_on(nm, w)
    b = trivial_action(sphere(QQ, 0), S2)
    nm2 = norm_map(b, wide)
    assert cone_acyclic_on(nm2, w)


def cone_acyclic_on(f, w):
    from tcalc.chain import cone
    return cone(f).is_acyclic(w)


def test_norm_identity_for_trivial_group():
    g1 = YoungGroup.of(1)
    a = trivial_action(sphere(F2, 0), g1)
    nm = norm_map(a, DegreeWindow(-2, 2))
    assert cone_acyclic_on(nm, DegreeWindow(-1, 1))


def test_induced_module_tate_vanishes():
    # B (+) B with swap exchanging the summands: Tate acyclic
    b = sphere(F2, 0)
    ind = induced_from_trivial_subgroup(b, S2)
    assert is_free(ind)
    t = tate(ind, DegreeWindow(-3, 3))
    assert t.is_acyclic()


def test_tate_sigma3_trivial_f2():
    # Tate_{Sigma_3}(F_2) = Tate_{Sigma_2}(F_2) stable classes: dim 1 per degree
    a = trivial_action(sphere(F2, 0), S3)
    t = tate(a, DegreeWindow(-3, 3))
    assert t.homology_dims() == {k: 1 for k in range(-3, 4)}


# ---------------------------------------------------------------------------
# strict (co)invariants
# ---------------------------------------------------------------------------


def test_strict_orbits_regular():
    a = regular_module(F2, S2)
    q, proj = strict_orbits(a)
    assert q.dim(0) == 1
    proj.validate()


def test_strict_fixed_inclusion():
    a = regular_module(QQ, S2)
    f, inc = strict_fixed(a)
    assert f.dim(0) == 1
    inc.validate()


def test_strict_orbits_vs_homotopy_orbits_free():
    a = regular_module(F2, S2)
    w = DegreeWindow(0, 4)
    o = homotopy_orbits(a, w)
    q, _ = strict_orbits(a)
    assert o.homology_dims() == {k: d for k, d in
                                 ((k, q.homology(k)[0]) for k in range(0, 5)) if d}


def test_sign_module_tate_f2_and_q():
    s = sign_action(sphere(F2, 0), S2)
    t = tate(s, DegreeWindow(-3, 3))
    # over F_2 sign = trivial
    assert t.homology_dims() == {k: 1 for k in range(-3, 4)}
    sq = sign_action(sphere(QQ, 0), S2)
    assert tate(sq, DegreeWindow(-3, 3)).is_acyclic()


def test_windowed_result_refuses_outside_window():
    a = trivial_action(sphere(F2, 0), S2)
    o = homotopy_orbits(a, DegreeWindow(0, 3))
    with pytest.raises(ValueError):
        o.homology(10)
