"""Symmetric sequences, plethysm, the bar construction on the commutative
operad, the partition-poset cooperad T_*, and its dual operad (the
derivatives-of-the-identity operad).

Two models of the bar construction coexist deliberately:

* ``bar_construction`` builds the honest leveled simplicial object
  1 o P^{o s} o 1 (basis: weakly decreasing chains of set partitions) and its
  normalized complex per arity.  It is the oracle side: homology ranks are
  cross-checked against ``partition_poset_nerve``.
* ``tree_cooperad`` builds T_* on the rooted-tree basis, where the ungrafting
  decomposition maps are exactly coassociative and counital.  Its arity-wise
  dual ``spectral_lie`` is the operad acting on everything downstream.  The
  two models coincide through arity 3 and have the same homology in arity 4.
"""

from __future__ import annotations

from itertools import product as _iterprod

from . import trees
from .chain import (
    ChainComplex, ChainMap, DegreeWindow, dual, sphere, tensor_many,
)
from .equivariant import EquivariantComplex, trivial_action
from .fields import FieldSpec
from .perms import (
    YoungGroup, apply_perm_to_partition, refines, set_partitions,
    transposition,
)
from .sparse import SparseMatrix


# ---------------------------------------------------------------------------
# Symmetric sequences
# ---------------------------------------------------------------------------


class SymmetricSequence:
    """N-truncated symmetric sequence of equivariant complexes."""

    def __init__(self, field: FieldSpec, truncation: int, terms):
        self.field = field
        self.truncation = truncation
        self.terms = {}
        for n, t in terms.items():
            if t is None or t.complex.is_zero():
                continue
            if not (1 <= n <= truncation):
                raise ValueError("term arity %d outside truncation %d" % (n, truncation))
            if t.group.blocks != (n,):
                raise ValueError("term %d must carry a full Sigma_%d action" % (n, n))
            self.terms[n] = t

    def term(self, n) -> EquivariantComplex | None:
        return self.terms.get(n)

    def term_complex(self, n) -> ChainComplex:
        t = self.terms.get(n)
        return t.complex if t else ChainComplex(self.field, {})

    def arities(self):
        return sorted(self.terms)

    def truncate(self, n) -> "SymmetricSequence":
        if n < 1:
            raise ValueError("truncation must be >= 1")
        return SymmetricSequence(self.field, n,
                                 {m: t for m, t in self.terms.items() if m <= n})

    def total_dim(self):
        return sum(t.complex.total_dim() for t in self.terms.values())

    def __repr__(self):
        return "SymmetricSequence(N=%d, arities %s)" % (self.truncation, self.arities())


def unit_sequence(field, truncation=1) -> SymmetricSequence:
    one = trivial_action(sphere(field, 0, label="unit"), YoungGroup.full(1))
    return SymmetricSequence(field, truncation, {1: one})


# ---------------------------------------------------------------------------
# Plethysm (composition product)
# ---------------------------------------------------------------------------


def _perm_of_blocks(p, blocks):
    """Blocks sorted by min; image blocks re-sorted; returns (tau, per-block perms).

    tau[i] = position of image of block i among the image blocks; the
    per-block permutation is the relabeling sorted(b) -> sorted(p(b)) induced
    by p, written as a permutation of {0..|b|-1}."""
    images = [tuple(sorted(p[x] for x in b)) for b in blocks]
    order = sorted(range(len(blocks)), key=lambda i: images[i][0])
    tau = [0] * len(blocks)
    for newpos, i in enumerate(order):
        tau[i] = newpos
    inner = []
    for b, img in zip(blocks, images):
        sb = sorted(b)
        pos_in_img = {x: t for t, x in enumerate(img)}
        inner.append(tuple(pos_in_img[p[x]] for x in sb))
    return tuple(tau), inner


def plethysm(a: SymmetricSequence, b: SymmetricSequence) -> SymmetricSequence:
    """(A o B)_n = (+) over set partitions P of {0..n-1} of A_r (x) (x)_i B_{|b_i|}."""
    if a.field != b.field:
        raise ValueError("field mismatch")
    F = a.field
    N = a.truncation
    out_terms = {}
    for n in range(1, N + 1):
        summands = []  # (partition, complex, factor complexes)
        for part in set_partitions(list(range(n))):
            r = len(part)
            if a.term(r) is None:
                continue
            if any(b.term(len(blk)) is None for blk in part):
                continue
            factors = [a.term_complex(r)] + [b.term_complex(len(blk)) for blk in part]
            summands.append((part, tensor_many(factors), factors))
        if not summands:
            continue
        from .chain import direct_sum
        total = direct_sum([c for _, c, _ in summands])
        relabeled = {}
        offset_of = {}
        for idx, (part, c, _) in enumerate(summands):
            offset_of[part] = idx
        # index: (summand idx, degree, position) -> global position
        pos = {}
        for k in total.dims:
            for i, lab in enumerate(total.labels[k]):
                idx, inner = lab
                pos[(idx, k, inner)] = i
        # build the Sigma_n action on generators
        action = {}
        group = YoungGroup.full(n)
        for gi in group.generator_positions():
            s = transposition(n, gi)
            comps = {}
            for k in total.dims:
                m = SparseMatrix(total.dim(k), total.dim(k), F)
                comps[k] = m
            for idx, (part, c, factors) in enumerate(summands):
                tgt_part = apply_perm_to_partition(s, part)
                tgt_idx = offset_of[tgt_part]
                tau, inner_perms = _perm_of_blocks(s, part)
                a_r = a.term(len(part))
                b_terms = [b.term(len(blk)) for blk in part]
                # map on the tensor factors: A_r gets tau, block i gets inner perm
                a_map = a_r.action_of(_extend_perm(tau))
                b_maps = [bt.action_of(_extend_perm(ip))
                          for bt, ip in zip(b_terms, inner_perms)]
                for k in c.dims:
                    for col, lab in enumerate(c.labels[k]):
                        # lab = (a_lab, b_lab_1, ..., b_lab_r) in summand order
                        srcpos = pos[(idx, k, lab)]
                        image = _plethysm_image(
                            F, lab, factors, a_map, b_maps, tau)
                        for (tgt_lab, deg2), v in image.items():
                            tgtpos = pos[(tgt_idx, k, tgt_lab)]
                            comps[k].add_to(tgtpos, srcpos, v)
            action[gi] = ChainMap(total, total, comps, check=False)
        new_labels = {}
        for k in total.dims:
            labs = []
            for lab in total.labels[k]:
                idx, inner = lab
                part = summands[idx][0]
                labs.append(("pleth", part, inner))
            new_labels[k] = tuple(labs)
        total2 = ChainComplex(F, total.dims, total.diff, new_labels, check=False)
        action2 = {gi: ChainMap(total2, total2, f.components, check=False)
                   for gi, f in action.items()}
        out_terms[n] = EquivariantComplex(total2, group, action2, check=False)
    return SymmetricSequence(F, N, out_terms)


def _extend_perm(p):
    return tuple(p)


def _plethysm_image(F, lab, factors, a_map, b_maps, tau):
    """Image of a tensor basis element under (a_map (x) b_maps) followed by
    reordering the b-factors along tau, with Koszul signs.

    Returns {(target label, degree): coefficient}."""
    # positions/degrees of each factor label
    deg_of = []
    idx_of = []
    for c, l in zip(factors, lab):
        found = None
        for k in c.dims:
            li = c.label_index(k)
            if l in li:
                found = (k, li[l])
                break
        deg_of.append(found[0])
        idx_of.append(found[1])
    maps = [a_map] + b_maps
    # apply each map factorwise; collect (coefficient, target label, degree)
    per_factor = []
    for (c, l), mp, k0, i0 in zip(zip(factors, lab), maps, deg_of, idx_of):
        comp = mp.component(k0)
        hits = []
        tgt = mp.target
        for (i2, j2), v in comp.entries.items():
            if j2 == i0:
                hits.append((tgt.labels[k0][i2], k0, v))
        per_factor.append(hits)
    out = {}
    for combo in _iterprod(*per_factor):
        coeff = F.one()
        new_lab = []
        degs = []
        for l2, k2, v in combo:
            coeff = F.mul(coeff, v)
            new_lab.append(l2)
            degs.append(k2)
        # reorder b-factors (positions 1..r) along tau with Koszul signs
        r = len(tau)
        b_labels = new_lab[1:]
        b_degs = degs[1:]
        sgn = _koszul_reorder_sign(F, b_degs, tau)
        reordered = [None] * r
        for i in range(r):
            reordered[tau[i]] = b_labels[i]
        final_lab = (new_lab[0],) + tuple(reordered)
        key = (final_lab, sum(degs))
        cur = out.get(key, F.zero())
        cur = F.add(cur, F.mul(sgn, coeff))
        if F.is_zero(cur):
            out.pop(key, None)
        else:
            out[key] = cur
    return out


def _koszul_reorder_sign(F, degs, tau):
    """Sign of reordering graded factors: factor i moves to position tau[i]."""
    sign = 1
    r = len(tau)
    for i in range(r):
        for j in range(i + 1, r):
            if tau[i] > tau[j] and degs[i] % 2 and degs[j] % 2:
                sign = -sign
    return F.one() if sign == 1 else F.neg(F.one())


# ---------------------------------------------------------------------------
# Operads, cooperads, right modules
# ---------------------------------------------------------------------------


class Operad:
    """An operad on an N-truncated symmetric sequence.

    gamma[(r, comp)] for a composition comp = (n_1, ..., n_r) is a chain map
    P_r (x) P_{n_1} (x) ... (x) P_{n_r} -> P_n along consecutive blocks."""

    def __init__(self, sequence: SymmetricSequence, gamma, name="operad"):
        self.sequence = sequence
        self.gamma = gamma
        self.name = name

    @property
    def field(self):
        return self.sequence.field

    @property
    def truncation(self):
        return self.sequence.truncation

    def term(self, n):
        return self.sequence.term(n)

    def term_complex(self, n):
        return self.sequence.term_complex(n)

    def composition(self, r, comp) -> ChainMap | None:
        return self.gamma.get((r, tuple(comp)))


class Cooperad:
    """A cooperad; delta[(n, blocks)] : T_n -> T_r (x) T_{|b_1|} (x) ... ."""

    def __init__(self, sequence: SymmetricSequence, delta, name="cooperad"):
        self.sequence = sequence
        self.delta = delta
        self.name = name

    @property
    def field(self):
        return self.sequence.field

    @property
    def truncation(self):
        return self.sequence.truncation

    def term(self, n):
        return self.sequence.term(n)

    def term_complex(self, n):
        return self.sequence.term_complex(n)

    def decomposition(self, n, blocks) -> ChainMap | None:
        return self.delta.get((n, tuple(blocks)))


class RightModule:
    """Right module over an operad: action[(r, comp)] :
    M_r (x) P_{n_1} (x) ... (x) P_{n_r} -> M_n."""

    def __init__(self, operad: Operad, sequence: SymmetricSequence, action):
        self.operad = operad
        self.sequence = sequence
        self.action = action

    @property
    def field(self):
        return self.sequence.field

    @property
    def truncation(self):
        return self.sequence.truncation

    def action_map(self, r, comp) -> ChainMap | None:
        return self.action.get((r, tuple(comp)))


# ---------------------------------------------------------------------------
# The commutative operad
# ---------------------------------------------------------------------------


def commutative_operad(field, N) -> Operad:
    if N < 1:
        raise ValueError("N >= 1 required")
    terms = {}
    for n in range(1, N + 1):
        terms[n] = trivial_action(sphere(field, 0, label="com%d" % n),
                                  YoungGroup.full(n))
    seq = SymmetricSequence(field, N, terms)
    gamma = {}
    for r in range(1, N + 1):
        for comp in compositions_of_bounded(r, N):
            n = sum(comp)
            src = tensor_many([seq.term_complex(r)] +
                              [seq.term_complex(m) for m in comp])
            tgt = seq.term_complex(n)
            m = SparseMatrix(1, 1, field)
            m[0, 0] = field.one()
            gamma[(r, comp)] = ChainMap(src, tgt, {0: m}, check=False)
    return Operad(seq, gamma, name="Com")


def compositions_of_bounded(r, N):
    """All compositions (n_1..n_r) of length r with sum <= N, each n_i >= 1."""
    out = []

    def rec(acc, total):
        if len(acc) == r:
            out.append(tuple(acc))
            return
        rem = r - len(acc) - 1
        for v in range(1, N - total - rem + 1):
            acc.append(v)
            rec(acc, total + v)
            acc.pop()

    if r >= 1 and r <= N:
        rec([], 0)
    return out


# ---------------------------------------------------------------------------
# The leveled bar construction B(1, Com, 1)
# ---------------------------------------------------------------------------


def _weak_chains(n, length):
    """Weakly decreasing chains (P_1 >= ... >= P_length) of partitions of
    {0..n-1}, as tuples (coarsest first)."""
    parts = set_partitions(list(range(n)))
    if length == 0:
        return [()]
    out = []

    def rec(acc):
        if len(acc) == length:
            out.append(tuple(acc))
            return
        for p in parts:
            if not acc or refines(p, acc[-1]):
                acc.append(p)
                rec(acc)
                acc.pop()

    rec([])
    return out


TOP = lambda n: (tuple(range(n)),)
DISCRETE = lambda n: tuple((i,) for i in range(n))


class BarConstruction:
    """The simplicial symmetric sequence B(1, P, 1) for a Com-like operad,
    with normalized complexes and simplicial structure maps."""

    def __init__(self, operad: Operad, max_level=None):
        F = operad.field
        N = operad.truncation
        for n in range(1, N + 1):
            t = operad.term_complex(n)
            if t.dims != {0: 1}:
                raise ValueError(
                    "bar construction implemented for operads with one-"
                    "dimensional degree-0 terms (the commutative operad)")
        self.field = F
        self.truncation = N
        self.max_level = N + 1 if max_level is None else max_level
        self.levels = {}     # (s, n) -> ChainComplex (degree 0, chain basis)
        self.faces = {}      # (s, i, n) -> ChainMap level s -> s-1
        self.degens = {}     # (s, j, n) -> ChainMap level s -> s+1
        self.normalized = {}  # n -> ChainComplex with degree = level
        for n in range(1, N + 1):
            self._build_arity(n)

    def _build_arity(self, n):
        F = self.field
        top, bot = TOP(n), DISCRETE(n)
        chains_by_level = {}
        for s in range(0, self.max_level + 1):
            if s == 0:
                chains = [()] if n == 1 else []
            else:
                chains = _weak_chains(n, s - 1)
            chains_by_level[s] = chains
            c = ChainComplex(F, {0: len(chains)} if chains else {},
                             labels={0: tuple(("bar", ch) for ch in chains)}
                             if chains else None)
            self.levels[(s, n)] = c
        # face maps
        for s in range(1, self.max_level + 1):
            src = self.levels[(s, n)]
            tgt = self.levels[(s - 1, n)]
            src_chains = chains_by_level[s]
            tgt_pos = {ch: i for i, ch in enumerate(chains_by_level[s - 1])}
            for i in range(0, s + 1):
                m = SparseMatrix(tgt.dim(0), src.dim(0), F)
                for col, ch in enumerate(src_chains):
                    full = (top,) + ch + (bot,)
                    # d_i composes around the partition at position i
                    if i == 0:
                        if full[1] == top:
                            new = ch[1:] if s >= 2 else ()
                            if s == 1:
                                # chain () at level 1 -> level 0 requires n == 1
                                if n == 1:
                                    m.add_to(tgt_pos[()], col, F.one())
                                continue
                            m.add_to(tgt_pos[new], col, F.one())
                    elif i == s:
                        if full[s - 1] == bot:
                            if s == 1:
                                if n == 1:
                                    m.add_to(tgt_pos[()], col, F.one())
                                continue
                            new = ch[:-1]
                            m.add_to(tgt_pos[new], col, F.one())
                    else:
                        new = ch[:i - 1] + ch[i:]
                        m.add_to(tgt_pos[new], col, F.one())
                self.faces[(s, i, n)] = ChainMap(
                    src, tgt, {0: m} if not m.is_zero() else {}, check=False)
        # degeneracy maps
        for s in range(0, self.max_level):
            src = self.levels[(s, n)]
            tgt = self.levels[(s + 1, n)]
            src_chains = chains_by_level[s]
            tgt_pos = {ch: i for i, ch in enumerate(chains_by_level[s + 1])}
            for j in range(0, s + 1):
                m = SparseMatrix(tgt.dim(0), src.dim(0), F)
                for col, ch in enumerate(src_chains):
                    # level-s full chain (P_0, ..., P_s); for s = 0 it is the
                    # single entry (top,), which forces n = 1
                    full = (top,) + ch + (bot,) if s >= 1 else (top,)
                    new = (full[:j + 1] + (full[j],) + full[j + 1:])[1:-1]
                    m.add_to(tgt_pos[new], col, F.one())
                self.degens[(s, j, n)] = ChainMap(
                    src, tgt, {0: m} if not m.is_zero() else {}, check=False)
        # normalized complex: strict chains, degree = level
        dims, labels, pos = {}, {}, {}
        for s in range(0, self.max_level + 1):
            strict = [ch for ch in chains_by_level[s] if _is_strict(ch, n, s)]
            if strict:
                dims[s] = len(strict)
                labels[s] = tuple(("bar", ch) for ch in strict)
                pos[s] = {ch: i for i, ch in enumerate(strict)}
        diff = {}
        for s in sorted(dims):
            if not dims.get(s - 1):
                continue
            m = SparseMatrix(dims[s - 1], dims[s], F)
            for col, (_, ch) in enumerate(labels[s]):
                # interior deletions only; results stay strict
                for i in range(1, s):
                    new = ch[:i - 1] + ch[i:]
                    sgn = F.one() if i % 2 == 0 else F.neg(F.one())
                    row = pos[s - 1].get(new)
                    if row is not None:
                        m.add_to(row, col, sgn)
            diff[s] = m
        self.normalized[n] = ChainComplex(F, dims, diff, labels, check=False)

    def simplicial_identities_hold(self) -> bool:
        for n in range(1, self.truncation + 1):
            for s in range(2, self.max_level + 1):
                for i in range(s):
                    for j in range(i + 1, s + 1):
                        lhs = self.faces[(s - 1, i, n)].compose(self.faces[(s, j, n)])
                        rhs = self.faces[(s - 1, j - 1, n)].compose(self.faces[(s, i, n)])
                        if lhs.components != rhs.components:
                            return False
            for s in range(0, self.max_level - 1):
                for i in range(s + 1):
                    for j in range(i, s + 1):
                        lhs = self.degens[(s + 1, i, n)].compose(self.degens[(s, j, n)])
                        rhs = self.degens[(s + 1, j + 1, n)].compose(self.degens[(s, i, n)])
                        if lhs.components != rhs.components:
                            return False
            # mixed identities d_i s_j
            for s in range(0, self.max_level):
                for j in range(s + 1):
                    for i in range(s + 2):
                        ds = self.faces[(s + 1, i, n)].compose(self.degens[(s, j, n)])
                        if i == j or i == j + 1:
                            rhs = ChainMap.identity(self.levels[(s, n)])
                        elif i < j:
                            rhs = self.degens[(s - 1, j - 1, n)].compose(
                                self.faces[(s, i, n)])
                        else:
                            rhs = self.degens[(s - 1, j, n)].compose(
                                self.faces[(s, i - 1, n)])
                        if ds.components != rhs.components:
                            return False
        return True


def _is_strict(ch, n, s):
    top, bot = TOP(n), DISCRETE(n)
    full = ((top,) + ch + (bot,)) if s >= 1 else (top,)
    for a, b in zip(full, full[1:]):
        if a == b:
            return False
    return True


def bar_construction(operad: Operad):
    """Returns (BarConstruction, {n: normalized ChainComplex}, tree Cooperad)."""
    bc = BarConstruction(operad)
    coop = tree_cooperad(operad.field, operad.truncation)
    return bc, dict(bc.normalized), coop


# ---------------------------------------------------------------------------
# The tree cooperad T_* and the derivatives-of-the-identity operad
# ---------------------------------------------------------------------------


def tree_complex(field, n) -> ChainComplex:
    """T(n) on the rooted-tree basis; degree = number of internal vertices."""
    leaves = tuple(range(n))
    basis = trees.all_trees(leaves)
    dims, labels, pos = {}, {}, {}
    for t in basis:
        d = trees.degree(t)
        dims[d] = dims.get(d, 0) + 1
        labels.setdefault(d, []).append(("tree", t))
    for d in labels:
        for i, lab in enumerate(labels[d]):
            pos[lab[1]] = (d, i)
    diff = {}
    for t in basis:
        d = trees.degree(t)
        if d < 2:
            continue
        _, col = pos[t]
        m = diff.get(d)
        if m is None:
            m = SparseMatrix(dims.get(d - 1, 0), dims[d], field)
            diff[d] = m
        for sgn, t2 in trees.differential_terms(t):
            _, row = pos[t2]
            m.add_to(row, col, field.coerce(sgn))
    labels = {d: tuple(v) for d, v in labels.items()}
    out = ChainComplex(field, dims, diff, labels, check=True)
    return out


def tree_equivariant(field, n) -> EquivariantComplex:
    c = tree_complex(field, n)
    group = YoungGroup.full(n)
    pos = {}
    for d in c.dims:
        for i, lab in enumerate(c.labels[d]):
            pos[lab[1]] = (d, i)
    action = {}
    for gi in group.generator_positions():
        mapping = {x: x for x in range(n)}
        mapping[gi], mapping[gi + 1] = gi + 1, gi
        comps = {}
        for d in c.dims:
            comps[d] = SparseMatrix(c.dim(d), c.dim(d), field)
        for t, (d, col) in pos.items():
            sgn, t2 = trees.relabel_terms(t, mapping)
            d2, row = pos[t2]
            comps[d].add_to(row, col, field.coerce(sgn))
        action[gi] = ChainMap(c, c, comps, check=False)
    return EquivariantComplex(c, group, action, check=False,
                              arity_bound=max(4, n))


def tree_cooperad(field, N) -> Cooperad:
    """The cooperad T_* with ungrafting decompositions, exactly coassociative."""
    terms = {n: tree_equivariant(field, n) for n in range(1, N + 1)}
    seq = SymmetricSequence(field, N, terms)
    delta = {}
    for n in range(1, N + 1):
        src = seq.term_complex(n)
        pos_src = {}
        for d in src.dims:
            for i, lab in enumerate(src.labels[d]):
                pos_src[lab[1]] = (d, i)
        for blocks in set_partitions(list(range(n))):
            r = len(blocks)
            factors = [seq.term_complex(r)] + \
                [seq.term_complex(len(b)) for b in blocks]
            tgt = tensor_many(factors)
            tgt_pos = {}
            for d in tgt.dims:
                for i, lab in enumerate(tgt.labels[d]):
                    tgt_pos[lab] = (d, i)
            comps = {}
            for t, (d, col) in pos_src.items():
                dec = trees.decompose(t, blocks)
                if dec is None:
                    continue
                sgn, upper, lowers = dec
                lowered = []
                for b, lt in zip(blocks, lowers):
                    mapping = {x: i for i, x in enumerate(sorted(b))}
                    s2, lt2 = trees.relabel_terms(lt, mapping)
                    assert s2 == 1  # order-preserving relabels are sign-free
                    lowered.append(lt2)
                lab = (("tree", upper),) + tuple(("tree", lt) for lt in lowered)
                d2, row = tgt_pos[lab]
                assert d2 == d
                m = comps.get(d)
                if m is None:
                    m = SparseMatrix(tgt.dim(d), src.dim(d), field)
                    comps[d] = m
                m.add_to(row, col, field.coerce(sgn))
            delta[(n, tuple(blocks))] = ChainMap(src, tgt, comps, check=True)
    return Cooperad(seq, delta, name="T")


def tensor_reorder_map(factors, perm, field) -> ChainMap:
    """Koszul reordering iso tensor(factors) -> tensor(factors[perm^-1]).

    perm[i] = new position of factor i."""
    src = tensor_many(factors)
    inv = [0] * len(perm)
    for i, v in enumerate(perm):
        inv[v] = i
    tgt_factors = [factors[inv[j]] for j in range(len(perm))]
    tgt = tensor_many(tgt_factors)
    deg_of = []
    for c in factors:
        dm = {}
        for k in c.dims:
            for lab in c.labels[k]:
                dm[lab] = k
        deg_of.append(dm)
    tgt_pos = {}
    for k in tgt.dims:
        for i, lab in enumerate(tgt.labels[k]):
            tgt_pos[lab] = (k, i)
    comps = {}
    for k in src.dims:
        m = SparseMatrix(tgt.dim(k), src.dim(k), field)
        for col, lab in enumerate(src.labels[k]):
            degs = [deg_of[i][l] for i, l in enumerate(lab)]
            sgn = _koszul_reorder_sign(field, degs, perm)
            new_lab = [None] * len(lab)
            for i, l in enumerate(lab):
                new_lab[perm[i]] = l
            k2, row = tgt_pos[tuple(new_lab)]
            m.add_to(row, col, sgn)
        comps[k] = m
    return ChainMap(src, tgt, comps, check=False)


def check_coassociativity(coop: Cooperad, n, coarse, fine) -> bool:
    """Exact coassociativity for a refinement `fine` <= `coarse` of {0..n-1}.

    Route A: split along `fine`, then split the upper factor along the
    induced partition of fine's blocks.  Route B: split along `coarse`, then
    split each lower factor along the restriction of `fine`; then reorder so
    both land in T(upper') (x) (x)_j T(mid_j) (x) (x)_c T(c)."""
    from .perms import quotient_partition, restrict_partition
    F = coop.field
    if not refines(fine, coarse):
        raise ValueError("fine must refine coarse")
    rf, rc = len(fine), len(coarse)
    d_fine = coop.decomposition(n, fine)
    d_coarse = coop.decomposition(n, coarse)
    qpart = quotient_partition(coarse, fine)  # partition of {0..rf-1}
    # Route A: delta_fine then delta_{qpart} on the first factor
    d_q = coop.decomposition(rf, qpart)
    fine_factors = [coop.term_complex(rf)] + \
        [coop.term_complex(len(b)) for b in fine]
    routeA = _apply_to_factor(d_fine, d_q, 0, fine_factors, F)
    # Route B: delta_coarse then delta_{fine|b} on each lower factor,
    # processed right-to-left so slot positions stay stable
    cur = d_coarse
    cur_factors = [coop.term_complex(rc)] + \
        [coop.term_complex(len(b)) for b in coarse]
    rests = [restrict_partition(fine, b) for b in coarse]
    for j in range(rc - 1, -1, -1):
        b = coarse[j]
        d_rest = coop.decomposition(len(b), rests[j])
        cur = _apply_to_factor(cur, d_rest, 1 + j, cur_factors, F)
        rest_factors = [coop.term_complex(len(rests[j]))] + \
            [coop.term_complex(len(c)) for c in rests[j]]
        cur_factors = cur_factors[:1 + j] + rest_factors + cur_factors[2 + j:]
    routeB = cur
    # Align orders: route A = [upper', mids, fine blocks in fine order];
    # route B = [upper'] + per coarse block [mid_j, its fine blocks].
    permA = _fine_to_grouped_perm(coarse, fine)
    routeA_factors = [coop.term_complex(rc)] + \
        [coop.term_complex(len(b)) for b in qpart] + \
        [coop.term_complex(len(c)) for c in fine]
    reorderA = tensor_reorder_map(routeA_factors, permA, F)
    routeA2 = _compose_via_flat(reorderA, routeA)
    return _same_map(routeA2, routeB)


def _fine_to_grouped_perm(coarse, fine):
    """Regroup [upper, mid_0.., fine_0..] as [upper] + per-coarse-block
    [mid_j, fine blocks inside coarse_j]; returns perm[i] = new position."""
    rc, rf = len(coarse), len(fine)
    lookup = {}
    for fi, c in enumerate(fine):
        for j, b in enumerate(coarse):
            if set(c) <= set(b):
                lookup[fi] = j
                break
    posn = 1
    grouped_positions = {}
    for j in range(rc):
        grouped_positions[("mid", j)] = posn
        posn += 1
        for fi in range(rf):
            if lookup[fi] == j:
                grouped_positions[("fine", fi)] = posn
                posn += 1
    perm = [0] * (1 + rc + rf)
    for j in range(rc):
        perm[1 + j] = grouped_positions[("mid", j)]
    for fi in range(rf):
        perm[1 + rc + fi] = grouped_positions[("fine", fi)]
    return perm


def _compose_via_flat(f: ChainMap, g: ChainMap) -> ChainMap:
    """f o g where f's source equals g's target up to label nesting."""
    return f.compose(_retarget_map(g, f.source))


def _apply_to_factor(base: ChainMap, piece: ChainMap, slot, base_factors,
                     F) -> ChainMap:
    """Compose base with (id (x) ... (x) piece (x) ... (x) id) at `slot`
    of base's target tensor factors."""
    from .chain import tensor_map, ChainMap as CM
    maps = []
    for i, c in enumerate(base_factors):
        if i == slot:
            maps.append(piece)
        else:
            maps.append(CM.identity(c))
    big = maps[0]
    for mp in maps[1:]:
        big = tensor_map(big, mp)
    # big's source is tensor(base_factors) rebuilt; identify with base.target
    return big.compose(_retarget_map(base, big.source))


def _retarget(f: ChainMap, new_source: ChainComplex) -> ChainMap:
    """Identify f's source with an equal-basis complex via label matching.

    Sources must have the same labels up to nesting of tuples produced by
    iterated binary tensor vs tensor_many; we flatten to compare."""
    def flat(lab):
        if isinstance(lab, tuple) and lab and not isinstance(lab[0], str):
            out = []
            for x in lab:
                out.extend(flat(x))
            return tuple(out)
        if isinstance(lab, tuple) and len(lab) == 2 and isinstance(lab[0], tuple):
            return flat(lab[0]) + flat(lab[1])
        return (lab,)

    src = f.source
    comps = {}
    for k in new_source.dims:
        n1, n2 = src.dim(k), new_source.dim(k)
        if n1 != n2:
            raise ValueError("retarget dimension mismatch in degree %d" % k)
        flat_src = {flat(lab): i for i, lab in enumerate(src.labels[k])}
        m = SparseMatrix(n1, n2, f.field)
        for j, lab in enumerate(new_source.labels[k]):
            i = flat_src[flat(lab)]
            m[i, j] = f.field.one()
        comps[k] = m
    ident = ChainMap(new_source, src, comps, check=False)
    return f.compose(ident)


def _flatten_compose(f: ChainMap, g: ChainMap) -> ChainMap:
    return f.compose(g)


def _same_map(f: ChainMap, g: ChainMap) -> bool:
    """Compare two chain maps with possibly differently-nested tensor labels."""
    def flat(lab):
        if isinstance(lab, tuple) and lab and not isinstance(lab[0], str):
            out = []
            for x in lab:
                out.extend(flat(x))
            return tuple(out)
        return (lab,)

    for k in set(f.source.dims) | set(g.source.dims):
        if f.source.dim(k) != g.source.dim(k):
            return False
    for k in set(list(f.components) + list(g.components)):
        mf, mg = f.component(k), g.component(k)
        # align target bases by flattened labels
        tf = {flat(lab): i for i, lab in enumerate(f.target.labels.get(k, ()))}
        tg = {flat(lab): i for i, lab in enumerate(g.target.labels.get(k, ()))}
        if set(tf) != set(tg):
            return False
        reindex = {tf[lab]: tg[lab] for lab in tf}
        ent = {(reindex[i], j): v for (i, j), v in mf.entries.items()}
        if ent != mg.entries:
            return False
    return True


def spectral_lie(field, N) -> Operad:
    """The operad dual to T_*: derivatives of the identity on based spaces."""
    if N > 6:
        raise ValueError("arity bound exceeded")
    coop = tree_cooperad(field, N)
    terms = {}
    dual_complexes = {}
    for n in range(1, N + 1):
        tc = coop.term_complex(n)
        dc = dual(tc)
        dual_complexes[n] = dc
        group = YoungGroup.full(n)
        action = {}
        for gi in group.generator_positions():
            # dual of an involution's action, transposed degreewise
            f = coop.term(n).action[gi]
            comps = {}
            for k, m in f.components.items():
                comps[-k] = m.transpose()
            action[gi] = ChainMap(dc, dc, comps, check=False)
        terms[n] = EquivariantComplex(dc, group, action, check=False,
                                      arity_bound=max(4, n))
    seq = SymmetricSequence(field, N, terms)
    gamma = {}
    for n in range(1, N + 1):
        for r in range(1, n + 1):
            for comp in compositions_of_bounded(r, N):
                if sum(comp) != n:
                    continue
                blocks = _consecutive_blocks(comp)
                dmap = coop.decomposition(n, blocks)
                gamma[(r, comp)] = _dualize_decomposition(
                    dmap, [seq.term_complex(r)] +
                    [seq.term_complex(m) for m in comp],
                    dual_complexes[n], field)
    op = Operad(seq, gamma, name="spectral-lie")
    _validate_operad_units(op)
    return op


def _consecutive_blocks(comp):
    blocks = []
    start = 0
    for m in comp:
        blocks.append(tuple(range(start, start + m)))
        start += m
    return tuple(blocks)


def _dualize_decomposition(dmap: ChainMap, dual_factors, dual_target, field):
    """gamma := dual of a decomposition map, with Koszul evaluation signs.

    dmap : T(n) -> T(r) (x) T(b_1) (x) ... ; the result maps
    tensor(dual factors) -> dual(T(n)).  Entry convention:
    gamma[t*, (x_0*, ..., x_r*)] = (-1)^{sum_{i<j} |x_i||x_j|} delta[x_., t].
    """
    src = tensor_many(dual_factors)
    F = field
    # positions of dual labels: dual label = ("dual", original)
    tgt_pos = {}
    for k in dual_target.dims:
        for i, lab in enumerate(dual_target.labels[k]):
            tgt_pos[lab[1]] = (k, i)
    # decode dmap target labels (tuples of originals) and source labels
    comps = {}
    for k, m in dmap.components.items():
        for (row, col), v in m.entries.items():
            xlab = dmap.target.labels[k][row]      # tuple of tree labels
            tlab = dmap.source.labels[k][col]      # ("tree", t)
            # degrees of the x factors
            degs = []
            for fl, fc in zip(xlab, _undual(dual_factors)):
                degs.append(_label_degree(fc, fl))
            sgn = 1
            for i in range(len(degs)):
                for j in range(i + 1, len(degs)):
                    if degs[i] % 2 and degs[j] % 2:
                        sgn = -sgn
            # source basis position in tensor of duals
            dual_lab = tuple(("dual", l) for l in xlab)
            sk, spos = _tensor_pos(src, dual_lab)
            tk, tpos = tgt_pos[tlab]
            mm = comps.get(sk)
            if mm is None:
                mm = SparseMatrix(dual_target.dim(sk), src.dim(sk), F)
                comps[sk] = mm
            val = F.mul(F.coerce(sgn), v)
            mm.add_to(tpos, spos, val)
    return ChainMap(src, dual_target, comps, check=True)


def _undual(dual_factors):
    """Recover original complexes' label degrees from dual complexes."""
    out = []
    for dc in dual_factors:
        dm = {}
        for k in dc.dims:
            for lab in dc.labels[k]:
                dm[lab[1]] = -k
        out.append(dm)
    return out


def _label_degree(degmap, lab):
    return degmap[lab]


def _tensor_pos(t: ChainComplex, lab):
    for k in t.dims:
        idx = t.label_index(k)
        if lab in idx:
            return k, idx[lab]
    raise KeyError(lab)


def _validate_operad_units(op: Operad):
    F = op.field
    for n in range(1, op.truncation + 1):
        if op.term(n) is None:
            continue
        # unit on the right: gamma(x; 1, ..., 1) = x
        comp = (1,) * n
        g = op.composition(n, comp)
        if g is not None:
            if not _is_unit_iso(g, op.term_complex(n), F):
                raise ValueError("right unit law fails at arity %d" % n)
        # unit on the left: gamma(1; x) = x
        g2 = op.composition(1, (n,))
        if g2 is not None:
            if not _is_unit_iso(g2, op.term_complex(n), F):
                raise ValueError("left unit law fails at arity %d" % n)


def _is_unit_iso(g: ChainMap, target: ChainComplex, F):
    for k in target.dims:
        m = g.component(k)
        if m.rows != target.dim(k):
            return False
        ent = {}
        for (i, j), v in m.entries.items():
            ent[(i, j)] = v
        # must be a bijection matrix with unit entries
        if len(ent) != target.dim(k):
            return False
        rows = {i for (i, j) in ent}
        cols = {j for (i, j) in ent}
        if len(rows) != target.dim(k) or len(cols) != target.dim(k):
            return False
        for v in ent.values():
            if not (F.is_one(v) or F.is_one(F.neg(v))):
                return False
    return True


# ---------------------------------------------------------------------------
# Partition poset nerve (independent oracle)
# ---------------------------------------------------------------------------


def partition_poset_nerve(field, n):
    """(simplicial chains of the nerve of proper nontrivial partitions of
    {1..n} with Sigma_n action, comparison complex = reduced chains [+2])."""
    if not (2 <= n <= 4):
        raise ValueError("n out of range [2, 4]")
    proper = [p for p in set_partitions(list(range(n)))
              if 1 < len(p) < n]
    # chains ordered by refinement: ascending chains p_0 < p_1 < ... (finer first)
    simplices = {0: [(p,) for p in proper]}
    j = 0
    while simplices.get(j):
        nxt = []
        for ch in simplices[j]:
            for p in proper:
                if p != ch[-1] and refines(ch[-1], p):
                    nxt.append(ch + (p,))
        if nxt:
            simplices[j + 1] = sorted(nxt)
        j += 1
    dims, labels = {}, {}
    for j, sims in simplices.items():
        if sims:
            dims[j] = len(sims)
            labels[j] = tuple(("simplex", s) for s in sims)
    pos = {}
    for j in dims:
        for i, lab in enumerate(labels[j]):
            pos[lab[1]] = (j, i)
    diff = {}
    for j in dims:
        if j == 0 or not dims.get(j - 1):
            continue
        m = SparseMatrix(dims[j - 1], dims[j], field)
        for col, lab in enumerate(labels[j]):
            ch = lab[1]
            for i in range(len(ch)):
                face = ch[:i] + ch[i + 1:]
                sgn = field.one() if i % 2 == 0 else field.neg(field.one())
                _, row = pos[face]
                m.add_to(row, col, sgn)
        diff[j] = m
    nerve = ChainComplex(field, dims, diff, labels, check=True)
    group = YoungGroup.full(n)
    action = {}
    for gi in group.generator_positions():
        s = transposition(n, gi)
        comps = {}
        for j in nerve.dims:
            m = SparseMatrix(nerve.dim(j), nerve.dim(j), field)
            for col, lab in enumerate(nerve.labels[j]):
                ch = lab[1]
                newch = tuple(apply_perm_to_partition(s, p) for p in ch)
                _, row = pos[newch]
                m.add_to(row, col, field.one())
            comps[j] = m
        action[gi] = ChainMap(nerve, nerve, comps, check=False)
    nerve_eq = EquivariantComplex(nerve, group, action, check=False)
    # comparison complex: reduced chains shifted up by 2
    rdims = {j + 2: d for j, d in dims.items()}
    rdims[1] = 1  # the empty simplex in reduced degree -1, shifted to 1
    rlabels = {j + 2: labels[j] for j in dims}
    rlabels[1] = (("simplex", ()),)
    rdiff = {j + 2: m for j, m in diff.items()}
    if dims.get(0):
        m = SparseMatrix(1, dims[0], field)
        for col in range(dims[0]):
            m[0, col] = field.one()
        rdiff[2] = m
    comparison = ChainComplex(field, rdims, rdiff, rlabels, check=True)
    return nerve_eq, comparison


# ---------------------------------------------------------------------------
# Right module validation
# ---------------------------------------------------------------------------


def validate_right_module(mod: RightModule, check_equivariance=True):
    """Checks unit, associativity and (generator) equivariance exactly.

    Returns a report dict {"valid": bool, "failures": [description, ...]}."""
    failures = []
    op = mod.operad
    F = mod.field
    N = min(mod.truncation, op.truncation)
    # unit law: action along (1, ..., 1) is the identity (on the nose, up to
    # the canonical iso M_r (x) k (x) ... (x) k = M_r)
    for r in mod.sequence.arities():
        comp = (1,) * r
        act = mod.action_map(r, comp)
        if act is None:
            failures.append("missing unit action at arity %d" % r)
            continue
        if not _is_unit_iso(act, mod.sequence.term_complex(r), F):
            failures.append("unit law fails at arity %d" % r)
    # associativity: m . (p . q) vs (m . p) . q on composable patterns
    for r in mod.sequence.arities():
        for comp in compositions_of_bounded(r, N):
            s = sum(comp)
            if mod.action_map(r, comp) is None and any(
                    op.term(c) is None for c in comp):
                continue
            for comp2_parts in _iterprod(*[compositions_of_bounded(c, N)
                                           for c in comp]):
                comp2 = tuple(x for part in comp2_parts for x in part)
                n = sum(comp2)
                if n > N:
                    continue
                ok = _check_module_assoc(mod, r, comp, comp2_parts)
                if ok is False:
                    failures.append(
                        "associativity fails at (%d; %s; %s)" %
                        (r, comp, comp2_parts))
    if check_equivariance:
        for r in mod.sequence.arities():
            for comp in compositions_of_bounded(r, N):
                bad = _check_module_equivariance(mod, r, comp)
                if bad:
                    failures.append(bad)
    return {"valid": not failures, "failures": failures}


def _check_module_assoc(mod: RightModule, r, comp, comp2_parts):
    """(m.p).q = m.(p o q) as maps M_r (x) P_* (x) P_** -> M_n."""
    op = mod.operad
    F = mod.field
    s = sum(comp)
    comp2 = tuple(x for part in comp2_parts for x in part)
    n = sum(comp2)
    a1 = mod.action_map(r, comp)
    a2 = mod.action_map(s, comp2)
    if a1 is None or a2 is None:
        return None
    m_r = mod.sequence.term_complex(r)
    p_factors = [op.term_complex(c) for c in comp]
    q_factors = [op.term_complex(c) for c in comp2]
    if any(c.is_zero() for c in [m_r] + p_factors + q_factors):
        return None
    from .chain import ChainMap as CM, tensor_map
    # route 1: (a1 (x) id_q...) then a2
    big = a1
    for qf in q_factors:
        big = tensor_map(big, CM.identity(qf))
    src_factors = [m_r] + p_factors + q_factors
    big = _retarget(big, tensor_many(src_factors))
    mid = tensor_many([mod.sequence.term_complex(s)] + q_factors)
    route1 = a2.compose(_retarget_map(big, mid))
    # route 2: reorder q-factors to sit beside their p-factor, apply gamma on
    # each group, then a1' along the composed pattern
    perm = _group_q_after_p_perm(comp, comp2_parts)
    reorder = tensor_reorder_map(src_factors, perm, F)
    cur = reorder
    cur_factors = _grouped_factors(m_r, op, comp, comp2_parts)
    gam_maps = []
    slot = 1
    for c, part in zip(comp, comp2_parts):
        g = op.composition(c, part)
        if g is None:
            return None
        gam_maps.append((slot, g, 1 + len(part)))
        slot += 1 + len(part)
    maps = [CM.identity(m_r)]
    for slotpos, g, width in gam_maps:
        maps.append(g)
    big2 = maps[0]
    for mp in maps[1:]:
        big2 = tensor_map(big2, mp)
    big2 = _retarget(big2, cur.target)
    composed = tuple(sum(part) for part in comp2_parts)
    a3 = mod.action_map(r, composed)
    if a3 is None:
        return None
    mid2 = tensor_many([m_r] + [op.term_complex(sum(part))
                                for part in comp2_parts])
    route2 = a3.compose(_retarget_map(big2.compose(cur), mid2))
    return _same_map(route1, route2)


def _retarget_map(f: ChainMap, new_target_model: ChainComplex) -> ChainMap:
    """Identify f's target with an equal complex via flattened labels."""
    def flat(lab):
        if isinstance(lab, tuple) and lab and not isinstance(lab[0], str):
            out = []
            for x in lab:
                out.extend(flat(x))
            return tuple(out)
        return (lab,)

    tgt = f.target
    F = f.field
    comps = {}
    for k in tgt.dims:
        flat_new = {flat(lab): i for i, lab in
                    enumerate(new_target_model.labels.get(k, ()))}
        m = SparseMatrix(new_target_model.dim(k), tgt.dim(k), F)
        for j, lab in enumerate(tgt.labels[k]):
            i = flat_new[flat(lab)]
            m[i, j] = F.one()
        comps[k] = m
    ident = ChainMap(tgt, new_target_model, comps, check=False)
    return ident.compose(f)


def _group_q_after_p_perm(comp, comp2_parts):
    """Factors: [m, p_1..p_r, q_1..q_s] -> [m, p_1, q(p_1 group), p_2, ...]."""
    r = len(comp)
    s = sum(len(part) for part in comp2_parts)
    perm = [0] * (1 + r + s)
    perm[0] = 0
    pos = 1
    qstart = 1 + r
    qoff = 0
    targets = {}
    for i, part in enumerate(comp2_parts):
        targets[("p", i)] = pos
        pos += 1
        for t in range(len(part)):
            targets[("q", qoff + t)] = pos
            pos += 1
        qoff += len(part)
    for i in range(r):
        perm[1 + i] = targets[("p", i)]
    for t in range(s):
        perm[qstart + t] = targets[("q", t)]
    return perm


def _grouped_factors(m_r, op, comp, comp2_parts):
    out = [m_r]
    for c, part in zip(comp, comp2_parts):
        out.append(op.term_complex(c))
        out.extend(op.term_complex(x) for x in part)
    return out


def _check_module_equivariance(mod: RightModule, r, comp):
    """Spot-check equivariance on within-block generators of Sigma_{n_i}."""
    op = mod.operad
    F = mod.field
    act = mod.action_map(r, comp)
    if act is None:
        return None
    n = sum(comp)
    m_r = mod.sequence.term(r)
    m_n = mod.sequence.term(n)
    if m_r is None or m_n is None:
        return None
    from .chain import ChainMap as CM, tensor_map
    offs = []
    start = 0
    for c in comp:
        offs.append(start)
        start += c
    for bi, c in enumerate(comp):
        pterm = op.term(c)
        if pterm is None or c < 2:
            continue
        for gi in YoungGroup.full(c).generator_positions():
            maps = [CM.identity(mod.sequence.term_complex(r))]
            for bj, c2 in enumerate(comp):
                if bj == bi:
                    maps.append(pterm.action[gi])
                else:
                    maps.append(CM.identity(op.term_complex(c2)))
            big = maps[0]
            for mp in maps[1:]:
                big = tensor_map(big, mp)
            big = _retarget(big, act.source)
            lhs = act.compose(_retarget_map(big, act.source))
            # global generator at position offs[bi] + gi
            glob = offs[bi] + gi
            rhs = m_n.action[glob].compose(act)
            if not _same_map(lhs, rhs):
                return ("equivariance fails at (%d; %s), block %d, gen %d" %
                        (r, comp, bi, gi))
    return None
