"""Group actions of Young subgroups on chain complexes; windowed homotopy
orbits, homotopy fixed points, the norm map, and Tate constructions.

Derived (co)invariants are computed from a free resolution of the trivial
module over the group algebra, built by a deterministic greedy generator
search (kernels are computed degreewise, and new free generators are added
only when a kernel vector falls outside the submodule generated so far).
This keeps ranks near-minimal, so windowed computations over Sigma_3 and
Sigma_4 stay desk-scale.  The hand-coded periodic resolutions for Sigma_2
(and Sigma_3 at p = 3) live in the test suite as independent oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

from .chain import (
    ChainComplex, ChainMap, DegreeWindow, cone, tensor_many,
)
from .fields import FieldSpec
from .perms import (
    YoungGroup, compose, identity_perm, inverse, perm_sign, transposition,
)
from .sparse import Echelon, SparseMatrix, nullspace


ARITY_BOUND_DEFAULT = 4


class EquivariantComplex:
    """A finite chain complex with an action of a Young group.

    The action is specified on the Coxeter generators (adjacent
    transpositions within blocks); validation checks each generator is a
    chain automorphism and that all Coxeter relations hold exactly.
    """

    def __init__(self, complex: ChainComplex, group: YoungGroup, action,
                 check=True, arity_bound=ARITY_BOUND_DEFAULT):
        self.complex = complex
        self.group = group
        gens = group.generator_positions()
        self.action = {i: action[i] for i in gens} if action else {}
        if set(self.action) != set(gens):
            raise ValueError("action must specify every Coxeter generator")
        self._cache = {identity_perm(group.degree): ChainMap.identity(complex)}
        if check:
            if group.degree > arity_bound and group.order > 24:
                raise ValueError("arity bound exceeded: %s" % (group,))
            self.validate()

    @property
    def field(self):
        return self.complex.field

    def validate(self):
        for i, f in self.action.items():
            if f.source is not self.complex or f.target is not self.complex:
                raise ValueError("generator action has wrong (co)domain")
            f.validate()
            if not f.is_iso():
                raise ValueError("generator action is not invertible")
        for w1, w2 in self.group.coxeter_relations():
            m1 = self._word_map(w1)
            m2 = self._word_map(w2)
            for k in self.complex.dims:
                if m1.component(k) != m2.component(k):
                    raise ValueError("Coxeter relation fails: %r vs %r" % (w1, w2))
        return self

    def _word_map(self, word) -> ChainMap:
        # word [i_1, ..., i_k] means s_{i_1} o ... o s_{i_k}
        out = ChainMap.identity(self.complex)
        for i in word:
            out = out.compose(self.action[i])
        return out

    def action_of(self, p) -> ChainMap:
        """Chain map for an arbitrary element of the Young group."""
        p = tuple(p)
        got = self._cache.get(p)
        if got is None:
            word = self.group.reduced_word(p)
            got = self._word_map(word)
            self._cache[p] = got
        return got

    def restrict(self, subgroup: YoungGroup) -> "EquivariantComplex":
        """Restrict along a Young subgroup whose blocks refine this group's."""
        if subgroup.degree != self.group.degree:
            raise ValueError("degree mismatch")
        action = {}
        n = self.group.degree
        for i in subgroup.generator_positions():
            action[i] = self.action_of(transposition(n, i))
        return EquivariantComplex(self.complex, subgroup, action, check=False)

    def truncate(self, lo, hi) -> "EquivariantComplex":
        c = self.complex.truncate(lo, hi)
        action = {}
        for i, f in self.action.items():
            comps = {k: m for k, m in f.components.items() if lo <= k <= hi}
            action[i] = ChainMap(c, c, comps, check=False)
        return EquivariantComplex(c, self.group, action, check=False)

    def __repr__(self):
        return "EquivariantComplex(%s on %r)" % (self.group, self.complex)


def trivial_action(complex: ChainComplex, group: YoungGroup) -> EquivariantComplex:
    act = {i: ChainMap.identity(complex) for i in group.generator_positions()}
    return EquivariantComplex(complex, group, act, check=False)


def sign_action(complex: ChainComplex, group: YoungGroup) -> EquivariantComplex:
    F = complex.field
    neg = F.neg(F.one())
    act = {i: ChainMap.identity(complex).scale(neg)
           for i in group.generator_positions()}
    return EquivariantComplex(complex, group, act, check=False)


def permutation_module(field, group: YoungGroup, labels, action_table,
                       degree=0, signs=None) -> EquivariantComplex:
    """Chain complex concentrated in one degree with a (signed) G-set action.

    action_table: {generator position: [image index per basis element]};
    signs (optional): {generator position: [sign per basis element]}.
    """
    n = len(labels)
    c = ChainComplex(field, {degree: n}, labels={degree: tuple(labels)})
    act = {}
    for i in group.generator_positions():
        if i not in action_table:
            raise ValueError("missing action for generator %d" % i)
        images = action_table[i]
        if sorted(images) != list(range(n)):
            raise ValueError("invalid action table for generator %d" % i)
        m = SparseMatrix(n, n, field)
        for j, img in enumerate(images):
            s = field.one()
            if signs and i in signs:
                s = field.coerce(signs[i][j])
            m[img, j] = s
        act[i] = ChainMap(c, c, {degree: m}, check=False)
    return EquivariantComplex(c, group, act)


def regular_module(field, group: YoungGroup, degree=0) -> EquivariantComplex:
    """k[G] with left translation action."""
    elements = group.elements()
    pos = {g: i for i, g in enumerate(elements)}
    n = group.degree
    table = {}
    for i in group.generator_positions():
        s = transposition(n, i)
        table[i] = [pos[compose(s, g)] for g in elements]
    return permutation_module(field, group, [("g",) + g for g in elements],
                              table, degree)


def tensor_power(x: ChainComplex, n: int,
                 arity_bound=ARITY_BOUND_DEFAULT) -> EquivariantComplex:
    """X^{(x) n} with Sigma_n permuting the factors with Koszul signs."""
    if n < 1:
        raise ValueError("tensor power needs n >= 1")
    group = YoungGroup.full(n)
    t = tensor_many([x] * n)
    F = x.field
    # index by (degs, idxs) for permutation action
    pos = {}
    for k in t.dims:
        for i, lab in enumerate(t.labels[k]):
            pos[lab] = (k, i)
    deg_of = {}
    for p in x.support():
        for lab in x.labels[p]:
            deg_of[lab] = p
    action = {}
    for gi in group.generator_positions():
        m_by_deg = {}
        for k in t.dims:
            m = SparseMatrix(t.dim(k), t.dim(k), F)
            for col, lab in enumerate(t.labels[k]):
                swapped = lab[:gi] + (lab[gi + 1], lab[gi]) + lab[gi + 2:]
                _, row = pos[swapped]
                d1, d2 = deg_of[lab[gi]], deg_of[lab[gi + 1]]
                s = F.one() if (d1 * d2) % 2 == 0 else F.neg(F.one())
                m[row, col] = s
            m_by_deg[k] = m
        action[gi] = ChainMap(t, t, m_by_deg, check=False)
    return EquivariantComplex(t, group, action, arity_bound=max(arity_bound, n))


@dataclass
class WindowedResult:
    """A complex whose homology is certified only inside `window`."""

    complex: ChainComplex
    window: DegreeWindow
    tag: str
    exact: bool = False  # True when the model is exact in all degrees

    def homology(self, k):
        if not self.exact and k not in self.window:
            raise ValueError("degree %d outside certified window %s" % (k, self.window))
        return self.complex.homology(k)

    def homology_dims(self):
        return self.complex.homology_dims(self.window)

    def is_acyclic(self):
        return self.complex.is_acyclic(self.window)


# ---------------------------------------------------------------------------
# Free resolutions over k[G]
# ---------------------------------------------------------------------------


class GroupResolution:
    """A free resolution of k over k[G], built greedily and extended on demand.

    Stage s is free of rank ranks[s]; its k-basis is (gen, g) for g in the
    fixed element order; h . (gen, g) = (gen, h o g).  diffs[s] maps stage s
    to stage s-1 as a k-matrix; diffs[0] is the augmentation to k.
    """

    def __init__(self, field: FieldSpec, group: YoungGroup):
        self.field = field
        self.group = group
        self.elements = group.elements()
        self.order = len(self.elements)
        self.pos = {g: i for i, g in enumerate(self.elements)}
        self.ranks = [1]
        aug = SparseMatrix(1, self.order, field)
        one = field.one()
        for j in range(self.order):
            aug[0, j] = one
        self.diffs = [aug]
        # left multiplication permutation matrices on k[G]
        self._left_mult = {}

    def stage_dim(self, s):
        return self.ranks[s] * self.order

    def basis_pos(self, s, gen, g):
        return gen * self.order + self.pos[g]

    def left_action_matrix(self, s, h) -> SparseMatrix:
        """Action of group element h on stage s."""
        key = tuple(h)
        base = self._left_mult.get(key)
        if base is None:
            base = SparseMatrix(self.order, self.order, self.field)
            one = self.field.one()
            for j, g in enumerate(self.elements):
                base[self.pos[compose(h, g)], j] = one
            self._left_mult[key] = base
        n = self.stage_dim(s)
        m = SparseMatrix(n, n, self.field)
        for gen in range(self.ranks[s]):
            off = gen * self.order
            for (i, j), v in base.entries.items():
                m[off + i, off + j] = v
        return m

    def extend_to(self, length):
        """Ensure stages 0..length exist."""
        F = self.field
        while len(self.ranks) <= length:
            s = len(self.ranks) - 1
            ker = nullspace(self.diffs[s])
            # deterministic order: sort kernel vectors by support
            ker.sort(key=lambda v: sorted(v.items(), key=lambda t: (t[0], str(t[1]))))
            gens = []
            span_rows, span_cols = [], []

            def reduce(vec):
                v = dict(vec)
                for colx, row in zip(span_cols, span_rows):
                    cc = v.get(colx)
                    if cc is None:
                        continue
                    for j, w in row.items():
                        cur = F.sub(v.get(j, F.zero()), F.mul(cc, w))
                        if F.is_zero(cur):
                            v.pop(j, None)
                        else:
                            v[j] = cur
                return v

            def add_to_span(vec):
                v = reduce(vec)
                if not v:
                    return False
                lead = min(v)
                inv = F.inv(v[lead])
                v = {j: F.mul(inv, w) for j, w in v.items()}
                span_cols.append(lead)
                span_rows.append(v)
                order = sorted(range(len(span_cols)), key=lambda t: span_cols[t])
                span_cols[:] = [span_cols[t] for t in order]
                span_rows[:] = [span_rows[t] for t in order]
                return True

            for v in ker:
                if reduce(v):
                    gens.append(dict(v))
                    for h in self.elements:
                        act = self.left_action_matrix(s, h)
                        add_to_span(act.apply(v))
            rank = len(gens)
            self.ranks.append(rank)
            d = SparseMatrix(self.stage_dim(s), rank * self.order, F)
            for gi, v in enumerate(gens):
                for h in self.elements:
                    act = self.left_action_matrix(s, h)
                    img = act.apply(v)
                    col = gi * self.order + self.pos[h]
                    for i, val in img.items():
                        d[i, col] = val
            self.diffs.append(d)
        return self


_RESOLUTION_CACHE = {}


def group_resolution(field: FieldSpec, group: YoungGroup) -> GroupResolution:
    key = (field.name(), group.blocks)
    res = _RESOLUTION_CACHE.get(key)
    if res is None:
        res = GroupResolution(field, group)
        _RESOLUTION_CACHE[key] = res
    return res


# ---------------------------------------------------------------------------
# Strict (co)invariants
# ---------------------------------------------------------------------------


def _generator_maps(a: EquivariantComplex):
    return [a.action[i] for i in a.group.generator_positions()]


def strict_fixed(a: EquivariantComplex):
    """Subcomplex of invariants; returns (complex, inclusion ChainMap)."""
    F = a.field
    c = a.complex
    gens = _generator_maps(a)
    dims, labels, incl = {}, {}, {}
    basis_by_deg = {}
    for k in c.support():
        n = c.dim(k)
        rows = []
        for g in gens:
            m = g.component(k) - SparseMatrix.identity(n, F)
            rows.append(m)
        if rows:
            stacked = SparseMatrix(n * len(rows), n, F)
            for t, m in enumerate(rows):
                for (i, j), v in m.entries.items():
                    stacked[t * n + i, j] = v
            basis = nullspace(stacked)
        else:
            basis = [{i: F.one()} for i in range(n)]
        if basis:
            dims[k] = len(basis)
            labels[k] = tuple(("fix", k, i) for i in range(len(basis)))
            basis_by_deg[k] = basis
    diff = {}
    for k in dims:
        if not dims.get(k - 1):
            continue
        # d restricted to invariants, expressed in the invariant basis
        below = basis_by_deg[k - 1]
        mat_below = SparseMatrix(c.dim(k - 1), len(below), F)
        for j, z in enumerate(below):
            for i, v in z.items():
                mat_below[i, j] = v
        m = SparseMatrix(len(below), dims[k], F)
        from .sparse import solve
        for j, z in enumerate(basis_by_deg[k]):
            img = c.d(k).apply(z)
            x = solve(mat_below, img)
            if x is None:
                raise ArithmeticError("differential does not preserve invariants")
            for i, v in x.items():
                m[i, j] = v
        diff[k] = m
    out = ChainComplex(F, dims, diff, labels, check=False)
    comps = {}
    for k, basis in basis_by_deg.items():
        m = SparseMatrix(c.dim(k), len(basis), F)
        for j, z in enumerate(basis):
            for i, v in z.items():
                m[i, j] = v
        comps[k] = m
    inclusion = ChainMap(out, c, comps, check=False)
    return out, inclusion


def strict_orbits(a: EquivariantComplex):
    """Quotient complex of coinvariants; returns (complex, projection ChainMap)."""
    F = a.field
    c = a.complex
    gens = _generator_maps(a)
    dims, labels, projs = {}, {}, {}
    for k in c.support():
        n = c.dim(k)
        rows = []
        for g in gens:
            m = g.component(k) - SparseMatrix.identity(n, F)
            for j in range(n):
                col = {i: v for (i, jj), v in m.entries.items() if jj == j}
                if col:
                    rows.append(col)
        # quotient by span(rows): echelon of rows; non-pivot coords give basis
        ech = Echelon(_rows_to_matrix(rows, n, F))
        piv = set(ech.pivot_cols)
        free = [j for j in range(n) if j not in piv]
        if free:
            dims[k] = len(free)
            labels[k] = tuple(("orb", k, c.labels[k][j]) for j in free)
        # projection: e_j -> reduce e_j, then read off free coordinates
        pmat = SparseMatrix(len(free), n, F)
        for j in range(n):
            red = ech.reduce_vector({j: F.one()})
            for t, fj in enumerate(free):
                v = red.get(fj)
                if v is not None:
                    pmat[t, j] = v
        projs[k] = (pmat, free)
    diff = {}
    for k in dims:
        if not dims.get(k - 1):
            continue
        pmat_below, free_below = projs[k - 1]
        _, free_here = projs[k]
        m = SparseMatrix(len(free_below), dims[k], F)
        dmat = c.d(k)
        for jj, j in enumerate(free_here):
            img = dmat.apply({j: F.one()})
            red = pmat_below.apply(img)
            for i, v in red.items():
                m[i, jj] = v
        diff[k] = m
    out = ChainComplex(F, dims, diff, labels, check=False)
    comps = {}
    for k in out.dims:
        comps[k] = projs[k][0]
    projection = ChainMap(c, out, comps, check=False)
    return out, projection


def _rows_to_matrix(rows, ncols, F):
    m = SparseMatrix(len(rows), ncols, F)
    for r, vec in enumerate(rows):
        for c, v in vec.items():
            m[r, c] = v
    return m


def is_free(a: EquivariantComplex) -> bool:
    """Detect a signed permutation basis on which G acts freely.

    Checks that every group element acts by a signed permutation matrix in
    the given basis and that no non-identity element fixes a basis line.
    """
    n = a.group.degree
    idp = identity_perm(n)
    for g in a.group.elements():
        if g == idp:
            continue
        f = a.action_of(g)
        for k in a.complex.support():
            m = f.component(k)
            cols = {}
            for (i, j), v in m.entries.items():
                cols.setdefault(j, []).append((i, v))
            for j in range(a.complex.dim(k)):
                hits = cols.get(j, [])
                if len(hits) != 1:
                    return False
                i, _ = hits[0]
                if i == j:
                    return False
    return True


# ---------------------------------------------------------------------------
# Homotopy orbits / fixed points / norm / Tate
# ---------------------------------------------------------------------------


def _orbit_stage(a: EquivariantComplex, res: GroupResolution, s: int):
    """A (x)_{kG} F_s  ~  A^{ranks[s]}; returns the action-translation data."""
    return res.ranks[s]


def homotopy_orbits(a: EquivariantComplex, w: DegreeWindow,
                    extra_stages: int = 0, tag="orbits",
                    stages: int | None = None) -> WindowedResult:
    """Total complex of A (x)_{kG} F_*, certified on w."""
    F = a.field
    c = a.complex
    if c.is_zero():
        return WindowedResult(c, w, tag, exact=True)
    res = group_resolution(F, a.group)
    if stages is None:
        stages = max(w.hi - c.min_degree + 2, 1) + extra_stages
    res.extend_to(stages)
    # basis of total complex in degree k: (s, gen, basis elt of A in deg k-s)
    # truncated above only: the model is naturally bounded below, so maps
    # between models of the same complex at different windows stay exact
    dims, labels, index = {}, {}, {}
    hi = w.hi + 1
    for s in range(stages + 1):
        r = res.ranks[s]
        if r == 0:
            break
        for k in c.support():
            tot = k + s
            if tot > hi:
                continue
            for gen in range(r):
                base = dims.get(tot, 0)
                for i in range(c.dim(k)):
                    index[(s, gen, k, i)] = (tot, base + i)
                dims[tot] = base + c.dim(k)
                labels.setdefault(tot, []).extend(
                    ("hG", s, gen, lab) for lab in c.labels[k])
    diff = {}
    inv_act = {}  # cache of action matrices for inverses

    def act_inv(g, k):
        key = (g, k)
        m = inv_act.get(key)
        if m is None:
            m = a.action_of(inverse(g)).component(k)
            inv_act[key] = m
        return m

    for (s, gen, k, i), (tot, col) in index.items():
        if not dims.get(tot - 1):
            continue
        m = diff.get(tot)
        if m is None:
            m = SparseMatrix(dims[tot - 1], dims[tot], F)
            diff[tot] = m
        # internal differential: d_A (x) id
        da = c.diff.get(k)
        if da is not None:
            for (i2, jj), v in da.entries.items():
                if jj == i and (s, gen, k - 1, i2) in index:
                    _, row = index[(s, gen, k - 1, i2)]
                    m.add_to(row, col, v)
        # resolution differential with Koszul sign (-1)^{|a|}, a in degree k
        if s >= 1:
            sgn = F.one() if k % 2 == 0 else F.neg(F.one())
            dres = res.diffs[s]
            src_col = gen * res.order + res.pos[identity_perm(a.group.degree)]
            for (ri, jj), v in dres.entries.items():
                if jj != src_col:
                    continue
                gen2, gpos = divmod(ri, res.order)
                g = res.elements[gpos]
                # a (x) (gen2, g) = (g^{-1} a) (x) (gen2, e)
                mat = act_inv(g, k)
                for (i2, ii), vv in mat.entries.items():
                    if ii == i and (s - 1, gen2, k, i2) in index:
                        _, row = index[(s - 1, gen2, k, i2)]
                        m.add_to(row, col, F.mul(sgn, F.mul(v, vv)))
    labels = {k: tuple(v) for k, v in labels.items()}
    out = ChainComplex(F, dims, diff, labels, check=False)
    out.validate()
    return WindowedResult(out, w, tag)


def homotopy_fixed(a: EquivariantComplex, w: DegreeWindow,
                   extra_stages: int = 0, tag="fixed",
                   stages: int | None = None) -> WindowedResult:
    """Total complex of Hom_{kG}(F_*, A), certified on w."""
    F = a.field
    c = a.complex
    if c.is_zero():
        return WindowedResult(c, w, tag, exact=True)
    res = group_resolution(F, a.group)
    if stages is None:
        stages = max(c.max_degree - w.lo + 2, 1) + extra_stages
    res.extend_to(stages)
    # truncated below only: the model is naturally bounded above
    dims, labels, index = {}, {}, {}
    lo = w.lo - 1
    for s in range(stages + 1):
        r = res.ranks[s]
        if r == 0:
            break
        for k in c.support():
            tot = k - s
            if tot < lo:
                continue
            for gen in range(r):
                base = dims.get(tot, 0)
                for i in range(c.dim(k)):
                    index[(s, gen, k, i)] = (tot, base + i)
                dims[tot] = base + c.dim(k)
                labels.setdefault(tot, []).extend(
                    ("hGf", s, gen, lab) for lab in c.labels[k])
    diff = {}
    act_cache = {}

    def act(g, k):
        key = (g, k)
        m = act_cache.get(key)
        if m is None:
            m = a.action_of(g).component(k)
            act_cache[key] = m
        return m

    for (s, gen, k, i), (tot, col) in index.items():
        if not dims.get(tot - 1):
            continue
        m = diff.get(tot)
        if m is None:
            m = SparseMatrix(dims[tot - 1], dims[tot], F)
            diff[tot] = m
        # (Df) = d_A o f - (-1)^{tot} f o d_F
        da = c.diff.get(k)
        if da is not None:
            for (i2, jj), v in da.entries.items():
                if jj == i and (s, gen, k - 1, i2) in index:
                    _, row = index[(s, gen, k - 1, i2)]
                    m.add_to(row, col, v)
        # f o d_{s+1}: value on (gen', e) = f(d(gen', e)) = sum c_t g_t . f(gen_t, e)
        if s + 1 <= stages and res.ranks[s + 1] > 0:
            sgn = F.one() if tot % 2 == 0 else F.neg(F.one())
            sgn = F.neg(sgn)
            dres = res.diffs[s + 1]
            for gen2 in range(res.ranks[s + 1]):
                src_col = gen2 * res.order + res.pos[identity_perm(a.group.degree)]
                for (ri, jj), v in dres.entries.items():
                    if jj != src_col:
                        continue
                    gent, gpos = divmod(ri, res.order)
                    if gent != gen:
                        continue
                    g = res.elements[gpos]
                    mat = act(g, k)
                    for (i2, ii), vv in mat.entries.items():
                        if ii == i and (s + 1, gen2, k, i2) in index:
                            _, row = index[(s + 1, gen2, k, i2)]
                            m.add_to(row, col, F.mul(sgn, F.mul(v, vv)))
    labels = {k: tuple(v) for k, v in labels.items()}
    out = ChainComplex(F, dims, diff, labels, check=False)
    out.validate()
    return WindowedResult(out, w, tag)


def orbit_projection_to_strict(a: EquivariantComplex, ho: WindowedResult) -> ChainMap:
    """The chain map (A (x)_{kG} F)  ->  A_G induced by the augmentation."""
    F = a.field
    strict, proj = strict_orbits(a)
    comps = {}
    src = ho.complex
    for k in src.dims:
        m = SparseMatrix(strict.dim(k), src.dim(k), F)
        for col, lab in enumerate(src.labels[k]):
            _, s, gen, alab = lab
            if s != 0:
                continue
            i = a.complex.labels[k].index(alab) if alab in a.complex.labels.get(k, ()) else None
            if i is None:
                continue
            pm = proj.component(k)
            for (r, jj), v in pm.entries.items():
                if jj == i:
                    m.add_to(r, col, v)
        if not m.is_zero():
            comps[k] = m
    return ChainMap(src, strict, comps, check=False)


def norm_map(a: EquivariantComplex, w: DegreeWindow,
             orbits: WindowedResult | None = None,
             fixed: WindowedResult | None = None) -> ChainMap:
    """Chain-level norm: orbit model -> strict orbits -> N -> invariants -> fixed model."""
    F = a.field
    if orbits is None:
        orbits = homotopy_orbits(a, w)
    if fixed is None:
        fixed = homotopy_fixed(a, w)
    if orbits.window != fixed.window:
        raise ValueError("window mismatch between orbit and fixed models")
    c = a.complex
    src, tgt = orbits.complex, fixed.complex
    # norm on the underlying complex: x -> sum_g g.x
    comps = {}
    for k in c.support():
        n = c.dim(k)
        if n == 0:
            continue
        nm = SparseMatrix(n, n, F)
        for g in a.group.elements():
            nm = nm + a.action_of(g).component(k)
        comps[k] = nm
    # assemble: src (s=0 part, identity-coset) --aug--> A --N--> A --coaug--> tgt
    out_comps = {}
    src_pos = {}
    for k in src.dims:
        for i, lab in enumerate(src.labels[k]):
            src_pos[(k, lab)] = i
    tgt_pos = {}
    for k in tgt.dims:
        for i, lab in enumerate(tgt.labels[k]):
            tgt_pos[(k, lab)] = i
    for k in src.dims:
        if k not in tgt.dims:
            continue
        m = SparseMatrix(tgt.dim(k), src.dim(k), F)
        nm = comps.get(k)
        if nm is None:
            continue
        a_idx = {lab: i for i, lab in enumerate(c.labels.get(k, ()))}
        for col, lab in enumerate(src.labels[k]):
            _, s, gen, alab = lab
            if s != 0:
                continue
            i = a_idx[alab]
            # N(e_i) expressed in A, then placed in the s=0 slot of the target
            for (i2, jj), v in nm.entries.items():
                if jj == i:
                    row = tgt_pos.get((k, ("hGf", 0, 0, c.labels[k][i2])))
                    if row is not None:
                        m.add_to(row, col, v)
        if not m.is_zero():
            out_comps[k] = m
    f = ChainMap(src, tgt, out_comps, check=False)
    f.validate()
    return f


def tate(a: EquivariantComplex, w: DegreeWindow, extra_stages: int = 0,
         fixed_stages=None, orbit_stages=None) -> WindowedResult:
    """Tate construction: cone of the norm map, window shrunk by 1 each end."""
    wide = w.expand(1)
    orbits = homotopy_orbits(a, wide, extra_stages, stages=orbit_stages)
    fixed = homotopy_fixed(a, wide, extra_stages, stages=fixed_stages)
    nm = norm_map(a, wide, orbits, fixed)
    out = WindowedResult(cone(nm), w, "tate")
    out.orbits = orbits
    out.fixed = fixed
    return out


def induced_from_trivial_subgroup(pieces, group: YoungGroup) -> EquivariantComplex:
    """k[G] (x) V presented as a direct sum of |G| copies of V permuted by G.

    `pieces` is a single ChainComplex V; the result is free, used for tests.
    """
    from .chain import direct_sum
    elements = group.elements()
    total = direct_sum([pieces] * len(elements))
    F = pieces.field
    pos = {g: i for i, g in enumerate(elements)}
    n = group.degree
    action = {}
    for gi in group.generator_positions():
        s = transposition(n, gi)
        comps = {}
        for k in total.dims:
            m = SparseMatrix(total.dim(k), total.dim(k), F)
            nd = pieces.dim(k)
            for t, g in enumerate(elements):
                t2 = pos[compose(s, g)]
                for i in range(nd):
                    m[t2 * nd + i, t * nd + i] = F.one()
            comps[k] = m
        action[gi] = ChainMap(total, total, comps, check=False)
    return EquivariantComplex(total, group, action, check=False)
