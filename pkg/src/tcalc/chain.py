"""Finite chain complexes over an exact field, and their homological algebra.

Conventions fixed once for the whole package:

* differentials lower degree: d_k : C_k -> C_{k-1};
* tensor differential d(x (x) y) = dx (x) y + (-1)^{|x|} x (x) dy;
* hom complex Hom(C, D)_n = prod_k Hom(C_k, D_{k+n}) with
  (df) = d_D f - (-1)^{|f|} f d_C;
* dual(C)_k = Hom(C_{-k}, k) with (df)(x) = -(-1)^{|f|} f(dx);
* cone(f: C -> D)_k = C_{k-1} (+) D_k with d(c, x) = (-dc, dx - f(c));
* shift(C, d)_k = C_{k-d} with differential scaled by (-1)^d.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fields import FieldSpec
from .sparse import Echelon, SparseMatrix, nullspace, solve


@dataclass(frozen=True)
class DegreeWindow:
    """Closed interval of homological degrees in which a result is certified."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("empty degree window")

    def __contains__(self, k) -> bool:
        return self.lo <= k <= self.hi

    def degrees(self):
        return range(self.lo, self.hi + 1)

    def shrink(self, n=1) -> "DegreeWindow":
        return DegreeWindow(self.lo + n, self.hi - n)

    def expand(self, n=1) -> "DegreeWindow":
        return DegreeWindow(self.lo - n, self.hi + n)

    def intersect(self, other: "DegreeWindow") -> "DegreeWindow":
        return DegreeWindow(max(self.lo, other.lo), min(self.hi, other.hi))

    def __str__(self):
        return "[%d,%d]" % (self.lo, self.hi)


class ChainComplex:
    """A finite chain complex with labeled bases.

    dims: {degree: dimension}; diff: {degree k: SparseMatrix C_k -> C_{k-1}};
    labels: {degree: tuple of hashable labels}.
    """

    def __init__(self, field: FieldSpec, dims, diff=None, labels=None, check=True):
        self.field = field
        self.dims = {k: n for k, n in dims.items() if n}
        self.diff = {}
        if diff:
            for k, m in diff.items():
                if m is not None and not m.is_zero():
                    self.diff[k] = m
        self.labels = {}
        for k, n in self.dims.items():
            if labels and k in labels:
                lab = tuple(labels[k])
                if len(lab) != n:
                    raise ValueError("label count mismatch in degree %d" % k)
            else:
                lab = tuple(("e", k, i) for i in range(n))
            self.labels[k] = lab
        if check:
            self.validate()

    # -- basic structure -----------------------------------------------------

    def dim(self, k) -> int:
        return self.dims.get(k, 0)

    def support(self):
        return sorted(self.dims)

    @property
    def min_degree(self):
        return min(self.dims) if self.dims else 0

    @property
    def max_degree(self):
        return max(self.dims) if self.dims else 0

    def total_dim(self) -> int:
        return sum(self.dims.values())

    def d(self, k) -> SparseMatrix:
        m = self.diff.get(k)
        if m is None:
            return SparseMatrix(self.dim(k - 1), self.dim(k), self.field)
        return m

    def is_zero(self) -> bool:
        return not self.dims

    def validate(self):
        for k, m in self.diff.items():
            if m.rows != self.dim(k - 1) or m.cols != self.dim(k):
                raise ValueError("differential shape mismatch in degree %d" % k)
            if m.field != self.field:
                raise ValueError("differential field mismatch")
        for k in list(self.diff):
            if self.dim(k):
                dd = self.d(k - 1) * self.d(k)
                if not dd.is_zero():
                    raise ValueError("d o d != 0 leaving degree %d" % k)
        return self

    def label_index(self, k):
        return {lab: i for i, lab in enumerate(self.labels.get(k, ()))}

    def relabel(self, fn) -> "ChainComplex":
        labels = {k: tuple(fn(k, lab) for lab in labs) for k, labs in self.labels.items()}
        return ChainComplex(self.field, self.dims, self.diff, labels, check=False)

    def __repr__(self):
        if not self.dims:
            return "ChainComplex(0 over %s)" % self.field.name()
        return "ChainComplex(%s; dims %s)" % (
            self.field.name(), {k: self.dims[k] for k in self.support()})

    # -- homology -------------------------------------------------------------

    def homology_data(self, k):
        """(dimension, list of representing cycles, Echelon of boundary space).

        Cycles are sparse column vectors in degree k, independent mod boundaries.
        """
        n = self.dim(k)
        if n == 0:
            return 0, [], None
        cycles = nullspace(self.d(k))
        bnd = Echelon(self.d(k + 1).transpose())  # row space = image of d_{k+1}
        reps = []
        # echelon of boundaries + already-chosen reps, grown incrementally
        span_rows = list(bnd.pivot_rows)
        span_cols = list(bnd.pivot_cols)
        F = self.field
        for z in cycles:
            v = dict(z)
            for col, row in zip(span_cols, span_rows):
                c = v.get(col)
                if c is None:
                    continue
                for j, w in row.items():
                    cur = F.sub(v.get(j, F.zero()), F.mul(c, w))
                    if F.is_zero(cur):
                        v.pop(j, None)
                    else:
                        v[j] = cur
            if v:
                lead = min(v)
                inv = F.inv(v[lead])
                v = {j: F.mul(inv, w) for j, w in v.items()}
                reps.append(dict(z))
                span_cols.append(lead)
                span_rows.append(v)
                order = sorted(range(len(span_cols)), key=lambda t: span_cols[t])
                span_cols = [span_cols[t] for t in order]
                span_rows = [span_rows[t] for t in order]
        return len(reps), reps, bnd

    def homology(self, k):
        """(dim H_k, basis of representing cycles)."""
        dim, reps, _ = self.homology_data(k)
        return dim, reps

    def homology_dims(self, window: DegreeWindow | None = None):
        degs = window.degrees() if window else self.support()
        out = {}
        for k in degs:
            n = self.dim(k)
            if n == 0 and self.dim(k + 1) == 0:
                continue
            dim_h = (n - Echelon(self.d(k)).rank) - Echelon(self.d(k + 1)).rank
            if dim_h:
                out[k] = dim_h
        return out

    def is_acyclic(self, window: DegreeWindow) -> bool:
        return not self.homology_dims(window)

    # -- truncation -------------------------------------------------------------

    def truncate(self, lo, hi) -> "ChainComplex":
        """Brutal truncation to degrees [lo, hi]; homology certified on (lo, hi)."""
        dims = {k: n for k, n in self.dims.items() if lo <= k <= hi}
        diff = {k: m for k, m in self.diff.items() if lo + 1 <= k <= hi}
        labels = {k: self.labels[k] for k in dims}
        return ChainComplex(self.field, dims, diff, labels, check=False)


class ChainMap:
    """Degreewise map of chain complexes commuting with differentials."""

    def __init__(self, source: ChainComplex, target: ChainComplex, components=None,
                 degree: int = 0, check=True):
        if source.field != target.field:
            raise ValueError("field mismatch")
        self.source = source
        self.target = target
        self.degree = degree
        self.components = {}
        if components:
            for k, m in components.items():
                if m is not None and not m.is_zero():
                    self.components[k] = m
        if check:
            self.validate()

    @property
    def field(self):
        return self.source.field

    def component(self, k) -> SparseMatrix:
        m = self.components.get(k)
        if m is None:
            return SparseMatrix(self.target.dim(k + self.degree),
                                self.source.dim(k), self.field)
        return m

    def validate(self):
        for k, m in self.components.items():
            if m.rows != self.target.dim(k + self.degree) or m.cols != self.source.dim(k):
                raise ValueError("component shape mismatch in degree %d" % k)
        s = 1 if self.degree % 2 == 0 else -1
        for k in set(self.source.dims) | {k + 1 for k in self.source.dims}:
            lhs = self.target.d(k + self.degree) * self.component(k)
            rhs = self.component(k - 1) * self.source.d(k)
            if s < 0:
                rhs = -rhs
            if lhs != rhs:
                raise ValueError("chain map fails to commute with d in degree %d" % k)
        return self

    @classmethod
    def zero(cls, source, target, degree=0):
        return cls(source, target, {}, degree, check=False)

    @classmethod
    def identity(cls, c: ChainComplex):
        comps = {k: SparseMatrix.identity(n, c.field) for k, n in c.dims.items()}
        return cls(c, c, comps, check=False)

    def __add__(self, other):
        assert self.degree == other.degree
        comps = dict(self.components)
        out = ChainMap(self.source, self.target, None, self.degree, check=False)
        out.components = comps
        for k, m in other.components.items():
            cur = out.component(k) + m
            if cur.is_zero():
                out.components.pop(k, None)
            else:
                out.components[k] = cur
        return out

    def __sub__(self, other):
        return self + other.scale(self.field.neg(self.field.one()))

    def scale(self, c):
        out = ChainMap(self.source, self.target, None, self.degree, check=False)
        out.components = {k: m.scale(c) for k, m in self.components.items()}
        out.components = {k: m for k, m in out.components.items() if not m.is_zero()}
        return out

    def compose(self, other: "ChainMap") -> "ChainMap":
        """self o other."""
        if other.target is not self.source and other.target.dims != self.source.dims:
            raise ValueError("composition mismatch")
        deg = self.degree + other.degree
        comps = {}
        for k in other.source.dims:
            m = self.component(k + other.degree) * other.component(k)
            if not m.is_zero():
                comps[k] = m
        return ChainMap(other.source, self.target, comps, deg, check=False)

    def is_zero(self):
        return not self.components

    def is_iso(self) -> bool:
        if self.degree != 0:
            return False
        for k in set(self.source.dims) | set(self.target.dims):
            n, m = self.source.dim(k), self.target.dim(k)
            if n != m:
                return False
            if n and Echelon(self.component(k)).rank != n:
                return False
        return True

    def induced_on_homology(self, k):
        """Matrix of H_k(source) -> H_{k+degree}(target) on chosen cycle bases."""
        sd, sreps, _ = self.source.homology_data(k)
        td, treps, tbnd = self.target.homology_data(k + self.degree)
        F = self.field
        out = SparseMatrix(td, sd, F)
        if sd == 0 or self.source.dim(k) == 0:
            return out
        if td == 0:
            return out
        # express image cycles in homology basis: solve [reps | boundaries] x = img
        ncols_t = self.target.dim(k + self.degree)
        bmat = self.target.d(k + self.degree + 1)
        width = td + bmat.cols
        A = SparseMatrix(ncols_t, width, F)
        for j, z in enumerate(treps):
            for i, v in z.items():
                A[i, j] = v
        for (i, j), v in bmat.entries.items():
            A[i, td + j] = v
        comp = self.component(k)
        for j, z in enumerate(sreps):
            img = comp.apply(z)
            x = solve(A, img)
            if x is None:
                raise ArithmeticError("image of cycle is not a cycle mod boundaries")
            for i in range(td):
                v = x.get(i)
                if v is not None:
                    out[i, j] = v
        return out


class ChainHomotopy:
    """h with f - g = d h + h d (components h_k : C_k -> D_{k+1})."""

    def __init__(self, f: ChainMap, g: ChainMap, components, check=True):
        self.f = f
        self.g = g
        self.components = {k: m for k, m in components.items() if not m.is_zero()}
        if check:
            self.validate()

    def component(self, k):
        m = self.components.get(k)
        if m is None:
            return SparseMatrix(self.f.target.dim(k + 1), self.f.source.dim(k), self.f.field)
        return m

    def validate(self):
        C, D = self.f.source, self.f.target
        for k in set(C.dims) | {k - 1 for k in D.dims}:
            want = self.f.component(k) - self.g.component(k)
            got = D.d(k + 1) * self.component(k) + self.component(k - 1) * C.d(k)
            if want != got:
                raise ValueError("homotopy identity fails in degree %d" % k)
        return self


def homotopy_between(f: ChainMap, g: ChainMap) -> ChainHomotopy | None:
    """Solve f - g = d h + h d for h; None if no exact witness exists."""
    C, D = f.source, f.target
    F = f.field
    degs = sorted(set(C.dims) | {k - 1 for k in D.dims})
    # unknowns: entries of h_k for each k; assemble one global linear system
    var_index = {}
    nvars = 0
    for k in degs:
        rows, cols = D.dim(k + 1), C.dim(k)
        for i in range(rows):
            for j in range(cols):
                var_index[(k, i, j)] = nvars
                nvars += 1
    eqs = []  # (coeff dict, rhs scalar)
    for k in degs:
        want = f.component(k) - g.component(k)
        rows, cols = D.dim(k), C.dim(k)
        dd = D.d(k + 1)
        dc = C.d(k)
        for i in range(rows):
            for j in range(cols):
                coeffs = {}
                # (d h)_ij = sum_m dd[i,m] h_k[m,j]
                for (ii, m), v in dd.entries.items():
                    if ii == i:
                        coeffs[var_index[(k, m, j)]] = v
                # (h d)_ij = sum_m h_{k-1}[i,m] dc[m,j]
                for (m, jj), v in dc.entries.items():
                    if jj == j and (k - 1, i, m) in var_index:
                        idx = var_index[(k - 1, i, m)]
                        coeffs[idx] = F.add(coeffs.get(idx, F.zero()), v)
                rhs = want[i, j]
                if coeffs or not F.is_zero(rhs):
                    eqs.append((coeffs, rhs))
    A = SparseMatrix(len(eqs), nvars, F)
    b = {}
    for r, (coeffs, rhs) in enumerate(eqs):
        for c, v in coeffs.items():
            A[r, c] = v
        if not F.is_zero(rhs):
            b[r] = rhs
    x = solve(A, b)
    if x is None:
        return None
    comps = {}
    for (k, i, j), idx in var_index.items():
        v = x.get(idx)
        if v is not None and not F.is_zero(v):
            comps.setdefault(k, SparseMatrix(D.dim(k + 1), C.dim(k), F))[i, j] = v
    return ChainHomotopy(f, g, comps)


def nullhomotopy(f: ChainMap) -> ChainHomotopy | None:
    return homotopy_between(f, ChainMap.zero(f.source, f.target))


# ---------------------------------------------------------------------------
# Constructions
# ---------------------------------------------------------------------------


def zero_complex(field) -> ChainComplex:
    return ChainComplex(field, {})


def sphere(field, degree=0, label="s") -> ChainComplex:
    """Field in a single degree."""
    return ChainComplex(field, {degree: 1}, labels={degree: ((label, degree),)})


def direct_sum(complexes) -> ChainComplex:
    complexes = list(complexes)
    if not complexes:
        raise ValueError("empty direct sum; pass at least one complex")
    field = complexes[0].field
    for c in complexes:
        if c.field != field:
            raise ValueError("field mismatch in direct sum")
    dims, labels = {}, {}
    offs = []  # per complex: {degree: offset}
    for idx, c in enumerate(complexes):
        off = {}
        for k, n in c.dims.items():
            off[k] = dims.get(k, 0)
            dims[k] = dims.get(k, 0) + n
            labels.setdefault(k, [])
            labels[k].extend((idx, lab) for lab in c.labels[k])
        offs.append(off)
    diff = {}
    for k in list(dims):
        if dims.get(k) and dims.get(k - 1):
            m = SparseMatrix(dims[k - 1], dims[k], field)
            for idx, c in enumerate(complexes):
                dk = c.diff.get(k)
                if dk is None:
                    continue
                r0, c0 = offs[idx].get(k - 1, 0), offs[idx].get(k, 0)
                for (i, j), v in dk.entries.items():
                    m[r0 + i, c0 + j] = v
            diff[k] = m
    labels = {k: tuple(v) for k, v in labels.items()}
    return ChainComplex(field, dims, diff, labels, check=False)


def summand_inclusion(summands, total, idx) -> ChainMap:
    """Inclusion of summands[idx] into direct_sum(summands) rebuilt as `total`."""
    c = summands[idx]
    comps = {}
    for k, n in c.dims.items():
        off = 0
        for prev in summands[:idx]:
            off += prev.dim(k)
        m = SparseMatrix(total.dim(k), n, c.field)
        for j in range(n):
            m[off + j, j] = c.field.one()
        comps[k] = m
    return ChainMap(c, total, comps, check=False)


def summand_projection(summands, total, idx) -> ChainMap:
    inc = summand_inclusion(summands, total, idx)
    comps = {k: m.transpose() for k, m in inc.components.items()}
    out = ChainMap(total, summands[idx], None, check=False)
    out.components = {k: m for k, m in comps.items() if not m.is_zero()}
    return out


def shift(c: ChainComplex, d: int) -> ChainComplex:
    sgn = c.field.one() if d % 2 == 0 else c.field.neg(c.field.one())
    dims = {k + d: n for k, n in c.dims.items()}
    diff = {k + d: m.scale(sgn) for k, m in c.diff.items()}
    labels = {k + d: tuple(("sh", d, lab) for lab in c.labels[k]) for k in c.dims}
    return ChainComplex(c.field, dims, diff, labels, check=False)


def shift_map(f: ChainMap, d: int) -> ChainMap:
    src = shift(f.source, d)
    tgt = shift(f.target, d)
    comps = {k + d: m for k, m in f.components.items()}
    return ChainMap(src, tgt, comps, f.degree, check=False)


def tensor(c: ChainComplex, dc: ChainComplex) -> ChainComplex:
    if c.field != dc.field:
        raise ValueError("field mismatch in tensor")
    field = c.field
    dims, labels, index = {}, {}, {}
    for p in c.support():
        for q in dc.support():
            k = p + q
            base = dims.get(k, 0)
            for i in range(c.dim(p)):
                for j in range(dc.dim(q)):
                    index[(p, i, q, j)] = (k, base + i * dc.dim(q) + j)
            dims[k] = base + c.dim(p) * dc.dim(q)
            labels.setdefault(k, [])
            labels[k].extend((c.labels[p][i], dc.labels[q][j])
                             for i in range(c.dim(p)) for j in range(dc.dim(q)))
    diff = {}
    one = field.one()
    for (p, i, q, j), (k, col) in index.items():
        if k not in diff:
            if dims.get(k) and dims.get(k - 1):
                diff[k] = SparseMatrix(dims[k - 1], dims[k], field)
    for (p, i, q, j), (k, col) in index.items():
        m = diff.get(k)
        if m is None:
            continue
        dp = c.diff.get(p)
        if dp is not None:
            for (i2, jj), v in dp.entries.items():
                if jj == i:
                    _, row = index[(p - 1, i2, q, j)]
                    m.add_to(row, col, v)
        dq = dc.diff.get(q)
        if dq is not None:
            sgn = one if p % 2 == 0 else field.neg(one)
            for (j2, jj), v in dq.entries.items():
                if jj == j:
                    _, row = index[(p, i, q - 1, j2)]
                    m.add_to(row, col, field.mul(sgn, v))
    labels = {k: tuple(v) for k, v in labels.items()}
    out = ChainComplex(field, dims, diff, labels, check=False)
    return out


def tensor_map(f: ChainMap, g: ChainMap) -> ChainMap:
    """f (x) g with Koszul sign (-1)^{|g| * p} on the degree-p part of f's source."""
    src = tensor(f.source, g.source)
    tgt = tensor(f.target, g.target)
    F = f.field
    src_idx = {lab: (k, i) for k in src.dims for i, lab in enumerate(src.labels[k])}
    tgt_idx = {lab: (k, i) for k in tgt.dims for i, lab in enumerate(tgt.labels[k])}
    deg = f.degree + g.degree
    comps = {}
    fs_pos = {}
    for p in f.source.dims:
        for i, lab in enumerate(f.source.labels[p]):
            fs_pos[lab] = (p, i)
    gs_pos = {}
    for q in g.source.dims:
        for j, lab in enumerate(g.source.labels[q]):
            gs_pos[lab] = (q, j)
    ft_pos = {}
    for p in f.target.dims:
        for i, lab in enumerate(f.target.labels[p]):
            ft_pos[lab] = (p, i)
    gt_pos = {}
    for q in g.target.dims:
        for j, lab in enumerate(g.target.labels[q]):
            gt_pos[lab] = (q, j)
    for lab, (k, col) in src_idx.items():
        lf, lg = lab
        p, i = fs_pos[lf]
        q, j = gs_pos[lg]
        fm = f.components.get(p)
        gm = g.components.get(q)
        sgn_g = F.one() if (g.degree * p) % 2 == 0 else F.neg(F.one())
        for lf2, (p2, i2) in ft_pos.items():
            if p2 != p + f.degree:
                continue
            a = fm[i2, i] if fm is not None else F.zero()
            if F.is_zero(a):
                continue
            for lg2, (q2, j2) in gt_pos.items():
                if q2 != q + g.degree:
                    continue
                b = gm[j2, j] if gm is not None else F.zero()
                if F.is_zero(b):
                    continue
                k2, row = tgt_idx[(lf2, lg2)]
                comps.setdefault(k, SparseMatrix(tgt.dim(k + deg), src.dim(k), F))
                comps[k].add_to(row, col, F.mul(sgn_g, F.mul(a, b)))
    return ChainMap(src, tgt, comps, deg, check=False)


def tensor_many(complexes) -> ChainComplex:
    """Iterated tensor with flat tuple labels ((lab_1, ..., lab_n))."""
    complexes = list(complexes)
    if not complexes:
        raise ValueError("empty tensor product")
    field = complexes[0].field
    from itertools import product as _prod
    supports = [c.support() for c in complexes]
    dims, labels, index = {}, {}, {}
    for degs in _prod(*supports):
        k = sum(degs)
        ranges = [range(c.dim(p)) for c, p in zip(complexes, degs)]
        for idxs in _prod(*ranges):
            base = dims.get(k, 0)
            index[(degs, idxs)] = (k, base)
            dims[k] = base + 1
            labels.setdefault(k, []).append(
                tuple(c.labels[p][i] for c, p, i in zip(complexes, degs, idxs)))
    diff = {}
    one = field.one()
    for (degs, idxs), (k, col) in index.items():
        if not dims.get(k - 1):
            continue
        m = diff.get(k)
        if m is None:
            m = SparseMatrix(dims[k - 1], dims[k], field)
            diff[k] = m
        sgn = one
        for t, (c, p, i) in enumerate(zip(complexes, degs, idxs)):
            dp = c.diff.get(p)
            if dp is not None:
                for (i2, jj), v in dp.entries.items():
                    if jj == i:
                        nd = degs[:t] + (p - 1,) + degs[t + 1:]
                        ni = idxs[:t] + (i2,) + idxs[t + 1:]
                        _, row = index[(nd, ni)]
                        m.add_to(row, col, field.mul(sgn, v))
            if p % 2 != 0:
                sgn = field.neg(sgn)
    labels = {k: tuple(v) for k, v in labels.items()}
    return ChainComplex(field, dims, diff, labels, check=False)


def hom_complex(c: ChainComplex, d: ChainComplex) -> ChainComplex:
    """Hom(C, D) with basis labels ('hom', source label, target label)."""
    if c.field != d.field:
        raise ValueError("field mismatch in hom")
    field = c.field
    dims, labels, index = {}, {}, {}
    for p in c.support():
        for q in d.support():
            n = q - p
            base = dims.get(n, 0)
            cnt = 0
            for i in range(c.dim(p)):
                for j in range(d.dim(q)):
                    index[(p, i, q, j)] = (n, base + cnt)
                    cnt += 1
            dims[n] = base + cnt
            labels.setdefault(n, [])
            labels[n].extend(("hom", c.labels[p][i], d.labels[q][j])
                             for i in range(c.dim(p)) for j in range(d.dim(q)))
    diff = {}
    one = field.one()
    for (p, i, q, j), (n, col) in index.items():
        # d(f) = d_D o f - (-1)^n f o d_C ; basis element E_{(p,i),(q,j)}
        m = diff.get(n)
        if m is None and dims.get(n - 1):
            m = SparseMatrix(dims[n - 1], dims[n], field)
            diff[n] = m
        if m is None:
            continue
        dd = d.diff.get(q)
        if dd is not None:
            for (j2, jj), v in dd.entries.items():
                if jj == j:
                    _, row = index[(p, i, q - 1, j2)]
                    m.add_to(row, col, v)
        dc = c.diff.get(p + 1)
        if dc is not None:
            sgn = one if n % 2 == 0 else field.neg(one)
            sgn = field.neg(sgn)  # -(-1)^n
            for (ii, i2), v in dc.entries.items():
                if ii == i:
                    _, row = index[(p + 1, i2, q, j)]
                    m.add_to(row, col, field.mul(sgn, v))
    labels = {k: tuple(v) for k, v in labels.items()}
    return ChainComplex(field, dims, diff, labels, check=False)


def hom_element_to_map(h: ChainComplex, c: ChainComplex, d: ChainComplex,
                       vec: dict, degree=0) -> ChainMap:
    """Interpret a degree-`degree` cycle of hom_complex(c, d) as a ChainMap."""
    F = c.field
    comps = {}
    labs = h.labels.get(degree, ())
    cpos = {lab: (k, i) for k in c.dims for i, lab in enumerate(c.labels[k])}
    dpos = {lab: (k, j) for k in d.dims for j, lab in enumerate(d.labels[k])}
    for idx, v in vec.items():
        _, lc, ld = labs[idx]
        p, i = cpos[lc]
        q, j = dpos[ld]
        comps.setdefault(p, SparseMatrix(d.dim(p + degree), c.dim(p), F))
        comps[p].add_to(j, i, v)
    return ChainMap(c, d, comps, degree, check=False)


def map_to_hom_element(h: ChainComplex, f: ChainMap) -> dict:
    """Inverse of hom_element_to_map: ChainMap -> vector in hom complex."""
    degree = f.degree
    labs = h.labels.get(degree, ())
    pos = {lab: idx for idx, lab in enumerate(labs)}
    cl = f.source.labels
    dl = f.target.labels
    vec = {}
    for p, m in f.components.items():
        for (j, i), v in m.entries.items():
            lab = ("hom", cl[p][i], dl[p + degree][j])
            vec[pos[lab]] = v
    return vec


def dual(c: ChainComplex) -> ChainComplex:
    """Spanier-Whitehead style dual: dual(C)_k = Hom(C_{-k}, field)."""
    field = c.field
    dims = {-k: n for k, n in c.dims.items()}
    labels = {-k: tuple(("dual", lab) for lab in c.labels[k]) for k in c.dims}
    diff = {}
    one = field.one()
    for k in c.support():
        # d_dual : dual_{-k} -> dual_{-k-1} is induced by d : C_{k+1} -> C_k
        dk1 = c.diff.get(k + 1)
        if dk1 is None:
            continue
        n = -k
        # (df)(x) = -(-1)^{|f|} f(dx), |f| = n
        sgn = field.neg(one) if n % 2 == 0 else one
        diff[n] = dk1.transpose().scale(sgn)
    return ChainComplex(field, dims, diff, labels, check=False)


def dual_map(f: ChainMap) -> ChainMap:
    """Dual of a degree-0 chain map (contravariant)."""
    assert f.degree == 0
    src = dual(f.target)
    tgt = dual(f.source)
    comps = {}
    for k, m in f.components.items():
        comps[-k] = m.transpose()
    return ChainMap(src, tgt, comps, check=False)


def cone(f: ChainMap) -> ChainComplex:
    """Mapping cone: cone(f)_k = C_{k-1} (+) D_k, d(c,x) = (-dc, dx - f c)."""
    assert f.degree == 0
    c, d = f.source, f.target
    field = c.field
    dims, labels = {}, {}
    for k in set(list(c.dims) + list(d.dims) + [k + 1 for k in c.dims]):
        n = c.dim(k - 1) + d.dim(k)
        if n:
            dims[k] = n
            labels[k] = tuple(("cone-src", lab) for lab in c.labels.get(k - 1, ())) + \
                tuple(("cone-tgt", lab) for lab in d.labels.get(k, ()))
    diff = {}
    for k in dims:
        if not dims.get(k - 1):
            continue
        m = SparseMatrix(dims[k - 1], dims[k], field)
        nc_prev = c.dim(k - 2)
        dc = c.diff.get(k - 1)
        if dc is not None:
            for (i, j), v in dc.entries.items():
                m[i, j] = field.neg(v)
        dd = d.diff.get(k)
        if dd is not None:
            for (i, j), v in dd.entries.items():
                m[nc_prev + i, c.dim(k - 1) + j] = v
        fm = f.components.get(k - 1)
        if fm is not None:
            for (i, j), v in fm.entries.items():
                m[nc_prev + i, j] = field.neg(v)
        diff[k] = m
    return ChainComplex(field, dims, diff, labels, check=False)


def is_quasi_iso(f: ChainMap, w: DegreeWindow) -> bool:
    return cone(f).is_acyclic(w)


# ---------------------------------------------------------------------------
# Brute-force oracles (used by tests and the classify module)
# ---------------------------------------------------------------------------


def chain_map_space(c: ChainComplex, d: ChainComplex, degree=0,
                    extra_conditions=None):
    """Basis of the space of degree-`degree` chain maps c -> d.

    Returns (list of ChainMap, var layout).  extra_conditions, when given, is a
    callable adding (coeff-dict, rhs) rows over the flat variable layout.
    """
    F = c.field
    var_index = {}
    nvars = 0
    for k in c.support():
        for i in range(d.dim(k + degree)):
            for j in range(c.dim(k)):
                var_index[(k, i, j)] = nvars
                nvars += 1
    eqs = []
    sgn = F.one() if degree % 2 == 0 else F.neg(F.one())
    for k in set(c.dims) | {k + 1 for k in c.dims}:
        rows, cols = d.dim(k - 1 + degree), c.dim(k)
        dd = d.diff.get(k + degree)
        dc = c.diff.get(k)
        for i in range(rows):
            for j in range(cols):
                coeffs = {}
                if dd is not None:
                    for (ii, m), v in dd.entries.items():
                        if ii == i and (k, m, j) in var_index:
                            idx = var_index[(k, m, j)]
                            coeffs[idx] = F.add(coeffs.get(idx, F.zero()), v)
                if dc is not None:
                    for (m, jj), v in dc.entries.items():
                        if jj == j and (k - 1, i, m) in var_index:
                            idx = var_index[(k - 1, i, m)]
                            coeffs[idx] = F.sub(coeffs.get(idx, F.zero()), F.mul(sgn, v))
                if coeffs:
                    eqs.append(coeffs)
    if extra_conditions:
        eqs.extend(extra_conditions(var_index))
    A = SparseMatrix(len(eqs), nvars, F)
    for r, coeffs in enumerate(eqs):
        for cc, v in coeffs.items():
            A[r, cc] = v
    basis = nullspace(A)
    maps = []
    for vec in basis:
        comps = {}
        for (k, i, j), idx in var_index.items():
            v = vec.get(idx)
            if v is not None:
                comps.setdefault(k, SparseMatrix(d.dim(k + degree), c.dim(k), F))[i, j] = v
        maps.append(ChainMap(c, d, comps, degree, check=False))
    return maps, var_index


def count_maps_mod_homotopy(c: ChainComplex, d: ChainComplex) -> int:
    """dim of (chain maps c -> d)/(homotopy-trivial maps), by brute force."""
    F = c.field
    maps, var_index = chain_map_space(c, d)
    nvars = (max(var_index.values()) + 1) if var_index else 0
    # rows spanning the nullhomotopic maps: image of h -> d h + h d on
    # elementary homotopies E_{(k0, i0, j0)} : c_{k0} -> d_{k0+1}
    cols = []
    for k0 in c.support():
        for i0 in range(d.dim(k0 + 1)):
            for j0 in range(c.dim(k0)):
                vec = {}
                dd = d.diff.get(k0 + 1)
                if dd is not None:
                    for (i2, ii), v in dd.entries.items():
                        if ii == i0:
                            idx = var_index.get((k0, i2, j0))
                            if idx is not None:
                                vec[idx] = F.add(vec.get(idx, F.zero()), v)
                dc = c.diff.get(k0 + 1)
                if dc is not None:
                    for (jj, j2), v in dc.entries.items():
                        if jj == j0:
                            idx = var_index.get((k0 + 1, i0, j2))
                            if idx is not None:
                                vec[idx] = F.add(vec.get(idx, F.zero()), v)
                vec = {a: b for a, b in vec.items() if not F.is_zero(b)}
                if vec:
                    cols.append(vec)
    null_rank = Echelon(_rows_matrix(cols, nvars, F)).rank if cols else 0
    all_rows = cols + [_map_to_vec(m, var_index, F) for m in maps]
    total_rank = Echelon(_rows_matrix(all_rows, nvars, F)).rank if all_rows else 0
    return total_rank - null_rank


def _rows_matrix(rows, nvars, F):
    m = SparseMatrix(len(rows), nvars, F)
    for r, vec in enumerate(rows):
        for c, v in vec.items():
            m[r, c] = v
    return m


def _map_to_vec(m: ChainMap, var_index, F):
    vec = {}
    for k, comp in m.components.items():
        for (i, j), v in comp.entries.items():
            vec[var_index[(k, i, j)]] = v
    return vec


def homology_coordinates(c: ChainComplex, k):
    """A matrix pi : c_k -> H_k with pi(boundary) = 0, pi(rep_i) = e_i,
    pi(non-cycle complement) = 0.  Returns (pi, reps)."""
    F = c.field
    n = c.dim(k)
    h, reps, _ = c.homology_data(k)
    if n == 0:
        return SparseMatrix(h, 0, F), reps
    # basis adapted to c_k: [reps | boundaries | complement]
    img_ech = Echelon(c.d(k + 1).transpose())
    chosen = [dict(z) for z in reps]
    chosen.extend(dict(r) for r in img_ech.pivot_rows)
    span = Echelon(_rows_matrix(chosen, n, F)) if chosen else None
    for j in range(n):
        probe = {j: F.one()}
        red = span.reduce_vector(probe) if span else probe
        if red:
            chosen.append(probe)
            span = Echelon(_rows_matrix(chosen, n, F))
    P = SparseMatrix(n, n, F)
    for jj, vec in enumerate(chosen):
        for i, v in vec.items():
            P[i, jj] = v
    from .sparse import solve_matrix
    Pinv = solve_matrix(P, SparseMatrix.identity(n, F))
    if Pinv is None:
        raise ArithmeticError("adapted basis not invertible")
    pi = SparseMatrix(h, n, F)
    for (i, j), v in Pinv.entries.items():
        if i < h:
            pi[i, j] = v
    return pi, reps


def realize_homology_iso(c: ChainComplex, d: ChainComplex, h_iso=None) -> ChainMap:
    """A chain map c -> d inducing a prescribed map on homology.

    Over a field, f := (include cycles) o iso o (homology coordinates) is a
    chain map: it kills boundaries and non-cycles and lands in cycles, so both
    composites with the differentials vanish.  When h_iso is None the identity
    on the chosen homology bases is used (homology dims must then agree).
    """
    F = c.field
    comps = {}
    for k in sorted(set(c.dims) | set(d.dims)):
        if c.dim(k) == 0:
            continue
        pi, reps_c = homology_coordinates(c, k)
        hd, reps_d, _ = d.homology_data(k)
        iso = h_iso.get(k) if h_iso else None
        if iso is None:
            if len(reps_c) != hd:
                raise ValueError("homology dims differ in degree %d" % k)
            iso = SparseMatrix.identity(hd, F)
        inc = SparseMatrix(d.dim(k), hd, F)
        for j, z in enumerate(reps_d):
            for i, v in z.items():
                inc[i, j] = v
        m = inc * iso * pi
        if not m.is_zero():
            comps[k] = m
    return ChainMap(c, d, comps, check=False)
