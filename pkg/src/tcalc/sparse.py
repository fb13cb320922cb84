"""Sparse exact matrices over a FieldSpec and the elimination kernel.

Matrices map column vectors to column vectors: an (r x c) matrix is a map
k^c -> k^r.  Entries live in ``entries[(i, j)]`` with no stored zeros.

Elimination over F_2 runs on int bitsets; over other fields it is ordinary
sparse Gaussian elimination (exact scalars, so no stability concerns).  Over
Q, rows are rescaled to integer vectors after each pivot step, which keeps
the arithmetic fraction-free in practice.
"""

from __future__ import annotations

from fractions import Fraction

from .fields import FieldSpec


class SparseMatrix:
    __slots__ = ("rows", "cols", "field", "entries")

    def __init__(self, rows: int, cols: int, field: FieldSpec, entries=None):
        if rows < 0 or cols < 0:
            raise ValueError("negative matrix shape")
        self.rows = rows
        self.cols = cols
        self.field = field
        self.entries = {}
        if entries:
            for (i, j), v in (entries.items() if isinstance(entries, dict) else entries):
                self[i, j] = v

    # -- construction -------------------------------------------------------

    @classmethod
    def zero(cls, rows, cols, field):
        return cls(rows, cols, field)

    @classmethod
    def identity(cls, n, field):
        m = cls(n, n, field)
        one = field.one()
        for i in range(n):
            m.entries[(i, i)] = one
        return m

    @classmethod
    def from_rows(cls, rows_list, field):
        r = len(rows_list)
        c = len(rows_list[0]) if rows_list else 0
        m = cls(r, c, field)
        for i, row in enumerate(rows_list):
            for j, v in enumerate(row):
                m[i, j] = v
        return m

    def copy(self):
        m = SparseMatrix(self.rows, self.cols, self.field)
        m.entries = dict(self.entries)
        return m

    # -- entry access ---------------------------------------------------------

    def __getitem__(self, ij):
        return self.entries.get(ij, self.field.zero())

    def __setitem__(self, ij, v):
        i, j = ij
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError("entry %r out of range for %dx%d" % (ij, self.rows, self.cols))
        v = self.field.coerce(v)
        if self.field.is_zero(v):
            self.entries.pop(ij, None)
        else:
            self.entries[ij] = v

    def add_to(self, i, j, v):
        cur = self.entries.get((i, j), self.field.zero())
        self[i, j] = self.field.add(cur, v)

    def is_zero(self) -> bool:
        return not self.entries

    def __eq__(self, other):
        return (
            isinstance(other, SparseMatrix)
            and self.rows == other.rows
            and self.cols == other.cols
            and self.field == other.field
            and self.entries == other.entries
        )

    def __hash__(self):
        raise TypeError("SparseMatrix is unhashable")

    def __repr__(self):
        return "SparseMatrix(%dx%d over %s, %d nonzero)" % (
            self.rows, self.cols, self.field.name(), len(self.entries))

    def to_dense(self):
        z = self.field.zero()
        out = [[z] * self.cols for _ in range(self.rows)]
        for (i, j), v in self.entries.items():
            out[i][j] = v
        return out

    # -- algebra ---------------------------------------------------------------

    def __add__(self, other):
        self._check_shape(other)
        m = self.copy()
        for ij, v in other.entries.items():
            m.add_to(ij[0], ij[1], v)
        return m

    def __sub__(self, other):
        self._check_shape(other)
        m = self.copy()
        F = self.field
        for ij, v in other.entries.items():
            m.add_to(ij[0], ij[1], F.neg(v))
        return m

    def __neg__(self):
        m = SparseMatrix(self.rows, self.cols, self.field)
        F = self.field
        m.entries = {ij: F.neg(v) for ij, v in self.entries.items()}
        return m

    def scale(self, c):
        c = self.field.coerce(c)
        m = SparseMatrix(self.rows, self.cols, self.field)
        if self.field.is_zero(c):
            return m
        F = self.field
        m.entries = {ij: F.mul(c, v) for ij, v in self.entries.items()}
        return m

    def __mul__(self, other):
        """Matrix product self * other (composition: self after other)."""
        if not isinstance(other, SparseMatrix):
            return self.scale(other)
        if self.cols != other.rows:
            raise ValueError("shape mismatch %dx%d * %dx%d" %
                             (self.rows, self.cols, other.rows, other.cols))
        if self.field != other.field:
            raise ValueError("field mismatch")
        F = self.field
        # group other's entries by row
        by_row = {}
        for (i, j), v in other.entries.items():
            by_row.setdefault(i, []).append((j, v))
        out = SparseMatrix(self.rows, other.cols, F)
        acc = {}
        for (i, k), a in self.entries.items():
            hits = by_row.get(k)
            if not hits:
                continue
            for j, b in hits:
                ij = (i, j)
                cur = acc.get(ij)
                prod = F.mul(a, b)
                acc[ij] = prod if cur is None else F.add(cur, prod)
        out.entries = {ij: v for ij, v in acc.items() if not F.is_zero(v)}
        return out

    def transpose(self):
        m = SparseMatrix(self.cols, self.rows, self.field)
        m.entries = {(j, i): v for (i, j), v in self.entries.items()}
        return m

    def apply(self, vec: dict) -> dict:
        """Apply to a sparse column vector {index: scalar}."""
        F = self.field
        out = {}
        for (i, j), a in self.entries.items():
            b = vec.get(j)
            if b is None:
                continue
            cur = out.get(i, F.zero())
            cur = F.add(cur, F.mul(a, b))
            if F.is_zero(cur):
                out.pop(i, None)
            else:
                out[i] = cur
        return out

    def _check_shape(self, other):
        if self.rows != other.rows or self.cols != other.cols:
            raise ValueError("shape mismatch")
        if self.field != other.field:
            raise ValueError("field mismatch")

    # -- block assembly ---------------------------------------------------------

    @classmethod
    def block(cls, blocks, row_sizes, col_sizes, field):
        """Assemble from {(bi, bj): SparseMatrix} with given block sizes."""
        roff = [0]
        for s in row_sizes:
            roff.append(roff[-1] + s)
        coff = [0]
        for s in col_sizes:
            coff.append(coff[-1] + s)
        out = cls(roff[-1], coff[-1], field)
        for (bi, bj), m in blocks.items():
            if m is None:
                continue
            if m.rows != row_sizes[bi] or m.cols != col_sizes[bj]:
                raise ValueError("block (%d,%d) has wrong shape" % (bi, bj))
            r0, c0 = roff[bi], coff[bj]
            for (i, j), v in m.entries.items():
                out.add_to(r0 + i, c0 + j, v)
        return out


# ---------------------------------------------------------------------------
# Elimination kernel
# ---------------------------------------------------------------------------


def _rows_as_bitsets(m: SparseMatrix):
    rows = [0] * m.rows
    for (i, j), _ in m.entries.items():
        rows[i] |= 1 << j
    return rows


def _gf2_echelon(rows, ncols):
    """In-place forward elimination; returns list of (pivot_col, row_bits)."""
    pivots = []
    work = [r for r in rows if r]
    for col in range(ncols):
        mask = 1 << col
        pivot_row = None
        for idx, r in enumerate(work):
            if r & mask:
                pivot_row = idx
                break
        if pivot_row is None:
            continue
        pr = work.pop(pivot_row)
        pivots.append((col, pr))
        work = [(r ^ pr) if (r & mask) else r for r in work]
        work = [r for r in work if r]
    return pivots


def _scale_row_integral(field: FieldSpec, row: dict) -> dict:
    """Over Q, clear denominators and divide by content to keep entries small."""
    if field.p or not row:
        return row
    from math import gcd
    denlcm = 1
    for v in row.values():
        denlcm = denlcm * v.denominator // gcd(denlcm, v.denominator)
    nums = [abs(v.numerator * (denlcm // v.denominator)) for v in row.values()]
    g = 0
    for n in nums:
        g = gcd(g, n)
    if g == 0:
        return row
    scale = Fraction(denlcm, g)
    return {j: v * scale for j, v in row.items()}


class Echelon:
    """Row echelon data for a matrix, reusable for rank / solve / nullspace."""

    def __init__(self, m: SparseMatrix):
        self.field = m.field
        self.cols = m.cols
        self.rows_in = m.rows
        if m.field.p == 2:
            self._init_gf2(m)
        else:
            self._init_generic(m)

    # Each pivot is (col, row) with row a dict {col: scalar}, row[col] == 1,
    # and all pivot rows fully reduced against each other.

    def _init_gf2(self, m):
        pivots = _gf2_echelon(_rows_as_bitsets(m), m.cols)
        # back-substitute for reduced form
        pivots.sort()
        for idx in range(len(pivots) - 1, -1, -1):
            col, row = pivots[idx]
            for k in range(idx):
                c2, r2 = pivots[k]
                if r2 & (1 << col):
                    pivots[k] = (c2, r2 ^ row)
        self.pivot_cols = [c for c, _ in pivots]
        one = self.field.one()
        self.pivot_rows = []
        for c, bits in pivots:
            row = {}
            j = 0
            while bits:
                if bits & 1:
                    row[j] = one
                bits >>= 1
                j += 1
            self.pivot_rows.append(row)

    def _init_generic(self, m):
        F = self.field
        by_row = {}
        for (i, j), v in m.entries.items():
            by_row.setdefault(i, {})[j] = v
        work = [row for row in by_row.values() if row]
        pivots = []  # (col, row-dict normalized)
        while work:
            # choose the row whose least column is smallest; break ties by sparsity
            best = min(work, key=lambda r: (min(r), len(r)))
            work.remove(best)
            col = min(best)
            lead = best[col]
            inv = F.inv(lead)
            best = {j: F.mul(inv, v) for j, v in best.items()}
            pivots.append((col, best))
            nxt = []
            for r in work:
                c = r.get(col)
                if c is not None:
                    r = dict(r)
                    for j, v in best.items():
                        cur = r.get(j, F.zero())
                        cur = F.sub(cur, F.mul(c, v))
                        if F.is_zero(cur):
                            r.pop(j, None)
                        else:
                            r[j] = cur
                    r = _scale_row_integral(F, r)
                if r:
                    nxt.append(r)
            work = nxt
        pivots.sort(key=lambda cr: cr[0])
        # re-normalize (integral scaling may have unnormalized leads) and back-substitute
        for idx in range(len(pivots)):
            col, row = pivots[idx]
            lead = row[col]
            if not F.is_one(lead):
                inv = F.inv(lead)
                row = {j: F.mul(inv, v) for j, v in row.items()}
                pivots[idx] = (col, row)
        for idx in range(len(pivots) - 1, -1, -1):
            col, row = pivots[idx]
            for k in range(idx):
                c2, r2 = pivots[k]
                c = r2.get(col)
                if c is None:
                    continue
                new = dict(r2)
                for j, v in row.items():
                    cur = new.get(j, F.zero())
                    cur = F.sub(cur, F.mul(c, v))
                    if F.is_zero(cur):
                        new.pop(j, None)
                    else:
                        new[j] = cur
                pivots[k] = (c2, new)
        self.pivot_cols = [c for c, _ in pivots]
        self.pivot_rows = [r for _, r in pivots]

    @property
    def rank(self) -> int:
        return len(self.pivot_cols)

    def reduce_vector(self, vec: dict) -> dict:
        """Reduce a column vector (as {col: scalar}) against the row space."""
        F = self.field
        v = dict(vec)
        for col, row in zip(self.pivot_cols, self.pivot_rows):
            c = v.get(col)
            if c is None:
                continue
            for j, w in row.items():
                cur = F.sub(v.get(j, F.zero()), F.mul(c, w))
                if F.is_zero(cur):
                    v.pop(j, None)
                else:
                    v[j] = cur
        return v

    def nullspace_basis(self):
        """Basis of the kernel (column vectors as dicts)."""
        F = self.field
        pivset = set(self.pivot_cols)
        free_cols = [j for j in range(self.cols) if j not in pivset]
        basis = []
        one = F.one()
        for fj in free_cols:
            vec = {fj: one}
            for col, row in zip(self.pivot_cols, self.pivot_rows):
                c = row.get(fj)
                if c is not None:
                    vec[col] = F.neg(c)
            basis.append(vec)
        return basis


def rank(m: SparseMatrix) -> int:
    return Echelon(m).rank


def nullspace(m: SparseMatrix):
    return Echelon(m).nullspace_basis()


def solve(m: SparseMatrix, b: dict):
    """One solution x (dict) of m x = b, or None.  b is {row: scalar}."""
    F = m.field
    # eliminate on the augmented matrix [m | b]
    aug = SparseMatrix(m.rows, m.cols + 1, F)
    aug.entries = dict(m.entries)
    for i, v in b.items():
        if not F.is_zero(v):
            aug.entries[(i, m.cols)] = v
    ech = Echelon(aug)
    x = {}
    for col, row in zip(ech.pivot_cols, ech.pivot_rows):
        if col == m.cols:
            return None  # inconsistent
        c = row.get(m.cols)
        if c is not None:
            x[col] = c
    return x


def solve_matrix(m: SparseMatrix, b: SparseMatrix):
    """Solve m X = b columnwise; returns X or None."""
    if m.rows != b.rows or m.field != b.field:
        raise ValueError("shape/field mismatch")
    F = m.field
    cols_b = {}
    for (i, j), v in b.entries.items():
        cols_b.setdefault(j, {})[i] = v
    x = SparseMatrix(m.cols, b.cols, F)
    # single elimination of m with all right-hand sides appended
    width = m.cols + b.cols
    aug = SparseMatrix(m.rows, width, F)
    aug.entries = dict(m.entries)
    for (i, j), v in b.entries.items():
        aug.entries[(i, m.cols + j)] = v
    ech = Echelon(aug)
    for col, row in zip(ech.pivot_cols, ech.pivot_rows):
        if col >= m.cols:
            return None
        for j, v in row.items():
            if j >= m.cols:
                x[col, j - m.cols] = v
    # verify (cheap insurance against pivoting into the rhs block)
    if (m * x) != b:
        return None
    return x


def column_space_echelon(m: SparseMatrix) -> Echelon:
    """Echelon of the transpose: row space of m^T = column space of m."""
    return Echelon(m.transpose())


def in_column_space(ech: Echelon, vec: dict) -> bool:
    return not ech.reduce_vector(vec)
