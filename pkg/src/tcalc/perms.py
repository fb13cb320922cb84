"""Permutations and Young subgroups of symmetric groups.

A permutation of {0..n-1} is a tuple ``p`` with ``p[i]`` the image of ``i``.
A Young group with blocks (n_1, ..., n_r) is Sigma_{n_1} x ... x Sigma_{n_r}
embedded in Sigma_n along consecutive positions; its Coxeter generators are
the adjacent transpositions (i, i+1) lying inside a block.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations as _iterperms


def identity_perm(n):
    return tuple(range(n))


def compose(p, q):
    """(p o q)(i) = p(q(i))."""
    return tuple(p[q[i]] for i in range(len(p)))


def inverse(p):
    out = [0] * len(p)
    for i, v in enumerate(p):
        out[v] = i
    return tuple(out)


def perm_sign(p) -> int:
    sign = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j = i
        cnt = 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            cnt += 1
        if cnt % 2 == 0:
            sign = -sign
    return sign


def transposition(n, i):
    """Adjacent transposition swapping positions i and i+1 (0-indexed)."""
    p = list(range(n))
    p[i], p[i + 1] = p[i + 1], p[i]
    return tuple(p)


@dataclass(frozen=True)
class YoungGroup:
    """Sigma_{n_1} x ... x Sigma_{n_r} inside Sigma_n, n = sum of blocks."""

    blocks: tuple

    def __post_init__(self):
        if not all(isinstance(b, int) and b >= 1 for b in self.blocks):
            raise ValueError("blocks must be positive integers")

    @classmethod
    def full(cls, n):
        return cls((n,))

    @classmethod
    def of(cls, *blocks):
        return cls(tuple(blocks))

    @property
    def degree(self) -> int:
        return sum(self.blocks)

    @property
    def order(self) -> int:
        from math import factorial
        out = 1
        for b in self.blocks:
            out *= factorial(b)
        return out

    def block_bounds(self):
        out = []
        start = 0
        for b in self.blocks:
            out.append((start, start + b))
            start += b
        return out

    def generator_positions(self):
        """Positions i such that (i, i+1) lies within one block."""
        out = []
        for lo, hi in self.block_bounds():
            out.extend(range(lo, hi - 1))
        return out

    def generators(self):
        n = self.degree
        return [transposition(n, i) for i in self.generator_positions()]

    def elements(self):
        """All elements, deterministic order (lexicographic per block)."""
        n = self.degree
        blocks = self.block_bounds()
        partials = []
        for lo, hi in blocks:
            partials.append([tuple(lo + x for x in p)
                             for p in sorted(_iterperms(range(hi - lo)))])
        out = [identity_perm(n)]
        result = []

        def rec(i, acc):
            if i == len(blocks):
                result.append(tuple(acc))
                return
            lo, hi = blocks[i]
            for p in partials[i]:
                acc2 = list(acc)
                for k in range(lo, hi):
                    acc2[k] = p[k - lo]
                rec(i + 1, acc2)

        rec(0, list(range(n)))
        return result

    def contains(self, p) -> bool:
        for lo, hi in self.block_bounds():
            for i in range(lo, hi):
                if not (lo <= p[i] < hi):
                    return False
        return True

    def reduced_word(self, p):
        """Express p as a product of adjacent transpositions within blocks.

        Returns a list of generator positions [i_1, ..., i_k] such that
        p = s_{i_1} o ... o s_{i_k}.
        """
        if not self.contains(p):
            raise ValueError("permutation not in Young group")
        n = self.degree
        word = []
        cur = list(p)
        # bubble-sort cur to identity, recording swaps; p = (swaps reversed)
        changed = True
        while changed:
            changed = False
            for lo, hi in self.block_bounds():
                for i in range(lo, hi - 1):
                    if cur[i] > cur[i + 1]:
                        cur[i], cur[i + 1] = cur[i + 1], cur[i]
                        word.append(i)
                        changed = True
        # each swap right-multiplies by s_i: id = p o s_{w_1} o ... o s_{w_k},
        # hence p = s_{w_k} o ... o s_{w_1}
        return list(reversed(word))

    def coxeter_relations(self):
        """[(word1, word2)] pairs of generator-position words that must agree."""
        rels = []
        gens = self.generator_positions()
        for i in gens:
            rels.append(([i, i], []))
        for a in gens:
            for b in gens:
                if b == a + 1 and b in gens and a in gens:
                    rels.append(([a, b, a], [b, a, b]))
                elif b > a + 1:
                    rels.append(([a, b], [b, a]))
        return rels

    def __str__(self):
        return "S(%s)" % ",".join(str(b) for b in self.blocks)


def young_subgroup_of_composition(composition):
    return YoungGroup(tuple(composition))


def all_surjections(n, r):
    """All surjections {0..n-1} ->> {0..r-1} as tuples, deterministic order."""
    if r > n:
        return []
    out = []

    def rec(i, acc, hit):
        if i == n:
            if len(hit) == r:
                out.append(tuple(acc))
            return
        if n - i < r - len(hit):
            return
        for v in range(r):
            acc.append(v)
            added = v not in hit
            if added:
                hit.add(v)
            rec(i + 1, acc, hit)
            if added:
                hit.discard(v)
            acc.pop()

    rec(0, [], set())
    return out


def surjection_fibers(alpha, r):
    """Fiber tuple: fibers[j] = sorted tuple of preimages of j."""
    fibers = [[] for _ in range(r)]
    for i, v in enumerate(alpha):
        fibers[v].append(i)
    return tuple(tuple(f) for f in fibers)


def set_partitions(items):
    """All set partitions of `items`, blocks sorted by min, deterministic."""
    items = list(items)
    if not items:
        return [()]
    first, rest = items[0], items[1:]
    out = []
    for part in set_partitions(rest):
        # add `first` to each existing block, or as a new block
        for i in range(len(part)):
            blocks = [list(b) for b in part]
            blocks[i].append(first)
            out.append(_normalize_partition(blocks))
        out.append(_normalize_partition([list(b) for b in part] + [[first]]))
    seen = set()
    uniq = []
    for p in out:
        if p not in seen:
            seen.add(p)
            uniq.append(p)
    uniq.sort()
    return uniq


def _normalize_partition(blocks):
    bs = [tuple(sorted(b)) for b in blocks if b]
    bs.sort(key=lambda b: b[0])
    return tuple(bs)


def partition_of_surjection(alpha, r):
    """The set partition of {0..n-1} given by the fibers of alpha."""
    return _normalize_partition([list(f) for f in surjection_fibers(alpha, r)])


def apply_perm_to_partition(p, part):
    return _normalize_partition([[p[i] for i in block] for block in part])


def refines(fine, coarse) -> bool:
    """True if every block of `fine` is contained in a block of `coarse`."""
    lookup = {}
    for bi, block in enumerate(coarse):
        for x in block:
            lookup[x] = bi
    for block in fine:
        if len({lookup[x] for x in block}) != 1:
            return False
    return True


def quotient_partition(coarse, fine):
    """Blocks of `coarse` as a partition of the blocks of `fine` (by index)."""
    lookup = {}
    for bi, block in enumerate(fine):
        for x in block:
            lookup[x] = bi
    return _normalize_partition(
        [sorted({lookup[x] for x in block}) for block in coarse])


def restrict_partition(part, block):
    """Restriction of a partition to a subset, relabeled along sorted(block)."""
    pos = {x: i for i, x in enumerate(sorted(block))}
    bs = []
    sblock = set(block)
    for b in part:
        inter = [pos[x] for x in b if x in sblock]
        if inter:
            bs.append(inter)
    return _normalize_partition(bs)
