"""Segmented partial pair partitions and their crossing statistics.

The index set [n] (1-based) is cut into consecutive segments of sizes
(n1, ..., nk).  A partition splits [n] into blocks of size at most two
such that no pair has both endpoints inside the same segment.  These
partitions index the terms of the Wick multiplication formula; the
crossing number supplies the q-exponent of each term.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import ShapeMismatch


@dataclass(frozen=True)
class SegmentShape:
    """Ordered segment sizes; ``total`` is the size of the ground set."""

    sizes: tuple[int, ...]

    def __init__(self, sizes) -> None:
        object.__setattr__(self, "sizes", tuple(int(s) for s in sizes))
        if not self.sizes:
            raise ShapeMismatch("shape needs at least one segment")
        if any(s < 1 for s in self.sizes):
            raise ShapeMismatch(f"segment sizes must be >= 1, got {self.sizes}")

    @property
    def total(self) -> int:
        return sum(self.sizes)

    def segment_of(self, index: int) -> int:
        """0-based segment number containing the 1-based index."""
        if not 1 <= index <= self.total:
            raise ShapeMismatch(f"index {index} outside [1, {self.total}]")
        upper = 0
        for seg, size in enumerate(self.sizes):
            upper += size
            if index <= upper:
                return seg
        raise AssertionError("unreachable")

    def segments(self) -> list[range]:
        """1-based index ranges of the segments."""
        out, start = [], 1
        for size in self.sizes:
            out.append(range(start, start + size))
            start += size
        return out


@dataclass(frozen=True)
class PairPartition:
    """Blocks of size <= 2 over a segmented ground set.

    ``pairs`` are (l, r) with l < r, both 1-based; ``singletons`` is
    sorted.  Construction validates the exact-cover and the
    no-pair-inside-a-segment constraints.
    """

    pairs: tuple[tuple[int, int], ...]
    singletons: tuple[int, ...]
    shape: SegmentShape

    def __init__(self, pairs, singletons, shape: SegmentShape) -> None:
        pairs = tuple(sorted((min(l, r), max(l, r)) for l, r in pairs))
        singletons = tuple(sorted(int(s) for s in singletons))
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "singletons", singletons)
        object.__setattr__(self, "shape", shape)
        covered = [i for pair in pairs for i in pair] + list(singletons)
        if sorted(covered) != list(range(1, shape.total + 1)):
            raise ShapeMismatch("blocks do not cover the ground set exactly once")
        for l, r in pairs:
            if l == r:
                raise ShapeMismatch(f"degenerate pair ({l},{r})")
            if shape.segment_of(l) == shape.segment_of(r):
                raise ShapeMismatch(f"pair ({l},{r}) lies inside one segment")

    def sort_key(self):
        return (self.pairs, self.singletons)


@dataclass(frozen=True)
class CrossingCount:
    """Regular pair/pair crossings c, degenerate pair-over-singleton
    crossings d, and their sum."""

    regular: int
    degenerate: int

    @property
    def total(self) -> int:
        return self.regular + self.degenerate


def enumerate_pair_partitions(shape: SegmentShape) -> list[PairPartition]:
    """All partitions of the segmented set into blocks of size <= 2 with
    no intra-segment pair.

    The result is materialized and sorted lexicographically on the
    sorted pair list, so the order is reproducible across runs.
    """
    n = shape.total
    seg = [shape.segment_of(i) for i in range(1, n + 1)]
    out: list[PairPartition] = []

    def extend(unassigned: tuple[int, ...], pairs, singles):
        if not unassigned:
            out.append(PairPartition(pairs, singles, shape))
            return
        first, rest = unassigned[0], unassigned[1:]
        extend(rest, pairs, singles + [first])
        for j in rest:
            if seg[j - 1] != seg[first - 1]:
                extend(tuple(k for k in rest if k != j), pairs + [(first, j)], singles)

    extend(tuple(range(1, n + 1)), [], [])
    out.sort(key=PairPartition.sort_key)
    return out


def crossing_number(partition: PairPartition) -> CrossingCount:
    """Count c = #{l_i < l_j < r_i < r_j} and d = #{x < y < z : (x, z)
    paired, y a singleton}."""
    pairs = partition.pairs
    regular = 0
    for (li, ri), (lj, rj) in itertools.combinations(pairs, 2):
        if li < lj < ri < rj or lj < li < rj < ri:
            regular += 1
    singles = partition.singletons
    degenerate = sum(1 for (l, r) in pairs for s in singles if l < s < r)
    return CrossingCount(regular, degenerate)


def permutation_inversions(sigma) -> int:
    """Number of pairs a < b with sigma(a) > sigma(b).

    ``sigma`` is the image sequence (sigma(1), ..., sigma(n)); any
    0-based or 1-based bijection works since only relative order counts.
    """
    values = list(sigma)
    if sorted(values) != sorted(set(values)):
        raise ShapeMismatch("sigma is not a bijection")
    return sum(
        1
        for a, b in itertools.combinations(range(len(values)), 2)
        if values[a] > values[b]
    )


def subset_inversions(subset) -> int:
    """Cost of moving the subset to the left: sum of (i_l - l) over the
    sorted elements i_1 < ... < i_n (1-based)."""
    elems = sorted(int(a) for a in subset)
    if len(set(elems)) != len(elems):
        raise ShapeMismatch("subset has repeated elements")
    if elems and elems[0] < 1:
        raise ShapeMismatch("subset elements must be >= 1")
    return sum(a - pos for pos, a in enumerate(elems, start=1))


def format_partition(partition: PairPartition) -> str:
    """One-line debug dump: pairs, singletons and crossing statistics."""
    cr = crossing_number(partition)
    pairs = ",".join(f"({l},{r})" for l, r in partition.pairs)
    singles = ",".join(str(s) for s in partition.singletons)
    return (
        f"pairs=[{pairs}] singles=[{singles}] "
        f"c={cr.regular} d={cr.degenerate} cr={cr.total}"
    )
