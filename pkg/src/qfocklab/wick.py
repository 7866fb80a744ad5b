"""Wick operators on the truncated q-Fock space.

Three independent realizations of products are kept side by side and
cross-validated:

* ``Element`` multiplication / ``product_direct``: iterated two-word
  contraction formula (split operators plus level pairings), which is
  also how operator matrices are assembled column by column;
* ``product_partition``: the segmented pair-partition sum with
  crossing-number q-weights and plain single-factor pair weights;
* ``product_triple``: the one-shot three-word contraction formula.

The partition sum is never used to build matrices, so agreement of the
three routes is a genuine consistency check rather than a tautology.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import LevelTooLarge, ParamMismatch, ShapeMismatch, TruncationLoss
from .partitions import (
    PairPartition,
    SegmentShape,
    crossing_number,
    enumerate_pair_partitions,
)
from .qfock import (
    FockOperator,
    FockParams,
    FockVector,
    VECTOR_DIM_CAP,
    as_level_tensor,
    basis_tensor,
    conjugate_tensor,
    pairing_form,
    split_tensor,
    split_tensor3,
    splitter_matrix,
    symmetrizer_apply,
    _require_same_params,
)

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


# ---------------------------------------------------------------------------
# two-word contraction: the workhorse product
# ---------------------------------------------------------------------------


def _pair_tensor(params: FockParams, j: int) -> np.ndarray:
    return pairing_form(params, j).reshape((params.dim,) * (2 * j))


def _mul_term(params: FockParams, left: np.ndarray, right: np.ndarray, j: int) -> np.ndarray:
    """One j-contraction term of the two-word product."""
    la, lb = left.ndim, right.ndim
    t1 = split_tensor(params.q, left, la - j, j)
    t2 = split_tensor(params.q, right, j, lb - j)
    if j == 0:
        return np.tensordot(t1, t2, axes=0)
    b = _pair_tensor(params, j)
    step = np.tensordot(t1, b, axes=(list(range(la - j, la)), list(range(j))))
    return np.tensordot(step, t2, axes=(list(range(la - j, la)), list(range(j))))


def graded_mul(
    params: FockParams,
    left: dict[int, np.ndarray],
    right: dict[int, np.ndarray],
    max_out: int | None = None,
) -> dict[int, np.ndarray]:
    """Exact product of two level-graded vacuum vectors.

    Each retained output level is exact; ``max_out`` drops higher output
    levels deliberately (callers use it only when a band argument shows
    the dropped part cannot contribute downstream).
    """
    out: dict[int, np.ndarray] = {}
    for la, ta in left.items():
        params.check_level_budget(la)
        for lb, tb in right.items():
            params.check_level_budget(lb)
            for j in range(min(la, lb) + 1):
                lo = la + lb - 2 * j
                if max_out is not None and lo > max_out:
                    continue
                params.check_level_budget(lo)
                term = _mul_term(params, ta, tb, j)
                out[lo] = out.get(lo, 0) + term
    return {m: t for m, t in out.items() if np.any(t)}


# ---------------------------------------------------------------------------
# algebra elements (finite Wick-word sums, stored as vacuum vectors)
# ---------------------------------------------------------------------------


class Element:
    """Element of the truncated *-algebra, identified with its vacuum
    vector.  Unlike ``FockVector`` it may occupy levels above the
    operator truncation, because exact products of retained words
    legitimately do; conversion back to ``FockVector`` records loss."""

    __slots__ = ("params", "levels")

    def __init__(self, params: FockParams, levels: dict[int, np.ndarray]) -> None:
        self.params = params
        clean = {}
        for m, t in levels.items():
            arr = as_level_tensor(params, int(m), t)
            if np.any(arr):
                clean[int(m)] = arr
        self.levels = clean

    # -- constructors -------------------------------------------------
    @classmethod
    def one(cls, params: FockParams) -> "Element":
        return cls(params, {0: np.array(1.0 + 0.0j)})

    @classmethod
    def zero(cls, params: FockParams) -> "Element":
        return cls(params, {})

    @classmethod
    def from_vector(cls, vec: FockVector) -> "Element":
        return cls(vec.params, dict(vec.levels))

    @classmethod
    def from_symbol(cls, params: FockParams, symbol) -> "Element":
        t = np.asarray(symbol, dtype=complex)
        return cls(params, {t.ndim: t})

    @classmethod
    def word(cls, params: FockParams, indices) -> "Element":
        t = basis_tensor(params, indices)
        return cls(params, {t.ndim: t})

    # -- linear structure ----------------------------------------------
    def scaled(self, c: complex) -> "Element":
        return Element(self.params, {m: c * t for m, t in self.levels.items()})

    def __add__(self, other: "Element") -> "Element":
        _require_same_params(self.params, other.params)
        levels = {m: t.copy() for m, t in self.levels.items()}
        for m, t in other.levels.items():
            levels[m] = levels.get(m, 0) + t
        return Element(self.params, levels)

    def __sub__(self, other: "Element") -> "Element":
        return self + other.scaled(-1.0)

    def __neg__(self) -> "Element":
        return self.scaled(-1.0)

    # -- algebra --------------------------------------------------------
    def mul(self, other: "Element", max_out: int | None = None) -> "Element":
        _require_same_params(self.params, other.params)
        return Element(self.params, graded_mul(self.params, self.levels, other.levels, max_out))

    def __mul__(self, other: "Element") -> "Element":
        return self.mul(other)

    def adjoint(self) -> "Element":
        """Conjugate-reverse the symbol of every level."""
        return Element(self.params, {m: conjugate_tensor(t) for m, t in self.levels.items()})

    def number_applied(self) -> "Element":
        """Generator action: scale level m by m."""
        return Element(self.params, {m: m * t for m, t in self.levels.items()})

    def semigroup_applied(self, t: float) -> "Element":
        return Element(self.params, {m: np.exp(-t * m) * arr for m, arr in self.levels.items()})

    def trace(self) -> complex:
        got = self.levels.get(0)
        return complex(got) if got is not None else 0.0 + 0.0j

    def q_inner(self, other: "Element") -> complex:
        _require_same_params(self.params, other.params)
        total = 0.0 + 0.0j
        for m, t in self.levels.items():
            o = other.levels.get(m)
            if o is None:
                continue
            total += np.vdot(t, symmetrizer_apply(self.params, o))
        return complex(total)

    def q_norm(self) -> float:
        return float(np.sqrt(max(self.q_inner(self).real, 0.0)))

    def top_level(self) -> int:
        return max(self.levels, default=0)

    def component(self, m: int) -> np.ndarray:
        got = self.levels.get(m)
        if got is not None:
            return got
        return np.zeros((self.params.dim,) * m, dtype=complex)

    def vector(self) -> FockVector:
        """Truncate back to the operator window, flagging dropped mass."""
        cap = self.params.max_level
        kept = {m: t for m, t in self.levels.items() if m <= cap}
        lossless = len(kept) == len(self.levels)
        return FockVector(self.params, kept, lossless)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(np.max(np.abs(t)) <= tol for t in self.levels.values())


# ---------------------------------------------------------------------------
# elementary Wick operators
# ---------------------------------------------------------------------------


def _wick_blocks(params: FockParams, symbol: np.ndarray):
    n = symbol.ndim
    d = params.dim
    blocks: dict[tuple[int, int], np.ndarray] = {}
    lossy: set[int] = set()
    for m in range(params.max_level + 1):
        if n + m > params.max_level and np.any(symbol):
            lossy.add(m)
        for j in range(min(n, m) + 1):
            dst = n + m - 2 * j
            if dst > params.max_level:
                continue
            if j == 0:
                top = np.kron(symbol.reshape(-1, 1), np.eye(d**m, dtype=complex))
                blocks[(m, dst)] = blocks.get((m, dst), 0) + top
                continue
            t1 = split_tensor(params.q, symbol, n - j, j)
            b = _pair_tensor(params, j)
            step = np.tensordot(t1, b, axes=(list(range(n - j, n)), list(range(j))))
            splitter = splitter_matrix(params, (j, m - j))
            r3 = splitter.reshape((d,) * j + (d ** (m - j), d**m))
            term = np.tensordot(step, r3, axes=(list(range(n - j, n)), list(range(j))))
            blocks[(m, dst)] = blocks.get((m, dst), 0) + term.reshape(d**dst, d**m)
    return blocks, frozenset(lossy)


@dataclass
class WickWord:
    """An elementary Wick operator: its defining level-n symbol together
    with the assembled block matrix on the truncated space."""

    params: FockParams
    symbol: np.ndarray
    realized: FockOperator

    @property
    def level(self) -> int:
        return self.symbol.ndim

    def element(self) -> Element:
        return Element.from_symbol(self.params, self.symbol)

    def apply(self, vec: FockVector) -> FockVector:
        return self.realized.apply(vec)


def wick(params: FockParams, symbol) -> WickWord:
    """The unique operator sending the vacuum to the given symbol,
    realized through the two-word contraction formula column by column."""
    if isinstance(symbol, (list, tuple)) and all(isinstance(i, (int, np.integer)) for i in symbol):
        t = basis_tensor(params, symbol)
    else:
        t = np.asarray(symbol, dtype=complex)
    if t.ndim > params.max_level:
        raise LevelTooLarge(
            f"symbol level {t.ndim} exceeds max_level {params.max_level}"
        )
    t = as_level_tensor(params, t.ndim, t)
    blocks, lossy = _wick_blocks(params, t)
    return WickWord(params, t, FockOperator(params, blocks, lossy))


def wick_from_element(el: Element) -> FockOperator:
    """Operator realization of a Wick-word sum (one word per level)."""
    total = FockOperator(el.params, {})
    for m in sorted(el.levels):
        total = total.add(wick(el.params, el.levels[m]).realized)
    return total


def trace(x) -> complex:
    """Vacuum state: level-0 coefficient of x applied to the vacuum."""
    if isinstance(x, WickWord):
        return x.element().trace()
    if isinstance(x, Element):
        return x.trace()
    if isinstance(x, FockOperator):
        return x.vacuum_expectation()
    raise ShapeMismatch(f"cannot trace {type(x).__name__}")


def _as_element(params: FockParams, w) -> Element:
    if isinstance(w, WickWord):
        _require_same_params(params, w.params)
        return w.element()
    if isinstance(w, Element):
        _require_same_params(params, w.params)
        return w
    if isinstance(w, FockVector):
        _require_same_params(params, w.params)
        return Element.from_vector(w)
    return Element.from_symbol(params, np.asarray(w, dtype=complex))


def product_direct(params: FockParams, words) -> Element:
    """Iterated two-word products, applied right-to-left to the vacuum."""
    elements = [_as_element(params, w) for w in words]
    if not elements:
        return Element.one(params)
    return reduce(lambda acc, el: el.mul(acc), reversed(elements), Element.one(params))


# ---------------------------------------------------------------------------
# pair-partition route
# ---------------------------------------------------------------------------

_PARTITION_CACHE: dict[tuple[int, ...], list[tuple[PairPartition, int]]] = {}
_PARTITION_LOCK = threading.Lock()


def _partitions_with_crossings(sizes: tuple[int, ...]):
    with _PARTITION_LOCK:
        got = _PARTITION_CACHE.get(sizes)
    if got is not None:
        return got
    shape = SegmentShape(sizes)
    listing = [(p, crossing_number(p).total) for p in enumerate_pair_partitions(shape)]
    with _PARTITION_LOCK:
        _PARTITION_CACHE.setdefault(sizes, listing)
    return _PARTITION_CACHE[sizes]


def partition_weighted_sum(
    params: FockParams,
    symbols: list[np.ndarray],
    weight=None,
) -> dict[int, np.ndarray]:
    """Sum over segmented pair partitions of q^crossings times the
    delta-contraction of the concatenated symbols over the pairs.

    ``weight`` maps a PairPartition to an extra scalar factor (default
    1); zero weights are skipped.  Pair weights are the plain bilinear
    single-factor contractions, exactly as in the multiplication
    formula for Wick words.

    Level-0 factors act as scalars; they are folded out before the
    enumeration (segments must be non-empty), so ``weight`` sees the
    shape of the non-scalar factors only.
    """
    scalar = 1.0 + 0.0j
    live: list[np.ndarray] = []
    for t in symbols:
        if t.ndim == 0:
            scalar *= complex(t)
        else:
            live.append(t)
    if not live:
        return {0: np.array(scalar)} if scalar != 0 else {}
    symbols = live
    sizes = tuple(t.ndim for t in symbols)
    total = sum(sizes)
    params.check_level_budget(total, VECTOR_DIM_CAP)
    offsets = np.cumsum((0,) + sizes[:-1])
    out: dict[int, np.ndarray] = {}
    for part, cross in _partitions_with_crossings(sizes):
        w = 1.0 if weight is None else weight(part)
        if w == 0:
            continue
        coeff = w * params.q**cross
        slot_letter = [""] * total
        next_letter = 0
        for l, r in part.pairs:
            letter = _LETTERS[next_letter]
            next_letter += 1
            slot_letter[l - 1] = letter
            slot_letter[r - 1] = letter
        out_letters = []
        for s in part.singletons:
            letter = _LETTERS[next_letter]
            next_letter += 1
            slot_letter[s - 1] = letter
            out_letters.append(letter)
        groups = []
        for size, off in zip(sizes, offsets):
            groups.append("".join(slot_letter[off : off + size]))
        spec = ",".join(groups) + "->" + "".join(out_letters)
        term = (scalar * coeff) * np.einsum(spec, *symbols)
        lvl = len(part.singletons)
        out[lvl] = out.get(lvl, 0) + term
    return {m: t for m, t in out.items() if np.any(t)}


def product_partition(params: FockParams, words) -> FockVector:
    """Product of elementary Wick words applied to the vacuum, evaluated
    by the pair-partition formula."""
    symbols = []
    for w in words:
        el = _as_element(params, w)
        if len(el.levels) != 1:
            raise ShapeMismatch("partition products need pure-level words")
        symbols.append(next(iter(el.levels.values())))
    total = sum(t.ndim for t in symbols)
    if total > params.max_level:
        raise TruncationLoss(
            f"total level {total} exceeds max_level {params.max_level}"
        )
    return FockVector(params, partition_weighted_sum(params, symbols))


# ---------------------------------------------------------------------------
# one-shot triple-product route
# ---------------------------------------------------------------------------


def triple_contraction_sum(
    params: FockParams,
    t_left: np.ndarray,
    t_mid: np.ndarray,
    t_right: np.ndarray,
    weight=None,
) -> dict[int, np.ndarray]:
    """Three-word contraction sum over split sizes (j, r, s).

    ``weight(j, r, s)`` multiplies the built-in q^(r*(mid-j-s)) factor;
    default 1 gives the triple product applied to the vacuum.
    """
    n, m, k = t_left.ndim, t_mid.ndim, t_right.ndim
    d = params.dim
    out: dict[int, np.ndarray] = {}
    for s in range(min(n, m) + 1):
        for r in range(min(n - s, k) + 1):
            for j in range(min(m - s, k - r) + 1):
                w = 1.0 if weight is None else weight(j, r, s)
                if w == 0:
                    continue
                coeff = w * params.q ** (r * (m - j - s))
                a = split_tensor3(params.q, t_left, n - r - s, r, s)
                bm = split_tensor3(params.q, t_mid, s, m - s - j, j)
                c = split_tensor3(params.q, t_right, j, r, k - j - r)
                operands = [a]
                a_letters = _LETTERS[: n]
                pos = n
                s_letters = _LETTERS[pos : pos + s]
                pos += s
                b_letters = s_letters + _LETTERS[pos : pos + (m - s)]
                pos += m - s
                j_letters = _LETTERS[pos : pos + j]
                pos += j
                r_letters = _LETTERS[pos : pos + r]
                pos += r
                c_letters = j_letters + r_letters + _LETTERS[pos : pos + (k - j - r)]
                pos += k - j - r
                subs = [a_letters]
                if s:
                    operands.append(_pair_tensor(params, s))
                    subs.append(a_letters[n - s :] + s_letters)
                operands.append(bm)
                subs.append(b_letters)
                if j:
                    operands.append(_pair_tensor(params, j))
                    subs.append(b_letters[m - j :] + j_letters)
                operands.append(c)
                subs.append(c_letters)
                if r:
                    operands.append(_pair_tensor(params, r))
                    subs.append(a_letters[n - r - s : n - s] + r_letters)
                out_letters = (
                    a_letters[: n - r - s]
                    + b_letters[s : m - j]
                    + c_letters[j + r :]
                )
                spec = ",".join(subs) + "->" + out_letters
                term = coeff * np.einsum(spec, *operands, optimize=len(operands) > 3)
                lvl = n + m + k - 2 * (j + r + s)
                out[lvl] = out.get(lvl, 0) + term
    return {lvl: t for lvl, t in out.items() if np.any(t)}


def product_triple(params: FockParams, left, mid, right) -> FockVector:
    """Triple product of Wick words on the vacuum via the one-shot
    contraction formula."""
    tensors = []
    for w in (left, mid, right):
        el = _as_element(params, w)
        if len(el.levels) > 1:
            raise ShapeMismatch("triple products need pure-level words")
        lvl = el.top_level()
        tensors.append(el.component(lvl))
    total = sum(t.ndim for t in tensors)
    if total > params.max_level:
        raise TruncationLoss(
            f"total level {total} exceeds max_level {params.max_level}"
        )
    out = triple_contraction_sum(params, *tensors)
    return FockVector(params, out)
