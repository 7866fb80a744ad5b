"""Truncated q-deformed Fock space over C^N.

Level-m tensors are numpy arrays of shape (N,)*m in the standard
(non-orthonormal for q != 0) tensor basis; level 0 is a ()-shaped
scalar.  The q-inner product is <u, v>_q = vdot(u, P_m v) with P_m the
q-symmetrizer, so all inner products here are conjugate-linear in the
FIRST argument.  Norm computations change basis with the positive
square root of the Gram (or the equivalent symmetric pencil), never the
raw coordinates.

Truncation contract: vector-level arithmetic is exact; block operators
record which source levels had output dropped at the max-level
boundary, and applying them to vectors with mass at such levels clears
the ``lossless`` flag on the result.  Identity tests must check that
flag and refuse lossy data.
"""

from __future__ import annotations

import itertools
import json
import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    LevelTooLarge,
    ParamMismatch,
    ShapeMismatch,
    TruncationLoss,
)
from .numerics import hermitian_eig, psd_inv_sqrt, psd_sqrt

# Largest N^m for materialized level matrices (Grams, operator blocks).
MATRIX_DIM_CAP = 4096
# Largest N^m for coefficient tensors in vector arithmetic.
VECTOR_DIM_CAP = 65536
# Largest level built by the explicit permutation-group sum; higher
# levels use the defining split identity P_{m} = (P_{m-1} (x) 1) R*.
SYM_GROUP_CAP = 8


@dataclass(frozen=True)
class FockParams:
    """Deformation q in (-1, 1), one-particle dimension, truncation level."""

    q: float
    dim: int
    max_level: int

    def __post_init__(self) -> None:
        if not -1.0 < self.q < 1.0:
            raise ParamMismatch(f"q must lie in (-1, 1), got {self.q}")
        if self.dim < 1:
            raise ParamMismatch(f"dim must be >= 1, got {self.dim}")
        if self.max_level < 0:
            raise ParamMismatch(f"max_level must be >= 0, got {self.max_level}")
        if self.dim**self.max_level > MATRIX_DIM_CAP:
            raise LevelTooLarge(
                f"dim^max_level = {self.dim}^{self.max_level} exceeds the "
                f"materializable budget {MATRIX_DIM_CAP}"
            )

    def level_dim(self, m: int) -> int:
        return self.dim**m

    def check_level_budget(self, m: int, cap: int = VECTOR_DIM_CAP) -> None:
        if m < 0:
            raise LevelTooLarge(f"negative level {m}")
        if self.dim**m > cap:
            raise LevelTooLarge(f"level {m} with dim {self.dim} exceeds budget {cap}")


def _require_same_params(a: FockParams, b: FockParams) -> None:
    if a != b:
        raise ParamMismatch(f"parameter mismatch: {a} vs {b}")


# ---------------------------------------------------------------------------
# raw tensor helpers
# ---------------------------------------------------------------------------


def as_level_tensor(params: FockParams, level: int, data) -> np.ndarray:
    """Coerce data to a complex (N,)*level tensor."""
    t = np.asarray(data, dtype=complex)
    want = (params.dim,) * level
    if t.shape != want:
        if t.size == params.level_dim(level):
            t = t.reshape(want)
        else:
            raise ShapeMismatch(f"level-{level} tensor must have shape {want}")
    return t


def basis_tensor(params: FockParams, indices) -> np.ndarray:
    """Elementary tensor e_{i1} (x) ... (x) e_{im} from 1-based indices."""
    idx = tuple(int(i) - 1 for i in indices)
    if any(not 0 <= i < params.dim for i in idx):
        raise ShapeMismatch(f"basis indices {indices} outside 1..{params.dim}")
    t = np.zeros((params.dim,) * len(idx), dtype=complex)
    t[idx] = 1.0
    return t


def conjugate_tensor(t: np.ndarray) -> np.ndarray:
    """Antilinear conjugation: reverse the tensor factors and conjugate
    the coordinates (the basis is real)."""
    return np.conj(np.transpose(t, axes=tuple(reversed(range(t.ndim)))))


def _split_terms(n: int, k: int):
    """Subsets A of {0..n+k-1} with |A| = n, each with its left-moving
    cost sum(a - position)."""
    total = n + k
    for comb in itertools.combinations(range(total), n):
        weight = sum(a - pos for pos, a in enumerate(comb))
        rest = [i for i in range(total) if i not in comb]
        yield list(comb) + rest, weight


def split_tensor(q: float, t: np.ndarray, n: int, k: int, offset: int = 0) -> np.ndarray:
    """Apply the two-part splitting operator to axes [offset, offset+n+k).

    Output axis order puts the chosen n axes first (inside the window),
    weighted by q^cost; the remaining axes of ``t`` are untouched.
    """
    if n < 0 or k < 0 or offset < 0 or offset + n + k > t.ndim:
        raise ShapeMismatch(f"split ({n},{k}) at offset {offset} does not fit ndim {t.ndim}")
    if n == 0 or k == 0:
        return t.astype(complex, copy=True)
    prefix = list(range(offset))
    suffix = list(range(offset + n + k, t.ndim))
    out = np.zeros_like(t, dtype=complex)
    for order, weight in _split_terms(n, k):
        axes = prefix + [offset + a for a in order] + suffix
        out += (q**weight) * np.transpose(t, axes=axes)
    return out


def split_tensor3(q: float, t: np.ndarray, p1: int, p2: int, p3: int, offset: int = 0) -> np.ndarray:
    """Three-part splitting via the two-part identity applied twice:
    split (p1+p2 | p3), then (p1 | p2) inside the first window."""
    out = split_tensor(q, t, p1 + p2, p3, offset=offset)
    return split_tensor(q, out, p1, p2, offset=offset)


# ---------------------------------------------------------------------------
# per-parameter caches (Grams, splitters, pairings)
# ---------------------------------------------------------------------------


class _LevelCache:
    """Memoizes level matrices for one (q, dim).  Insertion is
    idempotent and guarded by a lock, so concurrent readers are safe."""

    def __init__(self, q: float, dim: int) -> None:
        self.q = q
        self.dim = dim
        self.lock = threading.Lock()
        self.sym: dict[int, np.ndarray] = {}
        self.sym_sqrt: dict[int, np.ndarray] = {}
        self.sym_inv_sqrt: dict[int, np.ndarray] = {}
        self.sym_inv: dict[int, np.ndarray] = {}
        self.pairing: dict[int, np.ndarray] = {}
        self.splitter: dict[tuple[int, ...], np.ndarray] = {}
        self.digits: dict[int, np.ndarray] = {}


_CACHES: dict[tuple[float, int], _LevelCache] = {}
_CACHES_LOCK = threading.Lock()


def _cache_for(params: FockParams) -> _LevelCache:
    key = (float(params.q), params.dim)
    with _CACHES_LOCK:
        cache = _CACHES.get(key)
        if cache is None:
            cache = _CACHES[key] = _LevelCache(*key)
    return cache


def _digit_table(cache: _LevelCache, m: int) -> np.ndarray:
    """(dim^m, m) table of base-dim digits for flat level-m indices."""
    with cache.lock:
        table = cache.digits.get(m)
    if table is not None:
        return table
    n, d = cache.dim**m, cache.dim
    flat = np.arange(n)
    cols = []
    for pos in range(m - 1, -1, -1):
        cols.append((flat // d**pos) % d)
    table = np.stack(cols, axis=1) if m else np.zeros((1, 0), dtype=int)
    with cache.lock:
        cache.digits.setdefault(m, table)
    return table


def _axis_permutation_rows(cache: _LevelCache, m: int, axes) -> np.ndarray:
    """Row indices realizing a tensor-axis permutation on flat indices."""
    digits = _digit_table(cache, m)
    d = cache.dim
    powers = d ** np.arange(m - 1, -1, -1)
    return digits[:, list(axes)] @ powers


def _build_symmetrizer(params: FockParams, m: int) -> np.ndarray:
    """Sum over the symmetric group of q^inversions times the
    permutation action, as a dim^m x dim^m matrix."""
    cache = _cache_for(params)
    n = params.level_dim(m)
    if m <= 1:
        return np.eye(n, dtype=complex)
    if m <= SYM_GROUP_CAP:
        out = np.zeros((n, n), dtype=float)
        cols = np.arange(n)
        for perm in itertools.permutations(range(m)):
            inv = sum(
                1
                for a, b in itertools.combinations(range(m), 2)
                if perm[a] > perm[b]
            )
            # Row r receives the coefficient of the permuted basis vector.
            rows = _axis_permutation_rows(cache, m, perm)
            out[rows, cols] += params.q**inv
        return out.astype(complex)
    # Defining split identity with a single right factor.
    lower = symmetrizer(params, m - 1)
    splitter = splitter_matrix(params, (m - 1, 1))
    return np.kron(lower, np.eye(params.dim)) @ splitter


def symmetrizer(params: FockParams, m: int) -> np.ndarray:
    """q-symmetrizer (level Gram) on level m as a dense matrix."""
    params.check_level_budget(m, MATRIX_DIM_CAP)
    cache = _cache_for(params)
    with cache.lock:
        got = cache.sym.get(m)
    if got is not None:
        return got
    built = _build_symmetrizer(params, m)
    with cache.lock:
        cache.sym.setdefault(m, built)
    return cache.sym[m]


def _sym_derived(params: FockParams, m: int, which: str) -> np.ndarray:
    cache = _cache_for(params)
    store = getattr(cache, which)
    with cache.lock:
        got = store.get(m)
    if got is not None:
        return got
    g = symmetrizer(params, m)
    if which == "sym_sqrt":
        built = psd_sqrt(g)
    elif which == "sym_inv_sqrt":
        built = psd_inv_sqrt(g)
    else:
        built = np.linalg.inv(g)
    with cache.lock:
        store.setdefault(m, built)
    return store[m]


def symmetrizer_sqrt(params: FockParams, m: int) -> np.ndarray:
    return _sym_derived(params, m, "sym_sqrt")


def symmetrizer_inv_sqrt(params: FockParams, m: int) -> np.ndarray:
    return _sym_derived(params, m, "sym_inv_sqrt")


def symmetrizer_inv(params: FockParams, m: int) -> np.ndarray:
    return _sym_derived(params, m, "sym_inv")


def _sym_apply_front(params: FockParams, t: np.ndarray, m: int) -> np.ndarray:
    """Apply the level-m Gram to the first m axes of t (trailing axes
    ride along), recursing through the split identity above the
    materialization cap."""
    if m <= 1 or params.level_dim(m) <= MATRIX_DIM_CAP:
        g = symmetrizer(params, m)
        flat = t.reshape(params.level_dim(m), -1)
        return (g @ flat).reshape(t.shape)
    split = split_tensor(params.q, t, m - 1, 1, offset=0)
    return _sym_apply_front(params, split, m - 1)


def symmetrizer_apply(params: FockParams, t: np.ndarray) -> np.ndarray:
    """Apply the level Gram to a tensor, falling back to the split
    recursion when the dense matrix exceeds the materialization cap."""
    params.check_level_budget(t.ndim, VECTOR_DIM_CAP)
    return _sym_apply_front(params, t, t.ndim)


def splitter_matrix(params: FockParams, parts: tuple[int, ...]) -> np.ndarray:
    """Dense matrix of the splitting operator for the given part sizes.

    Satisfies Gram(total) = (Gram(p1) (x) ... (x) Gram(pj)) @ splitter.
    """
    if any(p < 0 for p in parts):
        raise ShapeMismatch(f"negative part in {parts}")
    m = sum(parts)
    params.check_level_budget(m, MATRIX_DIM_CAP)
    cache = _cache_for(params)
    key = tuple(parts)
    with cache.lock:
        got = cache.splitter.get(key)
    if got is not None:
        return got
    n = params.level_dim(m)
    eye = np.eye(n, dtype=complex)
    live = [p for p in parts if p > 0]
    if len(live) <= 1:
        built = eye
    elif len(live) == 2:
        built = np.zeros((n, n), dtype=complex)
        cols = np.arange(n)
        for order, weight in _split_terms(live[0], live[1]):
            rows = _axis_permutation_rows(cache, m, order)
            built[rows, cols] += params.q**weight
    elif len(live) == 3:
        p1, p2, p3 = live
        first = splitter_matrix(params, (p1 + p2, p3))
        inner = splitter_matrix(params, (p1, p2))
        lift = np.kron(inner, np.eye(params.level_dim(p3), dtype=complex))
        built = lift @ first
    else:
        raise ShapeMismatch(f"splitting into {len(live)} parts is not supported")
    with cache.lock:
        cache.splitter.setdefault(key, built)
    return cache.splitter[key]


def r_star(params: FockParams, n: int, k: int) -> np.ndarray:
    """Two-part splitting operator on level n + k."""
    if n + k > params.max_level:
        raise LevelTooLarge(f"level {n + k} exceeds max_level {params.max_level}")
    return splitter_matrix(params, (n, k))


def r_star3(params: FockParams, n: int, k: int, l: int) -> np.ndarray:
    """Three-part splitting operator on level n + k + l."""
    if n + k + l > params.max_level:
        raise LevelTooLarge(f"level {n + k + l} exceeds max_level {params.max_level}")
    return splitter_matrix(params, (n, k, l))


def pairing_form(params: FockParams, j: int) -> np.ndarray:
    """Bilinear matrix B of the j-fold contraction: the contraction of
    v (x) w equals v^T B w, i.e. B[b, c] = Gram_j[reverse(b), c]."""
    params.check_level_budget(j, MATRIX_DIM_CAP)
    cache = _cache_for(params)
    with cache.lock:
        got = cache.pairing.get(j)
    if got is not None:
        return got
    g = symmetrizer(params, j)
    if j <= 1:
        built = g.copy()
    else:
        rows = _axis_permutation_rows(cache, j, tuple(reversed(range(j))))
        built = g[rows, :]
    with cache.lock:
        cache.pairing.setdefault(j, built)
    return cache.pairing[j]


def pairing_value(params: FockParams, v: np.ndarray, w: np.ndarray) -> complex:
    """Contract two same-level tensors: q-inner product of the
    conjugated-and-reversed left factor against the right factor."""
    if v.shape != w.shape:
        raise ShapeMismatch(f"pairing operands differ: {v.shape} vs {w.shape}")
    j = v.ndim
    b = pairing_form(params, j)
    return complex(v.reshape(-1) @ b @ w.reshape(-1))


def pairing_norm(params: FockParams, j: int) -> float:
    """Norm of the j-fold contraction as a functional on the q-metric
    tensor square of level j."""
    b = pairing_form(params, j)
    half = symmetrizer_inv_sqrt(params, j)
    weighted = half.T @ b @ half
    return float(np.linalg.norm(weighted.reshape(-1), 2))


# ---------------------------------------------------------------------------
# vectors
# ---------------------------------------------------------------------------


def _clean_levels(params: FockParams, levels: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    out = {}
    for m, t in levels.items():
        arr = as_level_tensor(params, m, t)
        if np.any(arr):
            out[int(m)] = arr
    return out


@dataclass
class FockVector:
    """Level-graded coefficient vector on the truncated Fock space.

    ``levels`` maps level -> (N,)*level tensor; absent levels are zero.
    ``lossless`` records whether every contribution that produced this
    vector was retained below the truncation level.
    """

    params: FockParams
    levels: dict[int, np.ndarray] = field(default_factory=dict)
    lossless: bool = True

    def __post_init__(self) -> None:
        self.levels = _clean_levels(self.params, self.levels)
        top = max(self.levels, default=0)
        if top > self.params.max_level:
            raise LevelTooLarge(
                f"vector occupies level {top} above max_level {self.params.max_level}"
            )

    def component(self, m: int) -> np.ndarray:
        got = self.levels.get(m)
        if got is not None:
            return got
        return np.zeros((self.params.dim,) * m, dtype=complex)

    def copy(self) -> "FockVector":
        return FockVector(self.params, {m: t.copy() for m, t in self.levels.items()}, self.lossless)

    def scaled(self, c: complex) -> "FockVector":
        return FockVector(self.params, {m: c * t for m, t in self.levels.items()}, self.lossless)

    def add(self, other: "FockVector") -> "FockVector":
        _require_same_params(self.params, other.params)
        levels = {m: t.copy() for m, t in self.levels.items()}
        for m, t in other.levels.items():
            levels[m] = levels.get(m, 0) + t
        return FockVector(self.params, levels, self.lossless and other.lossless)

    def norm(self) -> float:
        val = q_inner(self, self)
        return float(np.sqrt(max(val.real, 0.0)))

    def to_json(self) -> str:
        payload = {
            str(m): [[float(z.real), float(z.imag)] for z in t.reshape(-1)]
            for m, t in sorted(self.levels.items())
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, params: FockParams, text: str) -> "FockVector":
        raw = json.loads(text)
        levels = {}
        for key, entries in raw.items():
            m = int(key)
            flat = np.array([complex(re, im) for re, im in entries])
            levels[m] = flat.reshape((params.dim,) * m)
        return cls(params, levels)


def vacuum(params: FockParams) -> FockVector:
    return FockVector(params, {0: np.array(1.0 + 0j)})


def basis_vector(params: FockParams, indices) -> FockVector:
    t = basis_tensor(params, indices)
    return FockVector(params, {t.ndim: t})


def q_inner(u: FockVector, v: FockVector) -> complex:
    """q-deformed inner product, conjugate-linear in the first slot."""
    _require_same_params(u.params, v.params)
    total = 0.0 + 0.0j
    for m, t in u.levels.items():
        other = v.levels.get(m)
        if other is None:
            continue
        gram_v = symmetrizer_apply(u.params, other)
        total += np.vdot(t, gram_v)
    return complex(total)


def conjugation(v: FockVector) -> FockVector:
    """Antilinear involution: conjugate coordinates, reverse factors."""
    return FockVector(
        v.params,
        {m: conjugate_tensor(t) for m, t in v.levels.items()},
        v.lossless,
    )


# ---------------------------------------------------------------------------
# block operators
# ---------------------------------------------------------------------------


@dataclass
class FockOperator:
    """Level-block matrix on the truncated Fock space.

    ``blocks`` maps (source level, target level) -> dense matrix of
    shape (N^target, N^source).  ``lossy_sources`` lists source levels
    whose image was cut at the truncation boundary; applying the
    operator to mass at those levels clears the result's flag.
    """

    params: FockParams
    blocks: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    lossy_sources: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        clean = {}
        for (src, dst), mat in self.blocks.items():
            arr = np.asarray(mat, dtype=complex)
            want = (self.params.level_dim(dst), self.params.level_dim(src))
            if arr.shape != want:
                raise ShapeMismatch(f"block {(src, dst)} must have shape {want}")
            if src > self.params.max_level or dst > self.params.max_level:
                raise LevelTooLarge(f"block {(src, dst)} beyond max_level")
            if np.any(arr):
                clean[(src, dst)] = arr
        self.blocks = clean
        self.lossy_sources = frozenset(self.lossy_sources)

    @classmethod
    def identity(cls, params: FockParams) -> "FockOperator":
        blocks = {
            (m, m): np.eye(params.level_dim(m), dtype=complex)
            for m in range(params.max_level + 1)
        }
        return cls(params, blocks)

    @classmethod
    def diagonal(cls, params: FockParams, weight) -> "FockOperator":
        """Block-diagonal operator scaling level m by weight(m)."""
        blocks = {}
        for m in range(params.max_level + 1):
            w = complex(weight(m))
            if w != 0:
                blocks[(m, m)] = w * np.eye(params.level_dim(m), dtype=complex)
        return cls(params, blocks)

    def apply(self, vec: FockVector) -> FockVector:
        _require_same_params(self.params, vec.params)
        out: dict[int, np.ndarray] = {}
        lossless = vec.lossless
        for m, t in vec.levels.items():
            if m in self.lossy_sources:
                lossless = False
            flat = t.reshape(-1)
            for (src, dst), mat in self.blocks.items():
                if src != m:
                    continue
                contrib = (mat @ flat).reshape((self.params.dim,) * dst)
                out[dst] = out.get(dst, 0) + contrib
        return FockVector(self.params, out, lossless)

    def compose(self, other: "FockOperator") -> "FockOperator":
        """self applied after other."""
        _require_same_params(self.params, other.params)
        blocks: dict[tuple[int, int], np.ndarray] = {}
        for (src, mid), right in other.blocks.items():
            for (mid2, dst), left in self.blocks.items():
                if mid2 != mid:
                    continue
                key = (src, dst)
                prod = left @ right
                blocks[key] = blocks.get(key, 0) + prod
        lossy = set(other.lossy_sources)
        for (src, mid), right in other.blocks.items():
            if mid in self.lossy_sources and np.any(right):
                lossy.add(src)
        return FockOperator(self.params, blocks, frozenset(lossy))

    def add(self, other: "FockOperator") -> "FockOperator":
        _require_same_params(self.params, other.params)
        blocks = {k: v.copy() for k, v in self.blocks.items()}
        for k, v in other.blocks.items():
            blocks[k] = blocks.get(k, 0) + v
        return FockOperator(self.params, blocks, self.lossy_sources | other.lossy_sources)

    def scaled(self, c: complex) -> "FockOperator":
        return FockOperator(
            self.params, {k: c * v for k, v in self.blocks.items()}, self.lossy_sources
        )

    def gram_adjoint(self) -> "FockOperator":
        """Adjoint with respect to the q-inner product:
        block(dst -> src) = Gram_src^{-1} block(src -> dst)^H Gram_dst."""
        blocks = {}
        for (src, dst), mat in self.blocks.items():
            g_dst = symmetrizer(self.params, dst)
            g_src_inv = symmetrizer_inv(self.params, src)
            blocks[(dst, src)] = g_src_inv @ mat.conj().T @ g_dst
        # Dropped blocks above the cut make the adjoint lossy from those
        # (high) source levels; conservatively flag everything at the top.
        lossy = set()
        if self.lossy_sources:
            lossy = {self.params.max_level}
        return FockOperator(self.params, blocks, frozenset(lossy))

    def column(self, src_level: int, flat_index: int) -> FockVector:
        out = {}
        for (src, dst), mat in self.blocks.items():
            if src == src_level:
                out[dst] = mat[:, flat_index].reshape((self.params.dim,) * dst)
        return FockVector(self.params, out, src_level not in self.lossy_sources)

    def vacuum_expectation(self) -> complex:
        blk = self.blocks.get((0, 0))
        return complex(blk[0, 0]) if blk is not None else 0.0 + 0.0j

    def source_levels(self) -> list[int]:
        return sorted({src for src, _ in self.blocks})

    def q_norm(self) -> float:
        """Operator norm between q-metric spaces via the symmetric
        pencil (no explicit Gram square roots needed)."""
        sources = self.source_levels()
        if not sources:
            return 0.0
        offs, total = {}, 0
        for m in sources:
            offs[m] = total
            total += self.params.level_dim(m)
        quad = np.zeros((total, total), dtype=complex)
        targets = sorted({dst for _, dst in self.blocks})
        for dst in targets:
            stacked = np.zeros((self.params.level_dim(dst), total), dtype=complex)
            for (src, d), mat in self.blocks.items():
                if d == dst:
                    stacked[:, offs[src] : offs[src] + mat.shape[1]] = mat
            g = symmetrizer(self.params, dst)
            quad += stacked.conj().T @ g @ stacked
        gram = np.zeros((total, total), dtype=complex)
        for m in sources:
            lo, hi = offs[m], offs[m] + self.params.level_dim(m)
            gram[lo:hi, lo:hi] = symmetrizer(self.params, m)
        vals = scipy.linalg.eigh(quad, gram, eigvals_only=True)
        return float(np.sqrt(max(float(vals[-1]), 0.0)))


def creation(params: FockParams, xi) -> FockOperator:
    """Left creation by a one-particle vector; the block out of the top
    level is dropped and recorded as lossy."""
    vec = as_level_tensor(params, 1, xi)
    blocks = {}
    lossy = set()
    for m in range(params.max_level + 1):
        if m + 1 > params.max_level:
            if np.any(vec):
                lossy.add(m)
            continue
        n_src = params.level_dim(m)
        mat = np.kron(vec.reshape(-1, 1), np.eye(n_src, dtype=complex))
        blocks[(m, m + 1)] = mat
    return FockOperator(params, blocks, frozenset(lossy))


def annihilation(params: FockParams, xi) -> FockOperator:
    """Annihilation by the explicit shift rule: remove the k-th factor
    with weight q^(k-1) <xi, factor_k>."""
    vec = as_level_tensor(params, 1, xi)
    coeff = np.conj(vec.reshape(-1))
    d = params.dim
    blocks = {}
    for m in range(1, params.max_level + 1):
        n_src, n_dst = params.level_dim(m), params.level_dim(m - 1)
        mat = np.zeros((n_dst, n_src), dtype=complex)
        for k in range(m):
            # Source index splits as (front, hit, back) around slot k.
            back = d ** (m - 1 - k)
            src = np.arange(n_src)
            hit = (src // back) % d
            dst = (src // (back * d)) * back + (src % back)
            np.add.at(mat, (dst, src), (params.q**k) * coeff[hit])
        blocks[(m, m - 1)] = mat
    return FockOperator(params, blocks)
