"""Wick operators and the three mutually-validating product routes."""

import numpy as np
import pytest

from qfocklab.errors import ShapeMismatch, TruncationLoss
from qfocklab.qfock import (
    FockParams,
    annihilation,
    basis_tensor,
    basis_vector,
    conjugate_tensor,
    creation,
    q_inner,
    vacuum,
)
from qfocklab.wick import (
    Element,
    graded_mul,
    product_direct,
    product_partition,
    product_triple,
    trace,
    wick,
)


def params(q=0.5, dim=2, max_level=6):
    return FockParams(q=q, dim=dim, max_level=max_level)


def random_symbol(rng, p, level):
    return rng.standard_normal((p.dim,) * level)


def test_wick_of_vacuum_symbol_is_identity():
    p = params()
    w = wick(p, np.array(1.0))
    for m in range(p.max_level + 1):
        blk = w.realized.blocks.get((m, m))
        assert blk is not None and np.allclose(blk, np.eye(p.dim**m))


def test_wick_level_one_is_creation_plus_annihilation():
    p = params(q=0.37, max_level=4)
    w = wick(p, [1])
    direct = creation(p, [1.0, 0.0]).add(annihilation(p, [1.0, 0.0]))
    for key in set(w.realized.blocks) | set(direct.blocks):
        assert np.allclose(
            w.realized.blocks.get(key, 0.0), direct.blocks.get(key, 0.0), atol=1e-12
        ), key


def test_wick_reproduces_symbol_on_vacuum():
    p = params(q=-0.6, dim=3, max_level=4)
    rng = np.random.default_rng(0)
    for level in range(4):
        sym = random_symbol(rng, p, level)
        out = wick(p, sym).apply(vacuum(p))
        assert np.array_equal(out.component(level), np.asarray(sym, dtype=complex))


def test_wick_block_band_and_parity():
    p = params(q=0.3, dim=2, max_level=6)
    rng = np.random.default_rng(1)
    for n in (1, 2, 3):
        w = wick(p, random_symbol(rng, p, n))
        for (src, dst), blk in w.realized.blocks.items():
            assert abs(dst - src) <= n
            assert (dst - src - n) % 2 == 0
            assert np.any(blk)


def test_element_product_n1_example():
    p = FockParams(q=0.8, dim=1, max_level=4)
    e = Element.word(p, [1])
    prod = e * e
    assert prod.component(0) == pytest.approx(1.0)
    assert np.allclose(prod.component(2), np.ones((1, 1)))


def test_element_product_matches_matrix_action():
    p = params(q=0.45, dim=2, max_level=5)
    rng = np.random.default_rng(2)
    for na, nb in [(1, 1), (2, 1), (1, 3), (2, 2)]:
        a, b = random_symbol(rng, p, na), random_symbol(rng, p, nb)
        via_matrix = wick(p, a).realized.apply(wick(p, b).apply(vacuum(p)))
        via_mul = Element.from_symbol(p, a) * Element.from_symbol(p, b)
        for m in set(via_mul.levels) | set(via_matrix.levels):
            assert np.allclose(
                via_matrix.component(m), via_mul.component(m), atol=1e-11
            )


def test_product_partition_single_word_and_two_words():
    p = params()
    w = wick(p, [1])
    one = product_partition(p, [w])
    assert np.allclose(one.component(1), [1.0, 0.0])
    two = product_partition(p, [w, w])
    assert two.component(0) == pytest.approx(1.0)
    assert np.allclose(two.component(2), basis_tensor(p, [1, 1]))


def test_product_partition_matches_direct_three_words():
    p = params(q=0.6, dim=2, max_level=6)
    rng = np.random.default_rng(3)
    syms = [random_symbol(rng, p, n) for n in (2, 1, 2)]
    via_part = product_partition(p, syms)
    via_direct = product_direct(p, syms)
    num = (Element.from_vector(via_part) - via_direct).q_norm()
    assert num <= 1e-9 * max(via_direct.q_norm(), 1.0)


def test_product_triple_reduces_with_scalar_operand():
    p = params(q=0.5)
    rng = np.random.default_rng(4)
    a, b = random_symbol(rng, p, 2), random_symbol(rng, p, 1)
    with_scalar = product_triple(p, a, np.array(1.0), b)
    two = product_direct(p, [a, b])
    assert (Element.from_vector(with_scalar) - two).q_norm() <= 1e-10


@pytest.mark.parametrize("qval", [0.4, -0.5])
@pytest.mark.parametrize("levels", [(1, 1, 1), (2, 2, 2), (2, 1, 2), (1, 3, 2)])
def test_route_triangle(qval, levels):
    p = params(q=qval, dim=2, max_level=6)
    rng = np.random.default_rng(hash(levels) % 2**32)
    syms = [random_symbol(rng, p, n) for n in levels]
    direct = product_direct(p, syms)
    part = Element.from_vector(product_partition(p, syms))
    trip = Element.from_vector(product_triple(p, *syms))
    scale = max(direct.q_norm(), 1.0)
    assert (part - direct).q_norm() <= 1e-9 * scale
    assert (trip - direct).q_norm() <= 1e-9 * scale


def test_route_triangle_dim3():
    p = FockParams(q=-0.3, dim=3, max_level=6)
    rng = np.random.default_rng(7)
    syms = [random_symbol(rng, p, n) for n in (2, 2, 2)]
    direct = product_direct(p, syms)
    part = Element.from_vector(product_partition(p, syms))
    trip = Element.from_vector(product_triple(p, *syms))
    scale = max(direct.q_norm(), 1.0)
    assert (part - direct).q_norm() <= 1e-9 * scale
    assert (trip - direct).q_norm() <= 1e-9 * scale


def test_product_partition_rejects_overflow():
    p = params(max_level=3)
    rng = np.random.default_rng(8)
    syms = [random_symbol(rng, p, 2), random_symbol(rng, p, 2)]
    with pytest.raises(TruncationLoss):
        product_partition(p, syms)
    with pytest.raises(TruncationLoss):
        product_triple(p, syms[0], np.array(1.0), syms[1])


def test_trace_examples():
    p = params(q=0.73)
    assert trace(wick(p, np.array(1.0))) == pytest.approx(1.0)
    w = wick(p, [1])
    assert trace(w) == 0.0
    assert trace(w.element() * w.element()) == pytest.approx(1.0)


def test_trace_is_tracial():
    p = params(q=0.5, max_level=6)
    rng = np.random.default_rng(9)
    for na, nb in [(1, 2), (2, 3), (3, 2)]:
        a = Element.from_symbol(p, random_symbol(rng, p, na))
        b = Element.from_symbol(p, random_symbol(rng, p, nb))
        assert trace(a * b) == pytest.approx(trace(b * a), abs=1e-9)


def test_wick_adjoint_is_conjugated_symbol():
    p = params(q=0.35, dim=2, max_level=5)
    rng = np.random.default_rng(10)
    for n in (1, 2, 3):
        sym = random_symbol(rng, p, n)
        adj = wick(p, sym).realized.gram_adjoint()
        flipped = wick(p, conjugate_tensor(np.asarray(sym, dtype=complex))).realized
        for key, blk in flipped.blocks.items():
            src, dst = key
            if src + n > p.max_level or dst + n > p.max_level:
                continue  # adjoint only matches away from the truncation cut
            assert np.allclose(adj.blocks.get(key, 0.0), blk, atol=1e-9), key


def test_wick_expansion_level_band():
    # A product of level-n and level-k words expands in levels
    # [|n-k|, n+k] with the parity of n+k only.
    p = params(q=0.52, max_level=6)
    rng = np.random.default_rng(11)
    for n, k in [(1, 2), (2, 2), (3, 2)]:
        prod = product_direct(
            p, [random_symbol(rng, p, n), random_symbol(rng, p, k)]
        )
        for m in prod.levels:
            assert abs(n - k) <= m <= n + k
            assert (m - n - k) % 2 == 0


def test_graded_mul_max_out_truncates_exactly():
    p = params(q=0.3)
    rng = np.random.default_rng(12)
    a = {2: random_symbol(rng, p, 2).astype(complex)}
    b = {3: random_symbol(rng, p, 3).astype(complex)}
    full = graded_mul(p, a, b)
    cut = graded_mul(p, a, b, max_out=3)
    assert set(cut) == {m for m in full if m <= 3}
    for m in cut:
        assert np.allclose(cut[m], full[m])


def test_partition_products_need_pure_levels():
    p = params()
    mixed = Element(p, {1: basis_tensor(p, [1]), 2: basis_tensor(p, [1, 1])})
    with pytest.raises(ShapeMismatch):
        product_partition(p, [mixed])
