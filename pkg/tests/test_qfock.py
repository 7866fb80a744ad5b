"""Truncated q-Fock kernel: Grams, splittings, ladder operators."""

import itertools

import numpy as np
import pytest

from qfocklab.errors import LevelTooLarge, NotHermitianError, ParamMismatch
from qfocklab.numerics import hermitian_eig
from qfocklab.qfock import (
    FockOperator,
    FockParams,
    FockVector,
    annihilation,
    basis_tensor,
    basis_vector,
    conjugate_tensor,
    conjugation,
    creation,
    pairing_form,
    pairing_norm,
    pairing_value,
    q_inner,
    r_star,
    r_star3,
    split_tensor,
    splitter_matrix,
    symmetrizer,
    symmetrizer_apply,
    vacuum,
)


def params(q=0.5, dim=2, max_level=4):
    return FockParams(q=q, dim=dim, max_level=max_level)


def random_vector(rng, p, levels, real=False):
    data = {}
    for m in levels:
        t = rng.standard_normal((p.dim,) * m)
        if not real:
            t = t + 1j * rng.standard_normal((p.dim,) * m)
        data[m] = t
    return FockVector(p, data)


def symmetrizer_by_definition(p, m):
    """Direct permutation sum, independent of the production code path."""
    n = p.dim**m
    out = np.zeros((n, n), dtype=complex)
    for perm in itertools.permutations(range(m)):
        inv = sum(
            1 for a in range(m) for b in range(a + 1, m) if perm[a] > perm[b]
        )
        mat = np.zeros((n, n))
        for col in range(n):
            digits = [(col // p.dim**(m - 1 - ax)) % p.dim for ax in range(m)]
            permuted = [digits[perm[ax]] for ax in range(m)]
            row = sum(d * p.dim**(m - 1 - ax) for ax, d in enumerate(permuted))
            mat[row, col] = 1.0
        out += p.q**inv * mat
    return out


@pytest.mark.parametrize("q", [0.0, 0.5, -0.7])
@pytest.mark.parametrize("dim,m", [(1, 2), (2, 1), (2, 2), (2, 3), (3, 2), (3, 3)])
def test_symmetrizer_matches_definition(q, dim, m):
    p = FockParams(q=q, dim=dim, max_level=max(m, 1))
    assert np.allclose(symmetrizer(p, m), symmetrizer_by_definition(p, m), atol=1e-13)


def test_symmetrizer_trivials():
    p = params()
    assert np.allclose(symmetrizer(p, 1), np.eye(2))
    p0 = params(q=0.0)
    for m in range(4):
        assert np.allclose(symmetrizer(p0, m), np.eye(2**m))
    p1 = FockParams(q=0.3, dim=1, max_level=2)
    assert np.allclose(symmetrizer(p1, 2), np.array([[1.3]]))


def test_symmetrizer_recursion_agrees_with_group_sum():
    # The split-identity construction used above the group-sum cap must
    # agree with the explicit sum where both are available.
    p = FockParams(q=0.6, dim=2, max_level=6)
    for m in (2, 3, 4, 5):
        expl = symmetrizer(p, m)
        rec = np.kron(symmetrizer(p, m - 1), np.eye(2)) @ splitter_matrix(p, (m - 1, 1))
        assert np.allclose(expl, rec, atol=1e-12)


def test_symmetrizer_positive_definite():
    for dim in (1, 2, 3):
        for q in (-0.8, -0.4, 0.0, 0.4, 0.8):
            p = FockParams(q=q, dim=dim, max_level=5 if dim < 3 else 5)
            for m in range(6):
                if dim**m > 4096:
                    continue
                w, _ = hermitian_eig(symmetrizer(p, m))
                assert w[0] > 0.0


def test_symmetrizer_apply_matches_matrix():
    p = FockParams(q=0.4, dim=2, max_level=6)
    rng = np.random.default_rng(0)
    t = rng.standard_normal((2,) * 5) + 1j * rng.standard_normal((2,) * 5)
    direct = (symmetrizer(p, 5) @ t.reshape(-1)).reshape(t.shape)
    assert np.allclose(symmetrizer_apply(p, t), direct, atol=1e-12)


def test_q_inner_examples():
    p = params(q=0.37)
    assert q_inner(vacuum(p), vacuum(p)) == pytest.approx(1.0)
    e12 = basis_vector(p, [1, 2])
    e21 = basis_vector(p, [2, 1])
    assert q_inner(e12, e21) == pytest.approx(p.q)
    assert q_inner(e12, e12) == pytest.approx(1.0)


def test_q_inner_conjugate_symmetry_and_positivity():
    p = params(q=-0.55, max_level=4)
    rng = np.random.default_rng(1)
    u = random_vector(rng, p, [0, 1, 2, 3])
    v = random_vector(rng, p, [1, 2, 4])
    assert q_inner(u, v) == pytest.approx(np.conj(q_inner(v, u)))
    plain = sum(np.linalg.norm(t) ** 2 for t in u.levels.values())
    assert q_inner(u, u).real >= -1e-10 * plain


def test_q_inner_param_mismatch():
    with pytest.raises(ParamMismatch):
        q_inner(vacuum(params(q=0.5)), vacuum(params(q=0.4)))


def test_creation_on_vacuum_and_annihilation_shift_rule():
    p = params(q=0.6)
    create = creation(p, [1.0, 0.0])
    out = create.apply(vacuum(p))
    assert np.allclose(out.component(1), [1.0, 0.0])
    kill = annihilation(p, [1.0, 0.0])
    out = kill.apply(basis_vector(p, [1, 2]))
    assert np.allclose(out.component(1), [0.0, 1.0])
    out = kill.apply(basis_vector(p, [2, 1]))
    assert np.allclose(out.component(1), [0.0, p.q])


def test_annihilation_equals_gram_adjoint_of_creation():
    for dim in (1, 2, 3):
        for q in (-0.5, 0.0, 0.3, 0.7):
            p = FockParams(q=q, dim=dim, max_level=4)
            for i in range(dim):
                xi = np.zeros(dim)
                xi[i] = 1.0
                lhs = annihilation(p, xi)
                rhs = creation(p, xi).gram_adjoint()
                for key in set(lhs.blocks) | set(rhs.blocks):
                    l = lhs.blocks.get(key, np.zeros(1))
                    r = rhs.blocks.get(key, np.zeros(1))
                    assert np.allclose(l, r, atol=1e-10), (dim, q, key)


def test_annihilation_complex_antilinear():
    p = params(q=0.3)
    xi = np.array([0.5 + 0.5j, -0.25j])
    lhs = annihilation(p, xi)
    rhs = creation(p, xi).gram_adjoint()
    for key in set(lhs.blocks) | set(rhs.blocks):
        assert np.allclose(lhs.blocks.get(key, 0), rhs.blocks.get(key, 0), atol=1e-10)


def test_creation_truncation_is_flagged():
    p = params(max_level=2)
    create = creation(p, [1.0, 0.0])
    top = basis_vector(p, [1, 2])
    assert not create.apply(top).lossless
    assert create.apply(vacuum(p)).lossless


def test_conjugation_examples():
    p = params()
    v = conjugation(basis_vector(p, [1, 2]))
    assert np.allclose(v.component(2), basis_tensor(p, [2, 1]))
    w = conjugation(FockVector(p, {1: 1j * basis_tensor(p, [1])}))
    assert np.allclose(w.component(1), -1j * basis_tensor(p, [1]))


def test_conjugation_is_q_antiunitary_involution():
    p = params(q=0.44, max_level=4)
    rng = np.random.default_rng(2)
    u = random_vector(rng, p, [0, 1, 2, 3, 4])
    v = random_vector(rng, p, [1, 2, 3])
    again = conjugation(conjugation(u))
    for m in u.levels:
        assert np.allclose(again.component(m), u.component(m))
    assert q_inner(conjugation(u), conjugation(v)) == pytest.approx(
        np.conj(q_inner(u, v))
    )


@pytest.mark.parametrize("n,k", [(0, 2), (2, 0), (1, 1), (1, 2), (2, 1), (2, 2)])
def test_r_star_factorization(n, k):
    for dim in (1, 2, 3):
        p = FockParams(q=0.5, dim=dim, max_level=4)
        lhs = symmetrizer(p, n + k)
        rhs = np.kron(symmetrizer(p, n), symmetrizer(p, k)) @ r_star(p, n, k)
        denom = max(np.linalg.norm(lhs), 1.0)
        assert np.linalg.norm(lhs - rhs) <= 1e-11 * denom


def test_r_star_scalar_case():
    p = FockParams(q=0.25, dim=1, max_level=2)
    assert np.allclose(r_star(p, 1, 1), [[1 + p.q]])


def test_r_star_identity_when_one_sided():
    p = params()
    assert np.allclose(r_star(p, 0, 3), np.eye(8))
    assert np.allclose(r_star(p, 3, 0), np.eye(8))


@pytest.mark.parametrize("nkl", [(1, 1, 1), (2, 1, 1), (1, 2, 1), (1, 1, 2)])
def test_r_star3_two_split_orders_agree(nkl):
    n, k, l = nkl
    p = FockParams(q=0.3, dim=2, max_level=4)
    total = n + k + l
    left = np.kron(r_star(p, n, k), np.eye(p.dim**l)) @ r_star(p, n + k, l)
    right = np.kron(np.eye(p.dim**n), r_star(p, k, l)) @ r_star(p, n, k + l)
    got = r_star3(p, n, k, l)
    assert np.allclose(got, left, atol=1e-12)
    assert np.allclose(got, right, atol=1e-12)
    lhs = symmetrizer(p, total)
    kron3 = np.kron(
        np.kron(symmetrizer(p, n), symmetrizer(p, k)), symmetrizer(p, l)
    )
    assert np.linalg.norm(lhs - kron3 @ got) <= 1e-11 * np.linalg.norm(lhs)


def test_r_star3_reduces_to_two_part():
    p = params()
    assert np.allclose(r_star3(p, 0, 2, 1), r_star(p, 2, 1))
    assert np.allclose(r_star3(p, 1, 0, 2), r_star(p, 1, 2))
    assert np.allclose(r_star3(p, 1, 2, 0), r_star(p, 1, 2))


def test_r_star_level_budget():
    p = params(max_level=2)
    with pytest.raises(LevelTooLarge):
        r_star(p, 2, 1)


def test_params_materialization_budget():
    FockParams(q=0.5, dim=2, max_level=12)  # 4096, at the cap
    with pytest.raises(LevelTooLarge):
        FockParams(q=0.5, dim=2, max_level=13)
    with pytest.raises(LevelTooLarge):
        FockParams(q=0.5, dim=3, max_level=8)
    with pytest.raises(ParamMismatch):
        FockParams(q=1.0, dim=2, max_level=2)


def test_split_tensor_matches_matrix():
    p = FockParams(q=0.7, dim=2, max_level=4)
    rng = np.random.default_rng(3)
    t = rng.standard_normal((2,) * 4) + 1j * rng.standard_normal((2,) * 4)
    for n, k in [(1, 3), (2, 2), (3, 1)]:
        mat = splitter_matrix(p, (n, k))
        want = (mat @ t.reshape(-1)).reshape(t.shape)
        got = split_tensor(p.q, t, n, k)
        assert np.allclose(got, want, atol=1e-12)


def test_pairing_values_and_norm():
    p = params(q=0.41)
    e1 = basis_tensor(p, [1])
    assert pairing_value(p, e1, e1) == pytest.approx(1.0)
    # Level-2 pairing evaluated two independent ways.
    v = basis_tensor(p, [1, 2])
    w = basis_tensor(p, [2, 1])
    direct = pairing_value(p, v, w)
    gram = symmetrizer(p, 2)
    via_gram = np.vdot(conjugate_tensor(v).reshape(-1), gram @ w.reshape(-1))
    assert direct == pytest.approx(complex(via_gram))
    for dim in range(1, 6):
        pp = FockParams(q=0.41, dim=dim, max_level=2)
        assert pairing_norm(pp, 1) == pytest.approx(np.sqrt(dim), abs=1e-9)


def test_r_star_q_metric_norm_bounded_by_plain_norm():
    # The q-metric norm of the splitting squared never exceeds its plain
    # operator norm (the boundedness mechanism used for level bounds).
    for q in (0.3, -0.6):
        p = FockParams(q=q, dim=2, max_level=5)
        for n, k in [(1, 1), (1, 2), (2, 2), (3, 2)]:
            mat = r_star(p, n, k)
            plain = np.linalg.norm(mat, 2)
            g_total = symmetrizer(p, n + k)
            g_parts = np.kron(symmetrizer(p, n), symmetrizer(p, k))
            quad = mat.conj().T @ g_parts @ mat
            import scipy.linalg

            vals = scipy.linalg.eigh(quad, g_total, eigvals_only=True)
            qnorm = np.sqrt(max(vals[-1], 0.0))
            assert qnorm**2 <= plain * (1 + 1e-10)


def test_operator_algebra_and_q_norm():
    p = params(q=0.2, max_level=3)
    ident = FockOperator.identity(p)
    assert ident.q_norm() == pytest.approx(1.0)
    create = creation(p, [1.0, 0.0])
    kill = annihilation(p, [1.0, 0.0])
    prod = kill.compose(create)
    # On the vacuum: annihilate(create(vacuum)) = vacuum.
    out = prod.apply(vacuum(p))
    assert out.component(0) == pytest.approx(1.0)


def test_fock_vector_json_round_trip():
    p = params()
    rng = np.random.default_rng(4)
    v = random_vector(rng, p, [0, 2, 3])
    again = FockVector.from_json(p, v.to_json())
    for m in v.levels:
        assert np.allclose(again.component(m), v.component(m))


def test_hermitian_guard_on_symmetrizer():
    p = params(q=0.5)
    g = symmetrizer(p, 3)
    assert np.allclose(g, g.conj().T)
    with pytest.raises(NotHermitianError):
        hermitian_eig(g + np.triu(np.ones_like(g), 1) * 0.1)
