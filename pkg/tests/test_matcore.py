import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given
from hypothesis import strategies as st

from selftesting import matcore as mc
from selftesting.errors import NotHermitianError, NotPSD, ShapeError

seeds = st.integers(0, 2**32 - 1)
small = st.integers(1, 4)


def cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_pauli_relations():
    for s in (mc.SIGMA_X, mc.SIGMA_Y, mc.SIGMA_Z):
        assert np.allclose(s @ s, np.eye(2))
    assert np.allclose(mc.SIGMA_X @ mc.SIGMA_Y, 1j * mc.SIGMA_Z)


def test_max_entangled():
    w = mc.max_entangled(3)
    assert np.isclose(np.linalg.norm(w), 1)
    # (A (x) I) Omega = (I (x) A^T) Omega
    a = cplx(np.random.default_rng(0), 3, 3)
    assert np.allclose(np.kron(a, np.eye(3)) @ w, np.kron(np.eye(3), a.T) @ w)


@given(seeds, small, small)
def test_partial_trace_matches_loop(seed, da, db):
    rng = np.random.default_rng(seed)
    m = cplx(rng, da * db, da * db)
    want_b = np.zeros((da, da), dtype=complex)
    for j in range(db):
        e = np.kron(np.eye(da), mc.basis_vector(j, db)[:, None])
        want_b += e.T @ m @ e
    want_a = np.zeros((db, db), dtype=complex)
    for i in range(da):
        e = np.kron(mc.basis_vector(i, da)[:, None], np.eye(db))
        want_a += e.T @ m @ e
    assert np.max(np.abs(mc.partial_trace(m, (da, db), "B") - want_b)) <= 1e-12 * max(1, np.abs(m).max() * db)
    assert np.max(np.abs(mc.partial_trace(m, (da, db), "A") - want_a)) <= 1e-12 * max(1, np.abs(m).max() * da)


@given(seeds, small, small)
def test_partial_trace_of_product(seed, da, db):
    rng = np.random.default_rng(seed)
    a, b = cplx(rng, da, da), cplx(rng, db, db)
    m = np.kron(a, b)
    assert np.allclose(mc.partial_trace(m, (da, db), "B"), np.trace(b) * a, atol=1e-12 * (1 + np.abs(m).sum()))
    assert np.allclose(mc.partial_trace(m, (da, db), "A"), np.trace(a) * b, atol=1e-12 * (1 + np.abs(m).sum()))


@given(seeds, small, small, small)
def test_kron_mixed_product(seed, n, m, k):
    rng = np.random.default_rng(seed)
    a, c = cplx(rng, n, n), cplx(rng, n, n)
    b, d = cplx(rng, m, m), cplx(rng, m, m)
    lhs = mc.kron(a, b) @ mc.kron(c, d)
    rhs = mc.kron(a @ c, b @ d)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + np.abs(rhs).max()) * n * m
    e = cplx(rng, k, k)
    assert np.allclose(mc.kron_all(a, b, e), np.kron(np.kron(a, b), e), atol=1e-12)


def test_kron_matches_explicit_entries():
    rng = np.random.default_rng(3)
    a, b = cplx(rng, 2, 3), cplx(rng, 4, 2)
    k = mc.kron(a, b)
    for i in range(2):
        for j in range(3):
            for p in range(4):
                for q in range(2):
                    assert k[i * 4 + p, j * 2 + q] == pytest.approx(a[i, j] * b[p, q], abs=1e-14)


def test_partial_trace_shape_errors():
    with pytest.raises(ShapeError):
        mc.partial_trace(np.eye(5), (2, 2), "A")
    with pytest.raises(ValueError):
        mc.partial_trace(np.eye(4), (2, 2), "C")


def test_check_hermitian_raises():
    with pytest.raises(NotHermitianError) as err:
        mc.check_hermitian(np.array([[0, 1], [0, 0]]))
    assert err.value.residual > 0


@given(seeds, st.integers(1, 6))
def test_herm_eig_against_scipy(seed, n):
    rng = np.random.default_rng(seed)
    h = mc.random_hermitian(rng, n)
    eig = mc.herm_eig(h)
    want = sla.eigh(h, eigvals_only=True)
    assert np.allclose(eig.eigenvalues, want, atol=1e-10)
    rec = eig.eigenvectors @ np.diag(eig.eigenvalues) @ mc.dag(eig.eigenvectors)
    assert mc.fro(rec - h) <= 1e-10


def test_herm_eig_deterministic():
    h = np.diag([1.0, 1.0, 2.0]).astype(complex)
    u = mc.random_unitary(np.random.default_rng(0), 3)
    h = u @ h @ mc.dag(u)
    a, b = mc.herm_eig(h), mc.herm_eig(h.copy())
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


@given(seeds, st.integers(1, 6), st.integers(1, 6))
def test_gram_factor(seed, n, r):
    rng = np.random.default_rng(seed)
    b = cplx(rng, r, n)
    m = mc.dag(b) @ b
    g = mc.gram_factor(m)
    assert g.shape[0] == min(r, n)
    assert mc.fro(mc.dag(g) @ g - m) <= 1e-12 * max(1.0, mc.fro(m)) * n


def test_gram_factor_rejects_indefinite():
    with pytest.raises(NotPSD) as err:
        mc.gram_factor(np.diag([1.0, -0.5]))
    assert err.value.eigenvalue == pytest.approx(-0.5)


@given(seeds, st.integers(1, 5))
def test_psd_sqrt_and_polar_against_scipy(seed, n):
    rng = np.random.default_rng(seed)
    b = cplx(rng, n, n)
    p = mc.dag(b) @ b
    assert np.allclose(mc.psd_sqrt(p), sla.sqrtm(p), atol=1e-8)
    u = mc.polar_unitary(b)
    want, _ = sla.polar(b)
    assert np.allclose(u, want, atol=1e-8)
    assert mc.unitarity_residual(u) <= 1e-12


def test_regularized_polar_of_singular_hermitian():
    t = np.diag([2.0, -1.0, 0.0]).astype(complex)
    u = mc.regularized_polar(t)
    assert mc.unitarity_residual(u) <= 1e-12
    assert np.allclose(u @ mc.psd_sqrt(mc.dag(t) @ t), t)


@given(seeds, st.integers(2, 6), st.integers(1, 5))
def test_null_space_against_scipy(seed, n, r):
    rng = np.random.default_rng(seed)
    r = min(r, n - 1)
    a = cplx(rng, r, n)
    ns = mc.null_space(a)
    assert ns.shape[1] == sla.null_space(a).shape[1] == n - r
    assert mc.fro(a @ ns) <= 1e-10
    assert mc.isometry_residual(ns) <= 1e-12


def test_orth_and_range_projection():
    rng = np.random.default_rng(5)
    a = cplx(rng, 5, 2) @ cplx(rng, 2, 4)
    q = mc.orth(a)
    assert q.shape[1] == 2
    p = mc.range_projection(a)
    assert mc.fro(p @ p - p) <= 1e-12
    assert mc.fro(p @ a - a) <= 1e-10


def test_commutant_of_full_matrix_algebra_is_scalars():
    gens = [np.kron(mc.SIGMA_X, np.eye(2)), np.kron(mc.SIGMA_Z, np.eye(2))]
    comm = mc.commutant_basis(gens, 4)
    assert len(comm) == 4  # I (x) M_2
    for c in comm:
        for g in gens:
            assert mc.fro(c @ g - g @ c) <= 1e-12
    assert len(mc.commutant_basis([mc.SIGMA_X, mc.SIGMA_Z], 2)) == 1


@given(seeds, st.integers(1, 5))
def test_random_unitary_and_isometry(seed, n):
    rng = np.random.default_rng(seed)
    assert mc.unitarity_residual(mc.random_unitary(rng, n)) <= 1e-12
    assert mc.isometry_residual(mc.random_isometry(rng, n + 2, n)) <= 1e-12
    assert np.linalg.norm(mc.random_unit_vector(rng, n)) == pytest.approx(1.0)


@pytest.mark.parametrize("blocks", [[(2, 1)], [(2, 2), (1, 3)], [(1, 1), (2, 1), (3, 2)]])
def test_decompose_algebra_recovers_blocks(blocks):
    rng = np.random.default_rng(11)
    dim = sum(n * k for n, k in blocks)
    gens = []
    for _ in range(3):
        g = np.zeros((dim, dim), dtype=complex)
        off = 0
        for n, k in blocks:
            g[off : off + n * k, off : off + n * k] = np.kron(cplx(rng, n, n), np.eye(k))
            off += n * k
        gens.append(g)
    u = mc.random_unitary(rng, dim)
    gens = [u @ g @ mc.dag(u) for g in gens]
    found = mc.decompose_algebra(gens, dim)
    assert sorted((b.n, b.k) for b in found) == sorted(blocks)
    total = sum(b.isometry @ mc.dag(b.isometry) for b in found)
    assert mc.fro(total - np.eye(dim)) <= 1e-9
    for b in found:
        for g in gens:
            rest = mc.dag(b.isometry) @ g @ b.isometry
            assert mc.fro(rest - np.kron(b.restrict(g), np.eye(b.k))) <= 1e-9
