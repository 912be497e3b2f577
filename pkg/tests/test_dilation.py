import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from selftesting import chsh
from selftesting import dilation as dl
from selftesting import matcore as mc
from selftesting import models as md
from selftesting.errors import ShapeError, ValidationError

seeds = st.integers(0, 2**32 - 1)


def test_identity_dilation_of_ideal():
    m = chsh.ideal_model()
    rep = dl.verify_local_dilation(m, m, np.eye(2), np.eye(2))
    assert rep.verdict and rep.status == "ok"
    assert rep.worst_residual <= 1e-15
    assert np.allclose(rep.xi_aux, [1.0])


def test_ampliation_is_dilated_by_the_identity():
    # E~ (x) I with state xi~ (x) xi_aux: the regrouping permutation is the isometry
    m = chsh.ideal_model()
    aux = mc.random_unit_vector(np.random.default_rng(0), 6)
    big = dl.ampliate(m, 2, 3, aux)
    assert md.validate_model(big).ok
    rep = dl.verify_local_dilation(big, m, np.eye(4), np.eye(6))
    assert rep.verdict, rep.worst_residual
    assert np.allclose(rep.xi_aux, aux)


def test_wrong_isometry_fails_with_worst_pair():
    m = chsh.ideal_model()
    rep = dl.verify_local_dilation(m, m, mc.SIGMA_X, np.eye(2))
    assert not rep.verdict
    assert rep.status in ("residual", "state misaligned")
    assert rep.worst_residual > 0.1


def test_non_isometry_rejected():
    m = chsh.ideal_model()
    with pytest.raises(ValidationError):
        dl.verify_local_dilation(m, m, 2 * np.eye(2), np.eye(2))
    with pytest.raises(ShapeError):
        dl.verify_joint_dilation(m, m, np.eye(3), 1)


def test_report_serializable():
    m = chsh.ideal_model()
    d = dl.verify_local_dilation(m, m, np.eye(2), np.eye(2)).to_dict()
    assert d["verdict"] is True and "residuals" in d


@given(seeds)
def test_unitary_equivalence_of_conjugates(seed):
    rng = np.random.default_rng(seed)
    m = chsh.ideal_model()
    c = md.conjugate(m, mc.random_unitary(rng, 2), mc.random_unitary(rng, 2))
    eq = dl.unitary_equivalent(m, c)
    assert eq.equivalent, eq.reason
    assert eq.residual <= 1e-8


def test_unitary_equivalence_rejects_different_correlations():
    m = chsh.ideal_model()
    e = np.diag([1.0, 0.0]).astype(complex)
    cls = md.pvm(np.array([[e, np.eye(2) - e]] * 2))
    other = md.Model("tensor", (2, 2), cls, cls, m.state)
    assert not dl.unitary_equivalent(m, other).equivalent


@given(seeds, st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_som_isometry_reconstructs(seed, X, A, h):
    rng = np.random.default_rng(seed)
    e = dl.random_som(rng, X, A, h)
    v = dl.som_isometry(e)
    assert v.residual() <= 1e-10
    assert np.max(np.linalg.norm(v.gram() - e.blocks, axis=(-2, -1))) <= 1e-10


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_usom_dilation_identity(seed, n, h):
    rng = np.random.default_rng(seed)
    e = dl.random_som(rng, n, n, h)
    d = dl.usom_dilate(e)
    assert d.unitarity_residual <= 1e-9
    assert d.reconstruction_residual <= 1e-9
    # W is an isometry and each U_{a,x} is a block of a unitary
    assert mc.isometry_residual(d.w) <= 1e-12
    assert mc.unitarity_residual(d.block_matrix()) <= 1e-9
    assert md.validate(d.som()).ok


def test_usom_dilate_of_pvm():
    f = md.pvm_from_observables([mc.SIGMA_X, mc.SIGMA_Z])
    d = dl.usom_dilate(f)
    assert d.reconstruction_residual <= 1e-12


def test_usom_needs_square_alphabets():
    e = dl.random_som(np.random.default_rng(0), 2, 3, 1)
    with pytest.raises(ShapeError):
        dl.usom_dilate(e)


def test_random_som_is_valid():
    e = dl.random_som(np.random.default_rng(9), 3, 2, 2)
    assert md.validate(e).ok
