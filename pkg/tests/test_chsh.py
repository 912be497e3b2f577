import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from selftesting import chsh
from selftesting import dilation as dl
from selftesting import matcore as mc
from selftesting import models as md
from selftesting.errors import NotOptimal

seeds = st.integers(0, 2**32 - 1)


def test_ideal_score():
    win, bias = chsh.chsh_score(md.correlation_ns(chsh.ideal_model()))
    assert win == pytest.approx(0.5 + 1 / (2 * np.sqrt(2)), abs=1e-12)
    assert bias == pytest.approx(2 * np.sqrt(2), abs=1e-12)
    assert chsh.bias_value(chsh.ideal_model()) == pytest.approx(2 * np.sqrt(2), abs=1e-12)


def test_classical_score_bounded():
    e = np.diag([1.0, 0.0]).astype(complex)
    det = md.pvm(np.array([[e, np.eye(2) - e]] * 2))
    m = md.Model("tensor", (2, 2), det, det, np.kron(mc.basis_vector(0, 2), mc.basis_vector(0, 2)).astype(complex))
    win, bias = chsh.chsh_score(md.correlation_ns(m))
    assert win == pytest.approx(0.75)
    assert bias == pytest.approx(2.0)


def test_operators_at_optimum():
    ops = chsh.build_operators(chsh.ideal_model())
    assert ops.certified
    assert ops.anticommutator_residual <= 1e-12
    assert max(ops.relations.values()) <= 1e-12
    assert mc.fro(ops.ZA_hat - ops.ZA) <= 1e-12


def test_swap_projections_are_isometric():
    p0, p1 = chsh.swap_projections(mc.SIGMA_Z, mc.SIGMA_X)
    v = np.vstack([p0, p1])
    assert mc.isometry_residual(v) <= 1e-15


def test_selftest_ideal():
    rep = chsh.swap_selftest(chsh.ideal_model())
    assert rep.verdict
    assert len([k for k in rep.residuals if k != "state"]) == 16
    assert rep.worst_residual <= 1e-12
    assert rep.extra["xi_aux_formula_residual"] <= 1e-12


@given(seeds)
def test_selftest_conjugates(seed):
    rng = np.random.default_rng(seed)
    m = md.conjugate(chsh.ideal_model(), mc.random_unitary(rng, 2), mc.random_unitary(rng, 2))
    rep = chsh.swap_selftest(m)
    assert rep.verdict and rep.worst_residual <= 1e-8


@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_selftest_ampliations(seed, ka, kb):
    rng = np.random.default_rng(seed)
    m = dl.ampliate(chsh.ideal_model(), ka, kb, mc.random_unit_vector(rng, ka * kb))
    m = md.conjugate(m, mc.random_unitary(rng, 2 * ka), mc.random_unitary(rng, 2 * kb))
    rep = chsh.swap_selftest(m)
    assert rep.verdict and rep.worst_residual <= 1e-8
    assert rep.extra["xi_aux_formula_residual"] <= 1e-8


def test_selftest_commuting_flavor():
    rng = np.random.default_rng(2)
    m = dl.ampliate(chsh.ideal_model(), 2, 2, mc.random_unit_vector(rng, 4)).as_commuting()
    rep = chsh.swap_selftest(m)
    assert rep.verdict and rep.worst_residual <= 1e-8


def test_non_optimal_model_rejected():
    a0, a1, b0, b1 = chsh.ideal_observables()
    m = md.Model("tensor", (2, 2), md.pvm_from_observables([a0, a0]), md.pvm_from_observables([b0, b1]), mc.max_entangled(2))
    with pytest.raises(NotOptimal) as err:
        chsh.swap_selftest(m)
    assert err.value.gap > 0.1


def _povm_padded_model():
    """Ideal model with an extra unpopulated level on Alice's side carrying unsharp elements."""
    a0, a1, b0, b1 = chsh.ideal_observables()
    blocks = np.zeros((2, 2, 3, 3), dtype=complex)
    for x, a in enumerate((a0, a1)):
        blocks[x, 0, :2, :2] = (np.eye(2) + a) / 2
        blocks[x, 1, :2, :2] = (np.eye(2) - a) / 2
        blocks[x, 0, 2, 2] = blocks[x, 1, 2, 2] = 0.5
    state = np.zeros(6, dtype=complex)
    state[:4] = mc.max_entangled(2)
    return md.Model("tensor", (3, 2), md.povm(blocks), md.pvm_from_observables([b0, b1]), state)


def test_extract_pvm_then_selftest():
    m = _povm_padded_model()
    assert md.validate(m.alice).constraint != "idempotence"
    out = chsh.extract_pvm(m)
    assert out.alice.kind == "pvm" and md.validate(out.alice).ok
    assert np.max(np.abs(md.correlation_ns(out).table - md.correlation_ns(m).table)) <= 1e-12
    assert chsh.swap_selftest(out).verdict


def test_counterexample():
    m, rep = chsh.counterexample_som()
    assert all(v["ok"] for v in rep.som_residuals.values())
    assert rep.qns_diagonal_residual <= 1e-10
    assert rep.obstruction_norm > 0.1
    x, y, a, ap, b, bp = rep.obstruction_pair
    assert a != ap
    # off-diagonal blocks are non-zero, so the model is not the lift of a POVM model
    assert mc.fro(m.alice.blocks[0, 0, 0, 1]) > 0.1
