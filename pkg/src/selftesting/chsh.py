"""The CHSH game: ideal model, bias, swap-isometry self-test, PVM extraction, SOM counterexample."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import dilation as dl
from . import matcore as mc
from . import models as md
from .errors import NotOptimal, ShapeError, ValidationError

SQRT2 = np.sqrt(2.0)
OPTIMAL_BIAS = 2 * SQRT2
OPTIMAL_WIN = 0.5 + 1 / (2 * SQRT2)
OPTIMALITY_GATE = 1e-6

HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / SQRT2


def ideal_observables():
    a0 = (mc.SIGMA_X + mc.SIGMA_Z) / SQRT2
    a1 = (mc.SIGMA_X - mc.SIGMA_Z) / SQRT2
    return a0, a1, mc.SIGMA_X.copy(), mc.SIGMA_Z.copy()


def ideal_model():
    """A_0 = (sx + sz)/sqrt2, A_1 = (sx - sz)/sqrt2, B_0 = sx, B_1 = sz on the state Omega_2."""
    a0, a1, b0, b1 = ideal_observables()
    return md.Model("tensor", (2, 2), md.pvm_from_observables([a0, a1]), md.pvm_from_observables([b0, b1]), mc.max_entangled(2))


def chsh_score(p):
    """(winning probability, bias) of an NS table; the rule is a XOR b = x AND y."""
    t = p.table if isinstance(p, md.Correlation) else np.asarray(p)
    if t.shape != (2, 2, 2, 2):
        raise ShapeError(f"CHSH needs binary inputs and outputs, got table shape {t.shape}")
    win = 0.0
    for x in range(2):
        for y in range(2):
            for a in range(2):
                for b in range(2):
                    if (a ^ b) == (x & y):
                        win += t[x, y, a, b]
    win /= 4
    return float(win), float(8 * (win - 0.5))


@dataclass(frozen=True, eq=False)
class ChshOperators:
    """Local observables and derived operators (all acting on the joint space)."""

    A0: np.ndarray
    A1: np.ndarray
    B0: np.ndarray
    B1: np.ndarray
    ZA: np.ndarray
    XA: np.ndarray
    ZA_hat: np.ndarray
    XA_hat: np.ndarray
    bias: float
    relations: dict
    certified: bool

    @property
    def anticommutator_residual(self):
        return mc.fro(self.ZA @ self.XA + self.XA @ self.ZA)


def _local_observables(m, tol):
    obs_a = md.observables(m.alice)
    obs_b = md.observables(m.bob)
    for name, o in zip(("A0", "A1", "B0", "B1"), obs_a + obs_b):
        r = mc.fro(o @ o - np.eye(o.shape[0]))
        if r > 1e3 * tol * np.sqrt(o.shape[0]):
            raise ValidationError("unitarity", r, f"observable {name} is not a symmetry (||{name}^2 - I|| = {r:.3e})")
    return obs_a, obs_b


def bias_value(m):
    """<beta xi, xi> with beta = A0B0 + A0B1 + A1B0 - A1B1, from A_x = E_{x,0} - E_{x,1}."""
    a = md.observables(m.alice)
    b = md.observables(m.bob)
    total = 0.0
    for x in range(2):
        for y in range(2):
            sign = -1 if x & y else 1
            v = m.pair_vector(a[x], b[y])
            total += sign * np.vdot(m.state, v).real
    return float(total)


def build_operators(m, tol=mc.DEFAULT_TOL, gate=OPTIMALITY_GATE):
    """Z_A, X_A, their regularized unitaries and the vector relations at the optimum."""
    if m.alice.n_inputs != 2 or m.alice.n_outputs != 2 or m.bob.n_inputs != 2 or m.bob.n_outputs != 2:
        raise ShapeError("CHSH needs two binary measurements per party")
    (a0, a1), (b0, b1) = _local_observables(m, tol)
    za = (a0 + a1) / SQRT2
    xa = (a0 - a1) / SQRT2
    za_hat = mc.regularized_polar(za, tol)
    xa_hat = mc.regularized_polar(xa, tol)
    A0, A1, ZA, XA, ZAh, XAh = (m.alice_op(o) for o in (a0, a1, za, xa, za_hat, xa_hat))
    B0, B1 = m.bob_op(b0), m.bob_op(b1)
    xi = m.state
    beta = A0 @ B0 + A0 @ B1 + A1 @ B0 - A1 @ B1
    bias = float(np.vdot(xi, beta @ xi).real)
    relations = {
        "ZA xi = B0 xi": float(np.linalg.norm(ZA @ xi - B0 @ xi)),
        "XA xi = B1 xi": float(np.linalg.norm(XA @ xi - B1 @ xi)),
        "ZA_hat xi = B0 xi": float(np.linalg.norm(ZAh @ xi - B0 @ xi)),
        "XA_hat xi = B1 xi": float(np.linalg.norm(XAh @ xi - B1 @ xi)),
        "(B0 B1 + B1 B0) xi = 0": float(np.linalg.norm((B0 @ B1 + B1 @ B0) @ xi)),
    }
    certified = abs(bias - OPTIMAL_BIAS) <= gate and max(relations.values()) <= max(1e3 * tol, 10 * np.sqrt(gate))
    return ChshOperators(A0, A1, B0, B1, ZA, XA, ZAh, XAh, bias, relations, bool(certified))


def _require_optimal(bias, gate):
    gap = OPTIMAL_BIAS - bias
    if abs(gap) > gate:
        raise NotOptimal(bias, OPTIMAL_BIAS, gap)


def swap_projections(zhat, xhat):
    """P_0 = (I + Z)/2 and P_1 = X (I - Z)/2."""
    eye = np.eye(zhat.shape[0])
    return (eye + zhat) / 2, xhat @ (eye - zhat) / 2


def swap_selftest(m, tol=mc.DEFAULT_TOL, gate=OPTIMALITY_GATE):
    """Verify that the swap isometries locally dilate ``m`` into the ideal model.

    The swap sends Z to sz and X to sx on the extracted qubit; a Hadamard on
    each qubit moves this into the frame of ``ideal_model`` (where Z_A = B_0 = sx),
    and leaves Omega_2 unchanged.  The auxiliary factor is the model's own space.
    """
    md.check_model(m, tol)
    bias = bias_value(m)
    _require_optimal(bias, gate)
    (a0, a1), (b0, b1) = _local_observables(m, tol)
    za_hat = mc.regularized_polar((a0 + a1) / SQRT2, tol)
    xa_hat = mc.regularized_polar((a0 - a1) / SQRT2, tol)
    zb_hat = mc.regularized_polar(b0, tol)
    xb_hat = mc.regularized_polar(b1, tol)
    p_a = swap_projections(za_hat, xa_hat)
    p_b = swap_projections(zb_hat, xb_hat)
    ideal = ideal_model()
    if m.flavor == "tensor":
        v_a = np.kron(HADAMARD, np.eye(m.dims[0])) @ np.vstack(p_a)
        v_b = np.kron(HADAMARD, np.eye(m.dims[1])) @ np.vstack(p_b)
        rep = dl.verify_local_dilation(m, ideal, v_a, v_b, tol)
        pa = [m.alice_op(p) for p in p_a]
        pb = [m.bob_op(p) for p in p_b]
        iso = {"V_A": mc.isometry_residual(v_a), "V_B": mc.isometry_residual(v_b)}
    else:
        n = m.total_dim
        pa, pb = list(p_a), list(p_b)
        # V h = sum_{i,j} e_i (x) e_j (x) P_{j,B} P_{i,A} h
        v = np.zeros((2, 2, n, n), dtype=complex)
        for i in range(2):
            for j in range(2):
                v[i, j] = pb[j] @ pa[i]
        v = np.kron(np.kron(HADAMARD, HADAMARD), np.eye(n)) @ v.reshape(4 * n, n)
        iso = {"V_A": mc.isometry_residual(np.vstack(pa)), "V_B": mc.isometry_residual(np.vstack(pb))}
        rep = dl.verify_joint_dilation(m, ideal, v, n, tol)
    order = max(mc.fro(pb[j] @ pa[i] - pa[i] @ pb[j]) for i in range(2) for j in range(2))
    formula = np.sqrt(2) * (pb[0] @ (pa[0] @ m.state))
    rep.extra.update(
        {
            "bias": bias,
            "isometry_residuals": iso,
            "order_residual": float(order),
            "xi_aux_formula_residual": float(np.linalg.norm(rep.xi_aux - formula)),
        }
    )
    return rep


def extract_pvm(m, tol=mc.DEFAULT_TOL, gate=OPTIMALITY_GATE):
    """Replace each E_{x,0} by its eigenvalue-1 spectral projection (optimal models only)."""
    md.check_model(m, tol)
    bias = bias_value(m)
    _require_optimal(bias, gate)
    worst = 0.0

    def extract(fam, embed):
        nonlocal worst
        blocks = []
        for x in range(fam.n_inputs):
            e0 = fam.element(x, 0)
            eig = mc.herm_eig(e0, tol)
            top = max(1.0, float(np.max(np.abs(eig.eigenvalues))))
            keep = eig.eigenvalues >= 1 - 1e3 * tol * top
            q = eig.eigenvectors[:, keep]
            p0 = q @ mc.dag(q)
            p1 = np.eye(fam.dim) - p0
            worst = max(worst, float(np.linalg.norm(embed(e0) @ m.state - embed(p0) @ m.state)))
            blocks.append([p0, p1])
        return md.pvm(np.array(blocks))

    out = md.Model(m.flavor, m.dims, extract(m.alice, m.alice_op), extract(m.bob, m.bob_op), m.state)
    limit = max(1e3 * tol, 10 * np.sqrt(gate))
    if worst > limit:
        raise ValidationError("extraction", worst, f"E_x0 xi differs from P_x0 xi by {worst:.3e}; the input is not extreme")
    md.check_model(out, tol)
    gap = float(np.max(np.abs(md.correlation_ns(out, tol).table - md.correlation_ns(m, tol).table)))
    if gap > limit:
        raise ValidationError("correlation", gap, f"extracted PVM model changes the correlation by {gap:.3e}")
    return out


class ObstructionReport(NamedTuple):
    som_residuals: dict
    qns_diagonal_residual: float
    lift_residual: float
    obstruction_norm: float
    obstruction_pair: tuple  # (x, y, a, a', b, b')


def _corner_som(obs, tol):
    """Blocks [[E_{x,0} (x) I, V_x^dagger], [V_x, E_{x,1} (x) I]] with V_x: xi_{x,0} e_0 -> xi_{x,1} e_1."""
    fam = md.pvm_from_observables(obs)
    X = fam.n_inputs
    e0, e1 = mc.basis_vector(0, 2), mc.basis_vector(1, 2)
    blocks = np.zeros((X, X, 2, 2, 4, 4), dtype=complex)
    for x in range(X):
        lead = [mc.herm_eig(fam.blocks[x, a], tol).eigenvectors[:, -1] for a in range(2)]
        v = np.outer(np.kron(lead[1], e1), np.conj(np.kron(lead[0], e0)))
        blocks[x, x, 0, 0] = np.kron(fam.blocks[x, 0], np.eye(2))
        blocks[x, x, 1, 1] = np.kron(fam.blocks[x, 1], np.eye(2))
        blocks[x, x, 0, 1] = mc.dag(v)
        blocks[x, x, 1, 0] = v
    return md.som(blocks)


def counterexample_som(tol=mc.DEFAULT_TOL):
    """SOM model whose QNS correlation is the lift of the ideal CHSH table, yet with off-diagonal blocks acting nontrivially."""
    a0, a1, b0, b1 = ideal_observables()
    alice = _corner_som([a0, a1], tol)
    bob = _corner_som([b0, b1], tol)
    e0 = mc.basis_vector(0, 2)
    # Omega_2 (x) e_0 (x) e_0 regrouped as (qubit_A, aux_A, qubit_B, aux_B)
    state = np.kron(mc.max_entangled(2), np.kron(e0, e0)).reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(-1)
    m = md.Model("tensor", (4, 4), alice, bob, state)
    som_res = {"alice": md.validate(alice, tol), "bob": md.validate(bob, tol)}
    g = md.correlation_qns(m, tol)
    ideal_p = md.correlation_ns(ideal_model(), tol)
    diag = float(np.max(np.abs(md.qns_diagonal(g) - ideal_p.table)))
    lifted = md.lift_classical(ideal_p, tol).table
    mask = np.zeros(lifted.shape, dtype=bool)
    for x in range(2):
        for y in range(2):
            for a in range(2):
                for b in range(2):
                    mask[x, x, y, y, a, a, b, b] = True
    lift_res = float(np.max(np.abs(g.table - lifted)[mask]))
    best, pair = 0.0, None
    for x in range(2):
        for y in range(2):
            for a in range(2):
                for ap in range(2):
                    for b in range(2):
                        for bp in range(2):
                            if a == ap:
                                continue
                            n = float(np.linalg.norm(m.pair_vector(alice.blocks[x, x, a, ap], bob.blocks[y, y, b, bp])))
                            if n > best:
                                best, pair = n, (x, y, a, ap, b, bp)
    res = {k: {"ok": v.ok, "constraint": v.constraint, "residual": v.residual} for k, v in som_res.items()}
    return m, ObstructionReport(res, diag, lift_res, best, pair)
