"""Local dilations between models, ampliation, unitary equivalence and SOM dilations."""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import matcore as mc
from . import models as md
from .errors import ShapeError, ValidationError


@dataclass(frozen=True, eq=False)
class DilationReport:
    """Outcome of checking S <= S~ through a given isometry.

    ``residuals`` maps a generator-pair label to ||V g xi - (g~ xi~) (x) xi_aux||.
    ``status`` is ``"ok"``, ``"residual"`` (some residual above tolerance) or
    ``"state misaligned"`` (the partial inner product with xi~ vanished).
    """

    verdict: bool
    residuals: dict
    xi_aux: np.ndarray
    worst_pair: tuple
    worst_residual: float
    status: str
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "verdict": bool(self.verdict),
            "status": self.status,
            "worst_pair": list(self.worst_pair),
            "worst_residual": float(self.worst_residual),
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "xi_aux": self.xi_aux,
            **self.extra,
        }


def _element_labels(f):
    """(label, operator) pairs for every block of a family."""
    if f.is_som:
        X, _, A, _ = f.blocks.shape[:4]
        return [((x, xp, a, ap), f.blocks[x, xp, a, ap]) for x in range(X) for xp in range(X) for a in range(A) for ap in range(A)]
    X, A = f.blocks.shape[:2]
    return [((x, a), f.blocks[x, a]) for x in range(X) for a in range(A)]


def _joint_pairs(fam, fam_t, embed, embed_t):
    """Joint-space blocks of two families with the same labels, skipping labels where both are zero."""
    out = []
    for (lab, e), (_, et) in zip(_element_labels(fam), _element_labels(fam_t)):
        if mc.fro(e) > 0 or mc.fro(et) > 0:
            out.append((lab, embed(e), embed_t(et)))
    return out


def verify_joint_dilation(s, s_tilde, v, aux_dim, tol=mc.DEFAULT_TOL):
    """Check V E F xi = (E~ F~ xi~) (x) xi_aux for an isometry V: H_s -> H~ (x) aux."""
    n = s.total_dim
    nt = s_tilde.total_dim
    if v.shape != (nt * aux_dim, n):
        raise ShapeError(f"isometry has shape {v.shape}, expected {(nt * aux_dim, n)}")
    iso = mc.isometry_residual(v)
    if iso > 1e3 * tol * np.sqrt(n):
        raise ValidationError("isometry", iso, f"map is not an isometry (residual {iso:.3e})")
    if (s.alice.blocks.shape[:-2], s.bob.blocks.shape[:-2]) != (s_tilde.alice.blocks.shape[:-2], s_tilde.bob.blocks.shape[:-2]):
        raise ShapeError("models have different input/output alphabets")
    xt = s_tilde.state
    vxi = v @ s.state
    aux = np.conj(xt) @ vxi.reshape(nt, aux_dim)
    norm = float(np.linalg.norm(aux))
    if norm < tol:
        res = {"state": float(np.linalg.norm(vxi))}
        return DilationReport(False, res, np.zeros(aux_dim, dtype=complex), ("state",), res["state"], "state misaligned")
    aux = aux / norm
    residuals = {"state": float(np.linalg.norm(vxi - np.kron(xt, aux)))}
    # pairs where both models have a zero block contribute exactly zero
    a_keep = _joint_pairs(s.alice, s_tilde.alice, s.alice_op, s_tilde.alice_op)
    b_keep = _joint_pairs(s.bob, s_tilde.bob, s.bob_op, s_tilde.bob_op)
    if a_keep and b_keep:
        fs = np.array([f for _, f, _ in b_keep])
        fts = np.array([ft for _, _, ft in b_keep])
        for la, e, et in a_keep:
            lhs = (fs @ (e @ s.state)) @ v.T
            rhs = np.einsum("bi,j->bij", fts @ (et @ xt), aux).reshape(len(b_keep), -1)
            norms = np.linalg.norm(lhs - rhs, axis=1)
            for (lb, _, _), r in zip(b_keep, norms):
                residuals[f"A{la}B{lb}"] = float(r)
    worst_key = max(residuals, key=residuals.get)
    worst = residuals[worst_key]
    ok = worst <= tol
    return DilationReport(ok, residuals, aux, (worst_key,), worst, "ok" if ok else "residual")


def local_isometry(s, s_tilde, v_a, v_b):
    """Joint isometry (V_A (x) V_B) with the output reordered to (A~ B~)(auxA auxB)."""
    da, db = s.dims
    ta, tb = s_tilde.dims
    if v_a.shape[1] != da or v_b.shape[1] != db:
        raise ShapeError("isometry domains do not match the model's local dimensions")
    if v_a.shape[0] % ta or v_b.shape[0] % tb:
        raise ShapeError("isometry ranges are not of the form H~ (x) aux")
    ka, kb = v_a.shape[0] // ta, v_b.shape[0] // tb
    v = np.kron(v_a, v_b).reshape(ta, ka, tb, kb, da * db)
    return v.transpose(0, 2, 1, 3, 4).reshape(ta * tb * ka * kb, da * db), (ka, kb)


def verify_local_dilation(s, s_tilde, v_a, v_b, tol=mc.DEFAULT_TOL):
    """Check that (V_A (x) V_B) carries every measured vector of ``s`` onto those of ``s_tilde``.

    V_A maps C^dA into C^dA~ (x) C^auxA (and likewise for Bob); the recovered
    auxiliary vector lives on C^auxA (x) C^auxB.
    """
    if s.flavor != "tensor" or s_tilde.flavor != "tensor":
        raise ValueError("local dilations need tensor-split models")
    for name, v in (("V_A", v_a), ("V_B", v_b)):
        r = mc.isometry_residual(v)
        if r > 1e3 * tol * np.sqrt(v.shape[1]):
            raise ValidationError("isometry", r, f"{name} is not an isometry (residual {r:.3e})")
    v, (ka, kb) = local_isometry(s, s_tilde, v_a, v_b)
    rep = verify_joint_dilation(s, s_tilde, v, ka * kb, tol)
    rep.extra["aux_dims"] = [ka, kb]
    return rep


def ampliate(s_tilde, aux_a, aux_b, xi_aux, tol=mc.DEFAULT_TOL):
    """The model E~ (x) I, F~ (x) I with state xi~ (x) xi_aux, grouped as (A, auxA)(B, auxB)."""
    if s_tilde.flavor != "tensor":
        raise ValueError("ampliation needs a tensor-split model")
    xi_aux = mc.as_cmatrix(xi_aux, "xi_aux").reshape(-1)
    if xi_aux.shape[0] != aux_a * aux_b:
        raise ShapeError(f"xi_aux has length {xi_aux.shape[0]}, expected {aux_a * aux_b}")
    err = abs(np.linalg.norm(xi_aux) - 1)
    if err > tol:
        raise ValidationError("aux norm", err, f"xi_aux is not a unit vector (residual {err:.3e})")
    da, db = s_tilde.dims
    state = np.kron(s_tilde.state, xi_aux).reshape(da, db, aux_a, aux_b).transpose(0, 2, 1, 3).reshape(-1)
    return md.Model(
        "tensor",
        (da * aux_a, db * aux_b),
        s_tilde.alice.map(lambda e: np.kron(e, np.eye(aux_a))),
        s_tilde.bob.map(lambda f: np.kron(f, np.eye(aux_b))),
        state,
    )


# --------------------------------------------------------------------------
# unitary equivalence


class Equivalence(NamedTuple):
    equivalent: bool
    unitary: np.ndarray
    residual: float
    reason: str


def _intertwiner_residual(u, g1, g2, x1, x2):
    r = float(np.linalg.norm(u @ x1 - x2))
    for a, b in zip(g1, g2):
        r = max(r, mc.fro(u @ a - b @ u))
    return r


def unitary_equivalent(s1, s2, tol=mc.DEFAULT_TOL, seed=0, max_word_len=8):
    """Search for a unitary U with U xi1 = xi2 and U g1 U^dagger = g2 on all generators.

    The map is fixed on the cyclic subspace of xi1 (where it is forced); on its
    complement a unitary intertwiner is taken as the polar factor of a random
    element of the intertwiner space.
    """
    c1, c2 = s1.as_commuting(), s2.as_commuting()
    n = c1.total_dim
    if c2.total_dim != n:
        raise ShapeError(f"dimension mismatch: {n} vs {c2.total_dim}")
    g1 = c1.alice.generators() + c1.bob.generators()
    g2 = c2.alice.generators() + c2.bob.generators()
    if len(g1) != len(g2):
        raise ShapeError("models have different numbers of operators")
    x1, x2 = c1.state, c2.state
    fail = lambda reason, r=np.inf: Equivalence(False, np.zeros((n, n), dtype=complex), float(r), reason)  # noqa: E731

    gens = [np.block([[a, np.zeros((n, n))], [np.zeros((n, n)), b]]) for a, b in zip(g1, g2)]
    alg = md.word_algebra(gens, 2 * n, max_word_len, tol)
    m1 = np.array([w[:n, :n] @ x1 for w in alg]).T
    m2 = np.array([w[n:, n:] @ x2 for w in alg]).T
    gram_gap = mc.fro(mc.dag(m1) @ m1 - mc.dag(m2) @ m2)
    if gram_gap > 1e3 * tol * max(1.0, mc.fro(mc.dag(m1) @ m1)):
        return fail("measured vectors have different Gram matrices", gram_gap)
    k1, k2 = mc.orth(m1, 1e3 * tol), mc.orth(m2, 1e3 * tol)
    if k1.shape[1] != k2.shape[1]:
        return fail("cyclic subspaces have different dimensions")
    u0 = m2 @ np.linalg.pinv(m1, rcond=1e3 * tol) @ (k1 @ mc.dag(k1))
    q1, q2 = mc.null_space(mc.dag(k1), tol), mc.null_space(mc.dag(k2), tol)
    u = u0
    if q1.shape[1]:
        h1 = [mc.dag(q1) @ a @ q1 for a in g1]
        h2 = [mc.dag(q2) @ b @ q2 for b in g2]
        d = q1.shape[1]
        eye = np.eye(d)
        rows = []
        for a, b in zip(h1, h2):
            for ga, gb in ((a, b), (mc.dag(a), mc.dag(b))):
                # row-major vec(X A - B X) = (I (x) A^T - B (x) I) vec(X)
                rows.append(np.kron(eye, ga.T) - np.kron(gb, eye))
        ns = mc.null_space(np.vstack(rows), tol) if rows else np.eye(d * d, dtype=complex)
        if ns.shape[1] == 0:
            return fail("complementary representations are not equivalent")
        rng = np.random.default_rng(seed)
        w = None
        for _ in range(8):
            z = rng.standard_normal(ns.shape[1]) + 1j * rng.standard_normal(ns.shape[1])
            cand = (ns @ z).reshape(d, d)
            sv = np.linalg.svd(cand, compute_uv=False)
            if sv[-1] > 1e3 * tol * sv[0]:
                w = mc.polar_unitary(cand)
                break
        if w is None:
            return fail("no invertible intertwiner on the complement")
        u = u0 + q2 @ w @ mc.dag(q1)
    res = max(_intertwiner_residual(u, g1, g2, x1, x2), mc.unitarity_residual(u))
    if res > 1e3 * tol:
        return fail("assembled map does not intertwine", res)
    return Equivalence(True, u, res, "ok")


# --------------------------------------------------------------------------
# SOM dilations


@dataclass(frozen=True, eq=False)
class BlockIsometry:
    """Blocks ``blocks[a, x]`` (k x h) of an isometry H^X -> K^A."""

    blocks: np.ndarray

    @property
    def matrix(self):
        A, X, k, h = self.blocks.shape
        return self.blocks.transpose(0, 2, 1, 3).reshape(A * k, X * h)

    def gram(self):
        """The SOM blocks E_{x,x',a,a'} = V_{a,x}^dagger V_{a',x'}."""
        return np.einsum("axki,bykj->xyabij", self.blocks.conj(), self.blocks)

    def residual(self):
        return mc.isometry_residual(self.matrix)


def som_isometry(e, tol=mc.DEFAULT_TOL):
    """Factor a SOM as E_{x,x',a,a'} = V_{a,x}^dagger V_{a',x'} with V an isometry."""
    md.check_family(e, tol, "SOM")
    if not e.is_som:
        e = e.as_som()
    X, _, A, _, h, _ = e.blocks.shape
    g = mc.gram_factor(e.som_matrix(), tol)
    k = g.shape[0]
    v = BlockIsometry(g.reshape(k, X, A, h).transpose(2, 1, 0, 3))
    r = v.residual()
    if r > 1e3 * tol * np.sqrt(X * h):
        raise ValidationError("isometry", r, f"Gram factor is not an isometry (residual {r:.3e})")
    return v


class USOMDilation(NamedTuple):
    w: np.ndarray
    unitaries: np.ndarray  # U[a, x], each acting on L = H (+) K
    unitarity_residual: float
    reconstruction_residual: float

    def som(self):
        """The USOM U_{a,x}^dagger U_{a',x'} on L."""
        u = self.unitaries
        return md.MeasurementFamily("usom", np.einsum("axij,byik->xyabjk", u.conj(), u))

    def block_matrix(self):
        A, X, n, _ = self.unitaries.shape
        return self.unitaries.transpose(0, 2, 1, 3).reshape(A * n, X * n)


def usom_dilate(e, tol=mc.DEFAULT_TOL):
    """Dilate a SOM with X = A to a unistochastic one: E = W^dagger U_{a,x}^dagger U_{a',x'} W.

    With V = [V_{a,x}] from ``som_isometry`` and D = (I - V V^dagger)^{1/2} on K^A,
    the operator [[0, -V^dagger], [V, D]] on H^X (+) K^X is unitary.  Regrouping
    it by input/output label gives, on L = H (+) K,

        U_{a,x}(h, k) = (-V_{x,a}^dagger k, V_{a,x} h + D_{a,x} k),

    i.e. the H-then-K domain order with the per-block swap that moves the -V^dagger
    corner into the H row.  W embeds H as h -> (h, 0).
    """
    if not e.is_som:
        e = e.as_som()
    X, _, A, _, h, _ = e.blocks.shape
    if X != A:
        raise ShapeError(f"unistochastic dilation needs |X| = |A|, got {X} and {A}")
    v = som_isometry(e, tol)
    k = v.blocks.shape[2]
    big = v.matrix
    # V is an isometry, so I - V V^dagger is a projection and equals its own square root
    dmat = np.eye(A * k) - big @ mc.dag(big)
    d_blocks = dmat.reshape(A, k, A, k).transpose(0, 2, 1, 3)
    n = h + k
    u = np.zeros((A, X, n, n), dtype=complex)
    for a in range(A):
        for x in range(X):
            u[a, x, :h, h:] = -mc.dag(v.blocks[x, a])
            u[a, x, h:, :h] = v.blocks[a, x]
            u[a, x, h:, h:] = d_blocks[a, x]
    w = np.zeros((n, h), dtype=complex)
    w[:h, :h] = np.eye(h)
    full = u.transpose(0, 2, 1, 3).reshape(A * n, X * n)
    unit = mc.unitarity_residual(full)
    uw = np.einsum("axij,jk->axik", u, w)
    recon = np.einsum("axij,byik->xyabjk", uw.conj(), uw)
    rec = float(np.max(np.linalg.norm(recon - e.blocks, axis=(-2, -1))))
    return USOMDilation(w, u, unit, rec)


def random_som(rng, n_inputs, n_outputs, h, k=None):
    """SOM E_{x,x',a,a'} = V_{a,x}^dagger V_{a',x'} from a random isometry H^X -> K^A."""
    if k is None:
        k = -(-n_inputs * h // n_outputs)
    if n_outputs * k < n_inputs * h:
        raise ShapeError("K^A is too small to receive an isometry from H^X")
    big = mc.random_isometry(rng, n_outputs * k, n_inputs * h)
    blocks = big.reshape(n_outputs, k, n_inputs, h).transpose(0, 2, 1, 3)
    return md.som(BlockIsometry(blocks).gram())
