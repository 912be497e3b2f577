"""Schur-multiplier channels of finite-group representations and their self-test hypotheses."""

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import dilation as dl
from . import matcore as mc
from . import models as md
from .errors import NotEquivalent, ShapeError, ValidationError

OMEGA = np.exp(2j * np.pi / 3)


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    """Group given by its multiplication table ``table[s, t] = st``."""

    table: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        t = np.asarray(self.table, dtype=int)
        n = t.shape[0]
        if t.shape != (n, n) or t.min() < 0 or t.max() >= n:
            raise ShapeError("multiplication table must be square with entries in 0..n-1")
        ids = [e for e in range(n) if np.array_equal(t[e], np.arange(n)) and np.array_equal(t[:, e], np.arange(n))]
        if len(ids) != 1:
            raise ValueError("multiplication table has no identity")
        for s in range(n):
            if sorted(t[s]) != list(range(n)):
                raise ValueError("multiplication table is not a Latin square")
        if not _check_associative(t):
            raise ValueError("multiplication is not associative")
        object.__setattr__(self, "table", t)
        object.__setattr__(self, "identity", ids[0])
        inv = np.array([int(np.flatnonzero(t[s] == ids[0])[0]) for s in range(n)])
        object.__setattr__(self, "inverse", inv)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(n)))

    @property
    def order(self):
        return self.table.shape[0]

    def mul(self, s, t):
        return int(self.table[s, t])


def _check_associative(t):
    n = t.shape[0]
    for s in range(n):
        for u in range(n):
            if not np.array_equal(t[t[s], u], t[s, t[:, u]]):
                return False
    return True


def permutation_group(perms, labels=()):
    """Group of permutations (tuples of images) with (st)(i) = s(t(i))."""
    perms = [tuple(p) for p in perms]
    index = {p: i for i, p in enumerate(perms)}
    n = len(perms)
    table = np.empty((n, n), dtype=int)
    for i, s in enumerate(perms):
        for j, t in enumerate(perms):
            st = tuple(s[t[k]] for k in range(len(t)))
            if st not in index:
                raise ValueError("permutations are not closed under composition")
            table[i, j] = index[st]
    return FiniteGroup(table, tuple(labels))


# the elements in the order used throughout: e, (123), (132), (12), (23), (13)
S3_LABELS = ("e", "(123)", "(132)", "(12)", "(23)", "(13)")
S3_PERMS = ((0, 1, 2), (1, 2, 0), (2, 0, 1), (1, 0, 2), (0, 2, 1), (2, 1, 0))


def s3_group():
    return permutation_group(S3_PERMS, S3_LABELS)


def trivial_group():
    return FiniteGroup(np.zeros((1, 1), dtype=int), ("e",))


@dataclass(frozen=True, eq=False)
class GroupRep:
    group: FiniteGroup
    matrices: np.ndarray

    @property
    def dim(self):
        return self.matrices.shape[-1]

    def __call__(self, s):
        return self.matrices[s]


def rep_residuals(rep):
    g = rep.group
    n = g.order
    m = rep.matrices
    hom = max(mc.fro(m[s] @ m[t] - m[g.mul(s, t)]) for s in range(n) for t in range(n))
    return {
        "homomorphism": hom,
        "identity": mc.fro(m[g.identity] - np.eye(rep.dim)),
        "unitarity": max(mc.unitarity_residual(u) for u in m),
    }


def make_rep(group, matrices, tol=mc.DEFAULT_TOL):
    m = mc.as_cmatrix(matrices, "matrices")
    if m.ndim != 3 or m.shape[0] != group.order or m.shape[1] != m.shape[2]:
        raise ShapeError(f"expected {group.order} square matrices, got shape {m.shape}")
    rep = GroupRep(group, m)
    v = md._verdict(rep_residuals(rep), tol)
    if not v.ok:
        raise ValidationError(v.constraint, v.residual, f"not a unitary representation: {v.constraint} residual {v.residual:.3e}")
    return rep


def s3_irrep(tol=mc.DEFAULT_TOL):
    """The two-dimensional irreducible representation of S_3."""
    w, wb = OMEGA, np.conj(OMEGA)
    mats = [
        np.eye(2),
        np.diag([w, wb]),
        np.diag([wb, w]),
        np.array([[0, 1], [1, 0]]),
        np.array([[0, wb], [w, 0]]),
        np.array([[0, w], [wb, 0]]),
    ]
    rep = make_rep(s3_group(), mats, tol)
    if len(mc.commutant_basis(list(rep.matrices), 2, tol)) != 1:
        raise ValidationError("irreducibility", 1.0, "representation is reducible")
    return rep


def trivial_rep(group):
    return GroupRep(group, np.ones((group.order, 1, 1), dtype=complex))


def rotated_psi(theta, alpha, beta, tol=mc.DEFAULT_TOL):
    """alpha e_theta (x) e_theta + beta f_theta (x) f_theta with e_theta = R_y(theta) e_0, f_theta = R_y(theta) e_1."""
    err = abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1)
    if err > tol:
        raise ValidationError("normalization", err, f"|alpha|^2 + |beta|^2 = {1 + err:.12g} != 1")
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    e = np.array([c, s], dtype=complex)
    f = np.array([-s, c], dtype=complex)
    return alpha * np.kron(e, e) + beta * np.kron(f, f)


def schmidt_coefficients(psi, dims):
    return np.linalg.svd(np.asarray(psi).reshape(dims), compute_uv=False)


@dataclass(frozen=True, eq=False)
class SchurData:
    """u(s, t), the state, and the symbol C[(s,t),(s',t')] = u(s^-1 s', t^-1 t') of Theta(u).

    Theta(u) multiplies e_{s,s'} (x) e_{t,t'} by C[(s,t),(s',t')], so its Choi matrix
    sum_{i,j} C_ij E_ij (x) E_ij is supported on span{e_i (x) e_i} where it equals C.
    """

    u: np.ndarray
    psi: np.ndarray
    symbol: np.ndarray
    residuals: dict

    def choi(self):
        """The full Choi matrix (size |G|^4; for small groups only)."""
        n = self.symbol.shape[0]
        out = np.zeros((n * n, n * n), dtype=complex)
        idx = np.arange(n) * (n + 1)
        out[np.ix_(idx, idx)] = self.symbol
        return out

    def apply(self, x):
        """Theta(u)(X) for X on l^2(G) (x) l^2(G)."""
        return self.symbol * x


def schur_channel(pi_a, pi_b, psi, tol=mc.DEFAULT_TOL):
    if pi_a.group is not pi_b.group and not np.array_equal(pi_a.group.table, pi_b.group.table):
        raise ShapeError("representations belong to different groups")
    g = pi_a.group
    psi = mc.as_cmatrix(psi, "psi").reshape(-1)
    if psi.shape[0] != pi_a.dim * pi_b.dim:
        raise ShapeError(f"psi has length {psi.shape[0]}, expected {pi_a.dim * pi_b.dim}")
    err = abs(np.linalg.norm(psi) - 1)
    if err > tol:
        raise ValidationError("state norm", err, f"psi is not a unit vector (residual {err:.3e})")
    p = psi.reshape(pi_a.dim, pi_b.dim)
    # u(s,t) = <(pi(s) (x) rho(t)) psi, psi> = sum conj(p_ij) pi(s)_ik p_kl rho(t)_jl
    u = np.einsum("ij,sik,kl,tjl->st", p.conj(), pi_a.matrices, p, pi_b.matrices)
    n = g.order
    inv = g.inverse
    ss = np.array([[g.mul(inv[s], sp) for sp in range(n)] for s in range(n)])
    symbol = u[ss[:, None, :, None], ss[None, :, None, :]].reshape(n * n, n * n)
    diag = np.diag(symbol)
    res = {
        "u(e,e)": abs(u[g.identity, g.identity] - 1),
        "unitality": float(np.max(np.abs(diag - 1))),
        "trace preservation": float(np.max(np.abs(diag - 1))),
        "choi hermiticity": mc.hermiticity_residual(symbol),
        "choi positivity": max(0.0, -mc.min_eigenvalue(symbol)),
    }
    data = SchurData(u, psi, symbol, res)
    v = md._verdict(res, 1e3 * tol)
    if not v.ok:
        raise ValidationError(v.constraint, v.residual, f"Schur channel invalid: {v.constraint} residual {v.residual:.3e}")
    return data


class Hypotheses(NamedTuple):
    marginally_cyclic: bool
    extremality_rank: int
    verdict: bool
    schmidt: np.ndarray


def selftest_hypotheses(pi_a, pi_b, psi, tol=mc.DEFAULT_TOL):
    """Marginal cyclicity (full Schmidt rank, square case) and the rank of span{(pi(s) (x) rho(t)) psi psi* (...)^*}."""
    da, db = pi_a.dim, pi_b.dim
    psi = mc.as_cmatrix(psi, "psi").reshape(-1)
    sc = schmidt_coefficients(psi, (da, db))
    rank = int(np.sum(sc > tol * max(sc[0], 1e-300)))
    cyclic = da == db and rank == da
    vecs = []
    for s in range(pi_a.group.order):
        for t in range(pi_b.group.order):
            v = np.kron(pi_a(s), pi_b(t)) @ psi
            vecs.append(np.outer(v, v.conj()).reshape(-1))
    sv = np.linalg.svd(np.array(vecs), compute_uv=False)
    ext = int(np.sum(sv > 1e3 * tol * sv[0]))
    return Hypotheses(bool(cyclic), ext, bool(cyclic and ext == (da * db) ** 2), sc)


def usom_family(rep):
    """E_{s,s',g,g'} = delta_{s,g} delta_{s',g'} pi(s^-1 s')."""
    g = rep.group
    n = g.order
    d = rep.dim
    blocks = np.zeros((n, n, n, n, d, d), dtype=complex)
    for s in range(n):
        for sp in range(n):
            blocks[s, sp, s, sp] = rep(g.mul(g.inverse[s], sp))
    return md.MeasurementFamily("usom", blocks)


def usom_model(pi_a, pi_b, psi, tol=mc.DEFAULT_TOL):
    m = md.Model("tensor", (pi_a.dim, pi_b.dim), usom_family(pi_a), usom_family(pi_b), psi)
    return md.check_model(m, tol)


def diagonal_unitaries(family, identity, tol=mc.DEFAULT_TOL):
    """U_s = E_{e,s,e,s} (normalized so that U_e = I) and the residual of E_{s,s',g,g'} = delta delta U_s^* U_s'."""
    b = family.blocks
    n = b.shape[0]
    us = np.array([b[identity, s, identity, s] for s in range(n)])
    worst = 0.0
    for s in range(n):
        for sp in range(n):
            for g in range(n):
                for gp in range(n):
                    want = mc.dag(us[s]) @ us[sp] if (g == s and gp == sp) else 0
                    worst = max(worst, mc.fro(b[s, sp, g, gp] - want))
    unit = max(mc.unitarity_residual(u) for u in us)
    return us, {"diagonal form": worst, "unitarity": unit, "U_e": mc.fro(us[identity] - np.eye(b.shape[-1]))}


def _intertwiner(sig, target, tol):
    """Unitary W with W sig(s) = target(s) W, or None."""
    n, d = sig.shape[-1], target.shape[-1]
    if n != d:
        return None
    eye = np.eye(n)
    rows = [np.kron(eye, a.T) - np.kron(b, eye) for a, b in zip(sig, target)]
    ns = mc.null_space(np.vstack(rows), 1e3 * tol)
    if ns.shape[1] == 0:
        return None
    w = ns[:, 0].reshape(d, n)
    w = w / np.sqrt(np.trace(mc.dag(w) @ w).real / n)
    if mc.unitarity_residual(w) > 1e3 * tol:
        return None
    # unitarize so the residuals of the assembled isometry stay at roundoff
    return mc.polar_unitary(w)


def _local_isometry(us, target, state_weights, tol, seed):
    """T: H -> H_target (x) aux following the block decomposition of the algebra of ``us``."""
    h = us.shape[-1]
    d = target.shape[-1]
    blocks = mc.decompose_algebra(list(us), h, tol, seed)
    pieces = []
    aux = 0
    for blk in blocks:
        p = blk.isometry
        weight = state_weights(p)
        if weight > tol:
            sig = np.array([blk.restrict(u) for u in us])
            w = _intertwiner(sig, target, tol)
            if w is None:
                raise NotEquivalent(f"a block of dimension {blk.n} carrying weight {weight:.3e} is not equivalent to the ideal representation")
            pieces.append(("lambda", blk, w, aux))
            aux += blk.k
        else:
            pieces.append(("other", blk, None, aux))
            aux += blk.n * blk.k
    t = np.zeros((d, aux, h), dtype=complex)
    eta = mc.basis_vector(0, d)
    for kind, blk, w, off in pieces:
        coords = mc.dag(blk.isometry)  # h -> C^n (x) C^k
        if kind == "lambda":
            c = coords.reshape(blk.n, blk.k, h)
            t[:, off : off + blk.k, :] = np.einsum("pm,mkh->pkh", w, c)
        else:
            t[:, off : off + blk.n * blk.k, :] = np.einsum("p,jh->pjh", eta, coords)
    return t.reshape(d * aux, h), len(blocks)


def schur_dilation(m, ideal, tol=mc.DEFAULT_TOL, seed=0):
    """Build the local isometries of the self-test for a full-rank diagonal unitary model and verify them.

    ``ideal`` is ``(pi_a, pi_b, psi)``; ``m`` must be a tensor model whose
    families have the diagonal form E_{s,s',g,g'} = delta delta U_s^* U_s'.
    """
    pi_a, pi_b, psi = ideal
    group = pi_a.group
    if m.flavor != "tensor":
        raise ValueError("schur_dilation needs a tensor-split model")
    n = group.order
    for fam in (m.alice, m.bob):
        if not fam.is_som or fam.n_inputs != n or fam.n_outputs != n:
            raise ShapeError(f"families must be SOMs indexed by the {n} group elements")
    md.check_model(m, tol)
    loose = 1e3 * tol
    ua, res_a = diagonal_unitaries(m.alice, group.identity, tol)
    ub, res_b = diagonal_unitaries(m.bob, group.identity, tol)
    diag = {f"alice {k}": v for k, v in res_a.items()}
    diag.update({f"bob {k}": v for k, v in res_b.items()})
    bad = {k: v for k, v in diag.items() if v > loose}
    if bad:
        name = max(bad, key=bad.get)
        raise ValidationError(name, bad[name], f"model is not a diagonal unitary model ({name} residual {bad[name]:.3e})")
    xi = m.state.reshape(m.dims)
    rho_a = xi @ mc.dag(xi)
    rho_b = xi.T @ xi.conj()
    rank = {"alice": mc.min_eigenvalue(rho_a), "bob": mc.min_eigenvalue(rho_b)}
    if min(rank.values()) <= tol:
        side = min(rank, key=rank.get)
        raise ValidationError("full rank", rank[side], f"{side} reduced density is not full rank (smallest eigenvalue {rank[side]:.3e})")
    # correlation agreement, in Gram form: <(U_s' (x) V_t') xi, (U_s (x) V_t) xi> against the ideal
    vm = np.einsum("sij,jk,tlk->stil", ua, xi, ub).reshape(n * n, -1)
    pm = psi.reshape(pi_a.dim, pi_b.dim)
    vi = np.einsum("sij,jk,tlk->stil", pi_a.matrices, pm, pi_b.matrices).reshape(n * n, -1)
    gap = float(np.max(np.abs(vm.conj() @ vm.T - vi.conj() @ vi.T)))
    if gap > loose:
        raise ValidationError("correlation", gap, f"model does not produce the ideal channel (gap {gap:.3e})")

    def weights_a(p):
        return float(np.linalg.norm(mc.dag(p) @ xi) ** 2)

    def weights_b(p):
        return float(np.linalg.norm(xi @ p.conj()) ** 2)

    ta, na = _local_isometry(ua, pi_a.matrices, weights_a, tol, seed)
    tb, nb = _local_isometry(ub, pi_b.matrices, weights_b, tol, seed)
    ideal_model = usom_model(pi_a, pi_b, psi, tol)
    rep = dl.verify_local_dilation(m, ideal_model, ta, tb, tol)
    rep.extra.update({"correlation_gap": gap, "blocks": [na, nb], "diagonal_residuals": diag})
    return rep


def multiplicity_model(pi_a, pi_b, psi, weights, rng=None):
    """Ideal model ampliated by C^k on each side with state sum_i sqrt(w_i) psi (x) e_i (x) e_i, optionally locally conjugated."""
    k = len(weights)
    aux = np.zeros(k * k, dtype=complex)
    for i, w in enumerate(weights):
        aux[i * k + i] = np.sqrt(w)
    m = dl.ampliate(usom_model(pi_a, pi_b, psi), k, k, aux)
    if rng is not None:
        ua = mc.random_unitary(rng, m.dims[0])
        ub = mc.random_unitary(rng, m.dims[1])
        m = md.conjugate(m, ua, ub)
    return m
