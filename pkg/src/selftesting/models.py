"""Measurement families, models, correlations and their structural constructions.

Array layouts used throughout the package:

* POVM/PVM blocks: shape ``(X, A, h, h)``, ``blocks[x, a] = E_{x,a}``.
* SOM/USOM blocks: shape ``(X, X, A, A, h, h)``, ``blocks[x, x', a, a'] = E_{x,x',a,a'}``.
* NS table: ``p[x, y, a, b]``.
* QNS table: ``G[x, x', y, y', a, a', b, b'] = <E_{x,x',a,a'} F_{y,y',b,b'} xi, xi>``.
* CQNS table: ``G[x, y, a, a', b, b']``.

Tensor-split models order the joint space as C^dA (x) C^dB.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import matcore as mc
from .errors import NotConverged, ShapeError, ValidationError

KINDS = ("povm", "pvm", "som", "usom")


class Validity(NamedTuple):
    ok: bool
    constraint: str
    residual: float

    def __bool__(self):
        return self.ok


def _verdict(checks, tol):
    """Fold ``{name: residual}`` into a Validity reporting the worst offender."""
    name, worst = max(checks.items(), key=lambda kv: kv[1]) if checks else ("none", 0.0)
    return Validity(bool(worst <= tol), name, float(worst))


# --------------------------------------------------------------------------
# measurement families


@dataclass(frozen=True, eq=False)
class MeasurementFamily:
    kind: str
    blocks: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        b = mc.as_cmatrix(self.blocks, "blocks")
        want = 4 if self.kind in ("povm", "pvm") else 6
        if b.ndim != want or b.shape[-1] != b.shape[-2]:
            raise ShapeError(f"{self.kind} blocks must have {want} axes ending in a square block, got {b.shape}")
        if want == 6 and (b.shape[0] != b.shape[1] or b.shape[2] != b.shape[3]):
            raise ShapeError(f"SOM blocks must have shape (X, X, A, A, h, h), got {b.shape}")
        object.__setattr__(self, "blocks", b)

    @property
    def is_som(self):
        return self.kind in ("som", "usom")

    @property
    def n_inputs(self):
        return self.blocks.shape[0]

    @property
    def n_outputs(self):
        return self.blocks.shape[1] if not self.is_som else self.blocks.shape[2]

    @property
    def dim(self):
        return self.blocks.shape[-1]

    def element(self, x, a):
        """E_{x,a}, or the diagonal block E_{x,x,a,a} of a SOM."""
        if self.is_som:
            return self.blocks[x, x, a, a]
        return self.blocks[x, a]

    def as_som(self):
        """Diagonal SOM E_{x,x',a,a'} = delta_{x,x'} delta_{a,a'} E_{x,a} (identity on SOMs)."""
        if self.is_som:
            return self
        X, A, h, _ = self.blocks.shape
        out = np.zeros((X, X, A, A, h, h), dtype=complex)
        for x in range(X):
            for a in range(A):
                out[x, x, a, a] = self.blocks[x, a]
        return MeasurementFamily("som", out)

    def som_matrix(self):
        """The (X*A*h)-square matrix with (x,a) row blocks and (x',a') column blocks."""
        b = self.as_som().blocks
        X, _, A, _, h, _ = b.shape
        return b.transpose(0, 2, 4, 1, 3, 5).reshape(X * A * h, X * A * h)

    def generators(self):
        """All operator blocks, as a flat list."""
        return list(self.blocks.reshape(-1, self.dim, self.dim))

    def map(self, f):
        """Apply ``f`` to every block; the kind is kept."""
        flat = [f(m) for m in self.blocks.reshape(-1, self.dim, self.dim)]
        d = flat[0].shape[0]
        return MeasurementFamily(self.kind, np.array(flat).reshape(self.blocks.shape[:-2] + (d, d)))


def povm(blocks):
    return MeasurementFamily("povm", blocks)


def pvm(blocks):
    return MeasurementFamily("pvm", blocks)


def som(blocks):
    return MeasurementFamily("som", blocks)


def pvm_from_observables(observables):
    """Spectral PVMs of +-1 observables: E_{x,0} = (I + A_x)/2, E_{x,1} = (I - A_x)/2."""
    obs = [mc.as_cmatrix(o) for o in observables]
    eye = np.eye(obs[0].shape[0])
    return pvm(np.array([[(eye + o) / 2, (eye - o) / 2] for o in obs]))


def observables(family):
    """A_x = E_{x,0} - E_{x,1} for a binary-output family."""
    if family.n_outputs != 2:
        raise ShapeError("observables need exactly two outcomes")
    return [family.element(x, 0) - family.element(x, 1) for x in range(family.n_inputs)]


def family_residuals(f):
    """All defining-constraint residuals of ``f`` (relative to the block size)."""
    h = f.dim
    scale = np.sqrt(h)
    eye = np.eye(h)
    checks = {}
    if not f.is_som:
        herm = max(mc.hermiticity_residual(e) for e in f.generators())
        checks["hermiticity"] = herm / scale
        checks["positivity"] = max(0.0, -min(mc.min_eigenvalue(e) for e in f.generators()))
        checks["completeness"] = max(mc.fro(f.blocks[x].sum(axis=0) - eye) for x in range(f.n_inputs)) / scale
        if f.kind == "pvm":
            checks["idempotence"] = max(mc.fro(e @ e - e) for e in f.generators()) / scale
        return checks
    m = f.som_matrix()
    checks["hermiticity"] = mc.hermiticity_residual(m) / scale
    checks["positivity"] = max(0.0, -mc.min_eigenvalue(m))
    X = f.n_inputs
    tr_a = np.einsum("xyaaij->xyij", f.blocks)
    target = np.einsum("xy,ij->xyij", np.eye(X), eye)
    checks["partial-trace"] = float(np.max(np.linalg.norm(tr_a - target, axis=(2, 3)))) / scale
    if f.kind == "usom":
        if f.n_inputs != f.n_outputs:
            checks["usom-square"] = 1.0
        else:
            # E = U^dagger U with U unitary on H^X iff the Gram matrix has rank <= h
            w = np.linalg.eigvalsh((m + mc.dag(m)) / 2)[::-1]
            checks["usom-rank"] = float(max(0.0, w[h])) if len(w) > h else 0.0
    return checks


def validate(f, tol=mc.DEFAULT_TOL):
    """Check ``f`` against the invariants of its kind; reports the worst constraint."""
    return _verdict(family_residuals(f), tol)


def check_family(f, tol=mc.DEFAULT_TOL, who="family"):
    v = validate(f, tol)
    if not v.ok:
        raise ValidationError(v.constraint, v.residual, f"{who}: {v.constraint} violated (residual {v.residual:.3e})")
    return f


# --------------------------------------------------------------------------
# models


@dataclass(frozen=True, eq=False)
class Model:
    """Alice and Bob measurement families with a shared unit state vector.

    ``flavor`` is ``"tensor"`` (``dims = (dA, dB)``, state on C^dA (x) C^dB) or
    ``"commuting"`` (``dims = (dH,)``, all operators act on C^dH).
    """

    flavor: str
    dims: tuple
    alice: MeasurementFamily
    bob: MeasurementFamily
    state: np.ndarray

    def __post_init__(self):
        if self.flavor not in ("tensor", "commuting"):
            raise ValueError(f"unknown flavor {self.flavor!r}")
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        state = mc.as_cmatrix(self.state, "state").reshape(-1)
        object.__setattr__(self, "state", state)
        if self.flavor == "tensor":
            if len(dims) != 2 or self.alice.dim != dims[0] or self.bob.dim != dims[1]:
                raise ShapeError(f"tensor model dims {dims} do not match operator sizes {self.alice.dim}, {self.bob.dim}")
        else:
            if len(dims) != 1 or self.alice.dim != dims[0] or self.bob.dim != dims[0]:
                raise ShapeError(f"commuting model dim {dims} does not match operator sizes")
        if state.shape[0] != self.total_dim:
            raise ShapeError(f"state has length {state.shape[0]}, expected {self.total_dim}")

    @property
    def total_dim(self):
        return int(np.prod(self.dims))

    def alice_op(self, m):
        if self.flavor == "tensor":
            return np.kron(m, np.eye(self.dims[1]))
        return m

    def bob_op(self, m):
        if self.flavor == "tensor":
            return np.kron(np.eye(self.dims[0]), m)
        return m

    def as_commuting(self):
        if self.flavor == "commuting":
            return self
        return Model("commuting", (self.total_dim,), self.alice.map(self.alice_op), self.bob.map(self.bob_op), self.state)

    def pair_vector(self, ea, fb):
        """(E (x) F) xi for local operators E, F (or E F xi in the commuting flavor)."""
        if self.flavor == "tensor":
            psi = self.state.reshape(self.dims)
            return (ea @ psi @ fb.T).reshape(-1)
        return ea @ (fb @ self.state)


def model_residuals(m):
    checks = {f"alice {k}": v for k, v in family_residuals(m.alice).items()}
    checks.update({f"bob {k}": v for k, v in family_residuals(m.bob).items()})
    checks["state norm"] = abs(np.linalg.norm(m.state) - 1.0)
    if m.flavor == "commuting":
        worst = 0.0
        for e in m.alice.generators():
            ne = max(mc.fro(e), 1.0)
            for f in m.bob.generators():
                worst = max(worst, mc.fro(e @ f - f @ e) / (ne * max(mc.fro(f), 1.0)))
        checks["commutation"] = worst
    return checks


def validate_model(m, tol=mc.DEFAULT_TOL):
    return _verdict(model_residuals(m), tol)


def check_model(m, tol=mc.DEFAULT_TOL):
    v = validate_model(m, tol)
    if not v.ok:
        raise ValidationError(v.constraint, v.residual, f"invalid model: {v.constraint} violated (residual {v.residual:.3e})")
    return m


def conjugate(m, ua, ub):
    """Local unitary conjugate of a tensor model: operators U E U^dagger, state (U_A (x) U_B) xi."""
    if m.flavor != "tensor":
        raise ValueError("local conjugation needs a tensor-split model")
    return Model(
        "tensor",
        m.dims,
        m.alice.map(lambda e: ua @ e @ mc.dag(ua)),
        m.bob.map(lambda f: ub @ f @ mc.dag(ub)),
        np.kron(ua, ub) @ m.state,
    )


# --------------------------------------------------------------------------
# correlations


@dataclass(frozen=True, eq=False)
class Correlation:
    kind: str
    table: np.ndarray

    def __post_init__(self):
        want = {"ns": 4, "qns": 8, "cqns": 6}
        if self.kind not in want:
            raise ValueError(f"unknown correlation kind {self.kind!r}")
        t = np.asarray(self.table)
        t = t.astype(float) if self.kind == "ns" and not np.iscomplexobj(t) else t.astype(complex)
        if self.kind == "ns" and np.iscomplexobj(t):
            if np.max(np.abs(t.imag), initial=0.0) > 1e-9:
                raise ValueError("NS table must be real")
            t = t.real.copy()
        if t.ndim != want[self.kind]:
            raise ShapeError(f"{self.kind} table needs {want[self.kind]} axes, got {t.ndim}")
        if not np.all(np.isfinite(t)):
            raise ValueError("correlation table contains NaN or Inf")
        object.__setattr__(self, "table", t)

    def synchronous(self, tol=mc.DEFAULT_TOL):
        """p(a,b|x,x) <= tol whenever a != b."""
        return synchronicity_residual(self) <= tol


def synchronicity_residual(c):
    p = c.table
    X, Y, A, B = p.shape
    worst = 0.0
    for x in range(min(X, Y)):
        off = p[x, x] * (1 - np.eye(A, B))
        worst = max(worst, float(np.max(np.abs(off))))
    return worst


def ns_residuals(p):
    X, Y, A, B = p.shape
    pa = p.sum(axis=3)  # p(a|x,y)
    pb = p.sum(axis=2)  # p(b|x,y)
    return {
        "positivity": float(max(0.0, -p.min())),
        "normalization": float(np.max(np.abs(p.sum(axis=(2, 3)) - 1.0))),
        "alice marginal": float(np.max(np.abs(pa - pa[:, :1, :]))),
        "bob marginal": float(np.max(np.abs(pb - pb[:1, :, :]))),
    }


def qns_choi(g):
    X, _, Y, _, A, _, B, _ = g.shape
    return g.transpose(0, 2, 4, 6, 1, 3, 5, 7).reshape(X * Y * A * B, X * Y * A * B)


def qns_residuals(g):
    X, _, Y, _, A, _, B, _ = g.shape
    choi = qns_choi(g)
    checks = {
        "hermiticity": mc.hermiticity_residual(choi),
        "complete positivity": max(0.0, -mc.min_eigenvalue(choi)),
    }
    dx, dy = np.eye(X), np.eye(Y)
    tp = np.einsum("xzywaabb->xzyw", g)
    checks["trace preservation"] = float(np.max(np.abs(tp - np.einsum("xz,yw->xzyw", dx, dy))))
    # Sum_a G[x,x',y,y',a,a,b,b'] = delta_{xx'} R(y,y',b,b'), R independent of x
    ga = np.einsum("xzywaabc->xzywbc", g)
    ref_b = ga[0, 0]
    off = ga * (1 - dx)[:, :, None, None, None, None]
    diag = np.array([ga[x, x] - ref_b for x in range(X)])
    checks["no-signalling (Alice)"] = float(max(np.max(np.abs(off)), np.max(np.abs(diag))))
    gb = np.einsum("xzywacbb->xzywac", g)
    ref_a = gb[:, :, 0, 0]
    off = gb * (1 - dy)[None, None, :, :, None, None]
    diag = np.array([gb[:, :, y, y] - ref_a for y in range(Y)])
    checks["no-signalling (Bob)"] = float(max(np.max(np.abs(off)), np.max(np.abs(diag))))
    return checks


def cqns_residuals(g):
    X, Y, A, _, B, _ = g.shape
    choi_blocks = g.transpose(0, 1, 2, 4, 3, 5).reshape(X, Y, A * B, A * B)
    checks = {
        "hermiticity": max(mc.hermiticity_residual(m) for m in choi_blocks.reshape(-1, A * B, A * B)),
        "positivity": max(0.0, -min(mc.min_eigenvalue(m) for m in choi_blocks.reshape(-1, A * B, A * B))),
        "trace": float(np.max(np.abs(np.einsum("xyaabb->xy", g) - 1.0))),
    }
    rho_a = np.einsum("xyacbb->xyac", g)
    rho_b = np.einsum("xyaabc->xybc", g)
    checks["no-signalling (Alice)"] = float(np.max(np.abs(rho_a - rho_a[:, :1])))
    checks["no-signalling (Bob)"] = float(np.max(np.abs(rho_b - rho_b[:1])))
    return checks


def correlation_residuals(c):
    if c.kind == "ns":
        return ns_residuals(c.table)
    if c.kind == "qns":
        return qns_residuals(c.table)
    return cqns_residuals(c.table)


def validate_correlation(c, tol=mc.DEFAULT_TOL):
    return _verdict(correlation_residuals(c), tol)


def check_correlation(c, tol=mc.DEFAULT_TOL):
    v = validate_correlation(c, tol)
    if not v.ok:
        raise ValidationError(v.constraint, v.residual, f"invalid {c.kind} correlation: {v.constraint} violated (residual {v.residual:.3e})")
    return c


def correlation_ns(m, tol=mc.DEFAULT_TOL):
    """p(a,b|x,y) = <E_{x,a} F_{y,b} xi, xi>; SOM families contribute their diagonal blocks."""
    check_model(m, tol)
    X, A = m.alice.n_inputs, m.alice.n_outputs
    Y, B = m.bob.n_inputs, m.bob.n_outputs
    if m.flavor == "tensor":
        psi = m.state.reshape(m.dims)
        ea = np.array([[m.alice.element(x, a) for a in range(A)] for x in range(X)])
        fb = np.array([[m.bob.element(y, b) for b in range(B)] for y in range(Y)])
        # <(E (x) F) psi, psi> = sum conj(psi_ij) E_ik psi_kl F_jl
        p = np.einsum("ij,xaik,kl,ybjl->xyab", psi.conj(), ea, psi, fb).real
    else:
        xi = m.state
        fx = np.array([[m.bob.element(y, b) @ xi for b in range(B)] for y in range(Y)])
        ex = np.array([[mc.dag(m.alice.element(x, a)) @ xi for a in range(A)] for x in range(X)])
        p = np.einsum("xai,ybi->xyab", ex.conj(), fx).real
    return check_correlation(Correlation("ns", p), tol)


def correlation_qns(m, tol=mc.DEFAULT_TOL):
    """G(x,x',y,y',a,a',b,b') = <E_{x,x',a,a'} F_{y,y',b,b'} xi, xi>."""
    check_model(m, tol)
    ea = m.alice.as_som().blocks
    fb = m.bob.as_som().blocks
    if m.flavor == "tensor":
        psi = m.state.reshape(m.dims)
        g = np.einsum("ij,xzacik,kl,ywbdjl->xzywacbd", psi.conj(), ea, psi, fb, optimize=True)
    else:
        xi = m.state
        left = np.einsum("xzacki,k->xzaci", ea.conj(), xi)  # E^dagger xi
        right = np.einsum("ywbdij,j->ywbdi", fb, xi)
        g = np.einsum("xzaci,ywbdi->xzywacbd", left.conj(), right, optimize=True)
    return check_correlation(Correlation("qns", g), tol)


def lift_classical(p, tol=mc.DEFAULT_TOL):
    """G_p[x,x,y,y,a,a,b,b] = p(a,b|x,y), all other entries zero."""
    check_correlation(p, tol)
    t = p.table
    X, Y, A, B = t.shape
    g = np.zeros((X, X, Y, Y, A, A, B, B), dtype=complex)
    for x in range(X):
        for y in range(Y):
            for a in range(A):
                for b in range(B):
                    g[x, x, y, y, a, a, b, b] = t[x, y, a, b]
    return check_correlation(Correlation("qns", g), tol)


def qns_diagonal(g):
    """The NS table sitting on the diagonal of a QNS correlation."""
    t = g.table
    X, _, Y, _, A, _, B, _ = t.shape
    out = np.empty((X, Y, A, B))
    for x in range(X):
        for y in range(Y):
            out[x, y] = np.einsum("aabb->ab", t[x, x, y, y]).real
    return out


# --------------------------------------------------------------------------
# support projections and reductions


def word_algebra(gens, dim, max_word_len=8, tol=mc.DEFAULT_TOL):
    """Orthonormal basis (list of matrices) of the unital algebra spanned by words in ``gens``.

    Words are grown one letter at a time; the span must stop growing at some
    length <= ``max_word_len`` or ``NotConverged`` is raised.
    """
    gens = [mc.as_cmatrix(g) for g in gens]
    gens = gens + [mc.dag(g) for g in gens if mc.hermiticity_residual(g) > tol * max(1.0, mc.fro(g))]
    basis = np.eye(dim, dtype=complex).reshape(1, -1) / np.sqrt(dim)
    frontier = [np.eye(dim, dtype=complex)]
    for _ in range(max_word_len + 1):
        cands = np.array([(w @ g).reshape(-1) for w in frontier for g in gens]) if gens else np.zeros((0, dim * dim))
        if len(cands) == 0:
            return [b.reshape(dim, dim) for b in basis]
        resid = cands - (cands @ basis.conj().T) @ basis
        scale = max(np.max(np.linalg.norm(cands, axis=1)), 1.0)
        _, s, vh = np.linalg.svd(resid, full_matrices=False)
        keep = s > 1e3 * tol * scale
        if not np.any(keep):
            return [b.reshape(dim, dim) for b in basis]
        added = vh[keep]
        basis = np.vstack([basis, added])
        frontier = [v.reshape(dim, dim) for v in added]
    raise NotConverged(f"word algebra still growing at word length {max_word_len} (span dimension {len(basis)})")


@dataclass(frozen=True, eq=False)
class SupportData:
    eps_a: np.ndarray
    eps_b: np.ndarray
    full_rank: bool
    centrally_supported: bool
    reduced: Model


def _support_projection(algebra, xi, tol):
    dim = len(xi)
    comm = mc.commutant_basis(algebra, dim, tol)
    orbit = np.array([c @ xi for c in comm]).T
    return mc.range_projection(orbit, tol)


def support_data(m, max_word_len=8, tol=mc.DEFAULT_TOL):
    """Support projections eps_A, eps_B of the vector state and the reduced model."""
    check_model(m, tol)
    c = m.as_commuting()
    dim = c.total_dim
    xi = c.state
    alg_a = word_algebra(c.alice.generators(), dim, max_word_len, tol)
    alg_b = word_algebra(c.bob.generators(), dim, max_word_len, tol)
    eps_a = _support_projection(alg_a, xi, tol)
    eps_b = _support_projection(alg_b, xi, tol)
    eye = np.eye(dim)
    full = mc.fro(eps_a - eye) <= 1e3 * tol and mc.fro(eps_b - eye) <= 1e3 * tol

    def commutes(p, ops):
        return all(mc.fro(p @ e - e @ p) <= 1e3 * tol * max(1.0, mc.fro(e)) for e in ops)

    central = commutes(eps_a, c.alice.generators()) and commutes(eps_b, c.bob.generators())
    if full:
        reduced = m
    else:
        r = eps_a @ eps_b
        q = mc.orth(r, 1e3 * tol)

        def compress(fam):
            g = fam.map(lambda e: mc.dag(q) @ e @ q)
            if g.kind == "pvm" and not validate(g, 1e3 * tol).ok:
                g = MeasurementFamily("povm", g.blocks)
            if g.kind == "usom" and not validate(g, 1e3 * tol).ok:
                g = MeasurementFamily("som", g.blocks)
            return g

        reduced = Model("commuting", (q.shape[1],), compress(c.alice), compress(c.bob), mc.dag(q) @ xi)
    return SupportData(eps_a, eps_b, bool(full), bool(central), reduced)


# --------------------------------------------------------------------------
# splitting commuting models


def split_commuting(m, tol=mc.DEFAULT_TOL, seed=0):
    """Write a commuting model as a convex combination of tensor-split models.

    Returns ``[(weight, Model("tensor", ...)), ...]``; blocks carrying no weight
    of the state are dropped.
    """
    check_model(m, tol)
    c = m.as_commuting()
    dim = c.total_dim
    alice = c.alice.generators()
    bob = c.bob.generators()
    blocks = mc.decompose_algebra(alice, dim, tol, seed)
    out = []
    for blk in blocks:
        w = blk.isometry
        xi = mc.dag(w) @ c.state
        weight = float(np.vdot(xi, xi).real)
        if weight <= tol:
            continue
        fa = c.alice.map(blk.restrict)
        fb = c.bob.map(blk.restrict_commutant)
        # residual of the block form sigma (x) I and I (x) rho
        worst = 0.0
        for e in alice:
            worst = max(worst, mc.fro(mc.dag(w) @ e @ w - np.kron(blk.restrict(e), np.eye(blk.k))))
        for f in bob:
            worst = max(worst, mc.fro(mc.dag(w) @ f @ w - np.kron(np.eye(blk.n), blk.restrict_commutant(f))))
        if worst > 1e3 * tol * max(1.0, max(mc.fro(e) for e in alice + bob)):
            raise ValidationError("commutation", worst, f"Bob operators are not in the commutant of Alice's (residual {worst:.3e})")
        out.append((weight, Model("tensor", (blk.n, blk.k), fa, fb, xi / np.sqrt(weight))))
    return out


# --------------------------------------------------------------------------
# random instances


def random_povm(rng, n_inputs, n_outputs, h, projective=False):
    """E_{x,a} = V_{x,a}^dagger V_{x,a} from a random isometry, or spectral projections of a random unitary."""
    blocks = np.zeros((n_inputs, n_outputs, h, h), dtype=complex)
    for x in range(n_inputs):
        if projective:
            u = mc.random_unitary(rng, h)
            cuts = np.sort(rng.integers(0, h + 1, size=n_outputs - 1))
            edges = np.concatenate([[0], cuts, [h]])
            for a in range(n_outputs):
                q = u[:, edges[a] : edges[a + 1]]
                blocks[x, a] = q @ mc.dag(q)
        else:
            v = mc.random_isometry(rng, n_outputs * h, h).reshape(n_outputs, h, h)
            blocks[x] = np.einsum("aki,akj->aij", v.conj(), v)
    return MeasurementFamily("pvm" if projective else "povm", blocks)


def random_commuting_model(rng, blocks, n_inputs=2, n_outputs=2, schmidt_rank=None, weights=None):
    """A commuting model on a scrambled direct sum of C^n (x) C^k blocks.

    Each block carries random local POVMs; the state restricted to block i has
    weight ``weights[i]`` (zero weights leave a block outside the support) and
    Schmidt rank at most ``schmidt_rank``.  The whole space is conjugated by a
    random unitary, so the block structure is hidden.
    """
    dim = sum(n * k for n, k in blocks)
    weights = np.ones(len(blocks)) / len(blocks) if weights is None else np.asarray(weights, dtype=float)
    weights = weights / weights.sum()
    ea = np.zeros((n_inputs, n_outputs, dim, dim), dtype=complex)
    fb = np.zeros((n_inputs, n_outputs, dim, dim), dtype=complex)
    xi = np.zeros(dim, dtype=complex)
    off = 0
    for (n, k), w in zip(blocks, weights):
        e = random_povm(rng, n_inputs, n_outputs, n).blocks
        f = random_povm(rng, n_inputs, n_outputs, k).blocks
        sl = slice(off, off + n * k)
        ea[..., sl, sl] = np.einsum("xaij,kl->xaikjl", e, np.eye(k)).reshape(n_inputs, n_outputs, n * k, n * k)
        fb[..., sl, sl] = np.einsum("ij,xakl->xaikjl", np.eye(n), f).reshape(n_inputs, n_outputs, n * k, n * k)
        r = min(n, k) if schmidt_rank is None else min(n, k, schmidt_rank)
        vec = (mc.random_isometry(rng, n, r) @ np.diag(rng.random(r) + 0.1) @ mc.dag(mc.random_isometry(rng, k, r))).reshape(-1)
        xi[sl] = np.sqrt(w) * vec / np.linalg.norm(vec)
        off += n * k
    u = mc.random_unitary(rng, dim)
    alice = MeasurementFamily("povm", np.einsum("ij,xajk,lk->xail", u, ea, u.conj()))
    bob = MeasurementFamily("povm", np.einsum("ij,xajk,lk->xail", u, fb, u.conj()))
    return Model("commuting", (dim,), alice, bob, u @ xi)
