"""The quantum colouring game Hom(K_4, Q_2) and probabilistic assignments of contextuality scenarios."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import matcore as mc
from . import models as md
from .errors import ShapeError, ValidationError

D = 2
N_COLOURS = 4
PAULIS = (mc.IDENTITY_2, mc.SIGMA_X, mc.SIGMA_Z, mc.SIGMA_Y)


def matrix_unit(a, b, d=D):
    m = np.zeros((d, d), dtype=complex)
    m[a, b] = 1.0
    return m


class Verdict(NamedTuple):
    ok: bool
    residuals: dict


@dataclass(frozen=True, eq=False)
class HomModel:
    """Matrix-unit systems ``units[x, a, a'] = e_{x,a,a'}`` with the trace tau(m) = Tr(trace_state m)."""

    units: np.ndarray
    trace_state: np.ndarray

    def __post_init__(self):
        u = mc.as_cmatrix(self.units, "units")
        if u.ndim != 5 or u.shape[1:3] != (D, D) or u.shape[3] != u.shape[4]:
            raise ShapeError(f"units must have shape (X, 2, 2, n, n), got {u.shape}")
        t = mc.as_cmatrix(self.trace_state, "trace_state")
        if t.shape != u.shape[3:]:
            raise ShapeError("trace state does not match the operator size")
        object.__setattr__(self, "units", u)
        object.__setattr__(self, "trace_state", t)

    @property
    def dim(self):
        return self.units.shape[-1]

    @property
    def n_inputs(self):
        return self.units.shape[0]

    def tau(self, m):
        return complex(np.trace(self.trace_state @ m))

    def conjugate(self, u):
        """The model m -> U m U^dagger (trace state transported along)."""
        units = np.einsum("ij,xabjk,lk->xabil", u, self.units, u.conj())
        return HomModel(units, u @ self.trace_state @ mc.dag(u))

    def ampliate(self, k, sigma=None):
        """e (x) I_k with trace state D (x) sigma (sigma defaults to I_k / k)."""
        sigma = np.eye(k) / k if sigma is None else sigma
        units = np.einsum("xabij,kl->xabikjl", self.units, np.eye(k)).reshape(self.units.shape[:3] + (self.dim * k,) * 2)
        return HomModel(units, np.kron(self.trace_state, sigma))


def hom_residuals(m):
    X = m.n_inputs
    n = m.dim
    eye = np.eye(n)
    e = m.units
    res = {"matrix units": 0.0, "adjoint": 0.0, "unit sum": 0.0, "orthogonality": 0.0}
    for x in range(X):
        res["unit sum"] = max(res["unit sum"], mc.fro(sum(e[x, a, a] for a in range(D)) - eye))
        for a in range(D):
            for ap in range(D):
                res["adjoint"] = max(res["adjoint"], mc.fro(mc.dag(e[x, a, ap]) - e[x, ap, a]))
                for bp in range(D):
                    for b in range(D):
                        want = e[x, a, b] if ap == bp else 0
                        res["matrix units"] = max(res["matrix units"], mc.fro(e[x, a, ap] @ e[x, bp, b] - want))
        for y in range(X):
            if y != x:
                s = sum(e[x, a, b] @ e[y, b, a] for a in range(D) for b in range(D))
                res["orthogonality"] = max(res["orthogonality"], mc.fro(s))
    t = m.trace_state
    res["trace hermiticity"] = mc.hermiticity_residual(t)
    res["trace positivity"] = max(0.0, -mc.min_eigenvalue(t))
    res["trace normalization"] = abs(np.trace(t) - 1)
    # tau is tracial on the generated algebra iff the density commutes with every generator
    res["traciality"] = max(mc.fro(t @ g - g @ t) for g in e.reshape(-1, n, n))
    return res


def validate_hom(m, tol=mc.DEFAULT_TOL):
    return md._verdict(hom_residuals(m), tol)


def check_hom(m, tol=mc.DEFAULT_TOL):
    v = validate_hom(m, tol)
    if not v.ok:
        raise ValidationError(v.constraint, v.residual, f"invalid Hom model: {v.constraint} violated (residual {v.residual:.3e})")
    return m


def unitary_error_basis_residual(us=PAULIS):
    """max |tr_2(U_x U_y^dagger) - delta_{x,y}| with the normalized trace."""
    worst = 0.0
    for x, u in enumerate(us):
        for y, v in enumerate(us):
            worst = max(worst, abs(np.trace(u @ mc.dag(v)) / len(u) - (x == y)))
    return float(worst)


def pauli_hom_model():
    """e_{x,a,a'} = U_x^dagger eps_{a,a'} U_x for U = (I, sx, sz, sy), trace I/2."""
    units = np.array([[[mc.dag(u) @ matrix_unit(a, b) @ u for b in range(D)] for a in range(D)] for u in PAULIS])
    return HomModel(units, np.eye(D) / D)


def gamma_correlation(m, tol=mc.DEFAULT_TOL):
    """G[x, y, a, a', b, b'] = tau(e_{x,a,a'} e_{y,b',b})."""
    check_hom(m, tol)
    e = m.units
    g = np.einsum("ij,xacjk,ydbki->xyacbd", m.trace_state, e, e, optimize=True)
    return md.check_correlation(md.Correlation("cqns", g), tol)


def omega_projector(d=D):
    w = mc.max_entangled(d)
    return np.outer(w, w.conj())


def channel_output(g, x, y):
    """G(eps_{x,x} (x) eps_{y,y}) as a matrix indexed by (a, b), (a', b')."""
    t = g.table[x, y]
    A, B = t.shape[0], t.shape[2]
    return t.transpose(0, 2, 1, 3).reshape(A * B, A * B)


def verify_perfect(g, d=D, tol=mc.DEFAULT_TOL):
    """Residuals of G(eps_xx (x) eps_xx) = J and Tr(G(eps_xx (x) eps_yy) J) = 0 (x != y), J = Omega Omega^dagger."""
    if g.kind != "cqns":
        raise ValueError("verify_perfect needs a CQNS correlation")
    md.check_correlation(g, max(tol, 1e-9))
    if g.table.shape[2] != d or g.table.shape[4] != d:
        raise ShapeError(f"expected {d} outputs per party")
    j = omega_projector(d)
    X = g.table.shape[0]
    res = {}
    for x in range(X):
        for y in range(X):
            out = channel_output(g, x, y)
            if x == y:
                res[f"diag {x}"] = mc.fro(out - j)
            else:
                res[f"off {x},{y}"] = float(abs(np.trace(out @ j)))
    return Verdict(all(r <= tol for r in res.values()), res)


class PauliForm(NamedTuple):
    unitary: np.ndarray  # T: C^n -> C^2 (x) C^N
    n_dim: int
    residuals: dict
    ok: bool


def extract_pauli_form(m, tol=mc.DEFAULT_TOL, seed=0, attempts=8):
    """Find T with T e_{x,a,a'} T^dagger = U_x^dagger eps_{a,a'} U_x (x) 1_N.

    T is built from the first matrix-unit system (range of e_{0,0,0} is the
    multiplicity space); each further system is linked to the first by a
    unitary V_x = sum_a g_{a0} w f_{0a} with w the polar part of g_00 R f_00,
    and the relative positions V_x V_0^dagger are checked against the
    diagonal/antidiagonal patterns forced by the Pauli relations.
    """
    check_hom(m, tol)
    g = gamma_correlation(m, tol)
    ref = gamma_correlation(pauli_hom_model(), tol)
    gap = float(np.max(np.abs(g.table - ref.table)))
    loose = max(1e3 * tol, 1e-7)
    if gap > loose:
        raise ValidationError("correlation", gap, f"model does not produce the K4 colouring correlation (gap {gap:.3e})")
    lam = mc.min_eigenvalue(m.trace_state)
    if lam <= tol:
        raise ValidationError("faithfulness", lam, f"trace state is not faithful (smallest eigenvalue {lam:.3e})")
    e = m.units
    n = m.dim
    q = mc.orth(e[0, 0, 0], 1e3 * tol)
    N = q.shape[1]
    if D * N != n:
        raise ValidationError("rank", abs(D * N - n), f"e_(0,0,0) has rank {N}, expected {n // D}")
    # W h = sum_i e_i (x) q^dagger e_{0,0,i} h
    w_map = np.vstack([mc.dag(q) @ e[0, 0, i] for i in range(D)])
    units = np.einsum("ij,xabjk,lk->xabil", w_map, e, w_map.conj())
    eye_n = np.eye(N)
    std = np.array([[np.kron(matrix_unit(a, b), eye_n) for b in range(D)] for a in range(D)])
    rng = np.random.default_rng(seed)
    vs = []
    for x in range(m.n_inputs):
        gx = units[x]
        for _ in range(attempts):
            r = rng.standard_normal((D * N, D * N)) + 1j * rng.standard_normal((D * N, D * N))
            mm = gx[0, 0] @ r @ std[0, 0]
            u, s, vh = np.linalg.svd(mm)
            if s[N - 1] > 1e3 * tol * s[0]:
                break
        else:
            raise ValidationError("rank", 0.0, f"could not link matrix-unit system {x} (rank-deficient draws)")
        w = u[:, :N] @ vh[:N]
        vs.append(sum(gx[a, 0] @ w @ std[0, a] for a in range(D)))
    res = {}
    res["V unitarity"] = max(mc.unitarity_residual(v) for v in vs)
    res["V intertwining"] = max(
        mc.fro(vs[x] @ std[a, b] @ mc.dag(vs[x]) - units[x, a, b]) for x in range(m.n_inputs) for a in range(D) for b in range(D)
    )
    # relative positions: V_x V_0^dagger in 2x2 block form
    blocks = [(v @ mc.dag(vs[0])).reshape(D, N, D, N).transpose(0, 2, 1, 3) for v in vs]
    pattern = 0.0
    if m.n_inputs >= 4:
        b1, b2, b3 = blocks[1], blocks[2], blocks[3]
        pattern = max(
            mc.fro(b1[0, 0]) + mc.fro(b1[1, 1]) + mc.fro(b1[0, 1] - b1[1, 0]),  # sx: antidiagonal, C = B
            mc.fro(b2[0, 1]) + mc.fro(b2[1, 0]) + mc.fro(b2[0, 0] + b2[1, 1]),  # sz: diagonal, D = -A
            mc.fro(b3[0, 0]) + mc.fro(b3[1, 1]) + mc.fro(b3[0, 1] + b3[1, 0]),  # sy: antidiagonal, C = -B
        )
    res["block pattern"] = pattern
    tr = 0.0
    for x in range(m.n_inputs):
        for y in range(m.n_inputs):
            if x != y:
                tr = max(tr, mc.fro(mc.partial_trace(vs[x] @ mc.dag(vs[y]), (D, N), "A")) / D)
    res["trace condition"] = tr
    target = np.array([[[mc.dag(u) @ matrix_unit(a, b) @ u for b in range(D)] for a in range(D)] for u in PAULIS[: m.n_inputs]])
    res["normal form"] = max(
        mc.fro(units[x, a, b] - np.kron(target[x, a, b], eye_n)) for x in range(m.n_inputs) for a in range(D) for b in range(D)
    )
    res["T unitarity"] = mc.unitarity_residual(w_map)
    ok = all(r <= loose for r in res.values())
    return PauliForm(w_map, N, res, ok)


def random_pauli_model(rng, k, faithful=True):
    """Pauli model ampliated by I_k, with a random state on the multiplicity, conjugated by a random unitary."""
    z = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    sigma = z @ mc.dag(z) + (0.1 * np.eye(k) if faithful else 0)
    sigma /= np.trace(sigma).real
    m = pauli_hom_model().ampliate(k, sigma)
    return m.conjugate(mc.random_unitary(rng, D * k))


# --------------------------------------------------------------------------
# contextuality scenarios


@dataclass(frozen=True, eq=False)
class Scenario:
    """Hypergraph on vertices 0..n_vertices-1 with hyperedges given as index tuples."""

    n_vertices: int
    edges: tuple
    labels: tuple = ()

    def __post_init__(self):
        edges = tuple(tuple(int(v) for v in e) for e in self.edges)
        for e in edges:
            for v in e:
                if not 0 <= v < self.n_vertices:
                    raise ShapeError(f"edge {e} refers to a vertex outside 0..{self.n_vertices - 1}")
        covered = {v for e in edges for v in e}
        missing = sorted(set(range(self.n_vertices)) - covered)
        if missing:
            raise ValueError(f"vertices {missing} lie in no edge")
        object.__setattr__(self, "edges", edges)


def bell_scenario(n_inputs, n_outputs):
    """B_{X,A}: vertices (x, a) -> x * A + a, edges {x} x A."""
    edges = [tuple(x * n_outputs + a for a in range(n_outputs)) for x in range(n_inputs)]
    labels = tuple((x, a) for x in range(n_inputs) for a in range(n_outputs))
    return Scenario(n_inputs * n_outputs, edges, labels)


def odd_cycle_scenario(n):
    """G_n: vertices x_i (index i) and x_{i,i+1} (index n + i), edges {x_i, x_{i+1}, x_{i,i+1}}."""
    if n < 3 or n % 2 == 0:
        raise ValueError("the cycle scenario needs an odd n >= 3")
    edges = [(i, (i + 1) % n, n + i) for i in range(n)]
    labels = tuple(f"x{i}" for i in range(n)) + tuple(f"x{i},{(i + 1) % n}" for i in range(n))
    return Scenario(2 * n, edges, labels)


def scenario_check(s, p, tol=mc.DEFAULT_TOL, other=None):
    """Check a probabilistic assignment of ``s`` (or of the product s x other when ``other`` is given).

    In the product case ``p`` has shape (|V|, |W|); every e x f must sum to one
    and the marginals sum_{x in e} p(x, y) may not depend on e (and likewise for Bob).
    """
    p = np.asarray(p, dtype=float)
    res = {}
    if other is None:
        if p.shape != (s.n_vertices,):
            raise ShapeError(f"assignment has shape {p.shape}, expected ({s.n_vertices},)")
        res["positivity"] = float(max(0.0, -p.min()))
        for i, e in enumerate(s.edges):
            res[f"edge {i}"] = float(abs(p[list(e)].sum() - 1))
        return Verdict(all(r <= tol for r in res.values()), res)
    if p.shape != (s.n_vertices, other.n_vertices):
        raise ShapeError(f"assignment has shape {p.shape}, expected {(s.n_vertices, other.n_vertices)}")
    res["positivity"] = float(max(0.0, -p.min()))
    worst = 0.0
    for e in s.edges:
        for f in other.edges:
            worst = max(worst, abs(p[np.ix_(list(e), list(f))].sum() - 1))
    res["edge normalization"] = float(worst)
    marg_a = np.array([p[list(e)].sum(axis=0) for e in s.edges])  # sum_{x in e} p(x, y)
    marg_b = np.array([p[:, list(f)].sum(axis=1) for f in other.edges])
    res["no-signalling (Alice edges)"] = float(np.max(np.abs(marg_a - marg_a[0])))
    res["no-signalling (Bob edges)"] = float(np.max(np.abs(marg_b - marg_b[0])))
    return Verdict(all(r <= tol for r in res.values()), res)


def ns_to_assignment(p):
    """Reshape an NS table p[x, y, a, b] into an assignment of B_{X,A} x B_{Y,B}."""
    t = p.table if isinstance(p, md.Correlation) else np.asarray(p)
    X, Y, A, B = t.shape
    return t.transpose(0, 2, 1, 3).reshape(X * A, Y * B)
