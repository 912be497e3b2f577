"""Clifford representations and correlations, the witness n I - sum u_x (x) u_x, and moment matrices.

Words over the letters ``("e", x, a)`` (Alice) and ``("f", y, b)`` (Bob) are
plain tuples of letters; the empty tuple is the empty word.  Letters are
projections, Alice letters commute with Bob letters, and letters of one
measurement are mutually orthogonal.
"""

from dataclasses import dataclass

import numpy as np

from . import matcore as mc
from . import models as md
from .errors import ShapeError, ValidationError

MAX_N = 12
EMPTY = ()
ZERO = None


@dataclass(frozen=True, eq=False)
class CliffordRep:
    n: int
    generators: tuple

    @property
    def dim(self):
        return self.generators[0].shape[0]

    def projection(self, x, a):
        """r_{x,a} = (I + (-1)^a u_x) / 2."""
        return (np.eye(self.dim) + (-1) ** a * self.generators[x]) / 2

    def residuals(self):
        eye = np.eye(self.dim)
        sq = max(mc.fro(u @ u - eye) for u in self.generators)
        anti = 0.0
        for i, u in enumerate(self.generators):
            for v in self.generators[i + 1 :]:
                anti = max(anti, mc.fro(u @ v + v @ u))
        herm = max(mc.hermiticity_residual(u) for u in self.generators)
        return {"square": sq, "anticommutation": anti, "hermiticity": herm}


def clifford_rep(n):
    """Anticommuting Hermitian unitaries u_1..u_n on (C^2)^{(x) n/2}.

    u_{2k-1} = Y^{(x)(k-1)} (x) X (x) I..., u_{2k} = Y^{(x)(k-1)} (x) Z (x) I...; for
    n = 2 this is {sx, sz}.
    """
    if n % 2 or n < 2:
        raise ValueError(f"the Clifford representation needs an even n >= 2, got {n}")
    if n > MAX_N:
        raise ValueError(f"n = {n} exceeds the size guard {MAX_N}")
    m = n // 2
    gens = []
    for k in range(m):
        for site in (mc.SIGMA_X, mc.SIGMA_Z):
            factors = [mc.SIGMA_Y] * k + [site] + [mc.IDENTITY_2] * (m - k - 1)
            gens.append(mc.kron_all(*factors))
    return CliffordRep(n, tuple(gens))


def _check_projection(p, name, tol):
    r = max(mc.fro(p @ p - p), mc.hermiticity_residual(p))
    if r > 1e3 * tol * max(1.0, mc.fro(p)):
        raise ValueError(f"{name} is not a projection (residual {r:.3e})")


def quotient_relation_check(p, q, tol=mc.DEFAULT_TOL):
    """||4pq + 4qp - 4p - 4q + 2I||_F, which vanishes iff 2p - 1 and 2q - 1 anticommute."""
    p, q = mc.as_cmatrix(p), mc.as_cmatrix(q)
    if p.shape != q.shape:
        raise ShapeError("p and q must have the same shape")
    _check_projection(p, "p", tol)
    _check_projection(q, "q", tol)
    eye = np.eye(p.shape[0])
    return mc.fro(4 * p @ q + 4 * q @ p - 4 * p - 4 * q + 2 * eye)


def tracial_model(projections):
    """Model with Alice r_{x,a}, Bob r_{x,a}^T and state Omega_d.

    Its correlation is tr(r_{x,a} r_{y,b}) / d, since <(A (x) B) Omega, Omega> = tr(A B^T) / d.
    """
    blocks = np.asarray(projections, dtype=complex)
    d = blocks.shape[-1]
    return md.Model("tensor", (d, d), md.pvm(blocks), md.pvm(np.swapaxes(blocks, -1, -2)), mc.max_entangled(d))


def canonical_model(n):
    rep = clifford_rep(n)
    return tracial_model([[rep.projection(x, a) for a in range(2)] for x in range(n)])


def clifford_correlation(n, psi=None, tol=mc.DEFAULT_TOL):
    """Canonical p(a,b|x,y) = tr(r_{x,a} r_{y,b}) / d, or <(r_{x,a} (x) r_{y,b}) psi, psi> if ``psi`` is given."""
    rep = clifford_rep(n)
    d = rep.dim
    r = np.array([[rep.projection(x, a) for a in range(2)] for x in range(n)])
    if psi is None:
        p = np.einsum("xaij,ybji->xyab", r, r).real / d
        return md.check_correlation(md.Correlation("ns", p), tol)
    psi = mc.as_cmatrix(psi, "psi").reshape(-1)
    if psi.shape[0] != d * d:
        raise ShapeError(f"psi must have length {d * d}")
    err = abs(np.linalg.norm(psi) - 1)
    if err > tol:
        raise ValidationError("state norm", err, f"psi is not a unit vector (residual {err:.3e})")
    return md.correlation_ns(md.Model("tensor", (d, d), md.pvm(r), md.pvm(r), psi), tol)


def witness_operator(n):
    rep = clifford_rep(n)
    d = rep.dim
    return n * np.eye(d * d) - sum(np.kron(u, u) for u in rep.generators)


def witness_kernel(n, tol=mc.DEFAULT_TOL):
    """(kernel dimension, kernel basis, smallest eigenvalue) of n I - sum u_x (x) u_x."""
    w = witness_operator(n)
    eig = mc.herm_eig(w, tol)
    lam = eig.eigenvalues
    if lam[0] < -tol * n:
        raise ValidationError("positivity", float(-lam[0]), f"witness has eigenvalue {lam[0]:.3e} < 0")
    kern = np.abs(lam) <= tol * n
    return int(kern.sum()), eig.eigenvectors[:, kern], float(lam[0])


# --------------------------------------------------------------------------
# words and moment matrices


def e(x, a):
    return ("e", x, a)


def f(y, b):
    return ("f", y, b)


def _collapse(part):
    out = []
    for letter in part:
        if out and out[-1][1] == letter[1]:
            if out[-1][2] == letter[2]:
                continue  # idempotent
            return ZERO  # orthogonal projections of one measurement
        out.append(letter)
    return tuple(out)


def reduce_word(word):
    """Normal form: Alice letters first, adjacent repeats collapsed; ``None`` for the zero word."""
    word = tuple(word)
    ea = _collapse([l for l in word if l[0] == "e"])
    fb = _collapse([l for l in word if l[0] == "f"])
    if ea is ZERO or fb is ZERO:
        return ZERO
    return ea + fb


def adjoint(word):
    return tuple(reversed(word))


def _canonical(key):
    """(canonical key, conjugate flag): a word and its adjoint share one value up to conjugation."""
    rk = reduce_word(adjoint(key))
    if rk < key:
        return rk, True
    return key, False


def entry_key(alpha, beta):
    """Reduced word beta* alpha indexing m_{alpha, beta}."""
    return reduce_word(adjoint(beta) + tuple(alpha))


def level_one_value(corr, key):
    """Value of a reduced word of length <= 1 per party, or ``None`` if not determined by ``corr``."""
    p = corr.table
    if key is ZERO:
        return 0.0
    ea = [l for l in key if l[0] == "e"]
    fb = [l for l in key if l[0] == "f"]
    if len(ea) > 1 or len(fb) > 1:
        return None
    if not ea and not fb:
        return 1.0
    if ea and fb:
        return float(p[ea[0][1], fb[0][1], ea[0][2], fb[0][2]])
    if ea:
        return float(p[ea[0][1], 0, ea[0][2], :].sum())
    return float(p[0, fb[0][1], :, fb[0][2]].sum())


@dataclass(frozen=True, eq=False)
class MomentMatrix:
    words: list
    matrix: np.ndarray
    min_eigenvalue: float
    hermiticity: float
    psd: bool

    def index(self, word):
        w = reduce_word(word)
        for i, v in enumerate(self.words):
            if reduce_word(v) == w:
                return i
        raise KeyError(f"word {word} is not indexed by this moment matrix")

    def entry(self, alpha, beta):
        return self.matrix[self.index(alpha), self.index(beta)]


def level_one_words(n_x, n_y, n_a=2, n_b=2):
    return [EMPTY] + [(e(x, a),) for x in range(n_x) for a in range(n_a)] + [(f(y, b),) for y in range(n_y) for b in range(n_b)]


def ac_words(n):
    """Level-one words plus w_{x,y} = e_{x,0} e_{y,0} for x != y."""
    words = level_one_words(n, n)
    words += [(e(x, 0), e(y, 0)) for x in range(n) for y in range(n) if x != y]
    return words


def model_completion(model, words):
    """m_{alpha,beta} = <alpha xi, beta xi> evaluated in a model."""

    def vec(word):
        v = model.state
        for letter in reversed(word):
            fam = model.alice if letter[0] == "e" else model.bob
            op = fam.element(letter[1], letter[2])
            v = (model.alice_op(op) if letter[0] == "e" else model.bob_op(op)) @ v
        return v

    vecs = [vec(w) for w in words]
    return {(a, b): complex(np.vdot(vb, va)) for a, va in zip(words, vecs) for b, vb in zip(words, vecs)}


def moment_matrix(corr, words, completion=None, tol=mc.DEFAULT_TOL):
    """Assemble m_{alpha,beta} = s(beta* alpha) from ``corr`` and a completion.

    Entries of level one come from ``corr``; the rest from ``completion``
    (a mapping ``(alpha, beta) -> value``).  All supplied values that reduce to
    the same word (or its adjoint) must agree; the first conflicting pair is
    reported in a ``ValidationError``.
    """
    words = [tuple(w) for w in words]
    completion = dict(completion or {})
    known = {}

    def record(key, value, source):
        if key is ZERO:
            if abs(value) > 1e3 * tol:
                raise ValidationError("admissibility", abs(value), f"{source} must vanish (reduces to zero), got {value}")
            return
        ck, conj = _canonical(key)
        value = np.conj(value) if conj else value
        lvl = level_one_value(corr, ck)
        ref = known.get(ck, (lvl, "correlation") if lvl is not None else None)
        if ref is not None:
            gap = abs(ref[0] - value)
            if gap > 1e3 * tol:
                raise ValidationError("admissibility", gap, f"{source} = {value} conflicts with {ref[1]} = {ref[0]} (reduced word {ck})")
        else:
            known[ck] = (value, source)

    for (a, b), v in completion.items():
        record(entry_key(tuple(a), tuple(b)), complex(v), f"completion entry {(a, b)}")
    n = len(words)
    m = np.zeros((n, n), dtype=complex)
    for i, a in enumerate(words):
        for j, b in enumerate(words):
            key = entry_key(a, b)
            if key is ZERO:
                continue
            ck, conj = _canonical(key)
            lvl = level_one_value(corr, ck)
            if lvl is not None:
                val = lvl
            elif ck in known:
                val = known[ck][0]
            else:
                raise ValidationError("missing entry", np.inf, f"no value for m[{a}, {b}] (reduced word {ck})")
            m[i, j] = np.conj(val) if conj else val
    herm = mc.hermiticity_residual(m)
    lam = mc.min_eigenvalue(m)
    return MomentMatrix(words, m, lam, herm, bool(lam >= -1e3 * tol and herm <= 1e3 * tol))


def check_AC(mm, n_inputs, tol=mc.DEFAULT_TOL):
    """Residuals |m_{e_{x,0},e_{y,0}} - m_{w_{x,y},w_{y,x}} - 1/8| for all x != y."""
    res = {}
    for x in range(n_inputs):
        for y in range(n_inputs):
            if x == y:
                continue
            try:
                v = mm.entry((e(x, 0),), (e(y, 0),)) - mm.entry((e(x, 0), e(y, 0)), (e(y, 0), e(x, 0)))
            except KeyError as err:
                raise ValueError(f"moment matrix lacks a word needed for the A_C check: {err}") from None
            res[(x, y)] = float(abs(v - 0.125))
    return all(r <= tol for r in res.values()), res


def canonical_moments(n, tol=mc.DEFAULT_TOL):
    """Moment matrix of the canonical synchronous Clifford correlation on ``ac_words(n)``."""
    model = canonical_model(n)
    words = ac_words(n)
    return moment_matrix(md.correlation_ns(model, tol), words, model_completion(model, words), tol)


def independent_commuting_model():
    """Two independent fair bits: commuting projections p, q on C^4 with the normalized trace."""
    p = np.diag([1.0, 1.0, 0.0, 0.0])
    q = np.diag([1.0, 0.0, 1.0, 0.0])
    eye = np.eye(4)
    return tracial_model([[p, eye - p], [q, eye - q]])
