"""Dense complex linear algebra used by every other module.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.  Rank decisions
(kernels, truncations, null spaces) use a threshold relative to the largest
singular value of the object being examined.
"""

import functools
from typing import NamedTuple, Sequence

import numpy as np

from .errors import NotHermitianError, NotPSD, ShapeError

DEFAULT_TOL = 1e-9

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


class HermEig(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_cmatrix(a, name="matrix"):
    """Return ``a`` as a finite complex array (1-D vectors are allowed)."""
    arr = np.asarray(a, dtype=complex)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return arr


def dag(a):
    return np.conj(np.swapaxes(a, -1, -2))


def fro(a):
    return float(np.linalg.norm(a))


def basis_vector(i, n):
    v = np.zeros(n, dtype=complex)
    v[i] = 1.0
    return v


def max_entangled(d):
    """The vector (1/sqrt d) sum_a e_a (x) e_a."""
    return np.eye(d, dtype=complex).reshape(d * d) / np.sqrt(d)


def kron(a, b):
    a = as_cmatrix(a)
    b = as_cmatrix(b)
    return np.kron(a, b)


def kron_all(*mats):
    return functools.reduce(np.kron, mats)


def partial_trace(m, dims, side):
    """Trace out one factor of a square matrix on C^dA (x) C^dB.

    ``side`` is ``"A"`` or ``"B"`` and names the factor that is traced out.
    """
    m = as_cmatrix(m)
    d_a, d_b = dims
    if m.ndim != 2 or m.shape != (d_a * d_b, d_a * d_b):
        raise ShapeError(f"expected a square matrix of size {d_a * d_b}, got {m.shape}")
    t = m.reshape(d_a, d_b, d_a, d_b)
    if side == "A":
        return np.einsum("ijik->jk", t)
    if side == "B":
        return np.einsum("ijkj->ik", t)
    raise ValueError(f"side must be 'A' or 'B', not {side!r}")


def hermiticity_residual(a):
    return fro(a - dag(a))


def check_hermitian(a, tol=DEFAULT_TOL):
    a = as_cmatrix(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    res = hermiticity_residual(a)
    if res > tol * max(1.0, fro(a)):
        raise NotHermitianError(res)
    return (a + dag(a)) / 2


def _fix_phase(v, tol):
    """Rotate ``v`` so its first entry of (near-)largest modulus is real positive."""
    mags = np.abs(v)
    top = mags.max()
    j = int(np.flatnonzero(mags >= top - tol * max(top, 1.0))[0])
    return v * (np.conj(v[j]) / abs(v[j])), j


def _canonical_basis(q, tol):
    """Deterministic orthonormal basis of the column span of ``q``.

    The result depends only on the subspace: vectors are peeled off the
    projector greedily, each time taking the column of largest norm (lowest
    index among ties).
    """
    p = q @ dag(q)
    k = q.shape[1]
    out = []
    for _ in range(k):
        norms = np.linalg.norm(p, axis=0)
        top = norms.max()
        j = int(np.flatnonzero(norms >= top - 1e3 * tol * max(top, 1.0))[0])
        v = p[:, j] / norms[j]
        v, _ = _fix_phase(v, tol)
        out.append(v)
        p = p - np.outer(v, np.conj(v))
    return np.array(out).T


def herm_eig(a, tol=DEFAULT_TOL):
    """Eigendecomposition of a Hermitian matrix with a reproducible eigenbasis.

    Eigenvalues ascend.  Eigenvectors of simple eigenvalues have their first
    entry of largest modulus made real positive; inside a degenerate cluster
    the basis is rebuilt from the cluster projector so it does not depend on
    what LAPACK happened to return.
    """
    a = check_hermitian(a, tol)
    w, q = np.linalg.eigh(a)
    n = len(w)
    scale = max(float(np.max(np.abs(w))) if n else 0.0, 1e-300)
    gap = tol * scale
    vecs = np.empty_like(q)
    i = 0
    while i < n:
        j = i + 1
        while j < n and w[j] - w[j - 1] <= gap:
            j += 1
        if j - i == 1:
            vecs[:, i], _ = _fix_phase(q[:, i], tol)
        else:
            vecs[:, i:j] = _canonical_basis(q[:, i:j], tol)
        i = j
    return HermEig(w, vecs)


def gram_factor(m, tol=DEFAULT_TOL):
    """Return G with G^dagger G = m, rank truncated.

    Raises ``NotPSD`` (carrying the most negative eigenvalue) when ``m`` has an
    eigenvalue below ``-tol * ||m||``.
    """
    m = check_hermitian(m, tol)
    w, q = np.linalg.eigh(m)
    norm = max(float(np.max(np.abs(w))) if len(w) else 0.0, 0.0)
    if len(w) and w[0] < -tol * max(norm, 1e-300):
        raise NotPSD(float(w[0]))
    keep = w > tol * norm
    g = np.sqrt(w[keep])[:, None] * dag(q[:, keep])
    return g


def psd_sqrt(m, tol=DEFAULT_TOL):
    m = check_hermitian(m, tol)
    w, q = np.linalg.eigh(m)
    # roundoff-level eigenvalues would otherwise turn into sqrt(1e-16) = 1e-8
    top = float(np.max(np.abs(w))) if len(w) else 0.0
    w = np.where(w > tol * top, w, 0.0)
    return (q * np.sqrt(w)) @ dag(q)


def regularized_polar(t, tol=DEFAULT_TOL):
    """Unitary (T + P)|T + P|^{-1} where P projects onto ker T.

    Eigenvalues with modulus at most ``tol * ||t||`` count as kernel and are
    sent to +1; the rest are replaced by their sign.
    """
    t = check_hermitian(t, tol)
    w, q = np.linalg.eigh(t)
    norm = float(np.max(np.abs(w))) if len(w) else 0.0
    signs = np.where(np.abs(w) <= tol * norm, 1.0, np.sign(w))
    return (q * signs) @ dag(q)


def polar_unitary(t):
    """Unitary factor of the polar decomposition of a square matrix."""
    u, _, vh = np.linalg.svd(t)
    return u @ vh


def orth(a, tol=DEFAULT_TOL):
    """Orthonormal basis (columns) of the range of ``a``."""
    if a.size == 0:
        return np.zeros((a.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if len(s) == 0 or s[0] == 0:
        return np.zeros((a.shape[0], 0), dtype=complex)
    return u[:, s > tol * s[0]]


def null_space(a, tol=DEFAULT_TOL):
    """Orthonormal basis (columns) of the kernel of ``a``."""
    n = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(n, dtype=complex)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    smax = s[0] if len(s) else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    return dag(vh[rank:])


def range_projection(a, tol=DEFAULT_TOL):
    q = orth(a, tol)
    return q @ dag(q)


def sylvester_stack(gens, dim):
    """Stacked matrices of X -> Xg - gX and X -> Xg^dagger - g^dagger X.

    Acts on row-major vectorised X.
    """
    eye = np.eye(dim, dtype=complex)
    blocks = []
    for g in gens:
        g = as_cmatrix(g)
        if g.shape != (dim, dim):
            raise ShapeError(f"generator has shape {g.shape}, expected {(dim, dim)}")
        for h in (g, dag(g)):
            blocks.append(np.kron(eye, h.T) - np.kron(h, eye))
    if not blocks:
        return np.zeros((0, dim * dim), dtype=complex)
    return np.vstack(blocks)


def commutant_basis(gens: Sequence[np.ndarray], dim: int, tol=DEFAULT_TOL):
    """Frobenius-orthonormal basis of the commutant of ``gens`` and their adjoints."""
    if len(gens) == 0:
        out = []
        for i in range(dim):
            for j in range(dim):
                e = np.zeros((dim, dim), dtype=complex)
                e[i, j] = 1.0
                out.append(e)
        return out
    ns = null_space(sylvester_stack(gens, dim), tol)
    out = []
    for k in range(ns.shape[1]):
        x = ns[:, k].reshape(dim, dim)
        flat, _ = _fix_phase(x.reshape(-1), tol)
        out.append(flat.reshape(dim, dim))
    return out


def unitarity_residual(u):
    n = u.shape[1]
    return fro(dag(u) @ u - np.eye(n))


def isometry_residual(v):
    return fro(dag(v) @ v - np.eye(v.shape[1]))


def random_unitary(rng, n):
    """Haar-distributed unitary via QR with phase correction."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_isometry(rng, rows, cols):
    if cols > rows:
        raise ShapeError("an isometry needs rows >= cols")
    return random_unitary(rng, rows)[:, :cols]


def random_unit_vector(rng, n):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def random_hermitian(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (z + dag(z)) / 2


def min_eigenvalue(m):
    m = (m + dag(m)) / 2
    return float(np.linalg.eigvalsh(m)[0])


class AlgebraBlock(NamedTuple):
    """One isotypic component H_i (x) K_i of a represented *-algebra.

    ``isometry`` has ``n * k`` columns ordered as C^n (x) C^k; the algebra acts
    as sigma(a) (x) I_k and its commutant as I_n (x) c on this component.
    """

    isometry: np.ndarray
    n: int
    k: int

    def restrict(self, a):
        """sigma(a): the n x n irreducible part of ``a`` on this component."""
        b = dag(self.isometry) @ a @ self.isometry
        return b.reshape(self.n, self.k, self.n, self.k)[:, 0, :, 0]

    def restrict_commutant(self, c):
        b = dag(self.isometry) @ c @ self.isometry
        return b.reshape(self.n, self.k, self.n, self.k)[0, :, 0, :]


def _cluster(w, gap):
    groups = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > gap:
            groups.append((start, i))
            start = i
    return groups


def decompose_algebra(gens, dim, tol=DEFAULT_TOL, seed=0, attempts=8):
    """Split C^dim into isotypic components of the *-algebra generated by ``gens``.

    A random Hermitian element of the commutant is diagonalised; its
    eigenspaces are ranges of minimal projections of the commutant (for a
    generic draw), which are then grouped into isotypic components and linked
    by partial isometries of the commutant.  Draws that turn out degenerate are
    retried with fresh randomness.
    """
    comm = commutant_basis(list(gens), dim, tol)
    rng = np.random.default_rng(seed)
    for _ in range(attempts):
        coeffs = rng.standard_normal(len(comm)) + 1j * rng.standard_normal(len(comm))
        c = sum(z * b for z, b in zip(coeffs, comm))
        h = (c + dag(c)) / 2
        w, q = np.linalg.eigh(h)
        scale = max(float(np.max(np.abs(w))), 1.0)
        clusters = [q[:, i:j] for i, j in _cluster(w, max(1e3 * tol, 1e-7) * scale)]
        # group minimal projections that the commutant links together
        parent = list(range(len(clusters)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i, qi in enumerate(clusters):
            for j in range(i + 1, len(clusters)):
                qj = clusters[j]
                link = max(fro(dag(qj) @ b @ qi) for b in comm)
                if link > 1e3 * tol:
                    parent[find(j)] = find(i)
        groups = {}
        for i in range(len(clusters)):
            groups.setdefault(find(i), []).append(clusters[i])
        blocks = []
        ok = True
        for members in groups.values():
            n = members[0].shape[1]
            if any(m.shape[1] != n for m in members):
                ok = False
                break
            q1 = members[0]
            # minimality: the commutant compressed to q1 must be scalars
            for b in comm:
                cb = dag(q1) @ b @ q1
                if fro(cb - np.trace(cb) / n * np.eye(n)) > 1e3 * tol * max(1.0, fro(cb)):
                    ok = False
                    break
            if not ok:
                break
            z = rng.standard_normal(len(comm)) + 1j * rng.standard_normal(len(comm))
            link_el = sum(a * b for a, b in zip(z, comm))
            cols = [q1]
            for ql in members[1:]:
                m = dag(ql) @ link_el @ q1
                if np.linalg.svd(m, compute_uv=False)[-1] <= 1e3 * tol * max(1.0, fro(m)):
                    ok = False
                    break
                cols.append(ql @ polar_unitary(m))
            if not ok:
                break
            k = len(cols)
            iso = np.stack(cols, axis=2).reshape(dim, n * k)
            blocks.append(AlgebraBlock(iso, n, k))
        if ok:
            blocks.sort(key=lambda b: (-b.n, -b.k, int(np.argmax(np.abs(b.isometry).sum(axis=1) > 1e-8))))
            return blocks
    raise RuntimeError("could not find a generic element of the commutant; algebra decomposition failed")
