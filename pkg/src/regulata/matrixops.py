"""Dense linear-algebra kernel.

Kronecker products and powers, block-diagonal assembly, spectra and
Hurwitz tests, minimal polynomials, companion matrices, and the
monomial-lift machinery (monomial bases, M/N lift maps).
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np


def kron(A, B):
    """Kronecker product A (x) B."""
    return np.kron(np.asarray(A, dtype=float), np.asarray(B, dtype=float))


def kron_power(v, ell):
    """ell-fold Kronecker power of a vector; ell = 0 gives the scalar 1."""
    if ell < 0:
        raise ValueError("ell must be non-negative")
    out = np.ones(1)
    v = np.asarray(v, dtype=float).ravel()
    for _ in range(ell):
        out = np.kron(out, v)
    return out


def blockdiag(blocks):
    """Place the given matrices on the block diagonal, zeros elsewhere."""
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    if not blocks:
        raise ValueError("blockdiag needs at least one block")
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def eigenvalues(M):
    """All eigenvalues of a square matrix, with multiplicity."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return np.linalg.eigvals(M)


def is_hurwitz(M, margin=0.0):
    """True iff every eigenvalue of M has real part < -margin."""
    return bool(np.max(eigenvalues(M).real) < -margin)


@dataclass
class MinPoly:
    """Monic minimal-polynomial result.

    coeffs holds descending powers, coeffs[0] = 1.  ill_conditioned is set
    when two eigenvalue clusters sit within 10x the clustering tolerance,
    which makes the cluster assignment (and hence the degree) fragile.
    """

    coeffs: np.ndarray
    roots: np.ndarray
    ill_conditioned: bool = False

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def __call__(self, M):
        """Evaluate the polynomial at a square matrix."""
        M = np.asarray(M, dtype=float)
        out = np.zeros_like(M)
        for c in self.coeffs:
            out = out @ M + c * np.eye(M.shape[0])
        return out


def _cluster_eigenvalues(lam, tol):
    """Greedy clustering of complex eigenvalues within absolute tol.

    Returns (centers, counts, min_gap) with min_gap the smallest distance
    between distinct cluster centers.
    """
    order = np.lexsort((lam.imag, lam.real))
    lam = lam[order]
    centers, members = [], []
    for z in lam:
        for i, c in enumerate(centers):
            if abs(z - c) <= tol:
                members[i].append(z)
                centers[i] = np.mean(members[i])
                break
        else:
            centers.append(z)
            members.append([z])
    centers = np.array(centers)
    gap = np.inf
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            gap = min(gap, abs(centers[i] - centers[j]))
    return centers, [len(m) for m in members], gap


def minimal_polynomial(S, cluster_tol=None):
    """Monic polynomial of least degree annihilating S.

    Eigenvalues are clustered within cluster_tol (default 1e-8 * ||S||);
    each cluster contributes a factor (lambda - c)^s where s is the largest
    Jordan block size, found from the numerical ranks of (S - cI)^j.
    """
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    if S.shape != (n, n):
        raise ValueError("S must be square")
    scale = max(1.0, float(np.linalg.norm(S, 2)))
    if cluster_tol is None:
        cluster_tol = 1e-8 * scale
    lam = np.linalg.eigvals(S)
    centers, counts, gap = _cluster_eigenvalues(lam, cluster_tol)

    roots = []
    rank_tol = max(cluster_tol, 1e-12 * scale)
    for c, mult in zip(centers, counts):
        if abs(c.imag) <= cluster_tol:
            c = complex(c.real, 0.0)
        M = S - c * np.eye(n)
        size, prev_rank, power = 0, n, np.eye(n, dtype=complex)
        for j in range(1, mult + 1):
            power = power @ M
            r = np.linalg.matrix_rank(power, tol=rank_tol * scale ** (j - 1))
            if r == prev_rank:
                break
            prev_rank = r
            size = j
            if r <= n - mult:
                break
        size = max(size, 1)
        roots.extend([c] * size)

    coeffs = np.atleast_1d(np.poly(np.array(roots)).real)
    return MinPoly(coeffs=coeffs, roots=np.array(roots),
                   ill_conditioned=bool(gap < 10 * cluster_tol))


def companion(coeffs):
    """Companion matrix with ones on the superdiagonal and the negated
    coefficients along the last row.

    coeffs is monic, descending powers: [1, c_{m-1}, ..., c_0].
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 1 or len(coeffs) < 2:
        raise ValueError("need a monic polynomial of degree >= 1")
    if abs(coeffs[0] - 1.0) > 1e-12:
        raise ValueError("polynomial must be monic")
    m = len(coeffs) - 1
    G = np.zeros((m, m))
    G[:-1, 1:] = np.eye(m - 1)
    G[-1, :] = -coeffs[:0:-1]  # [-c_0, -c_1, ..., -c_{m-1}]
    return G


@dataclass
class MonomialBasis:
    """Ordered degree-ell monomial exponent vectors in n_vars variables.

    Ordering is lexicographic descending on the exponent vectors, i.e.
    x1^ell, x1^(ell-1) x2, ..., xn^ell.
    """

    n_vars: int
    degree: int
    exponents: list = field(default_factory=list)

    def __len__(self):
        return len(self.exponents)

    def evaluate(self, v):
        """Componentwise monomial evaluation at a vector v."""
        v = np.asarray(v, dtype=float).ravel()
        return np.array([np.prod(v ** np.array(e)) for e in self.exponents])


def monomial_basis(n_vars, ell):
    """All degree-ell monomials in n_vars variables, paper ordering."""
    if n_vars < 1 or ell < 1:
        raise ValueError("need n_vars >= 1 and ell >= 1")
    exps = [e for e in itertools.product(range(ell, -1, -1), repeat=n_vars)
            if sum(e) == ell]
    # product with descending per-coordinate ranges is exactly
    # lexicographic descending; filter keeps the degree-ell slice.
    assert len(exps) == math.comb(n_vars + ell - 1, ell)
    return MonomialBasis(n_vars=n_vars, degree=ell, exponents=[tuple(e) for e in exps])


@dataclass
class LiftMaps:
    """Maps between the Kronecker power v^(ell) and the monomial vector
    v^[ell]:  v^[ell] = M v^(ell)  and  v^(ell) = N v^[ell].

    M symmetrizes (averages all Kronecker slots carrying the same
    monomial); each row of N has a single 1 sending the monomial value to
    one Kronecker slot; M N = I.
    """

    n_vars: int
    degree: int
    basis: MonomialBasis
    M: np.ndarray
    N: np.ndarray


def lift_maps(n_vars, ell):
    """Build the (M, N) lift maps for degree-ell monomials."""
    basis = monomial_basis(n_vars, ell)
    index = {e: i for i, e in enumerate(basis.exponents)}
    n_slots = n_vars ** ell
    N = np.zeros((n_slots, len(basis)))
    M = np.zeros((len(basis), n_slots))
    counts = np.zeros(len(basis))
    slot_mono = []
    for slot, idx in enumerate(itertools.product(range(n_vars), repeat=ell)):
        e = [0] * n_vars
        for i in idx:
            e[i] += 1
        m = index[tuple(e)]
        slot_mono.append(m)
        counts[m] += 1
    for slot, m in enumerate(slot_mono):
        N[slot, m] = 1.0
        M[m, slot] = 1.0 / counts[m]
    return LiftMaps(n_vars=n_vars, degree=ell, basis=basis, M=M, N=N)
