"""Exosystems and internal models.

Builds block-diagonal exosystems from reference/disturbance generators,
minimal per-output-channel internal models (companion realization of the
minimal polynomial), lifted matrices governing the monomial vectors
v^[ell], and their k-fold stacks for higher-order regulation.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolated
from .matrixops import (blockdiag, companion, eigenvalues, kron, lift_maps,
                        minimal_polynomial)

SPECTRUM_RTOL = 1e-8


@dataclass
class Exosystem:
    """Autonomous generator v' = S v of references (r block) and
    disturbances (w block)."""

    S: np.ndarray
    n_r: int
    n_w: int
    marginally_stable: bool = False  # all eigenvalues on the imaginary axis

    @property
    def n_v(self):
        return self.n_r + self.n_w


def build_exosystem(S_r, S_w=None):
    """Stack reference and disturbance generators block-diagonally.

    Raises AssumptionViolated when some eigenvalue has negative real part
    (the exosignal would vanish and the problem trivializes).  Records
    whether the stronger zero-real-part condition needed by the nonlinear
    pipeline holds.
    """
    S_r = np.atleast_2d(np.asarray(S_r, dtype=float))
    blocks = [S_r]
    n_w = 0
    if S_w is not None and np.size(S_w):
        S_w = np.atleast_2d(np.asarray(S_w, dtype=float))
        blocks.append(S_w)
        n_w = S_w.shape[0]
    S = blockdiag(blocks)
    tol = SPECTRUM_RTOL * max(1.0, np.linalg.norm(S, 2))
    re = eigenvalues(S).real
    if np.min(re) < -tol:
        raise AssumptionViolated(
            "exosystem", f"eigenvalue with real part {np.min(re):.3g} < 0")
    return Exosystem(S=S, n_r=S_r.shape[0], n_w=n_w,
                     marginally_stable=bool(np.max(np.abs(re)) <= tol))


@dataclass
class InternalModel:
    """n_y-copy internal model (G1, G2) built from a companion block beta
    and injection vector sigma."""

    G1: np.ndarray
    G2: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    n_y: int
    source_min_poly: np.ndarray
    order: int = 1
    min_poly_ill_conditioned: bool = False

    @property
    def n_z(self):
        return self.G1.shape[0]

    @property
    def m(self):
        return self.beta.shape[0]


def internal_model(S_source, n_y=1, cluster_tol=None):
    """Minimal n_y-copy internal model of a signal generator S_source.

    beta is the companion matrix of the minimal polynomial of S_source and
    sigma the last standard basis vector, which makes (beta, sigma)
    controllable in companion form.
    """
    if n_y < 1:
        raise ValueError("n_y must be >= 1")
    mp = minimal_polynomial(S_source, cluster_tol)
    beta = companion(mp.coeffs)
    m = beta.shape[0]
    sigma = np.zeros((m, 1))
    sigma[-1, 0] = 1.0
    G1 = blockdiag([beta] * n_y)
    G2 = blockdiag([sigma] * n_y)
    return InternalModel(G1=G1, G2=G2, beta=beta, sigma=sigma.ravel(),
                         n_y=n_y, source_min_poly=mp.coeffs,
                         min_poly_ill_conditioned=mp.ill_conditioned)


def s_ell(S, ell):
    """Lifted matrix driving the degree-ell monomial vector:
    d/dt v^[ell] = s_ell(S, ell) v^[ell]."""
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if ell == 1:
        return S.copy()
    lm = lift_maps(n, ell)
    acc = np.zeros((n ** ell, n ** ell))
    for i in range(1, ell + 1):
        acc += kron(np.eye(n ** (i - 1)), kron(S, np.eye(n ** (ell - i))))
    return lm.M @ acc @ lm.N


@dataclass
class KFoldExosystem:
    """Block-diagonal stack of the lifted matrices for degrees 1..k."""

    k: int
    blocks: list = field(default_factory=list)
    S_kf: np.ndarray = None


def k_fold(S, k):
    """Assemble the k-fold exosystem from a generator S."""
    if k < 1:
        raise ValueError("k must be >= 1")
    blocks = [s_ell(S, ell) for ell in range(1, k + 1)]
    return KFoldExosystem(k=k, blocks=blocks, S_kf=blockdiag(blocks))


def kth_order_internal_model(S, k, n_y=1, cluster_tol=None):
    """Internal model of the k-fold exosystem; k = 1 reduces to the plain
    internal model of S."""
    kf = k_fold(S, k)
    im = internal_model(kf.S_kf, n_y=n_y, cluster_tol=cluster_tol)
    im.order = k
    return im
