import numpy as np
import pytest

from regulata import (blockdiag, companion, eigenvalues, is_hurwitz, kron,
                      kron_power, lift_maps, minimal_polynomial,
                      monomial_basis)
from regulata.internal_model import s_ell


def test_kron_power():
    v = np.array([2.0, 3.0])
    assert np.allclose(kron_power(v, 0), [1.0])
    assert np.allclose(kron_power(v, 1), v)
    assert np.allclose(kron_power(v, 2), np.kron(v, v))
    with pytest.raises(ValueError):
        kron_power(v, -1)


def test_blockdiag():
    out = blockdiag([np.eye(2), [[3.0]]])
    assert out.shape == (3, 3)
    assert out[2, 2] == 3.0
    assert np.count_nonzero(out) == 3
    with pytest.raises(ValueError):
        blockdiag([])


def test_eigenvalues_and_hurwitz():
    A = np.diag([-1.0, -2.0])
    assert is_hurwitz(A)
    assert not is_hurwitz(A, margin=1.5)
    assert not is_hurwitz(np.diag([-1.0, 0.0]))
    assert np.allclose(sorted(eigenvalues(A).real), [-2.0, -1.0])
    with pytest.raises(ValueError):
        eigenvalues(np.zeros((2, 3)))


def test_minimal_polynomial_repeated_blocks():
    # two copies of the same rotation: minimal polynomial has degree 2
    w = 0.7
    S = blockdiag([[[0.0, w], [-w, 0.0]]] * 2)
    mp = minimal_polynomial(S)
    assert mp.degree == 2
    assert np.allclose(mp.coeffs, [1.0, 0.0, w ** 2])
    assert np.allclose(mp(S), 0.0, atol=1e-10)


def test_minimal_polynomial_jordan_block():
    S = np.array([[0.0, 1.0], [0.0, 0.0]])
    mp = minimal_polynomial(S)
    assert mp.degree == 2


def test_companion():
    G = companion([1.0, 2.0, 3.0])
    assert np.allclose(G, [[0.0, 1.0], [-3.0, -2.0]])
    # characteristic polynomial of the companion matrix is the input
    assert np.allclose(np.poly(G), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        companion([2.0, 1.0, 1.0])


def test_monomial_basis_ordering_and_count():
    b = monomial_basis(2, 2)
    assert b.exponents == [(2, 0), (1, 1), (0, 2)]
    v = np.array([2.0, 3.0])
    assert np.allclose(b.evaluate(v), [4.0, 6.0, 9.0])
    assert len(monomial_basis(4, 3)) == 20


def test_lift_maps_identity():
    for n_v, ell in [(2, 2), (3, 2), (2, 3), (4, 3)]:
        lm = lift_maps(n_v, ell)
        assert np.allclose(lm.M @ lm.N, np.eye(len(lm.basis)), atol=1e-14)


def test_lift_maps_consistency_with_kron_power():
    rng = np.random.default_rng(0)
    v = rng.uniform(-1, 1, 3)
    lm = lift_maps(3, 2)
    assert np.allclose(lm.M @ kron_power(v, 2), lm.basis.evaluate(v))


def test_s_ell_derivative_identity():
    # d/dt v^[ell] along v' = S v equals S^[ell] v^[ell]
    rng = np.random.default_rng(1)
    S = rng.standard_normal((3, 3))
    v = rng.uniform(-1, 1, 3)
    ell = 2
    lm = lift_maps(3, ell)
    Sl = s_ell(S, ell)
    eps = 1e-6
    lhs = (lm.basis.evaluate(v + eps * (S @ v))
           - lm.basis.evaluate(v - eps * (S @ v))) / (2 * eps)
    assert np.allclose(lhs, Sl @ lm.basis.evaluate(v), atol=1e-7)


def test_kron_matches_numpy():
    A = np.arange(4.0).reshape(2, 2)
    B = np.eye(2)
    assert np.allclose(kron(A, B), np.kron(A, B))
