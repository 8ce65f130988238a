import numpy as np
import pytest

import regulata as rg
from regulata import AssumptionViolated


def rot(w):
    return [[0.0, w], [-w, 0.0]]


def test_build_exosystem_blocks(exo):
    assert exo.n_r == 2 and exo.n_w == 2 and exo.n_v == 4
    assert exo.marginally_stable
    assert np.allclose(np.sort(np.abs(np.linalg.eigvals(exo.S).imag)),
                       [np.pi / 5, np.pi / 5, 1.0, 1.0])


def test_build_exosystem_rejects_decaying_modes():
    with pytest.raises(AssumptionViolated):
        rg.build_exosystem([[-1.0]])


def test_internal_model_structure(exo):
    im = rg.internal_model(exo.S, n_y=1)
    m = im.beta.shape[0]
    assert m == 4 and im.n_z == 4
    # companion form: ones on the superdiagonal
    assert np.allclose(im.beta[:-1, 1:], np.eye(m - 1))
    assert np.allclose(im.sigma, [0.0, 0.0, 0.0, 1.0])
    # (beta, sigma) controllable in companion form
    ctrb = np.column_stack([np.linalg.matrix_power(im.beta, j) @ im.sigma
                            for j in range(m)])
    assert np.linalg.matrix_rank(ctrb) == m


def test_internal_model_copies(exo):
    im = rg.internal_model(exo.S, n_y=2)
    assert im.n_z == 8
    assert im.G2.shape == (8, 2)
    assert np.allclose(im.G1[:4, :4], im.beta)
    assert np.allclose(im.G1[:4, 4:], 0.0)


def test_internal_model_spectrum_matches_source(exo):
    im = rg.internal_model(exo.S, n_y=1)
    lam = np.linalg.eigvals(im.beta)
    assert np.allclose(lam.real, 0.0, atol=1e-8)
    assert np.allclose(np.sort(lam.imag),
                       [-1.0, -np.pi / 5, np.pi / 5, 1.0], atol=1e-8)


def test_k_fold_dimensions(exo):
    kf = rg.k_fold(exo.S, 2)
    assert [b.shape[0] for b in kf.blocks] == [4, 10]
    assert kf.S_kf.shape == (14, 14)
    assert np.allclose(rg.k_fold(exo.S, 1).S_kf, exo.S)


def test_kth_order_reduces_to_plain(exo):
    im1 = rg.internal_model(exo.S, n_y=1)
    imk = rg.kth_order_internal_model(exo.S, 1, n_y=1)
    assert np.allclose(im1.G1, imk.G1)
    assert np.allclose(im1.G2, imk.G2)


def test_second_order_internal_model_frequencies(exo):
    # degree-2 monomials add 0, 2w1, 2w2, w1 +/- w2 to the two base
    # frequencies, for a minimal polynomial of degree 13
    im = rg.kth_order_internal_model(exo.S, 2, n_y=1)
    assert im.beta.shape[0] == 13
    w1, w2 = np.pi / 5, 1.0
    expected = sorted({0.0, w1, w2, 2 * w1, 2 * w2, w1 + w2, w2 - w1})
    got = np.sort(np.unique(np.round(
        np.abs(np.linalg.eigvals(im.beta).imag), 8)))
    assert np.allclose(got, expected, atol=1e-8)
