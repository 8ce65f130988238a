import numpy as np
import pytest

import regulata as rg
from regulata.plants import BALL_BEAM_H0, GRAVITY


def test_registry():
    assert isinstance(rg.from_registry("robot"), rg.LinearPlant)
    assert len(rg.from_registry("robot_fleet")) == 4
    with pytest.raises(KeyError):
        rg.from_registry("nope")


def test_linear_plant_validation():
    with pytest.raises(ValueError):
        rg.LinearPlant(A=[[0.0, 1.0]], B=[[1.0]], C=[[1.0]], E=[[0.0]],
                       F=[[0.0]])


def test_nonlinear_plant_requires_origin_equilibrium():
    with pytest.raises(ValueError):
        rg.NonlinearPlant(n_x=1, n_u=1, n_v=1, n_y=1,
                          f=lambda x, u, v: x + 1.0,
                          h=lambda x, v: x)


def test_ball_beam_flow():
    bb = rg.from_registry("ball_beam")
    x = np.array([0.1, 0.2, 0.3, 0.4])
    v = np.array([0.01, 0.02, 0.03, 0.04])
    dx = bb.f(x, np.array([0.5]), v)
    assert np.isclose(dx[0], 0.2 + 0.02)
    assert np.isclose(dx[1], BALL_BEAM_H0 * 0.1 * 0.16
                      - GRAVITY * BALL_BEAM_H0 * np.sin(0.3))
    assert np.isclose(dx[2], 0.4)
    assert np.isclose(dx[3], 0.5)
    assert np.isclose(bb.h(x, v)[0], 0.1 - 0.04)


def test_linearize_matches_analytic():
    bb = rg.from_registry("ball_beam")
    lin = rg.linearize(bb)
    A_ref = np.array([[0.0, 1.0, 0.0, 0.0],
                      [0.0, 0.0, -GRAVITY * BALL_BEAM_H0, 0.0],
                      [0.0, 0.0, 0.0, 1.0],
                      [0.0, 0.0, 0.0, 0.0]])
    assert np.allclose(lin.A, A_ref, atol=1e-6)
    assert np.allclose(lin.B.ravel(), [0.0, 0.0, 0.0, 1.0], atol=1e-8)
    assert np.allclose(lin.E[0], [0.0, 1.0, 0.0, 0.0], atol=1e-6)
    assert np.allclose(lin.C, [[1.0, 0.0, 0.0, 0.0]], atol=1e-8)
    assert np.allclose(lin.F, [[-1.0, 0.0, -1.0, 0.0]], atol=1e-8)
    # linearize is the identity on linear plants
    assert rg.linearize(lin) is lin


def test_augment_shapes_and_flow(exo):
    bb = rg.from_registry("ball_beam")
    im = rg.internal_model(exo.S, n_y=1)
    ap = rg.augment(bb, im)
    assert ap.n_xi == 8 and ap.n_x == 4 and ap.n_z == 4
    assert ap.A_xi.shape == (8, 8) and ap.B_xi.shape == (8, 1)
    xi = np.concatenate([np.zeros(4), np.array([1.0, 0.0, 0.0, 0.0])])
    d = ap.flow(xi, np.zeros(1), np.zeros(4))
    # internal-model rows follow G1 z at the plant equilibrium
    assert np.allclose(d[4:], im.G1 @ xi[4:])


def test_augment_copy_count_mismatch(exo):
    im2 = rg.internal_model(exo.S, n_y=2)
    with pytest.raises(ValueError):
        rg.augment(rg.from_registry("robot"), im2)


def test_fleet_heterogeneity():
    fleet = rg.from_registry("ball_beam_fleet")
    h0s = [p.kernel_params["h0"] for p in fleet]
    assert len(set(h0s)) == 4
