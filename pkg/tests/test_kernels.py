"""The compiled kernels and the pure-numpy fallback are the same code
path; these tests pin their agreement and the env-flag selection."""

import os
import subprocess
import sys

import numpy as np

import regulata as rg
from regulata import _kernels


def test_env_flag_selects_pure_numpy():
    out = subprocess.run(
        [sys.executable, "-c",
         "import regulata; print(regulata.NUMBA_ENABLED)"],
        env=dict(os.environ, REGULATA_PURE_NUMPY="1"),
        capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"


def test_lti_trajectory_pure_vs_selected():
    rng = np.random.default_rng(0)
    Phi = np.eye(3) + 0.01 * rng.standard_normal((3, 3))
    y0 = rng.standard_normal(3)
    a = _kernels.lti_trajectory(Phi, y0, 200, 10)
    b = _kernels._lti_trajectory(Phi, y0, 200, 10)
    assert a[1] == b[1] and a[2] == b[2]
    assert np.array_equal(a[0], b[0])


def test_lti_trajectory_divergence_flag():
    Phi = np.array([[2.0]])
    out, filled, div = _kernels._lti_trajectory(Phi, np.array([1.0]), 200, 10)
    assert div > 0


def test_ball_beam_kernel_pure_vs_selected(exo):
    rng = np.random.default_rng(1)
    n_z = 4
    args = (np.array([0.7134]), 9.81, np.ones((1, 1)), np.ones((1, 1)),
            np.ones(1), 0.1 * rng.standard_normal((1, 4)),
            0.1 * rng.standard_normal((1, n_z)),
            -np.eye(n_z), np.ones(n_z), exo.S,
            0.01 * rng.standard_normal((1, 4)), np.zeros((1, n_z)),
            0.001 * rng.standard_normal(4), 1e-3, 500, 10)
    fast = _kernels.ball_beam_fleet_rk4(*args)
    pure = _kernels._bb_fleet_rk4(*args)
    for f, p in zip(fast, pure):
        assert np.array_equal(np.asarray(f), np.asarray(p))
