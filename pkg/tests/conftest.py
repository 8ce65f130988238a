"""Shared fixtures: the two-frequency exosystem and a cached linear
synthesis run reused by several test modules."""

import numpy as np
import pytest

import regulata as rg

OMEGA1 = np.pi / 5
OMEGA2 = 1.0


def rot(w):
    return [[0.0, w], [-w, 0.0]]


@pytest.fixture(scope="session")
def exo():
    return rg.build_exosystem(rot(OMEGA1), rot(OMEGA2))


@pytest.fixture(scope="session")
def robot_setup(exo):
    """Plant, internal model, dataset and controller for the linear
    example, shared across tests (synthesis is deterministic)."""
    plant = rg.from_registry("robot")
    im = rg.internal_model(exo.S, n_y=1)
    cfg = rg.ExperimentConfig(T=20, sample_dt=0.01, input_bound=0.5,
                              exo_init_bound=0.0025, noise_bound=0.01,
                              seed=0, mode="restarts", restart_radius=1.0)
    ds = rg.run_experiment(rg.augment(plant, im), exo, cfg)
    ctrl = rg.synthesize_linear(ds, im)
    return plant, im, ds, ctrl
