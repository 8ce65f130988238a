import numpy as np
import pytest

import regulata as rg
from regulata import Diverged


def test_solve_ore_exact(exo):
    plant = rg.from_registry("robot")
    ore = rg.solve_ore(plant, exo.S)
    assert ore.unique
    assert ore.residual_dynamics <= 1e-8
    assert ore.residual_output <= 1e-8
    assert np.linalg.norm(plant.C @ ore.Pi + plant.F) <= 1e-8


def test_controller_assembly(robot_setup):
    _, im, ds, ctrl = robot_setup
    assert ctrl.Kx.shape == (1, 2)
    assert ctrl.Kz.shape == (1, im.n_z)
    assert np.allclose(ctrl.K_xi, np.hstack([ctrl.Kx, ctrl.Kz]))
    assert ctrl.source.margin > 0


def test_closed_loop_tracking(robot_setup, exo):
    plant, _, _, ctrl = robot_setup
    sr = rg.simulate_closed_loop(plant, ctrl, exo, [1.0, 0.0],
                                 [0.5, 0.0, 0.5, 0.0], t_end=50.0, dt=1e-3)
    m = rg.tracking_metrics(sr)
    assert m["tail_sup_error"] <= 1e-2
    assert np.isfinite(m["time_to_band"])


def test_divergence_raises(robot_setup, exo):
    plant, im, _, _ = robot_setup
    # positive feedback on an unstable plant diverges quickly
    bad = rg.Controller(Kx=np.array([[50.0, 50.0]]),
                        Kz=np.zeros((1, im.n_z)), im=im)
    with pytest.raises(Diverged) as exc:
        rg.simulate_closed_loop(plant, bad, exo, [1.0, 0.0],
                                [0.1, 0.0, 0.1, 0.0], t_end=20.0, dt=1e-3)
    assert exc.value.partial is not None


def test_kernel_matches_generic_integrator(exo):
    # ball-and-beam path through the compiled kernel agrees with the
    # generic RK4 fallback on the same controller
    bb = rg.from_registry("ball_beam")
    im = rg.kth_order_internal_model(exo.S, 2, n_y=1)
    cfg = rg.ExperimentConfig(T=50, sample_dt=0.002, input_bound=0.1,
                              exo_init_bound=0.005, noise_bound=0.002,
                              seed=1, mode="restarts", restart_radius=0.1)
    ds = rg.run_experiment(rg.augment(bb, im), exo, cfg)
    ctrl = rg.synthesize_nonlinear_k(ds, exo.S, 2)
    x0, v0 = [0.005, 0.0, 0.0, 0.0], [0.003, 0.0, 0.003, 0.0]
    fast = rg.simulate_closed_loop(bb, ctrl, exo, x0, v0, t_end=2.0, dt=1e-3)
    generic = rg.NonlinearPlant(n_x=4, n_u=1, n_v=4, n_y=1,
                                f=bb.f, h=bb.h, name="no-kernel")
    slow = rg.simulate_closed_loop(generic, ctrl, exo, x0, v0,
                                   t_end=2.0, dt=1e-3)
    assert np.allclose(fast.e, slow.e, atol=1e-12)
    assert np.allclose(fast.xi, slow.xi, atol=1e-12)


def test_tracking_metrics_synthetic():
    t = np.linspace(0.0, 10.0, 1001)
    e = np.exp(-t)[:, None]
    sr = rg.SimResult(t=t, xi=np.zeros((1001, 1)), v=np.zeros((1001, 1)),
                      u=np.zeros((1001, 1)), e=e)
    m = rg.tracking_metrics(sr, tail_fraction=0.1, band=1e-2)
    assert np.isclose(m["tail_sup_error"], np.exp(-9.0))
    assert np.isclose(m["time_to_band"], -np.log(1e-2), atol=0.02)
    assert np.isclose(m["decay_slope_log10_per_s"], -1 / np.log(10),
                      atol=1e-6)
    with pytest.raises(ValueError):
        rg.tracking_metrics(sr, tail_fraction=1.5)


def test_sim_export_csv(tmp_path, robot_setup, exo):
    plant, _, _, ctrl = robot_setup
    sr = rg.simulate_closed_loop(plant, ctrl, exo, [1.0, 0.0],
                                 [0.5, 0.0, 0.5, 0.0], t_end=1.0, dt=1e-3)
    path = sr.export_csv(tmp_path / "traj.csv")
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape[0] == len(sr.t)
    assert np.allclose(data[:, 0], sr.t)
    assert np.allclose(data[:, 1], sr.e[:, 0])
