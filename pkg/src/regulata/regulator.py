"""End-to-end synthesis and simulation for single systems.

Wires the data pipeline (ellipsoid -> LMI -> gain) into controllers,
provides the model-based regulator-equation solver as a verification
oracle, and runs closed-loop simulations with tracking metrics.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import lmi as lmi_mod
from ._kernels import ball_beam_fleet_rk4, lti_trajectory
from .datagen import delta_bound, ellipsoid, rank_check
from .errors import AssumptionViolated, Diverged
from .internal_model import kth_order_internal_model
from .matrixops import kron
from .plants import GRAVITY, LinearPlant, augment


@dataclass
class Controller:
    """Internal-model controller u = Kx x + Kz z, z' = G1 z + G2 e."""

    Kx: np.ndarray
    Kz: np.ndarray
    im: object
    source: lmi_mod.LmiSolution = None

    @property
    def K_xi(self):
        return np.hstack([self.Kx, self.Kz])


def _synthesize(ds, im, delta=None, rho=1.1, eps=None):
    if not rank_check(ds):
        raise AssumptionViolated("data rank",
                                 "[U_-; Xi_-] is row-rank deficient")
    if delta is None:
        delta = delta_bound(ds, "oracle-inflate", rho=rho)
    es = ellipsoid(ds, delta)
    sol = lmi_mod.solve(lmi_mod.assemble(es, eps=eps))
    K = lmi_mod.extract_gain(sol)
    n_x = ds.n_xi - im.n_z
    return Controller(Kx=K[:, :n_x], Kz=K[:, n_x:], im=im, source=sol), es


def synthesize_linear(ds, im, delta=None, rho=1.1, eps=None):
    """Data-driven controller for a linear plant augmented with im."""
    ctrl, _ = _synthesize(ds, im, delta=delta, rho=rho, eps=eps)
    return ctrl


def synthesize_nonlinear_k(ds, S, k, n_y=1, delta=None, rho=1.1, eps=None):
    """kth-order regulation controller; the data must come from the plant
    augmented with the kth-order internal model of S."""
    im = kth_order_internal_model(S, k, n_y=n_y)
    if ds.n_xi <= im.n_z:
        raise ValueError("dataset dimension does not match the kth-order "
                         "internal model")
    ctrl, _ = _synthesize(ds, im, delta=delta, rho=rho, eps=eps)
    return ctrl


@dataclass
class OreSolution:
    """Solution (Pi, Gamma) of the model-based regulator equations
    Pi S = A Pi + B Gamma + E,  0 = C Pi + F."""

    Pi: np.ndarray
    Gamma: np.ndarray
    residual_dynamics: float
    residual_output: float
    unique: bool = True


def solve_ore(plant: LinearPlant, S):
    """Solve the regulator equations for a known model by vectorization.

    Rank-deficient systems return the minimum-norm answer with
    unique=False.
    """
    A, B, C, E, F = plant.A, plant.B, plant.C, plant.E, plant.F
    S = np.asarray(S, dtype=float)
    n_x, n_u, n_v, n_y = plant.n_x, plant.n_u, plant.n_v, plant.n_y
    top = np.hstack([kron(S.T, np.eye(n_x)) - kron(np.eye(n_v), A),
                     -kron(np.eye(n_v), B)])
    bot = np.hstack([kron(np.eye(n_v), C),
                     np.zeros((n_y * n_v, n_u * n_v))])
    M = np.vstack([top, bot])
    b = np.concatenate([E.flatten(order="F"), -F.flatten(order="F")])
    sol, _, rank, _ = np.linalg.lstsq(M, b, rcond=None)
    Pi = sol[:n_x * n_v].reshape((n_x, n_v), order="F")
    Gamma = sol[n_x * n_v:].reshape((n_u, n_v), order="F")
    r_dyn = float(np.linalg.norm(Pi @ S - A @ Pi - B @ Gamma - E))
    r_out = float(np.linalg.norm(C @ Pi + F))
    return OreSolution(Pi=Pi, Gamma=Gamma, residual_dynamics=r_dyn,
                       residual_output=r_out, unique=bool(rank == M.shape[1]))


@dataclass
class SimResult:
    """Closed-loop trajectory on a uniform time grid."""

    t: np.ndarray
    xi: np.ndarray       # (n_rec, n_xi)
    v: np.ndarray        # (n_rec, n_v)
    u: np.ndarray        # (n_rec, n_u)
    e: np.ndarray        # (n_rec, n_y)
    meta: dict = field(default_factory=dict)

    def export_csv(self, path):
        n_y, n_xi, n_u, n_v = (self.e.shape[1], self.xi.shape[1],
                               self.u.shape[1], self.v.shape[1])
        header = ",".join(
            ["t"] + [f"e_{i + 1}" for i in range(n_y)]
            + [f"x_{i + 1}" for i in range(n_xi)]
            + [f"u_{i + 1}" for i in range(n_u)]
            + [f"v_{i + 1}" for i in range(n_v)])
        data = np.column_stack([self.t, self.e, self.xi, self.u, self.v])
        with open(path, "w") as f:
            f.write(header + "\n")
            for row in data:
                f.write(",".join(repr(float(x)) for x in row) + "\n")
        return path


def rk4_step_matrix(A, dt):
    """One-step propagator of the classical RK4 scheme for y' = A y."""
    M = dt * np.asarray(A, dtype=float)
    n = M.shape[0]
    Phi = np.eye(n)
    for k in (4, 3, 2, 1):
        Phi = np.eye(n) + (M / k) @ Phi
    return Phi


def _simulate_lti(Acl, y0, t_end, dt, record_every):
    n_steps = int(round(t_end / dt))
    Phi = rk4_step_matrix(Acl, dt)
    traj, filled, div_step = lti_trajectory(Phi, np.asarray(y0, dtype=float),
                                            n_steps, record_every)
    t = np.arange(filled) * (dt * record_every)
    return traj[:filled], t, div_step


def simulate_closed_loop(plant, ctrl, exo, x0, v0, t_end=50.0, dt=1e-3,
                         z0=None, record_every=10):
    """Integrate plant + internal model + exosystem under the controller.

    Linear plants use the exact LTI one-step propagator; the ball-and-beam
    family uses the compiled fleet kernel; other nonlinear plants fall
    back to a generic fixed-step RK4.  Raises Diverged (with the partial
    trajectory attached) when the state leaves the finite range.
    """
    im = ctrl.im
    n_x, n_z, n_v = plant.n_x, im.n_z, exo.n_v
    x0 = np.asarray(x0, dtype=float).ravel()
    v0 = np.asarray(v0, dtype=float).ravel()
    z0 = np.zeros(n_z) if z0 is None else np.asarray(z0, dtype=float).ravel()
    K = ctrl.K_xi
    meta = {"integrator": "rk4", "dt": dt, "t_end": t_end,
            "record_every": record_every}

    if isinstance(plant, LinearPlant):
        aug = augment(plant, im)
        Acl = np.block([[aug.A_xi + aug.B_xi @ K, aug.E_xi],
                        [np.zeros((n_v, n_x + n_z)), exo.S]])
        y0 = np.concatenate([x0, z0, v0])
        traj, t, div_step = _simulate_lti(Acl, y0, t_end, dt, record_every)
        xi, v = traj[:, :n_x + n_z], traj[:, n_x + n_z:]
        e = xi @ aug.C_xi.T + v @ aug.F.T
        u = xi @ K.T
        sr = SimResult(t=t, xi=xi, v=v, u=u, e=e, meta=meta)
        if div_step >= 0:
            raise Diverged(div_step * dt, partial=sr)
        return sr

    kp = getattr(plant, "kernel_params", None)
    if kp and kp.get("kind") == "ball_beam":
        Xs, Zs, Vs, Us, Es, Evs, filled, div_step = ball_beam_fleet_rk4(
            np.array([kp["h0"]]), GRAVITY,
            np.ones((1, 1)), np.ones((1, 1)), np.ones(1),
            ctrl.Kx.reshape(1, n_x), ctrl.Kz.reshape(1, n_z),
            im.G1, im.G2[:, 0].copy(), exo.S,
            x0.reshape(1, n_x), z0.reshape(1, n_z), v0,
            dt, int(round(t_end / dt)), record_every)
        t = np.arange(filled) * (dt * record_every)
        xi = np.hstack([Xs[:filled, 0, :], Zs[:filled, 0, :]])
        sr = SimResult(t=t, xi=xi, v=Vs[:filled],
                       u=Us[:filled, :1], e=Es[:filled, :1], meta=meta)
        if div_step >= 0:
            raise Diverged(div_step * dt, partial=sr)
        return sr

    return _simulate_generic(plant, ctrl, exo, x0, z0, v0, t_end, dt,
                             record_every, meta)


def _simulate_generic(plant, ctrl, exo, x0, z0, v0, t_end, dt,
                      record_every, meta):
    im = ctrl.im
    n_x = plant.n_x

    def rhs(x, z, v):
        u = ctrl.Kx @ x + ctrl.Kz @ z
        e = plant.h(x, v)
        return plant.f(x, u, v), im.G1 @ z + im.G2 @ e, exo.S @ v

    n_steps = int(round(t_end / dt))
    recs = []
    x, z, v = x0.copy(), z0.copy(), v0.copy()

    def snapshot():
        u = ctrl.Kx @ x + ctrl.Kz @ z
        recs.append((x.copy(), z.copy(), v.copy(), u, plant.h(x, v)))

    snapshot()
    div_step = -1
    for step in range(1, n_steps + 1):
        k1 = rhs(x, z, v)
        k2 = rhs(x + 0.5 * dt * k1[0], z + 0.5 * dt * k1[1], v + 0.5 * dt * k1[2])
        k3 = rhs(x + 0.5 * dt * k2[0], z + 0.5 * dt * k2[1], v + 0.5 * dt * k2[2])
        k4 = rhs(x + dt * k3[0], z + dt * k3[1], v + dt * k3[2])
        x = x + (dt / 6) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        z = z + (dt / 6) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        v = v + (dt / 6) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        state_sq = np.dot(x, x) + np.dot(z, z)
        if not np.isfinite(state_sq) or state_sq > 1e18:
            div_step = step
            break
        if step % record_every == 0:
            snapshot()
    t = np.arange(len(recs)) * (dt * record_every)
    xs, zs, vs, us, es = (np.array([r[i] for r in recs]) for i in range(5))
    sr = SimResult(t=t, xi=np.hstack([xs, zs]), v=vs, u=us, e=es, meta=meta)
    if div_step >= 0:
        raise Diverged(div_step * dt, partial=sr)
    return sr


def tracking_metrics(sr, tail_fraction=0.1, band=1e-2):
    """Summary metrics of a tracking run.

    Returns tail sup-norm of the error over the trailing window, the time
    from which the error stays inside [-band, band], and a decay-envelope
    slope (log10 error per second, least squares).
    """
    if not 0 < tail_fraction < 1:
        raise ValueError("tail_fraction must be in (0, 1)")
    err = np.max(np.abs(sr.e), axis=1)
    n = len(err)
    tail = err[int(np.ceil((1 - tail_fraction) * (n - 1))):]
    outside = np.nonzero(err > band)[0]
    if len(outside) == 0:
        t_band = 0.0
    elif outside[-1] + 1 >= n:
        t_band = float("inf")
    else:
        t_band = float(sr.t[outside[-1] + 1])
    pos = err > 1e-300
    if np.count_nonzero(pos) >= 2:
        slope = float(np.polyfit(sr.t[pos], np.log10(err[pos]), 1)[0])
    else:
        slope = 0.0
    return {"tail_sup_error": float(np.max(tail)) if len(tail) else 0.0,
            "time_to_band": t_band,
            "band": band,
            "decay_slope_log10_per_s": slope}


def export_metrics(metrics, path):
    with open(path, "w") as f:
        json.dump(metrics, f, indent=2)
    return path
