"""Offline experiments and data-consistency machinery.

Simulates noisy experiments on an augmented plant, assembles the data
matrices with forward-difference derivatives, derives noise-energy bounds
Delta, and builds the quadratic-form parameters (Psi, Upsilon, Sigma)
describing the set of systems consistent with the data.
"""

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ExperimentDiverged

DEFAULT_RANK_RTOL = 1e-8


@dataclass
class ExperimentConfig:
    """Hyperparameters of one offline data-collection run.

    All *_bound fields are half-widths of symmetric uniform ranges
    [-b, b], applied per component.  mode "single" runs one trajectory
    with piecewise-constant inputs; mode "restarts" draws, for every
    sample, a fresh plant state in a ball of restart_radius (to stay near
    the equilibrium of a nonlinear plant) and fresh internal-model states
    from a box of half-width state_init_bound.
    """

    T: int = 20
    sample_dt: float = 0.01
    input_bound: float = 0.5
    exo_init_bound: float = 0.0025
    noise_bound: float = 0.01
    seed: int = 0
    mode: str = "single"
    state_init_bound: float = 1.0
    restart_radius: float = 0.1
    substeps: int = 10

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.mode not in ("single", "restarts"):
            raise ValueError("mode must be 'single' or 'restarts'")
        if self.sample_dt <= 0 or self.substeps < 1:
            raise ValueError("bad integration settings")


@dataclass
class DataSet:
    """Recorded input/state data with forward-difference derivatives.

    true_V and true_D are simulator ground truth (exosignal samples and
    the residual making Xi_plus = A Xi_minus + B U_minus + E V + D exact);
    they are None for externally imported data.
    """

    U_minus: np.ndarray
    Xi_minus: np.ndarray
    Xi_plus: np.ndarray
    sample_dt: float
    true_V: np.ndarray = None
    true_D: np.ndarray = None
    A_true: np.ndarray = None
    B_true: np.ndarray = None
    E_true: np.ndarray = None

    @property
    def T(self):
        return self.U_minus.shape[1]

    @property
    def n_u(self):
        return self.U_minus.shape[0]

    @property
    def n_xi(self):
        return self.Xi_minus.shape[0]

    @property
    def residual(self):
        """E V + D, the total data-equation residual of the true system."""
        if self.A_true is None:
            raise ValueError("residual needs simulator ground truth")
        return (self.Xi_plus - self.A_true @ self.Xi_minus
                - self.B_true @ self.U_minus)


def _rk4_step(rhs, y, dt):
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _uniform_ball(rng, n, radius):
    d = rng.standard_normal(n)
    d /= max(np.linalg.norm(d), 1e-300)
    return radius * rng.uniform() ** (1.0 / n) * d


def run_experiment(plant, exo, cfg):
    """Collect a DataSet from the augmented plant under random inputs.

    Inputs and injected noise are piecewise constant per sample, with the
    noise entering the plant-state rows only; integration uses fixed-step
    RK4 with cfg.substeps internal steps per sample.  Plant-state
    derivatives are taken as forward differences so the truncation error
    lands in the recorded residual; internal-model derivatives are exact
    because those states are generated inside the controller from the
    measured error.
    """
    rng = np.random.default_rng(cfg.seed)
    n_xi, n_u, n_v = plant.n_xi, plant.n_u, plant.n_v
    n_x = plant.n_x
    S = exo.S
    h = cfg.sample_dt / cfg.substeps

    U = np.zeros((n_u, cfg.T))
    Xi = np.zeros((n_xi, cfg.T))
    Xi_next = np.zeros((n_xi, cfg.T))
    Zdot = np.zeros((n_xi - n_x, cfg.T))
    V = np.zeros((n_v, cfg.T))

    def one_sample(xi, v, u, d):
        y = np.concatenate([xi, v])

        def rhs(y):
            dy = np.concatenate([plant.flow(y[:n_xi], u, y[n_xi:]),
                                 S @ y[n_xi:]])
            dy[:n_x] += d
            return dy

        for _ in range(cfg.substeps):
            y = _rk4_step(rhs, y, h)
        return y[:n_xi], y[n_xi:]

    def zdot(xi, v):
        # internal-model states live in the controller, so their
        # derivative is known exactly from the measured error
        e = plant.base.h(xi[:n_x], v)
        return plant.im.G1 @ xi[n_x:] + plant.im.G2 @ e

    if cfg.mode == "single":
        xi = rng.uniform(-cfg.state_init_bound, cfg.state_init_bound, n_xi)
        v = rng.uniform(-cfg.exo_init_bound, cfg.exo_init_bound, n_v)
        for k in range(cfg.T):
            u = rng.uniform(-cfg.input_bound, cfg.input_bound, n_u)
            d = rng.uniform(-cfg.noise_bound, cfg.noise_bound, n_x)
            U[:, k], Xi[:, k], V[:, k] = u, xi, v
            Zdot[:, k] = zdot(xi, v)
            xi, v = one_sample(xi, v, u, d)
            if not np.all(np.isfinite(xi)):
                raise ExperimentDiverged(f"state blew up at sample {k}")
            Xi_next[:, k] = xi
    else:
        for k in range(cfg.T):
            # plant states restart close to the equilibrium; internal-model
            # states are set inside the controller, so they can be drawn
            # from a larger box for excitation at no linearization cost
            xi = np.concatenate([
                _uniform_ball(rng, n_x, cfg.restart_radius),
                rng.uniform(-cfg.state_init_bound, cfg.state_init_bound,
                            n_xi - n_x)])
            v = rng.uniform(-cfg.exo_init_bound, cfg.exo_init_bound, n_v)
            u = rng.uniform(-cfg.input_bound, cfg.input_bound, n_u)
            d = rng.uniform(-cfg.noise_bound, cfg.noise_bound, n_x)
            U[:, k], Xi[:, k], V[:, k] = u, xi, v
            Zdot[:, k] = zdot(xi, v)
            xi_next, _ = one_sample(xi, v, u, d)
            if not np.all(np.isfinite(xi_next)):
                raise ExperimentDiverged(f"state blew up at sample {k}")
            Xi_next[:, k] = xi_next

    Xi_plus = (Xi_next - Xi) / cfg.sample_dt
    Xi_plus[n_x:] = Zdot
    A, B, E = plant.A_xi, plant.B_xi, plant.E_xi
    true_D = Xi_plus - A @ Xi - B @ U - E @ V
    return DataSet(U_minus=U, Xi_minus=Xi, Xi_plus=Xi_plus,
                   sample_dt=cfg.sample_dt, true_V=V, true_D=true_D,
                   A_true=A, B_true=B, E_true=E)


def rank_check(ds, rel_tol=DEFAULT_RANK_RTOL):
    """True iff the stacked [U_-; Xi_-] matrix has full numerical row
    rank (singular values above rel_tol * sigma_max)."""
    stacked = np.vstack([ds.U_minus, ds.Xi_minus])
    if stacked.shape[1] < stacked.shape[0]:
        return False
    sv = np.linalg.svd(stacked, compute_uv=False)
    return bool(np.sum(sv > rel_tol * sv[0]) == stacked.shape[0])


def _psd_sqrt(M):
    w, V = np.linalg.eigh((M + M.T) / 2)
    return V @ np.diag(np.sqrt(np.clip(w, 0.0, None))) @ V.T


def delta_bound(ds, mode="oracle-inflate", rho=1.1, d_bar=None, v_bar=None,
                E_norm_bound=None):
    """Noise-energy bound Delta.

    oracle-inflate: rho times the principal square root of the simulator's
    true residual Gram matrix (requires ground truth).  a-priori:
    sqrt(T) * (d_bar + E_norm_bound * v_bar) * I with d_bar/v_bar
    Euclidean-norm bounds on the per-sample noise and exosignal.
    """
    if rho < 1.0:
        raise ValueError("rho must be >= 1")
    if mode == "oracle-inflate":
        R = ds.residual
        return rho * _psd_sqrt(R @ R.T)
    if mode == "a-priori":
        if d_bar is None or v_bar is None or E_norm_bound is None:
            raise ValueError("a-priori mode needs d_bar, v_bar and "
                             "E_norm_bound")
        return (np.sqrt(ds.T) * (d_bar + E_norm_bound * v_bar)
                * np.eye(ds.n_xi))
    raise ValueError(f"unknown delta mode {mode!r}")


@dataclass
class EllipsoidSet:
    """Quadratic-form parameters of the data-consistent set.

    A pair (Abar, Bbar) with Phi^T = [Abar Bbar] belongs to the set iff
    Sigma + Upsilon^T Phi + Phi^T Upsilon + Phi^T Psi Phi <= 0.
    """

    Psi: np.ndarray
    Upsilon: np.ndarray
    Sigma: np.ndarray
    Delta: np.ndarray
    n_xi: int
    n_u: int


def ellipsoid(ds, Delta):
    """Assemble (Psi, Upsilon, Sigma) from the data and a noise bound."""
    if not rank_check(ds):
        warnings.warn("stacked data matrix is row-rank deficient; the "
                      "consistent set is unbounded", stacklevel=2)
    Zm = np.vstack([ds.Xi_minus, ds.U_minus])
    Psi = Zm @ Zm.T
    Upsilon = -Zm @ ds.Xi_plus.T
    Sigma = ds.Xi_plus @ ds.Xi_plus.T - Delta @ Delta.T
    Sigma = (Sigma + Sigma.T) / 2
    return EllipsoidSet(Psi=Psi, Upsilon=Upsilon, Sigma=Sigma, Delta=Delta,
                        n_xi=ds.n_xi, n_u=ds.n_u)


def membership(es, Abar, Bbar):
    """Largest eigenvalue of the consistency quadratic form; <= 0 means
    (Abar, Bbar) is a member of the set."""
    Phi = np.vstack([np.atleast_2d(Abar).T, np.atleast_2d(Bbar).T])
    Q = (es.Sigma + es.Upsilon.T @ Phi + Phi.T @ es.Upsilon
         + Phi.T @ es.Psi @ Phi)
    return float(np.max(np.linalg.eigvalsh((Q + Q.T) / 2)))


# ---------------------------------------------------------------------------
# CSV / manifest import-export

_MATRICES = ("U_minus", "Xi_minus", "Xi_plus")


def _write_matrix(path, M):
    header = ",".join(str(j) for j in range(M.shape[1]))
    np.savetxt(path, M, delimiter=",", header=header, comments="")


def export_dataset(ds, directory):
    """Write one CSV per data matrix plus a manifest naming them."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"T": ds.T, "n_u": ds.n_u, "n_xi": ds.n_xi,
                "sample_dt": ds.sample_dt, "files": {}}
    for name in _MATRICES:
        fname = f"{name}.csv"
        _write_matrix(directory / fname, getattr(ds, name))
        manifest["files"][name] = fname
    with open(directory / "dataset.json", "w") as f:
        json.dump(manifest, f, indent=2)
    return directory / "dataset.json"


def import_dataset(manifest_path):
    """Load a DataSet previously written by export_dataset (or supplied
    externally in the same layout).  Ground-truth fields stay None."""
    manifest_path = Path(manifest_path)
    with open(manifest_path) as f:
        manifest = json.load(f)
    mats = {}
    for name in _MATRICES:
        M = np.loadtxt(manifest_path.parent / manifest["files"][name],
                       delimiter=",", skiprows=1, ndmin=2)
        mats[name] = M
    ds = DataSet(sample_dt=float(manifest.get("sample_dt", 0.0)), **mats)
    if ds.n_u != manifest["n_u"] or ds.n_xi != manifest["n_xi"]:
        raise ValueError("manifest dimensions do not match CSV contents")
    return ds
