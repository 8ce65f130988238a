"""Hot simulation kernels.

Fixed-step integration loops dominate the runtime of closed-loop
verification (1e5 steps per run, tens of seeded runs per study).  The two
kernels here are compiled with numba when available; setting the
environment variable REGULATA_PURE_NUMPY=1 (or missing numba) selects the
identical pure-numpy code path.  benchmarks/bench_kernels.py compares the
two.
"""

import os

import numpy as np

_DIVERGENCE_NORM = 1e9


def _want_numba():
    if os.environ.get("REGULATA_PURE_NUMPY", "") not in ("", "0"):
        return False
    try:
        import numba  # noqa: F401
        return True
    except ImportError:
        return False


NUMBA_ENABLED = _want_numba()


def _lti_trajectory(Phi, y0, n_steps, record_every):
    """Iterate y <- Phi y, recording the state every record_every steps.

    Returns (out, n_recorded, diverged_step).  out[0] is y0; diverged_step
    is -1 when the run completed, else the step index at which the state
    left the finite range (recording stops there).
    """
    n = y0.shape[0]
    n_rec = n_steps // record_every + 1
    out = np.zeros((n_rec, n))
    out[0] = y0
    y = y0.copy()
    filled = 1
    for k in range(1, n_steps + 1):
        y = Phi @ y
        bad = False
        s = 0.0
        for i in range(n):
            s += y[i] * y[i]
            if not np.isfinite(y[i]):
                bad = True
        if bad or s > _DIVERGENCE_NORM ** 2:
            return out, filled, k
        if k % record_every == 0:
            out[filled] = y
            filled += 1
    return out, filled, -1


def _bb_rhs(h0, g, W, Hm, pin, Kx, Kz, G1, G2, S, X, Z, v, dX, dZ, dv, U):
    """Ball-and-beam fleet right-hand side, filled in place.

    Agents follow the beam dynamics with per-agent h0; inputs are the
    distributed law u_i = Kx_i (sum_j W_ij x_j) + Kz_i z_i and the
    internal models are driven by the virtual errors built from Hm and the
    pinning weights (a single system is the N = 1, W = Hm = pin = 1 case).
    """
    N = X.shape[0]
    n_z = Z.shape[1]
    y0 = v[0] + v[2]
    for i in range(N):
        ev = -pin[i] * y0
        for j in range(N):
            ev += Hm[i, j] * X[j, 0]
        u = 0.0
        for j in range(N):
            w = W[i, j]
            if w != 0.0:
                for k in range(4):
                    u += Kx[i, k] * w * X[j, k]
        for k in range(n_z):
            u += Kz[i, k] * Z[i, k]
        U[i] = u
        dX[i, 0] = X[i, 1] + v[1]
        dX[i, 1] = h0[i] * X[i, 0] * X[i, 3] * X[i, 3] - g * h0[i] * np.sin(X[i, 2])
        dX[i, 2] = X[i, 3]
        dX[i, 3] = u
        for k in range(n_z):
            acc = G2[k] * ev
            for l in range(n_z):
                acc += G1[k, l] * Z[i, l]
            dZ[i, k] = acc
    for k in range(4):
        acc = 0.0
        for l in range(4):
            acc += S[k, l] * v[l]
        dv[k] = acc


def _bb_fleet_rk4(h0, g, W, Hm, pin, Kx, Kz, G1, G2, S, X0, Z0, v0,
                  dt, n_steps, record_every):
    """Classical 4th-order fixed-step integration of the ball-and-beam
    fleet closed loop.

    Returns (Xs, Zs, Vs, Us, Es, Evs, n_recorded, diverged_step); rows are
    recorded every record_every steps starting at t = 0, with inputs and
    (virtual) errors evaluated at the recorded states.
    """
    N = X0.shape[0]
    n_z = Z0.shape[1]
    n_rec = n_steps // record_every + 1
    Xs = np.zeros((n_rec, N, 4))
    Zs = np.zeros((n_rec, N, n_z))
    Vs = np.zeros((n_rec, 4))
    Us = np.zeros((n_rec, N))
    Es = np.zeros((n_rec, N))
    Evs = np.zeros((n_rec, N))

    X = X0.copy()
    Z = Z0.copy()
    v = v0.copy()
    k1X = np.zeros((N, 4)); k1Z = np.zeros((N, n_z)); k1v = np.zeros(4)
    k2X = np.zeros((N, 4)); k2Z = np.zeros((N, n_z)); k2v = np.zeros(4)
    k3X = np.zeros((N, 4)); k3Z = np.zeros((N, n_z)); k3v = np.zeros(4)
    k4X = np.zeros((N, 4)); k4Z = np.zeros((N, n_z)); k4v = np.zeros(4)
    U = np.zeros(N)

    filled = 0
    for step in range(0, n_steps + 1):
        if step > 0:
            _bb_rhs(h0, g, W, Hm, pin, Kx, Kz, G1, G2, S,
                    X, Z, v, k1X, k1Z, k1v, U)
            _bb_rhs(h0, g, W, Hm, pin, Kx, Kz, G1, G2, S,
                    X + 0.5 * dt * k1X, Z + 0.5 * dt * k1Z,
                    v + 0.5 * dt * k1v, k2X, k2Z, k2v, U)
            _bb_rhs(h0, g, W, Hm, pin, Kx, Kz, G1, G2, S,
                    X + 0.5 * dt * k2X, Z + 0.5 * dt * k2Z,
                    v + 0.5 * dt * k2v, k3X, k3Z, k3v, U)
            _bb_rhs(h0, g, W, Hm, pin, Kx, Kz, G1, G2, S,
                    X + dt * k3X, Z + dt * k3Z, v + dt * k3v,
                    k4X, k4Z, k4v, U)
            X = X + (dt / 6.0) * (k1X + 2.0 * k2X + 2.0 * k3X + k4X)
            Z = Z + (dt / 6.0) * (k1Z + 2.0 * k2Z + 2.0 * k3Z + k4Z)
            v = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            bad = False
            s = 0.0
            for i in range(N):
                for k in range(4):
                    s += X[i, k] * X[i, k]
                    if not np.isfinite(X[i, k]):
                        bad = True
                for k in range(n_z):
                    s += Z[i, k] * Z[i, k]
                    if not np.isfinite(Z[i, k]):
                        bad = True
            if bad or s > _DIVERGENCE_NORM ** 2:
                return Xs, Zs, Vs, Us, Es, Evs, filled, step
        if step % record_every == 0:
            Xs[filled] = X
            Zs[filled] = Z
            Vs[filled] = v
            _bb_rhs(h0, g, W, Hm, pin, Kx, Kz, G1, G2, S, X, Z, v,
                    k1X, k1Z, k1v, U)
            Us[filled] = U
            y0 = v[0] + v[2]
            for i in range(N):
                Es[filled, i] = X[i, 0] - y0
                ev = -pin[i] * y0
                for j in range(N):
                    ev += Hm[i, j] * X[j, 0]
                Evs[filled, i] = ev
            filled += 1
    return Xs, Zs, Vs, Us, Es, Evs, filled, -1


if NUMBA_ENABLED:
    from numba import njit

    _bb_rhs = njit(cache=True)(_bb_rhs)
    lti_trajectory = njit(cache=True)(_lti_trajectory)
    ball_beam_fleet_rk4 = njit(cache=True)(_bb_fleet_rk4)
else:
    lti_trajectory = _lti_trajectory
    ball_beam_fleet_rk4 = _bb_fleet_rk4
