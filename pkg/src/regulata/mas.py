"""Leader-following multi-agent machinery.

Communication graphs with pinning to the exosystem node, per-agent
data-driven synthesis with eigenvalue-scaled gains, assembly of the
network closed-loop matrix, its spectrum-decomposition cross-check, and
fleet simulation (linear via the LTI propagator, ball-and-beam fleets via
the compiled kernel).
"""

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import lmi as lmi_mod
from ._kernels import ball_beam_fleet_rk4
from .datagen import delta_bound, ellipsoid, rank_check
from .errors import AssumptionViolated, ComplexSpectrum, Diverged, Infeasible
from .matrixops import blockdiag, kron
from .plants import GRAVITY, LinearPlant
from .regulator import _simulate_lti

SPECTRUM_IMAG_TOL = 1e-9


@dataclass
class Graph:
    """Directed communication graph of N agents plus the pinned exosystem
    node 0; carries the Laplacian L, pinning matrix Lambda, H = L + Lambda
    and the per-agent eigenvalues of H."""

    adjacency: np.ndarray
    pinning: np.ndarray
    L: np.ndarray = None
    Lambda: np.ndarray = None
    H: np.ndarray = None
    lambdas: np.ndarray = None

    @property
    def N(self):
        return self.adjacency.shape[0]


def _spanning_tree_from_root(adjacency, pinning):
    """Directed reachability of every agent from the exosystem node.

    Edges: 0 -> i when pinning[i] > 0, and j -> i when adjacency[i, j] > 0
    (agent i listens to agent j).
    """
    N = adjacency.shape[0]
    seen = set(np.nonzero(pinning > 0)[0])
    queue = deque(seen)
    while queue:
        j = queue.popleft()
        for i in np.nonzero(adjacency[:, j] > 0)[0]:
            if i not in seen:
                seen.add(i)
                queue.append(i)
    return len(seen) == N


def _agent_eigenvalue_pairing(H):
    """Pair the eigenvalues of H with agent indices.

    When the agent digraph is acyclic, a permutation triangularizes H and
    the pairing is simply the diagonal: lambda_i = H_ii.  Otherwise the
    eigenvalues (required real) are matched to diagonal entries by
    minimum-cost assignment.
    """
    N = H.shape[0]
    offdiag = (np.abs(H) > 0) & ~np.eye(N, dtype=bool)
    # Kahn topological sort on the listening digraph j -> i
    indeg = offdiag.sum(axis=1)
    queue = deque(np.nonzero(indeg == 0)[0])
    seen = 0
    indeg = indeg.astype(int)
    while queue:
        j = queue.popleft()
        seen += 1
        for i in np.nonzero(offdiag[:, j])[0]:
            indeg[i] -= 1
            if indeg[i] == 0:
                queue.append(i)
    if seen == N:  # acyclic, hence permutation-triangularizable
        return np.diag(H).astype(float).copy()
    lam = np.linalg.eigvals(H)
    scale = max(1.0, np.max(np.abs(lam)))
    if np.max(np.abs(lam.imag)) > SPECTRUM_IMAG_TOL * scale:
        raise ComplexSpectrum(
            f"H has eigenvalues with imaginary part up to "
            f"{np.max(np.abs(lam.imag)):.3g}")
    cost = np.abs(lam.real[None, :] - np.diag(H)[:, None])
    _, cols = linear_sum_assignment(cost)
    return lam.real[cols]


def graph_from_config(adjacency, pinning):
    """Build a Graph from adjacency weights and pinning gains.

    Raises AssumptionViolated when the exosystem node cannot reach every
    agent, and ComplexSpectrum when H has non-real eigenvalues.
    """
    A = np.atleast_2d(np.asarray(adjacency, dtype=float))
    pin = np.asarray(pinning, dtype=float).ravel()
    N = A.shape[0]
    if A.shape != (N, N) or len(pin) != N:
        raise ValueError("adjacency must be N x N and pinning length N")
    if np.any(A < 0) or np.any(pin < 0):
        raise ValueError("weights must be non-negative")
    if np.any(np.diag(A) != 0):
        raise ValueError("self-loops are not allowed")
    if not _spanning_tree_from_root(A, pin):
        raise AssumptionViolated(
            "graph", "no directed spanning tree rooted at the exosystem")
    L = np.diag(A.sum(axis=1)) - A
    Lam = np.diag(pin)
    H = L + Lam
    return Graph(adjacency=A, pinning=pin, L=L, Lambda=Lam, H=H,
                 lambdas=_agent_eigenvalue_pairing(H))


def chain_graph(N=4):
    """Default topology: chain 0 -> 1 -> ... -> N with unit weights."""
    A = np.zeros((N, N))
    for i in range(1, N):
        A[i, i - 1] = 1.0
    pin = np.zeros(N)
    pin[0] = 1.0
    return graph_from_config(A, pin)


def load_graph(path):
    """Graph config JSON: {"N": int, "adjacency": [[w]], "pinning": [w]}."""
    with open(path) as f:
        cfg = json.load(f)
    g = graph_from_config(cfg["adjacency"], cfg["pinning"])
    if "N" in cfg and cfg["N"] != g.N:
        raise ValueError("graph config N does not match adjacency size")
    return g


@dataclass
class FleetController:
    """Per-agent gains K_xi_i = Y_i P_i^{-1} / lambda_i plus the shared
    internal model."""

    Kx: list
    Kz: list
    P: list
    Y: list
    lambdas: np.ndarray
    im: object
    margins: list = field(default_factory=list)

    @property
    def N(self):
        return len(self.Kx)

    def K_xi(self, i):
        return np.hstack([self.Kx[i], self.Kz[i]])


def synthesize_fleet(datasets, g, im, rho=1.1, eps=None, deltas=None):
    """Solve the N independent per-agent LMIs and scale the gains by the
    paired graph eigenvalues; infeasible agents are collected into one
    fleet-level error."""
    if len(datasets) != g.N:
        raise ValueError("need one dataset per agent")
    Kx, Kz, Ps, Ys, margins = [], [], [], [], []
    failed = {}
    for i, ds in enumerate(datasets):
        if not rank_check(ds):
            failed[i] = "rank-deficient data"
            continue
        delta = (deltas[i] if deltas is not None
                 else delta_bound(ds, "oracle-inflate", rho=rho))
        es = ellipsoid(ds, delta)
        try:
            sol = lmi_mod.solve(lmi_mod.assemble(es, eps=eps))
        except Infeasible as exc:
            failed[i] = str(exc)
            continue
        K = lmi_mod.extract_gain(sol) / g.lambdas[i]
        n_x = ds.n_xi - im.n_z
        Kx.append(K[:, :n_x])
        Kz.append(K[:, n_x:])
        Ps.append(sol.P)
        Ys.append(sol.Y)
        margins.append(sol.margin)
    if failed:
        raise Infeasible(detail=str(failed), agents=list(failed))
    return FleetController(Kx=Kx, Kz=Kz, P=Ps, Y=Ys,
                           lambdas=g.lambdas.copy(), im=im, margins=margins)


def _fleet_linear_parts(fc, plants, g, im):
    lins = [p if isinstance(p, LinearPlant) else None for p in plants]
    if any(l is None for l in lins):
        from .plants import linearize
        lins = [linearize(p) for p in plants]
    n_xs = {l.n_x for l in lins}
    if len(n_xs) != 1:
        raise ValueError("MAS coupling needs a common state dimension")
    return lins, n_xs.pop()


def network_matrix(fc, plants, g, im):
    """Closed-loop matrix of the whole network (states col(x, z)).

    Blocks: [Atil + Btil Ktil_x (H (x) I),  Btil Ktil_z;
             (H (x) G2) Ctil,               I (x) G1].
    """
    lins, n_x = _fleet_linear_parts(fc, plants, g, im)
    N = g.N
    Atil = blockdiag([l.A for l in lins])
    BKx = blockdiag([lins[i].B @ fc.Kx[i] for i in range(N)])
    BKz = blockdiag([lins[i].B @ fc.Kz[i] for i in range(N)])
    Ctil = blockdiag([l.C for l in lins])
    HG2C = kron(g.H, im.G2) @ Ctil
    top = np.hstack([Atil + BKx @ kron(g.H, np.eye(n_x)), BKz])
    bot = np.hstack([HG2C, kron(np.eye(N), im.G1)])
    return np.vstack([top, bot])


def agent_block(fc, plant, lam, im, i):
    """Per-agent diagonal block of the decomposed network spectrum:
    [[A_i + lam B_i Kx_i, lam B_i Kz_i], [G2 C_i, G1]]."""
    from .plants import linearize
    lin = linearize(plant)
    return np.block([
        [lin.A + lam * lin.B @ fc.Kx[i], lam * lin.B @ fc.Kz[i]],
        [im.G2 @ lin.C, im.G1]])


def spectrum_decomposition_check(fc, plants, g, im, tol=1e-8):
    """Whether the network spectrum equals the union of the per-agent
    block spectra (sorted multiset comparison)."""
    lam_net = np.linalg.eigvals(network_matrix(fc, plants, g, im))
    lam_blocks = np.concatenate([
        np.linalg.eigvals(agent_block(fc, plants[i], g.lambdas[i], im, i))
        for i in range(g.N)])
    key = lambda a: np.lexsort((a.imag, a.real))
    lam_net = lam_net[key(lam_net)]
    lam_blocks = lam_blocks[key(lam_blocks)]
    scale = max(1.0, np.max(np.abs(lam_net)))
    return bool(np.max(np.abs(lam_net - lam_blocks)) <= tol * scale)


@dataclass
class MasSimResult:
    """Fleet trajectory: per-agent states/inputs/errors plus the shared
    exosignal; e and e_v have shape (n_rec, N, n_y)."""

    t: np.ndarray
    x: np.ndarray        # (n_rec, N, n_x)
    z: np.ndarray        # (n_rec, N, n_z)
    v: np.ndarray        # (n_rec, n_v)
    u: np.ndarray        # (n_rec, N, n_u)
    e: np.ndarray
    e_v: np.ndarray
    meta: dict = field(default_factory=dict)

    def export_csv(self, path):
        N, n_y = self.e.shape[1], self.e.shape[2]
        cols = ["t"]
        cols += [f"e_{i + 1}_{j + 1}" if n_y > 1 else f"e_{i + 1}"
                 for i in range(N) for j in range(n_y)]
        cols += [f"ev_{i + 1}_{j + 1}" if n_y > 1 else f"ev_{i + 1}"
                 for i in range(N) for j in range(n_y)]
        data = np.column_stack([self.t,
                                self.e.reshape(len(self.t), -1),
                                self.e_v.reshape(len(self.t), -1)])
        with open(path, "w") as f:
            f.write(",".join(cols) + "\n")
            for row in data:
                f.write(",".join(repr(float(x)) for x in row) + "\n")
        return path


def virtual_errors(outputs, y0, g):
    """Graph-weighted virtual error per agent:
    e_vi = sum_j a_ij (y_i - y_j) + a_i0 (y_i - y0)."""
    Y = np.atleast_2d(np.asarray(outputs, dtype=float))
    y0 = np.asarray(y0, dtype=float).ravel()
    out = np.zeros_like(Y)
    for i in range(g.N):
        acc = g.pinning[i] * (Y[i] - y0)
        for j in range(g.N):
            acc = acc + g.adjacency[i, j] * (Y[i] - Y[j])
        out[i] = acc
    return out


def simulate_fleet(plants, fc, exo, g, x0s, v0, t_end=60.0, dt=1e-3,
                   z0s=None, record_every=10):
    """Integrate the fleet under the distributed protocol.

    The consensus signal fed to Kx_i is sum_j H_ij x_j; internal models
    are driven by the virtual errors.  Linear fleets use the exact LTI
    propagator; ball-and-beam fleets the compiled kernel.
    """
    N = g.N
    x0s = [np.asarray(x, dtype=float).ravel() for x in x0s]
    v0 = np.asarray(v0, dtype=float).ravel()
    im = fc.im
    n_z = im.n_z
    z0s = ([np.zeros(n_z) for _ in range(N)] if z0s is None
           else [np.asarray(z, dtype=float).ravel() for z in z0s])
    meta = {"integrator": "rk4", "dt": dt, "t_end": t_end,
            "record_every": record_every}

    if all(isinstance(p, LinearPlant) for p in plants):
        lins, n_x = _fleet_linear_parts(fc, plants, g, im)
        n_v = exo.n_v
        Anet = network_matrix(fc, plants, g, im)
        Etil = np.vstack([l.E for l in lins])
        F = lins[0].F
        Ev_bot = kron(np.diag(g.pinning) @ np.ones((N, 1)), im.G2 @ F)
        Acl = np.block([[Anet, np.vstack([Etil, Ev_bot])],
                        [np.zeros((n_v, Anet.shape[1])), exo.S]])
        y0 = np.concatenate([np.concatenate(x0s), np.concatenate(z0s), v0])
        traj, t, div_step = _simulate_lti(Acl, y0, t_end, dt, record_every)
        xs = traj[:, :N * n_x].reshape(len(t), N, n_x)
        zs = traj[:, N * n_x:N * (n_x + n_z)].reshape(len(t), N, n_z)
        vs = traj[:, N * (n_x + n_z):]
        e = np.stack([xs[:, i] @ lins[i].C.T + vs @ F.T for i in range(N)],
                     axis=1)
        e_v = np.einsum("ij,tjk->tik", g.H, e)
        cons = np.einsum("ij,tjk->tik", g.H, xs)
        u = np.stack([cons[:, i] @ fc.Kx[i].T + zs[:, i] @ fc.Kz[i].T
                      for i in range(N)], axis=1)
        sr = MasSimResult(t=t, x=xs, z=zs, v=vs, u=u, e=e, e_v=e_v,
                          meta=meta)
        if div_step >= 0:
            raise Diverged(div_step * dt, partial=sr)
        return sr

    kps = [getattr(p, "kernel_params", None) for p in plants]
    if not all(kp and kp.get("kind") == "ball_beam" for kp in kps):
        raise NotImplementedError("nonlinear fleet simulation is available "
                                  "for the ball-and-beam family")
    h0 = np.array([kp["h0"] for kp in kps])
    Kx = np.vstack([fc.Kx[i].reshape(1, -1) for i in range(N)])
    Kz = np.vstack([fc.Kz[i].reshape(1, -1) for i in range(N)])
    Xs, Zs, Vs, Us, Es, Evs, filled, div_step = ball_beam_fleet_rk4(
        h0, GRAVITY, g.H, g.H, g.pinning, Kx, Kz,
        im.G1, im.G2[:, 0].copy(), exo.S,
        np.vstack(x0s), np.vstack(z0s), v0,
        dt, int(round(t_end / dt)), record_every)
    t = np.arange(filled) * (dt * record_every)
    sr = MasSimResult(t=t, x=Xs[:filled], z=Zs[:filled], v=Vs[:filled],
                      u=Us[:filled, :, None], e=Es[:filled, :, None],
                      e_v=Evs[:filled, :, None], meta=meta)
    if div_step >= 0:
        raise Diverged(div_step * dt, partial=sr)
    return sr
