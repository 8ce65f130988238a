"""Built-in example systems and the plant abstractions used by the data
collection and simulation layers.

Linear plants carry (A, B, C, E, F); nonlinear plants carry smooth maps
f(x, u, v) and h(x, v) with an equilibrium at the origin.  Either kind can
be augmented with an internal model driven by the tracking error.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .internal_model import InternalModel


@dataclass
class LinearPlant:
    """x' = A x + B u + E v,  e = C x + F v."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    E: np.ndarray
    F: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.A, self.B, self.C, self.E, self.F = (
            np.atleast_2d(np.asarray(M, dtype=float))
            for M in (self.A, self.B, self.C, self.E, self.F))
        n_x = self.A.shape[0]
        if self.A.shape != (n_x, n_x):
            raise ValueError("A must be square")
        if self.B.shape[0] != n_x or self.E.shape[0] != n_x:
            raise ValueError("B/E row count must match A")
        if self.C.shape[1] != n_x:
            raise ValueError("C column count must match A")
        if self.F.shape[0] != self.C.shape[0]:
            raise ValueError("C and F must have the same number of rows")
        if self.E.shape[1] != self.F.shape[1]:
            raise ValueError("E and F must have the same number of columns")

    @property
    def n_x(self):
        return self.A.shape[0]

    @property
    def n_u(self):
        return self.B.shape[1]

    @property
    def n_y(self):
        return self.C.shape[0]

    @property
    def n_v(self):
        return self.E.shape[1]

    def f(self, x, u, v):
        return self.A @ x + self.B @ u + self.E @ v

    def h(self, x, v):
        return self.C @ x + self.F @ v


@dataclass
class NonlinearPlant:
    """x' = f(x, u, v),  e = h(x, v), equilibrium at the origin."""

    n_x: int
    n_u: int
    n_v: int
    n_y: int
    f: Callable
    h: Callable
    name: str = ""
    # set for plant families with a compiled simulation kernel,
    # e.g. {"kind": "ball_beam", "h0": 0.7134}
    kernel_params: dict = None

    def __post_init__(self):
        z = np.zeros
        if (np.linalg.norm(self.f(z(self.n_x), z(self.n_u), z(self.n_v))) > 1e-12
                or np.linalg.norm(self.h(z(self.n_x), z(self.n_v))) > 1e-12):
            raise ValueError("plant maps must vanish at the origin")


def linearize(plant, step=1e-6):
    """First-order model of a plant at the origin via central differences.

    LinearPlant inputs are passed through unchanged.
    """
    if isinstance(plant, LinearPlant):
        return plant

    def jac(fun, dim_out, dim_in, argpos, args):
        J = np.zeros((dim_out, dim_in))
        for j in range(dim_in):
            hi = [a.copy() for a in args]
            lo = [a.copy() for a in args]
            hi[argpos][j] += step
            lo[argpos][j] -= step
            J[:, j] = (fun(*hi) - fun(*lo)) / (2 * step)
        return J

    fx = [np.zeros(plant.n_x), np.zeros(plant.n_u), np.zeros(plant.n_v)]
    hx = [np.zeros(plant.n_x), np.zeros(plant.n_v)]
    A = jac(plant.f, plant.n_x, plant.n_x, 0, fx)
    B = jac(plant.f, plant.n_x, plant.n_u, 1, fx)
    E = jac(plant.f, plant.n_x, plant.n_v, 2, fx)
    C = jac(plant.h, plant.n_y, plant.n_x, 0, hx)
    F = jac(plant.h, plant.n_y, plant.n_v, 1, hx)
    return LinearPlant(A=A, B=B, C=C, E=E, F=F,
                       name=f"{plant.name}:linearized" if plant.name else "")


@dataclass
class AugmentedPlant:
    """Plant stacked with an error-driven internal model.

    The augmented state is xi = col(x, z) with
        x' = f(x, u, v),  z' = G1 z + G2 h(x, v).
    For linear bases the (A_xi, B_xi, E_xi, C_xi) matrices are exact; for
    nonlinear bases they describe the linearization at the origin.
    """

    base: object
    im: InternalModel

    def __post_init__(self):
        if self.im.n_y != self.base.n_y:
            raise ValueError("internal-model copy count must equal the "
                             "plant output dimension")
        lin = linearize(self.base)
        G1, G2 = self.im.G1, self.im.G2
        n_z = self.im.n_z
        self.A_xi = np.block([[lin.A, np.zeros((lin.n_x, n_z))],
                              [G2 @ lin.C, G1]])
        self.B_xi = np.vstack([lin.B, np.zeros((n_z, lin.n_u))])
        self.E_xi = np.vstack([lin.E, G2 @ lin.F])
        self.C_xi = np.hstack([lin.C, np.zeros((lin.n_y, n_z))])
        self.F = lin.F

    @property
    def n_x(self):
        return self.base.n_x

    @property
    def n_z(self):
        return self.im.n_z

    @property
    def n_xi(self):
        return self.base.n_x + self.im.n_z

    @property
    def n_u(self):
        return self.base.n_u

    @property
    def n_v(self):
        return self.base.n_v

    @property
    def is_linear(self):
        return isinstance(self.base, LinearPlant)

    def flow(self, xi, u, v):
        """Time derivative of the augmented state."""
        x, z = xi[:self.n_x], xi[self.n_x:]
        e = self.base.h(x, v)
        return np.concatenate([self.base.f(x, u, v),
                               self.im.G1 @ z + self.im.G2 @ e])


def augment(plant, im):
    """Stack a plant with an internal model driven by the tracking error."""
    return AugmentedPlant(base=plant, im=im)


# ---------------------------------------------------------------------------
# Built-in example systems


def robot_plant():
    """Two-state robot system with a sinusoidal disturbance channel."""
    return LinearPlant(
        A=[[0.0, 1.0], [1.0, 2.0]],
        B=[[0.0], [1.0]],
        C=[[1.0, 0.0]],
        E=[[0.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0]],
        F=[[-1.0, 0.0, -1.0, 0.0]],
        name="robot")


BALL_BEAM_H0 = 0.7134
GRAVITY = 9.81


def ball_beam_plant(h0=BALL_BEAM_H0):
    """Ball and beam system; the ball position tracks v1 + v3."""

    def f(x, u, v):
        return np.array([
            x[1] + v[1],
            h0 * x[0] * x[3] ** 2 - GRAVITY * h0 * np.sin(x[2]),
            x[3],
            u[0],
        ])

    def h(x, v):
        return np.array([x[0] - (v[0] + v[2])])

    return NonlinearPlant(n_x=4, n_u=1, n_v=4, n_y=1, f=f, h=h,
                          name=f"ball_beam(h0={h0})",
                          kernel_params={"kind": "ball_beam", "h0": h0})


def robot_fleet(N=4):
    """Heterogeneous robot agents i = 1..N with A_i = [[0,1],[1-i,2-i]]
    and disturbance gain i; B and C shared with robot_plant()."""
    fleet = []
    for i in range(1, N + 1):
        fleet.append(LinearPlant(
            A=[[0.0, 1.0], [1.0 - i, 2.0 - i]],
            B=[[0.0], [1.0]],
            C=[[1.0, 0.0]],
            E=[[0.0, 0.0, 0.0, 0.0], [float(i), 0.0, 0.0, 0.0]],
            F=[[-1.0, 0.0, -1.0, 0.0]],
            name=f"robot[{i}]"))
    return fleet


BALL_BEAM_FLEET_H0 = (0.7134, 0.75, 0.7647, 0.7776)


def ball_beam_fleet():
    """Four ball and beam agents with heterogeneous beam parameters."""
    return [ball_beam_plant(h0) for h0 in BALL_BEAM_FLEET_H0]


REGISTRY = {
    "robot": robot_plant,
    "ball_beam": ball_beam_plant,
    "robot_fleet": robot_fleet,
    "ball_beam_fleet": ball_beam_fleet,
}


def from_registry(name):
    """Look up a built-in plant (or fleet) factory by name."""
    try:
        return REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown plant {name!r}; known: {sorted(REGISTRY)}")
