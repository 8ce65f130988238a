"""Exception types shared across the package."""


class RegulataError(Exception):
    """Base class for all package-specific errors."""


class AssumptionViolated(RegulataError):
    """A standing assumption (exosystem spectrum, graph connectivity, ...)
    does not hold for the supplied data."""

    def __init__(self, what, detail=""):
        self.what = what
        self.detail = detail
        super().__init__(f"assumption violated ({what}): {detail}" if detail
                         else f"assumption violated ({what})")


class ExperimentDiverged(RegulataError):
    """State blew up (non-finite) during offline data collection."""


class Diverged(RegulataError):
    """Closed-loop simulation produced a non-finite state.

    Carries the time of failure and the partial trajectory collected so far.
    """

    def __init__(self, t, partial=None, agent=None):
        self.t = t
        self.partial = partial
        self.agent = agent
        msg = f"simulation diverged at t={t:.6g}"
        if agent is not None:
            msg += f" (agent {agent})"
        super().__init__(msg)


class Infeasible(RegulataError):
    """The semidefinite feasibility problem has no solution at tolerance."""

    def __init__(self, detail="", agents=None):
        self.detail = detail
        self.agents = agents
        msg = "LMI infeasible"
        if agents:
            msg += f" for agents {sorted(agents)}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class NumericalFailure(RegulataError):
    """Solver breakdown that is neither a feasibility certificate nor a
    solution."""


class ComplexSpectrum(RegulataError):
    """The graph coupling matrix has complex eigenvalues; per-agent gain
    scaling by 1/lambda_i is only supported for real spectra."""


class EmptySet(RegulataError):
    """The consistent set has no members (radius matrix not PSD)."""
