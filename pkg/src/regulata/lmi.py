"""Data-based stabilization LMI: assembly, semidefinite solve, gain
extraction, and robustness verification over the consistent set.

The feasibility contract is: return a numerically certified (P, Y) with
P > 0 and the block matrix below -eps*I, or raise Infeasible.  The solve
itself is delegated to a conic interior-point solver (CLARABEL, with SCS
as fallback) behind this contract.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySet, Infeasible, NumericalFailure

SOLVER_TOL = 1e-8
MAX_ITERS = 200


@dataclass
class LmiProblem:
    """Affine symmetric block operator in (P, Y):

        [ -Sigma            Upsilon^T - [P; Y]^T ]
        [ (symmetric)       -Psi                 ]  <=  -eps * I

    Q and u_scale hold the balancing (state similarity transform and
    input scaling) applied to the data blocks before the solve, under
    which the LMI transforms by congruence; returned variables are mapped
    back.
    """

    es: object
    eps: float
    Q: np.ndarray
    u_scale: np.ndarray

    @property
    def n_xi(self):
        return self.es.n_xi

    @property
    def n_u(self):
        return self.es.n_u

    @property
    def size(self):
        return 2 * self.n_xi + self.n_u

    def block(self, P, Y):
        """Evaluate the block matrix at unscaled (P, Y)."""
        es = self.es
        off = es.Upsilon.T - np.hstack([P, Y.T])
        return np.block([[-es.Sigma, off], [off.T, -es.Psi]])


def assemble(es, eps=None):
    """Build the LMI problem; eps defaults to a data-scaled strictness."""
    if eps is None:
        eps = 1e-6 * (np.trace(es.Psi) + np.trace(np.abs(es.Sigma))) / (
            2 * es.n_xi + es.n_u)
    if eps <= 0:
        raise ValueError("eps must be > 0")
    # balance via a state transform xi' = Q xi that is a geometric mean
    # between whitening the derivative Gram Xi_plus Xi_plus^T
    # (= Sigma + Delta Delta^T) and whitening the past-state Gram
    # (upper-left block of Psi); both transformed Grams then share the
    # same, square-rooted condition number
    n = es.n_xi

    def floored_eigh(M):
        M = (M + M.T) / 2
        w, V = np.linalg.eigh(M)
        return np.clip(w, 1e-12 * max(np.max(w), 1e-300), None), V

    w_p, V_p = floored_eigh(es.Sigma + es.Delta @ es.Delta.T)
    Q0 = V_p @ np.diag(1.0 / np.sqrt(w_p)) @ V_p.T
    w_m, V_m = floored_eigh(Q0 @ es.Psi[:n, :n] @ Q0.T)
    Q = np.diag(w_m ** -0.25) @ V_m.T @ Q0
    u_scale = 1.0 / np.sqrt(np.clip(np.diag(es.Psi)[n:], 1e-300, None))
    return LmiProblem(es=es, eps=float(eps), Q=Q, u_scale=u_scale)


@dataclass
class LmiSolution:
    """Certified feasible point of the stabilization LMI."""

    P: np.ndarray
    Y: np.ndarray
    margin: float
    stats: dict = field(default_factory=dict)


def solve(problem):
    """Find (P > 0, Y) with the block LMI <= -eps*I, maximizing the
    strictness margin t subject to P >= t*I and block <= -t*I.

    Solved in balanced coordinates (state similarity Q, input scaling),
    under which the LMI transforms by congruence; the certificate is
    checked there and (P, Y) are mapped back to the data coordinates.
    When the margin-maximizing solve cannot be certified (the feasible
    set can be razor thin), fixed-margin feasibility solves and a
    refinement with the gain frozen are attempted before giving up.
    """
    import cvxpy as cp

    es = problem.es
    n, m = problem.n_xi, problem.n_u
    Q, su = problem.Q, problem.u_scale
    Tz = np.zeros((n + m, n + m))
    Tz[:n, :n] = Q
    Tz[n:, n:] = np.diag(su)
    Psi = Tz @ es.Psi @ Tz.T
    Upsilon = Tz @ es.Upsilon @ Q.T
    Sigma = Q @ es.Sigma @ Q.T
    Sigma = (Sigma + Sigma.T) / 2
    Psi = (Psi + Psi.T) / 2

    sz = problem.size
    scale_ratio = (np.trace(Psi) + np.trace(np.abs(Sigma))) / max(
        np.trace(es.Psi) + np.trace(np.abs(es.Sigma)), 1e-300)
    eps_s = problem.eps * scale_ratio

    def certify(P_s, Y_s):
        P_s = (P_s + P_s.T) / 2
        off_v = Upsilon.T - np.hstack([P_s, Y_s.T])
        blk = np.block([[-Sigma, off_v], [off_v.T, -Psi]])
        lam_p = float(np.min(np.linalg.eigvalsh(P_s)))
        lam_b = float(np.max(np.linalg.eigvalsh(blk)))
        return lam_p, lam_b

    def finish(P_s, Y_s, margin, stats):
        # map back through the balancing: P = Q^-1 P_s Q^-T,
        # Y = diag(1/u) Y_s Q^-T
        Qinv = np.linalg.inv(Q)
        P_val = Qinv @ ((P_s + P_s.T) / 2) @ Qinv.T
        P_val = (P_val + P_val.T) / 2
        Y_val = (Y_s / su[:, None]) @ Qinv.T
        return LmiSolution(P=P_val, Y=Y_val, margin=margin, stats=stats)

    infeasible_reports = []
    candidates = []   # (margin, P_s, Y_s, stats) best-effort points
    t_values = []

    def run(prob, P, Y_get, solver, stage):
        """Solve with one solver; certify; collect near-feasible points.
        Returns a certified LmiSolution or None."""
        kwargs = {"eps": SOLVER_TOL, "max_iters": 100 * MAX_ITERS} \
            if solver == "SCS" else {}
        try:
            with warnings.catch_warnings():
                # inaccurate solves are fine: every point is re-certified
                # by an eigenvalue check before it is accepted
                warnings.simplefilter("ignore")
                prob.solve(solver=solver, **kwargs)
        except cp.SolverError:
            return None
        stats = {"solver": solver, "status": prob.status, "stage": stage}
        if prob.status in ("infeasible", "infeasible_inaccurate"):
            infeasible_reports.append(stats)
            return None
        if prob.status not in ("optimal", "optimal_inaccurate") \
                or P.value is None:
            return None
        if prob.value is not None and np.isfinite(prob.value):
            t_values.append(float(abs(prob.value)))
        P_s = np.asarray(P.value)
        Y_s = np.atleast_2d(Y_get())
        lam_p, lam_b = certify(P_s, Y_s)
        margin = min(lam_p, -lam_b)
        candidates.append((margin, P_s, Y_s, stats))
        if margin > 0:
            return finish(P_s, Y_s, margin, stats)
        return None

    P = cp.Variable((n, n), symmetric=True)
    Y = cp.Variable((m, n))
    t = cp.Variable()
    off = Upsilon.T - cp.hstack([P, Y.T])
    block = cp.bmat([[-Sigma, off], [off.T, -Psi]])
    margin_max = cp.Problem(cp.Maximize(t),
                            [P >> t * np.eye(n), block << -t * np.eye(sz),
                             t >= eps_s])

    def y_val():
        return np.asarray(Y.value)

    def refine_frozen_gain(solver):
        """Freeze the gain of the best near-feasible point and
        re-optimize the certificate alone."""
        for _, P_s, Y_s, _ in sorted(candidates, key=lambda c: -c[0])[:2]:
            try:
                K = np.linalg.solve((P_s + P_s.T) / 2, Y_s.T).T
            except np.linalg.LinAlgError:
                continue
            P2 = cp.Variable((n, n), symmetric=True)
            t2 = cp.Variable()
            off2 = Upsilon.T - cp.hstack([P2, (K @ P2).T])
            block2 = cp.bmat([[-Sigma, off2], [off2.T, -Psi]])
            prob2 = cp.Problem(cp.Maximize(t2),
                               [P2 >> t2 * np.eye(n),
                                block2 << -t2 * np.eye(sz), t2 >= 0])
            sol = run(prob2, P2,
                      lambda: K @ ((np.asarray(P2.value)
                                    + np.asarray(P2.value).T) / 2),
                      solver, "gain-frozen")
            if sol is not None:
                return sol
        return None

    # stage 1: maximize the margin directly
    sol = run(margin_max, P, y_val, "CLARABEL", "margin-max")
    if sol is not None:
        return sol

    # stage 2: feasibility at fixed margins strictly inside the estimated
    # optimum; a fixed target keeps the iterate away from the corner of
    # the cone where certification fails
    t_est = max(t_values + [eps_s])
    grid = {t_est / 8, t_est / 64}
    grid.update(eps_s * 10.0 ** -j for j in range(7))
    for t_fix in sorted(grid, reverse=True):
        feas = cp.Problem(cp.Minimize(0),
                          [P >> t_fix * np.eye(n),
                           block << -t_fix * np.eye(sz)])
        sol = run(feas, P, y_val, "CLARABEL", f"fixed-t({t_fix:.2e})")
        if sol is not None:
            return sol

    # stage 3: polish the best candidate with its gain frozen
    if candidates:
        sol = refine_frozen_gain("CLARABEL")
        if sol is not None:
            return sol

    # stage 4: slower fallback solver on the original program
    sol = run(margin_max, P, y_val, "SCS", "margin-max")
    if sol is not None:
        return sol
    if candidates:
        sol = refine_frozen_gain("SCS")
        if sol is not None:
            return sol

    # stage 5: analytic construction around the consistent-set center
    sol = _center_construction(problem, Psi, Upsilon, Sigma, certify,
                               finish)
    if sol is not None:
        return sol

    if infeasible_reports and not candidates:
        raise Infeasible(f"solver reports {infeasible_reports[0]}")
    if candidates:
        lam = max(c[0] for c in candidates)
        raise NumericalFailure(
            f"no solver produced a certified point (best margin "
            f"{lam:.3g} in balanced coordinates)")
    raise NumericalFailure("no solver produced a solution")


def _center_construction(problem, Psi, Upsilon, Sigma, certify, finish):
    """Deterministic fallback for barely-feasible problems.

    In the balanced coordinates, take the center of the consistent set,
    design K by a Riccati solve for it, pick P0 from the Lyapunov
    equation of the resulting closed loop, and line-search the scaling
    alpha so that (alpha P0, K alpha P0) satisfies the block LMI.  The
    certificate is checked directly on the block, so correctness does not
    rest on the center being the true system.
    """
    from scipy.linalg import solve_continuous_are, solve_lyapunov

    n, m = problem.n_xi, problem.n_u
    try:
        Phi_c = -np.linalg.solve(Psi, Upsilon)
        Ac, Bc = Phi_c.T[:, :n], Phi_c.T[:, n:]
        X = solve_continuous_are(Ac, Bc, np.eye(n), np.eye(m))
        K = -np.linalg.solve(np.eye(m), Bc.T @ X)
        Acl = Ac + Bc @ K
        P0 = solve_lyapunov(Acl, -np.eye(n))
    except np.linalg.LinAlgError:
        return None
    except ValueError:
        return None
    P0 = (P0 + P0.T) / 2
    if np.min(np.linalg.eigvalsh(P0)) <= 0:
        return None

    def margin_at(alpha):
        P_s = alpha * P0
        Y_s = K @ P_s
        lam_p, lam_b = certify(P_s, Y_s)
        return min(lam_p, -lam_b), P_s, Y_s

    best = (0.0, None, None)
    for alpha in np.logspace(-9, 3, 61):
        cand = margin_at(alpha)
        if cand[0] > best[0]:
            best = cand
    if best[1] is None:
        return None
    margin, P_s, Y_s = best
    return finish(P_s, Y_s, margin,
                  {"solver": "center-construction", "status": "optimal",
                   "stage": "center-construction"})


def extract_gain(sol):
    """K = Y P^{-1} via a symmetric linear solve."""
    return np.linalg.solve(sol.P, sol.Y.T).T


def consistent_center(es):
    """Center (Abar, Bbar) of the consistent set, Phi_c = -Psi^{-1} Upsilon."""
    Phi = -np.linalg.solve(es.Psi, es.Upsilon)
    return Phi.T[:, :es.n_xi], Phi.T[:, es.n_xi:]


def sample_consistent(es, count, seed=0):
    """Draw members of the consistent set.

    Uses the parameterization Phi = Phi_c + Psi^{-1/2} Z R^{1/2} with
    Phi_c the set center, R = Upsilon^T Psi^{-1} Upsilon - Sigma, and Z a
    random contraction.  Raises EmptySet when R is not PSD.
    """
    rng = np.random.default_rng(seed)
    n, m = es.n_xi, es.n_u
    w, V = np.linalg.eigh((es.Psi + es.Psi.T) / 2)
    if np.min(w) <= 0:
        raise EmptySet("Psi is not positive definite")
    Psi_inv_sqrt = V @ np.diag(1.0 / np.sqrt(w)) @ V.T
    Phi_c = -V @ np.diag(1.0 / w) @ V.T @ es.Upsilon
    R = es.Upsilon.T @ np.linalg.solve(es.Psi, es.Upsilon) - es.Sigma
    R = (R + R.T) / 2
    wr, Vr = np.linalg.eigh(R)
    if np.min(wr) < -1e-10 * max(1.0, np.max(np.abs(wr))):
        raise EmptySet(f"radius matrix has negative eigenvalue {np.min(wr):.3g}")
    R_sqrt = Vr @ np.diag(np.sqrt(np.clip(wr, 0.0, None))) @ Vr.T

    out = []
    for _ in range(count):
        Z = rng.standard_normal((n + m, n))
        nz = np.linalg.norm(Z, 2)
        if nz > 0:
            Z *= rng.uniform() / nz
        Phi = Phi_c + Psi_inv_sqrt @ Z @ R_sqrt
        out.append((Phi.T[:, :n], Phi.T[:, n:]))
    return out


@dataclass
class RobustnessReport:
    """Outcome of sampling-based verification over the consistent set."""

    n_samples: int
    hurwitz_failures: list
    lyapunov_failures: list
    worst_real_part: float
    worst_lyapunov: float
    center_hurwitz: bool

    @property
    def ok(self):
        return not self.hurwitz_failures and not self.lyapunov_failures


def verify_robust(K, es, samples=100, seed=0, P=None,
                  lyap_tol=-1e-10):
    """Check Hurwitz stability of Abar + Bbar K over sampled members of
    the consistent set (plus the center), and the Lyapunov inequality
    with P when provided (normalized by ||P||)."""
    members = sample_consistent(es, samples, seed=seed)
    Ac, Bc = consistent_center(es)
    hurwitz_fail, lyap_fail = [], []
    worst_re, worst_ly = -np.inf, -np.inf
    center_hurwitz = bool(
        np.max(np.linalg.eigvals(Ac + Bc @ K).real) < 0)
    nP = np.linalg.norm(P, 2) if P is not None else None
    for idx, (Ab, Bb) in enumerate(members):
        Acl = Ab + Bb @ K
        re = float(np.max(np.linalg.eigvals(Acl).real))
        worst_re = max(worst_re, re)
        if re >= 0:
            hurwitz_fail.append(idx)
        if P is not None:
            M = Acl @ P + P @ Acl.T
            ly = float(np.max(np.linalg.eigvalsh((M + M.T) / 2))) / nP
            worst_ly = max(worst_ly, ly)
            if ly > lyap_tol:
                lyap_fail.append(idx)
    return RobustnessReport(n_samples=samples,
                            hurwitz_failures=hurwitz_fail,
                            lyapunov_failures=lyap_fail,
                            worst_real_part=worst_re,
                            worst_lyapunov=worst_ly,
                            center_hurwitz=center_hurwitz)


def export_lmi(problem, path):
    """Plain-text dump of the assembled symmetric blocks (dims plus
    row-major entries) so external solvers can cross-check feasibility."""
    es = problem.es
    with open(path, "w") as f:
        f.write(f"n_xi {problem.n_xi}\nn_u {problem.n_u}\n"
                f"eps {problem.eps!r}\n")
        for name, M in (("Sigma", es.Sigma), ("Upsilon", es.Upsilon),
                        ("Psi", es.Psi)):
            f.write(f"{name} {M.shape[0]} {M.shape[1]}\n")
            for row in M:
                f.write(" ".join(repr(x) for x in row) + "\n")
    return path
