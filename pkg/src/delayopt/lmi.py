"""Delay-dependent feasibility certificates for the networked closed loop.

The analysis stacks the state

    Phi = [xi; w(t); w(t-dbar); w(t-d(t)); y~(t); y~(t-dbar); y~(t-d(t)); F(t)]

with xi = x~ - X eta~ (the decoupled residual), w = eta~ + z~, y~ the output
deviation and F the gradient increment, and requires one symmetric block
matrix per topology mode to be negative definite with common decision
matrices P_a, P1..P4, Q1..Q3.  Three normalizations are applied when
assembling the blocks (see ``_pi_blocks``): the actuator matrix cannot
left-multiply a graph Laplacian, so those occurrences are read as the scalar
gain ``beta``; the weighting vector enters as ``diag(pi)``; and ``C X = I``
is substituted where the product appears.

The gradient increment is related to the output deviation through the
sector inequality of an m-strongly-convex function with l_max-Lipschitz
gradient,

    (F - m y~)' (F - l_max y~) <= 0,

absorbed with a free scalar multiplier tau > 0.  A plain norm bound
``|F| <= l_max |y~|`` is useless here: along the all-equal-outputs
direction every Laplacian block vanishes and a norm-bounded F can always
flip the lone stabilizing gradient term, so the test would be infeasible
at every delay.  The sector form keeps the strong-convexity information
that actually damps that direction.

Variants:

* ``theorem1``  -- the full rate-bounded condition (requires varpi in [0,1)).
* ``theorem2``  -- P3 = Q2 = 0; valid for arbitrarily fast delay variation.
* ``delay-free``-- the zero-delay condition on the collapsed state
                   [xi; w; y~; F] (delayed coordinates identified with
                   current ones).

Feasibility is decided by an external conic solver, but a returned
certificate is only accepted after an independent from-scratch eigenvalue
check (``check_certificate``); that check, not the solver, is the source of
truth.
"""
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import (
    DimensionError,
    HurwitzError,
    InfeasibleBaseError,
    SolverUndecidedError,
    ValidationError,
)
from .plant import hurwitz_margin

VARIANTS = ("theorem1", "theorem2", "delay-free")
DEFAULT_MU = 1e-6
DEFAULT_EPS1_CANDIDATES = (0.5, 0.1, 2.0, 0.02)
DEFAULT_SOLVERS = ("CLARABEL", "CVXOPT", "SCS")
_SOLVER_OPTS = {"SCS": {"max_iters": 20000}}
CX_TOL = 1e-8
SLACK_CAP = 50.0     # any larger uniform negativity is irrelevant to feasibility
VAR_CAP = 1e5        # keeps the maximize-slack problem bounded and well scaled


@dataclass
class LmiData:
    """Constant problem data entering the block matrices.

    ``eps1`` is the scalar Young parameter splitting the output/residual
    cross term; it is fixed per solve (the search grids a few values), which
    keeps the conditions linear in all decision matrices.
    """

    atilde: np.ndarray      # blockdiag(A_i - B_i K_i)
    c_blk: np.ndarray       # blockdiag(C_i), (Nq x sum n_i)
    x_blk: np.ndarray       # blockdiag(X_i)
    laplacians: list        # per-mode L_p kron I_q, each (Nq x Nq)
    alpha: float
    beta: float
    dbar: float
    varpi: float
    l_max: float
    pi: np.ndarray          # positive weights of the union digraph, length N
    m_min: float = 0.0      # smallest strong-convexity constant across costs
    eps1: float = 1.0

    def __post_init__(self):
        self.atilde = np.asarray(self.atilde, dtype=float)
        self.c_blk = np.asarray(self.c_blk, dtype=float)
        self.x_blk = np.asarray(self.x_blk, dtype=float)
        self.laplacians = [np.asarray(L, dtype=float) for L in self.laplacians]
        self.pi = np.atleast_1d(np.asarray(self.pi, dtype=float))
        if self.dbar < 0:
            raise ValidationError("dbar must be nonnegative")
        if self.eps1 <= 0:
            raise ValidationError("eps1 must be positive")
        if self.m_min < 0 or self.m_min > self.l_max:
            raise ValidationError("need 0 <= m_min <= l_max")
        if np.any(self.pi <= 0):
            raise ValidationError("weights pi must be positive")
        margin = hurwitz_margin(self.atilde)
        if margin >= 0:
            raise HurwitzError(
                f"closed-loop matrix is not Hurwitz (max Re(lambda) = {margin:.3g})"
            )
        cx = self.c_blk @ self.x_blk
        if np.linalg.norm(cx - np.eye(cx.shape[0])) > CX_TOL:
            raise ValidationError("C X must equal the identity (regulator equations)")

    @property
    def n_x(self):
        return self.atilde.shape[0]

    @property
    def n_q(self):
        return self.c_blk.shape[0]

    @property
    def n_modes(self):
        return len(self.laplacians)

    @property
    def pi_weight(self):
        """diag(pi) kron I_q."""
        q = self.n_q // self.pi.shape[0]
        return np.kron(np.diag(self.pi), np.eye(q))


@dataclass
class DecisionVars:
    """Symmetric decision matrices plus the scalar sector multiplier tau.

    ``p3`` and ``q2`` are structurally zero in the theorem2 variant.
    """

    p_a: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray
    p4: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    q3: np.ndarray
    tau: float = 1.0

    def named(self):
        return {
            "P_a": self.p_a,
            "P1": self.p1,
            "P2": self.p2,
            "P3": self.p3,
            "P4": self.p4,
            "Q1": self.q1,
            "Q2": self.q2,
            "Q3": self.q3,
        }


@dataclass
class FeasibilityCertificate:
    variant: str
    dbar: float
    varpi: float
    eps1: float
    mu: float
    vars: DecisionVars
    lambda_max_per_mode: np.ndarray
    slack: float


@dataclass
class InfeasibilityReport:
    variant: str
    dbar: float
    varpi: float
    best_slack: float       # largest achieved s with Pi <= -s I (< mu)
    eps1_tried: tuple


@dataclass
class CheckReport:
    passed: bool
    lambda_max_per_mode: np.ndarray
    min_eigenvalues: dict
    mu: float


@dataclass
class MarginResult:
    d_star: float
    d_infeasible: float     # smallest probed dbar that failed; None if none
    log: list               # (dbar, "feasible" | "infeasible" | "undecided")
    certificate: FeasibilityCertificate


def fix_Pa(atilde: np.ndarray, eps1: float = 1.0) -> tuple:
    """Normalized Lyapunov solution P_a of P_a A~ + A~^T P_a = -eps1 I.

    Utility for seeding or sanity-checking certificates; the feasibility
    search itself treats P_a as a free decision matrix.
    """
    atilde = np.asarray(atilde, dtype=float)
    if hurwitz_margin(atilde) >= 0:
        raise HurwitzError("P_a exists only for a Hurwitz closed-loop matrix")
    n = atilde.shape[0]
    p_a = scipy.linalg.solve_continuous_lyapunov(atilde.T, -eps1 * np.eye(n))
    p_a = 0.5 * (p_a + p_a.T)
    residual = np.linalg.norm(p_a @ atilde + atilde.T @ p_a + eps1 * np.eye(n))
    if residual > 1e-9 * max(1.0, float(np.abs(atilde).max())):
        raise ValidationError(f"Lyapunov residual {residual:.2e} too large")
    return p_a, float(eps1)


def _pi_blocks(data: LmiData, v, mode: int, dbar: float, varpi: float) -> dict:
    """Upper-triangle blocks of the mode's matrix, keyed by 0-based indices.

    Written against a generic matrix algebra (works for numpy arrays and
    conic-solver expressions alike), so the numeric checker and the solver
    share a single transcription of the formulas.
    """
    at = data.atilde
    ca = data.c_blk @ at
    lt = data.laplacians[mode]
    b_l = data.beta * lt
    ab_l = data.alpha * data.beta * lt
    piw = data.pi_weight
    d2 = dbar * dbar
    nx = data.n_x
    nq = data.n_q
    i_x = np.eye(nx)
    i_q = np.eye(nq)
    norm_at2 = float(np.linalg.norm(at, 2)) ** 2
    norm_pic2 = float(np.linalg.norm(piw @ data.c_blk, 2)) ** 2

    # sector relaxation of the gradient increment, weight tau:
    # tau * [(m + l_max) y~' F - F' F - m l_max y~' y~] >= 0
    sector_yy = -(data.m_min * data.l_max)
    sector_yf = 0.5 * (data.m_min + data.l_max)

    blocks = {
        (0, 0): v.p_a @ at + at.T @ v.p_a + (norm_at2 / (4.0 * data.eps1)) * i_x
        + d2 * (ca.T @ v.q3 @ ca),
        (0, 3): -d2 * (ca.T @ v.q3 @ b_l),
        (0, 6): -d2 * (ca.T @ v.q3 @ ab_l),            # C X = I substituted
        (0, 7): -d2 * (ca.T @ v.q3),
        (1, 1): v.p1 + v.p2 - v.p3,
        (1, 3): -(v.p1 @ b_l) + v.p3,
        (1, 7): -v.p1,
        (2, 2): -v.p1 - v.p3,
        (2, 3): v.p3,
        (3, 3): -(1.0 - varpi) * v.p3
        + d2 * (b_l.T @ v.p4 @ b_l)
        - 2.0 * v.p4
        + d2 * (b_l.T @ v.q3 @ b_l),
        (3, 4): 0.5 * (piw @ (-b_l)),
        (3, 6): d2 * ((-b_l).T @ v.q3 @ ab_l),          # C X = I substituted
        (3, 7): d2 * (b_l.T @ v.p4) + d2 * (b_l.T @ v.q3),
        (4, 4): v.q1 + v.q2 + (v.tau * sector_yy + data.eps1 * norm_pic2) * i_q
        - v.q3,
        (4, 6): v.q3 + piw @ (-ab_l),
        (4, 7): -piw + (v.tau * sector_yf) * i_q,
        (5, 5): -v.q3 - v.q1,
        (5, 6): v.q3,
        (6, 6): -(1.0 - varpi) * v.q2
        - 2.0 * v.q3
        + d2 * (ab_l.T @ v.q3 @ ab_l),
        (6, 7): 0.5 * d2 * (ab_l.T @ v.q3),
        (7, 7): -v.tau * i_q + d2 * v.p4 + d2 * v.q3,
    }
    return blocks


def _block_sizes(data: LmiData) -> list:
    return [data.n_x] + [data.n_q] * 7


def _collapse_map(data: LmiData) -> np.ndarray:
    """Stacking matrix T with Phi_full = T Phi_reduced for the zero-delay case."""
    nx, nq = data.n_x, data.n_q
    rows = []
    i_x = np.eye(nx)
    i_q = np.eye(nq)
    z_xq = np.zeros((nx, nq))
    z_qx = np.zeros((nq, nx))
    z_qq = np.zeros((nq, nq))
    rows.append([i_x, z_xq, z_xq, z_xq])
    for _ in range(3):
        rows.append([z_qx, i_q, z_qq, z_qq])
    for _ in range(3):
        rows.append([z_qx, z_qq, i_q, z_qq])
    rows.append([z_qx, z_qq, z_qq, i_q])
    return np.block(rows)


def _assemble_numpy(data: LmiData, v: DecisionVars, mode: int, dbar: float,
                    varpi: float) -> np.ndarray:
    sizes = _block_sizes(data)
    offs = np.concatenate([[0], np.cumsum(sizes)])
    dim = offs[-1]
    out = np.zeros((dim, dim))
    blocks = _pi_blocks(data, v, mode, dbar, varpi)
    for (i, j), blk in blocks.items():
        blk = np.asarray(blk)
        if i == j:
            out[offs[i] : offs[i + 1], offs[j] : offs[j + 1]] = 0.5 * (blk + blk.T)
        else:
            out[offs[i] : offs[i + 1], offs[j] : offs[j + 1]] = blk
            out[offs[j] : offs[j + 1], offs[i] : offs[i + 1]] = blk.T
    return out


def assemble_pi(data: LmiData, v: DecisionVars, mode: int,
                variant: str = "theorem1") -> np.ndarray:
    """Numerically assemble the symmetric analysis matrix for one mode."""
    if variant not in VARIANTS:
        raise ValidationError(f"unknown variant {variant!r}")
    if variant == "theorem1":
        return _assemble_numpy(data, v, mode, data.dbar, data.varpi)
    if variant == "theorem2":
        nq = data.n_q
        v2 = replace(v, p3=np.zeros((nq, nq)), q2=np.zeros((nq, nq)))
        return _assemble_numpy(data, v2, mode, data.dbar, 0.0)
    t_map = _collapse_map(data)
    full = _assemble_numpy(data, v, mode, 0.0, 0.0)
    reduced = t_map.T @ full @ t_map
    return 0.5 * (reduced + reduced.T)


def check_certificate(data: LmiData, cert: FeasibilityCertificate) -> CheckReport:
    """Recompute every mode matrix from scratch and verify all sign conditions.

    Uses plain dense symmetric eigensolvers, entirely independent of the
    conic solver that produced the certificate.  Passes iff every mode
    matrix is below ``-mu/2`` and every (free) decision matrix is above
    ``mu/2``.
    """
    working = replace(data, dbar=cert.dbar, varpi=cert.varpi, eps1=cert.eps1)
    lam = np.array(
        [
            float(np.linalg.eigvalsh(assemble_pi(working, cert.vars, p, cert.variant))[-1])
            for p in range(data.n_modes)
        ]
    )
    mins = {}
    for name, mat in cert.vars.named().items():
        if cert.variant == "theorem2" and name in ("P3", "Q2"):
            continue  # structurally zero in this variant
        mins[name] = float(np.linalg.eigvalsh(mat)[0])
    mins["tau"] = float(cert.vars.tau)
    ok = bool(np.all(lam <= -cert.mu / 2) and all(m >= cert.mu / 2 for m in mins.values()))
    return CheckReport(
        passed=ok, lambda_max_per_mode=lam, min_eigenvalues=mins, mu=cert.mu
    )


def _solve_fixed_eps(data: LmiData, variant: str, mu: float, solver: str):
    """One conic solve at the data's eps1; returns (status, slack, vars)."""
    import cvxpy as cp

    nx, nq = data.n_x, data.n_q
    p_a = cp.Variable((nx, nx), symmetric=True)
    names = ["p1", "p2", "p3", "p4", "q1", "q2", "q3"]
    sym = {name: cp.Variable((nq, nq), symmetric=True) for name in names}
    zero = np.zeros((nq, nq))
    if variant == "theorem2":
        sym["p3"] = zero
        sym["q2"] = zero
        free = [n for n in names if n not in ("p3", "q2")]
    else:
        free = names

    class _Vars:
        pass

    v = _Vars()
    v.p_a = p_a
    for name in names:
        setattr(v, name, sym[name])
    tau = cp.Variable()
    v.tau = tau

    # PD floors at 2 mu so solver tolerance cannot undercut the mu/2 check;
    # caps keep the slack maximization bounded.
    slack = cp.Variable()
    cons = [
        p_a >> 2 * mu * np.eye(nx),
        p_a << VAR_CAP * np.eye(nx),
        tau >= 2 * mu,
        tau <= VAR_CAP,
        slack <= SLACK_CAP,
    ]
    cons += [sym[name] >> 2 * mu * np.eye(nq) for name in free]
    cons += [sym[name] << VAR_CAP * np.eye(nq) for name in free]

    if variant == "delay-free":
        dbar, varpi = 0.0, 0.0
    else:
        dbar, varpi = data.dbar, (data.varpi if variant == "theorem1" else 0.0)

    sizes = _block_sizes(data)
    t_map = _collapse_map(data) if variant == "delay-free" else None
    for mode in range(data.n_modes):
        blocks = _pi_blocks(data, v, mode, dbar, varpi)
        grid = [[None] * 8 for _ in range(8)]
        for i in range(8):
            for j in range(8):
                if (i, j) in blocks:
                    grid[i][j] = blocks[(i, j)]
                elif (j, i) in blocks:
                    grid[i][j] = blocks[(j, i)].T
                else:
                    grid[i][j] = np.zeros((sizes[i], sizes[j]))
        big = cp.bmat(grid)
        if t_map is not None:
            big = t_map.T @ big @ t_map
            dim = big.shape[0]
        else:
            dim = sum(sizes)
        cons.append(big << -slack * np.eye(dim))

    prob = cp.Problem(cp.Maximize(slack), cons)
    try:
        # inaccurate statuses are tolerated: the independent eigenvalue
        # check decides whether the returned point actually certifies
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="Solution may be inaccurate")
            prob.solve(solver=solver, **_SOLVER_OPTS.get(solver, {}))
    except cp.error.SolverError:
        return "error", float("-inf"), None
    if prob.status not in ("optimal", "optimal_inaccurate"):
        return prob.status, float("-inf"), None
    values = DecisionVars(
        p_a=0.5 * (p_a.value + p_a.value.T),
        tau=float(tau.value),
        **{
            name: (
                zero
                if isinstance(sym[name], np.ndarray)
                else 0.5 * (sym[name].value + sym[name].value.T)
            )
            for name in names
        },
    )
    return prob.status, float(slack.value), values


def solve_feasibility(
    data: LmiData,
    variant: str = "theorem1",
    mu: float = DEFAULT_MU,
    eps1_candidates=DEFAULT_EPS1_CANDIDATES,
    solvers=DEFAULT_SOLVERS,
):
    """Search for common decision matrices certifying all modes at once.

    Tries a short grid of Young scalars ``eps1`` (the conditions are linear
    for each fixed value); for each, maximizes the uniform negativity slack
    of the mode matrices subject to all decision matrices being positive
    definite.  A candidate answer is accepted only if the independent
    eigenvalue check passes.  Returns a ``FeasibilityCertificate`` or an
    ``InfeasibilityReport``; raises ``SolverUndecidedError`` when no solve
    produced a trustworthy verdict.
    """
    if variant not in VARIANTS:
        raise ValidationError(f"unknown variant {variant!r}")
    if variant == "theorem1" and not (0.0 <= data.varpi < 1.0):
        raise ValidationError("theorem1 requires a delay rate bound varpi in [0, 1)")
    best_slack = float("-inf")
    tried = []
    decided = False
    for eps1 in eps1_candidates:
        working = replace(data, eps1=float(eps1))
        tried.append(float(eps1))
        for solver in solvers:
            status, slack, values = _solve_fixed_eps(working, variant, mu, solver)
            if values is None:
                continue
            if status == "optimal":
                decided = True
            if slack >= mu:
                cert = FeasibilityCertificate(
                    variant=variant,
                    dbar=0.0 if variant == "delay-free" else data.dbar,
                    varpi=data.varpi if variant == "theorem1" else 0.0,
                    eps1=float(eps1),
                    mu=mu,
                    vars=values,
                    lambda_max_per_mode=np.zeros(data.n_modes),
                    slack=slack,
                )
                report = check_certificate(data, cert)
                if report.passed:
                    cert.lambda_max_per_mode = report.lambda_max_per_mode
                    return cert
                continue  # numerically hollow optimum; try the next solver
            best_slack = max(best_slack, slack)
            if status == "optimal":
                break  # clean sub-mu optimum: this eps1 is genuinely infeasible
    if not decided:
        raise SolverUndecidedError(
            f"no conic solve reached a clean optimum (eps1 grid {tuple(tried)})"
        )
    return InfeasibilityReport(
        variant=variant,
        dbar=0.0 if variant == "delay-free" else data.dbar,
        varpi=data.varpi if variant == "theorem1" else 0.0,
        best_slack=best_slack,
        eps1_tried=tuple(tried),
    )


def delay_margin(
    data: LmiData,
    variant: str = "theorem1",
    d_max: float = 1.0,
    tol: float = 0.01,
    mu: float = DEFAULT_MU,
    eps1_candidates=DEFAULT_EPS1_CANDIDATES,
    solvers=DEFAULT_SOLVERS,
) -> MarginResult:
    """Bisect the largest certified-feasible delay bound on [0, d_max].

    Maintains the bracket invariant (lower end certified, upper end failed),
    so the probe log is monotone: every certified bound lies below every
    failed one.  Undecided probes are treated as failures for bracketing.
    """
    if variant == "delay-free":
        raise ValidationError(
            "the delay-free variant does not depend on the delay bound; "
            "a delay margin is undefined for it"
        )
    if d_max < 0 or tol <= 0:
        raise ValidationError("d_max must be nonnegative and tol positive")
    log = []

    def probe(db):
        working = replace(data, dbar=float(db))
        try:
            result = solve_feasibility(
                working, variant, mu=mu, eps1_candidates=eps1_candidates, solvers=solvers
            )
        except SolverUndecidedError:
            log.append((float(db), "undecided"))
            return None
        if isinstance(result, FeasibilityCertificate):
            log.append((float(db), "feasible"))
            return result
        log.append((float(db), "infeasible"))
        return None

    base = probe(0.0)
    if base is None:
        raise InfeasibleBaseError("not feasible at zero delay; no margin exists")
    if d_max == 0.0:
        return MarginResult(d_star=0.0, d_infeasible=None, log=log, certificate=base)
    top = probe(d_max)
    if top is not None:
        return MarginResult(d_star=d_max, d_infeasible=None, log=log, certificate=top)
    lo, hi = 0.0, d_max
    best = base
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        cert = probe(mid)
        if cert is not None:
            lo, best = mid, cert
        else:
            hi = mid
    return MarginResult(d_star=lo, d_infeasible=hi, log=log, certificate=best)


@dataclass
class SampledPath:
    """Finely sampled smooth vector path with optional exact derivatives."""

    times: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[0] != self.times.shape[0]:
            raise DimensionError("one value row per sample time required")
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("sample times must be strictly increasing")
        if self.derivatives is not None:
            self.derivatives = np.atleast_2d(np.asarray(self.derivatives, dtype=float))
            if self.derivatives.shape != self.values.shape:
                raise DimensionError("derivatives must match values in shape")

    def deriv(self) -> np.ndarray:
        if self.derivatives is not None:
            return self.derivatives
        return np.gradient(self.values, self.times, axis=0)

    def at(self, t: float) -> np.ndarray:
        """Value at t; cubic Hermite when derivatives are available."""
        ts = self.times
        if t <= ts[0]:
            return self.values[0]
        if t >= ts[-1]:
            return self.values[-1]
        j = int(np.searchsorted(ts, t, side="right") - 1)
        h = ts[j + 1] - ts[j]
        th = (t - ts[j]) / h
        v0, v1 = self.values[j], self.values[j + 1]
        if self.derivatives is None:
            return v0 + th * (v1 - v0)
        d0, d1 = self.derivatives[j] * h, self.derivatives[j + 1] * h
        t2, t3 = th * th, th * th * th
        return (
            (2 * t3 - 3 * t2 + 1) * v0
            + (t3 - 2 * t2 + th) * d0
            + (-2 * t3 + 3 * t2) * v1
            + (t3 - t2) * d1
        )


@dataclass
class IntegralBoundReport:
    lhs: float
    rhs: float
    holds: bool


def jensen_bound_check(
    r1: np.ndarray,
    path: SampledPath,
    d_m: float,
    d_of_t: float,
    tol: float = 1e-8,
) -> IntegralBoundReport:
    """Numeric check of the delay-integral bound used by the analysis.

    With ``lhs = d_m * integral over [t-d_m, t] of Zdot' R1 Zdot`` and
    ``rhs`` the quadratic form of (Z(t), Z(t-d_m), Z(t-d(t))) under

        [[-R1, 0, R1], [*, -R1, R1], [*, *, -2 R1]],

    the bound states ``-lhs <= rhs``: the negated integral is dominated by
    the (nonpositive) quadratic form, with equality for constant and, at
    d(t) in {0, d_m}, linear paths.
    """
    r1 = np.atleast_2d(np.asarray(r1, dtype=float))
    if not np.allclose(r1, r1.T, atol=1e-10) or np.linalg.eigvalsh(r1)[0] <= 0:
        raise ValidationError("R1 must be symmetric positive definite")
    if not (0.0 <= d_of_t <= d_m):
        raise ValidationError("need 0 <= d(t) <= d_m")
    t_end = float(path.times[-1])
    t_lo = t_end - d_m
    if path.times[0] > t_lo + 1e-12:
        raise ValidationError("path must cover [t - d_m, t]")

    zdot = path.deriv()
    integrand = np.einsum("ij,jk,ik->i", zdot, r1, zdot)
    mask = path.times >= t_lo - 1e-12
    lhs = d_m * float(np.trapezoid(integrand[mask], path.times[mask]))

    z_t = path.at(t_end)
    z_m = path.at(t_lo)
    z_d = path.at(t_end - d_of_t)
    rhs = float(
        -(z_t - z_d) @ r1 @ (z_t - z_d) - (z_m - z_d) @ r1 @ (z_m - z_d)
    )
    scale = max(1.0, abs(lhs), abs(rhs))
    return IntegralBoundReport(lhs=lhs, rhs=rhs, holds=bool(-lhs <= rhs + tol * scale))


def build_lmi_data(
    agents,
    gains,
    topology,
    params,
    l_max: float,
    dbar: float,
    varpi: float = 0.0,
    pi=None,
    m_min: float = 0.0,
    eps1: float = 1.0,
) -> LmiData:
    """Assemble the constant analysis data from scenario components.

    ``pi`` defaults to the stationary weighting of the union digraph (its
    positive left null vector), which is what the weighted output functional
    requires; the Markov chain's own stationary law plays no role here.
    """
    from .graph import stationary_weights

    bd = scipy.linalg.block_diag
    atilde = bd(*[m.A - m.B @ g.K for m, g in zip(agents, gains)])
    c_blk = bd(*[m.C for m in agents])
    x_blk = bd(*[g.X for g in gains])
    q = agents[0].q
    iq = np.eye(q)
    laplacians = []
    for mode in topology.modes:
        a = mode.adjacency
        lap = np.diag(a.sum(axis=1)) - a
        laplacians.append(np.kron(lap, iq))
    if pi is None:
        pi = stationary_weights(topology)
    return LmiData(
        atilde=atilde,
        c_blk=c_blk,
        x_blk=x_blk,
        laplacians=laplacians,
        alpha=params.alpha,
        beta=params.beta,
        dbar=dbar,
        varpi=varpi,
        l_max=l_max,
        pi=pi,
        m_min=m_min,
        eps1=eps1,
    )


def write_certificate(cert: FeasibilityCertificate, path, check: CheckReport = None):
    """Write a certificate as a structured, re-verifiable text file."""
    lines = [
        "# delay feasibility certificate",
        f"variant: {cert.variant}",
        f"dbar: {cert.dbar:.17g}",
        f"varpi: {cert.varpi:.17g}",
        f"eps1: {cert.eps1:.17g}",
        f"tau: {cert.vars.tau:.17g}",
        f"mu: {cert.mu:.17g}",
        "lambda_max_per_mode: "
        + " ".join(f"{v:.17g}" for v in cert.lambda_max_per_mode),
    ]
    if check is not None:
        lines.append(f"check_passed: {str(check.passed).lower()}")
    for name, mat in cert.vars.named().items():
        lines.append(f"matrix {name} {mat.shape[0]} {mat.shape[1]}")
        for row in mat:
            lines.append("  " + " ".join(f"{v:.17g}" for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
