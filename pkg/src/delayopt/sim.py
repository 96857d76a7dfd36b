"""Fixed-step delay-differential integration of the networked closed loop.

The integrator is classical fourth-order Runge-Kutta on the stacked state
(x, eta, z).  Delayed quantities are read per stage from a history buffer
with cubic Hermite interpolation (grid values plus stored derivatives), which
preserves the scheme's fourth order for smooth runs; lookups that would land
inside the current step fall back to the stage state itself, which is also
the exact zero-delay limit.  The communication mode is drawn once from the
Markov chain and held constant over each step.

The initial history is the constant extension of the initial state.
"""
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DimensionError,
    DivergenceError,
    HistoryUnderflowError,
    ValidationError,
)
from .graph import SwitchingTopology
from .markov import GeneratorMatrix, sample_mode_path
from .objective import CostSet, global_optimum
from .plant import validate_gains, check_rank_condition
from .protocol import ProtocolParams

STATE_NORM_LIMIT = 1e9
DELAY_STEP_RATIO = 10.0


@dataclass
class DelaySpec:
    """Per-agent communication delay profile.

    ``constant`` holds each delay at its bound; ``sinusoidal`` sweeps
    d_i(t) = (dbar_i / 2) (1 + sin(omega t)), whose rate bound is
    dbar_i * omega / 2.
    """

    kind: str
    dbar: np.ndarray
    omega: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "sinusoidal"):
            raise ValidationError(f"unknown delay kind {self.kind!r}")
        self.dbar = np.atleast_1d(np.asarray(self.dbar, dtype=float))
        if np.any(self.dbar < 0):
            raise ValidationError("delay bounds must be nonnegative")
        self.omega = float(self.omega)
        if self.kind == "sinusoidal" and self.omega < 0:
            raise ValidationError("omega must be nonnegative")

    @classmethod
    def constant(cls, dbar, n_agents: int):
        return cls(kind="constant", dbar=np.full(n_agents, float(dbar)))

    @property
    def max_delay(self):
        return float(self.dbar.max()) if self.dbar.size else 0.0

    @property
    def rate_bound(self):
        """Upper bound on |d'(t)| (zero for constant delays)."""
        if self.kind == "constant":
            return 0.0
        return float(self.dbar.max() * self.omega / 2.0)

    def values(self, t: float) -> np.ndarray:
        if self.kind == "constant":
            return self.dbar
        return 0.5 * self.dbar * (1.0 + math.sin(self.omega * t))


class HistoryBuffer:
    """Uniform-grid sample history with cubic Hermite interpolation.

    Stores one vector sample per integration step together with its time
    derivative.  Queries before the first sample return the initial value
    (constant pre-history); queries older than the retention window raise
    ``HistoryUnderflowError``.  A ``linear`` mode is available for callers
    that do not track derivatives.
    """

    def __init__(self, dim: int, dt: float, capacity: int, initial: np.ndarray,
                 retention: float = None):
        self.dim = dim
        self.dt = float(dt)
        self.values = np.empty((capacity, dim))
        self.derivs = np.zeros((capacity, dim))
        self.values[0] = np.asarray(initial, dtype=float)
        self.count = 1          # stored values
        self.deriv_count = 0    # stored derivatives (prefix of values)
        self.retention = retention

    @property
    def newest_time(self):
        return (self.count - 1) * self.dt

    def append_value(self, vec: np.ndarray):
        self.values[self.count] = vec
        self.count += 1

    def set_derivative(self, index: int, vec: np.ndarray):
        if index != self.deriv_count:
            raise ValueError("derivatives must be set in order")
        self.derivs[index] = vec
        self.deriv_count += 1

    def sample(self, tau: float, order: str = "cubic") -> np.ndarray:
        if tau <= 0.0:
            return self.values[0]
        newest = self.newest_time
        if tau > newest + 1e-9 * self.dt:
            raise ValueError(f"requested time {tau:.6g} is newer than the history")
        if self.retention is not None and tau < newest - self.retention - 1e-9:
            raise HistoryUnderflowError(
                f"requested lookback to t={tau:.6g} is outside the retained window"
            )
        pos = tau / self.dt
        j = min(int(pos), self.count - 2)
        theta = pos - j
        v0, v1 = self.values[j], self.values[j + 1]
        if order == "linear":
            return v0 + theta * (v1 - v0)
        if j + 1 < self.deriv_count:
            d0, d1 = self.derivs[j] * self.dt, self.derivs[j + 1] * self.dt
            t2 = theta * theta
            t3 = t2 * theta
            return (
                (2 * t3 - 3 * t2 + 1) * v0
                + (t3 - 2 * t2 + theta) * d0
                + (-2 * t3 + 3 * t2) * v1
                + (t3 - t2) * d1
            )
        if j < self.deriv_count:
            # newest derivative not written yet: one-sided quadratic
            d0 = self.derivs[j] * self.dt
            return v0 + theta * d0 + theta * theta * (v1 - v0 - d0)
        return v0 + theta * (v1 - v0)


@dataclass
class Scenario:
    """Complete description of one networked run."""

    agents: list
    gains: list
    costs: CostSet
    topology: SwitchingTopology
    generator: GeneratorMatrix
    initial_mode_distribution: np.ndarray
    params: ProtocolParams
    delay: DelaySpec
    x0: list
    dt: float
    horizon: float
    seed: int
    eta0: list = None
    z0: list = None

    def __post_init__(self):
        self.initial_mode_distribution = np.atleast_1d(
            np.asarray(self.initial_mode_distribution, dtype=float)
        )
        self.x0 = [np.atleast_1d(np.asarray(x, dtype=float)) for x in self.x0]
        q = self.q
        n = self.n_agents
        if self.eta0 is None:
            self.eta0 = [np.zeros(q) for _ in range(n)]
        else:
            self.eta0 = [np.atleast_1d(np.asarray(e, dtype=float)) for e in self.eta0]
        if self.z0 is None:
            self.z0 = [np.zeros(q) for _ in range(n)]
        else:
            self.z0 = [np.atleast_1d(np.asarray(z, dtype=float)) for z in self.z0]

    @property
    def n_agents(self):
        return len(self.agents)

    @property
    def q(self):
        return self.agents[0].q

    def validate(self):
        """Cross-module consistency checks; raises on the first failure."""
        n = self.n_agents
        if n < 1:
            raise ValidationError("scenario needs at least one agent")
        q = self.q
        for i, m in enumerate(self.agents):
            if m.q != q:
                raise DimensionError(
                    f"agent {i + 1}: output dimension {m.q} differs from shared q={q}"
                )
            report = check_rank_condition(m)
            if not report.satisfied:
                from .errors import RankConditionError

                raise RankConditionError(
                    f"agent {i + 1}: rank condition fails "
                    f"(rank {report.rank} < {report.required})"
                )
        if len(self.gains) != n:
            raise DimensionError(f"expected {n} gain sets, got {len(self.gains)}")
        for i, (m, g) in enumerate(zip(self.agents, self.gains)):
            try:
                validate_gains(m, g)
            except Exception as exc:
                raise type(exc)(f"agent {i + 1}: {exc}") from None
        if len(self.costs) != n:
            raise DimensionError(f"expected {n} costs, got {len(self.costs)}")
        if self.costs.dim != q:
            raise DimensionError(
                f"costs have dimension {self.costs.dim}, expected q={q}"
            )
        if self.topology.n_agents != n:
            raise DimensionError(
                f"topology has {self.topology.n_agents} nodes, expected {n}"
            )
        if self.generator.n_states != self.topology.n_modes:
            raise DimensionError(
                f"generator has {self.generator.n_states} states for "
                f"{self.topology.n_modes} topology modes"
            )
        if self.initial_mode_distribution.shape != (self.generator.n_states,):
            raise DimensionError(
                "initial mode distribution length must equal the number of modes"
            )
        if self.delay.dbar.shape != (n,):
            raise DimensionError(f"delay bounds must have length {n}")
        for i, (m, x) in enumerate(zip(self.agents, self.x0)):
            if x.shape != (m.n,):
                raise DimensionError(
                    f"agent {i + 1}: x0 has shape {x.shape}, expected ({m.n},)"
                )
        for i, e in enumerate(self.eta0):
            if e.shape != (q,):
                raise DimensionError(f"agent {i + 1}: eta0 must have shape ({q},)")
        for i, z in enumerate(self.z0):
            if z.shape != (q,):
                raise DimensionError(f"agent {i + 1}: z0 must have shape ({q},)")
        if self.dt <= 0 or self.horizon <= 0:
            raise ValidationError("dt and horizon must be positive")
        positive = self.delay.dbar[self.delay.dbar > 0]
        if positive.size and self.dt > positive.min() / DELAY_STEP_RATIO + 1e-15:
            raise ValidationError(
                f"dt={self.dt:g} too coarse for the smallest nonzero delay bound "
                f"{positive.min():g} (need dt <= bound/{DELAY_STEP_RATIO:g})"
            )
        n_steps = round(self.horizon / self.dt)
        if abs(n_steps * self.dt - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise ValidationError("horizon must be an integer multiple of dt")


@dataclass
class Trajectory:
    """Logged run on a uniform time grid (one row per grid point)."""

    t: np.ndarray
    mode: np.ndarray
    x: np.ndarray
    eta: np.ndarray
    z: np.ndarray
    y: np.ndarray
    u: np.ndarray
    v: np.ndarray
    xi: np.ndarray
    dt: float
    agent_state_dims: tuple
    agent_input_dims: tuple
    q: int
    theta_star: np.ndarray
    f_min: float

    @property
    def n_agents(self):
        return len(self.agent_state_dims)

    @property
    def n_steps(self):
        return len(self.t) - 1

    def y_agent(self, i: int) -> np.ndarray:
        return self.y[:, i * self.q : (i + 1) * self.q]


@dataclass
class ConvergenceMetrics:
    convergence_time: float
    final_error: float
    errors: np.ndarray  # (n_points, N)


@dataclass
class ResidualReport:
    max_defect: float
    threshold: float
    passed: bool


class _Stacked:
    """Block matrices of the whole network, precomputed once per run."""

    def __init__(self, sc: Scenario):
        bd = scipy.linalg.block_diag
        self.A = bd(*[m.A for m in sc.agents])
        self.B = bd(*[m.B for m in sc.agents])
        self.C = bd(*[m.C for m in sc.agents])
        self.K = bd(*[g.K for g in sc.gains])
        self.W = bd(*[g.W for g in sc.gains])
        self.X = bd(*[g.X for g in sc.gains])
        self.M = bd(*[g.U - g.K @ g.X for g in sc.gains])
        self.Atilde = bd(*[m.A - m.B @ g.K for m, g in zip(sc.agents, sc.gains)])
        self.H = bd(*[f.H for f in sc.costs])
        self.g = np.concatenate([f.g for f in sc.costs])
        # agent-level Laplacians: the error sums act blockwise on q-vectors
        self.laplacians = []
        for mode in sc.topology.modes:
            a = mode.adjacency
            self.laplacians.append(np.diag(a.sum(axis=1)) - a)
        self.n_x = self.A.shape[0]
        self.n_q = sc.n_agents * sc.q


def stacked_closed_loop(agents, gains) -> np.ndarray:
    """blockdiag(A_i - B_i K_i) over all agents."""
    return scipy.linalg.block_diag(
        *[m.A - m.B @ g.K for m, g in zip(agents, gains)]
    )


def integrate(sc: Scenario) -> Trajectory:
    """Run the scenario and return the full logged trajectory.

    Deterministic for a fixed scenario and seed.  Aborts with
    ``DivergenceError`` if the state leaves the finite range.
    """
    sc.validate()
    blk = _Stacked(sc)
    n = sc.n_agents
    q = sc.q
    nq = blk.n_q
    nx = blk.n_x
    dt = sc.dt
    n_steps = round(sc.horizon / dt)
    ab = sc.params.alpha * sc.params.beta
    beta = sc.params.beta

    opt = global_optimum(sc.costs)

    path = sample_mode_path(
        sc.generator, sc.initial_mode_distribution, sc.horizon, sc.seed
    )
    tgrid = np.arange(n_steps + 1) * dt
    mode_ids = path.mode_at(tgrid)

    x = np.concatenate(sc.x0)
    eta = np.concatenate(sc.eta0)
    z = np.concatenate(sc.z0)
    state = np.concatenate([x, eta, z])

    # history of the communicated quantities (eta | z | y), dim 3 Nq
    y0 = blk.C @ x
    buffer = HistoryBuffer(
        dim=3 * nq,
        dt=dt,
        capacity=n_steps + 1,
        initial=np.concatenate([eta, z, y0]),
    )

    x_log = np.empty((n_steps + 1, nx))
    eta_log = np.empty((n_steps + 1, nq))
    z_log = np.empty((n_steps + 1, nq))
    y_log = np.empty((n_steps + 1, nq))
    u_log = np.empty((n_steps + 1, blk.B.shape[1]))
    v_log = np.empty((n_steps + 1, nq))

    A, B, C = blk.A, blk.B, blk.C
    K, M, W = blk.K, blk.M, blk.W
    H, gvec = blk.H, blk.g
    delay = sc.delay

    def snapshots(t_stage, step_start, stage_state):
        """Per-agent delayed (eta, z, y) views at a stage time, (N, N, q) each."""
        dvals = delay.values(t_stage)
        taus = t_stage - dvals
        eta_v = np.empty((n, nq))
        z_v = np.empty((n, nq))
        y_v = np.empty((n, nq))
        cache = {}
        for i in range(n):
            tau = taus[i]
            if tau > step_start + 1e-12 * dt:
                # lookback shorter than the current step: use the stage state
                sx = stage_state[:nx]
                se = stage_state[nx : nx + nq]
                sz = stage_state[nx + nq :]
                eta_v[i] = se
                z_v[i] = sz
                y_v[i] = C @ sx
                continue
            key = round(tau / dt * 1e6)
            snap = cache.get(key)
            if snap is None:
                snap = buffer.sample(tau)
                cache[key] = snap
            eta_v[i] = snap[:nq]
            z_v[i] = snap[nq : 2 * nq]
            y_v[i] = snap[2 * nq :]
        shape = (n, n, q)
        return eta_v.reshape(shape), z_v.reshape(shape), y_v.reshape(shape)

    def derivative(t_stage, step_start, s, lap, extras=False):
        sx = s[:nx]
        se = s[nx : nx + nq]
        sz = s[nx + nq :]
        y = C @ sx
        eta_v, z_v, y_v = snapshots(t_stage, step_start, s)
        e_etaz = np.einsum("ij,ijk->ik", lap, eta_v + z_v).reshape(nq)
        e_y = np.einsum("ij,ijk->ik", lap, y_v).reshape(nq)
        grad = H @ y + gvec
        v = -grad - beta * e_etaz - ab * e_y
        u = -K @ sx - M @ se + W @ v
        xdot = A @ sx + B @ u
        ds = np.concatenate([xdot, v, ab * e_y])
        if extras:
            return ds, u, v, C @ xdot
        return ds

    lap_by_mode = blk.laplacians
    half = 0.5 * dt
    sixth = dt / 6.0

    for k in range(n_steps):
        t_k = k * dt
        lap = lap_by_mode[mode_ids[k] - 1]

        k1, u_k, v_k, ydot_k = derivative(t_k, t_k, state, lap, extras=True)
        x_log[k] = state[:nx]
        eta_log[k] = state[nx : nx + nq]
        z_log[k] = state[nx + nq :]
        y_log[k] = C @ state[:nx]
        u_log[k] = u_k
        v_log[k] = v_k
        buffer.set_derivative(
            k, np.concatenate([k1[nx : nx + nq], k1[nx + nq :], ydot_k])
        )

        k2 = derivative(t_k + half, t_k, state + half * k1, lap)
        k3 = derivative(t_k + half, t_k, state + half * k2, lap)
        k4 = derivative(t_k + dt, t_k, state + dt * k3, lap)
        state = state + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > STATE_NORM_LIMIT:
            raise DivergenceError(
                f"state diverged at t={t_k + dt:.6g}", time=t_k + dt
            )
        buffer.append_value(
            np.concatenate(
                [state[nx : nx + nq], state[nx + nq :], C @ state[:nx]]
            )
        )

    t_end = n_steps * dt
    lap = lap_by_mode[mode_ids[n_steps] - 1]
    k1, u_k, v_k, ydot_k = derivative(t_end, t_end, state, lap, extras=True)
    x_log[n_steps] = state[:nx]
    eta_log[n_steps] = state[nx : nx + nq]
    z_log[n_steps] = state[nx + nq :]
    y_log[n_steps] = C @ state[:nx]
    u_log[n_steps] = u_k
    v_log[n_steps] = v_k
    buffer.set_derivative(
        n_steps, np.concatenate([k1[nx : nx + nq], k1[nx + nq :], ydot_k])
    )

    xi_log = x_log - eta_log @ blk.X.T

    return Trajectory(
        t=tgrid,
        mode=np.asarray(mode_ids, dtype=int),
        x=x_log,
        eta=eta_log,
        z=z_log,
        y=y_log,
        u=u_log,
        v=v_log,
        xi=xi_log,
        dt=dt,
        agent_state_dims=tuple(m.n for m in sc.agents),
        agent_input_dims=tuple(m.p for m in sc.agents),
        q=q,
        theta_star=opt.theta_star,
        f_min=opt.f_min,
    )


def metrics(tr: Trajectory, theta_star, tol: float) -> ConvergenceMetrics:
    """Tracking-error series, final error and the entry time into the tol band.

    The convergence time is the first grid time after which the worst agent
    error stays within ``tol`` for the rest of the run; ``None`` if that
    never happens.
    """
    if len(tr.t) == 0:
        raise ValidationError("trajectory is empty")
    theta_star = np.atleast_1d(np.asarray(theta_star, dtype=float))
    n = tr.n_agents
    diffs = tr.y.reshape(len(tr.t), n, tr.q) - theta_star[None, None, :]
    errors = np.linalg.norm(diffs, axis=2)
    worst = errors.max(axis=1)
    suffix = np.maximum.accumulate(worst[::-1])[::-1]
    inside = np.flatnonzero(suffix <= tol)
    conv_time = float(tr.t[inside[0]]) if inside.size else None
    return ConvergenceMetrics(
        convergence_time=conv_time,
        final_error=float(worst[-1]),
        errors=errors,
    )


def residual_invariant_report(tr: Trajectory, atilde: np.ndarray) -> ResidualReport:
    """Finite-difference defect of the decoupled residual dynamics.

    The logged xi = x - X eta must satisfy d/dt xi = Atilde xi regardless of
    delays, switching or costs.  The central-difference defect is compared
    against a second-order threshold scaled by the trajectory's third
    time-derivative magnitude (|Atilde^3 xi|).
    """
    xi = tr.xi
    dt = tr.dt
    if len(tr.t) < 3:
        raise ValidationError("trajectory too short for a defect estimate")
    ddt = (xi[2:] - xi[:-2]) / (2.0 * dt)
    defect = ddt - xi[1:-1] @ atilde.T
    max_defect = float(np.linalg.norm(defect, axis=1).max())
    a3 = atilde @ atilde @ atilde
    curvature = float(np.linalg.norm(xi @ a3.T, axis=1).max())
    threshold = 10.0 * dt**2 * max(1.0, curvature)
    return ResidualReport(
        max_defect=max_defect, threshold=threshold, passed=max_defect <= threshold
    )


def exact_residual_norms(tr: Trajectory, atilde: np.ndarray) -> np.ndarray:
    """Norms of the matrix-exponential propagation of xi(0) on the grid."""
    phi = scipy.linalg.expm(atilde * tr.dt)
    xi = tr.xi[0].copy()
    out = np.empty(len(tr.t))
    out[0] = np.linalg.norm(xi)
    for k in range(1, len(tr.t)):
        xi = phi @ xi
        out[k] = np.linalg.norm(xi)
    return out
