"""Heterogeneous LTI agent models and feedforward gain algebra.

Each agent is ``xdot = A x + B u``, ``y = C x`` with its own state and input
dimensions but a shared output dimension.  The feedforward gains (U, W, X)
solve the linear regulator equations

    B U = A X,    B W = X,    C X = I_q,

and the state feedback K must render ``A - B K`` Hurwitz.  K is supplied by
the user and only validated here; no synthesis is performed.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, HurwitzError, RegulatorError

REGULATOR_TOL = 1e-10
GAIN_RESIDUAL_TOL = 1e-8


@dataclass
class AgentModel:
    """State-space data (A, B, C) for one agent.

    Parameters
    ----------
    A : (n, n) ndarray
    B : (n, p) ndarray
    C : (q, n) ndarray
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise DimensionError(f"B has {self.B.shape[0]} rows, expected {n}")
        if self.C.shape[1] != n:
            raise DimensionError(f"C has {self.C.shape[1]} columns, expected {n}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.B.shape[1]

    @property
    def q(self):
        return self.C.shape[0]


@dataclass
class GainSet:
    """Feedback gain K and feedforward triple (U, W, X) for one agent."""

    K: np.ndarray
    U: np.ndarray
    W: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        self.K = np.atleast_2d(np.asarray(self.K, dtype=float))
        self.U = np.atleast_2d(np.asarray(self.U, dtype=float))
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))


@dataclass
class RankReport:
    rank: int
    required: int
    satisfied: bool


@dataclass
class RegulatorSolution:
    U: np.ndarray
    W: np.ndarray
    X: np.ndarray
    residuals: tuple


def check_rank_condition(m: AgentModel) -> RankReport:
    """Rank test for solvability of the regulator equations.

    Stacks ``[[C B, 0], [-A B, B]]`` and compares its rank (singular values
    above ``1e-9 * sigma_max``) against ``n + q``.
    """
    cb = m.C @ m.B
    ab = m.A @ m.B
    top = np.hstack([cb, np.zeros((m.q, m.p))])
    bottom = np.hstack([-ab, m.B])
    stacked = np.vstack([top, bottom])
    svals = np.linalg.svd(stacked, compute_uv=False)
    smax = float(svals[0]) if svals.size else 0.0
    rank = int(np.sum(svals > 1e-9 * smax)) if smax > 0 else 0
    required = m.n + m.q
    return RankReport(rank=rank, required=required, satisfied=rank == required)


def regulator_residuals(m: AgentModel, U, W, X) -> tuple:
    """Frobenius residuals of (B U - A X, B W - X, C X - I)."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    W = np.atleast_2d(np.asarray(W, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    r1 = float(np.linalg.norm(m.B @ U - m.A @ X))
    r2 = float(np.linalg.norm(m.B @ W - X))
    r3 = float(np.linalg.norm(m.C @ X - np.eye(m.q)))
    return (r1, r2, r3)


def solve_regulator(m: AgentModel, tol: float = REGULATOR_TOL) -> RegulatorSolution:
    """Minimum-norm least-squares solution of the regulator equations.

    The three matrix equations are stacked into one linear system in
    ``(vec U, vec W, vec X)`` (column-major vec) and solved with lstsq; the
    result is accepted only if all three residuals are below ``tol``.
    The solution need not be unique; only the residuals matter downstream.
    """
    n, p, q = m.n, m.p, m.q
    iq = np.eye(q)
    kb = np.kron(iq, m.B)  # vec(B M) = (I_q x B) vec(M) for M with q columns
    ka = np.kron(iq, m.A)
    kc = np.kron(iq, m.C)
    zeros = np.zeros
    rows = [
        np.hstack([kb, zeros((n * q, p * q)), -ka]),
        np.hstack([zeros((n * q, p * q)), kb, -np.eye(n * q)]),
        np.hstack([zeros((q * q, 2 * p * q)), kc]),
    ]
    lhs = np.vstack(rows)
    rhs = np.concatenate([zeros(n * q), zeros(n * q), iq.flatten(order="F")])
    sol, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    U = sol[: p * q].reshape((p, q), order="F")
    W = sol[p * q : 2 * p * q].reshape((p, q), order="F")
    X = sol[2 * p * q :].reshape((n, q), order="F")
    residuals = regulator_residuals(m, U, W, X)
    if max(residuals) > tol:
        raise RegulatorError(
            "regulator equations have no solution within tolerance "
            f"(residuals {residuals[0]:.2e}, {residuals[1]:.2e}, {residuals[2]:.2e}); "
            "check the rank condition"
        )
    return RegulatorSolution(U=U, W=W, X=X, residuals=residuals)


def hurwitz_margin(a: np.ndarray) -> float:
    """Largest real part among the eigenvalues; Hurwitz iff negative."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise DimensionError("matrix must be square")
    return float(np.max(np.real(np.linalg.eigvals(a))))


def closed_loop_matrix(m: AgentModel, g: GainSet) -> np.ndarray:
    """A - B K for one agent."""
    return m.A - m.B @ g.K


def validate_gains(m: AgentModel, g: GainSet, tol: float = GAIN_RESIDUAL_TOL):
    """Check shapes, regulator residuals and the Hurwitz property of A - B K."""
    n, p, q = m.n, m.p, m.q
    if g.K.shape != (p, n):
        raise DimensionError(f"K has shape {g.K.shape}, expected {(p, n)}")
    if g.U.shape != (p, q) or g.W.shape != (p, q):
        raise DimensionError(f"U and W must have shape {(p, q)}")
    if g.X.shape != (n, q):
        raise DimensionError(f"X has shape {g.X.shape}, expected {(n, q)}")
    residuals = regulator_residuals(m, g.U, g.W, g.X)
    if max(residuals) > tol:
        raise RegulatorError(
            f"gain residuals {tuple(f'{r:.2e}' for r in residuals)} exceed {tol:g}"
        )
    margin = hurwitz_margin(closed_loop_matrix(m, g))
    if margin >= 0:
        raise HurwitzError(f"A - B K is not Hurwitz (max Re(lambda) = {margin:.3g})")
    return residuals, margin
