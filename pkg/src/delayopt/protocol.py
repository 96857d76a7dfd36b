"""The distributed control law evaluated per agent.

Each agent runs, from delayed neighborhood information,

    e_etaz_i = sum_j a_ij [(eta_i - eta_j) + (z_i - z_j)]   (delayed)
    e_y_i    = sum_j a_ij (y_i - y_j)                       (delayed)
    v_i      = -grad f_i(y_i) - beta e_etaz_i - alpha beta e_y_i
    u_i      = -K_i x_i - (U_i - K_i X_i) eta_i + W_i v_i
    xdot_i   = A_i x_i + B_i u_i,   etadot_i = v_i,   zdot_i = alpha beta e_y_i

The gradient acts on the agent's own current output; only the consensus sums
use delayed samples.  Both the agent's own state and its neighbors' are taken
at the same delayed instant.

The gradient enters with a minus sign: the descent direction is the only one
consistent with the closed-loop dynamics and with minimization.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, HistoryUnderflowError, ValidationError
from .objective import QuadraticCost
from .plant import AgentModel, GainSet


@dataclass
class ProtocolParams:
    """Positive coupling gains."""

    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValidationError("alpha and beta must be positive")


@dataclass
class AgentState:
    """Plant state and the two auxiliary coordination states of one agent."""

    x: np.ndarray
    eta: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        self.z = np.atleast_1d(np.asarray(self.z, dtype=float))


@dataclass
class DelayedView:
    """Network snapshot as seen by one agent at its delayed sample time.

    Rows hold every agent's (eta, z, y); rows that were never sampled may be
    NaN and only matter if the owner actually listens to that agent.
    """

    owner: int
    eta: np.ndarray  # (N, q)
    z: np.ndarray
    y: np.ndarray


@dataclass
class AgentDerivatives:
    xdot: np.ndarray
    etadot: np.ndarray
    zdot: np.ndarray
    u: np.ndarray
    v: np.ndarray


def consensus_errors(adjacency_row: np.ndarray, view: DelayedView) -> tuple:
    """Delayed disagreement sums (e_etaz, e_y) for the view's owner.

    Agents with zero weight are ignored entirely, so an empty neighborhood
    yields exact zeros.
    """
    a = np.asarray(adjacency_row, dtype=float)
    n = view.eta.shape[0]
    if a.shape != (n,):
        raise DimensionError(f"adjacency row must have length {n}")
    q = view.eta.shape[1]
    idx = np.flatnonzero(a)
    if idx.size == 0:
        return np.zeros(q), np.zeros(q)
    needed = np.append(idx, view.owner)
    for j in needed:
        if not (
            np.all(np.isfinite(view.eta[j]))
            and np.all(np.isfinite(view.z[j]))
            and np.all(np.isfinite(view.y[j]))
        ):
            raise HistoryUnderflowError(
                f"delayed sample for agent {j + 1} is missing from the view"
            )
    w = a[idx]
    own_etaz = view.eta[view.owner] + view.z[view.owner]
    e_etaz = w @ (own_etaz - (view.eta[idx] + view.z[idx]))
    e_y = w @ (view.y[view.owner] - view.y[idx])
    return e_etaz, e_y


def agent_derivatives(
    model: AgentModel,
    gains: GainSet,
    cost: QuadraticCost,
    state: AgentState,
    errors: tuple,
    params: ProtocolParams,
) -> AgentDerivatives:
    """One agent's state derivatives and control signals.

    By construction the residual xi = x - X eta obeys
    ``d/dt xi = (A - B K) xi`` exactly, for any consensus errors and any
    cost: the feedforward terms cancel through the regulator equations.
    """
    e_etaz, e_y = errors
    y = model.C @ state.x
    grad = cost.gradient(y)
    ab = params.alpha * params.beta
    v = -grad - params.beta * e_etaz - ab * e_y
    u = -gains.K @ state.x - (gains.U - gains.K @ gains.X) @ state.eta + gains.W @ v
    xdot = model.A @ state.x + model.B @ u
    return AgentDerivatives(xdot=xdot, etadot=v, zdot=ab * e_y, u=u, v=v)
