import numpy as np
import pytest

from delayopt.errors import DimensionError, HistoryUnderflowError, ValidationError
from delayopt.objective import QuadraticCost
from delayopt.plant import closed_loop_matrix
from delayopt.protocol import (
    AgentState,
    DelayedView,
    ProtocolParams,
    agent_derivatives,
    consensus_errors,
)


def view(owner, eta, z, y):
    return DelayedView(
        owner=owner,
        eta=np.asarray(eta, dtype=float).reshape(-1, 1),
        z=np.asarray(z, dtype=float).reshape(-1, 1),
        y=np.asarray(y, dtype=float).reshape(-1, 1),
    )


class TestConsensusErrors:
    def test_zero_when_states_identical(self):
        v = view(0, [2.0, 2.0, 2.0], [1.0, 1.0, 1.0], [3.0, 3.0, 3.0])
        e_etaz, e_y = consensus_errors(np.array([0.0, 1.0, 1.0]), v)
        assert np.allclose(e_etaz, 0.0) and np.allclose(e_y, 0.0)

    def test_single_listener(self):
        v = view(0, [0.0, 0.0], [0.0, 0.0], [1.0, 0.0])
        e_etaz, e_y = consensus_errors(np.array([0.0, 1.0]), v)
        assert np.allclose(e_etaz, [0.0])
        assert np.allclose(e_y, [1.0])

    def test_no_neighbors_gives_zeros(self):
        v = view(1, [5.0, -1.0], [0.5, 2.0], [1.0, 7.0])
        e_etaz, e_y = consensus_errors(np.zeros(2), v)
        assert np.array_equal(e_etaz, np.zeros(1))
        assert np.array_equal(e_y, np.zeros(1))

    def test_linear_in_the_delayed_state(self):
        rng = np.random.default_rng(2)
        a = np.abs(rng.standard_normal(4))
        a[0] = 0.0
        vals = rng.standard_normal((3, 4))
        v1 = view(0, vals[0], vals[1], vals[2])
        v2 = view(0, 2 * vals[0], 2 * vals[1], 2 * vals[2])
        e1 = consensus_errors(a, v1)
        e2 = consensus_errors(a, v2)
        assert np.allclose(e2[0], 2 * e1[0])
        assert np.allclose(e2[1], 2 * e1[1])

    def test_missing_needed_sample_raises(self):
        v = view(0, [0.0, np.nan], [0.0, 0.0], [1.0, 0.0])
        with pytest.raises(HistoryUnderflowError, match="agent 2"):
            consensus_errors(np.array([0.0, 1.0]), v)

    def test_missing_unneeded_sample_ignored(self):
        v = view(0, [0.0, np.nan], [0.0, np.nan], [1.0, np.nan])
        e_etaz, e_y = consensus_errors(np.zeros(2), v)
        assert np.allclose(e_etaz, 0.0) and np.allclose(e_y, 0.0)

    def test_row_length_checked(self):
        v = view(0, [0.0, 0.0], [0.0, 0.0], [0.0, 0.0])
        with pytest.raises(DimensionError):
            consensus_errors(np.zeros(3), v)


class TestAgentDerivatives:
    def test_gradient_flow_form(self, agents, gains):
        # zero errors: the auxiliary state descends the local gradient
        params = ProtocolParams(alpha=1.0, beta=0.75)
        cost = QuadraticCost(H=[[1.0]], g=[-3.0], c=4.5)  # 0.5 (y - 3)^2
        state = AgentState(x=[1.0, 0.4], eta=[0.2], z=[0.0])
        out = agent_derivatives(
            agents[0], gains[0], cost, state,
            (np.zeros(1), np.zeros(1)), params,
        )
        y = agents[0].C @ state.x
        assert np.allclose(out.etadot, -(y - 3.0))
        assert np.allclose(out.zdot, 0.0)
        assert np.array_equal(out.v, out.etadot)

    def test_team_gradient_balance_at_optimum(self, agents, gains, costs):
        # with zero errors and all outputs at the optimum the etadots sum to 0
        params = ProtocolParams(alpha=1.0, beta=0.75)
        theta = 2.8
        total = 0.0
        for model, g, cost in zip(agents, gains, costs):
            x = np.linalg.lstsq(model.C, [theta], rcond=None)[0]
            state = AgentState(x=x, eta=[theta], z=[0.0])
            out = agent_derivatives(
                model, g, cost, state, (np.zeros(1), np.zeros(1)), params
            )
            total += out.etadot
        assert np.allclose(total, 0.0, atol=1e-12)

    def test_residual_dynamics_identity(self, agents, gains, costs):
        # xdot - X etadot = (A - B K)(x - X eta) for any errors and costs
        rng = np.random.default_rng(8)
        params = ProtocolParams(alpha=1.3, beta=0.6)
        for model, g, cost in zip(agents, gains, costs):
            atilde = closed_loop_matrix(model, g)
            for _ in range(25):
                state = AgentState(
                    x=rng.standard_normal(model.n),
                    eta=rng.standard_normal(1),
                    z=rng.standard_normal(1),
                )
                errors = (rng.standard_normal(1), rng.standard_normal(1))
                out = agent_derivatives(model, g, cost, state, errors, params)
                lhs = out.xdot - g.X @ out.etadot
                rhs = atilde @ (state.x - g.X @ state.eta)
                assert np.allclose(lhs, rhs, atol=1e-12)

    def test_control_law_assembly(self, agents, gains, costs):
        rng = np.random.default_rng(9)
        params = ProtocolParams(alpha=2.0, beta=0.5)
        model, g, cost = agents[1], gains[1], costs[1]
        state = AgentState(x=rng.standard_normal(2), eta=[0.3], z=[-0.1])
        errors = (np.array([0.7]), np.array([-0.2]))
        out = agent_derivatives(model, g, cost, state, errors, params)
        grad = cost.gradient(model.C @ state.x)
        v = -grad - 0.5 * errors[0] - 1.0 * errors[1]
        u = -g.K @ state.x - (g.U - g.K @ g.X) @ state.eta + g.W @ v
        assert np.allclose(out.v, v)
        assert np.allclose(out.u, u)
        assert np.allclose(out.xdot, model.A @ state.x + model.B @ u)
        assert np.allclose(out.zdot, 1.0 * errors[1])


class TestParams:
    def test_rejects_nonpositive_gains(self):
        with pytest.raises(ValidationError):
            ProtocolParams(alpha=0.0, beta=1.0)
        with pytest.raises(ValidationError):
            ProtocolParams(alpha=1.0, beta=-0.5)
