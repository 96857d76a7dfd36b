"""Built-in three-agent study: heterogeneous plants, Markov-switched
digraphs and scalar quadratic costs.

The three communication modes are the forward cycle 1->2->3->1, the reverse
cycle, and the bidirectional triangle.  Every mode is weight-balanced and
strongly connected: with the slow transition rates of the study (mean dwell
times of 1.7 to 10 time units) the network spends whole dwells in a single
graph, and any mode that leaves some agent without a path from the others
lets that agent drift to its local minimizer, which destroys convergence to
the team optimum.  The modes still disagree on their auxiliary-state
equilibria, so every switch visibly re-excites the outputs.  The summed
cost is minimized at theta* = 2.8 with value 4.4.
"""
import numpy as np

from .markov import GeneratorMatrix
from .objective import CostSet, QuadraticCost
from .plant import AgentModel, GainSet
from .protocol import ProtocolParams
from .graph import ModeDigraph, SwitchingTopology
from .sim import DelaySpec, Scenario

# Chosen so the sampled mode path settles into one graph well before the
# 10-unit study horizon (the switching realization is part of the demo).
DEMO_SEED = 36
DEMO_ALPHA = 1.0
DEMO_BETA = 0.75

# Initial states chosen to spread the outputs around the optimum:
# y(0) = (4, 1, 2).
DEMO_X0 = (
    np.array([3.0, 1.0]),
    np.array([-1.0, 0.0]),
    np.array([0.0, -2.0, 0.0]),
)

# Raw generator entries; rows sum to zero.
DEMO_GENERATOR = np.array(
    [
        [-0.2, 0.1, 0.1],
        [0.2, -0.6, 0.4],
        [0.02, 0.08, -0.1],
    ]
)

# As published these weights sum to 1.0619; they are normalized downstream.
DEMO_INITIAL_MODE_WEIGHTS = np.array([0.4772, 0.2612, 0.3235])


def demo_agents() -> list:
    a1 = AgentModel(
        A=np.array([[0.0, 1.0], [0.0, 0.0]]),
        B=np.array([[0.0, 1.0], [1.0, -2.0]]),
        C=np.array([[1.0, 1.0]]),
    )
    a2 = AgentModel(
        A=np.array([[0.0, -1.0], [1.0, -2.0]]),
        B=np.array([[1.0, 0.0], [3.0, -1.0]]),
        C=np.array([[-1.0, 1.0]]),
    )
    a3 = AgentModel(
        A=np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 1.0, -2.0]]),
        B=np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]),
        C=np.array([[1.0, -1.0, 1.0]]),
    )
    return [a1, a2, a3]


def demo_gains() -> list:
    g1 = GainSet(
        K=np.array([[8.0, 7.0], [4.0, 1.0]]),
        U=np.array([[1.0], [0.5]]),
        W=np.array([[1.5], [0.5]]),
        X=np.array([[0.5], [0.5]]),
    )
    g2 = GainSet(
        K=np.array([[3.0, -1.0], [8.0, -5.0]]),
        U=np.array([[-0.5], [0.0]]),
        W=np.array([[-0.5], [-2.0]]),
        X=np.array([[-0.5], [0.5]]),
    )
    g3 = GainSet(
        K=np.array([[6.3333, 1.0, -1.3333], [0.0, 2.0, 1.0]]),
        U=np.array([[-1.0], [0.0]]),
        W=np.array([[0.0], [-1.0]]),
        X=np.array([[0.0], [-1.0], [0.0]]),
    )
    return [g1, g2, g3]


def demo_costs() -> CostSet:
    return CostSet(
        [
            QuadraticCost(H=[[1.0]], g=[0.0], c=-1.0),   # 0.5 th^2 - 1
            QuadraticCost(H=[[2.0]], g=[-8.0], c=16.0),   # (th - 4)^2
            QuadraticCost(H=[[2.0]], g=[-6.0], c=9.0),    # (th - 3)^2
        ]
    )


def _adjacency(edges) -> np.ndarray:
    a = np.zeros((3, 3))
    for src, dst in edges:
        a[dst - 1, src - 1] = 1.0  # dst hears src
    return a

FORWARD_CYCLE = ((1, 2), (2, 3), (3, 1))
REVERSE_CYCLE = ((2, 1), (3, 2), (1, 3))
TRIANGLE = FORWARD_CYCLE + REVERSE_CYCLE


def demo_topology() -> SwitchingTopology:
    """Forward cycle, reverse cycle and bidirectional triangle modes."""
    return SwitchingTopology(
        [
            ModeDigraph(_adjacency(FORWARD_CYCLE)),
            ModeDigraph(_adjacency(REVERSE_CYCLE)),
            ModeDigraph(_adjacency(TRIANGLE)),
        ]
    )


def demo_union_topology() -> SwitchingTopology:
    """Single mode holding the directed cycle (the switching-free variant)."""
    return SwitchingTopology([ModeDigraph(_adjacency(FORWARD_CYCLE))])


def demo_scenario(
    delay: float = 0.1,
    horizon: float = 10.0,
    dt: float = 1e-3,
    seed: int = DEMO_SEED,
    smooth: bool = False,
) -> Scenario:
    """Assemble the three-agent study for one delay bound.

    ``smooth=True`` replaces the random switching with the fixed union cycle
    (a single mode), giving a switch-free run for convergence-order studies.
    """
    if smooth:
        topology = demo_union_topology()
        generator = GeneratorMatrix([[0.0]])
        initial = np.array([1.0])
    else:
        topology = demo_topology()
        generator = GeneratorMatrix(DEMO_GENERATOR)
        initial = DEMO_INITIAL_MODE_WEIGHTS / DEMO_INITIAL_MODE_WEIGHTS.sum()
    return Scenario(
        agents=demo_agents(),
        gains=demo_gains(),
        costs=demo_costs(),
        topology=topology,
        generator=generator,
        initial_mode_distribution=initial,
        params=ProtocolParams(alpha=DEMO_ALPHA, beta=DEMO_BETA),
        delay=DelaySpec.constant(delay, 3),
        x0=[x.copy() for x in DEMO_X0],
        dt=dt,
        horizon=horizon,
        seed=seed,
    )
