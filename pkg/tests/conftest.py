import warnings

import numpy as np
import pytest

from delayopt.demo import (
    demo_agents,
    demo_costs,
    demo_gains,
    demo_scenario,
    demo_topology,
    DEMO_GENERATOR,
)


@pytest.fixture(scope="session")
def agents():
    return demo_agents()


@pytest.fixture(scope="session")
def gains():
    return demo_gains()


@pytest.fixture(scope="session")
def costs():
    return demo_costs()


@pytest.fixture(scope="session")
def topology():
    return demo_topology()


@pytest.fixture(scope="session")
def generator_rates():
    return DEMO_GENERATOR.copy()


def make_demo(delay=0.1, horizon=10.0, dt=1e-3, smooth=False, seed=None):
    kwargs = {} if seed is None else {"seed": seed}
    return demo_scenario(delay=delay, horizon=horizon, dt=dt, smooth=smooth, **kwargs)


@pytest.fixture(scope="session")
def demo_run_01():
    """Study run at delay bound 0.1, the reference for comparisons."""
    from delayopt.sim import integrate

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return integrate(make_demo(delay=0.1, horizon=10.0))


@pytest.fixture(scope="session")
def demo_run_07():
    from delayopt.sim import integrate

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return integrate(make_demo(delay=0.7, horizon=10.0))


@pytest.fixture(scope="session")
def demo_run_04_long():
    from delayopt.sim import integrate

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return integrate(make_demo(delay=0.4, horizon=60.0))
