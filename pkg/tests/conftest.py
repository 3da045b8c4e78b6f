"""Shared specs used across the test modules."""

import pytest

from sparsewalk.dists import Constant, DiscreteTable, ParetoGap
from sparsewalk.env import EnvironmentSpec

TWO_THIRDS = 2.0 / 3.0
ONE_THIRD = 1.0 / 3.0


@pytest.fixture(scope="session")
def spec_two_gap():
    """lambda = 2/3 everywhere, gaps uniform on {1, 3}: speed 2/13."""
    return EnvironmentSpec(Constant(TWO_THIRDS), DiscreteTable((1, 3), (0.5, 0.5)))


@pytest.fixture(scope="session")
def spec_classical():
    """d = 1 (every site marked), lambda = 0.7: classical walk with speed 0.4."""
    return EnvironmentSpec(Constant(0.7), Constant(1))


@pytest.fixture(scope="session")
def spec_gap_two():
    """lambda = 2/3, d = 2: zero gap variance, speed 1/6."""
    return EnvironmentSpec(Constant(TWO_THIRDS), Constant(2))


@pytest.fixture(scope="session")
def spec_recurrent():
    """xi in {2, 1/2} with a fair coin, dense marks: recurrent."""
    return EnvironmentSpec(DiscreteTable((ONE_THIRD, TWO_THIRDS), (0.5, 0.5)),
                           Constant(1))


@pytest.fixture(scope="session")
def spec_kappa_one():
    """xi in {2, 1/2} with P(xi=2) = 1/3: tail exponent root exactly 1."""
    return EnvironmentSpec(
        DiscreteTable((ONE_THIRD, TWO_THIRDS), (ONE_THIRD, 2 * ONE_THIRD)),
        Constant(1))


@pytest.fixture(scope="session")
def spec_kappa_half():
    """xi in {4, 1/4} with P(xi=4) = 1/3: tail exponent root exactly 1/2."""
    return EnvironmentSpec(DiscreteTable((0.2, 0.8), (ONE_THIRD, 2 * ONE_THIRD)),
                           Constant(1))


@pytest.fixture(scope="session")
def spec_sinai_heavy():
    """Recurrent bias with heavy pareto gaps (alpha = 0.6)."""
    return EnvironmentSpec(DiscreteTable((ONE_THIRD, TWO_THIRDS), (0.5, 0.5)),
                           ParetoGap(0.6))


@pytest.fixture(scope="session")
def spec_uniform123():
    """lambda = 2/3, gaps uniform on {1, 2, 3}: dual moments (7/3, 2/3)."""
    third = 1.0 / 3.0
    return EnvironmentSpec(Constant(TWO_THIRDS),
                           DiscreteTable((1, 2, 3), (third, third, third)))
