"""Shared fixtures: fitted benchmark models are expensive, build them once."""

from __future__ import annotations

import numpy as np
import pytest

import kooplift as kl


@pytest.fixture(scope="session")
def pendulum():
    return kl.get_system("pendulum")


@pytest.fixture(scope="session")
def duffing():
    return kl.get_system("duffing")


@pytest.fixture(scope="session")
def v2():
    return kl.monomial_dictionary(2, 2)


@pytest.fixture(scope="session")
def v3():
    return kl.monomial_dictionary(3, 2)


@pytest.fixture(scope="session")
def pendulum_snapshots(pendulum):
    points = kl.sample_uniform(pendulum.domain, 10_000, seed=11)
    return kl.build_snapshots(pendulum, points, 0.01, seed=11)


@pytest.fixture(scope="session")
def pendulum_v3_model(pendulum_snapshots, v3):
    return kl.fit(pendulum_snapshots, v3)


@pytest.fixture(scope="session")
def pendulum_v2_model(pendulum_snapshots, v2):
    return kl.fit(pendulum_snapshots, v2)


@pytest.fixture(scope="session")
def pendulum_geometric(pendulum_v3_model, pendulum_snapshots):
    return kl.geometric_metric(pendulum_v3_model, pendulum_snapshots)


@pytest.fixture(scope="session")
def invariant_setup():
    """The linear-growth system with its exactly invariant observable triple."""
    system = kl.get_system("example1")
    dictionary = kl.dictionary_from_exponents([(1, 0), (0, 1), (2, 0)], name="invariant")
    points = kl.sample_uniform(system.domain, 10_000, seed=7)
    snapshots = kl.build_snapshots(system, points, 0.1, seed=7)
    model = kl.fit(snapshots, dictionary)
    return system, dictionary, snapshots, model


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
