import numpy as np
import pytest

from assocnw.density import MixtureModel


def random_model(rng: np.random.Generator, m: int, d: int, spread: float = 2.0,
                 **settings) -> MixtureModel:
    w = rng.random(m) + 0.1
    c = rng.normal(0.0, spread, (m, d))
    s = rng.uniform(0.5, 1.5, (m, d))
    return MixtureModel.from_kernels(w, c, s, normalize=True, **settings)


def brute_density(model: MixtureModel, x) -> float:
    """Direct summation over kernels with scalar math (no numpy vector ops)."""
    import math
    w, c, s, _ = model.arrays()
    total = 0.0
    for k in range(len(w)):
        term = float(w[k])
        for i in range(model.dim):
            u = (float(x[i]) - float(c[k, i])) / float(s[k, i])
            term *= math.exp(-0.5 * u * u) / (math.sqrt(2 * math.pi) * float(s[k, i]))
        total += term
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def plant():
    from assocnw.powertrain import PlantParams, calibrate
    return calibrate(PlantParams())


@pytest.fixture(scope="session")
def training_drive(plant):
    from assocnw.powertrain import DriverParams, simulate_drive
    return simulate_drive(plant, DriverParams(), 500.0, seed=0)


@pytest.fixture(scope="session")
def _car_model(training_drive):
    from assocnw.control import new_car_model, teach
    return teach(new_car_model(), training_drive)


@pytest.fixture
def car_model(_car_model):
    """A private copy of the 500 s trained model; tests may mutate it."""
    return _car_model.copy()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
