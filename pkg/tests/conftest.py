import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ddc.descriptor import build_descriptor
from ddc.experiments import ExperimentConfig, collect
from ddc.plant import PlantModel, paper_plant

settings.register_profile("ddc", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ddc")


@pytest.fixture(scope="session")
def plant() -> PlantModel:
    return paper_plant()


def make_dataset(plant, delta=0.2, seed=0, **kw):
    cfg = ExperimentConfig.for_plant(plant, delta=delta, seed=seed, **kw)
    ds = collect(plant, cfg)
    return cfg, ds, build_descriptor(ds.exp1, ds.exp2, cfg)


@pytest.fixture(scope="session")
def noisy(plant):
    return make_dataset(plant, 0.2, seed=0)


@pytest.fixture(scope="session")
def noiseless(plant):
    return make_dataset(plant, 0.0, seed=0)


def stable_diag_plant(n=3, m=3) -> PlantModel:
    """A = 0.5 I, B = first m columns of I, Bw = I, C = first two rows of I, D = 0.

    s0 = 0.5 is an eigenvalue here, so data built on this plant needs another shift.
    """
    return PlantModel(A=0.5 * np.eye(n), B=np.eye(n)[:, :m], Bw=np.eye(n),
                      C=np.eye(n)[:2], D=np.zeros((2, m)))


ACCEPTANCE_LINES: list[str] = []


def report_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"CRITERION {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
