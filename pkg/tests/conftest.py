from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from vqoco.geometry import Box
from vqoco.streams import ConstraintSpec, ObjectiveSpec, ScenarioSpec

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
DATA = Path(__file__).resolve().parent / "data"


@pytest.fixture
def configs():
    return CONFIGS


@pytest.fixture
def data_dir():
    return DATA


def slater_scenario(horizon=200, seed=11):
    """The 2D adversarial scenario of configs/slater_2d.yaml."""
    return ScenarioSpec(
        family="adversarial-common-subset",
        dimension=2,
        objective=ObjectiveSpec(centers=[[1.0, 1.0], [0.9, 0.2], [0.2, 0.9]], center_spread=0.1),
        constraints=(
            ConstraintSpec(a=[1.0, 0.5], b=0.9, a_spread=0.3, b_spread=0.3),
            ConstraintSpec(a=[0.3, 1.0], b=0.7, a_spread=0.3, b_spread=0.3),
        ),
        F=2.5, G=3.2, slater_point=np.zeros(2), eta=0.25, horizon=horizon, seed=seed,
    )


@pytest.fixture
def unit_square():
    return Box([0.0, 0.0], [1.0, 1.0])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get("acceptance", None) if hasattr(config, "stash") else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
