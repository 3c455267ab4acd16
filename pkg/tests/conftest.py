import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from photoland.dynamics import Design, Policy, Pose, SimConfig, default_environments  # noqa: E402


@pytest.fixture
def symmetric_design():
    return Design((0.5, 0.5), (0.5, -0.5))


@pytest.fixture
def envs():
    return default_environments()


@pytest.fixture
def quick_cfg():
    return SimConfig(max_steps=5_000)
