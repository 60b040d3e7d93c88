from __future__ import annotations

import pytest

from announce_planner.model import preset_config, ProblemConfig, DEFAULTS


@pytest.fixture(scope="session")
def tiny_cfg() -> ProblemConfig:
    return ProblemConfig(t_min=2, t_max=4, **DEFAULTS)


@pytest.fixture(scope="session")
def tiny6_cfg() -> ProblemConfig:
    return ProblemConfig(t_min=2, t_max=6, **DEFAULTS)


@pytest.fixture(scope="session")
def tiny5_cfg() -> ProblemConfig:
    return ProblemConfig(t_min=2, t_max=5, **DEFAULTS)


@pytest.fixture(scope="session")
def small_cfg() -> ProblemConfig:
    return preset_config("small")


@pytest.fixture(scope="session")
def medium_cfg() -> ProblemConfig:
    return preset_config("medium")
