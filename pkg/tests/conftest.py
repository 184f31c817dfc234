from __future__ import annotations

import pytest

from revstream.backends.base import Backends
from revstream.backends.mock import MockLLM
from revstream.bench import RunConfig, build_scenario
from revstream.runtime import RunRecord, run_session


def mock_run(
    scenario: str = "event_planning",
    rho: float = 0.25,
    revision_type: str = "substitutive",
    policy: str = "absorber",
    timing: str = "mid",
    n_injections: int = 1,
    length_mult: int = 1,
    seed: int = 0,
) -> RunRecord:
    """One deterministic mock session with the given dimensions."""
    config = RunConfig(
        scenario=scenario,
        rho=rho,
        revision_type=revision_type,
        policy=policy,
        timing=timing,
        n_injections=n_injections,
        length_mult=length_mult,
        seed=seed,
    )
    sc = build_scenario(scenario, rho, length_mult)
    return run_session(config, sc, Backends.single(MockLLM(sc)))


@pytest.fixture
def event_scenario():
    return build_scenario("event_planning", 0.25)


@pytest.fixture
def full_registry(event_scenario):
    return event_scenario.registry
