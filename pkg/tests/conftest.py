"""Shared fixtures: shipped scenario configs and cached full runs.

The limited-observation runs synthesize gains at every grid node, so each
one costs about a minute.  Everything downstream (regression, consistency,
delay and acceptance tests) shares the session-scoped results below instead
of re-running.
"""

import json
from pathlib import Path

import pytest

import tadsim
from tadsim.model import PlayerId, ScenarioConfig
from tadsim.simulator import run, run_paired_delay, run_suicidal_check

SCENARIO_DIR = Path(tadsim.__file__).parent / "scenarios"


def scenario_doc(name: str) -> dict:
    return json.loads((SCENARIO_DIR / f"{name}.json").read_text())


def scenario_config(name: str, **patch) -> tadsim.ScenarioConfig:
    doc = scenario_doc(name)
    doc.update(patch)
    return tadsim.config_from_dict(doc)


def make_config(n=2, interaction="I1", lam=1, **kw):
    """Small hand-rolled scenario for unit tests; defaults keep it cheap."""
    positions = {PlayerId.defender(i + 1): (float(i), 0.0) for i in range(n)}
    positions[PlayerId.target()] = (0.0, 1.0)
    positions[PlayerId.attacker()] = (1.0, 2.0)
    base = dict(
        n=n,
        initial_positions=positions,
        sigma_d=(0.1,) * n,
        sigma_a=0.1,
        zeta_d=(2.0,) * n,
        zeta_tau=3.0 if interaction == "I2" else None,
        lam=lam,
        interaction=interaction,
        horizon=1.0,
        step=0.01,
    )
    base.update(kw)
    return ScenarioConfig(**base)


@pytest.fixture(scope="session")
def manifest() -> dict:
    return json.loads((SCENARIO_DIR / "expected.json").read_text())


@pytest.fixture(scope="session")
def i1_config():
    return scenario_config("i1_nonsuicidal")


@pytest.fixture(scope="session")
def i1_suicidal_config():
    return scenario_config("i1_suicidal")


@pytest.fixture(scope="session")
def i2_config():
    return scenario_config("i2_zt10")


@pytest.fixture(scope="session")
def i2_zt2p5_config():
    return scenario_config("i2_zt2p5")


@pytest.fixture(scope="session")
def i1_complete_run(i1_config):
    return run(i1_config, "complete_observations")


@pytest.fixture(scope="session")
def i1_limited_run(i1_config):
    return run(i1_config, "limited_observations")


@pytest.fixture(scope="session")
def i1_suicidal_report(i1_suicidal_config):
    return run_suicidal_check(i1_suicidal_config)


@pytest.fixture(scope="session")
def i2_complete_run(i2_config):
    return run(i2_config, "complete_observations")


@pytest.fixture(scope="session")
def i2_zt10_run(i2_config):
    return run(i2_config, "limited_observations")


@pytest.fixture(scope="session")
def paired_d3_report(i2_zt2p5_config):
    # the 0.3 -> 0.6 change rides on the small-target-radius variant
    return run_paired_delay(i2_zt2p5_config, PlayerId.defender(3), 0.6)


@pytest.fixture(scope="session")
def i2_zt2p5_run(paired_d3_report):
    return paired_d3_report.base


@pytest.fixture(scope="session")
def i2_d3_run(paired_d3_report):
    return paired_d3_report.alt
