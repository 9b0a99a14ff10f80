"""Shared fixtures: canonical bath specs and cached expansion fits."""

import os
from pathlib import Path

import pytest

from spinboson.bath import BathSpec
from spinboson.scenarios import ScenarioConfig, ensure_expansion

REPO_ROOT = Path(__file__).resolve().parents[1]


def runs_root() -> Path:
    root = os.environ.get("SPINBOSON_TEST_RUNS")
    return Path(root) if root else REPO_ROOT / ".cache" / "acceptance-runs"


@pytest.fixture(scope="session")
def runs_dir() -> Path:
    path = runs_root()
    path.mkdir(parents=True, exist_ok=True)
    return path


@pytest.fixture(scope="session")
def weak_ohmic() -> BathSpec:
    return BathSpec(s=1.0, kappa_2pi=1e-3, omega_c=50.0, beta=5.0)


@pytest.fixture(scope="session")
def weak_subohmic() -> BathSpec:
    return BathSpec(s=0.25, kappa_2pi=1e-3, omega_c=50.0, beta=5.0)


@pytest.fixture(scope="session")
def weak_ohmic_expansion(runs_dir):
    cfg = ScenarioConfig(scenario="relax", method="heom", s=1.0,
                         kappa_2pi=1e-3, outdir=str(runs_dir)).resolved()
    return ensure_expansion(cfg, runs_dir / "cache")


@pytest.fixture(scope="session")
def weak_subohmic_expansion(runs_dir):
    cfg = ScenarioConfig(scenario="relax", method="heom", s=0.25,
                         kappa_2pi=1e-3, outdir=str(runs_dir)).resolved()
    return ensure_expansion(cfg, runs_dir / "cache")
