"""Test configuration and fixtures."""
import random

import pytest

from ovmf.domain.cmforms import CMSpec, StabilizedForm, cm_qexpansion, stabilize
from ovmf.domain.padic import ResidueRing
from ovmf.domain.qseries import QSeries
from ovmf.infrastructure.config import Settings, get_settings


@pytest.fixture(autouse=True)
def clear_settings_cache() -> None:
    """Environment changes in one test must not leak through the settings cache."""
    get_settings.cache_clear()


@pytest.fixture
def test_settings() -> Settings:
    """Small, fast settings for pipeline runs."""
    return Settings(
        log_level="WARNING",
        log_format="console",
        threads=1,
        precision_buffer=6,
        buffer_step=6,
        max_escalations=1,
        certify=False,
    )


@pytest.fixture
def rng() -> random.Random:
    """Seeded generator so randomized oracles are reproducible."""
    return random.Random(20240517)


@pytest.fixture
def ring_25() -> ResidueRing:
    return ResidueRing(5, 2)


@pytest.fixture(scope="session")
def gaussian_spec() -> CMSpec:
    """D=-4, k=5, p=5: the weight-5 form of level 4 attached to Q(i)."""
    return CMSpec(-4, 5, 5, 6)


@pytest.fixture(scope="session")
def eisenstein_spec() -> CMSpec:
    """D=-3, k=7, p=7: the weight-7 form of level 3 attached to Q(sqrt(-3))."""
    return CMSpec(-3, 7, 7, 7)


@pytest.fixture(scope="session")
def gaussian_g0(gaussian_spec: CMSpec) -> QSeries:
    return cm_qexpansion(gaussian_spec, 120)


@pytest.fixture(scope="session")
def gaussian_stab(gaussian_spec: CMSpec, gaussian_g0: QSeries) -> StabilizedForm:
    return stabilize(gaussian_spec, gaussian_g0, 6)
