"""Shared fixtures: the two canonical network configurations.

Engines are session-scoped; they are pure after construction, so sharing
them across tests only saves the spline builds.
"""

import math

import pytest

from hetqos.association import AssociationEngine, NetworkConfig
from hetqos.content import ContentConfig
from hetqos.geometry import TierLayout

DISK_KM = math.pi * 1000.0 ** 2
CELL = math.pi * 500.0 ** 2
AREA = 1000.0 ** 2


def clustered_config(cache_ratio=0.1, sigma=250.0):
    """Metric-scale layout: sparse tiers over kilometres."""
    return NetworkConfig(
        user_intensity=1000 / DISK_KM,
        cache_ratio=cache_ratio,
        sbs_layout=TierLayout.thomas(3 / DISK_KM, 10.0, sigma),
        mbs_intensity=2 / DISK_KM,
        power_d2d=3.0, power_sbs=13.0, power_mbs=193.0)


def dense_config(cache_ratio=0.1):
    """Normalized-cell layout: dense tiers, tight cluster spread."""
    return NetworkConfig(
        user_intensity=300 * AREA / CELL,
        cache_ratio=cache_ratio,
        sbs_layout=TierLayout.thomas(3 * AREA / CELL, 10.0, 0.05),
        mbs_intensity=6 * AREA / CELL,
        power_d2d=73.0, power_sbs=373.0, power_mbs=1773.0)


def content_config():
    return ContentConfig(catalog_size=1000, cache_d2d=10, cache_sbs=100,
                         skew=0.8)


@pytest.fixture(scope="session")
def fig3_cfg():
    return clustered_config()


@pytest.fixture(scope="session")
def fig3_engine(fig3_cfg):
    return AssociationEngine(fig3_cfg)


@pytest.fixture(scope="session")
def fig4_cfg():
    return dense_config()


@pytest.fixture(scope="session")
def fig4_engine(fig4_cfg):
    return AssociationEngine(fig4_cfg)


@pytest.fixture(scope="session")
def content():
    return content_config()
