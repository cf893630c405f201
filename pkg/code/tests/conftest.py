"""Shared fixtures: the reference link and its channel."""

import sys
from pathlib import Path

CODE_DIR = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(CODE_DIR))

import numpy as np
import pytest

from src import config
from src.channel import channel_from_geometry
from src.geometry import LinkGeometry
from src.inductance import coil_electrical
from src.txrx import LinkBudget


def make_geometry(**overrides) -> LinkGeometry:
    params = dict(
        n_tx=8, n_rx=8,
        ring_radius_tx=25e-3, ring_radius_rx=25e-3,
        coil_radius_tx=5e-3, coil_radius_rx=5e-3,
        turns_tx=1, turns_rx=1,
        axial_distance=25e-3,
    )
    params.update(overrides)
    return LinkGeometry(**params)


def tuned(geom: LinkGeometry):
    """Coil model resonant at the carrier."""
    return coil_electrical(geom, frequency=config.FREQUENCY_HZ,
                           resonance_frequency=config.FREQUENCY_HZ)


@pytest.fixture
def geometry():
    return make_geometry()


@pytest.fixture
def electrical(geometry):
    return tuned(geometry)


@pytest.fixture
def channel(geometry, electrical):
    return channel_from_geometry(geometry, electrical)


@pytest.fixture
def budget():
    return LinkBudget(config.TX_POWER_W, config.NOISE_POWER_W)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
