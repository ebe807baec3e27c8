"""Shared fixtures: cheap materials, geometries, and tolerance helpers."""

import numpy as np
import pytest

from casgrat.materials import Drude, LorentzOscillators, Vacuum, fused_silica, gold
from casgrat.mie import SphereSpec
from casgrat.rcwa import GratingSpec


def const_eps(value: float) -> LorentzOscillators:
    """Frequency-flat permittivity via a single far-off resonance."""
    return LorentzOscillators(((value - 1.0, 1e30, 0.0),))


@pytest.fixture(scope="session")
def silica():
    return fused_silica()


@pytest.fixture(scope="session")
def gold_drude():
    return gold()


@pytest.fixture(scope="session")
def eps2():
    return const_eps(2.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
