import numpy as np
import pytest

from convmctdh.eom import ConversionSystem
from convmctdh.grid import OneBodyOperatorSpec, SpatialGrid, potential_from_text
from convmctdh.operators import InteractionSpec

CONVERSION_COUPLINGS = dict(lambda_a=0.1, lambda_m=0.05, lambda_am=0.02, lambda_con=0.2)


def harmonic_specs(grid, omega=1.0, mass_a=1.0, mass_m=2.0, offset_m=0.0):
    h_a = OneBodyOperatorSpec(grid, mass_a, potential_from_text(grid, f"harmonic({omega})", mass_a))
    h_m = OneBodyOperatorSpec(grid, mass_m, potential_from_text(grid, f"harmonic({omega})", mass_m), offset_m)
    return h_a, h_m


def make_system(N, M, M_mol, interaction=None, grid=None, **kw):
    grid = grid or SpatialGrid(64, 16.0)
    h_a, h_m = harmonic_specs(grid, **kw)
    interaction = interaction or InteractionSpec("contact", **CONVERSION_COUPLINGS)
    return ConversionSystem.build(N, M, M_mol, h_a, h_m, interaction)


@pytest.fixture
def grid():
    return SpatialGrid(64, 16.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
