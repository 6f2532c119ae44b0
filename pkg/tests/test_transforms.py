import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdlab.raster import RasterDroplet, disc_raster, rasterize
from qdlab.transforms import (cauchy_disc, cauchy_raster, fit_quadrature_function, log_potential_disc,
                              log_potential_grid, log_potential_raster, verify_equilibrium)


def test_cauchy_of_unit_disc_outside():
    K = disc_raster(0, 1, 1 / 128)
    assert complex(cauchy_raster(K, 2.0)) == pytest.approx(0.5, abs=5e-3)


def test_log_potential_of_unit_disc():
    K = disc_raster(0, 1, 1 / 128)
    assert float(log_potential_raster(K, 2.0)) == pytest.approx(-2 * math.log(2), abs=1e-2)
    assert float(log_potential_raster(K, 0j)) == pytest.approx(1.0, abs=1e-2)


@given(st.complex_numbers(max_magnitude=1), st.floats(0.3, 1.0), st.floats(0, 2 * math.pi))
def test_raster_transforms_match_disc_formulas(a, rho, th):
    K = disc_raster(a, rho, 1 / 64)
    z = a + 1.7 * rho * np.exp(1j * th)
    assert abs(complex(cauchy_raster(K, z)) - complex(cauchy_disc(a, rho, z))) < 1e-2
    assert abs(float(log_potential_raster(K, z)) - float(log_potential_disc(a, rho, z))) < 2e-2


def test_equilibrium_holds_for_disc():
    K = disc_raster(0, 1, 1 / 64)
    Q = np.abs(K.centers()) ** 2
    _, dev = verify_equilibrium(K, Q)
    assert dev <= 10 * K.h


def test_equilibrium_fails_for_square():
    K = rasterize(lambda z: (np.abs(z.real) < 0.9) & (np.abs(z.imag) < 0.9), -1 - 1j, 1 + 1j, 1 / 64)
    _, dev = verify_equilibrium(K, np.abs(K.centers()) ** 2)
    assert dev > 10 * K.h


def test_log_potential_grid_matches_pointwise():
    K = disc_raster(0, 0.5, 1 / 32)
    G = log_potential_grid(K)
    j, i = np.argwhere(K.mask)[len(np.argwhere(K.mask)) // 3]
    assert G[j, i] == pytest.approx(float(log_potential_raster(K, K.centers()[j, i])), abs=1e-6)


def test_fit_recovers_two_poles():
    rng = np.random.default_rng(1)
    z = rng.uniform(-1, 1, 400) + 1j * rng.uniform(-1, 1, 400)
    z = z[(np.abs(z - 0.4) > 0.3) & (np.abs(z + 0.4) > 0.3)]
    v = 0.04 / (z - 0.4) + 0.04 / (z + 0.4) + 0.2
    qd = fit_quadrature_function((z, v), 4)
    poles = sorted(nd.a.real for nd in qd.finite_nodes())
    assert poles == [pytest.approx(-0.4, abs=1e-8), pytest.approx(0.4, abs=1e-8)]
    for nd in qd.finite_nodes():
        assert nd.c == pytest.approx(0.04 * math.pi, rel=1e-6)


def test_empty_raster_equilibrium():
    K = RasterDroplet(0j, 0.1, np.zeros((4, 4), bool))
    assert verify_equilibrium(K, np.zeros((4, 4))) == (0.0, 0.0)
