import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdlab.domains import (Cardioid, Disc, EllipseExterior, ExteriorDisc, NeumannOval, area, boundary,
                           compact_raster, contains, from_json, poly3, quadrature_data, schwarz_eval, to_json,
                           univalence_check, winding_number)
from qdlab.numerics import rational


def test_cardioid_area():
    assert area(Cardioid()) == pytest.approx(1.5 * math.pi, rel=1e-12)


def test_poly3_area_and_univalence():
    assert area(poly3()) == pytest.approx(math.pi * (1 + 16 / 9 + 3 / 9), rel=1e-10)
    assert univalence_check(poly3().phi).univalent


def test_non_univalent_map_rejected():
    assert not univalence_check(rational([0, 1, 1])).univalent


def test_cardioid_nodes():
    qd = quadrature_data(Cardioid())
    assert qd.order == 2 and qd.n_nodes == 1


def test_neumann_oval_has_two_nodes():
    qd = quadrature_data(NeumannOval(0.15, 1.0))
    assert qd.n_nodes == 2


def test_ellipse_exterior_node_at_infinity():
    qd = quadrature_data(EllipseExterior(1.5, 1.0))
    assert qd.has_node_at_infinity


def test_schwarz_function_is_conjugate_on_boundary():
    for spec in (Disc(0.2, 1.3), Cardioid(), ExteriorDisc(1j, 0.5)):
        pts = boundary(spec, 64).points[0][:-1]
        assert np.max(np.abs(schwarz_eval(spec, pts) - np.conj(pts))) < 1e-9


def test_json_roundtrip():
    for spec in (Disc(1j, 2.0), Cardioid(0.5), EllipseExterior(2.0, 1.0, 1 + 1j)):
        assert to_json(from_json(to_json(spec))) == to_json(spec)


def test_compact_raster_area_close():
    K = compact_raster(Cardioid(), 1 / 128)
    assert K.area == pytest.approx(1.5 * math.pi, rel=1e-2)


def test_winding_number_of_circle():
    c = np.exp(2j * np.pi * np.arange(256) / 256)
    w = winding_number(c, np.array([0j, 2 + 0j]))
    assert np.allclose(w, [1, 0], atol=1e-9)


@given(st.complex_numbers(max_magnitude=3), st.floats(0.1, 2.0))
def test_disc_contains_matches_distance(a, rho):
    z = np.array([a, a + 1.5 * rho, a + 0.5 * rho * 1j])
    assert list(contains(Disc(a, rho), z)) == [True, False, True]


@given(st.complex_numbers(max_magnitude=3), st.floats(0.1, 2.0))
def test_disc_area(a, rho):
    assert area(Disc(a, rho)) == pytest.approx(math.pi * rho * rho, rel=1e-12)
