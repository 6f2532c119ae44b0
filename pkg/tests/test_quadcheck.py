import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdlab.domains import Cardioid, Disc, ExteriorDisc, NeumannOval, quadrature_data
from qdlab.errors import InadmissibleTest
from qdlab.quadcheck import (cauchy_kernel, check_admissible, check_identity, default_battery, inverse_monomial,
                             lhs_area_integral, monomial)


@given(st.complex_numbers(max_magnitude=3), st.floats(0.2, 2.0))
def test_disc_mean_value_identity(a, rho):
    spec = Disc(a, rho)
    ws = [a + 2 * rho, a - 3j * rho]
    rep = check_identity(spec, quadrature_data(spec), [monomial(0), monomial(2)] + [cauchy_kernel(w) for w in ws])
    assert rep.max_error <= 1e-8 * max(1.0, abs(a) ** 2)


def test_cardioid_monomials():
    spec = Cardioid()
    for j, want in enumerate([1.5 * math.pi, 0.5 * math.pi, 0, 0]):
        assert abs(lhs_area_integral(spec, monomial(j)) - want) < 1e-9


@pytest.mark.parametrize("spec", [Cardioid(), NeumannOval(0.15, 1.0), ExteriorDisc(0.5j, 0.7)])
def test_default_battery(spec):
    rep = check_identity(spec, quadrature_data(spec), default_battery(spec))
    assert rep.max_error < 1e-7
    assert len(rep.battery) >= 4


def test_unbounded_rejects_constant():
    with pytest.raises(InadmissibleTest):
        check_admissible(ExteriorDisc(0, 1), monomial(0))


def test_bounded_rejects_pole_inside():
    with pytest.raises(InadmissibleTest):
        check_admissible(Disc(0, 1), inverse_monomial(1))


def test_report_json():
    spec = Disc()
    rep = check_identity(spec, quadrature_data(spec), [monomial(1)])
    assert '"max_error"' in rep.to_json()
    assert np.isfinite(rep.max_error)
