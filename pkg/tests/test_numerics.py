import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdlab.numerics import (INF, QuadNode, QuadratureData, critical_points, is_inf, partial_fractions, poly,
                            poly_roots, rat_derivative, rat_eval, rational)

cx = st.complex_numbers(max_magnitude=2.0, allow_nan=False, allow_infinity=False)


def test_roots_with_multiplicity():
    roots = dict((round(r.real, 6), m) for r, m in poly_roots(poly([0, 1, -2, 1])))
    assert roots == {0.0: 1, 1.0: 2}


def test_rat_eval_simple():
    f = rational([0.5, 1.5], [0, 0, 1])
    assert rat_eval(f, 1) == pytest.approx(2)


def test_rat_eval_pole_and_infinity():
    f = rational([1.0], [0, 1])
    assert is_inf(rat_eval(f, 0))
    assert rat_eval(f, INF) == 0


def test_partial_fractions_cardioid_terms():
    qd = QuadratureData((QuadNode(0j, 0, 1.5 * math.pi), QuadNode(0j, 1, 0.5 * math.pi)))
    back = partial_fractions(qd.to_rational())
    got = {nd.m: nd.c for nd in back.nodes}
    assert got[0] == pytest.approx(1.5 * math.pi)
    assert got[1] == pytest.approx(0.5 * math.pi)
    assert back.order == 2 and back.n_nodes == 1


def test_partial_fractions_two_poles():
    qd = partial_fractions(rational([0, 2], [-1, 0, 1]))
    assert sorted(round(nd.a.real) for nd in qd.nodes) == [-1, 1]
    assert all(nd.c == pytest.approx(math.pi) for nd in qd.nodes)


def test_joukowsky_critical_points():
    cps = sorted((c.real, m) for c, m in critical_points(rational([1, 0, 1], [0, 1])))
    assert cps == [(pytest.approx(-1), 1), (pytest.approx(1), 1)]


def test_quadrature_data_json_roundtrip():
    qd = QuadratureData((QuadNode(0.3 + 0.1j, 1, 2 - 1j), QuadNode(INF, 2, 0.5)))
    assert QuadratureData.from_json(qd.to_json()) == qd
    assert qd.has_node_at_infinity and qd.order == 4


@given(st.lists(cx, min_size=1, max_size=5))
def test_roots_rebuild_polynomial(zs):
    p = poly([1.0])
    for z in zs:
        p = p * poly([-z, 1.0])
    got = sum(m for _, m in poly_roots(p))
    assert got == len(zs)
    for r, _ in poly_roots(p):
        assert abs(p(r)) <= 1e-6 * max(1.0, float(np.max(np.abs(p.coef))))


@given(st.integers(2, 5), st.integers(0, 10_000))
def test_critical_multiplicity_is_2d_minus_2(d, seed):
    rng = np.random.default_rng(seed)
    f = rational(rng.normal(size=d + 1) + 1j * rng.normal(size=d + 1),
                 rng.normal(size=d + 1) + 1j * rng.normal(size=d + 1))
    if f.degree != d:
        return
    assert sum(m for _, m in critical_points(f)) == 2 * d - 2


@given(st.lists(st.tuples(cx, st.complex_numbers(min_magnitude=0.1, max_magnitude=3)), min_size=1, max_size=3))
def test_partial_fractions_recovers_simple_poles(terms):
    pts = [a for a, _ in terms]
    if min((abs(a - b) for i, a in enumerate(pts) for b in pts[i + 1:]), default=1.0) < 0.1:
        return
    qd = QuadratureData(tuple(QuadNode(a, 0, c) for a, c in terms))
    back = partial_fractions(qd.to_rational())
    for a, c in terms:
        match = [nd for nd in back.nodes if not is_inf(nd.a) and abs(nd.a - a) < 1e-6]
        assert match and match[0].c == pytest.approx(c, rel=1e-6, abs=1e-8)


def test_derivative_matches_finite_difference():
    f = rational([1, 2, 0, 1], [0.5, 0, 1])
    z, e = 0.3 + 0.7j, 1e-6
    fd = (f(z + e) - f(z - e)) / (2 * e)
    assert complex(rat_derivative(f)(z)) == pytest.approx(complex(fd), rel=1e-6)
