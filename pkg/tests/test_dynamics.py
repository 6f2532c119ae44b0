import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdlab.domains import Cardioid, Disc, ExteriorDisc
from qdlab.dynamics import (antiholo_step, classify, critical_orbit_audit, find_fixed_points, model_map,
                            non_repelling_finite, orbits_csv, random_rational, reflection_residual,
                            schwarz_dynamics)
from qdlab.numerics import is_inf, rational


def test_antiholo_step_examples():
    sq = rational([0, 0, 1])
    assert antiholo_step(sq, 2j) == -4
    assert antiholo_step(sq, 0) == 0
    assert antiholo_step(rational([1 + 2j]), 5) == 1 - 2j


def test_fixed_points_of_square():
    fps = find_fixed_points(rational([0, 0, 1]))
    finite = sorted((f for f in fps if not is_inf(f.location)), key=lambda f: abs(f.location))
    assert len(finite) == 4
    assert finite[0].kind == "attracting"
    assert all(f.kind == "repelling" and f.multiplier_modulus == pytest.approx(2) for f in finite[1:])
    for f in finite:
        assert abs(f.location ** 2 - np.conj(f.location)) < 1e-10


def test_constant_map_fixed_point():
    (fp,) = find_fixed_points(rational([1 + 1j]))
    assert fp.location == 1 - 1j and fp.kind == "attracting"


def test_square_critical_orbits():
    audit = critical_orbit_audit(rational([0, 0, 1]))
    assert audit.ok and len(audit.attracting) == 2


def test_classify_neutral_band():
    assert classify(1.0) == "neutral"
    assert classify(0.5) == "attracting"
    assert classify(1.5) == "repelling"


@given(st.integers(0, 10_000))
def test_quadratic_has_at_most_one_non_repelling(seed):
    rng = np.random.default_rng(seed)
    assert len(non_repelling_finite(rational(rng.normal(size=3) + 1j * rng.normal(size=3)))) <= 1


@given(st.integers(2, 4), st.integers(0, 10_000))
def test_fatou_count(d, seed):
    R = random_rational(np.random.default_rng(seed), d)
    fps = find_fixed_points(R)
    assert sum(f.kind == "attracting" for f in fps) <= 2 * d - 2
    assert critical_orbit_audit(R, 10_000, fixed=fps).ok


@pytest.mark.parametrize("spec", [Disc(), ExteriorDisc(0.3, 0.8), Cardioid()])
def test_reflection_fixes_boundary(spec):
    assert reflection_residual(spec) < 1e-9


def test_disc_reflection_orbits():
    recs = schwarz_dynamics(Disc(), [0.5, 1.0])
    assert recs[0].verdict == "exited" and recs[0].trajectory[1] == pytest.approx(2)
    assert recs[1].verdict == "fixed"
    assert orbits_csv(recs).startswith("seed,step,x,y,region")


def test_cardioid_orbit_exits():
    (rec,) = schwarz_dynamics(Cardioid(), [0.05 + 0.01j])
    assert rec.verdict == "exited" and rec.exit_step >= 1


@pytest.mark.parametrize("nu", [[1], [1, 1]])
def test_model_map(nu):
    M = model_map(nu)
    assert M.ok and M.connectivity == len(nu) and sorted(M.degrees) == nu


def test_model_map_rejects_bad_nu():
    with pytest.raises(ValueError):
        model_map([0])
