import math

import numpy as np
import pytest

from qdlab import scenarios as sc
from qdlab.heleshaw import (area_law_ok, build_potential, chain, discrete_laplacian, droplet_from_coincidence,
                            obstacle_solve, perturb_to_nonsingular)
from qdlab.raster import RasterDroplet
from qdlab.topology import hausdorff, set_labels
from qdlab.transforms import verify_equilibrium

H = 1 / 64


@pytest.fixture(scope="module")
def disc_potential():
    S = sc.disc(H)
    return S, build_potential(S.h_rat, S.K0)


def test_potential_laplacian_is_four(disc_potential):
    _, P = disc_potential
    inner = np.zeros_like(P.K0.mask)
    inner[2:-2, 2:-2] = P.K0.mask[2:-2, 2:-2]
    lap = discrete_laplacian(np.where(P.K0.mask, P.Q, 0.0), P.h)
    core = inner & np.roll(inner, 1, 0) & np.roll(inner, -1, 0) & np.roll(inner, 1, 1) & np.roll(inner, -1, 1)
    assert np.allclose(lap[core], 4.0, atol=1e-6)


@pytest.mark.parametrize("t", [0.1, 0.25, 0.5])
def test_disc_oracle(disc_potential, t):
    _, P = disc_potential
    K = obstacle_solve(P, t).droplet
    ref = RasterDroplet(K.origin, K.h, np.abs(K.centers()) < math.sqrt(t))
    assert hausdorff(K, ref) <= 2 * H
    assert area_law_ok(K, t)[0]


def test_chain_monotone_and_equilibrium(disc_potential):
    _, P = disc_potential
    C = chain(P, [0.1, 0.3, 0.6])
    assert not any(C.monotonicity_violations())
    assert all(C.strong_monotonicity())
    for K in C.droplets:
        assert verify_equilibrium(K, np.where(K.mask, P.Q, 0.0))[1] <= 10 * H
    assert C.manifest()["source"] == "infinity"


def test_chain_rejects_unsorted_times(disc_potential):
    _, P = disc_potential
    with pytest.raises(ValueError):
        chain(P, [0.3, 0.1])


def test_time_outside_range(disc_potential):
    _, P = disc_potential
    with pytest.raises(ValueError):
        obstacle_solve(P, 2.0)


def test_two_disc_neck_removal():
    S = sc.two_disc(1 / 64)
    P = build_potential(S.h_rat, S.K0)
    r = perturb_to_nonsingular(P)
    assert set_labels(r.droplet)[1] == 1
    assert r.t < P.t_max


def test_isolated_cells_dropped():
    m = np.zeros((20, 20), bool)
    m[5:15, 5:15] = True
    m[2, 2] = True
    m[17, 3:9] = True
    K = droplet_from_coincidence(RasterDroplet(0j, 1.0, m))
    assert set_labels(K)[1] == 1 and not K.mask[2, 2] and not K.mask[17].any()


def test_chain_save(tmp_path, disc_potential):
    _, P = disc_potential
    C = chain(P, [0.2])
    C.save(tmp_path)
    assert (tmp_path / "manifest.json").exists()
    back = RasterDroplet.load(tmp_path / "droplet_000")
    assert np.array_equal(back.mask, C.droplets[0].mask)
