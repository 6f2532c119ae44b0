import math

import numpy as np
import pytest

from qdlab import scenarios as sc
from qdlab.errors import ScenarioError
from qdlab.raster import disc_raster, polygon_mask, grid_for_box, RasterDroplet


def test_disc_packing_is_tangent():
    discs = sc.disc_packing()
    assert len(discs) == 9
    for i, (a, r) in enumerate(discs):
        assert abs(a) + r <= 1 + 1e-9
        for b, s in discs[i + 1:]:
            assert abs(a - b) >= r + s - 1e-9


def test_cardioid_ellipse_geometry():
    a, b, c = sc.cardioid_ellipse_geometry()
    assert a == 1.2 and a / b ** 2 < 0.75


def test_deltoid_has_three_peaks():
    origin, nx, ny = grid_for_box(-0.6 - 0.6j, 0.6 + 0.6j, 1 / 256)
    K = RasterDroplet(origin, 1 / 256, polygon_mask(sc.deltoid_curve(), origin, 1 / 256, nx, ny))
    assert sc.curvature_peaks(K)[0] == 3


def test_disc_has_no_peaks():
    assert sc.curvature_peaks(disc_raster(0, 0.5, 1 / 256))[0] == 0


def test_concentric_fixture_parity():
    K = sc.concentric_circles(2, 1 / 64)
    c = K.centers()
    r = np.abs(c)
    assert not K.mask[(r < 0.9)].any() or K.mask[(r < 0.9)].all()
    assert K.mask[(r > 1.1) & (r < 1.9)].all()


def test_unknown_builder():
    with pytest.raises(ScenarioError):
        sc.build("no-such-scenario")


def test_registry_builds_coarse():
    for name in ("disc", "two-disc", "annulus"):
        S = sc.build(name, 1 / 32)
        assert S.K0.mask.any() and S.times


def test_droplet_bounds_on_initial_set():
    S = sc.two_disc(1 / 64)
    b = sc.droplet_bounds(S.K0, S.h_rat)
    assert b["passed"] and len(b["components"]) == 3
