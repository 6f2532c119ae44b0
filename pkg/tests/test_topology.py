import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdlab.errors import KindDomainMismatch
from qdlab.raster import RasterDroplet, disc_raster, rasterize
from qdlab.scenarios import concentric_circles
from qdlab.topology import (check_ovals_bound, check_theorem_A, extract_ovals, hausdorff, label_components,
                            minimal_degree, packing_check, topology_report)


def annulus(h=1 / 64):
    return rasterize(lambda z: (np.abs(z) < 1) & (np.abs(z) > 0.5), -1 - 1j, 1 + 1j, h)


def test_two_discs_two_components():
    K = rasterize(lambda z: (np.abs(z - 0.5) < 0.3) | (np.abs(z + 0.5) < 0.3), -1 - 1j, 1 + 1j, 1 / 64)
    assert label_components(K, "set")[1] == 2


def test_annulus_counts():
    K = annulus()
    assert label_components(K, "set")[1] == 1
    assert label_components(K, "complement")[1] == 2
    assert len(extract_ovals(K)) == 2


def test_checkerboard_uses_four_connectivity():
    m = np.zeros((4, 4), bool)
    m[1, 1] = m[2, 2] = True
    assert label_components(RasterDroplet(0j, 1.0, m), "set")[1] == 2


def test_disc_single_oval():
    assert len(extract_ovals(disc_raster(0, 1, 1 / 64))) == 1


def test_four_concentric_circles():
    rep = topology_report(concentric_circles(4))
    assert (rep.n_ovals, rep.q, rep.q_hist.get(1), rep.q_hist.get(2), rep.q_odd) == (4, 3, 2, 1, 2)
    v = check_ovals_bound(rep, minimal_degree(rep))
    assert v.lhs == 10 and v.slack == 0


def test_five_concentric_circles():
    rep = topology_report(concentric_circles(5))
    assert check_ovals_bound(rep, minimal_degree(rep)).lhs == 14


@pytest.mark.parametrize("d,n,kind,conn,bound", [
    (2, 1, "UQD", 2, 2),
    (2, 1, "UQD-node-at-inf", 1, 1),
    (3, 1, "BQD", 2, 2),
    (3, 2, "BQD-no-triple-nodes", 2, 2),
])
def test_theorem_A_equality_cases(d, n, kind, conn, bound):
    v = check_theorem_A(d, n, kind, conn)
    assert v.passed and v.bound == bound and v.slack == 0


def test_theorem_A_violation_and_threshold():
    assert not check_theorem_A(2, 1, "UQD", 3).passed
    assert check_theorem_A(1, 1, "UQD", 1).binding.startswith("simply connected")
    with pytest.raises(KindDomainMismatch):
        check_theorem_A(2, 1, "weird", 1)


def test_packing_bounds():
    assert packing_check("discs-in-disc", 9, 16).slack == 0
    assert packing_check("cardioids-in-ellipse", 7, 21).slack == 0
    assert not packing_check("discs-in-disc", 3, 5).passed


def test_hausdorff_shifted_grids():
    A = disc_raster(0, 0.5, 1 / 32)
    m = np.pad(A.mask, ((3, 0), (5, 0)))
    B = RasterDroplet(A.origin - (5 + 3j) / 32, A.h, m)
    assert hausdorff(A, B) == 0.0


@given(st.integers(0, 10_000))
def test_report_invariants_on_random_masks(seed):
    rng = np.random.default_rng(seed)
    m = rng.random((24, 24)) < 0.45
    m[[0, -1], :] = False
    m[:, [0, -1]] = False
    rep = topology_report(RasterDroplet(0j, 1.0, m), allow_pinch=True)
    assert rep.q == sum(rep.q_hist.values())
    assert rep.q_odd <= rep.q
