"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Each criterion records one PASS/FAIL line; conftest prints them in the
terminal summary. Run on its own with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``. The heavy Hele-Shaw solves are cached so
criteria sharing a scenario solve it once.
"""

from __future__ import annotations

import math
import sys
import time
from functools import lru_cache

import numpy as np
import pytest

from qdlab import scenarios as sc
from qdlab.domains import (Cardioid, Disc, ExteriorDisc, compact_raster, poly3, quadrature_data,
                           singular_points)
from qdlab.dynamics import (critical_orbit_audit, find_fixed_points, model_map, non_repelling_finite,
                            random_rational)
from qdlab.heleshaw import area_law_ok, build_potential, chain, obstacle_solve, perturb_to_nonsingular
from qdlab.numerics import critical_points, is_inf, rational
from qdlab.quadcheck import cauchy_kernel, check_identity, lhs_area_integral, monomial
from qdlab.raster import RasterDroplet
from qdlab.topology import check_ovals_bound, hausdorff, minimal_degree, packing_check, set_labels, topology_report
from qdlab.transforms import droplet_samples, fit_quadrature_function, verify_equilibrium, verify_schwarz_identity

pytestmark = pytest.mark.slow

LINES: dict[int, str] = {}


def report(n: int, passed: bool, detail: str) -> None:
    line = f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    LINES[n] = line


# -- shared solves -----------------------------------------------------------

@lru_cache(maxsize=None)
def potential(name: str):
    S = sc.build(name)
    return S, build_potential(S.h_rat, S.K0, box_factor=S.meta.get("box_factor", 2.0))


@lru_cache(maxsize=None)
def chain_of(name: str):
    S, P = potential(name)
    return chain(P, S.times)


@lru_cache(maxsize=None)
def perturbed(name: str):
    _, P = potential(name)
    return perturb_to_nonsingular(P)


# -- criteria ----------------------------------------------------------------

def test_criterion_01_disc_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for a, rho in ((0j, 1.0), (2 + 1j, 0.7)):
        spec = Disc(a, rho)
        ws = [a + rho * s * np.exp(1j * th) for s, th in ((1.5, 0.3), (2.0, 2.4), (3.0, 4.1))]
        battery = [monomial(0), monomial(1), monomial(2)] + [cauchy_kernel(w) for w in ws]
        worst = max(worst, check_identity(spec, quadrature_data(spec), battery).max_error)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 1.0
    report(1, ok, f"max error {worst:.2e} (tol 1e-8), {dt:.2f} s (< 1 s)")
    assert ok


def test_criterion_02_cardioid_identity():
    spec = Cardioid(1.0)
    mom = [lhs_area_integral(spec, monomial(j)) for j in range(6)]
    want = [1.5 * math.pi, 0.5 * math.pi, 0, 0, 0, 0]
    merr = max(abs(m - w) for m, w in zip(mom, want))
    qd = quadrature_data(spec)
    c = {nd.m: nd.c for nd in qd.nodes if not is_inf(nd.a) and abs(nd.a) < 1e-9}
    cerr = max(abs(c.get(0, 0) - 1.5 * math.pi), abs(c.get(1, 0) - 0.5 * math.pi))
    extra = [nd for nd in qd.nodes if is_inf(nd.a) or abs(nd.a) >= 1e-9]
    ok = merr <= 1e-7 and cerr <= 1e-7 and len(mom) == 6 and not extra
    report(2, ok, f"moment error {merr:.2e}, node weight error {cerr:.2e} (tol 1e-7)")
    assert ok


def test_criterion_03_schwarz_identity():
    h = 1 / 256
    worst, worst_cusp, slowest = 0.0, 0.0, 0.0
    for spec in (Disc(0j, 1.0), ExteriorDisc(0.3j, 0.8), Cardioid(1.0), poly3()):
        t0 = time.perf_counter()
        res = verify_schwarz_identity(spec, compact_raster(spec, h), quadrature_data(spec))
        slowest = max(slowest, time.perf_counter() - t0)
        cusps = [p for p, kind in singular_points(spec) if kind == "cusp"]
        worst = max(worst, res.max_away_from(cusps, 5 * h))
        worst_cusp = max(worst_cusp, res.max_residual)
    ok = worst <= 5e-3 and worst_cusp <= 2e-2 and slowest < 30
    report(3, ok, f"residual {worst:.2e} (tol 5e-3), near cusps {worst_cusp:.2e} (tol 2e-2), "
                  f"slowest {slowest:.1f} s")
    assert ok


def test_criterion_04_obstacle_oracle():
    S, P = potential("disc")
    h = S.K0.h
    worst, area_ok, slowest = 0.0, True, 0.0
    for t in (0.1, 0.25, 0.5):
        t0 = time.perf_counter()
        K = obstacle_solve(P, t).droplet
        slowest = max(slowest, time.perf_counter() - t0)
        ref = RasterDroplet(K.origin, K.h, np.abs(K.centers()) < math.sqrt(t))
        worst = max(worst, hausdorff(K, ref))
        area_ok &= area_law_ok(K, t)[0]
    ok = worst <= 2 * h and area_ok and slowest < 60
    report(4, ok, f"Hausdorff {worst / h:.2f}h (tol 2h), area law {area_ok}, grid {P.Q.shape[1]}x{P.Q.shape[0]}, "
                  f"slowest solve {slowest:.1f} s")
    assert ok


def test_criterion_05_chain_invariance():
    S, P = potential("two-disc")
    C = chain_of("two-disc")
    t_half, t_full = C.times
    assert math.isclose(t_half, t_full / 2)
    h = S.K0.h
    fitted, devs = [], []
    for K in C.droplets:
        qd = fit_quadrature_function(droplet_samples(K), 4)
        fitted.append(sorted((nd.a for nd in qd.nodes if not is_inf(nd.a)), key=lambda z: z.real))
        devs.append(verify_equilibrium(K, np.where(K.mask, P.Q, 0.0))[1])
    same_count = len(fitted[0]) == len(fitted[1]) == 2
    gap = max(abs(a - b) for a, b in zip(*fitted)) if same_count else math.inf
    ok = same_count and gap <= 5 * h and max(devs) <= 10 * h
    report(5, ok, f"pole drift {gap / h:.3f}h (tol 5h), equilibrium {max(devs):.2e} (tol {10 * h:.2e})")
    assert ok


def test_criterion_06_cubic_chain():
    S, _ = potential("cubic")
    C = chain_of("cubic")
    single = all(c == 1 for c in C.component_counts)
    peaks, _ = sc.curvature_peaks(C.droplets[-1])
    # uniqueness: the same mass from a strictly smaller localisation
    T = sc.cubic(S.K0.h, truncate=0.35)
    PT = build_potential(T.h_rat, T.K0, box_factor=T.meta.get("box_factor", 2.0))
    _, P = potential("cubic")
    t = 0.04
    A = obstacle_solve(P, t).droplet
    B = obstacle_solve(PT, t).droplet
    dist = hausdorff(A, B)
    ok = single and peaks == 3 and dist <= 2 * S.K0.h
    report(6, ok, f"components {C.component_counts}, terminal peaks {peaks} (want 3), "
                  f"uniqueness Hausdorff {dist / S.K0.h:.2f}h (tol 2h)")
    assert ok


def test_criterion_07_packing_bounds():
    K = perturbed("packing").droplet
    c = set_labels(K)[1]
    v = packing_check("discs-in-disc", 9, c)
    Kc = perturbed("cardioid-in-ellipse").droplet
    cc = set_labels(Kc)[1]
    vc = packing_check("cardioids-in-ellipse", 1, cc)
    ok = c == 16 and v.passed and v.slack == 0 and cc == 3 and vc.passed
    report(7, ok, f"discs-in-disc c={c} vs 2m-2={v.bound}; cardioid-in-ellipse c={cc} vs 3m={vc.bound}")
    assert ok


def test_criterion_08_topology_suite():
    lhs = {}
    for k in (4, 5):
        rep = topology_report(sc.concentric_circles(k))
        lhs[k] = check_ovals_bound(rep, minimal_degree(rep)).lhs
    failures, checked = [], 0
    for name in ("disc", "two-disc", "annulus", "cubic"):
        S, _ = potential(name)
        for t, K in zip(chain_of(name).times, chain_of(name).droplets):
            checked += 1
            if not sc.droplet_bounds(K, S.h_rat)["passed"]:
                failures.append(f"{name}@{t:.4g}")
    for name in ("packing", "cardioid-in-ellipse", "cardioid-in-disc", "half-discs", "disc-in-ellipse"):
        S, _ = potential(name)
        checked += 1
        if not sc.droplet_bounds(perturbed(name).droplet, S.h_rat)["passed"]:
            failures.append(name)
    ok = lhs == {4: 10, 5: 14} and not failures
    report(8, ok, f"LHS k=4: {lhs[4]} (want 10), k=5: {lhs[5]} (want 14); "
                  f"{len(failures)} bound failures over {checked} droplets {failures or ''}")
    assert ok


def test_criterion_09_dynamics_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240917)
    bad_mult = bad_count = bad_audit = 0
    for _ in range(200):
        d = int(rng.integers(2, 6))
        R = random_rational(rng, d)
        bad_mult += sum(m for _, m in critical_points(R)) != 2 * d - 2
        fixed = find_fixed_points(R)
        bad_count += sum(f.kind == "attracting" for f in fixed) > 2 * d - 2
        bad_audit += not critical_orbit_audit(R, 10_000, fixed=fixed).ok
    bad_quad = 0
    for _ in range(50):
        hq = rational(rng.normal(size=3) + 1j * rng.normal(size=3))
        bad_quad += len(non_repelling_finite(hq)) > 1
    dt = time.perf_counter() - t0
    ok = not (bad_mult or bad_count or bad_audit or bad_quad) and dt < 120
    report(9, ok, f"violations: multiplicity {bad_mult}, Fatou count {bad_count}, audit {bad_audit}, "
                  f"quadratic {bad_quad}; {dt:.1f} s (< 120 s)")
    assert ok


def test_criterion_10_model_dynamics():
    parts, ok = [], True
    for nu in ([1], [1, 1], [2, 3], [1, 1, 1]):
        M = model_map(nu)
        good = (M.connectivity == len(nu) and sorted(M.degrees) == sorted(nu)
                and M.v_inside_u and M.orbits_converge)
        ok &= good
        parts.append(f"{nu}: conn {M.connectivity} deg {sorted(M.degrees)} eps {M.eps:.3g}")
    report(10, ok, "; ".join(parts))
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
