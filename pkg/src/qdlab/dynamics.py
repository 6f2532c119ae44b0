"""Anti-holomorphic dynamics z -> conj(R(z)).

Fixed points solve R(z) = conj(z). They are located along two routes: the
roots of the numerator of R*(R(z)) - z (R* has conjugated coefficients;
every fixed point of the anti-holomorphic map is a fixed point of its
holomorphic second iterate) and a multistart Newton search on the real
2x2 system. The union is merged and classified by |R'(z0)|.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from numba import njit
from numpy.typing import NDArray

from .errors import EpsilonTooLarge, InversionFailure, SeedGridExhausted
from .numerics import (INF, Point, RationalFunction, critical_points, degree, is_inf, poly_roots,
                       rat_derivative, rat_eval, rational)
from .raster import RasterDroplet, grid_for_box
from .topology import complement_labels, extract_ovals, set_labels

NEUTRAL_BAND = 1e-8


@dataclass(frozen=True)
class FixedPointRecord:
    location: Point
    multiplier_modulus: float
    kind: str  # "attracting", "repelling" or "neutral"


@dataclass
class OrbitRecord:
    seed: Point
    trajectory: list
    verdict: str
    target: int | None = None
    exit_step: int | None = None


def classify(mult: float, band: float = NEUTRAL_BAND) -> str:
    if mult < 1 - band:
        return "attracting"
    if mult > 1 + band:
        return "repelling"
    return "neutral"


def antiholo_step(R: RationalFunction, z: Point) -> Point:
    w = rat_eval(R, z)
    return w if is_inf(w) else complex(np.conj(w))


def _newton_fixed(R: RationalFunction, dR: RationalFunction, z: NDArray[np.complex128], iters: int = 60):
    """Vectorised Newton on F(z) = R(z) - conj(z), solving R' d - conj(d) = -F."""
    for _ in range(iters):
        with np.errstate(all="ignore"):
            F = R(z) - np.conj(z)
            a = dR(z)
        # real form: [[Re a - 1, -Im a], [Im a, Re a + 1]] [dx, dy] = -[Re F, Im F]
        m11, m12 = a.real - 1, -a.imag
        m21, m22 = a.imag, a.real + 1
        det = m11 * m22 - m12 * m21
        with np.errstate(all="ignore"):
            dx = (-F.real * m22 + F.imag * m12) / det
            dy = (-F.imag * m11 + F.real * m21) / det
            step = dx + 1j * dy
        step = np.where(np.isfinite(step), step, 0)
        z = z + step
        if np.all(np.abs(step) <= 1e-15 * np.maximum(1, np.abs(z))):
            break
    return z


def _merge(points: list[complex], tol: float = 1e-8) -> list[complex]:
    out: list[complex] = []
    for p in points:
        if not any(abs(p - q) <= tol * max(1.0, abs(q)) for q in out):
            out.append(p)
    return out


@dataclass
class FixedPointSearch:
    records: list[FixedPointRecord]
    algebraic: int
    multistart: int


def fixed_point_search(R: RationalFunction, grid: int = 64, strict: bool = True) -> FixedPointSearch:
    dR = rat_derivative(R)
    if degree(R.num) <= 0 and degree(R.den) <= 0:
        c = complex(R.num.coef[0] / R.den.coef[0])
        return FixedPointSearch([FixedPointRecord(complex(np.conj(c)), 0.0, "attracting")], 1, 1)
    # algebraic route
    G = _second_iterate_numerator(R)
    alg: list[complex] = []
    if degree(G) >= 1:
        for z0, _ in poly_roots(G, tol=1e-6):
            alg.append(z0)
    elif degree(G) < 0:
        raise ValueError("the fixed-point set is not discrete")
    polished = _newton_fixed(R, dR, np.array(alg, dtype=complex)) if alg else np.zeros(0, complex)
    alg_ok = [complex(z) for z in polished if _is_fixed(R, complex(z))]
    # multistart route over the pole hull inflated threefold
    anchors = [p for p, _ in poly_roots(R.den)] if degree(R.den) >= 1 else []
    anchors += [0j]
    re = [a.real for a in anchors]
    im = [a.imag for a in anchors]
    cx, cy = (max(re) + min(re)) / 2, (max(im) + min(im)) / 2
    half = 1.5 * max(max(re) - min(re), max(im) - min(im), 1.0)
    xs = np.linspace(cx - half, cx + half, grid)
    ys = np.linspace(cy - half, cy + half, grid)
    seeds = (xs[None, :] + 1j * ys[:, None]).ravel()
    # far field: log-polar rings out to 1e4 times the box, where isolated large solutions live
    radii = half * np.logspace(0, 4, 16)
    ring = (radii[:, None] * np.exp(2j * np.pi * (np.arange(64) + 0.5) / 64)[None, :]).ravel()
    seeds = np.concatenate([seeds, complex(cx, cy) + ring])
    # solutions with large multipliers sit close to poles and have tiny Newton basins
    poles = anchors[:-1]
    if poles:
        small = (np.logspace(-5, -0.5, 12)[:, None] * np.exp(2j * np.pi * np.arange(16) / 16)[None, :]).ravel()
        seeds = np.concatenate([seeds] + [p + small for p in poles])
    zs = _newton_fixed(R, dR, seeds)
    with np.errstate(all="ignore"):
        good = np.isfinite(zs) & (np.abs(R(zs) - np.conj(zs)) <= 1e-9 * np.maximum(1.0, np.abs(zs)))
    # collapse the many seeds that land on the same solution before the pairwise merge
    uniq = np.unique(np.round(zs[good], 7))
    ms = _merge([complex(z) for z in _newton_fixed(R, dR, uniq, iters=5)])
    found = _merge(alg_ok + ms)
    if strict and len(ms) < len(_merge(alg_ok)):
        raise SeedGridExhausted(f"multistart found {len(ms)} of {len(_merge(alg_ok))} fixed points")
    recs = []
    for z in found:
        mult = abs(complex(dR(z)))
        recs.append(FixedPointRecord(z, mult, classify(mult)))
    inf_rec = _infinity_record(R)
    if inf_rec is not None:
        recs.append(inf_rec)
    return FixedPointSearch(recs, len(_merge(alg_ok)), len(ms))


def _second_iterate_numerator(R: RationalFunction) -> Polynomial:
    """Numerator of R*(R(z)) - z, built by homogenising R* over N/D."""
    N, D = R.num, R.den
    ns = np.conj(N.coef)
    ds = np.conj(D.coef)
    e = max(ns.size, ds.size) - 1
    A = Polynomial([0j])
    B = Polynomial([0j])
    for k in range(e + 1):
        term = N ** k * D ** (e - k)
        if k < ns.size:
            A = A + ns[k] * term
        if k < ds.size:
            B = B + ds[k] * term
    G = A - Polynomial([0, 1]) * B
    c = G.coef
    keep = np.nonzero(np.abs(c) > 1e-13 * np.max(np.abs(c)))[0]
    return Polynomial(c[:keep[-1] + 1]) if keep.size else Polynomial([0j])


def _is_fixed(R: RationalFunction, z: complex, tol: float = 1e-9) -> bool:
    with np.errstate(all="ignore"):
        v = complex(R(z))
    return np.isfinite(v) and abs(v - np.conj(z)) <= tol * max(1.0, abs(z))


def _infinity_record(R: RationalFunction) -> FixedPointRecord | None:
    dn, dd = degree(R.num), degree(R.den)
    if dn <= dd:
        return None
    if dn - dd >= 2:
        return FixedPointRecord(INF, 0.0, "attracting")
    alpha = R.num.coef[dn] / R.den.coef[dd]
    mult = 1.0 / abs(alpha)
    return FixedPointRecord(INF, mult, classify(mult))


def find_fixed_points(R: RationalFunction) -> list[FixedPointRecord]:
    """All isolated solutions of R(z) = conj(z), plus infinity when it is fixed."""
    return fixed_point_search(R).records


# -- critical orbits -------------------------------------------------------

@dataclass
class AuditReport:
    verdicts: dict
    attracting: list[FixedPointRecord]
    violations: list[FixedPointRecord]
    exhausted: list

    @property
    def ok(self) -> bool:
        return not self.violations


def _trap_radius(R: RationalFunction, rec: FixedPointRecord) -> float:
    z0 = rec.location
    d2 = rat_derivative(rat_derivative(R))
    lam = rec.multiplier_modulus
    curv = abs(complex(d2(z0)))
    rad = 0.25 * (1 - lam) / max(curv, 1e-12)
    if degree(R.den) >= 1:
        rad = min(rad, 0.5 * min(abs(z0 - p) for p, _ in poly_roots(R.den)))
    return min(rad, 0.1 * max(1.0, abs(z0)))


@njit(cache=True)
def _iterate_kernel(z, num, den, rinf, steps, big):
    out = z.copy()
    for k in range(out.size):
        w = out[k]
        for _ in range(steps):
            if not np.isfinite(w.real) or abs(w) >= big:
                w = rinf
                continue
            p = num[num.size - 1]
            for c in num[-2::-1]:
                p = p * w + c
            q = den[den.size - 1]
            for c in den[-2::-1]:
                q = q * w + c
            if q == 0:
                w = complex(np.inf, 0.0)
                continue
            w = (p / q).conjugate()
            if not np.isfinite(w.real) or not np.isfinite(w.imag) or abs(w) >= big:
                w = complex(np.inf, 0.0)
        out[k] = w
    return out


def _iterate_many(R: RationalFunction, z: NDArray[np.complex128], rinf: complex, steps: int = 1,
                  big: float = 1e12) -> NDArray[np.complex128]:
    """``steps`` iterations of z -> conj(R(z)) on an array; |z| >= big counts as infinity."""
    return _iterate_kernel(np.asarray(z, dtype=np.complex128), np.asarray(R.num.coef, dtype=np.complex128),
                           np.asarray(R.den.coef, dtype=np.complex128), complex(rinf), steps, big)


def critical_orbit_audit(R: RationalFunction, budget: int = 10_000,
                         fixed: list[FixedPointRecord] | None = None) -> AuditReport:
    """Follow every critical orbit and check that each attracting fixed point captures one.

    Verdicts are ("converged", fixed-point index), ("cycle", period), ("escaped", None)
    or ("budget exhausted", None).
    """
    crit = critical_points(R)
    if fixed is None:
        fixed = find_fixed_points(R)
    attracting = [f for f in fixed if f.kind == "attracting"]
    fin_traps = [(i, f.location, _trap_radius(R, f)) for i, f in enumerate(attracting)
                 if not is_inf(f.location)]
    inf_trap = next((i for i, f in enumerate(attracting) if is_inf(f.location)), None)
    w = rat_eval(R, INF)
    rinf = np.inf if is_inf(w) else complex(np.conj(w))
    pts = [c for c, _ in crit]
    z = np.array([np.inf if is_inf(c) else c for c in pts], dtype=complex)
    n = z.size
    verdict: list = [None] * n
    live = np.ones(n, dtype=bool)
    anchor = z.copy()
    chunk = 32  # trap discs are forward invariant, so testing every few steps loses nothing
    step = 0
    while True:
        idx = np.nonzero(live)[0]
        zl = z[idx]
        for i, loc, rad in fin_traps:
            with np.errstate(invalid="ignore"):
                hit = np.isfinite(zl) & (np.abs(zl - loc) < rad)
            for k in idx[hit]:
                if live[k]:
                    verdict[k], live[k] = ("converged", i), False
        if inf_trap is not None:
            for k in idx[~np.isfinite(zl)]:
                if live[k]:
                    verdict[k], live[k] = ("converged", inf_trap), False
        if not live.any() or step >= budget:
            break
        z[live] = _iterate_many(R, z[live], rinf, min(chunk, budget - step))
        step += min(chunk, budget - step)
        # Brent-style cycle detection: compare with an anchor refreshed at power-of-two chunks
        with np.errstate(all="ignore"):
            close = np.abs(anchor - z) <= 1e-10 * np.maximum(1.0, np.abs(anchor))
        fa, fz = np.isfinite(anchor), np.isfinite(z)
        same = live & ((~fa & ~fz) | (fa & fz & close))
        for k in np.nonzero(same)[0]:
            verdict[k], live[k] = ("cycle", None), False
        nchunk = step // chunk
        if nchunk & (nchunk - 1) == 0:
            anchor[live] = z[live]
    verdicts = {}
    exhausted = []
    hit_ids = set()
    for k, c in enumerate(pts):
        v = verdict[k]
        if v is None:
            v = ("budget exhausted", None)
            exhausted.append(c)
        elif v[0] == "converged":
            hit_ids.add(v[1])
        verdicts[_key(c)] = v
    violations = [f for i, f in enumerate(attracting) if i not in hit_ids]
    return AuditReport(verdicts, attracting, violations, exhausted)


def _key(c: Point):
    return "inf" if is_inf(c) else (round(c.real, 12), round(c.imag, 12))


def random_rational(rng: np.random.Generator, d: int) -> RationalFunction:
    """Random rational map of exact degree d (numerator degree d, denominator degree d or d-1)."""
    while True:
        dn = d
        dd = int(rng.integers(0, d + 1))
        nc = rng.normal(size=dn + 1) + 1j * rng.normal(size=dn + 1)
        dc = rng.normal(size=dd + 1) + 1j * rng.normal(size=dd + 1)
        R = rational(nc, dc)
        if R.degree == d:
            return R


def non_repelling_finite(R: RationalFunction) -> list[FixedPointRecord]:
    return [f for f in find_fixed_points(R) if not is_inf(f.location) and f.kind != "repelling"]


# -- model dynamics --------------------------------------------------------

@dataclass
class ModelMap:
    nu: tuple[int, ...]
    eps: float
    f: RationalFunction
    U: RasterDroplet
    V_radius: float
    connectivity: int
    degrees: list[int]
    v_inside_u: bool
    orbits_converge: bool
    chart: Callable = field(default=lambda w: w, repr=False)
    attempts: int = 1

    @property
    def ok(self) -> bool:
        return (self.connectivity == len(self.nu) and sorted(self.degrees) == sorted(self.nu)
                and self.v_inside_u and self.orbits_converge)


def model_function(nu, eps: float) -> RationalFunction:
    """eps^2 z^nu_m [1 + sum_{k<m} (z - k)^-nu_k]."""
    from numpy.polynomial import Polynomial

    m = len(nu)
    g = rational(Polynomial([0, 1]) ** nu[-1])
    bracket = rational([1.0])
    for k in range(1, m):
        bracket = bracket + rational([1.0], Polynomial([-k, 1.0]) ** nu[k - 1])
    return (g * bracket) * eps ** 2


def radial_chart(s0: float):
    """Homeomorphism of the plane: identity on |w| <= s0, |z| = s0 exp(|w| - s0) outside."""

    def T(w):
        w = np.asarray(w, dtype=complex)
        r = np.abs(w)
        with np.errstate(all="ignore"):
            scale = np.where(r > s0, s0 * np.exp(r - s0) / np.where(r > 0, r, 1), 1.0)
        return w * scale

    def T_inv(z):
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        with np.errstate(all="ignore"):
            scale = np.where(r > s0, (s0 + np.log(r / s0)) / np.where(r > 0, r, 1), 1.0)
        return z * scale

    return T, T_inv


def _model_once(nu, eps: float, rng: np.random.Generator, n_orbits: int, max_cells: int) -> ModelMap:
    m = len(nu)
    f = model_function(nu, eps)
    # U is huge (outer radius ~ eps^(-1/nu_m)) while the holes around the poles 1..m-1 are
    # tiny, so U is rasterised in a radially compressed chart that is the identity near them
    s0 = m + 0.5
    T, T_inv = radial_chart(s0)
    R_out = 2.0 * (1.0 / eps) ** (1.0 / nu[-1]) + m
    W = abs(complex(T_inv(R_out))) + 0.5
    holes = [(eps * k ** nu[-1]) ** (1.0 / nu[k - 1]) for k in range(1, m)]
    h = max(min(holes + [0.25]) / 4, 2 * W / max_cells)
    origin, nx, ny = grid_for_box(complex(-W, -W), complex(W, W), h)
    mask = np.empty((ny, nx), dtype=bool)
    xs = origin.real + h * (np.arange(nx) + 0.5)
    for j0 in range(0, ny, 256):
        ys = origin.imag + h * (np.arange(j0, min(j0 + 256, ny)) + 0.5)
        with np.errstate(all="ignore"):
            mask[j0:j0 + ys.size] = np.abs(f(T(xs[None, :] + 1j * ys[:, None]))) < eps
    U = RasterDroplet(origin, h, mask)
    _, ncomp = set_labels(U)
    _, q = complement_labels(U)
    conn = q if ncomp == 1 else -1
    degrees = []
    for curve in extract_ovals(U, allow_pinch=True):
        vals = f(T(curve))
        wind = np.sum(np.angle(np.roll(vals, -1) / vals)) / (2 * np.pi)
        degrees.append(int(round(abs(wind))))
    # clos V inside U: |f| < eps on the circle |z| = eps bounds it on the whole disc
    circ = eps * np.exp(2j * np.pi * np.arange(1024) / 1024)
    with np.errstate(all="ignore"):
        v_in = bool(np.all(np.abs(f(circ)) < eps))
    cj, ci = np.nonzero(U.mask)
    pick = rng.choice(cj.size, size=min(n_orbits, cj.size), replace=False)
    z = T(origin + h * (ci[pick] + 0.5) + 1j * h * (cj[pick] + 0.5))
    for _ in range(500):
        with np.errstate(all="ignore"):
            z = np.conj(f(z))
    conv = bool(np.all(np.isfinite(z)) and np.all(np.abs(z) < 1e-8))
    return ModelMap(tuple(nu), eps, f, U, eps, conn, degrees, v_in, conv, chart=T)


def model_map(nu, eps: float | None = None, max_halvings: int = 20, seed: int = 0,
              n_orbits: int = 200, max_cells: int = 6000) -> ModelMap:
    """Realise the model covering map for degrees nu, halving eps until every property holds.

    The default starting value is eps = 1/(10 * sum(nu) * len(nu)). The returned
    raster U lives in the chart ``result.chart`` (see radial_chart).
    """
    nu = [int(v) for v in nu]
    if not nu or min(nu) < 1:
        raise ValueError("nu must be a non-empty list of positive integers")
    if eps is None:
        eps = 1.0 / (10 * sum(nu) * len(nu))
    rng = np.random.default_rng(seed)
    last = None
    for attempt in range(max_halvings + 1):
        res = _model_once(nu, eps, rng, n_orbits, max_cells)
        res.attempts = attempt + 1
        if res.ok:
            return res
        last = res
        eps /= 2
    raise EpsilonTooLarge(f"no accepted eps for nu={nu}; last connectivity {last.connectivity}")


# -- Schwarz reflection ----------------------------------------------------

def _in_closure(spec, z: complex) -> bool:
    from .domains import _on_boundary, contains, schwarz_eval

    if bool(contains(spec, np.array([z]))[0]):
        return True
    if not _on_boundary(spec, z, 1e-3):
        return False
    # near the boundary: a boundary point is exactly where the reflection fixes z
    try:
        w = complex(schwarz_eval(spec, z))
    except InversionFailure:
        return False
    return abs(np.conj(w) - z) <= 1e-9 * max(1.0, abs(z))


def schwarz_dynamics(spec, seeds, budget: int = 50) -> list[OrbitRecord]:
    """Orbits of z -> conj(S(z)) on clos Omega; an orbit stops on its first exit into K
    or when it reaches a fixed (boundary) point."""
    from .domains import schwarz_eval

    out = []
    for s in seeds:
        z: Point = complex(s)
        traj: list = [z]
        verdict, exit_step = "budget exhausted", None
        for step in range(budget):
            if not _in_closure(spec, z):
                verdict, exit_step = "exited", step
                break
            w = complex(schwarz_eval(spec, z))
            if not np.isfinite(w):
                traj.append(INF)
                verdict, exit_step = "exited", step + 1
                break
            znew = complex(np.conj(w))
            traj.append(znew)
            if abs(znew - z) <= 1e-9 * max(1.0, abs(z)):
                verdict = "fixed"
                break
            z = znew
        else:
            if not _in_closure(spec, z):
                verdict, exit_step = "exited", budget
        out.append(OrbitRecord(complex(s), traj, verdict, None, exit_step))
    return out


def reflection_residual(spec, n: int = 256) -> float:
    """max |conj(S(z)) - z| over boundary samples (Schwarz reflection fixes the boundary)."""
    from .domains import boundary, schwarz_eval

    pts = boundary(spec, n).points[0][:-1]
    return float(np.max(np.abs(np.conj(schwarz_eval(spec, pts)) - pts)))


def orbits_csv(records: list[OrbitRecord], spec=None) -> str:
    from .domains import contains

    lines = ["seed,step,x,y,region"]
    for r in records:
        for k, z in enumerate(r.trajectory):
            seed = f"{r.seed.real:.6g}{r.seed.imag:+.6g}i"
            if is_inf(z):
                lines.append(f"{seed},{k},inf,inf,K")
                continue
            region = ""
            if spec is not None:
                region = "Omega" if bool(contains(spec, np.array([z]))[0]) else "K"
            lines.append(f"{seed},{k},{z.real:.10g},{z.imag:.10g},{region}")
    return "\n".join(lines) + "\n"
