"""Named droplet scenarios: a localisation raster, a quadrature function and expectations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize, signal

from .domains import Cardioid, EllipseExterior, boundary, quadrature_data
from .errors import ScenarioError
from .numerics import RationalFunction, is_inf, partial_fractions, rational
from .raster import RasterDroplet, grid_for_box, polygon_mask, rasterize
from .topology import (FOUR, check_ovals_bound, extract_ovals, check_theorem_A, complement_labels, component_connectivity,
                       topology_report)


@dataclass
class Scenario:
    name: str
    K0: RasterDroplet = field(repr=False)
    h_rat: RationalFunction
    times: list[float]
    meta: dict = field(default_factory=dict)


def _largest_component(mask):
    lab, n = ndimage.label(mask, structure=FOUR)
    if n <= 1:
        return mask
    sizes = ndimage.sum(mask, lab, range(1, n + 1))
    return lab == 1 + int(np.argmax(sizes))


def disc(h: float = 1 / 256) -> Scenario:
    K0 = rasterize(lambda z: np.abs(z) < 1, -1 - 1j, 1 + 1j, h)
    return Scenario("disc", K0, rational([0.0]), [0.1, 0.25, 0.5], {"d": 0})


def two_disc(h: float = 1 / 256, a: float = 0.4, rho: float = 0.2) -> Scenario:
    """Closed unit disc with two open discs B(+-a, rho) removed."""
    K0 = rasterize(lambda z: (np.abs(z) <= 1) & (np.abs(z - a) >= rho) & (np.abs(z + a) >= rho),
                   -1 - 1j, 1 + 1j, h)
    hr = rational([rho ** 2], [-a, 1]) + rational([rho ** 2], [a, 1])
    t0 = K0.area / math.pi
    return Scenario("two-disc", K0, hr, [0.45 * t0, 0.9 * t0], {"d": 2, "poles": [a, -a]})


def annulus(h: float = 1 / 256, rho: float = 0.4) -> Scenario:
    K0 = rasterize(lambda z: (np.abs(z) <= 1) & (np.abs(z) >= rho), -1 - 1j, 1 + 1j, h)
    t0 = K0.area / math.pi
    return Scenario("annulus", K0, rational([rho ** 2], [0, 1]), [0.5 * t0, 0.9 * t0], {"d": 1})


def deltoid_curve(n: int = 8192) -> np.ndarray:
    th = 2 * np.pi * np.arange(n) / n
    return np.exp(1j * th) / 3 + np.exp(-2j * th) / 6


def cubic(h: float = 1 / 512, truncate: float | None = None) -> Scenario:
    """Q = |z|^2 - Re z^3 localised to the closed deltoid (optionally cut by B(0, truncate))."""
    origin, nx, ny = grid_for_box(-0.6 - 0.6j, 0.6 + 0.6j, h)
    mask = polygon_mask(deltoid_curve(), origin, h, nx, ny)
    if truncate is not None:
        X = origin.real + h * (np.arange(nx) + 0.5)
        Y = origin.imag + h * (np.arange(ny) + 0.5)
        mask &= np.abs(X[None, :] + 1j * Y[:, None]) <= truncate
    # cusp tips rasterise into a few stray cells
    mask = _largest_component(mask)
    K0 = RasterDroplet(origin, h, mask)
    t0 = 1 / 18
    name = "cubic" if truncate is None else "cubic-truncated"
    return Scenario(name, K0, rational([0, 0, 1.5]), [0.25 * t0, 0.5 * t0, 0.75 * t0, K0.area / math.pi],
                    {"d": 2, "t0": t0, "cusps": [0.5 * np.exp(2j * np.pi * k / 3) for k in range(3)]})


def curvature_peaks(K: RasterDroplet, smooth: float = 6.0, n: int = 4096) -> tuple[int, np.ndarray]:
    """Count sharp curvature maxima along the longest boundary curve of K.

    The contour is resampled by arc length and smoothed over ``smooth`` cells;
    a peak counts when it exceeds max(3 x median, 1/4 of the largest curvature).
    Returns the count and the peak curvatures.
    """
    c = max(extract_ovals(K, allow_pinch=True), key=len)
    cc = np.append(c, c[0])
    s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(cc)))])
    L = s[-1]
    u = np.linspace(0.0, L, n, endpoint=False)
    sig = smooth * K.h / (L / n)
    x = ndimage.gaussian_filter1d(np.interp(u, s, cc.real), sig, mode="wrap")
    y = ndimage.gaussian_filter1d(np.interp(u, s, cc.imag), sig, mode="wrap")
    dx, dy = np.gradient(x), np.gradient(y)
    k = np.abs(dx * np.gradient(dy) - dy * np.gradient(dx)) / (dx * dx + dy * dy) ** 1.5
    # start at the flattest point so no peak straddles the seam
    k = np.roll(k, -int(np.argmin(k)))
    thr = max(3 * float(np.median(k)), 0.25 * float(k.max()))
    pk, _ = signal.find_peaks(k, height=thr, prominence=0.5 * thr, distance=n // 12)
    return len(pk), k[pk]


# -- packings --------------------------------------------------------------

def _descartes(c1, c2, c3):
    """Circle tangent to three mutually tangent circles (z, r, outer) inside their gap."""
    ks = [(-1 / r if outer else 1 / r) for _, r, outer in (c1, c2, c3)]
    zs = [z for z, _, _ in (c1, c2, c3)]
    k1, k2, k3 = ks
    k4 = k1 + k2 + k3 + 2 * math.sqrt(k1 * k2 + k2 * k3 + k3 * k1)
    s = k1 * zs[0] + k2 * zs[1] + k3 * zs[2]
    root = 2 * np.sqrt(complex(k1 * k2 * zs[0] * zs[1] + k2 * k3 * zs[1] * zs[2] + k1 * k3 * zs[0] * zs[2]))
    r4 = 1 / k4
    best, err = None, np.inf
    for cand in ((s + root) / k4, (s - root) / k4):
        e = 0.0
        for z, r, outer in (c1, c2, c3):
            want = r - r4 if outer else r + r4
            e += abs(abs(cand - z) - want)
        if e < err:
            best, err = cand, e
    if err > 1e-6:
        raise ScenarioError(f"Descartes construction failed (tangency error {err:.2g})")

    # the complex square root loses digits near the gap centre; polish the tangencies
    def resid(v):
        z, r = complex(v[0], v[1]), v[2]
        return [abs(z - zc) - (rc - r if outer else rc + r) for zc, rc, outer in (c1, c2, c3)]

    x, y, r = optimize.fsolve(resid, [best.real, best.imag, r4], xtol=1e-13)
    return (complex(x, y), float(r), False)


def disc_packing(extra: int = 2) -> list[tuple[complex, float]]:
    """Three equal discs in the unit disc, one disc in each of the 4 gaps, then ``extra`` more.

    Each extra disc goes into the gap that admits the largest one. Returns the
    inner discs (centre, radius); with extra=2 there are 9 discs and 16 gaps.
    """
    rho = 2 * math.sqrt(3) - 3
    circles = [(0j, 1.0, True)]
    circles += [((1 - rho) * np.exp(1j * (math.pi / 2 + 2 * math.pi * k / 3)), rho, False) for k in range(3)]
    faces = [(1, 2, 3), (0, 1, 2), (0, 2, 3), (0, 3, 1)]

    def insert(f):
        circles.append(_descartes(*(circles[i] for i in f)))
        k = len(circles) - 1
        a, b, c = f
        faces.extend([(a, b, k), (b, c, k), (c, a, k)])

    for _ in range(4):
        insert(faces.pop(0))
    for _ in range(extra):
        radii = [_descartes(*(circles[i] for i in f))[1] for f in faces]
        insert(faces.pop(int(np.argmax(radii))))
    return [(z, r) for z, r, outer in circles if not outer]


def packing(h: float = 1 / 512) -> Scenario:
    discs = disc_packing()

    def inside(z):
        ok = np.abs(z) <= 1
        for a, r in discs:
            ok &= np.abs(z - a) >= r
        return ok

    K0 = rasterize(inside, -1 - 1j, 1 + 1j, h)
    hr = rational([0.0])
    for a, r in discs:
        hr = hr + rational([r * r], [-a, 1])
    m = len(discs)
    return Scenario("packing", K0, hr, [], {"m": m, "c": 2 * m - 2, "packing": "discs-in-disc", "box_factor": 1.6,
                                            "discs": discs, "d": m})


def cardioid_ellipse_geometry(a: float = 1.2) -> tuple[float, float, complex]:
    """Ellipse (a, b, centre) touching the unit cardioid at its right vertex and at two symmetric points."""
    x0 = 1.5 - a
    th = np.linspace(1e-3, np.pi, 20001)
    w = np.exp(1j * th)
    p = w + w * w / 2
    u = (p.real - x0) / a
    if np.any(np.abs(u) >= 1):
        raise ScenarioError("ellipse too short for the cardioid")
    b = float(np.max(np.abs(p.imag) / np.sqrt(1 - u * u)))
    # the vertex contact must be tangential from outside: ellipse curvature a/b^2 below 3/4
    if a / b ** 2 >= 0.75:
        raise ScenarioError("vertex contact is not tangential")
    return a, b, complex(x0)


def cardioid_in_ellipse(h: float = 1 / 512) -> Scenario:
    a, b, x0 = cardioid_ellipse_geometry()
    E = EllipseExterior(a, b, x0)
    C = Cardioid(1.0)
    cc = boundary(C, 8192).points[0]
    lo, hi = complex(x0.real - a, -b), complex(x0.real + a, b)
    origin, nx, ny = grid_for_box(lo, hi, h)
    X = origin.real + h * (np.arange(nx) + 0.5)
    Y = origin.imag + h * (np.arange(ny) + 0.5)
    Z = X[None, :] + 1j * Y[:, None]
    inE = ((Z.real - x0.real) / a) ** 2 + (Z.imag / b) ** 2 <= 1
    inC = polygon_mask(cc, origin, h, nx, ny)
    K0 = RasterDroplet(origin, h, inE & ~inC)
    hr = quadrature_data(E).to_rational() + quadrature_data(C).to_rational()
    return Scenario("cardioid-in-ellipse", K0, hr, [],
                    {"m": 1, "c": 3, "packing": "cardioids-in-ellipse", "box_factor": 1.6, "d": 3, "ellipse": (a, b, x0)})


def _mask_on_box(lo, hi, h, *pieces):
    """Grid over [lo, hi]; ``pieces`` are callables returning masks on the cell centres."""
    origin, nx, ny = grid_for_box(lo, hi, h)
    X = origin.real + h * (np.arange(nx) + 0.5)
    Y = origin.imag + h * (np.arange(ny) + 0.5)
    Z = X[None, :] + 1j * Y[:, None]
    m = np.ones(Z.shape, bool)
    for p in pieces:
        m &= p(Z, origin, nx, ny)
    return RasterDroplet(origin, h, m)


def cardioid_in_disc(h: float = 1 / 512) -> Scenario:
    """Unit cardioid inside the circle |z - 1/4| = 3 sqrt3 / 4, touching it at w = e^(+-i pi/3).

    Order-2 unbounded case with one finite double node; the interior of K has 2 components.
    """
    c, R = 0.25, 3 * math.sqrt(3) / 4
    cc = boundary(Cardioid(1.0), 8192).points[0]
    K0 = _mask_on_box(complex(c - R, -R), complex(c + R, R), h,
                      lambda Z, *_: np.abs(Z - c) <= R,
                      lambda Z, o, nx, ny: ~polygon_mask(cc, o, h, nx, ny))
    hr = rational([c]) + quadrature_data(Cardioid(1.0)).to_rational()
    return Scenario("cardioid-in-disc", K0, hr, [], {"c": 2, "d": 2, "box_factor": 1.6})


def half_discs(h: float = 1 / 512) -> Scenario:
    """Discs B(+-1/2, 1/2) in the closed unit disc: two finite simple nodes, 2 components."""
    K0 = _mask_on_box(-1 - 1j, 1 + 1j, h,
                      lambda Z, *_: (np.abs(Z) <= 1) & (np.abs(Z - 0.5) >= 0.5) & (np.abs(Z + 0.5) >= 0.5))
    hr = rational([0.25], [-0.5, 1]) + rational([0.25], [0.5, 1])
    return Scenario("half-discs", K0, hr, [], {"m": 2, "c": 2, "packing": "discs-in-disc", "d": 2, "box_factor": 1.6})


def disc_in_ellipse(h: float = 1 / 512, a: float = 1.5, b: float = 1.0) -> Scenario:
    """Disc B(0, b) inside the ellipse with semi-axes a > b, touching at +-ib.

    One finite simple node and a simple node at infinity; 2 components.
    """
    K0 = _mask_on_box(complex(-a, -b), complex(a, b), h,
                      lambda Z, *_: (Z.real / a) ** 2 + (Z.imag / b) ** 2 <= 1,
                      lambda Z, *_: np.abs(Z) >= b)
    hr = quadrature_data(EllipseExterior(a, b, 0j)).to_rational() + rational([b * b], [0, 1])
    return Scenario("disc-in-ellipse", K0, hr, [], {"c": 2, "d": 2, "box_factor": 1.6})


def concentric_circles(k: int, h: float = 1 / 128) -> RasterDroplet:
    """K bounded by k concentric circles of radii 1..k, the outermost ring always in K."""
    if k < 1:
        raise ScenarioError("need at least one circle")
    R = float(k) + 0.5
    radii = np.arange(1, k + 1, dtype=float)
    origin, nx, ny = grid_for_box(complex(-R, -R), complex(R, R), h)
    X = origin.real + h * (np.arange(nx) + 0.5)
    Y = origin.imag + h * (np.arange(ny) + 0.5)
    r = np.abs(X[None, :] + 1j * Y[:, None])
    # count the circles enclosing each cell; odd counts lie in K
    enclosing = (r[..., None] < radii).sum(axis=-1)
    mask = enclosing % 2 == 1
    return RasterDroplet(origin, h, mask)


REGISTRY = {
    "disc": disc,
    "two-disc": two_disc,
    "annulus": annulus,
    "cubic": cubic,
    "packing": packing,
    "cardioid-in-ellipse": cardioid_in_ellipse,
    "cardioid-in-disc": cardioid_in_disc,
    "half-discs": half_discs,
    "disc-in-ellipse": disc_in_ellipse,
}


def build(name: str, h: float | None = None) -> Scenario:
    try:
        fn = REGISTRY[name]
    except KeyError:
        raise ScenarioError(f"unknown scenario {name!r}; known: {sorted(REGISTRY)}") from None
    return fn() if h is None else fn(h)


# -- bound checks on a produced droplet -----------------------------------

def complement_nodes(K: RasterDroplet, h_rat: RationalFunction):
    """Distinct nodes of h per complement component: {label: {node: max order}}.

    Label 0 is the unbounded component; it also receives the polynomial part of h.
    """
    lab, q = complement_labels(K)
    out: dict[int, dict] = {k: {} for k in range(q)}
    for nd in partial_fractions(h_rat).nodes:
        if is_inf(nd.a):
            key, k = "inf", 0
        else:
            j, i = K.index_of(nd.a)
            k = int(lab[j, i]) if 0 <= j < K.ny and 0 <= i < K.nx else 0
            if k < 0:
                raise ScenarioError(f"node {nd.a} lies in the droplet")
            key = complex(nd.a)
        out[k][key] = max(out[k].get(key, -1), nd.m)
    return lab, out


def droplet_bounds(K: RasterDroplet, h_rat: RationalFunction) -> dict:
    """Oval inequality for K and the connectivity bound for every complement component."""
    report = topology_report(K)
    d = h_rat.degree
    ov = check_ovals_bound(report, d)
    lab, nodes = complement_nodes(K, h_rat)
    comps = []
    for k, nd in nodes.items():
        finite = {a: m for a, m in nd.items() if a != "inf"}
        dk = sum(m + 1 for m in finite.values())
        nk = len(finite)
        at_inf = nd.get("inf", -1)
        if at_inf >= 1:
            dk += at_inf
            nk += 1
        if k == 0:
            kind = "UQD-node-at-inf" if at_inf >= 1 else "UQD"
        else:
            kind = "BQD" if any(m >= 2 for m in finite.values()) else "BQD-no-triple-nodes"
        conn = component_connectivity(lab, k)
        v = check_theorem_A(dk, nk, kind, conn)
        comps.append({"label": k, "d": dk, "n": nk, "kind": kind, "conn": conn, **v.to_json()})
    passed = ov.passed and all(c["passed"] for c in comps)
    return {"passed": passed, "degree": d, "ovals": ov.to_json(), "report": report.to_json(),
            "components": comps}
