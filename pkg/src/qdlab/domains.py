"""Quadrature domains: presets, rational Riemann maps and raster complements.

Every analytic kind reduces to either a disc (closed forms) or a rational
map ``phi`` that is univalent on the unit disc (bounded domains) or on its
exterior (unbounded domains, ``phi`` with a simple pole at infinity). On the
unit circle conj(phi(w)) = phi*(1/w), where phi* has conjugated
coefficients, so the Schwarz function is S(phi(w)) = phi*(1/w).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import NDArray
from skimage.measure import points_in_poly

from .errors import InversionFailure, OriginInDomain, PoleOnDisc, ResidueIllConditioned
from .numerics import (INF, QuadNode, QuadratureData, RationalFunction, degree, poly, poly_roots,
                       rat_derivative, rational)
from .raster import RasterDroplet, grid_for_box, polygon_mask, rasterize


# -- kinds -----------------------------------------------------------------

@dataclass(frozen=True)
class Disc:
    a: complex = 0j
    rho: float = 1.0
    unbounded = False


@dataclass(frozen=True)
class ExteriorDisc:
    a: complex = 0j
    rho: float = 1.0
    unbounded = True


@dataclass(frozen=True, eq=False)
class RiemannMap:
    phi: RationalFunction
    unbounded: bool = False


@dataclass(frozen=True)
class EllipseExterior:
    """Exterior of the ellipse with semi-axes a (along x) and b, centred at ``center``."""

    a: float = 1.5
    b: float = 1.0
    center: complex = 0j
    unbounded = True

    def riemann_map(self) -> RiemannMap:
        R, c = (self.a + self.b) / 2, (self.a - self.b) / 2
        return RiemannMap(rational([c, self.center, R], [0, 1]), True)


@dataclass(frozen=True)
class Cardioid:
    """Image of the unit disc under scale*(w + w^2/2)."""

    scale: float = 1.0
    unbounded = False

    def riemann_map(self) -> RiemannMap:
        return RiemannMap(rational([0, self.scale, self.scale / 2]), False)


@dataclass(frozen=True)
class Limacon:
    """Image of the unit disc under scale*(w + b w^2); univalent for |b| <= 1/2."""

    b: complex = 0.3
    scale: float = 1.0
    unbounded = False

    def riemann_map(self) -> RiemannMap:
        return RiemannMap(rational([0, self.scale, self.scale * self.b]), False)


@dataclass(frozen=True)
class NeumannOval:
    """Image of the unit disc under scale*w/(1 + c w^2): two simple nodes."""

    c: float = 0.15
    scale: float = 1.0
    unbounded = False

    def riemann_map(self) -> RiemannMap:
        return RiemannMap(rational([0, self.scale], [1, 0, self.c]), False)


@dataclass(frozen=True)
class JoukowskyAirfoilExterior:
    """Exterior of the image of the circle through 1 centred at ``center`` under z + 1/z."""

    center: complex = -0.1 + 0.1j
    unbounded = True

    def riemann_map(self) -> RiemannMap:
        c0 = complex(self.center)
        rho = abs(1 - c0)
        zeta = poly([c0, rho])
        return RiemannMap(rational(zeta * zeta + 1, zeta), True)


@dataclass(frozen=True, eq=False)
class RasterComplement:
    """Component ``label`` of the complement of a raster set K (0 = the unbounded one)."""

    droplet: RasterDroplet
    label: int = 0

    @property
    def unbounded(self) -> bool:
        return self.label == 0


DomainSpec = Union[Disc, ExteriorDisc, RiemannMap, EllipseExterior, Cardioid, Limacon,
                   NeumannOval, JoukowskyAirfoilExterior, RasterComplement]


def as_map(spec) -> RiemannMap | None:
    if isinstance(spec, RiemannMap):
        return spec
    if hasattr(spec, "riemann_map"):
        return spec.riemann_map()
    return None


def poly3() -> RiemannMap:
    """The cubic map w - (2 sqrt 2/3) w^2 + (1/3) w^3 with a triple node at 0."""
    return RiemannMap(rational([0, 1, -2 * math.sqrt(2) / 3, 1 / 3]), False)


def invert(spec) -> DomainSpec:
    """Image of a domain containing 0 under z -> 1/z."""
    if isinstance(spec, Disc):
        a, rho = complex(spec.a), spec.rho
        if abs(a) >= rho:
            raise ValueError("inversion needs 0 inside the disc")
        den = abs(a) ** 2 - rho ** 2
        return ExteriorDisc(np.conj(a) / den, rho / abs(den))
    if isinstance(spec, ExteriorDisc):
        a, rho = complex(spec.a), spec.rho
        if abs(a) <= rho:
            raise ValueError("inversion needs 0 outside the closed disc")
        den = abs(a) ** 2 - rho ** 2
        return Disc(np.conj(a) / den, rho / abs(den))
    rm = as_map(spec)
    if rm is None:
        raise TypeError("cannot invert a raster domain")
    inv_w = rational([1.0], [0, 1])
    psi = _reciprocal(rm.phi.compose(inv_w))
    return RiemannMap(psi, not rm.unbounded)


def _reciprocal(f: RationalFunction) -> RationalFunction:
    return rational(f.den, f.num)


# -- univalence ------------------------------------------------------------

@dataclass(frozen=True)
class UnivalenceResult:
    univalent: bool
    nearest_distance: float

    def __bool__(self) -> bool:
        return self.univalent


def _in_reference(w, unbounded: bool, strict: bool = False, tol: float = 1e-9):
    w = np.asarray(w)
    if unbounded:
        return np.abs(w) > 1 + tol if strict else np.abs(w) >= 1 - tol
    return np.abs(w) < 1 - tol if strict else np.abs(w) <= 1 + tol


def univalence_check(phi: RationalFunction, n: int = 2048, unbounded: bool = False) -> UnivalenceResult:
    """Numerical test that phi is injective on the closed reference disc."""
    if degree(phi.den) >= 1:
        for p, _ in poly_roots(phi.den):
            if _in_reference(p, unbounded):
                raise PoleOnDisc(f"phi has a pole at {p} in the reference domain")
    if unbounded and degree(phi.num) - degree(phi.den) != 1:
        return UnivalenceResult(False, 0.0)
    dphi = rat_derivative(phi)
    if degree(dphi.num) >= 1:
        for c, _ in poly_roots(dphi.num):
            if _in_reference(c, unbounded, strict=True):
                return UnivalenceResult(False, 0.0)
    w = np.exp(2j * np.pi * np.arange(n) / n)
    z = phi(w)
    # a univalent map covers each image point once: the boundary winds once
    # around images of interior points (zero times for exterior maps)
    t = 2 * np.pi * (np.arange(64) + 0.5) / 64
    s = np.array([1.02, 1.1, 1.5, 3.0]) if unbounded else np.array([0.2, 0.5, 0.8, 0.95, 0.99])
    probes = phi((s[:, None] * np.exp(1j * t)[None, :]).ravel())
    wind = np.rint(winding_number(z, probes))
    simple = bool(np.all(wind == (0 if unbounded else 1)))
    gap = max(n // 16, 2)
    dist = np.abs(z[:, None] - z[None, :])
    idx = np.arange(n)
    sep = np.abs(idx[:, None] - idx[None, :])
    sep = np.minimum(sep, n - sep)
    near = float(np.min(np.where(sep >= gap, dist, np.inf)))
    return UnivalenceResult(simple, near)


def nearest_boundary_contact(phi: RationalFunction, n: int = 2048) -> tuple[float, complex]:
    """Smallest distance between boundary samples far apart in parameter, and where."""
    w = np.exp(2j * np.pi * np.arange(n) / n)
    z = phi(w)
    gap = max(n // 16, 2)
    dist = np.abs(z[:, None] - z[None, :])
    idx = np.arange(n)
    sep = np.abs(idx[:, None] - idx[None, :])
    sep = np.minimum(sep, n - sep)
    dist = np.where(sep >= gap, dist, np.inf)
    i, j = np.unravel_index(int(np.argmin(dist)), dist.shape)
    return float(dist[i, j]), complex((z[i] + z[j]) / 2)


# -- boundary --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundarySample:
    """Closed curves sampled with Omega on the left; the last point repeats the first."""

    points: tuple[NDArray[np.complex128], ...]
    tangents: tuple[NDArray[np.complex128], ...]
    curve_ids: tuple[int, ...]

    def to_csv(self) -> str:
        lines = ["curve_id,x,y"]
        for cid, pts in zip(self.curve_ids, self.points):
            lines.extend(f"{cid},{p.real:.10g},{p.imag:.10g}" for p in pts)
        return "\n".join(lines) + "\n"


def boundary(spec, n: int = 1024) -> BoundarySample:
    theta = 2 * np.pi * np.arange(n + 1) / n
    w = np.exp(1j * theta)
    if isinstance(spec, (Disc, ExteriorDisc)):
        sign = -1 if isinstance(spec, ExteriorDisc) else 1
        ww = np.exp(1j * sign * theta)
        return BoundarySample((spec.a + spec.rho * ww,), (1j * sign * spec.rho * ww,), (0,))
    if isinstance(spec, RasterComplement):
        from .topology import complement_contours
        curves = complement_contours(spec.droplet, spec.label)
        tans = tuple(np.gradient(c) for c in curves)
        return BoundarySample(tuple(curves), tans, tuple(range(len(curves))))
    rm = as_map(spec)
    if rm.unbounded:
        w = w[::-1]
        sign = -1
    else:
        sign = 1
    z = rm.phi(w)
    t = rat_derivative(rm.phi)(w) * 1j * w * sign
    z[-1] = z[0]
    return BoundarySample((z,), (t,), (0,))


def _complement_curve(spec, n: int) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    """Positively oriented samples (z, dz/dtheta) of a bounded Omega, or of Omega^c when unbounded."""
    theta = 2 * np.pi * np.arange(n) / n
    w = np.exp(1j * theta)
    if isinstance(spec, (Disc, ExteriorDisc)):
        return spec.a + spec.rho * w, 1j * spec.rho * w
    rm = as_map(spec)
    return rm.phi(w), rat_derivative(rm.phi)(w) * 1j * w


def contour_integral(spec, g, n0: int = 512, tol: float = 1e-14, nmax: int = 1 << 17) -> complex:
    """(1/2i) * integral of g(z, zbar) dz over the positively oriented curve of _complement_curve.

    Periodic trapezoid rule with n doubled until successive values agree.
    """
    prev = None
    n = n0
    while True:
        z, dz = _complement_curve(spec, n)
        val = complex(np.sum(g(z, np.conj(z)) * dz) * (2 * np.pi / n) / 2j)
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val
        if n >= nmax:
            return val
        prev = val
        n *= 2


def area(spec) -> float:
    """Area of Omega, or of its complement when Omega is unbounded."""
    if isinstance(spec, (Disc, ExteriorDisc)):
        return math.pi * spec.rho ** 2
    if isinstance(spec, RasterComplement):
        from .topology import complement_labels
        lab, _ = complement_labels(spec.droplet)
        h2 = spec.droplet.h ** 2
        if spec.label == 0:
            return float((lab != 0).sum()) * h2
        return float((lab == spec.label).sum()) * h2
    return contour_integral(spec, lambda z, zb: zb).real


def contains(spec, z) -> NDArray[np.bool_]:
    """Membership of points in Omega (open set; boundary points are unreliable)."""
    z = np.asarray(z, dtype=complex)
    if isinstance(spec, Disc):
        return np.abs(z - spec.a) < spec.rho
    if isinstance(spec, ExteriorDisc):
        return np.abs(z - spec.a) > spec.rho
    if isinstance(spec, RasterComplement):
        from .topology import complement_labels
        lab, _ = complement_labels(spec.droplet)
        K = spec.droplet
        i = np.floor((z.real - K.origin.real) / K.h).astype(int)
        j = np.floor((z.imag - K.origin.imag) / K.h).astype(int)
        ok = (i >= 0) & (i < K.nx) & (j >= 0) & (j < K.ny)
        out = np.full(z.shape, spec.label == 0)
        out[ok] = lab[j[ok], i[ok]] == spec.label
        return out
    rm = as_map(spec)
    curve, _ = _complement_curve(spec, 4096)
    verts = np.stack([curve.real, curve.imag], axis=1)
    flat = z.ravel()
    inside = points_in_poly(np.stack([flat.real, flat.imag], axis=1), verts).reshape(z.shape)
    return ~inside if rm.unbounded else inside


def compact_raster(spec, h: float, margin: int = 2, n: int = 8192) -> RasterDroplet:
    """Raster of the compact piece: clos Omega when bounded, the complement when unbounded."""
    if isinstance(spec, (Disc, ExteriorDisc)):
        a = complex(spec.a)
        return rasterize(lambda z: np.abs(z - a) < spec.rho, a - spec.rho * (1 + 1j),
                         a + spec.rho * (1 + 1j), h, margin)
    curve, _ = _complement_curve(spec, n)
    lo = complex(curve.real.min(), curve.imag.min())
    hi = complex(curve.real.max(), curve.imag.max())
    origin, nx, ny = grid_for_box(lo, hi, h, margin)
    return RasterDroplet(origin, h, polygon_mask(curve, origin, h, nx, ny))


def winding_number(curve: NDArray[np.complex128], z) -> NDArray[np.float64]:
    """Winding number of a closed polyline (first point not repeated) around each z."""
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    out = np.zeros(flat.shape)
    nxt = np.roll(curve, -1)
    for s in range(0, flat.size, 4096):
        zz = flat[s:s + 4096, None]
        ang = np.angle((nxt[None, :] - zz) / (curve[None, :] - zz))
        out[s:s + 4096] = ang.sum(axis=1) / (2 * np.pi)
    return out.reshape(z.shape)


# -- Schwarz function ------------------------------------------------------

def schwarz_map(rm: RiemannMap) -> RationalFunction:
    """G(w) = phi*(1/w), so that S(phi(w)) = G(w)."""
    return rm.phi.conj().compose(rational([1.0], [0, 1]))


class _Inverter:
    """Newton inversion of phi seeded from precomputed samples."""

    def __init__(self, rm: RiemannMap, nseed: int = 1024):
        self.rm = rm
        self.dphi = rat_derivative(rm.phi)
        nr, nt = 16, nseed // 16
        t = 2 * np.pi * (np.arange(nt) + 0.5) / nt
        if rm.unbounded:
            s = np.exp(np.linspace(0.0, math.log(50.0), nr))
        else:
            s = np.linspace(0.05, 1.0, nr)
        self.w = (s[:, None] * np.exp(1j * t)[None, :]).ravel()
        self.z = rm.phi(self.w)

    def __call__(self, z: complex, maxiter: int = 50) -> complex:
        order = np.argsort(np.abs(self.z - z))[:8]
        for k in order:
            w = self._newton(complex(self.w[k]), z, maxiter)
            if w is not None and _in_reference(w, self.rm.unbounded, tol=1e-8):
                return w
        raise InversionFailure(f"Newton inversion of phi failed at z={z}")

    def _newton(self, w: complex, z: complex, maxiter: int) -> complex | None:
        phi, dphi = self.rm.phi, self.dphi
        scale = max(1.0, abs(z))
        for _ in range(maxiter):
            f = complex(phi(w)) - z
            if abs(f) <= 1e-14 * scale:
                return w
            d = complex(dphi(w))
            if d == 0 or not np.isfinite(d):
                return None
            step = f / d
            # damp steps that jump far across the reference domain
            lim = 0.5 * max(abs(w), 0.2)
            if abs(step) > lim:
                step *= lim / abs(step)
            w -= step
        return w if abs(complex(phi(w)) - z) <= 1e-10 * scale else None


def schwarz_eval(spec, z):
    """Schwarz function of the domain at z (scalar or array)."""
    if isinstance(spec, (Disc, ExteriorDisc)):
        zz = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore"):
            out = np.conj(spec.a) + spec.rho ** 2 / (zz - spec.a)
        return complex(out) if out.ndim == 0 else out
    rm = as_map(spec)
    if rm is None:
        raise TypeError("raster domains have no closed-form Schwarz function")
    inv = _cached_inverter(rm)
    G = schwarz_map(rm)
    zz = np.asarray(z, dtype=complex)
    ws = np.array([inv(complex(v)) for v in zz.ravel()]).reshape(zz.shape)
    out = G(ws)
    return complex(out) if out.ndim == 0 else out


_INVERTERS: dict[int, tuple[RiemannMap, _Inverter]] = {}


def _cached_inverter(rm: RiemannMap) -> _Inverter:
    key = id(rm.phi)
    hit = _INVERTERS.get(key)
    if hit is None or hit[0].phi is not rm.phi:
        hit = (rm, _Inverter(rm))
        if len(_INVERTERS) > 64:
            _INVERTERS.clear()
        _INVERTERS[key] = hit
    return hit[1]


def inverse_map(spec, z: complex) -> complex:
    rm = as_map(spec)
    return _cached_inverter(rm)(complex(z))


# -- quadrature data and moments ------------------------------------------

def _pole_list(f: RationalFunction) -> list[tuple[complex, int]]:
    return poly_roots(f.den) if degree(f.den) >= 1 else []


def quadrature_data(spec, ncontour: int = 256) -> QuadratureData:
    """Nodes and weights of the quadrature identity, from contour integrals of S."""
    if isinstance(spec, Disc):
        return QuadratureData((QuadNode(complex(spec.a), 0, math.pi * spec.rho ** 2),))
    if isinstance(spec, ExteriorDisc):
        abar = complex(np.conj(spec.a))
        return QuadratureData((QuadNode(INF, 0, math.pi * abar),) if abar != 0 else ())
    rm = as_map(spec)
    if rm is None:
        raise TypeError("raster domains need transforms.fit_quadrature_function")
    phi, dphi = rm.phi, rat_derivative(rm.phi)
    G = schwarz_map(rm)
    gpoles = _pole_list(G)
    phipoles = [p for p, _ in _pole_list(phi)]
    inside = [(p, k) for p, k in gpoles if _in_reference(p, rm.unbounded, strict=True)]
    nodes: list[QuadNode] = []
    for p, k in inside:
        others = [q for q, _ in gpoles if q != p] + phipoles
        sep = min([abs(p - q) for q in others] + [abs(p) if rm.unbounded else 1.0, 1.0])
        rad = 0.4 * sep
        if rad < 1e-6:
            raise ResidueIllConditioned(f"pole at w={p} too close to other singularities")
        z0 = complex(phi(p))
        w = p + rad * np.exp(2j * np.pi * np.arange(ncontour) / ncontour)
        dw = 1j * (w - p)
        gz, zz, dz = G(w), phi(w) - z0, dphi(w)
        for m in range(k):
            b = np.mean(gz * zz ** m * dz * dw) / 1j
            nodes.append(QuadNode(z0, m, complex(math.pi * b / math.factorial(m))))
    if rm.unbounded:
        order = degree(G.num) - degree(G.den)
        if order >= 0:
            allp = [abs(q) for q, _ in gpoles] + [abs(q) for q in phipoles] + [1.0]
            R = 4.0 * max(allp)
            w = R * np.exp(2j * np.pi * np.arange(4 * ncontour) / (4 * ncontour))
            gz, zz, dz = G(w), phi(w), dphi(w)
            for j in range(order + 1):
                pj = np.mean(gz * zz ** (-j - 1) * dz * 1j * w) / 1j
                if abs(pj) > 1e-13:
                    nodes.append(QuadNode(INF, j, complex(math.pi * pj)))
    return QuadratureData(tuple(nodes))


def moments(spec, kmax: int) -> list[complex]:
    """m_0 = area of the complement, m_k = integral over Omega of z^(-k) for k >= 1."""
    if not spec.unbounded:
        raise ValueError("moments are defined for unbounded domains")
    if bool(np.any(contains(spec, np.array([0j])))) or _on_boundary(spec, 0j):
        raise OriginInDomain("0 lies in the closure of the domain")
    out = [complex(area(spec))]
    for k in range(1, kmax + 1):
        out.append(-contour_integral(spec, lambda z, zb, k=k: zb * z ** (-k)))
    return out


def _on_boundary(spec, z: complex, tol: float = 1e-9) -> bool:
    if isinstance(spec, (Disc, ExteriorDisc)):
        return abs(abs(z - spec.a) - spec.rho) <= tol
    curve, _ = _complement_curve(spec, 4096)
    return float(np.min(np.abs(curve - z))) <= tol


def singular_points(spec, n: int = 4096) -> list[tuple[complex, str]]:
    """Boundary cusps (zeros of phi' on the unit circle) and double points."""
    rm = as_map(spec)
    if rm is None:
        return []
    out: list[tuple[complex, str]] = []
    dphi = rat_derivative(rm.phi)
    if degree(dphi.num) >= 1:
        for c, _ in poly_roots(dphi.num):
            if abs(abs(c) - 1) <= 1e-7:
                out.append((complex(rm.phi(c)), "cusp"))
    dist, where = nearest_boundary_contact(rm.phi, n)
    if dist <= 1e-6:
        out.append((where, "double"))
    return out


def to_json(spec) -> dict:
    def cx(v):
        v = complex(v)
        return [v.real, v.imag]

    if isinstance(spec, Disc):
        return {"kind": "Disc", "a": cx(spec.a), "rho": spec.rho}
    if isinstance(spec, ExteriorDisc):
        return {"kind": "ExteriorDisc", "a": cx(spec.a), "rho": spec.rho}
    if isinstance(spec, EllipseExterior):
        return {"kind": "EllipseExterior", "a": spec.a, "b": spec.b, "center": cx(spec.center)}
    if isinstance(spec, Cardioid):
        return {"kind": "Cardioid", "scale": spec.scale}
    if isinstance(spec, Limacon):
        return {"kind": "Limacon", "b": cx(spec.b), "scale": spec.scale}
    if isinstance(spec, NeumannOval):
        return {"kind": "NeumannOval", "c": spec.c, "scale": spec.scale}
    if isinstance(spec, JoukowskyAirfoilExterior):
        return {"kind": "JoukowskyAirfoilExterior", "center": cx(spec.center)}
    if isinstance(spec, RiemannMap):
        return {"kind": "RiemannMap", "phi": spec.phi.to_json(), "unbounded": spec.unbounded}
    raise TypeError(f"cannot serialise {type(spec).__name__}")


def from_json(data: dict):
    kind = data["kind"]
    cx = lambda v: complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)  # noqa: E731
    if kind == "Disc":
        return Disc(cx(data.get("a", 0)), float(data.get("rho", 1.0)))
    if kind == "ExteriorDisc":
        return ExteriorDisc(cx(data.get("a", 0)), float(data.get("rho", 1.0)))
    if kind == "EllipseExterior":
        return EllipseExterior(float(data["a"]), float(data["b"]), cx(data.get("center", 0)))
    if kind == "Cardioid":
        return Cardioid(float(data.get("scale", 1.0)))
    if kind == "Limacon":
        return Limacon(cx(data.get("b", 0.3)), float(data.get("scale", 1.0)))
    if kind == "NeumannOval":
        return NeumannOval(float(data.get("c", 0.15)), float(data.get("scale", 1.0)))
    if kind == "JoukowskyAirfoilExterior":
        return JoukowskyAirfoilExterior(cx(data.get("center", [-0.1, 0.1])))
    if kind == "RiemannMap":
        return RiemannMap(RationalFunction.from_json(data["phi"]), bool(data.get("unbounded", False)))
    if kind == "Poly3":
        return poly3()
    raise ValueError(f"unknown domain kind {kind!r}")
