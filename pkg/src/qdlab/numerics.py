"""Complex polynomial and rational-function algebra.

Polynomials are ``numpy.polynomial.Polynomial`` objects with complex
coefficients in ascending order. Rational functions are immutable pairs of
coprime polynomials. The point at infinity is the singleton :data:`INF`;
it is never encoded as a large float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P

from .errors import NearCoincidentPoles, NonConvergence


class _Infinity:
    """The point at infinity of the Riemann sphere."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()

Point = Union[complex, _Infinity]


def is_inf(z) -> bool:
    return z is INF


# -- polynomials -----------------------------------------------------------

def poly(coeffs: Iterable) -> Polynomial:
    """Build a complex polynomial from ascending coefficients."""
    c = np.atleast_1d(np.asarray(list(coeffs) if not isinstance(coeffs, np.ndarray) else coeffs,
                                 dtype=complex))
    if c.size == 0:
        c = np.zeros(1, dtype=complex)
    return Polynomial(_trim(c, 0.0))


def _trim(c: np.ndarray, rtol: float) -> np.ndarray:
    """Drop high-order coefficients that are zero relative to the largest one."""
    c = np.asarray(c, dtype=complex)
    if c.size == 0:
        return np.zeros(1, dtype=complex)
    scale = np.max(np.abs(c))
    if scale == 0:
        return np.zeros(1, dtype=complex)
    k = c.size
    while k > 1 and abs(c[k - 1]) <= rtol * scale:
        k -= 1
    return c[:k].copy()


def degree(p: Polynomial) -> int:
    c = _trim(p.coef, 0.0)
    if c.size == 1 and c[0] == 0:
        return -1
    return c.size - 1


def poly_to_json(p: Polynomial) -> list:
    return [[float(c.real), float(c.imag)] for c in np.asarray(p.coef, dtype=complex)]


def poly_from_json(data: Sequence) -> Polynomial:
    return poly([complex(re, im) for re, im in data])


def _poly_scale(c: np.ndarray, z: complex) -> float:
    """Sum |a_k||z|^k, the natural size of p(z) for rounding purposes."""
    return float(np.sum(np.abs(c) * np.abs(z) ** np.arange(c.size)))


def _cluster_radius(k: int, mag: float) -> float:
    # a k-fold root splits into a cluster of radius about eps^(1/k)
    return max(1e-7, 10.0 * 1e-15 ** (1.0 / k)) * max(1.0, mag)


def _aberth(c: np.ndarray, maxiter: int = 500) -> tuple[np.ndarray, bool]:
    n = c.size - 1
    dc = P.polyder(c)
    a = np.abs(c)
    # radius from the Fujiwara-type bound, mildly shrunk
    rad = 2.0 * max((a[n - k] / a[n]) ** (1.0 / k) for k in range(1, n + 1))
    rad = max(rad, 1e-3)
    z = 0.5 * rad * np.exp(2j * np.pi * (np.arange(n) + 0.25) / n + 0.4j)
    converged = np.zeros(n, dtype=bool)
    for _ in range(maxiter):
        pz = P.polyval(z, c)
        dz = P.polyval(z, dc)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = pz / dz
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            inv = 1.0 / diff
            np.fill_diagonal(inv, 0.0)
            s = inv.sum(axis=1)
            w = ratio / (1.0 - ratio * s)
        w = np.where(np.isfinite(w), w, 0.0)
        w = np.where(pz == 0, 0.0, w)
        z = z - w
        # stop on a tiny step or once |p(z)| is at rounding level (backward error)
        scale = P.polyval(np.abs(z), a)
        converged = (np.abs(w) <= 4e-16 * np.maximum(1.0, np.abs(z))) | (np.abs(pz) <= 16 * 2.2e-16 * scale)
        if converged.all():
            break
    return z, bool(np.all(np.isfinite(z)))


def _cluster(z: np.ndarray, kmax: int = 8) -> list[list[int]]:
    """Group approximate roots that belong to one multiple root.

    Repeatedly takes the largest set of k nearest neighbours whose spread
    fits the k-fold cluster radius.
    """
    n = z.size
    dist = np.abs(z[:, None] - z[None, :])
    remaining = list(range(n))
    groups: list[list[int]] = []
    while remaining:
        best: list[int] = [remaining[0]]
        for i in remaining:
            order = sorted(remaining, key=lambda j: dist[i, j])
            for k in range(min(len(order), kmax), len(best), -1):
                g = order[:k]
                cen = z[g].mean()
                if np.max(np.abs(z[g] - cen)) <= _cluster_radius(k, abs(cen)):
                    best = g
                    break
        groups.append(best)
        remaining = [j for j in remaining if j not in best]
    return groups


def _polish(c: np.ndarray, x: complex, k: int) -> complex:
    """Newton on the (k-1)-th derivative, which has a simple root at a k-fold root."""
    dk = P.polyder(c, k - 1) if k > 1 else c
    dk1 = P.polyder(dk)
    best, best_val = x, abs(P.polyval(x, dk))
    for _ in range(20):
        d = P.polyval(x, dk1)
        if d == 0:
            break
        x = x - P.polyval(x, dk) / d
        v = abs(P.polyval(x, dk))
        if v < best_val:
            best, best_val = x, v
        else:
            break
    return complex(best)


def poly_roots(p: Polynomial, tol: float = 1e-8) -> list[tuple[complex, int]]:
    """Roots of a complex polynomial with multiplicities.

    Simultaneous (Aberth) iteration with a companion-matrix fallback; nearby
    approximations are merged into multiple roots and each cluster centre is
    polished by Newton's method on the matching derivative.
    """
    c = _trim(np.asarray(p.coef, dtype=complex), 0.0)
    n = c.size - 1
    if n < 1:
        raise ValueError("poly_roots needs degree >= 1")
    out: list[tuple[complex, int]] = []
    k0 = 0
    while c[k0] == 0:
        k0 += 1
    if k0:
        out.append((0j, k0))
        c = c[k0:]
    if c.size == 1:
        return out
    c = c / c[-1]
    if c.size == 2:
        out.append((complex(-c[0]), 1))
        return out
    z, ok = _aberth(c)
    if not ok:
        z = P.polyroots(c)
    roots = []
    for g in _cluster(z):
        k = len(g)
        x = _polish(c, complex(np.mean(z[g])), k)
        roots.append((x, k))
    bad = []
    for x, k in roots:
        res = abs(P.polyval(x, c))
        if res > tol * _poly_scale(c, x):
            bad.append((x, res))
    if bad:
        # one retry from the companion eigenvalues before giving up
        z = P.polyroots(c)
        roots = [(_polish(c, complex(np.mean(z[g])), len(g)), len(g)) for g in _cluster(z)]
        bad = [(x, abs(P.polyval(x, c))) for x, _ in roots
               if abs(P.polyval(x, c)) > tol * _poly_scale(c, x)]
        if bad:
            raise NonConvergence("root residuals too large", residuals=bad)
    if k0 and any(abs(x) <= _cluster_radius(k0 + k, 0.0) for x, k in roots):
        # a cluster sitting on the exact zero root
        merged = sum(k for x, k in roots if abs(x) <= _cluster_radius(k0 + k, 0.0))
        roots = [(x, k) for x, k in roots if abs(x) > _cluster_radius(k0 + k, 0.0)]
        out = [(0j, k0 + merged)]
    out.extend(roots)
    out.sort(key=lambda rk: (round(rk[0].real, 12), round(rk[0].imag, 12)))
    return out


# -- rational functions ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class RationalFunction:
    """num/den with coprime polynomials and a monic denominator."""

    num: Polynomial
    den: Polynomial

    @property
    def degree(self) -> int:
        return max(degree(self.num), degree(self.den), 0)

    def __call__(self, z):
        """Plain numeric evaluation (arrays allowed); poles give inf or nan."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return P.polyval(z, self.num.coef) / P.polyval(z, self.den.coef)

    def conj(self) -> "RationalFunction":
        """The function with conjugated coefficients, z -> conj(f(conj z))."""
        return RationalFunction(Polynomial(np.conj(self.num.coef)), Polynomial(np.conj(self.den.coef)))

    def __add__(self, other) -> "RationalFunction":
        other = as_rational(other)
        return rational(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self) -> "RationalFunction":
        return RationalFunction(-self.num, self.den)

    def __sub__(self, other) -> "RationalFunction":
        return self + (-as_rational(other))

    def __rsub__(self, other) -> "RationalFunction":
        return as_rational(other) - self

    def __mul__(self, other) -> "RationalFunction":
        other = as_rational(other)
        return rational(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def compose(self, inner: "RationalFunction") -> "RationalFunction":
        """self(inner(z))."""
        a, b = inner.num, inner.den
        dn, dd = degree(self.num), degree(self.den)
        N = max(dn, dd, 0)

        def hom(c: np.ndarray) -> Polynomial:
            acc = Polynomial([0j])
            for k, ck in enumerate(c):
                if ck != 0:
                    acc = acc + ck * a ** k * b ** (N - k)
            return acc

        return rational(hom(self.num.coef), hom(self.den.coef))

    def to_json(self) -> dict:
        return {"num": poly_to_json(self.num), "den": poly_to_json(self.den)}

    @staticmethod
    def from_json(data: dict) -> "RationalFunction":
        return rational(poly_from_json(data["num"]), poly_from_json(data["den"]))

    def __repr__(self) -> str:
        return f"RationalFunction(num={list(self.num.coef)}, den={list(self.den.coef)})"


def as_rational(x) -> RationalFunction:
    if isinstance(x, RationalFunction):
        return x
    if isinstance(x, Polynomial):
        return RationalFunction(poly(x.coef), poly([1.0]))
    return RationalFunction(poly([complex(x)]), poly([1.0]))


def rational(num, den=(1.0,), coprime_tol: float = 1e-9) -> RationalFunction:
    """Build a reduced rational function from two polynomials or coefficient lists."""
    n = num if isinstance(num, Polynomial) else poly(num)
    d = den if isinstance(den, Polynomial) else poly(den)
    nc = _trim(n.coef, 1e-14)
    dc = _trim(d.coef, 1e-14)
    if np.all(dc == 0):
        raise ZeroDivisionError("denominator is identically zero")
    if np.all(nc == 0):
        return RationalFunction(poly([0j]), poly([1.0]))
    if dc.size > 1:
        nc, dc = _cancel_common(nc, dc, coprime_tol)
    lead = dc[-1]
    return RationalFunction(Polynomial(nc / lead), Polynomial(dc / lead))


def _cancel_common(nc: np.ndarray, dc: np.ndarray, tol: float):
    """Remove common roots of numerator and denominator."""
    if nc.size == 1:
        return nc, dc
    droots = poly_roots(Polynomial(dc))
    for a, k in droots:
        for _ in range(k):
            if nc.size == 1:
                return nc, dc
            val = abs(P.polyval(a, nc))
            if val <= tol * max(_poly_scale(nc, a), 1e-300):
                nc, _ = P.polydiv(nc, np.array([-a, 1.0]))
                dc, _ = P.polydiv(dc, np.array([-a, 1.0]))
                nc = _trim(nc, 1e-14)
                dc = _trim(dc, 1e-14)
            else:
                break
    return nc, dc


def rat_eval(f: RationalFunction, z: Point) -> Point:
    """Value of f at a point of the sphere; poles map to INF."""
    nc = np.asarray(f.num.coef, dtype=complex)
    dc = np.asarray(f.den.coef, dtype=complex)
    dn, dd = nc.size - 1, dc.size - 1
    if is_inf(z):
        if np.all(nc == 0):
            return 0j
        if dn > dd:
            return INF
        if dn < dd:
            return 0j
        return complex(nc[-1] / dc[-1])
    z = complex(z)
    if abs(z) <= 1.0:
        num = P.polyval(z, nc)
        den = P.polyval(z, dc)
        if abs(den) <= 1e-15 * _poly_scale(dc, z):
            return INF if num != 0 else complex(np.nan)
        return complex(num / den)
    # reversed chart for |z| > 1 keeps the arithmetic in range
    w = 1.0 / z
    num = P.polyval(w, nc[::-1])
    den = P.polyval(w, dc[::-1])
    if abs(den) <= 1e-15 * _poly_scale(dc[::-1], w):
        return INF
    return complex(num / den * z ** (dn - dd))


def rat_derivative(f: RationalFunction) -> RationalFunction:
    """Quotient-rule derivative in reduced form."""
    N, D = f.num, f.den
    return rational(N.deriv() * D - N * D.deriv(), D * D)


# -- quadrature data -------------------------------------------------------

@dataclass(frozen=True)
class QuadNode:
    """One term c * f^(m)(a) of a quadrature identity.

    For a finite node the quadrature function gains (c/pi) m!/(z-a)^(m+1).
    At INF the term is the polynomial piece (c/pi) z^m.
    """

    a: Point
    m: int
    c: complex


@dataclass(frozen=True)
class QuadratureData:
    nodes: tuple[QuadNode, ...]

    def distinct_nodes(self) -> list[Point]:
        seen: list[Point] = []
        for nd in self.nodes:
            if not any(_same_point(nd.a, s) for s in seen):
                seen.append(nd.a)
        return seen

    @property
    def order(self) -> int:
        """Degree of the quadrature function."""
        d = 0
        for a in self.distinct_nodes():
            ms = [nd.m for nd in self.nodes if _same_point(nd.a, a) and abs(nd.c) > 0]
            if not ms:
                continue
            d += max(ms) if is_inf(a) else max(ms) + 1
        return d

    @property
    def n_nodes(self) -> int:
        """Number of distinct poles of the quadrature function, INF included."""
        n = 0
        for a in self.distinct_nodes():
            ms = [nd.m for nd in self.nodes if _same_point(nd.a, a) and abs(nd.c) > 0]
            if ms and (not is_inf(a) or max(ms) >= 1):
                n += 1
        return n

    @property
    def has_node_at_infinity(self) -> bool:
        return any(is_inf(nd.a) and nd.m >= 1 and abs(nd.c) > 0 for nd in self.nodes)

    def finite_nodes(self) -> list[QuadNode]:
        return [nd for nd in self.nodes if not is_inf(nd.a)]

    def to_rational(self) -> RationalFunction:
        acc = as_rational(0.0)
        for nd in self.nodes:
            if is_inf(nd.a):
                coef = np.zeros(nd.m + 1, dtype=complex)
                coef[nd.m] = nd.c / math.pi
                acc = acc + RationalFunction(Polynomial(coef), poly([1.0]))
            else:
                den = Polynomial([-nd.a, 1.0]) ** (nd.m + 1)
                acc = acc + rational([nd.c * math.factorial(nd.m) / math.pi], den)
        return acc

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            for nd in self.nodes:
                if is_inf(nd.a):
                    out = out + nd.c / math.pi * z ** nd.m
                else:
                    out = out + nd.c * math.factorial(nd.m) / math.pi / (z - nd.a) ** (nd.m + 1)
        return out

    def to_json(self) -> list:
        return [{"a": "inf" if is_inf(nd.a) else [nd.a.real, nd.a.imag], "m": nd.m,
                 "c": [nd.c.real, nd.c.imag]} for nd in self.nodes]

    @staticmethod
    def from_json(data: list) -> "QuadratureData":
        nodes = []
        for item in data:
            a = INF if item["a"] == "inf" else complex(*item["a"])
            nodes.append(QuadNode(a, int(item["m"]), complex(*item["c"])))
        return QuadratureData(tuple(nodes))


def _same_point(a: Point, b: Point, tol: float = 0.0) -> bool:
    if is_inf(a) or is_inf(b):
        return is_inf(a) and is_inf(b)
    return abs(a - b) <= tol


def partial_fractions(f: RationalFunction, sep_tol: float = 1e-6) -> QuadratureData:
    """Recover the nodes, orders and weights of a quadrature function.

    Poles that are distinct yet closer than ``sep_tol`` (relative) are too
    ill-conditioned to separate and raise :class:`NearCoincidentPoles`.
    """
    N, D = f.num, f.den
    q, rem = divmod(N, D)
    nodes: list[QuadNode] = []
    qc = _trim(np.asarray(q.coef, dtype=complex), 0.0)
    qscale = max(np.max(np.abs(qc)), 1e-300)
    dd = degree(D)
    if dd >= 1:
        poles = poly_roots(D)
        for i in range(len(poles)):
            for j in range(i + 1, len(poles)):
                a, b = poles[i][0], poles[j][0]
                if abs(a - b) <= sep_tol * max(1.0, abs(a), abs(b)):
                    raise NearCoincidentPoles(f"poles {a} and {b} cannot be separated")
        for a, k in poles:
            # f = g/(z-a)^k with g analytic at a; Taylor coefficients of g give the principal part
            E, _ = divmod(D, Polynomial([-a, 1.0]) ** k)
            shift = Polynomial([a, 1.0])
            nu = N(shift).coef
            eu = E(shift).coef
            g = _series_div(nu, eu, k)
            for j in range(k):
                bj = g[k - 1 - j]
                nodes.append(QuadNode(complex(a), j, complex(math.pi * bj / math.factorial(j))))
    for j, pj in enumerate(qc):
        if abs(pj) > 1e-14 * qscale and pj != 0:
            nodes.append(QuadNode(INF, j, complex(math.pi * pj)))
    return QuadratureData(tuple(nodes))


def _series_div(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """First n Taylor coefficients of a/b at 0 (b[0] != 0)."""
    a = np.concatenate([np.asarray(a, dtype=complex), np.zeros(n, dtype=complex)])[:n]
    b = np.concatenate([np.asarray(b, dtype=complex), np.zeros(n, dtype=complex)])[:n]
    out = np.zeros(n, dtype=complex)
    for i in range(n):
        s = a[i] - np.dot(out[:i], b[i:0:-1]) if i else a[i]
        out[i] = s / b[0]
    return out


# -- critical points -------------------------------------------------------

def local_degree_at_infinity(R: RationalFunction) -> int:
    nc = _trim(R.num.coef, 1e-13)
    dc = _trim(R.den.coef, 1e-13)
    dn, dd = nc.size - 1, dc.size - 1
    if dn != dd:
        return abs(dn - dd)
    L = nc[-1] / dc[-1]
    diff = _trim(nc - L * dc, 1e-12)
    if diff.size == 1 and abs(diff[0]) <= 1e-12 * np.max(np.abs(nc)):
        return 0
    return dd - (diff.size - 1)


def critical_points(R: RationalFunction) -> list[tuple[Point, int]]:
    """Critical points of R as a self-map of the sphere, with multiplicities."""
    d = R.degree
    if d < 2:
        raise ValueError("critical_points needs degree >= 2")
    N, D = R.num, R.den
    W = N.deriv() * D - N * D.deriv()
    wc = _trim(W.coef, 1e-12)
    out: list[tuple[Point, int]] = []
    if wc.size > 1:
        out.extend(poly_roots(Polynomial(wc)))
    k = local_degree_at_infinity(R)
    if k >= 2:
        out.append((INF, k - 1))
    return out
