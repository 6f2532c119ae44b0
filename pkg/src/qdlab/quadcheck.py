"""Numerical verification of quadrature identities.

The area side is a boundary integral, int_Omega f dA = (1/2i) int_{dOmega} f zbar dz,
and the node side is sum c_k f^(m_k)(a_k). A node at infinity with weight c and
order m contributes -c * f_{m+1}, where f_{m+1} is the coefficient of z^-(m+1)
in the expansion of f at infinity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .domains import _on_boundary, contains, contour_integral, to_json as domain_json
from .errors import InadmissibleTest
from .numerics import (QuadratureData, RationalFunction, degree, is_inf, poly_roots, rat_derivative,
                       rat_eval, rational)


@dataclass(frozen=True, eq=False)
class TestFunction:
    """An analytic test function.

    kind is "monomial" (z^j), "inverse" (z^-j), "cauchy" (1/(z - w)) or
    "rational" (an explicit RationalFunction in ``f``).
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str
    j: int = 0
    w: complex = 0j
    f: RationalFunction | None = None

    def rational(self) -> RationalFunction:
        if self.kind == "monomial":
            c = np.zeros(self.j + 1, dtype=complex)
            c[self.j] = 1
            return rational(c)
        if self.kind == "inverse":
            d = np.zeros(self.j + 1, dtype=complex)
            d[self.j] = 1
            return rational([1.0], d)
        if self.kind == "cauchy":
            return rational([1.0], [-self.w, 1.0])
        if self.kind == "rational" and self.f is not None:
            return self.f
        raise ValueError(f"unknown test function kind {self.kind!r}")

    def label(self) -> str:
        if self.kind == "monomial":
            return f"z^{self.j}"
        if self.kind == "inverse":
            return f"z^-{self.j}"
        if self.kind == "cauchy":
            return f"k_w(w={self.w.real:.6g}{self.w.imag:+.6g}i)"
        return "rational"


def monomial(j: int) -> TestFunction:
    return TestFunction("monomial", j=j)


def inverse_monomial(j: int) -> TestFunction:
    return TestFunction("inverse", j=j)


def cauchy_kernel(w: complex) -> TestFunction:
    """k_w(z) = 1/(z - w)."""
    return TestFunction("cauchy", w=complex(w))


def user_rational(f: RationalFunction) -> TestFunction:
    return TestFunction("rational", f=f)


def check_admissible(spec, f: TestFunction) -> RationalFunction:
    g = f.rational()
    if spec.unbounded and degree(g.num) >= degree(g.den):
        raise InadmissibleTest(f"{f.label()} does not vanish at infinity")
    if degree(g.den) >= 1:
        for p, _ in poly_roots(g.den):
            if bool(np.any(contains(spec, np.array([p])))) or _on_boundary(spec, p, 1e-8):
                raise InadmissibleTest(f"{f.label()} has a pole at {p} in the closed domain")
    return g


def lhs_area_integral(spec, f: TestFunction) -> complex:
    """Area integral of f over Omega (principal value when unbounded)."""
    g = check_admissible(spec, f)
    val = contour_integral(spec, lambda z, zb: g(z) * zb)
    # the sampled curve is oriented around the compact piece; Omega is outside it when unbounded
    return -val if spec.unbounded else val


def laurent_at_infinity(g: RationalFunction, n: int) -> np.ndarray:
    """Coefficients f_0..f_{n-1} of f = sum f_k z^-k at infinity (f finite there)."""
    nc = np.asarray(g.num.coef, dtype=complex)
    dc = np.asarray(g.den.coef, dtype=complex)
    dn, dd = degree(g.num), degree(g.den)
    if dn > dd:
        raise ValueError("function has a pole at infinity")
    # f(1/u) = u^(dd-dn) revN(u)/revD(u)
    rn = nc[::-1][:dn + 1] if dn >= 0 else np.zeros(1, dtype=complex)
    rd = dc[::-1]
    shift = dd - dn
    out = np.zeros(n, dtype=complex)
    m = max(n - shift, 0)
    if m:
        a = np.concatenate([rn, np.zeros(m, dtype=complex)])[:m]
        b = np.concatenate([rd, np.zeros(m, dtype=complex)])[:m]
        s = np.zeros(m, dtype=complex)
        for i in range(m):
            s[i] = (a[i] - np.dot(s[:i], b[i:0:-1])) / b[0] if i else a[0] / b[0]
        out[shift:shift + m] = s
    return out


def rhs_quadrature(qd: QuadratureData, f: TestFunction) -> complex:
    """Sum of c_k f^(m_k)(a_k) over the nodes."""
    g = f.rational()
    total = 0j
    derivs = [g]
    for nd in qd.nodes:
        if is_inf(nd.a):
            coef = laurent_at_infinity(g, nd.m + 2)
            total += -nd.c * coef[nd.m + 1]
            continue
        while len(derivs) <= nd.m:
            derivs.append(rat_derivative(derivs[-1]))
        total += nd.c * complex(rat_eval(derivs[nd.m], nd.a))
    return complex(total)


@dataclass
class IdentityReport:
    domain: dict
    battery: list[str]
    errors: list[float]
    lhs: list[complex] = field(default_factory=list)
    rhs: list[complex] = field(default_factory=list)

    @property
    def max_error(self) -> float:
        return max(self.errors) if self.errors else 0.0

    def to_json(self) -> str:
        return json.dumps({"domain": self.domain, "battery": self.battery,
                           "errors": self.errors, "max_error": self.max_error}, sort_keys=True)


def check_identity(spec, qd: QuadratureData, battery) -> IdentityReport:
    labels, errs, ls, rs = [], [], [], []
    for f in battery:
        lhs = lhs_area_integral(spec, f)
        rhs = rhs_quadrature(qd, f)
        labels.append(f.label())
        errs.append(float(abs(lhs - rhs)))
        ls.append(lhs)
        rs.append(rhs)
    try:
        dj = domain_json(spec)
    except TypeError:
        dj = {"kind": type(spec).__name__}
    return IdentityReport(dj, labels, errs, ls, rs)


def shifted_inverse(c: complex, j: int) -> TestFunction:
    """(z - c)^-j."""
    from numpy.polynomial import Polynomial
    return user_rational(rational([1.0], Polynomial([-c, 1.0]) ** j))


def deepest_point(spec, cells: int = 128) -> tuple[complex, float]:
    """Point of the compact piece farthest from the boundary, with that distance."""
    from scipy import ndimage
    from .domains import boundary, compact_raster

    pts = boundary(spec, 512).points[0]
    diam = float(max(np.ptp(pts.real), np.ptp(pts.imag)))
    K = compact_raster(spec, diam / cells)
    dist = ndimage.distance_transform_edt(K.mask) * K.h
    j, i = np.unravel_index(int(np.argmax(dist)), dist.shape)
    return complex(K.centers()[j, i]), float(dist[j, i])


def default_battery(spec, jmax: int = 5) -> list[TestFunction]:
    """Monomials plus Cauchy kernels outside Omega; for unbounded Omega, inverse
    powers and kernels centred deep inside the complement."""
    from .domains import boundary

    if spec.unbounded:
        c, depth = deepest_point(spec)
        bat = [shifted_inverse(c, j) for j in range(1, min(jmax, 3) + 1)]
        ws = [c + 0.5 * depth * np.exp(2j * math.pi * k / 3 + 0.3j) for k in range(3)]
        return bat + [cauchy_kernel(w) for w in ws]
    pts = boundary(spec, 256).points[0]
    center = complex(np.mean(pts))
    radius = float(np.max(np.abs(pts - center)))
    bat = [monomial(j) for j in range(jmax + 1)]
    ws = [center + radius * s * np.exp(2j * math.pi * k / 3 + 0.3j) for k, s in enumerate((1.5, 2.0, 3.0))]
    return bat + [cauchy_kernel(w) for w in ws]
