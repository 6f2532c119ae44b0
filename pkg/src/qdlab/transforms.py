"""Cauchy transforms and logarithmic potentials of area measures.

Conventions: C^E(z) = (1/pi) int_E dA(w)/(z - w) and
U^E(z) = (1/pi) int_E log(1/|z - w|^2) dA(w), so that dbar C^E = 1_E and
dU^E = -C^E.

Raster sets are integrated exactly as unions of square cells. Stokes'
theorem turns both area integrals into sums over the boundary edges of the
cell union, each with a closed form; whole-grid evaluations use FFT
convolution with the exact single-cell kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage, optimize, signal

from .errors import RankDeficient
from .numerics import (INF, QuadNode, QuadratureData, is_inf, partial_fractions,
                       rational)
from .raster import RasterDroplet


# -- closed forms for discs ------------------------------------------------

def cauchy_disc(a: complex, rho: float, z):
    """Cauchy transform of the disc B(a, rho)."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    z = np.asarray(z, dtype=complex)
    u = z - a
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(np.abs(u) >= rho, rho ** 2 / np.where(u == 0, 1, u), np.conj(u))
    return complex(out) if out.ndim == 0 else out


def log_potential_disc(a: complex, rho: float, z):
    """Logarithmic potential of the disc B(a, rho)."""
    z = np.asarray(z, dtype=complex)
    r = np.abs(z - a)
    with np.errstate(divide="ignore"):
        out = np.where(r >= rho, -rho ** 2 * np.log(np.maximum(r, 1e-300) ** 2),
                       rho ** 2 * (1 - np.log(rho ** 2)) - r ** 2)
    return float(out) if out.ndim == 0 else out


# -- pixel unions ----------------------------------------------------------

def pixel_edges(K: RasterDroplet) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    """Start and end points of the boundary edges of the cell union, K on the left."""
    m = np.pad(K.mask, 1)
    h = K.h
    x0, y0 = K.origin.real - h, K.origin.imag - h
    starts, ends = [], []
    # horizontal edges between rows j-1 and j
    dv = m[1:, :].astype(np.int8) - m[:-1, :].astype(np.int8)
    for sgn in (1, -1):
        jj, ii = np.nonzero(dv == sgn)
        y = y0 + (jj + 1) * h
        xa = x0 + ii * h
        if sgn == 1:
            # K above: travel in +x
            starts.append(xa + 1j * y)
            ends.append(xa + h + 1j * y)
        else:
            starts.append(xa + h + 1j * y)
            ends.append(xa + 1j * y)
    dh = m[:, 1:].astype(np.int8) - m[:, :-1].astype(np.int8)
    for sgn in (1, -1):
        jj, ii = np.nonzero(dh == sgn)
        x = x0 + (ii + 1) * h
        ya = y0 + jj * h
        if sgn == 1:
            # K to the right: travel in -y
            starts.append(x + 1j * (ya + h))
            ends.append(x + 1j * ya)
        else:
            starts.append(x + 1j * ya)
            ends.append(x + 1j * (ya + h))
    return np.concatenate(starts), np.concatenate(ends)


def _cauchy_edges(A, B, z):
    """(1/pi)(1/2i) sum over edges of int (conj(w-z))/(z-w) dw."""
    uA = A[None, :] - z[:, None]
    uB = B[None, :] - z[:, None]
    d = (B - A)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        term = -np.conj(d) - (np.conj(uA) - np.conj(d) * uA / d) * np.log(uB / uA)
    term = np.where(np.isfinite(term), term, -np.conj(d))
    return term.sum(axis=1) / (2j * math.pi)


def _jlog(x0, y0):
    """int_0^1 log((s-x0)^2 + y0^2) ds and int_0^1 s log(...) ds."""
    def prim0(t):
        q = t * t + y0 * y0
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = np.where(q > 0, np.log(np.where(q > 0, q, 1.0)), 0.0)
            at = np.abs(y0) * np.arctan2(t, np.abs(y0))
        return t * lg - 2 * t + 2 * at, q * lg

    t1, t0 = 1 - x0, -x0
    p1, q1 = prim0(t1)
    p0, q0 = prim0(t0)
    J0 = p1 - p0
    # int t log(t^2+y^2) dt = ((t^2+y^2) log(t^2+y^2) - t^2)/2
    Jt = 0.5 * ((q1 - t1 * t1) - (q0 - t0 * t0))
    J1 = Jt + x0 * J0
    return J0, J1


def _log_edges(A, B, z):
    """(1/pi)(1/2i) sum over edges of int -conj(u)(log|u|^2 - 1) du with u = w - z."""
    uA = A[None, :] - z[:, None]
    d = (B - A)[None, :]
    s0 = -uA / d
    J0, J1 = _jlog(s0.real, s0.imag)
    lg = 2 * np.log(np.abs(d))
    L0 = J0 + lg - 1.0
    L1 = J1 + 0.5 * (lg - 1.0)
    term = -d * (np.conj(uA) * L0 + np.conj(d) * L1)
    return (term.sum(axis=1) / (2j * math.pi)).real


def _chunked(fn, K: RasterDroplet, z, chunk: int = 256):
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    if not K.mask.any():
        out = np.zeros(flat.shape, dtype=complex)
    else:
        A, B = pixel_edges(K)
        out = np.concatenate([fn(A, B, flat[s:s + chunk]) for s in range(0, flat.size, chunk)]) \
            if flat.size else np.zeros(0, dtype=complex)
    return out.reshape(z.shape)


def cauchy_raster(K: RasterDroplet, z):
    """Cauchy transform of the cell union of K at arbitrary points."""
    out = _chunked(_cauchy_edges, K, z)
    return complex(out) if np.ndim(out) == 0 else out


def log_potential_raster(K: RasterDroplet, z):
    """Logarithmic potential of the cell union of K at arbitrary points."""
    out = _chunked(_log_edges, K, z).real
    return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=8)
def _cell_kernels(h: float, ny: int, nx: int) -> tuple[NDArray, NDArray]:
    """Exact transforms of the single cell [-h/2, h/2]^2 at all lattice offsets."""
    cell = RasterDroplet(complex(-h / 2, -h / 2), h, np.ones((1, 1), dtype=bool))
    A, B = pixel_edges(cell)
    jj = np.arange(-(ny - 1), ny)
    ii = np.arange(-(nx - 1), nx)
    Z = (ii[None, :] + 1j * jj[:, None]) * h
    flat = Z.ravel()
    ck = np.concatenate([_cauchy_edges(A, B, flat[s:s + 8192]) for s in range(0, flat.size, 8192)])
    lk = np.concatenate([_log_edges(A, B, flat[s:s + 8192]) for s in range(0, flat.size, 8192)])
    ck = ck.reshape(Z.shape)
    ck[ny - 1, nx - 1] = 0.0
    return ck, lk.reshape(Z.shape)


def cauchy_grid(K: RasterDroplet) -> NDArray[np.complex128]:
    """Cauchy transform of K at every cell centre of its grid."""
    ck, _ = _cell_kernels(K.h, K.ny, K.nx)
    return signal.fftconvolve(K.mask.astype(float), ck, mode="valid")


def log_potential_grid(K: RasterDroplet) -> NDArray[np.float64]:
    """Logarithmic potential of K at every cell centre of its grid."""
    _, lk = _cell_kernels(K.h, K.ny, K.nx)
    return signal.fftconvolve(K.mask.astype(float), lk, mode="valid")


# -- identity verifiers ----------------------------------------------------

@dataclass(frozen=True)
class SchwarzResidual:
    max_residual: float
    points: NDArray[np.complex128]
    residuals: NDArray[np.float64]

    def max_away_from(self, marks, radius: float) -> float:
        """Largest residual at points farther than ``radius`` from every mark."""
        keep = np.ones(self.points.shape, dtype=bool)
        for p in marks:
            keep &= np.abs(self.points - p) > radius
        return float(self.residuals[keep].max()) if keep.any() else 0.0


def verify_schwarz_identity(spec, K: RasterDroplet, r: QuadratureData, n: int = 512) -> SchwarzResidual:
    """Residual of S = r + C^(complement) on boundary samples, where S = zbar.

    For an unbounded domain K rasterises the compact complement. For a
    bounded domain K rasterises clos Omega itself and the complement's
    transform is taken as zbar - C^K, so the residual reads |C^K - r|.
    """
    from .domains import boundary

    pts = boundary(spec, n).points[0][:-1]
    C = cauchy_raster(K, pts)
    rv = r(pts)
    if spec.unbounded:
        res = np.abs(np.conj(pts) - rv - C)
    else:
        res = np.abs(C - rv)
    return SchwarzResidual(float(res.max()), pts, res)


def verify_equilibrium(K: RasterDroplet, Q: NDArray[np.float64], depth: int = 2) -> tuple[float, float]:
    """Median of U^K + Q over K and its largest deviation on cells at least ``depth`` from the edge."""
    if not K.mask.any():
        return 0.0, 0.0
    tot = log_potential_grid(K) + Q
    gamma = float(np.median(tot[K.mask]))
    inner = ndimage.binary_erosion(K.mask, structure=np.ones((3, 3), bool), iterations=depth)
    if not inner.any():
        return gamma, 0.0
    return gamma, float(np.max(np.abs(tot[inner] - gamma)))


# -- rational fitting ------------------------------------------------------

def _linear_fit(z, v, k, deg_p, weights):
    """Least squares p(z) - v q(z) with monic q of degree k, in a scaled variable."""
    cols = [z ** i for i in range(deg_p + 1)] + [-v * z ** i for i in range(k)]
    M = np.stack(cols, axis=1) * weights[:, None]
    rhs = v * z ** k * weights
    norms = np.linalg.norm(M, axis=0)
    norms[norms == 0] = 1.0
    sol, _, rank, sv = np.linalg.lstsq(M / norms, rhs, rcond=None)
    if rank < M.shape[1]:
        raise RankDeficient(f"samples do not determine a model with {k} poles")
    sol = sol / norms
    p = sol[:deg_p + 1]
    q = np.concatenate([sol[deg_p + 1:], [1.0]])
    return p, q


def _sk_fit(z, v, k, deg_p, iters: int = 4):
    w = np.ones(z.size)
    p = q = None
    for _ in range(iters):
        p, q = _linear_fit(z, v, k, deg_p, w)
        qv = np.polynomial.polynomial.polyval(z, q)
        w = 1.0 / np.maximum(np.abs(qv), 1e-300)
    return p, q


def fit_quadrature_function(samples, budget: int, prune: float = 1e-6,
                            poly_budget: int | None = None) -> QuadratureData:
    """Rational least-squares fit of analytic samples, returned as quadrature data.

    Models with k finite poles and a polynomial part of degree j are tried
    for all k + j <= budget; the smallest model whose held-out residual is
    within a factor of the best one wins. Nodes with negligible weight are
    pruned. ``samples`` is a sequence of (z, value) pairs or a pair of arrays.
    """
    z, v = _unpack(samples)
    if z.size < 4:
        raise RankDeficient("need at least four samples")
    center = z.mean()
    scale = float(np.max(np.abs(z - center))) or 1.0
    zs = (z - center) / scale
    vscale = float(np.max(np.abs(v))) or 1.0
    train = np.arange(z.size) % 2 == 0
    test = ~train
    if poly_budget is None:
        poly_budget = budget
    results = []
    for k in range(budget + 1):
        for j in range(min(poly_budget, budget - k) + 1):
            npar = 2 * k + j + 1
            if npar > train.sum():
                continue
            try:
                p, q = _sk_fit(zs[train], v[train], k, k + j)
            except RankDeficient:
                continue
            pred = _ratval(p, q, zs[test])
            err = float(np.max(np.abs(pred - v[test])))
            results.append((err, k + j, k, j))
    if not results:
        raise RankDeficient("no model could be fitted")
    best = min(r[0] for r in results)
    floor = max(best * 4.0, 1e-12 * vscale)
    err, _, k, j = min((r for r in results if r[0] <= floor), key=lambda r: (r[1], r[0]))
    p, q = _sk_fit(zs, v, k, k + j)
    qd = _to_quadrature(p, q, center, scale)
    if k:
        qd = _refine_poles(qd, z, v)
    nodes = tuple(nd for nd in qd.nodes if abs(nd.c) > prune * vscale * max(1.0, scale) ** (nd.m + 1)
                  or is_inf(nd.a) and abs(nd.c) > prune * vscale)
    return QuadratureData(nodes)


def _unpack(samples):
    if isinstance(samples, tuple) and len(samples) == 2 and np.ndim(samples[0]) == 1 and \
            np.size(samples[0]) != 2:
        z, v = samples
    else:
        arr = list(samples)
        z = np.array([s[0] for s in arr])
        v = np.array([s[1] for s in arr])
    return np.asarray(z, dtype=complex), np.asarray(v, dtype=complex)


def _ratval(p, q, z):
    P = np.polynomial.polynomial
    return P.polyval(z, p) / P.polyval(z, q)


def _to_quadrature(p, q, center, scale) -> QuadratureData:
    """Convert a fit in the scaled variable back to the original plane."""
    f = rational(p, q)
    # undo zeta = (z - center)/scale
    zeta = rational([-center / scale, 1 / scale])
    g = f.compose(zeta)
    return partial_fractions(g)


def _refine_poles(qd: QuadratureData, z, v) -> QuadratureData:
    """Variable projection on simple-pole locations; weights solved linearly."""
    finite = [nd for nd in qd.nodes if not is_inf(nd.a)]
    if any(nd.m > 0 for nd in finite):
        return qd
    poles0 = np.array([nd.a for nd in finite])
    pdeg = max([nd.m for nd in qd.nodes if is_inf(nd.a)], default=-1)

    def design(poles):
        cols = [1.0 / (z - a) for a in poles] + [z ** j for j in range(pdeg + 1)]
        return np.stack(cols, axis=1)

    def resid(x):
        poles = x[0::2] + 1j * x[1::2]
        M = design(poles)
        coef, *_ = np.linalg.lstsq(M, v, rcond=None)
        r = M @ coef - v
        return np.concatenate([r.real, r.imag])

    x0 = np.empty(2 * poles0.size)
    x0[0::2], x0[1::2] = poles0.real, poles0.imag
    sol = optimize.least_squares(resid, x0, method="lm", xtol=1e-14, ftol=1e-14)
    if np.linalg.norm(sol.fun) > np.linalg.norm(resid(x0)):
        return qd
    poles = sol.x[0::2] + 1j * sol.x[1::2]
    coef, *_ = np.linalg.lstsq(design(poles), v, rcond=None)
    nodes = [QuadNode(complex(a), 0, complex(math.pi * c)) for a, c in zip(poles, coef[:poles.size])]
    nodes += [QuadNode(INF, j, complex(math.pi * c)) for j, c in enumerate(coef[poles.size:])]
    return QuadratureData(tuple(nodes))


def droplet_samples(K: RasterDroplet, depth: int = 3, stride: int = 4, max_samples: int = 1200):
    """Pairs (z, zbar - C^K(z)) at cells deep inside K, where this equals the quadrature function."""
    inner = ndimage.binary_erosion(K.mask, structure=np.ones((3, 3), bool), iterations=depth)
    jj, ii = np.nonzero(inner)
    sel = ((jj + ii) % stride == 0)
    jj, ii = jj[sel], ii[sel]
    if jj.size > max_samples:
        pick = np.linspace(0, jj.size - 1, max_samples).astype(int)
        jj, ii = jj[pick], ii[pick]
    z = K.origin + K.h * (ii + 0.5) + 1j * K.h * (jj + 0.5)
    C = cauchy_raster(K, z)
    return z, np.conj(z) - C
