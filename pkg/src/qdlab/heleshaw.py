"""Backward Hele-Shaw chains through an obstacle problem.

For a localisation K with Q = |z|^2 - H on K and +inf elsewhere, the droplet of
mass t is the coincidence set of

    V_t = sup{ v subharmonic : v <= Q on K, v(z) <= t log|z|^2 + O(1) }.

On a cell grid this is the complementarity system V <= Q, lap V >= 0,
lap V = 0 off {V = Q}. It is solved with a monotone multigrid cycle whose
smoother is projected red-black Gauss-Seidel (over-relaxation optional).
The growth at infinity enters as Dirichlet data on the box ring: t log|z - s|^2
+ c plus a multipole correction computed from the current measure, with c
calibrated so that the mass (1/4pi) sum lap V h^2 equals t.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit, prange
from numpy.typing import NDArray
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order

from .errors import BoxTooSmall, NonConvergence, PeriodNonzero, PoleInDroplet
from .numerics import INF, Point, RationalFunction, is_inf, partial_fractions
from .raster import RasterDroplet
from .topology import FOUR, EIGHT, fill_holes
from .transforms import log_potential_raster

# -- potential -------------------------------------------------------------


@dataclass(eq=False)
class PotentialField:
    """Q = |z|^2 - H on the localisation mask K0 (+inf elsewhere) on a padded grid."""

    origin: complex
    h: float
    Q: NDArray[np.float64] = field(repr=False)
    h_rat: RationalFunction
    constants: list[float]
    K0: RasterDroplet = field(repr=False)
    center: complex = 0j
    source: Point = INF

    @property
    def ny(self) -> int:
        return self.Q.shape[0]

    @property
    def nx(self) -> int:
        return self.Q.shape[1]

    @property
    def t_max(self) -> float:
        return self.K0.area / math.pi

    def centers(self) -> NDArray[np.complex128]:
        return self.K0.centers()

    def raster(self, mask: NDArray[np.bool_]) -> RasterDroplet:
        return RasterDroplet(self.origin, self.h, mask)

    def obstacle(self, t: float, K: NDArray[np.bool_] | None = None) -> NDArray[np.float64]:
        """Q_t on the grid; a finite source a adds (t0 - t) log(1/|z - a|^2)."""
        mask = self.K0.mask if K is None else K
        Q = np.where(mask, self.Q, np.inf)
        if not is_inf(self.source):
            z = self.centers()
            with np.errstate(divide="ignore"):
                Q = Q + (self.t_max - t) * -np.log(np.abs(z - self.source) ** 2)
        return Q


def _embed(K0: RasterDroplet, box_factor: float, align: int) -> RasterDroplet:
    """Re-grid K0 on a square box box_factor times its extent, sides a multiple of align."""
    jj, ii = np.nonzero(K0.mask)
    if jj.size == 0:
        raise ValueError("empty localisation mask")
    i0, i1, j0, j1 = ii.min(), ii.max(), jj.min(), jj.max()
    span = max(i1 - i0 + 1, j1 - j0 + 1)
    n = max(int(math.ceil(box_factor * span / align)) * align, align)
    oi = (i0 + i1 + 1) // 2 - n // 2
    oj = (j0 + j1 + 1) // 2 - n // 2
    mask = np.zeros((n, n), dtype=bool)
    src = K0.mask[max(oj, 0):oj + n, max(oi, 0):oi + n]
    mask[max(-oj, 0):max(-oj, 0) + src.shape[0], max(-oi, 0):max(-oi, 0) + src.shape[1]] = src
    if mask.sum() != K0.mask.sum():
        raise BoxTooSmall("localisation mask does not fit the box")
    return RasterDroplet(K0.origin + K0.h * complex(oi, oj), K0.h, mask)


def _antiderivative_parts(h_rat: RationalFunction):
    """Split a primitive of h into a single-valued part and logarithmic terms (w_j, a_j)."""
    qd = partial_fractions(h_rat)
    logs = []
    single = []
    for nd in qd.nodes:
        if is_inf(nd.a):
            single.append(("poly", nd.m, nd.c))
        elif nd.m == 0:
            logs.append((nd.c / math.pi, nd.a))
        else:
            single.append(("pole", nd.m, nd.c, nd.a))

    def F(z):
        out = np.zeros_like(z, dtype=complex)
        for term in single:
            if term[0] == "poly":
                _, m, c = term
                out += c / math.pi * z ** (m + 1) / (m + 1)
            else:
                _, m, c, a = term
                out += c / math.pi * math.factorial(m) * (z - a) ** (-m) / (-m)
        return out

    poles = [nd.a for nd in qd.nodes if not is_inf(nd.a)]
    return F, logs, poles


@njit(cache=True)
def _accumulate(order, pred, inc, root_val, out):
    out[order[0]] = root_val
    for k in range(1, order.size):
        v = order[k]
        out[v] = out[pred[v]] + inc[v]


def build_potential(h_rat: RationalFunction, K0: RasterDroplet, box_factor: float = 2.0,
                    align: int = 64, source: Point = INF, period_tol: float = 1e-6) -> PotentialField:
    """Q = |z|^2 - H with dH/dz = h on K0, one additive constant per component of K0.

    Logarithmic terms of the primitive are continued along a breadth-first
    spanning tree of each component; every non-tree edge then closes a loop
    whose period Re of the integral of h must vanish.
    """
    K = _embed(K0, box_factor, align)
    F, logs, poles = _antiderivative_parts(h_rat)
    z = K.centers()
    for p in poles:
        j, i = K.index_of(p)
        near = K.mask[max(j - 1, 0):j + 2, max(i - 1, 0):i + 2]
        if 0 <= j < K.ny and 0 <= i < K.nx and near.any():
            raise PoleInDroplet(f"pole of h at {p} lies in the droplet")
    lab, ncomp = ndimage.label(K.mask, structure=FOUR)
    idx = -np.ones(K.mask.shape, dtype=np.int64)
    cells = np.flatnonzero(K.mask)
    idx.flat[cells] = np.arange(cells.size)
    zc = z.flat[cells]
    # 4-neighbour edges inside K
    right = K.mask[:, :-1] & K.mask[:, 1:]
    up = K.mask[:-1, :] & K.mask[1:, :]
    ea = np.concatenate([idx[:, :-1][right], idx[:-1, :][up]])
    eb = np.concatenate([idx[:, 1:][right], idx[1:, :][up]])

    def log_inc(u, v):
        out = np.zeros(u.size, dtype=complex)
        for w, a in logs:
            out += w * np.log((zc[v] - a) / (zc[u] - a))
        return out

    L = np.zeros(cells.size, dtype=complex)
    if logs:
        G = coo_matrix((np.ones(ea.size), (ea, eb)), shape=(cells.size, cells.size)).tocsr()
        comp_of = lab.flat[cells]
        seen = np.zeros(ncomp + 1, dtype=bool)
        for root in range(cells.size):
            c = comp_of[root]
            if seen[c]:
                continue
            seen[c] = True
            order, pred = breadth_first_order(G, root, directed=False, return_predecessors=True)
            inc = np.zeros(cells.size, dtype=complex)
            child = order[1:]
            inc[child] = log_inc(pred[child], child)
            root_val = sum(w * np.log(zc[root] - a) for w, a in logs)
            _accumulate(order, pred, inc, complex(root_val), L)
        mismatch = np.abs(2 * np.real(L[eb] - L[ea] - log_inc(ea, eb))) if ea.size else np.zeros(0)
        if mismatch.size and mismatch.max() > period_tol:
            raise PeriodNonzero(f"Re of a period of h is {mismatch.max() / 2:.3g}")
    Hraw = 2 * np.real(F(zc) + L)
    # one constant per component from |z_l|^2 - H(z_l) + U^K(z_l) = 0 at its deepest cell
    depth = ndimage.distance_transform_edt(K.mask)
    H = np.zeros(K.mask.shape)
    H.flat[cells] = Hraw
    constants = []
    for c in range(1, ncomp + 1):
        comp = lab == c
        k = int(np.argmax(np.where(comp, depth, -1)))
        zl = complex(z.flat[k])
        U = float(log_potential_raster(K, np.array([zl]))[0])
        kappa = abs(zl) ** 2 + U - H.flat[k]
        H[comp] += kappa
        constants.append(float(kappa))
    Q = np.where(K.mask, np.abs(z) ** 2 - H, np.inf)
    center = K.origin + K.h * complex(K.nx, K.ny) / 2
    return PotentialField(K.origin, K.h, Q, h_rat, constants, K, center, source)


# -- multigrid obstacle solver ---------------------------------------------


@njit(parallel=True, cache=True)
def _pgs(e, r, chi, fixed, h2, nsweeps, omega):
    ny, nx = e.shape
    for _ in range(nsweeps):
        for color in range(2):
            for j in prange(1, ny - 1):
                for i in range(1 + ((j + color) & 1), nx - 1, 2):
                    if fixed[j, i]:
                        continue
                    v = 0.25 * (e[j, i - 1] + e[j, i + 1] + e[j - 1, i] + e[j + 1, i] + h2 * r[j, i])
                    v = e[j, i] + omega * (v - e[j, i])
                    c = chi[j, i]
                    e[j, i] = c if v > c else v


@njit(parallel=True, cache=True)
def _restrict(e, r, chi, fixed, h2):
    ny, nx = e.shape
    my, mx = ny // 2, nx // 2
    rH = np.zeros((my, mx))
    chiH = np.full((my, mx), np.inf)
    fH = np.zeros((my, mx), np.bool_)
    for J in prange(my):
        for I in range(mx):
            for dj in range(2):
                for di in range(2):
                    j = 2 * J + dj
                    i = 2 * I + di
                    if fixed[j, i] or j == 0 or i == 0 or j == ny - 1 or i == nx - 1:
                        fH[J, I] = True
                        continue
                    res = r[j, i] - (4 * e[j, i] - e[j, i - 1] - e[j, i + 1] - e[j - 1, i] - e[j + 1, i]) / h2
                    rH[J, I] += 0.25 * res
                    room = chi[j, i] - e[j, i]
                    if room < chiH[J, I]:
                        chiH[J, I] = room
    return rH, chiH, fH


@njit(parallel=True, cache=True)
def _prolong_add(e, eH):
    ny, nx = e.shape
    for j in prange(ny):
        for i in range(nx):
            e[j, i] += eH[j // 2, i // 2]


@njit(parallel=True, cache=True)
def _max_abs_diff(a, b):
    ny, nx = a.shape
    row = np.zeros(ny)
    for j in prange(ny):
        m = 0.0
        for i in range(nx):
            d = abs(a[j, i] - b[j, i])
            if d > m:
                m = d
        row[j] = m
    return row.max()


def _vcycle(e, r, chi, fixed, h, nu=2, omega=1.0):
    n = min(e.shape)
    if n <= 16 or e.shape[0] % 2 or e.shape[1] % 2:
        _pgs(e, r, chi, fixed, h * h, 200, omega)
        return
    _pgs(e, r, chi, fixed, h * h, nu, omega)
    rH, chiH, fH = _restrict(e, r, chi, fixed, h * h)
    eH = np.zeros_like(rH)
    _vcycle(eH, rH, chiH, fH, 2 * h, nu, omega)
    _prolong_add(e, eH)
    _pgs(e, r, chi, fixed, h * h, nu, omega)


def solve_obstacle_dirichlet(V: NDArray[np.float64], chi: NDArray[np.float64], fixed: NDArray[np.bool_],
                             h: float, tol: float, max_cycles: int = 300, omega: float = 1.0) -> tuple[int, float]:
    """Solve V <= chi, lap V >= 0, complementarity, with V held on ``fixed`` cells (in place)."""
    r = np.zeros_like(V)
    d = np.inf
    prev = V.copy()
    for k in range(1, max_cycles + 1):
        _vcycle(V, r, chi, fixed, h, 2, omega)
        d = _max_abs_diff(V, prev)
        if d <= tol:
            return k, d
        prev[...] = V
    raise NonConvergence(f"obstacle solve stalled at update {d:.3g}", residuals=[d])


def discrete_laplacian(V: NDArray[np.float64], h: float) -> NDArray[np.float64]:
    lap = np.zeros_like(V)
    lap[1:-1, 1:-1] = (V[1:-1, :-2] + V[1:-1, 2:] + V[:-2, 1:-1] + V[2:, 1:-1] - 4 * V[1:-1, 1:-1]) / h ** 2
    return lap


@dataclass
class ObstacleResult:
    t: float
    V: NDArray[np.float64] = field(repr=False)
    coincidence: RasterDroplet = field(repr=False)
    droplet: RasterDroplet = field(repr=False)
    c: float
    mass: float
    cycles: int
    calibration_steps: int
    complementarity: dict = field(default_factory=dict)


class _Boundary:
    """Dirichlet data t log|z - s|^2 + c - 2 Re sum_k M_k / (k (z - s)^k) on the box ring."""

    def __init__(self, P: PotentialField, K: NDArray[np.bool_]):
        ny, nx = P.Q.shape
        ring = np.zeros((ny, nx), dtype=bool)
        ring[0] = ring[-1] = True
        ring[:, 0] = ring[:, -1] = True
        self.ring = ring
        z = P.centers()
        self.s = P.center
        self.zr = z[ring] - self.s
        rk = float(np.max(np.abs(z[K] - self.s)))
        rb = float(np.min(np.abs(self.zr)))
        self.ratio = rk / rb
        if self.ratio > 0.8:
            raise BoxTooSmall(f"support radius / box radius = {self.ratio:.2f} exceeds 0.8")
        self.kmax = int(min(60, max(4, math.ceil(math.log(1e-12) / math.log(self.ratio)))))
        self.zk = z[K] - self.s

    def values(self, t: float, c: float, moments: NDArray[np.complex128]) -> NDArray[np.float64]:
        g = t * np.log(np.abs(self.zr) ** 2) + c
        inv = 1.0 / self.zr
        p = inv.copy()
        for k in range(1, moments.size):
            g -= 2 * np.real(moments[k] * p) / k
            p *= inv
        return g

    def moments(self, mu: NDArray[np.float64]) -> NDArray[np.complex128]:
        out = np.zeros(self.kmax + 1, dtype=complex)
        w = np.ones_like(self.zk)
        for k in range(self.kmax + 1):
            out[k] = np.sum(mu * w)
            w = w * self.zk
        return out


def obstacle_solve(P: PotentialField, t: float, K: NDArray[np.bool_] | None = None,
                   tol: float = 1e-10, mass_rtol: float = 1e-5, max_calibration: int = 40,
                   warm: ObstacleResult | None = None, omega: float = 1.0) -> ObstacleResult:
    """V_t and the coincidence set {V_t = Q} for 0 < t <= A(K)/pi."""
    Kmask = P.K0.mask if K is None else np.asarray(K, dtype=bool)
    tmax = Kmask.sum() * P.h ** 2 / math.pi
    if not 0 < t <= tmax * (1 + 1e-12):
        raise ValueError(f"t must lie in (0, {tmax:.6g}]")
    chi = P.obstacle(t, Kmask)
    bnd = _Boundary(P, Kmask)
    h = P.h
    z = P.centers()
    scale = max(1.0, float(np.max(np.abs(chi[Kmask]))))
    logz = t * np.log(np.maximum(np.abs(z - bnd.s), h) ** 2)
    fixed = bnd.ring.copy()
    moments = np.zeros(bnd.kmax + 1, dtype=complex)
    moments[0] = t

    def measure(V):
        lap = discrete_laplacian(V, h)
        return lap * h * h / (4 * math.pi)

    def run(c, V, tol_inner):
        V[bnd.ring] = bnd.values(t, c, moments)
        cyc, _ = solve_obstacle_dirichlet(V, chi, fixed, h, tol_inner * scale, omega=omega)
        return cyc

    if warm is not None:
        c = warm.c
        V = np.minimum(warm.V, chi)
    else:
        c = float(np.min(chi[Kmask] - logz[Kmask]))
        V = np.minimum(logz + c, chi)
    cycles = 0
    hist: list[tuple[float, float]] = []
    steps = 0
    mass = 0.0
    loose = max(tol, 1e-8)
    for steps in range(1, max_calibration + 1):
        cycles += run(c, V, loose)
        mu = measure(V)
        mass = float(mu[1:-1, 1:-1].sum())
        moments = bnd.moments(mu[Kmask])
        moments[0] = t
        hist.append((c, mass - t))
        if abs(mass - t) <= mass_rtol * t:
            break
        c_new = _next_c(hist, t)
        V += c_new - c
        np.minimum(V, chi, out=V)
        c = c_new
    else:
        raise NonConvergence(f"mass calibration failed: mass {mass:.6g} for t = {t:.6g}",
                             residuals=[abs(mass - t)])
    cycles += run(c, V, tol)
    mu = measure(V)
    mass = float(mu[1:-1, 1:-1].sum())
    coin = Kmask & (V >= chi)
    Kstar = P.raster(coin)
    drop = droplet_from_coincidence(Kstar)
    lap = discrete_laplacian(V, h)
    inner = ~bnd.ring
    comp = {
        "max_above_obstacle": float(np.max(np.where(Kmask, V - chi, -np.inf))),
        "min_laplacian": float(lap[inner].min()),
        "max_abs_laplacian_off_contact": float(np.max(np.abs(np.where(inner & ~coin, lap, 0.0)))),
        "box_ratio": bnd.ratio,
    }
    return ObstacleResult(t, V, Kstar, drop, c, mass, cycles, steps, comp)


def _next_c(hist, t):
    """Secant on the mass defect with bracketing; the mass grows with c."""
    c, f = hist[-1]
    lo = [h for h in hist if h[1] < 0]
    hi = [h for h in hist if h[1] > 0]
    if lo and hi:
        cl, fl = max(lo, key=lambda p: p[0])
        ch, fh = min(hi, key=lambda p: p[0])
        cs = cl - fl * (ch - cl) / (fh - fl)
        # keep strictly inside the bracket; fall back to bisection near its ends
        if not (cl + 0.05 * (ch - cl) < cs < ch - 0.05 * (ch - cl)):
            cs = 0.5 * (cl + ch)
        return cs
    if len(hist) >= 2:
        (c0, f0), (c1, f1) = hist[-2], hist[-1]
        if f1 != f0:
            cs = c1 - f1 * (c1 - c0) / (f1 - f0)
            step = cs - c1
            lim = max(abs(c1 - c0) * 4, 0.1 * t)
            return c1 + max(-lim, min(lim, step))
    # first step: the mass responds to c at roughly unit rate
    return c - f


# -- droplets, chains ------------------------------------------------------


def droplet_from_coincidence(Kstar: RasterDroplet) -> RasterDroplet:
    """Drop isolated cells and one-cell filaments from a coincidence set.

    A 2x2 opening keeps every cell that lies in a full 2x2 block; cells with at
    least two 4-neighbours in the opened set are then restored. Finally a
    component with no cell whose 3x3 neighbourhood is inside the set (a strip
    at most two cells wide, typically left at a tangential contact) is dropped.
    """
    m = Kstar.mask
    opened = ndimage.binary_opening(m, structure=np.ones((2, 2), bool))
    pad = np.pad(opened, 1)
    nbrs = pad[:-2, 1:-1].astype(int) + pad[2:, 1:-1] + pad[1:-1, :-2] + pad[1:-1, 2:]
    keep = opened | (m & (nbrs >= 2))
    lab, n = ndimage.label(keep, structure=FOUR)
    if n:
        core = ndimage.binary_erosion(keep, structure=EIGHT)
        alive = np.zeros(n + 1, bool)
        alive[np.unique(lab[core])] = True
        alive[0] = False
        keep = alive[lab]
    return Kstar.with_mask(keep)


def perimeter(K: RasterDroplet) -> float:
    """Length of the marching-squares boundary of K."""
    from skimage import measure

    tot = 0.0
    for c in measure.find_contours(np.pad(K.mask, 1).astype(float), 0.5):
        tot += float(np.sum(np.hypot(np.diff(c[:, 0]), np.diff(c[:, 1]))))
    return tot * K.h


def area_law_ok(K: RasterDroplet, t: float) -> tuple[bool, float, float]:
    err = abs(K.area - math.pi * t)
    allowed = 4 * K.h * perimeter(K)
    return err <= allowed, err, allowed


@dataclass
class ChainRecord:
    times: list[float]
    droplets: list[RasterDroplet] = field(repr=False)
    coincidence: list[RasterDroplet] = field(repr=False)
    source: Point = INF
    results: list[ObstacleResult] = field(default_factory=list, repr=False)

    @property
    def areas(self) -> list[float]:
        return [K.area for K in self.droplets]

    @property
    def component_counts(self) -> list[int]:
        return [int(ndimage.label(K.mask, structure=FOUR)[1]) for K in self.droplets]

    @property
    def singular_flags(self) -> list[bool]:
        """True where the component count differs from the previous recorded time."""
        cc = self.component_counts
        return [False] + [cc[i] != cc[i - 1] for i in range(1, len(cc))]

    def monotonicity_violations(self) -> list[int]:
        """Cells of K_{t_i} missing from K_{t_{i+1}}, per consecutive pair."""
        return [int(np.sum(a.mask & ~b.mask)) for a, b in zip(self.droplets, self.droplets[1:])]

    def extra_coincidence_cells(self) -> list[int]:
        return [int(np.sum(s.mask & ~k.mask)) for s, k in zip(self.coincidence, self.droplets)]

    def strong_monotonicity(self, gap_cells: float = 10) -> list[bool]:
        """Hull of K_{t_i} inside the eroded hull of K_{t_j} when t_j - t_i exceeds gap_cells cell areas / pi."""
        out = []
        for i, a in enumerate(self.droplets):
            for j in range(i + 1, len(self.droplets)):
                b = self.droplets[j]
                if (self.times[j] - self.times[i]) * math.pi > gap_cells * a.h ** 2:
                    inner = ndimage.binary_erosion(fill_holes(b.mask), structure=FOUR)
                    out.append(bool(np.all(inner[fill_holes(a.mask)])))
        return out

    def manifest(self) -> dict:
        return {"schema": 1, "times": self.times, "areas": self.areas,
                "components": self.component_counts, "singular": self.singular_flags,
                "source": "infinity" if is_inf(self.source) else [self.source.real, self.source.imag]}

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for i, (K, S) in enumerate(zip(self.droplets, self.coincidence)):
            K.save(d / f"droplet_{i:03d}")
            S.save(d / f"coincidence_{i:03d}")
        (d / "manifest.json").write_text(json.dumps(self.manifest(), indent=1, sort_keys=True))


def chain(P: PotentialField, times, K: NDArray[np.bool_] | None = None, source: Point | None = None,
          tol: float = 1e-10) -> ChainRecord:
    """Droplets K_t for ascending times, each warm-started from the previous solve."""
    times = [float(t) for t in times]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("times must be strictly ascending")
    if source is not None:
        P = PotentialField(P.origin, P.h, P.Q, P.h_rat, P.constants, P.K0, P.center, source)
    drops, coins, res = [], [], []
    warm = None
    for t in times:
        r = obstacle_solve(P, t, K, tol=tol, warm=warm)
        drops.append(r.droplet)
        coins.append(r.coincidence)
        res.append(r)
        warm = r
    return ChainRecord(times, drops, coins, P.source, res)


def perturb_to_nonsingular(P: PotentialField, dt: float | None = None,
                           K: NDArray[np.bool_] | None = None) -> ObstacleResult:
    """Back the chain up from t0 = A(K)/pi by dt (default 20 cell areas / pi)."""
    Kmask = P.K0.mask if K is None else K
    t0 = Kmask.sum() * P.h ** 2 / math.pi
    if dt is None:
        dt = 20 * P.h ** 2 / math.pi
    return obstacle_solve(P, t0 - dt, Kmask)
