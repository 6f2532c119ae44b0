"""Raster topology and executable forms of the connectivity and oval bounds.

The raster Jordan-curve convention: K is 4-connected and its complement is
8-connected. The cells outside the grid belong to the unbounded complement
component, which carries label 0 and contains infinity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage
from skimage.measure import find_contours

from .errors import KindDomainMismatch, PinchDetected
from .numerics import QuadratureData
from .raster import RasterDroplet

FOUR = ndimage.generate_binary_structure(2, 1)
EIGHT = ndimage.generate_binary_structure(2, 2)

# a-priori bound on the number of boundary curves, recorded but not derived here
def oval_count_apriori(d: int) -> int:
    return 2 * d * d + d + 1


def set_labels(K: RasterDroplet) -> tuple[NDArray[np.int32], int]:
    """4-connected components of K (labels 1..n, 0 off K)."""
    lab, n = ndimage.label(K.mask, structure=FOUR)
    return lab, int(n)


def complement_labels(K: RasterDroplet) -> tuple[NDArray[np.int32], int]:
    """8-connected complement components; -1 on K, 0 for the unbounded one.

    Returns the labels and q, the number of components including the unbounded one.
    """
    padded = np.pad(~K.mask, 1, constant_values=True)
    lab, n = ndimage.label(padded, structure=EIGHT)
    outer = lab[0, 0]
    out = np.full(padded.shape, -1, dtype=np.int32)
    nxt = 1
    remap = {}
    for k in range(1, n + 1):
        if k == outer:
            remap[k] = 0
        else:
            remap[k] = nxt
            nxt += 1
    table = np.array([-1] + [remap[k] for k in range(1, n + 1)], dtype=np.int32)
    out = table[lab]
    return out[1:-1, 1:-1], int(n)


def label_components(K: RasterDroplet, connectivity: str = "set") -> tuple[NDArray[np.int32], int]:
    """``"set"`` labels K with 4-connectivity, ``"complement"`` its complement with 8."""
    if connectivity in ("set", "4"):
        return set_labels(K)
    if connectivity in ("complement", "8"):
        return complement_labels(K)
    raise ValueError(f"unknown connectivity {connectivity!r}")


def diagonal_saddles(mask: NDArray[np.bool_]) -> NDArray[np.bool_]:
    """Lower-left corners of 2x2 blocks whose set cells touch only diagonally."""
    a = mask[:-1, :-1]
    b = mask[:-1, 1:]
    c = mask[1:, :-1]
    d = mask[1:, 1:]
    return (a & d & ~b & ~c) | (b & c & ~a & ~d)


def component_connectivity(lab: NDArray[np.int32], k: int) -> int:
    """conn of complement component k: the number of components of its complement in the sphere."""
    if k == 0:
        other = lab != 0
        _, n = ndimage.label(other, structure=FOUR)
        return int(n)
    region = lab == k
    sl = ndimage.find_objects(region.astype(np.int32))[0]
    sub = region[sl]
    sub = np.pad(sub, 1, constant_values=False)
    _, n = ndimage.label(~sub, structure=FOUR)
    return int(n)


def _grid_to_plane(K: RasterDroplet, contour: NDArray[np.float64], pad: int = 1) -> NDArray[np.complex128]:
    rows = contour[:, 0] - pad
    cols = contour[:, 1] - pad
    return K.origin + K.h * (cols + 0.5) + 1j * K.h * (rows + 0.5)


def extract_ovals(K: RasterDroplet, allow_pinch: bool = False) -> list[NDArray[np.complex128]]:
    """Boundary curves of K as closed polylines (marching squares at level 1/2)."""
    if not allow_pinch and diagonal_saddles(K.mask).any():
        raise PinchDetected("mask has cells touching only at a corner")
    padded = np.pad(K.mask.astype(float), 1)
    cs = find_contours(padded, 0.5, fully_connected="low")
    return [_grid_to_plane(K, c) for c in cs]


def complement_contours(K: RasterDroplet, label: int) -> list[NDArray[np.complex128]]:
    """Boundary curves of one complement component, oriented with the component on the left."""
    lab, _ = complement_labels(K)
    region = np.pad(lab == label, 1, constant_values=(label == 0))
    cs = find_contours(region.astype(float), 0.5, fully_connected="high")
    out = []
    for c in cs:
        z = _grid_to_plane(K, c)
        out.append(z if _left_is(region, c) else z[::-1])
    return out


def _left_is(region: NDArray[np.bool_], c: NDArray[np.float64]) -> bool:
    """Whether the cells just left of the contour's longest step lie in ``region``."""
    d = np.diff(c, axis=0)
    k = int(np.argmax(np.hypot(d[:, 0], d[:, 1])))
    mid = (c[k] + c[k + 1]) / 2
    # left of direction (dr, dc) in (row=y, col=x) coordinates is (dc, -dr) rotated: (+dr->-x)
    dr, dc = d[k]
    left = mid + 0.5 * np.array([dc, -dr]) / max(np.hypot(dr, dc), 1e-12)
    r, s = int(round(left[0])), int(round(left[1]))
    r = min(max(r, 0), region.shape[0] - 1)
    s = min(max(s, 0), region.shape[1] - 1)
    return bool(region[r, s])


@dataclass
class TopologyReport:
    n_ovals: int
    q: int
    q_hist: dict[int, int]
    conn: list[int]
    k_components: int
    ovals: list = field(default_factory=list, repr=False)

    @property
    def q_odd(self) -> int:
        return sum(v for j, v in self.q_hist.items() if j % 2 == 1)

    @property
    def q1(self) -> int:
        return self.q_hist.get(1, 0)

    def consistent(self) -> bool:
        """q = sum q_j, #ovals = sum j q_j and q_odd <= q."""
        return (self.q == sum(self.q_hist.values())
                and self.n_ovals == sum(j * v for j, v in self.q_hist.items())
                and self.q_odd <= self.q)

    def to_json(self) -> dict:
        return {"ovals": self.n_ovals, "q": self.q, "q_hist": {str(k): v for k, v in sorted(self.q_hist.items())},
                "q_odd": self.q_odd, "conn": self.conn, "components": self.k_components}


def topology_report(K: RasterDroplet, allow_pinch: bool = False) -> TopologyReport:
    ovals = extract_ovals(K, allow_pinch=allow_pinch)
    lab, q = complement_labels(K)
    conn = [component_connectivity(lab, k) for k in range(q)]
    hist: dict[int, int] = {}
    for c in conn:
        hist[c] = hist.get(c, 0) + 1
    _, nk = set_labels(K)
    return TopologyReport(len(ovals), q, hist, conn, nk, ovals)


# -- bound checkers --------------------------------------------------------

@dataclass(frozen=True)
class Verdict:
    passed: bool
    value: int
    bound: int
    binding: str
    slack: int

    def to_json(self) -> dict:
        return {"passed": self.passed, "value": self.value, "bound": self.bound,
                "binding": self.binding, "slack": self.slack}


KINDS = ("UQD", "UQD-node-at-inf", "BQD", "BQD-no-triple-nodes")


def check_theorem_A(d: int, n: int, kind: str, conn: int) -> Verdict:
    """Connectivity bound for a quadrature domain of order d with n distinct nodes.

    Below the order threshold (d < 2 unbounded, d < 3 bounded) the domain
    must be simply connected and that is what is checked.
    """
    if kind not in KINDS:
        raise KindDomainMismatch(f"unknown kind {kind!r}")
    if d < 0 or n < 0 or n > max(d, 0) + (1 if kind.startswith("UQD") else 0) or conn < 1:
        raise KindDomainMismatch(f"inconsistent data d={d}, n={n}, conn={conn}")
    if kind.startswith("BQD") and (d < 1 or n < 1):
        raise KindDomainMismatch("a bounded quadrature domain has at least one node")
    if kind == "UQD-node-at-inf" and n < 1:
        raise KindDomainMismatch("node at infinity claimed but n = 0")
    threshold = 2 if kind.startswith("UQD") else 3
    if d < threshold:
        bounds = [(1, "simply connected below order threshold")]
    elif kind == "UQD":
        bounds = [(d + n - 1, "d+n-1"), (2 * d - 2, "2d-2")]
    elif kind == "UQD-node-at-inf":
        bounds = [(d + n - 2, "d+n-2"), (2 * d - 2, "2d-2")]
    elif kind == "BQD":
        bounds = [(d + n - 2, "d+n-2"), (2 * d - 4, "2d-4")]
    else:
        bounds = [(d + n - 3, "d+n-3"), (2 * d - 4, "2d-4")]
    bound, name = min(bounds, key=lambda b: b[0])
    return Verdict(conn <= bound, conn, bound, name, bound - conn)


def kind_for(qd: QuadratureData, bounded: bool) -> str:
    if bounded:
        orders: dict = {}
        for nd in qd.finite_nodes():
            orders[nd.a] = max(orders.get(nd.a, 0), nd.m + 1)
        return "BQD" if any(v >= 3 for v in orders.values()) else "BQD-no-triple-nodes"
    return "UQD-node-at-inf" if qd.has_node_at_infinity else "UQD"


@dataclass(frozen=True)
class OvalVerdict:
    passed: bool
    lhs: int
    bound: int
    slack: int
    ovals_bound: int | None
    ovals_slack: int | None

    def to_json(self) -> dict:
        return {"passed": self.passed, "lhs": self.lhs, "bound": self.bound, "slack": self.slack,
                "ovals_bound": self.ovals_bound, "ovals_slack": self.ovals_slack}


def check_ovals_bound(report: TopologyReport, d: int) -> OvalVerdict:
    """#ovals + q_odd + 4(q - q_1) <= 2d + 2, and #ovals <= 2d - 2 when d >= 3."""
    lhs = report.n_ovals + report.q_odd + 4 * (report.q - report.q1)
    bound = 2 * d + 2
    ok = lhs <= bound
    ob = os_ = None
    if d >= 3:
        ob = 2 * d - 2
        os_ = ob - report.n_ovals
        ok = ok and os_ >= 0
    return OvalVerdict(ok, lhs, bound, bound - lhs, ob, os_)


def minimal_degree(report: TopologyReport) -> int:
    """Smallest degree the oval inequality allows for this configuration.

    A complement component of connectivity 1 needs order >= 1 (the unbounded one
    order >= 0) and one of connectivity k >= 2 needs 3 + floor((k-1)/2); summing
    with the unbounded component counted one lower gives d + 1 >= sum.
    """
    tot = 0
    for k, v in report.q_hist.items():
        tot += v * (1 if k == 1 else 3 + (k - 1) // 2)
    return max(tot - 1, 0)


def packing_check(scenario: str, m: int, c: int) -> Verdict:
    """Interior-component bound for m tangent discs (2m-2) or cardioids (3m) in a quadrature domain."""
    if scenario == "discs-in-disc":
        bound, name = 2 * m - 2, "2m-2"
    elif scenario == "cardioids-in-ellipse":
        bound, name = 3 * m, "3m"
    else:
        raise ValueError(f"unknown packing scenario {scenario!r}")
    return Verdict(c <= bound, c, bound, name, bound - c)


# -- helpers shared with the flow solver ----------------------------------

def interior_components(K: RasterDroplet) -> int:
    """Number of 4-connected components of K after removing cells that touch the complement.

    Raster stand-in for the components of int K: a tangency point between two
    discs becomes a neck of width at most a couple of cells, which the
    one-cell erosion cuts.
    """
    inner = ndimage.binary_erosion(K.mask, structure=FOUR)
    _, n = ndimage.label(inner, structure=FOUR)
    return int(n)


def fill_holes(mask: NDArray[np.bool_]) -> NDArray[np.bool_]:
    """Polynomial hull on the grid: K plus every bounded complement component."""
    return ndimage.binary_fill_holes(mask, structure=EIGHT)


def _common_grid(A: RasterDroplet, B: RasterDroplet) -> tuple[RasterDroplet, RasterDroplet]:
    d = (B.origin - A.origin) / A.h
    di, dj = round(d.real), round(d.imag)
    if abs(d - complex(di, dj)) > 1e-6:
        raise ValueError("grids are not aligned to whole cells")
    i0, j0 = min(0, di), min(0, dj)
    i1 = max(A.mask.shape[1], di + B.mask.shape[1])
    j1 = max(A.mask.shape[0], dj + B.mask.shape[0])
    out = []
    for K, oi, oj in ((A, 0, 0), (B, di, dj)):
        m = np.zeros((j1 - j0, i1 - i0), dtype=bool)
        m[oj - j0:oj - j0 + K.mask.shape[0], oi - i0:oi - i0 + K.mask.shape[1]] = K.mask
        out.append(RasterDroplet(A.origin + A.h * complex(i0, j0), A.h, m))
    return out[0], out[1]


def hausdorff(A: RasterDroplet, B: RasterDroplet) -> float:
    """Hausdorff distance between the cell-centre sets of two masks.

    The grids must share h and differ by a whole number of cells.
    """
    if A.h != B.h:
        raise ValueError("masks must share a cell size")
    if A.mask.shape != B.mask.shape or A.origin != B.origin:
        A, B = _common_grid(A, B)
    if not A.mask.any() or not B.mask.any():
        return float("inf") if (A.mask.any() or B.mask.any()) else 0.0
    dB = ndimage.distance_transform_edt(~B.mask)
    dA = ndimage.distance_transform_edt(~A.mask)
    return float(max(dB[A.mask].max(), dA[B.mask].max())) * A.h


def oval_tree(K: RasterDroplet) -> str:
    """Canonical rooted-tree string of the nesting of K components and complement components.

    The root is the unbounded complement component; children are the regions
    adjacent to a region and enclosed by it.
    """
    lab, q = complement_labels(K)
    klab, nk = set_labels(K)
    # region graph: complement component c -> K components adjacent to it and vice versa
    adj: dict[tuple[str, int], set] = {}
    shifts = [(0, 1), (1, 0), (0, -1), (-1, 0)]
    for dj, di in shifts:
        a = np.roll(lab, (dj, di), axis=(0, 1))
        b = klab
        sel = (a >= 0) & (b > 0)
        for c, k in set(zip(a[sel].tolist(), b[sel].tolist())):
            adj.setdefault(("c", c), set()).add(("k", k))
            adj.setdefault(("k", k), set()).add(("c", c))
    # breadth-first from the unbounded component gives the nesting tree
    root = ("c", 0)
    parent = {root: None}
    order = [root]
    for node in order:
        for nb in sorted(adj.get(node, ())):
            if nb not in parent:
                parent[nb] = node
                order.append(nb)

    def enc(node) -> str:
        kids = sorted(enc(c) for c in parent if parent[c] == node)
        return "(" + "".join(kids) + ")"

    return enc(root)


def report_json(report: TopologyReport) -> str:
    return json.dumps(report.to_json(), sort_keys=True)
