"""Boolean cell grids carrying compact sets of the plane."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True, eq=False)
class RasterDroplet:
    """Cells of size h; cell (j, i) has centre origin + h*(i + 1/2) + 1j*h*(j + 1/2).

    ``origin`` is the lower-left corner of the box. The mask is indexed
    [row j (y), column i (x)].
    """

    origin: complex
    h: float
    mask: NDArray[np.bool_] = field(repr=False)

    def __post_init__(self):
        m = np.ascontiguousarray(self.mask, dtype=bool)
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)
        if self.h <= 0:
            raise ValueError("cell size must be positive")

    @property
    def ny(self) -> int:
        return self.mask.shape[0]

    @property
    def nx(self) -> int:
        return self.mask.shape[1]

    @property
    def area(self) -> float:
        return float(self.mask.sum()) * self.h ** 2

    def x(self) -> NDArray[np.float64]:
        return self.origin.real + self.h * (np.arange(self.nx) + 0.5)

    def y(self) -> NDArray[np.float64]:
        return self.origin.imag + self.h * (np.arange(self.ny) + 0.5)

    def centers(self) -> NDArray[np.complex128]:
        X, Y = np.meshgrid(self.x(), self.y())
        return X + 1j * Y

    def with_mask(self, mask: NDArray[np.bool_]) -> "RasterDroplet":
        return RasterDroplet(self.origin, self.h, mask)

    def has_margin(self) -> bool:
        m = self.mask
        return not (m[0].any() or m[-1].any() or m[:, 0].any() or m[:, -1].any())

    def index_of(self, z: complex) -> tuple[int, int]:
        i = int(np.floor((z.real - self.origin.real) / self.h))
        j = int(np.floor((z.imag - self.origin.imag) / self.h))
        return j, i

    def header(self) -> dict:
        return {"origin": [self.origin.real, self.origin.imag], "h": self.h,
                "nx": self.nx, "ny": self.ny}

    def save(self, stem: str | Path) -> None:
        """Write ``stem.pgm`` (binary P5, 255 = in K, top row = largest y) and ``stem.json``."""
        stem = Path(stem)
        img = np.where(self.mask[::-1], 255, 0).astype(np.uint8)
        with open(stem.with_suffix(".pgm"), "wb") as fh:
            fh.write(f"P5\n{self.nx} {self.ny}\n255\n".encode())
            fh.write(img.tobytes())
        stem.with_suffix(".json").write_text(json.dumps(self.header(), sort_keys=True))

    @staticmethod
    def load(stem: str | Path) -> "RasterDroplet":
        stem = Path(stem)
        hdr = json.loads(stem.with_suffix(".json").read_text())
        raw = stem.with_suffix(".pgm").read_bytes()
        parts = raw.split(b"\n", 3)
        nx, ny = (int(v) for v in parts[1].split())
        img = np.frombuffer(parts[3], dtype=np.uint8).reshape(ny, nx)
        return RasterDroplet(complex(*hdr["origin"]), float(hdr["h"]), img[::-1] > 127)


def grid_for_box(lo: complex, hi: complex, h: float, margin: int = 2) -> tuple[complex, int, int]:
    """Origin and dimensions of a cell grid covering [lo, hi] with a margin of cells."""
    x0 = np.floor(lo.real / h) * h - margin * h
    y0 = np.floor(lo.imag / h) * h - margin * h
    nx = int(np.ceil((hi.real - x0) / h)) + margin
    ny = int(np.ceil((hi.imag - y0) / h)) + margin
    return complex(x0, y0), nx, ny


def rasterize(inside: Callable[[NDArray[np.complex128]], NDArray[np.bool_]],
              lo: complex, hi: complex, h: float, margin: int = 2) -> RasterDroplet:
    """Cells whose centre satisfies ``inside``, on a grid covering the box [lo, hi]."""
    origin, nx, ny = grid_for_box(lo, hi, h, margin)
    X, Y = np.meshgrid(origin.real + h * (np.arange(nx) + 0.5), origin.imag + h * (np.arange(ny) + 0.5))
    return RasterDroplet(origin, h, np.asarray(inside(X + 1j * Y), dtype=bool))


def disc_raster(a: complex, rho: float, h: float, margin: int = 2) -> RasterDroplet:
    a = complex(a)
    return rasterize(lambda z: np.abs(z - a) < rho, a - rho * (1 + 1j), a + rho * (1 + 1j), h, margin)


def polygon_mask(curve: NDArray[np.complex128], origin: complex, h: float, nx: int, ny: int) -> NDArray[np.bool_]:
    """Even-odd scanline fill of a closed polyline, sampled at cell centres."""
    a = np.asarray(curve, dtype=complex)
    b = np.roll(a, -1)
    ya = (a.imag - origin.imag) / h - 0.5
    yb = (b.imag - origin.imag) / h - 0.5
    xa = (a.real - origin.real) / h - 0.5
    xb = (b.real - origin.real) / h - 0.5
    lo = np.minimum(ya, yb)
    hi = np.maximum(ya, yb)
    # rows j with lo <= j < hi (half-open rule avoids double counting vertices)
    j0 = np.maximum(np.ceil(lo), 0).astype(int)
    j1 = np.minimum(np.ceil(hi), ny).astype(int)
    cnt = np.maximum(j1 - j0, 0)
    edge = np.repeat(np.arange(a.size), cnt)
    offs = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    rows = j0[edge] + offs
    t = (rows - ya[edge]) / (yb[edge] - ya[edge])
    xs = xa[edge] + t * (xb[edge] - xa[edge])
    order = np.lexsort((xs, rows))
    rows, xs = rows[order], xs[order]
    mask = np.zeros((ny, nx), dtype=bool)
    starts = np.searchsorted(rows, np.arange(ny))
    ends = np.searchsorted(rows, np.arange(ny), side="right")
    for j in range(ny):
        seg = xs[starts[j]:ends[j]]
        for k in range(0, seg.size - 1, 2):
            i0 = max(int(np.ceil(seg[k])), 0)
            i1 = min(int(np.floor(seg[k + 1])), nx - 1)
            if i1 >= i0:
                mask[j, i0:i1 + 1] = True
    return mask
