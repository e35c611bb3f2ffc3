"""Complex scalar fields on uniform periodic grids (any dimension)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroField


@dataclass
class GridSpec:
    """Uniform periodic box: n points per axis over lengths L per axis."""
    n: tuple
    L: tuple
    x0: tuple

    def __post_init__(self):
        self.n = tuple(int(v) for v in np.atleast_1d(self.n))
        self.L = tuple(float(v) for v in np.atleast_1d(self.L))
        self.x0 = tuple(float(v) for v in np.atleast_1d(self.x0))
        if not len(self.n) == len(self.L) == len(self.x0):
            raise ValueError("n, L, x0 must share a dimension")

    @property
    def d(self) -> int:
        return len(self.n)

    @property
    def dx(self) -> tuple:
        return tuple(L / n for L, n in zip(self.L, self.n))

    def axis(self, k: int) -> np.ndarray:
        return self.x0[k] + np.arange(self.n[k]) * self.dx[k]

    def meshgrid(self):
        return np.meshgrid(*[self.axis(k) for k in range(self.d)], indexing="ij")

    def kaxis(self, k: int) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n[k], d=self.dx[k])

    def kmeshgrid(self):
        return np.meshgrid(*[self.kaxis(k) for k in range(self.d)], indexing="ij")

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    @property
    def k_max(self) -> float:
        return float(min(np.pi / dxk for dxk in self.dx))


@dataclass
class GridField:
    """Complex values sampled on a GridSpec, plus the semiclassical scale."""
    spec: GridSpec
    values: np.ndarray
    eps: float = None

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.spec.cell_volume))

    def inner(self, other: "GridField") -> complex:
        if self.values.shape != other.values.shape:
            raise ValueError("fields live on different grids")
        return complex(np.vdot(other.values, self.values) * self.spec.cell_volume)

    def copy(self) -> "GridField":
        return GridField(spec=self.spec, values=self.values.copy(), eps=self.eps)

    def slice_csv(self, path, axis: int = 0, index: int = None) -> None:
        """Export a 1d or 2d slice (real, imag, abs) for external plotting."""
        vals = self.values
        if vals.ndim > 2:
            if index is None:
                index = vals.shape[-1] // 2
            sl = [slice(None)] * vals.ndim
            sl[-1] = index
            vals = vals[tuple(sl)]
        flat = vals.reshape(vals.shape[0], -1)
        data = np.column_stack([self.spec.axis(axis),
                                flat.real[:, :1], flat.imag[:, :1], np.abs(flat)[:, :1]])
        np.savetxt(path, data, delimiter=",", header="x,re,im,abs", comments="")


def fidelity(u: GridField, v: GridField) -> float:
    """|<u, v>| / (||u|| ||v||) in [0, 1]."""
    nu, nv = u.norm(), v.norm()
    if nu == 0.0 or nv == 0.0:
        raise ZeroField("fidelity undefined for a zero field")
    return float(abs(u.inner(v)) / (nu * nv))
