"""Tensor grids over boxes and grid functions with CSV / binary serialization.

Binary format (little-endian, documented for external consumers):

    bytes 0-3   magic  b"FXGB"
    uint32      format version (1)
    uint32      ndim
    uint32[nd]  shape (nodes per axis)
    uint32      axes mode: 0 = uniform (lower/upper corners follow),
                           1 = explicit (each axis's coordinates follow)
    mode 0:     float64[nd] lower corners, float64[nd] upper corners
    mode 1:     float64[shape[k]] coordinates for k = 0..nd-1
    uint32      dtype tag (0 = float64)
    float64[*]  values, row-major (C order)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

_MAGIC = b"FXGB"
_VERSION = 1


@dataclass(frozen=True)
class BoxGrid:
    los: tuple
    his: tuple
    shape: tuple

    def __post_init__(self):
        if not (len(self.los) == len(self.his) == len(self.shape)):
            raise ValueError("los/his/shape must have equal length")
        for lo, hi, m in zip(self.los, self.his, self.shape):
            if not (hi > lo and m >= 3):
                raise ValueError("need hi > lo and at least 3 nodes per axis")

    @property
    def ndim(self):
        return len(self.shape)

    def axes(self):
        return [np.linspace(lo, hi, m) for lo, hi, m in zip(self.los, self.his, self.shape)]

    def spacing(self):
        return tuple((hi - lo) / (m - 1) for lo, hi, m in zip(self.los, self.his, self.shape))

    def interior_mask(self):
        mask = np.ones(self.shape, dtype=bool)
        for ax in range(self.ndim):
            sl = [slice(None)] * self.ndim
            sl[ax] = 0
            mask[tuple(sl)] = False
            sl[ax] = -1
            mask[tuple(sl)] = False
        return mask

    def meshgrid(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    @staticmethod
    def interval(lo, hi, m):
        return BoxGrid((lo,), (hi,), (m,))

    @staticmethod
    def rectangle(los, his, shape):
        return BoxGrid(tuple(los), tuple(his), tuple(shape))


class GridFunction:
    """Values sampled on a BoxGrid; boundary nodes carry the Dirichlet value."""

    def __init__(self, grid: BoxGrid, values, dirichlet_value=0.0):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        self.grid = grid
        self.values = values
        self.dirichlet_value = float(dirichlet_value)

    @staticmethod
    def zeros(grid):
        return GridFunction(grid, np.zeros(grid.shape))

    @staticmethod
    def from_callable(grid, fn, zero_boundary=True):
        mesh = grid.meshgrid()
        vals = np.asarray(fn(*mesh), dtype=float)
        gf = GridFunction(grid, vals)
        if zero_boundary:
            gf.values[~grid.interior_mask()] = 0.0
        return gf

    def copy_with(self, values):
        return GridFunction(self.grid, values, self.dirichlet_value)

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def interior(self):
        return self.values[self.grid.interior_mask()]

    # -- serialization -----------------------------------------------------------

    def to_csv(self, path):
        axes = self.grid.axes()
        mesh = np.meshgrid(*axes, indexing="ij")
        cols = [m.ravel() for m in mesh] + [self.values.ravel()]
        names = [f"x{i + 1}" for i in range(self.grid.ndim - 1)] + ["z"] if self.grid.ndim > 1 \
            else ["x1"]
        if self.grid.ndim == 1:
            header = "x1,value"
        else:
            header = ",".join(names) + ",value"
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row in zip(*cols):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    def to_binary(self, path):
        write_grid_binary(path, self.values, los=self.grid.los, his=self.grid.his)

    @staticmethod
    def from_binary(path):
        values, los, his, axes = read_grid_binary(path)
        if axes is not None:
            raise ValueError("file stores explicit axes; use read_grid_binary directly")
        return GridFunction(BoxGrid(los, his, values.shape), values)


def write_grid_binary(path, values, los=None, his=None, axes=None):
    """Write a tensor-grid array in the documented binary format.

    Pass either (los, his) for a uniform grid or explicit per-axis
    coordinate arrays.
    """
    values = np.asarray(values, dtype=float)
    nd = values.ndim
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<I", nd))
        fh.write(struct.pack(f"<{nd}I", *values.shape))
        if axes is None:
            fh.write(struct.pack("<I", 0))
            fh.write(struct.pack(f"<{nd}d", *los))
            fh.write(struct.pack(f"<{nd}d", *his))
        else:
            if len(axes) != nd or any(len(a) != m for a, m in zip(axes, values.shape)):
                raise ValueError("axes do not match value shape")
            fh.write(struct.pack("<I", 1))
            for a in axes:
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
        fh.write(struct.pack("<I", 0))  # dtype tag: float64
        fh.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def read_grid_binary(path):
    """Read the binary grid format; returns (values, los, his, axes)."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a grid binary file (bad magic)")
        version, = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise ValueError(f"unsupported grid binary version {version}")
        nd, = struct.unpack("<I", fh.read(4))
        shape = struct.unpack(f"<{nd}I", fh.read(4 * nd))
        mode, = struct.unpack("<I", fh.read(4))
        los = his = axes = None
        if mode == 0:
            los = struct.unpack(f"<{nd}d", fh.read(8 * nd))
            his = struct.unpack(f"<{nd}d", fh.read(8 * nd))
        elif mode == 1:
            axes = [np.frombuffer(fh.read(8 * m), dtype="<f8").copy() for m in shape]
        else:
            raise ValueError(f"unsupported axes mode {mode}")
        tag, = struct.unpack("<I", fh.read(4))
        if tag != 0:
            raise ValueError(f"unsupported dtype tag {tag}")
        count = int(np.prod(shape))
        values = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(shape).copy()
    return values, los, his, axes
