"""Grid containers and the documented CSV / binary serialization."""

import numpy as np
import pytest

from fracext.gridfn import (BoxGrid, GridFunction, read_grid_binary,
                            write_grid_binary)


def test_boxgrid_validation():
    with pytest.raises(ValueError):
        BoxGrid((0.0,), (0.0,), (5,))
    with pytest.raises(ValueError):
        BoxGrid((0.0,), (1.0,), (2,))


def test_gridfunction_finite_and_shape():
    grid = BoxGrid.interval(0.0, 1.0, 5)
    with pytest.raises(ValueError):
        GridFunction(grid, np.zeros(4))
    with pytest.raises(ValueError):
        GridFunction(grid, np.array([0.0, 1.0, np.inf, 0.0, 0.0]))


def test_from_callable_zeroes_boundary():
    grid = BoxGrid.interval(0.0, np.pi, 9)
    u = GridFunction.from_callable(grid, lambda x: np.cos(x))
    assert u.values[0] == 0.0 and u.values[-1] == 0.0
    assert u.values[4] == pytest.approx(np.cos(grid.axes()[0][4]))


def test_binary_roundtrip_uniform(tmp_path):
    grid = BoxGrid.rectangle((0.0, -1.0), (2.0, 1.0), (7, 5))
    u = GridFunction.from_callable(grid, lambda x, y: np.sin(x) * y, zero_boundary=False)
    p = tmp_path / "u.bin"
    u.to_binary(p)
    v = GridFunction.from_binary(p)
    assert v.grid == grid
    assert np.array_equal(v.values, u.values)


def test_binary_roundtrip_explicit_axes(tmp_path):
    axes = [np.array([0.0, 0.1, 0.5, 1.5]), np.linspace(0, 1, 6)]
    vals = np.arange(24, dtype=float).reshape(4, 6)
    p = tmp_path / "grid.bin"
    write_grid_binary(p, vals, axes=axes)
    out, los, his, axes_out = read_grid_binary(p)
    assert los is None and his is None
    assert np.array_equal(out, vals)
    for a, b in zip(axes, axes_out):
        assert np.array_equal(a, b)


def test_binary_rejects_garbage(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"NOPE" + b"\0" * 64)
    with pytest.raises(ValueError):
        read_grid_binary(p)


def test_csv_roundtrip(tmp_path):
    grid = BoxGrid.interval(0.0, 1.0, 6)
    u = GridFunction.from_callable(grid, lambda x: x**2, zero_boundary=False)
    p = tmp_path / "u.csv"
    u.to_csv(p)
    rows = p.read_text().strip().split("\n")
    assert rows[0] == "x1,value"
    data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    assert np.allclose(data[:, 0], grid.axes()[0])
    assert np.allclose(data[:, 1], u.values)
