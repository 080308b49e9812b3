import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nschwet.grid import (
    BC, Field, Location, NEUMANN_ALL, State, StaggeredGrid, design_x_stretch, divergence,
    gradient_cc_to_faces, laplacian_cc, pad_cc, read_snapshot, stretched_faces, write_snapshot,
)

rng = np.random.default_rng(42)


def grids():
    yield StaggeredGrid.uniform(6, 4, 1.0, 0.5)
    xf = np.concatenate([[0.0], np.cumsum(rng.uniform(0.5, 1.5, 8))])
    yf = np.concatenate([[0.0], np.cumsum(rng.uniform(0.5, 1.5, 6))])
    yield StaggeredGrid(xf, yf)


def dense_divergence(grid):
    nx, ny = grid.shape
    nu, nv = (nx + 1) * ny, nx * (ny + 1)
    D = np.zeros((nx * ny, nu + nv))
    for i in range(nx):
        for j in range(ny):
            r = i * ny + j
            D[r, (i + 1) * ny + j] += 1 / grid.dx[i]
            D[r, i * ny + j] -= 1 / grid.dx[i]
            D[r, nu + i * (ny + 1) + j + 1] += 1 / grid.dy[j]
            D[r, nu + i * (ny + 1) + j] -= 1 / grid.dy[j]
    return D


@pytest.mark.parametrize("grid", list(grids()))
def test_divergence_matches_dense_operator(grid):
    u = rng.standard_normal((grid.nx + 1, grid.ny))
    v = rng.standard_normal((grid.nx, grid.ny + 1))
    ref = dense_divergence(grid) @ np.concatenate([u.ravel(), v.ravel()])
    assert np.allclose(divergence(u, v, grid).ravel(), ref, rtol=0, atol=1e-12 * np.abs(ref).max())


def test_divergence_simple_fields():
    g = StaggeredGrid.uniform(7, 5, 2.0, 1.0)
    assert np.all(divergence(np.full((8, 5), 3.0), np.zeros((7, 6)), g) == 0)
    u = np.repeat(g.xf[:, None], 5, axis=1)
    assert np.allclose(divergence(u, np.zeros((7, 6)), g), 1.0, atol=1e-13)


@pytest.mark.parametrize("grid", list(grids()))
def test_gradient_is_negative_adjoint_of_divergence(grid):
    s = rng.standard_normal(grid.shape)
    wx = rng.standard_normal((grid.nx + 1, grid.ny))
    wy = rng.standard_normal((grid.nx, grid.ny + 1))
    wx[[0, -1], :] = 0
    wy[:, [0, -1]] = 0
    gx, gy = gradient_cc_to_faces(s, grid)
    lhs = np.sum(gx * wx * grid.u_vol) + np.sum(gy * wy * grid.v_vol)
    rhs = -np.sum(s * divergence(wx, wy, grid) * grid.vol)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_gradient_of_constant_and_linear():
    g = list(grids())[1]
    gx, gy = gradient_cc_to_faces(np.full(g.shape, 2.0), g)
    assert np.all(gx == 0) and np.all(gy == 0)
    X, Y = np.meshgrid(g.xc, g.yc, indexing="ij")
    gx, gy = gradient_cc_to_faces(3 * X - 2 * Y, g)
    assert np.allclose(gx[1:-1], 3.0, atol=1e-12) and np.allclose(gy[:, 1:-1], -2.0, atol=1e-12)


def test_laplacian_constant_and_quadratic():
    g = StaggeredGrid.uniform(10, 6, 1.0, 1.0)
    assert np.allclose(laplacian_cc(np.full(g.shape, 5.0), g), 0.0)
    X, _ = np.meshgrid(g.xc, g.yc, indexing="ij")
    assert np.allclose(laplacian_cc(X ** 2, g)[1:-1], 2.0, atol=1e-10)


def test_laplacian_second_order_convergence():
    lx, ly = 2.0, 1.0
    errs = []
    for n in (16, 32, 64):
        g = StaggeredGrid.uniform(n, n, lx, ly)
        X, Y = np.meshgrid(g.xc, g.yc, indexing="ij")
        s = np.sin(np.pi * X / lx) * np.sin(np.pi * Y / ly)
        exact = -(np.pi ** 2) * (1 / lx ** 2 + 1 / ly ** 2) * s
        bc = {side: BC("dirichlet", 0.0) for side in ("left", "right", "bottom", "top")}
        errs.append(np.abs(laplacian_cc(s, g, bc) - exact).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.9), rates


def test_laplacian_matrix_matches_function():
    g = list(grids())[1]
    s = rng.standard_normal(g.shape)
    a = (g.laplacian_neumann @ s.ravel()).reshape(g.shape)
    assert np.allclose(a, laplacian_cc(s, g, NEUMANN_ALL), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.integers(2, 9), st.integers(0, 2 ** 31 - 1))
def test_summation_by_parts(nx, ny, seed):
    r = np.random.default_rng(seed)
    g = StaggeredGrid(np.concatenate([[0], np.cumsum(r.uniform(0.2, 1.0, nx))]),
                      np.concatenate([[0], np.cumsum(r.uniform(0.2, 1.0, ny))]))
    u = r.standard_normal((nx + 1, ny))
    v = r.standard_normal((nx, ny + 1))
    flux = np.sum((u[-1] - u[0]) * g.dy) + np.sum((v[:, -1] - v[:, 0]) * g.dx)
    total = np.sum(divergence(u, v, g) * g.vol)
    assert total == pytest.approx(flux, rel=1e-13, abs=1e-13 * np.abs(u).sum())
    u[[0, -1]] = 0
    v[:, [0, -1]] = 0
    assert abs(np.sum(divergence(u, v, g) * g.vol)) <= 1e-13 * (np.abs(u).sum() + np.abs(v).sum())


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2 ** 31 - 1))
def test_operators_are_linear(a, b, seed):
    r = np.random.default_rng(seed)
    g = list(grids())[1]
    f, h = r.standard_normal(g.shape), r.standard_normal(g.shape)
    for op in (lambda s: laplacian_cc(s, g), lambda s: gradient_cc_to_faces(s, g)[0]):
        lhs = op(a * f + b * h)
        rhs = a * op(f) + b * op(h)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (abs(a) + abs(b) + 1) * np.abs(lhs).max())


def test_pad_cc_ghost_formulas():
    g = StaggeredGrid.uniform(4, 3, 1.0, 1.0)
    s = rng.standard_normal(g.shape)
    out = pad_cc(s, g, {"left": BC("dirichlet", 1.0), "bottom": BC("neumann", 2.0)})
    assert np.allclose(out[0, 1:-1], 2.0 - s[0])
    assert np.allclose(out[1:-1, 0], s[:, 0] + g.dy[0] * 2.0)
    assert np.array_equal(out[-1, 1:-1], s[-1])
    with pytest.raises(ValueError):
        pad_cc(s, g, {"top": BC("robin", 0.0)})


def test_field_shape_check():
    g = StaggeredGrid.uniform(4, 3, 1.0, 1.0)
    Field(Location.XFACE, np.zeros((5, 3)), g)
    with pytest.raises(ValueError):
        Field(Location.YFACE, np.zeros((5, 3)), g)
    f = Field(Location.CELL, np.ones((4, 3)), g)
    assert f.with_ghosts().shape == (6, 5)


def test_stretched_faces():
    xf = stretched_faces(300, 0.2, 0.1, 0.02, 5.0)
    assert xf[0] == 0.0 and xf[-1] == 0.2 and np.all(np.diff(xf) > 0)
    dx = np.diff(xf)
    xc = 0.5 * (xf[1:] + xf[:-1])
    assert dx[np.abs(xc - 0.1) < 0.01].max() < dx.max() / 3
    beta = design_x_stretch(300, 0.2, 0.1, 0.02, 4e-4)
    g = StaggeredGrid(stretched_faces(300, 0.2, 0.1, 0.02, beta), np.linspace(0, 0.02, 3))
    assert g.max_dx_in_window(8e-4, 0.02, 0.1) <= 4e-4 * (1 + 1e-12)
    with pytest.raises(ValueError):
        design_x_stretch(20, 0.2, 0.1, 0.05, 1e-5)


def test_grid_rejects_nonmonotone():
    with pytest.raises(ValueError):
        StaggeredGrid([0, 1, 1], [0, 1])


def test_snapshot_roundtrip(tmp_path):
    g = list(grids())[1]
    st_ = State.zeros(g, t=0.37)
    for name in ("u", "v", "p", "phi", "mu"):
        getattr(st_, name)[...] = rng.standard_normal(getattr(st_, name).shape)
    p = tmp_path / "a.nschw"
    write_snapshot(p, st_, g)
    back, g2 = read_snapshot(p)
    assert g2 == g and back.t == 0.37
    for name in ("u", "v", "p", "phi", "mu"):
        assert np.array_equal(getattr(back, name), getattr(st_, name))
    raw = p.read_bytes()
    assert raw.startswith(b"NSCHW1 8 6 ")
    (tmp_path / "bad.nschw").write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        read_snapshot(tmp_path / "bad.nschw")
