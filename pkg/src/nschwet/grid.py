"""Staggered (MAC) grid, discrete operators, simulation state and snapshots.

Index conventions
-----------------
Arrays are indexed ``[i, j]`` with ``i`` along x and ``j`` along y.

* cell centers (p, phi, mu): shape ``(nx, ny)``
* x-faces (u): shape ``(nx + 1, ny)``, ``u[i, j]`` sits at ``(xf[i], yc[j])``
* y-faces (v): shape ``(nx, ny + 1)``, ``v[i, j]`` sits at ``(xc[i], yf[j])``

Flattening is C-order, so cell ``(i, j)`` has linear index ``i * ny + j``.

Snapshot file layout (``.nschw``)
---------------------------------
1. one ASCII header line terminated by ``\\n``:
   ``NSCHW1 <nx> <ny> <lx> <ly> <t>`` (floats in ``repr`` form)
2. x-face coordinates, ``nx + 1`` little-endian float64
3. y-face coordinates, ``ny + 1`` little-endian float64
4. ``u`` ``(nx+1)*ny``, ``v`` ``nx*(ny+1)``, then ``p``, ``phi``, ``mu``
   ``nx*ny`` each; all little-endian float64 in the C-order above.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

SNAPSHOT_MAGIC = "NSCHW1"


# --------------------------------------------------------------------------
# Grid
# --------------------------------------------------------------------------

def _logcosh(z):
    a = np.abs(z)
    return a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)


def stretched_faces(nx: int, lx: float, x0: float, halfwidth: float, beta: float) -> np.ndarray:
    """Face coordinates with cell density ``beta`` times higher near ``x0``.

    The density is ``1 + (beta - 1) w(x)`` with ``w`` a smooth top-hat built
    from two tanh steps, so the cells are uniform deep inside
    ``|x - x0| <= halfwidth`` and far away, and blend smoothly in between.
    """
    if beta == 1.0 or halfwidth <= 0:
        return np.linspace(0.0, lx, nx + 1)
    delta = max(0.25 * halfwidth, 1e-12)
    a = x0 - halfwidth - 2.0 * delta
    b = x0 + halfwidth + 2.0 * delta

    def density(x):
        return 1.0 + (beta - 1.0) * 0.5 * (np.tanh((x - a) / delta) - np.tanh((x - b) / delta))

    def cumulative(x):
        extra = 0.5 * delta * (_logcosh((x - a) / delta) - _logcosh((x - b) / delta))
        extra0 = 0.5 * delta * (_logcosh(-a / delta) - _logcosh(-b / delta))
        return x + (beta - 1.0) * (extra - extra0)

    total = cumulative(lx)
    targets = np.arange(nx + 1) * (total / nx)
    xs = np.linspace(0.0, lx, 64 * nx + 1)
    x = np.interp(targets, cumulative(xs), xs)
    for _ in range(4):
        x = x - (cumulative(x) - targets) / density(x)
    x[0], x[-1] = 0.0, lx
    return x


def design_x_stretch(nx: int, lx: float, x0: float, halfwidth: float, h_target: float) -> float:
    """Smallest density ratio for which all window cells are <= h_target.

    Raises ValueError when ``nx`` cells cannot achieve the target.
    """
    def hmax(beta):
        xf = stretched_faces(nx, lx, x0, halfwidth, beta)
        xc = 0.5 * (xf[1:] + xf[:-1])
        inside = np.abs(xc - x0) <= halfwidth
        return np.diff(xf)[inside].max() if inside.any() else np.diff(xf).max()

    if hmax(1.0) <= h_target:
        return 1.0
    lo, hi = 1.0, 2.0
    while hmax(hi) > h_target:
        lo, hi = hi, 2.0 * hi
        if hi > 1e4:
            raise ValueError(f"nx={nx} cells cannot resolve h={h_target:.3g} in the window")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if hmax(mid) > h_target:
            lo = mid
        else:
            hi = mid
    return hi


class StaggeredGrid:
    """Rectilinear MAC grid on (0, lx) x (0, ly), stretched in x only."""

    def __init__(self, xf, yf):
        self.xf = np.asarray(xf, dtype=float)
        self.yf = np.asarray(yf, dtype=float)
        if np.any(np.diff(self.xf) <= 0) or np.any(np.diff(self.yf) <= 0):
            raise ValueError("grid coordinates must be strictly increasing")
        self.nx = self.xf.size - 1
        self.ny = self.yf.size - 1
        self.lx = float(self.xf[-1] - self.xf[0])
        self.ly = float(self.yf[-1] - self.yf[0])
        self.xc = 0.5 * (self.xf[1:] + self.xf[:-1])
        self.yc = 0.5 * (self.yf[1:] + self.yf[:-1])
        self.dx = np.diff(self.xf)
        self.dy = np.diff(self.yf)
        self.dxc = np.diff(self.xc)
        self.dyc = np.diff(self.yc)

    @classmethod
    def uniform(cls, nx, ny, lx, ly):
        return cls(np.linspace(0.0, lx, nx + 1), np.linspace(0.0, ly, ny + 1))

    @classmethod
    def from_config(cls, config) -> "StaggeredGrid":
        num, ch = config.numerics, config.channel
        xf = stretched_faces(num.nx, ch.lx, ch.interface_x0, config.refine_halfwidth(), num.x_stretch)
        return cls(xf, np.linspace(0.0, ch.ly, num.ny + 1))

    # -- geometry ------------------------------------------------------------
    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def ncells(self):
        return self.nx * self.ny

    @cached_property
    def vol(self):
        return np.outer(self.dx, self.dy)

    @cached_property
    def u_vol(self):
        """Control-volume areas of x-faces (half cells on the boundary)."""
        wx = np.empty(self.nx + 1)
        wx[1:-1] = self.dxc
        wx[0], wx[-1] = 0.5 * self.dx[0], 0.5 * self.dx[-1]
        return np.outer(wx, self.dy)

    @cached_property
    def v_vol(self):
        wy = np.empty(self.ny + 1)
        wy[1:-1] = self.dyc
        wy[0], wy[-1] = 0.5 * self.dy[0], 0.5 * self.dy[-1]
        return np.outer(self.dx, wy)

    def max_dx_in_window(self, eps: float, halfwidth: float, x0: float | None = None) -> float:
        """Largest cell width within ``|x - x0| <= halfwidth``."""
        x0 = 0.5 * self.lx if x0 is None else x0
        inside = np.abs(self.xc - x0) <= halfwidth
        if not inside.any():
            inside = np.argmin(np.abs(self.xc - x0)) == np.arange(self.nx)
        return float(self.dx[inside].max())

    # -- sparse building blocks ---------------------------------------------
    @cached_property
    def _dfx(self):
        """(nx, nx+1) face difference divided by cell width."""
        n = self.nx
        d = sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1))
        return sp.diags(1.0 / self.dx) @ d

    @cached_property
    def _dfy(self):
        n = self.ny
        d = sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1))
        return sp.diags(1.0 / self.dy) @ d

    @cached_property
    def _gfx(self):
        """(nx+1, nx) center difference onto interior faces, zero on boundary faces."""
        n = self.nx
        g = sp.lil_matrix((n + 1, n))
        for i in range(1, n):
            g[i, i - 1] = -1.0 / self.dxc[i - 1]
            g[i, i] = 1.0 / self.dxc[i - 1]
        return g.tocsr()

    @cached_property
    def _gfy(self):
        n = self.ny
        g = sp.lil_matrix((n + 1, n))
        for j in range(1, n):
            g[j, j - 1] = -1.0 / self.dyc[j - 1]
            g[j, j] = 1.0 / self.dyc[j - 1]
        return g.tocsr()

    @cached_property
    def Dx(self):
        return sp.kron(self._dfx, sp.identity(self.ny), format="csr")

    @cached_property
    def Dy(self):
        return sp.kron(sp.identity(self.nx), self._dfy, format="csr")

    @cached_property
    def Gx(self):
        return sp.kron(self._gfx, sp.identity(self.ny), format="csr")

    @cached_property
    def Gy(self):
        return sp.kron(sp.identity(self.nx), self._gfy, format="csr")

    @cached_property
    def laplacian_neumann(self):
        """Cell-centered Laplacian with homogeneous Neumann closure everywhere."""
        return (self.Dx @ self.Gx + self.Dy @ self.Gy).tocsr()

    def variable_laplacian(self, kx, ky):
        """div(k grad .) with face coefficients ``kx`` (x-faces) and ``ky`` (y-faces)."""
        return (
            self.Dx @ sp.diags(np.ravel(kx)) @ self.Gx + self.Dy @ sp.diags(np.ravel(ky)) @ self.Gy
        ).tocsr()

    def __eq__(self, other):
        return (
            isinstance(other, StaggeredGrid)
            and np.array_equal(self.xf, other.xf)
            and np.array_equal(self.yf, other.yf)
        )

    __hash__ = None


# --------------------------------------------------------------------------
# Fields and state
# --------------------------------------------------------------------------

class Location(enum.Enum):
    CELL = "cell"
    XFACE = "xface"
    YFACE = "yface"


def field_shape(grid: StaggeredGrid, loc: Location) -> tuple[int, int]:
    if loc is Location.CELL:
        return (grid.nx, grid.ny)
    if loc is Location.XFACE:
        return (grid.nx + 1, grid.ny)
    return (grid.nx, grid.ny + 1)


@dataclass
class Field:
    """A grid-located array; ghost layers are built on demand, never stored."""

    loc: Location
    data: np.ndarray
    grid: StaggeredGrid

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != field_shape(self.grid, self.loc):
            raise ValueError(f"{self.loc.value} field on this grid must have shape "
                             f"{field_shape(self.grid, self.loc)}, got {self.data.shape}")

    def with_ghosts(self, bc: dict | None = None) -> np.ndarray:
        if self.loc is not Location.CELL:
            raise NotImplementedError("ghost layers are built for cell-centered fields only")
        return pad_cc(self.data, self.grid, bc)


@dataclass
class State:
    """Fields at one time level.

    ``phi_wall`` holds the wall traces ``(bottom, top)`` of the order
    parameter when the contact angle relaxes dynamically; it is None for
    the static contact-angle condition.
    """

    t: float
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    mu: np.ndarray
    phi_wall: np.ndarray | None = None
    step: int = 0

    @classmethod
    def zeros(cls, grid: StaggeredGrid, t: float = 0.0) -> "State":
        return cls(
            t=t,
            u=np.zeros((grid.nx + 1, grid.ny)),
            v=np.zeros((grid.nx, grid.ny + 1)),
            p=np.zeros(grid.shape),
            phi=np.zeros(grid.shape),
            mu=np.zeros(grid.shape),
        )

    def copy(self) -> "State":
        return replace(
            self,
            u=self.u.copy(), v=self.v.copy(), p=self.p.copy(),
            phi=self.phi.copy(), mu=self.mu.copy(),
            phi_wall=None if self.phi_wall is None else self.phi_wall.copy(),
        )


# --------------------------------------------------------------------------
# Boundary conditions for cell-centered fields
# --------------------------------------------------------------------------

class BC(NamedTuple):
    """Boundary condition on one side.

    ``kind`` is ``"dirichlet"`` (boundary value) or ``"neumann"`` (outward
    normal derivative). ``value`` is a scalar or an array along the side.
    """

    kind: str
    value: object = 0.0


SIDES = ("left", "right", "bottom", "top")
NEUMANN0 = BC("neumann", 0.0)


def pad_cc(s: np.ndarray, grid: StaggeredGrid, bc: dict | None = None) -> np.ndarray:
    """Cell-centered array with one ghost layer per side.

    Ghosts are mirror cells: Dirichlet uses ``g = 2 b - s0``, Neumann uses
    ``g = s0 + h * dn`` with ``h`` the boundary cell width. Corners are
    filled by averaging their two neighbors.
    """
    bc = {} if bc is None else bc
    out = np.empty((grid.nx + 2, grid.ny + 2))
    out[1:-1, 1:-1] = s
    for side in SIDES:
        kind, value = bc.get(side, NEUMANN0)
        if side == "left":
            inner, h = s[0, :], grid.dx[0]
        elif side == "right":
            inner, h = s[-1, :], grid.dx[-1]
        elif side == "bottom":
            inner, h = s[:, 0], grid.dy[0]
        else:
            inner, h = s[:, -1], grid.dy[-1]
        if kind == "dirichlet":
            ghost = 2.0 * np.asarray(value, dtype=float) - inner
        elif kind == "neumann":
            ghost = inner + h * np.asarray(value, dtype=float)
        else:
            raise ValueError(f"unknown boundary condition kind {kind!r}")
        if side == "left":
            out[0, 1:-1] = ghost
        elif side == "right":
            out[-1, 1:-1] = ghost
        elif side == "bottom":
            out[1:-1, 0] = ghost
        else:
            out[1:-1, -1] = ghost
    out[0, 0] = 0.5 * (out[0, 1] + out[1, 0])
    out[0, -1] = 0.5 * (out[0, -2] + out[1, -1])
    out[-1, 0] = 0.5 * (out[-1, 1] + out[-2, 0])
    out[-1, -1] = 0.5 * (out[-1, -2] + out[-2, -1])
    return out


# --------------------------------------------------------------------------
# Discrete operators
# --------------------------------------------------------------------------

def divergence(u: np.ndarray, v: np.ndarray, grid: StaggeredGrid) -> np.ndarray:
    """Conservative face-difference divergence at cell centers."""
    return (u[1:, :] - u[:-1, :]) / grid.dx[:, None] + (v[:, 1:] - v[:, :-1]) / grid.dy[None, :]


def gradient_cc_to_faces(s: np.ndarray, grid: StaggeredGrid, bc: dict | None = None):
    """Two-point gradient of a cell-centered field onto faces.

    Without ``bc`` the boundary-face values are zero, which makes this the
    negative adjoint of :func:`divergence` for fields vanishing on the
    boundary. With ``bc`` the boundary faces use the ghost closure.
    """
    gx = np.zeros((grid.nx + 1, grid.ny))
    gy = np.zeros((grid.nx, grid.ny + 1))
    gx[1:-1, :] = (s[1:, :] - s[:-1, :]) / grid.dxc[:, None]
    gy[:, 1:-1] = (s[:, 1:] - s[:, :-1]) / grid.dyc[None, :]
    if bc is not None:
        g = pad_cc(s, grid, bc)
        gx[0, :] = (g[1, 1:-1] - g[0, 1:-1]) / grid.dx[0]
        gx[-1, :] = (g[-1, 1:-1] - g[-2, 1:-1]) / grid.dx[-1]
        gy[:, 0] = (g[1:-1, 1] - g[1:-1, 0]) / grid.dy[0]
        gy[:, -1] = (g[1:-1, -1] - g[1:-1, -2]) / grid.dy[-1]
    return gx, gy


def laplacian_cc(s: np.ndarray, grid: StaggeredGrid, bc: dict | None = None) -> np.ndarray:
    """Five-point variable-spacing Laplacian with ghost-cell closure."""
    gx, gy = gradient_cc_to_faces(s, grid, NEUMANN_ALL if bc is None else bc)
    return divergence(gx, gy, grid)


NEUMANN_ALL = {side: NEUMANN0 for side in SIDES}


# --------------------------------------------------------------------------
# Snapshots
# --------------------------------------------------------------------------

def write_snapshot(path: str | Path, state: State, grid: StaggeredGrid) -> None:
    header = f"{SNAPSHOT_MAGIC} {grid.nx} {grid.ny} {grid.lx!r} {grid.ly!r} {float(state.t)!r}\n"
    le = np.dtype("<f8")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for arr in (grid.xf, grid.yf, state.u, state.v, state.p, state.phi, state.mu):
            fh.write(np.ascontiguousarray(arr, dtype=le).tobytes(order="C"))


def read_snapshot(path: str | Path) -> tuple[State, StaggeredGrid]:
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.index(b"\n")
    parts = raw[:nl].decode("ascii").split()
    if len(parts) != 6 or parts[0] != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: not an {SNAPSHOT_MAGIC} snapshot")
    nx, ny = int(parts[1]), int(parts[2])
    t = float(parts[5])
    data = np.frombuffer(raw[nl + 1:], dtype="<f8")
    sizes = [nx + 1, ny + 1, (nx + 1) * ny, nx * (ny + 1), nx * ny, nx * ny, nx * ny]
    if data.size != sum(sizes):
        raise ValueError(f"{path}: expected {sum(sizes)} values, found {data.size}")
    chunks = np.split(data.astype(float), np.cumsum(sizes)[:-1])
    grid = StaggeredGrid(chunks[0], chunks[1])
    state = State(
        t=t,
        u=chunks[2].reshape(nx + 1, ny),
        v=chunks[3].reshape(nx, ny + 1),
        p=chunks[4].reshape(nx, ny),
        phi=chunks[5].reshape(nx, ny),
        mu=chunks[6].reshape(nx, ny),
    )
    return state, grid
