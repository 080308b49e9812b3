"""Semi-implicit Cahn-Hilliard step with convection and wetting closures.

The coupled update for ``(phi, mu)`` at level n+1 is

    phi/dt - m L mu                    = phi^n/dt - div(phi^n u^n)
    mu + sigma*eps L phi - (sigma S/eps) phi = (sigma/eps)(Psi'(phi^n) - S phi^n) + wall terms

with ``L`` the cell-centered Laplacian closed by homogeneous Neumann
conditions (no mass flux anywhere). The wetting condition enters the
second row through the boundary flux of ``L phi`` on the walls.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import BC, NEUMANN0, StaggeredGrid, State
from .material import MaterialLaws, d_double_well
from .params import INFINITE, WettingModel


class StepFailure(RuntimeError):
    """A linear solve failed or produced non-finite values."""


# --------------------------------------------------------------------------
# Upwind-biased face interpolation
# --------------------------------------------------------------------------

def upwind_midpoints(s: np.ndarray, pos: np.ndarray, mid: np.ndarray, vel: np.ndarray):
    """Second-order upwind values of ``s`` at ``mid`` along axis 0.

    ``s`` has shape ``(n, m)`` at ``pos``; ``mid`` holds the ``n - 1`` points
    between consecutive entries of ``pos`` and ``vel`` the advecting velocity
    there. Values are extrapolated linearly from the two upwind points; at
    the ends the far-upwind point is a constant mirror, i.e. first order.
    """
    n = s.shape[0]
    if n < 2:
        return np.empty((0,) + s.shape[1:])
    spad = np.concatenate([s[:1], s, s[-1:]], axis=0)
    ppad = np.concatenate([[2 * pos[0] - pos[1]], pos, [2 * pos[-1] - pos[-2]]])
    k = np.arange(1, n)
    fk = mid[:, None] if s.ndim > 1 else mid
    shape = (-1, 1) if s.ndim > 1 else (-1,)
    wl = (fk - ppad[k].reshape(shape)) / (ppad[k] - ppad[k - 1]).reshape(shape)
    left = spad[k] + (spad[k] - spad[k - 1]) * wl
    wr = (fk - ppad[k + 1].reshape(shape)) / (ppad[k + 1] - ppad[k + 2]).reshape(shape)
    right = spad[k + 1] + (spad[k + 1] - spad[k + 2]) * wr
    return np.where(vel >= 0.0, left, right)


def linear_upwind_faces(s: np.ndarray, centers: np.ndarray, faces: np.ndarray, vel: np.ndarray):
    """Second-order upwind face values of a cell-centered ``s`` along axis 0.

    Boundary faces take the adjacent cell value.
    """
    out = np.empty((s.shape[0] + 1,) + s.shape[1:])
    out[0], out[-1] = s[0], s[-1]
    out[1:-1] = upwind_midpoints(s, centers, faces[1:-1], vel[1:-1])
    return out


def advective_flux_divergence(phi: np.ndarray, u: np.ndarray, v: np.ndarray, grid: StaggeredGrid):
    """div(phi u) in flux form with second-order upwind face values."""
    fx = u * linear_upwind_faces(phi, grid.xc, grid.xf, u)
    fy = v * linear_upwind_faces(phi.T, grid.yc, grid.yf, v.T).T
    return (fx[1:] - fx[:-1]) / grid.dx[:, None] + (fy[:, 1:] - fy[:, :-1]) / grid.dy[None, :]


# --------------------------------------------------------------------------
# Boundary closures
# --------------------------------------------------------------------------

def wall_normal_derivative(phi_wall_adjacent, laws: MaterialLaws, epsilon: float):
    """Outward normal derivative of phi imposed by the static wetting condition."""
    return -laws.d_sigma_sf(phi_wall_adjacent) / (laws.sigma * epsilon)


def apply_wetting_bc_phi(phi, u_S, wetting: WettingModel, laws: MaterialLaws, grid: StaggeredGrid,
                         epsilon: float, phi_wall=None):
    """Ghost rows of phi below the bottom wall and above the top wall.

    For an infinite relaxation coefficient the ghost enforces
    ``sigma*eps dn(phi) = -sigma_sf'(phi_0)`` with ``phi_0`` the adjacent cell
    value. For a finite coefficient the ghost is the Dirichlet reflection
    of the wall trace ``phi_wall = (bottom, top)``. ``u_S`` is unused here and
    enters only :func:`update_wall_trace`.
    """
    b, t = phi[:, 0], phi[:, -1]
    if wetting.nu1 is INFINITE:
        gb = b + grid.dy[0] * wall_normal_derivative(b, laws, epsilon)
        gt = t + grid.dy[-1] * wall_normal_derivative(t, laws, epsilon)
        return gb, gt
    if phi_wall is None:
        raise ValueError("finite relaxation needs the wall trace")
    return 2.0 * phi_wall[0] - b, 2.0 * phi_wall[1] - t


def apply_pm_bc(phi, mu):
    """Mirror ghost columns at x = 0 and x = Lx for phi and mu.

    Returns ``{"phi": (left, right), "mu": (left, right)}``; mirrored
    ghosts make the normal derivatives and the diffusive mass flux vanish.
    """
    return {"phi": (phi[0].copy(), phi[-1].copy()), "mu": (mu[0].copy(), mu[-1].copy())}


def phi_bc(phi, wetting, laws, grid, epsilon, phi_wall=None) -> dict:
    """Boundary-condition dict for :func:`grid.pad_cc` matching the CH closures."""
    gb, gt = apply_wetting_bc_phi(phi, None, wetting, laws, grid, epsilon, phi_wall)
    return {
        "left": NEUMANN0,
        "right": NEUMANN0,
        "bottom": BC("neumann", (gb - phi[:, 0]) / grid.dy[0]),
        "top": BC("neumann", (gt - phi[:, -1]) / grid.dy[-1]),
    }


def wall_slip_velocity(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tangential fluid velocity of the wall-adjacent rows at cell centers."""
    return 0.5 * (u[1:, 0] + u[:-1, 0]), 0.5 * (u[1:, -1] + u[:-1, -1])


def update_wall_trace(phi_wall, phi, u, dt, wetting: WettingModel, laws: MaterialLaws,
                      grid: StaggeredGrid, epsilon: float):
    """Advance the wall trace under the dynamic contact-angle condition.

    Surface advection uses centered differences along the wall and is
    explicit; the normal-derivative part of the relaxation is implicit in
    the trace (with the adjacent cell value lagged), which removes the
    ``dt < dy/(2 nu1 sigma eps)`` restriction of a fully explicit update.
    """
    nu1, sig = wetting.nu1, laws.sigma
    out = np.empty_like(phi_wall)
    slips = wall_slip_velocity(u)
    for k, (row, h) in enumerate(((phi[:, 0], grid.dy[0]), (phi[:, -1], grid.dy[-1]))):
        w = phi_wall[k]
        dwdx = np.gradient(w, grid.xc)
        coef = 2.0 * sig * epsilon / h
        rhs = w - dt * slips[k] * dwdx + dt * nu1 * (coef * row - laws.d_sigma_sf(w))
        out[k] = rhs / (1.0 + dt * nu1 * coef)
    return out


def chemical_potential(phi, laws: MaterialLaws, wetting: WettingModel, grid: StaggeredGrid,
                       epsilon: float, phi_wall=None) -> np.ndarray:
    """Discrete mu of a given phi, consistent with the step operator.

    A steady state of :func:`ch_step` satisfies exactly this relation.
    """
    sig = laws.sigma
    lap = (grid.laplacian_neumann @ phi.ravel()).reshape(grid.shape)
    mu = (sig / epsilon) * d_double_well(phi) - sig * epsilon * lap
    h0, h1 = grid.dy[0], grid.dy[-1]
    if wetting.nu1 is INFINITE:
        mu[:, 0] += laws.d_sigma_sf(phi[:, 0]) / h0
        mu[:, -1] += laws.d_sigma_sf(phi[:, -1]) / h1
    else:
        if phi_wall is None:
            raise ValueError("finite relaxation needs the wall trace")
        mu[:, 0] -= sig * epsilon * 2.0 * (phi_wall[0] - phi[:, 0]) / h0 ** 2
        mu[:, -1] -= sig * epsilon * 2.0 * (phi_wall[1] - phi[:, -1]) / h1 ** 2
    return mu


def total_mass(phi: np.ndarray, grid: StaggeredGrid | None = None) -> float:
    """Sum of phi times cell area (plain sum when no grid is given)."""
    if grid is None:
        return float(np.sum(phi))
    return float(np.sum(phi * grid.vol))


# --------------------------------------------------------------------------
# Workspace and step
# --------------------------------------------------------------------------

class ChWorkspace:
    """Assembled block operator for the coupled (phi, mu) update.

    The matrix depends on dt, m, eps, S, the grid and whether the wall
    trace is a separate unknown; it is rebuilt when any of these changes
    and factorized once per build for the direct solver.
    """

    def __init__(self, grid: StaggeredGrid, laws: MaterialLaws, wetting: WettingModel,
                 epsilon: float, mobility: float, stab_s: float = 2.0,
                 solver: str = "direct", tol: float = 1e-9):
        self.grid = grid
        self.laws = laws
        self.wetting = wetting
        self.epsilon = float(epsilon)
        self.m = float(mobility)
        self.S = float(stab_s)
        self.solver = solver
        self.tol = tol
        self._key = None
        self._lu = None
        self._ilu = None
        self.A = None

    def _wall_dirichlet(self) -> bool:
        return self.wetting.nu1 is not INFINITE

    def assemble(self, dt: float) -> None:
        key = (float(dt), self.m, self.epsilon, self.S, self.grid.nx, self.grid.ny, self.solver)
        if key == self._key:
            return
        g = self.grid
        n = g.ncells
        sig, eps = self.laws.sigma, self.epsilon
        lap = g.laplacian_neumann
        lap_phi = lap
        if self._wall_dirichlet():
            extra = np.zeros(g.shape)
            extra[:, 0] -= 2.0 / g.dy[0] ** 2
            extra[:, -1] -= 2.0 / g.dy[-1] ** 2
            lap_phi = lap + sp.diags(extra.ravel())
        eye = sp.identity(n, format="csr")
        self.A = sp.bmat(
            [
                [eye / dt, -self.m * lap],
                [sig * eps * lap_phi - (sig * self.S / eps) * eye, eye],
            ],
            format="csc",
        )
        if self.solver == "direct":
            self._lu = spla.splu(self.A)
        else:
            self._ilu = spla.spilu(self.A, drop_tol=1e-5, fill_factor=10)
        self._key = key

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.solver == "direct":
            x = self._lu.solve(rhs)
        else:
            M = spla.LinearOperator(self.A.shape, self._ilu.solve)
            x, info = spla.gmres(self.A, rhs, M=M, rtol=self.tol, atol=0.0, restart=50, maxiter=200)
            if info != 0:
                raise StepFailure(f"CH Krylov solve did not converge (info={info})")
        if not np.all(np.isfinite(x)):
            raise StepFailure("CH solve produced non-finite values")
        return x

    def rhs(self, state: State, dt: float, phi_wall_new=None) -> np.ndarray:
        g, laws = self.grid, self.laws
        sig, eps = laws.sigma, self.epsilon
        phi = state.phi
        r1 = phi / dt - advective_flux_divergence(phi, state.u, state.v, g)
        r2 = (sig / eps) * (d_double_well(phi) - self.S * phi)
        if self._wall_dirichlet():
            r2[:, 0] -= sig * eps * 2.0 * phi_wall_new[0] / g.dy[0] ** 2
            r2[:, -1] -= sig * eps * 2.0 * phi_wall_new[1] / g.dy[-1] ** 2
        else:
            # -sigma*eps * (outward flux)/dy with sigma*eps*dn(phi) = -sigma_sf'(phi_0)
            r2[:, 0] += laws.d_sigma_sf(phi[:, 0]) / g.dy[0]
            r2[:, -1] += laws.d_sigma_sf(phi[:, -1]) / g.dy[-1]
        return np.concatenate([r1.ravel(), r2.ravel()])


def ch_step(state: State, dt: float, laws: MaterialLaws, wetting: WettingModel,
            workspace: ChWorkspace):
    """Advance (phi, mu) by one step.

    Returns ``(phi_new, mu_new, phi_wall_new)``; the last entry is None
    for the static contact-angle condition.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    ws = workspace
    ws.assemble(dt)
    phi_wall_new = None
    if wetting.nu1 is not INFINITE:
        pw = state.phi_wall
        if pw is None:
            pw = np.stack([1.5 * state.phi[:, 0] - 0.5 * state.phi[:, 1],
                           1.5 * state.phi[:, -1] - 0.5 * state.phi[:, -2]])
        phi_wall_new = update_wall_trace(pw, state.phi, state.u, dt, wetting, laws,
                                         ws.grid, ws.epsilon)
    x = ws.solve(ws.rhs(state, dt, phi_wall_new))
    n = ws.grid.ncells
    return x[:n].reshape(ws.grid.shape), x[n:].reshape(ws.grid.shape), phi_wall_new
