"""Momentum predictor and pressure projection on the MAC grid.

Momentum is advanced in the non-conservative form that follows from the
mixture mass balance,

    rho (du/dt + ((u + J/rho) . grad) u) = -grad p + div(eta (grad u + grad u^T)) + mu grad phi,

where the capillary force is written as ``mu grad phi`` and the gradient
part of the capillary stress is absorbed into the pressure. The viscous
term is split as ``(rho/dt - A) delta = F(u^n) + ...`` with ``A`` a
constant-coefficient Laplacian using the largest viscosity and ``F`` the
full variable-viscosity stress divergence, so steady states of the scheme
are steady states of the spatial discretization.

Boundary conditions: generalized Navier slip on the walls y = 0 and y = ly
(bottom wall moving with +u_w, top wall with -u_w), a linear Couette
inflow profile on the ends x = 0 and x = lx, and impermeability
``u . n = 0`` on the walls.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cahnhilliard import StepFailure, upwind_midpoints
from .grid import StaggeredGrid, State
from .material import MaterialLaws
from .params import INFINITE, ChannelSpec, WettingModel

DEBUG = False


# --------------------------------------------------------------------------
# Boundary data
# --------------------------------------------------------------------------

def wall_velocity(t: float, channel: ChannelSpec) -> float:
    """Bottom-wall speed with a C1 cosine ramp over ``ramp_time``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    T = channel.ramp_time
    if T > 0 and t < T:
        return (0.5 - 0.5 * math.cos(math.pi * t / T)) * channel.u_wall_max
    return channel.u_wall_max


def inflow_profile(x2, t, channel: ChannelSpec, wetting: WettingModel, laws: MaterialLaws,
                   eta=None):
    """Linear slip-Couette profile on the inflow/outflow boundaries.

    ``eta`` is the local viscosity setting the slip length (defaults to the
    liquid viscosity).
    """
    eta = laws.fluids.eta_l if eta is None else eta
    ell = channel.ell
    s = eta * wetting.nu2
    return wall_velocity(t, channel) * (1.0 - np.asarray(x2, dtype=float) / ell) * ell / (ell + s)


def _column_viscosity(eta_c: np.ndarray, side: int) -> float:
    col = eta_c[side]
    return 0.5 * (col[0] + col[-1])


def boundary_u(grid, t, channel, wetting, laws, eta_c):
    """u on the x = 0 and x = lx faces at time ``t``."""
    left = inflow_profile(grid.yc, t, channel, wetting, laws, _column_viscosity(eta_c, 0))
    right = inflow_profile(grid.yc, t, channel, wetting, laws, _column_viscosity(eta_c, -1))
    return left, right


def _xface_avg(a: np.ndarray) -> np.ndarray:
    """Arithmetic mean of a cell array onto x-faces (one-sided at the ends)."""
    out = np.empty((a.shape[0] + 1,) + a.shape[1:])
    out[1:-1] = 0.5 * (a[1:] + a[:-1])
    out[0], out[-1] = a[0], a[-1]
    return out


def _yface_avg(a: np.ndarray) -> np.ndarray:
    return _xface_avg(a.T).T


def wall_traces(phi, phi_wall=None):
    """Order parameter on the bottom and top walls (cell-center columns)."""
    if phi_wall is not None:
        return phi_wall[0], phi_wall[1]
    return phi[:, 0], phi[:, -1]


def uncompensated_young_stress(phi, laws: MaterialLaws, wetting: WettingModel, grid: StaggeredGrid,
                               epsilon: float, phi_wall=None, phi_prev=None):
    """L = sigma*eps dn(phi) + sigma_sf'(phi) on both walls, at cell columns.

    For the static condition the normal derivative is the one imposed by
    the ghost closure from the previous level, so L reduces to the change
    of ``sigma_sf'`` at the wall over the step (zero at steady state).
    """
    if wetting.nu1 is INFINITE:
        prev = phi if phi_prev is None else phi_prev
        return (laws.d_sigma_sf(phi[:, 0]) - laws.d_sigma_sf(prev[:, 0]),
                laws.d_sigma_sf(phi[:, -1]) - laws.d_sigma_sf(prev[:, -1]))
    sig = laws.sigma
    out = []
    for k, (row, h) in enumerate(((phi[:, 0], grid.dy[0]), (phi[:, -1], grid.dy[-1]))):
        w = phi_wall[k]
        out.append(sig * epsilon * 2.0 * (w - row) / h + laws.d_sigma_sf(w))
    return tuple(out)


def wall_shear_gradients(u, eta_c, young, phi_w, u_wall, nu2, grid: StaggeredGrid):
    """du/dy on the bottom and top walls at every x-face.

    Solves the flat-wall slip condition for the wall gradient with the
    wall value reconstructed as ``u_0 -/+ (dy/2) du/dy``:

        bottom: u_S - u_w     =  nu2 (eta du/dy + L dphi/dx)
        top:    u_S - (-u_w)  =  nu2 (-eta du/dy + L dphi/dx)

    ``young`` is the pair of L arrays and ``phi_w`` the pair of wall traces.
    """
    out = []
    for k in (0, 1):
        eta_f = _xface_avg(eta_c[:, 0 if k == 0 else -1])
        L_f = _xface_avg(young[k])
        w = phi_w[k]
        dphidx = np.zeros(grid.nx + 1)
        dphidx[1:-1] = (w[1:] - w[:-1]) / grid.dxc
        s = eta_f * nu2
        if k == 0:
            h = grid.dy[0]
            out.append((u[:, 0] - u_wall - nu2 * L_f * dphidx) / (s + 0.5 * h))
        else:
            h = grid.dy[-1]
            out.append((-u_wall + nu2 * L_f * dphidx - u[:, -1]) / (s + 0.5 * h))
    return out[0], out[1]


def apply_gnbc(u, phi, mu, wetting, laws, u_wall, grid: StaggeredGrid, epsilon: float,
               phi_wall=None, phi_prev=None):
    """Ghost rows of the tangential velocity below and above the walls.

    ``mu`` does not enter: on a flat wall the pressure and the isotropic
    part of the capillary stress have no tangential component.
    """
    eta_c = laws.viscosity(phi)
    young = uncompensated_young_stress(phi, laws, wetting, grid, epsilon, phi_wall, phi_prev)
    gb, gt = wall_shear_gradients(u, eta_c, young, wall_traces(phi, phi_wall), u_wall,
                                  wetting.nu2, grid)
    return u[:, 0] - grid.dy[0] * gb, u[:, -1] + grid.dy[-1] * gt


# --------------------------------------------------------------------------
# Discrete terms
# --------------------------------------------------------------------------

def _corner_avg(a: np.ndarray) -> np.ndarray:
    """Mean of the (up to four) cells touching each grid corner."""
    p = np.pad(a, 1, mode="edge")
    return 0.25 * (p[1:, 1:] + p[:-1, 1:] + p[1:, :-1] + p[:-1, :-1])


def stress_divergence(u, v, eta_c, gb, gt, grid: StaggeredGrid):
    """div(eta (grad u + grad u^T)) at interior x-faces and interior y-faces.

    ``u`` must already carry its boundary values; ``gb`` and ``gt`` are the
    wall shear gradients. Returns arrays of shape ``(nx-1, ny)`` and
    ``(nx, ny-1)``.
    """
    nx, ny = grid.nx, grid.ny
    txx = 2.0 * eta_c * (u[1:] - u[:-1]) / grid.dx[:, None]
    tyy = 2.0 * eta_c * (v[:, 1:] - v[:, :-1]) / grid.dy[None, :]
    dudy = np.empty((nx + 1, ny + 1))
    dudy[:, 1:-1] = (u[:, 1:] - u[:, :-1]) / grid.dyc[None, :]
    dudy[:, 0], dudy[:, -1] = gb, gt
    dvdx = np.zeros((nx + 1, ny + 1))
    dvdx[1:-1, :] = (v[1:] - v[:-1]) / grid.dxc[:, None]
    dvdx[0, :] = v[0] / (0.5 * grid.dx[0])
    dvdx[-1, :] = -v[-1] / (0.5 * grid.dx[-1])
    dvdx[:, 0] = dvdx[:, -1] = 0.0
    txy = _corner_avg(eta_c) * (dudy + dvdx)
    fu = (txx[1:] - txx[:-1]) / grid.dxc[:, None] + (txy[1:-1, 1:] - txy[1:-1, :-1]) / grid.dy[None, :]
    fv = (txy[1:, 1:-1] - txy[:-1, 1:-1]) / grid.dx[:, None] + (tyy[:, 1:] - tyy[:, :-1]) / grid.dyc[None, :]
    return fu, fv


def convection(u, v, au, av, gb, gt, grid: StaggeredGrid):
    """((a . grad) u, (a . grad) v) at interior faces with upwind-biased differences.

    ``au``/``av`` are the advecting velocity components on x-/y-faces.
    """
    nx, ny = grid.nx, grid.ny
    # x-momentum
    a_c = 0.5 * (au[1:] + au[:-1])
    uc = upwind_midpoints(u, grid.xf, grid.xc, a_c)  # (nx, ny)
    dudx = (uc[1:] - uc[:-1]) / grid.dxc[:, None]
    av_corner = np.zeros((nx + 1, ny + 1))
    av_corner[1:-1] = 0.5 * (av[1:] + av[:-1])
    av_corner[0], av_corner[-1] = av[0], av[-1]
    uy = np.empty((nx + 1, ny + 1))
    uy[:, 1:-1] = upwind_midpoints(u.T, grid.yc, grid.yf[1:-1], av_corner[:, 1:-1].T).T
    uy[:, 0] = u[:, 0] - 0.5 * grid.dy[0] * gb
    uy[:, -1] = u[:, -1] + 0.5 * grid.dy[-1] * gt
    dudy = (uy[:, 1:] - uy[:, :-1]) / grid.dy[None, :]
    ay_u = 0.5 * (av_corner[:, 1:] + av_corner[:, :-1])
    cu = au[1:-1] * dudx + ay_u[1:-1] * dudy[1:-1]
    # y-momentum
    b_c = 0.5 * (av[:, 1:] + av[:, :-1])
    vc = upwind_midpoints(v.T, grid.yf, grid.yc, b_c.T).T  # (nx, ny)
    dvdy = (vc[:, 1:] - vc[:, :-1]) / grid.dyc[None, :]
    au_corner = np.zeros((nx + 1, ny + 1))
    au_corner[:, 1:-1] = 0.5 * (au[:, 1:] + au[:, :-1])
    au_corner[:, 0], au_corner[:, -1] = au[:, 0], au[:, -1]
    vx = np.zeros((nx + 1, ny + 1))
    vx[1:-1] = upwind_midpoints(v, grid.xc, grid.xf[1:-1], au_corner[1:-1])
    dvdx = (vx[1:] - vx[:-1]) / grid.dx[:, None]
    ax_v = 0.5 * (au_corner[1:] + au_corner[:-1])
    cv = ax_v[:, 1:-1] * dvdx[:, 1:-1] + av[:, 1:-1] * dvdy
    return cu, cv


def capillary_force(phi, mu, grid: StaggeredGrid):
    """mu grad(phi) at interior faces, shapes ``(nx-1, ny)`` and ``(nx, ny-1)``."""
    fx = 0.5 * (mu[1:] + mu[:-1]) * (phi[1:] - phi[:-1]) / grid.dxc[:, None]
    fy = 0.5 * (mu[:, 1:] + mu[:, :-1]) * (phi[:, 1:] - phi[:, :-1]) / grid.dyc[None, :]
    return fx, fy


# --------------------------------------------------------------------------
# Workspace
# --------------------------------------------------------------------------

def advecting_velocity(u, v, mu, rho_fx, rho_fy, c_J: float, grid: StaggeredGrid):
    """Momentum-advecting velocity u + J/rho with J = c_J grad(mu)."""
    if c_J == 0.0:
        return u, v
    g = grid
    jx = np.zeros_like(u)
    jy = np.zeros_like(v)
    jx[1:-1] = c_J * (mu[1:] - mu[:-1]) / g.dxc[:, None]
    jy[:, 1:-1] = c_J * (mu[:, 1:] - mu[:, :-1]) / g.dyc[None, :]
    return u + jx / rho_fx, v + jy / rho_fy


def _second_difference(h_between, h_cv, end_coef=(0.0, 0.0)):
    """1D operator sum of (flux differences)/cv on interior unknowns.

    ``h_between`` are the ``n - 1`` spacings between unknowns, ``h_cv`` the
    ``n`` control-volume widths and ``end_coef`` the homogeneous boundary
    flux coefficients (flux = -c * value at the first unknown).
    """
    n = h_cv.size
    main = np.zeros(n)
    off = 1.0 / h_between
    main[:-1] -= off
    main[1:] -= off
    main[0] -= end_coef[0]
    main[-1] -= end_coef[1]
    m = sp.diags([main, off, off], [0, 1, -1], shape=(n, n))
    return sp.diags(1.0 / h_cv) @ m


class NsWorkspace:
    """Implicit viscous operators and the projection operator.

    Constant-density operators are factorized once per dt; variable density
    triggers refactorization every step.
    """

    def __init__(self, grid: StaggeredGrid, laws: MaterialLaws, wetting: WettingModel,
                 channel: ChannelSpec, epsilon: float, mobility: float,
                 solver: str = "direct", tol: float = 1e-10):
        self.grid = grid
        self.laws = laws
        self.wetting = wetting
        self.channel = channel
        self.epsilon = float(epsilon)
        self.m = float(mobility)
        self.solver = solver
        self.tol = tol
        self.eta_max = max(laws.fluids.eta_l, laws.fluids.eta_a)
        self.c_J = laws.jflux_coefficient(mobility)
        g = grid
        s = self.eta_max * wetting.nu2
        wall_b = 1.0 / (s + 0.5 * g.dy[0])
        wall_t = 1.0 / (s + 0.5 * g.dy[-1])
        lxu = _second_difference(g.dx[1:-1], g.dxc, (1.0 / g.dx[0], 1.0 / g.dx[-1]))
        lyu = _second_difference(g.dyc, g.dy, (wall_b, wall_t))
        lxv = _second_difference(g.dxc, g.dx, (2.0 / g.dx[0], 2.0 / g.dx[-1]))
        lyv = _second_difference(g.dy[1:-1], g.dyc, (1.0 / g.dy[0], 1.0 / g.dy[-1]))
        self.Au = self.eta_max * (sp.kron(lxu, sp.identity(g.ny)) + sp.kron(sp.identity(g.nx - 1), lyu))
        self.Av = self.eta_max * (sp.kron(lxv, sp.identity(g.ny - 1)) + sp.kron(sp.identity(g.nx), lyv))
        self.Au, self.Av = self.Au.tocsc(), self.Av.tocsc()
        self._visc_key = None
        self._proj_key = None

    # -- factorizations ----------------------------------------------------
    def _factor(self, M):
        if self.solver == "direct":
            lu = spla.splu(M.tocsc())
            return lu.solve
        ilu = spla.spilu(M.tocsc(), drop_tol=1e-6, fill_factor=10)
        Mop = spla.LinearOperator(M.shape, ilu.solve)

        def solve(b):
            x, info = spla.bicgstab(M, b, M=Mop, rtol=self.tol, atol=0.0, maxiter=500)
            if info != 0:
                raise StepFailure(f"NS Krylov solve did not converge (info={info})")
            return x

        return solve

    def viscous_solvers(self, dt, rho_u, rho_v):
        key = (float(dt), None if not self.laws.matched_density else "const")
        if key != self._visc_key or not self.laws.matched_density:
            Mu = sp.diags(rho_u.ravel() / dt) - self.Au
            Mv = sp.diags(rho_v.ravel() / dt) - self.Av
            self._solve_u, self._solve_v = self._factor(Mu), self._factor(Mv)
            self._visc_key = key
        return self._solve_u, self._solve_v

    def projection_solver(self, rho_fx, rho_fy):
        """Solver for D diag(1/rho) G psi = r with a mean-zero constraint."""
        if self._proj_key == "const" and self.laws.matched_density:
            return self._solve_p
        g = self.grid
        P = g.Dx @ sp.diags(1.0 / rho_fx.ravel()) @ g.Gx + g.Dy @ sp.diags(1.0 / rho_fy.ravel()) @ g.Gy
        w = g.vol.ravel()[:, None]
        K = sp.bmat([[P, sp.csr_matrix(w)], [sp.csr_matrix(w.T), None]], format="csc")
        n = g.ncells
        if self.solver == "direct":
            lu = spla.splu(K)

            def solve(r):
                return lu.solve(np.append(r, 0.0))[:n]
        else:
            raw = self._factor(K)

            def solve(r):
                return raw(np.append(r, 0.0))[:n]

        self._solve_p = solve
        self._proj_key = "const" if self.laws.matched_density else None
        return solve

    # -- helpers -------------------------------------------------------------
    def face_density(self, phi):
        rho_c = self.laws.density(phi)
        return rho_c, _xface_avg(rho_c), _yface_avg(rho_c)

    def advecting_velocity(self, u, v, mu, rho_fx, rho_fy):
        if self.c_J == 0.0 and DEBUG:
            assert self.laws.matched_density
        return advecting_velocity(u, v, mu, rho_fx, rho_fy, self.c_J, self.grid)

    def project(self, us, vs, rho_fx, rho_fy, dt):
        """Make (us, vs) discretely divergence-free; returns (u, v, psi)."""
        g = self.grid
        solve = self.projection_solver(rho_fx, rho_fy)
        r = (g.Dx @ us.ravel() + g.Dy @ vs.ravel()) / dt
        psi = solve(r)
        if not np.all(np.isfinite(psi)):
            raise StepFailure("pressure solve produced non-finite values")
        gx = (g.Gx @ psi).reshape(us.shape)
        gy = (g.Gy @ psi).reshape(vs.shape)
        u = us - dt * gx / rho_fx
        v = vs - dt * gy / rho_fy
        return u, v, psi.reshape(g.shape)

    def initial_pressure(self, phi, mu):
        """Pressure balancing the capillary force of the initial state."""
        g = self.grid
        _, rho_fx, rho_fy = self.face_density(phi)
        fx, fy = capillary_force(phi, mu, g)
        bx = np.zeros((g.nx + 1, g.ny))
        by = np.zeros((g.nx, g.ny + 1))
        bx[1:-1] = fx / rho_fx[1:-1]
        by[:, 1:-1] = fy / rho_fy[:, 1:-1]
        solve = self.projection_solver(rho_fx, rho_fy)
        p = solve(g.Dx @ bx.ravel() + g.Dy @ by.ravel()).reshape(g.shape)
        return p - np.sum(p * g.vol) / np.sum(g.vol)


# --------------------------------------------------------------------------
# Step
# --------------------------------------------------------------------------

def ns_step(state: State, phi_new, mu_new, dt, laws: MaterialLaws, wetting: WettingModel,
            channel: ChannelSpec, workspace: NsWorkspace, phi_wall_new=None):
    """Advance velocity and pressure by one step. Returns ``(u, v, p)``."""
    ws, g = workspace, workspace.grid
    t1 = state.t + dt
    uw = wall_velocity(t1, channel)
    rho_c, rho_fx, rho_fy = ws.face_density(phi_new)
    eta_c = laws.viscosity(phi_new)

    u = state.u.copy()
    left, right = boundary_u(g, t1, channel, wetting, laws, eta_c)
    u[0], u[-1] = left, right
    v = state.v

    young = uncompensated_young_stress(phi_new, laws, wetting, g, ws.epsilon, phi_wall_new, state.phi)
    gb, gt = wall_shear_gradients(u, eta_c, young, wall_traces(phi_new, phi_wall_new), uw,
                                  wetting.nu2, g)
    fu, fv = stress_divergence(u, v, eta_c, gb, gt, g)

    gbn, gtn = wall_shear_gradients(state.u, eta_c, young, wall_traces(phi_new, phi_wall_new),
                                    wall_velocity(state.t, channel), wetting.nu2, g)
    au, av = ws.advecting_velocity(state.u, state.v, mu_new, rho_fx, rho_fy)
    cu, cv = convection(state.u, state.v, au, av, gbn, gtn, g)
    kx, ky = capillary_force(phi_new, mu_new, g)
    px = (state.p[1:] - state.p[:-1]) / g.dxc[:, None]
    py = (state.p[:, 1:] - state.p[:, :-1]) / g.dyc[None, :]

    ru = -rho_fx[1:-1] * cu + fu + kx - px
    rv = -rho_fy[:, 1:-1] * cv + fv + ky - py
    solve_u, solve_v = ws.viscous_solvers(dt, rho_fx[1:-1], rho_fy[:, 1:-1])
    du = solve_u(ru.ravel()).reshape(ru.shape)
    dv = solve_v(rv.ravel()).reshape(rv.shape)
    us = u.copy()
    us[1:-1] += du
    vs = np.zeros_like(state.v)
    vs[:, 1:-1] = state.v[:, 1:-1] + dv
    if not (np.all(np.isfinite(us)) and np.all(np.isfinite(vs))):
        raise StepFailure("momentum predictor produced non-finite values")
    u1, v1, psi = ws.project(us, vs, rho_fx, rho_fy, dt)
    p1 = state.p + psi
    p1 -= np.sum(p1 * g.vol) / np.sum(g.vol)
    return u1, v1, p1


def suggest_dt(config, u_max: float | None = None) -> float:
    """Advective and capillary-wave time-step bounds for a case.

    Returns ``min(0.4 h/|u|, 0.5 sqrt(rho h^3/(2 pi sigma_la)))`` with ``h``
    the smallest cell size. The viscous term is implicit and imposes no bound.
    """
    from .grid import StaggeredGrid

    g = StaggeredGrid.from_config(config)
    h = min(g.dx.min(), g.dy.min())
    u_max = config.channel.u_wall_max if u_max is None else u_max
    f = config.fluids
    rho = 0.5 * (f.rho_l + f.rho_a)
    cap = 0.5 * math.sqrt(rho * h ** 3 / (2.0 * math.pi * f.sigma_la))
    adv = 0.4 * h / u_max if u_max > 0 else math.inf
    return min(adv, cap)
