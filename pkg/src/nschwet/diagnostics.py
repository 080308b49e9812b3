"""Energy, dissipation budget and the quantities of interest.

All functions are pure: they read a State and return numbers.
"""
from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from .cahnhilliard import advective_flux_divergence, total_mass
from .grid import StaggeredGrid, State, divergence
from .material import MaterialLaws, double_well
from .navierstokes import (
    _corner_avg, _xface_avg, _yface_avg, advecting_velocity, capillary_force, convection,
    uncompensated_young_stress, wall_shear_gradients, wall_traces, wall_velocity,
)
from .params import INFINITE, ChannelSpec, WettingModel

CSV_HEADER = ("t", "E", "mass", "dx_bottom", "dx_top", "theta_mid", "F_S", "div_max",
              "budget_residual")


class DiagnosticError(ValueError):
    """A quantity of interest is undefined for the given field."""


# --------------------------------------------------------------------------
# Energy and dissipation
# --------------------------------------------------------------------------

def _wall_phi(state: State, wetting: WettingModel):
    if wetting.nu1 is INFINITE or state.phi_wall is None:
        return state.phi[:, 0], state.phi[:, -1]
    return state.phi_wall[0], state.phi_wall[1]


def energy(state: State, laws: MaterialLaws, wetting: WettingModel, grid: StaggeredGrid,
           epsilon: float, parts: bool = False):
    """Discrete total energy: gradient + bulk + kinetic + wall.

    The gradient term is a sum over interior faces; with the static contact
    condition no wall-face gradient enters, which makes the chemical
    potential of the CH step the exact variation of this energy.
    """
    g, phi = grid, state.phi
    sig = laws.sigma
    gx = (phi[1:] - phi[:-1]) / g.dxc[:, None]
    gy = (phi[:, 1:] - phi[:, :-1]) / g.dyc[None, :]
    grad = 0.5 * sig * epsilon * (
        np.sum(gx ** 2 * np.outer(g.dxc, g.dy)) + np.sum(gy ** 2 * np.outer(g.dx, g.dyc))
    )
    if wetting.nu1 is not INFINITE and state.phi_wall is not None:
        for k, row, h in ((0, phi[:, 0], g.dy[0]), (1, phi[:, -1], g.dy[-1])):
            dn = (state.phi_wall[k] - row) / (0.5 * h)
            grad += 0.5 * sig * epsilon * np.sum(dn ** 2 * g.dx * 0.5 * h)
    bulk = (sig / epsilon) * np.sum(double_well(phi) * g.vol)
    rho_c = laws.density(phi)
    rx = _xface_avg(rho_c)
    ry = _xface_avg(rho_c.T).T
    kin = 0.5 * (np.sum(rx * state.u ** 2 * g.u_vol) + np.sum(ry * state.v ** 2 * g.v_vol))
    wb, wt = _wall_phi(state, wetting)
    wall = np.sum(g.dx * (laws.sigma_sf(wb) + laws.sigma_sf(wt)))
    total = float(grad + bulk + kin + wall)
    if parts:
        return {"gradient": float(grad), "bulk": float(bulk), "kinetic": float(kin),
                "wall": float(wall), "total": total}
    return total


@dataclass
class Budget:
    dEdt: float
    diffusion: float
    viscous: float
    wall_slip: float
    wall_relaxation: float
    production: float
    numerical: float = 0.0

    @property
    def dissipation(self) -> float:
        return self.diffusion + self.viscous + self.wall_slip + self.wall_relaxation + self.numerical

    @property
    def residual(self) -> float:
        return self.dEdt + self.dissipation - self.production

    @property
    def relative_residual(self) -> float:
        scale = max(abs(self.dEdt), self.dissipation, abs(self.production))
        return abs(self.residual) / scale if scale > 0 else 0.0


def viscous_dissipation(u, v, eta_c, gb, gt, grid: StaggeredGrid) -> float:
    """Discrete integral of grad(u) : tau."""
    g = grid
    ux = (u[1:] - u[:-1]) / g.dx[:, None]
    vy = (v[:, 1:] - v[:, :-1]) / g.dy[None, :]
    normal = np.sum(2.0 * eta_c * (ux ** 2 + vy ** 2) * g.vol)
    nx, ny = g.nx, g.ny
    dudy = np.empty((nx + 1, ny + 1))
    dudy[:, 1:-1] = (u[:, 1:] - u[:, :-1]) / g.dyc[None, :]
    dudy[:, 0], dudy[:, -1] = gb, gt
    dvdx = np.zeros((nx + 1, ny + 1))
    dvdx[1:-1] = (v[1:] - v[:-1]) / g.dxc[:, None]
    dvdx[0] = v[0] / (0.5 * g.dx[0])
    dvdx[-1] = -v[-1] / (0.5 * g.dx[-1])
    dvdx[:, 0] = dvdx[:, -1] = 0.0
    wx = np.concatenate([[0.5 * g.dx[0]], g.dxc, [0.5 * g.dx[-1]]])
    wy = np.concatenate([[0.5 * g.dy[0]], g.dyc, [0.5 * g.dy[-1]]])
    shear = np.sum(_corner_avg(eta_c) * (dudy + dvdx) ** 2 * np.outer(wx, wy))
    return float(normal + shear)


def dissipation_budget(state_n: State, state_np1: State, dt: float, laws: MaterialLaws,
                       wetting: WettingModel, grid: StaggeredGrid, channel: ChannelSpec,
                       epsilon: float, mobility: float, stab_s: float = 2.0) -> Budget:
    """Energy rate against dissipation and wall-work production over one step.

    Dissipation is evaluated at the new level: mobility diffusion
    ``m |grad mu|^2``, viscous ``grad u : tau``, wall slip
    ``(u_S - u_w)^2 / nu2`` and wall relaxation ``(dphi_w/dt)^2 / nu1``.
    ``numerical`` collects what the time stepping and upwinding remove on
    their own: the exact dissipation of the stabilized CH step, the
    mismatch between upwinded phase transport and capillary work, and the
    kinetic-energy loss of the momentum step.
    Production is the work done on the fluid by the moving walls and
    through the inflow/outflow boundaries (viscous and pressure work plus
    kinetic-energy flux). In a closed box with resting walls it vanishes.
    """
    g = grid
    e0 = energy(state_n, laws, wetting, g, epsilon)
    e1 = energy(state_np1, laws, wetting, g, epsilon)
    mu = state_np1.mu
    mx = (mu[1:] - mu[:-1]) / g.dxc[:, None]
    my = (mu[:, 1:] - mu[:, :-1]) / g.dyc[None, :]
    diff = mobility * (np.sum(mx ** 2 * np.outer(g.dxc, g.dy)) + np.sum(my ** 2 * np.outer(g.dx, g.dyc)))
    phi = state_np1.phi
    eta_c = laws.viscosity(phi)
    uw = wall_velocity(state_np1.t, channel)
    young = uncompensated_young_stress(phi, laws, wetting, g, epsilon, state_np1.phi_wall, state_n.phi)
    pw = wall_traces(phi, state_np1.phi_wall if wetting.nu1 is not INFINITE else None)
    gb, gt = wall_shear_gradients(state_np1.u, eta_c, young, pw, uw, wetting.nu2, g)
    visc = viscous_dissipation(state_np1.u, state_np1.v, eta_c, gb, gt, g)
    wx = np.concatenate([[0.5 * g.dx[0]], g.dxc, [0.5 * g.dx[-1]]])
    slip = 0.0
    prod = 0.0
    for k, grad in ((0, gb), (1, gt)):
        eta_f = _xface_avg(eta_c[:, 0 if k == 0 else -1])
        sign = 1.0 if k == 0 else -1.0
        u_row = state_np1.u[:, 0] if k == 0 else state_np1.u[:, -1]
        u_s = u_row - sign * 0.5 * (g.dy[0] if k == 0 else g.dy[-1]) * grad
        wall_u = sign * uw
        if wetting.nu2 > 0:
            slip += np.sum((u_s - wall_u) ** 2 * wx) / wetting.nu2
        # wall speed times the shear traction the wall exerts on the fluid
        prod -= np.sum(wall_u * sign * eta_f * grad * wx)
    relax = 0.0
    if wetting.nu1 is not INFINITE and state_n.phi_wall is not None and state_np1.phi_wall is not None:
        rate = (state_np1.phi_wall - state_n.phi_wall) / dt
        relax = float(np.sum(rate ** 2 * g.dx[None, :]) / wetting.nu1)
    # inflow/outflow boundaries: work of the viscous traction on the imposed velocity
    uxl = (state_np1.u[1] - state_np1.u[0]) / g.dx[0]
    uxr = (state_np1.u[-1] - state_np1.u[-2]) / g.dx[-1]
    prod += np.sum((-2.0 * eta_c[0] * uxl * state_np1.u[0] + 2.0 * eta_c[-1] * uxr * state_np1.u[-1]) * g.dy)
    # pressure work and kinetic-energy flux through the same boundaries
    rho_c = laws.density(phi)
    p = state_np1.p
    ul, ur = state_np1.u[0], state_np1.u[-1]
    prod += np.sum((p[0] * ul - p[-1] * ur) * g.dy)
    prod += np.sum(0.5 * (rho_c[0] * ul ** 3 - rho_c[-1] * ur ** 3) * g.dy)
    num = _numerical_dissipation(state_n, state_np1, dt, laws, wetting, g, epsilon, stab_s)
    num += _transport_mismatch(state_n, state_np1, g)
    num += _momentum_numerical(state_n, state_np1, dt, laws, wetting, g, channel, epsilon, mobility)
    return Budget(
        dEdt=(e1 - e0) / dt, diffusion=float(diff), viscous=visc, wall_slip=float(slip),
        wall_relaxation=relax, production=float(prod), numerical=num,
    )


def _numerical_dissipation(state_n: State, state_np1: State, dt, laws, wetting, grid, epsilon,
                           stab_s: float = 2.0) -> float:
    """Energy removed by the time discretization itself over one step.

    For the Cahn-Hilliard part this is exact for the stabilized scheme:
    gradient energy of the increment, the stabilization term minus the
    Taylor remainder of the bulk and wall potentials. The momentum
    update has no such closed form and is not included.
    """
    g, sig = grid, laws.sigma
    p0, p1 = state_n.phi, state_np1.phi
    d = p1 - p0
    gx = (d[1:] - d[:-1]) / g.dxc[:, None]
    gy = (d[:, 1:] - d[:, :-1]) / g.dyc[None, :]
    grad = 0.5 * sig * epsilon * (np.sum(gx ** 2 * np.outer(g.dxc, g.dy)) + np.sum(gy ** 2 * np.outer(g.dx, g.dyc)))
    rem = double_well(p1) - double_well(p0) - (p0 ** 3 - p0) * d
    bulk = (sig / epsilon) * np.sum((stab_s * d ** 2 - rem) * g.vol)
    wall = 0.0
    if wetting.nu1 is INFINITE:
        for row0, row1 in ((p0[:, 0], p1[:, 0]), (p0[:, -1], p1[:, -1])):
            dr = row1 - row0
            wall -= np.sum((laws.sigma_sf(row1) - laws.sigma_sf(row0) - laws.d_sigma_sf(row0) * dr) * g.dx)
    return float((grad + bulk + wall) / dt)


def _transport_mismatch(state_n: State, state_np1: State, grid: StaggeredGrid) -> float:
    """Energy lost between phase-field transport and capillary work.

    The CH step removes ``<mu, div(phi u)>`` with upwinded phi at level n;
    the momentum step gains ``<mu grad(phi), u>`` at level n+1. The two
    agree in the continuum; their difference is upwind and splitting
    dissipation.
    """
    g = grid
    mu = state_np1.mu
    adv = np.sum(mu * advective_flux_divergence(state_n.phi, state_n.u, state_n.v, g) * g.vol)
    fx, fy = capillary_force(state_np1.phi, mu, g)
    cap = (np.sum(fx * state_np1.u[1:-1] * g.u_vol[1:-1])
           + np.sum(fy * state_np1.v[:, 1:-1] * g.v_vol[:, 1:-1]))
    return float(adv - cap)


def _momentum_numerical(state_n: State, state_np1: State, dt, laws, wetting, grid, channel,
                        epsilon, mobility) -> float:
    """Kinetic energy removed by the momentum step beyond viscous dissipation.

    The backward-Euler increment dissipates ``rho |u1 - u0|^2 / 2``; the
    explicit upwinded convection does work ``<rho (a . grad) u0, u1>``,
    which a skew-symmetric form would make vanish.
    """
    g = grid
    rho_c = laws.density(state_np1.phi)
    rx, ry = _xface_avg(rho_c), _yface_avg(rho_c)
    du, dv = state_np1.u - state_n.u, state_np1.v - state_n.v
    inc = 0.5 * (np.sum(rx * du ** 2 * g.u_vol) + np.sum(ry * dv ** 2 * g.v_vol)) / dt
    phi = state_np1.phi
    eta_c = laws.viscosity(phi)
    young = uncompensated_young_stress(phi, laws, wetting, g, epsilon, state_np1.phi_wall, state_n.phi)
    pw = wall_traces(phi, state_np1.phi_wall)
    gb, gt = wall_shear_gradients(state_n.u, eta_c, young, pw, wall_velocity(state_n.t, channel),
                                  wetting.nu2, g)
    au, av = advecting_velocity(state_n.u, state_n.v, state_np1.mu, rx, ry,
                                laws.jflux_coefficient(mobility), g)
    cu, cv = convection(state_n.u, state_n.v, au, av, gb, gt, g)
    conv = (np.sum(rx[1:-1] * cu * state_np1.u[1:-1] * g.u_vol[1:-1])
            + np.sum(ry[:, 1:-1] * cv * state_np1.v[:, 1:-1] * g.v_vol[:, 1:-1]))
    return float(inc + conv)


# --------------------------------------------------------------------------
# Interface geometry
# --------------------------------------------------------------------------

def _single_crossing(x: np.ndarray, s: np.ndarray, what: str) -> float:
    pos = s > 0
    idx = np.nonzero(pos[:-1] != pos[1:])[0]
    if idx.size != 1:
        raise DiagnosticError(f"{what}: expected one sign change of phi, found {idx.size}")
    i = idx[0]
    return float(x[i] + (x[i + 1] - x[i]) * s[i] / (s[i] - s[i + 1]))


def wall_trace(phi: np.ndarray, phi_wall=None):
    """phi on both walls by linear extrapolation of the two adjacent rows."""
    if phi_wall is not None:
        return phi_wall[0], phi_wall[1]
    return 1.5 * phi[:, 0] - 0.5 * phi[:, 1], 1.5 * phi[:, -1] - 0.5 * phi[:, -2]


def contact_points(phi: np.ndarray, grid: StaggeredGrid, phi_wall=None) -> tuple[float, float]:
    """x-positions of the phi = 0 crossings on the bottom and top walls.

    Raises DiagnosticError when a wall trace has zero or several sign
    changes.
    """
    b, t = wall_trace(phi, phi_wall)
    return _single_crossing(grid.xc, b, "bottom wall"), _single_crossing(grid.xc, t, "top wall")


def interface_polyline(phi: np.ndarray, grid: StaggeredGrid) -> np.ndarray:
    """Points ``(x, y)`` of the phi = 0 level set on every cell row.

    Rows without exactly one crossing get NaN.
    """
    pts = np.full((grid.ny, 2), np.nan)
    for j in range(grid.ny):
        try:
            pts[j] = (_single_crossing(grid.xc, phi[:, j], "row"), grid.yc[j])
        except DiagnosticError:
            pass
    return pts


def _bilinear(field: np.ndarray, xs: np.ndarray, ys: np.ndarray, x: float, y: float) -> float:
    i = int(np.clip(np.searchsorted(xs, x) - 1, 0, xs.size - 2))
    j = int(np.clip(np.searchsorted(ys, y) - 1, 0, ys.size - 2))
    tx = (x - xs[i]) / (xs[i + 1] - xs[i])
    ty = (y - ys[j]) / (ys[j + 1] - ys[j])
    return float(
        (1 - tx) * (1 - ty) * field[i, j] + tx * (1 - ty) * field[i + 1, j]
        + (1 - tx) * ty * field[i, j + 1] + tx * ty * field[i + 1, j + 1]
    )


def midbox_angle(phi: np.ndarray, grid: StaggeredGrid, channel: ChannelSpec) -> float:
    """Signed angle from (-1, 0) to grad(phi) at the box center.

    Counter-clockwise is positive, so an interface leaning with its bottom
    end downstream of the bottom wall motion gives a positive angle.
    """
    gx, gy = np.gradient(phi, grid.xc, grid.yc, edge_order=2)
    x, y = channel.interface_x0, channel.ell
    ax = _bilinear(gx, grid.xc, grid.yc, x, y)
    ay = _bilinear(gy, grid.xc, grid.yc, x, y)
    if math.hypot(ax, ay) == 0.0:
        raise DiagnosticError("grad(phi) vanishes at the box center")
    return math.atan2(-ay, -ax)


def shear_force_excess(state: State, laws: MaterialLaws, grid: StaggeredGrid, channel: ChannelSpec,
                       wetting: WettingModel, epsilon: float) -> float:
    """Excess wall shear force relative to single-phase slip Couette flow.

    Sums over both walls of
    ``-eta du/dy + sigma*eps dphi/dx dphi/dy + eta d(u_ref)/dy``
    with ``u_ref`` the slip-Couette profile built with the local viscosity.
    The flow is point-symmetric about the box center, so the two walls
    contribute equally and the single-phase value is zero.
    """
    g, phi = grid, state.phi
    eta_c = laws.viscosity(phi)
    uw = wall_velocity(state.t, channel)
    young = uncompensated_young_stress(phi, laws, wetting, g, epsilon, state.phi_wall, None)
    pw = wall_traces(phi, state.phi_wall if wetting.nu1 is not INFINITE else None)
    gb, gt = wall_shear_gradients(state.u, eta_c, young, pw, uw, wetting.nu2, g)
    sig = laws.sigma
    total = 0.0
    for k, grad in ((0, gb), (1, gt)):
        col = 0 if k == 0 else -1
        w = pw[k]
        eta_w = laws.viscosity(w)
        dudy = 0.5 * (grad[1:] + grad[:-1])
        dphidx = np.gradient(w, g.xc)
        if wetting.nu1 is INFINITE:
            dn = -laws.d_sigma_sf(phi[:, col]) / (sig * epsilon)
        else:
            dn = (w - phi[:, col]) / (0.5 * g.dy[col])
        dphidy = -dn if k == 0 else dn
        ref = -uw / (channel.ell + eta_w * wetting.nu2)
        eta_u = 0.5 * (_xface_avg(eta_c[:, col])[1:] + _xface_avg(eta_c[:, col])[:-1])
        integrand = -eta_u * dudy + sig * epsilon * dphidx * dphidy + eta_u * ref
        total += float(np.sum(integrand * g.dx))
    return total


# --------------------------------------------------------------------------
# Records, equilibration, CSV
# --------------------------------------------------------------------------

@dataclass
class QoiRecord:
    t: float
    E: float
    mass: float
    dx_bottom: float
    dx_top: float
    theta_mid: float
    F_S: float
    div_max: float
    budget_residual: float


def measure(state: State, laws, wetting, grid, channel, epsilon, budget_residual=float("nan")) -> QoiRecord:
    """Evaluate every quantity of interest; undefined geometry gives NaN."""
    try:
        xb, xt = contact_points(state.phi, grid, state.phi_wall)
        dxb, dxt = xb - channel.interface_x0, xt - channel.interface_x0
    except DiagnosticError:
        dxb = dxt = float("nan")
    try:
        th = midbox_angle(state.phi, grid, channel)
    except DiagnosticError:
        th = float("nan")
    return QoiRecord(
        t=float(state.t),
        E=energy(state, laws, wetting, grid, epsilon),
        mass=total_mass(state.phi, grid),
        dx_bottom=float(dxb),
        dx_top=float(dxt),
        theta_mid=float(th),
        F_S=shear_force_excess(state, laws, grid, channel, wetting, epsilon),
        div_max=float(np.abs(divergence(state.u, state.v, grid)).max()),
        budget_residual=float(budget_residual),
    )


class EquilibrationDetector:
    """Flags equilibrium when (dx, theta, F_S) change little over a window.

    A quantity ``q`` passes when ``|q(t) - q(t - window)| <= tol |q(t)| + floor``.
    Samples before ``t_start`` (the wall ramp) are ignored.
    """

    FLOORS = {"dx": 1e-8, "theta": 1e-6, "F_S": 1e-9}

    def __init__(self, tol: float = 1e-4, window: float = 0.5, t_start: float = 0.0):
        self.tol = tol
        self.window = window
        self.t_start = t_start
        self._hist: list[tuple[float, float, float, float]] = []

    def update(self, rec: QoiRecord) -> bool:
        if rec.t < self.t_start:
            return False
        dx = 0.5 * (rec.dx_bottom - rec.dx_top)
        self._hist.append((rec.t, dx, rec.theta_mid, rec.F_S))
        t = rec.t
        old = [h for h in self._hist if h[0] <= t - self.window + 1e-12]
        if not old:
            return False
        ref = old[-1]
        cur = self._hist[-1]
        floors = (self.FLOORS["dx"], self.FLOORS["theta"], self.FLOORS["F_S"])
        for q1, q0, fl in zip(cur[1:], ref[1:], floors):
            if not (math.isfinite(q1) and math.isfinite(q0)):
                return False
            if abs(q1 - q0) > self.tol * abs(q1) + fl:
                return False
        return True


def write_qoi_csv(path: str | Path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([repr(float(x)) for x in astuple(r)])


def read_qoi_csv(path: str | Path) -> list[QoiRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    names = [f.name for f in fields(QoiRecord)]
    return [QoiRecord(**{n: float(r[n]) for n in names}) for r in rows]
