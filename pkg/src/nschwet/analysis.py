"""Closed-form interface relations, curve fits and extrapolation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import least_squares

from .params import derive_sigma

SQRT2 = math.sqrt(2.0)


def _sech(x):
    return 1.0 / np.cosh(x)


@dataclass(frozen=True)
class InterfaceProfile:
    """Equilibrium tanh profile of a straight interface.

    ``theta`` is the angle between the interface and the x-axis (pi/2 for a
    vertical interface); the interface passes through ``(x0, y0)`` and the
    liquid (phi = 1) lies on its left.
    """

    epsilon: float
    x0: float = 0.1
    y0: float = 0.01
    theta: float = math.pi / 2

    def signed_distance(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (self.x0 - x) * math.sin(self.theta) - (y - self.y0) * math.cos(self.theta)

    def __call__(self, x, y=0.0):
        return np.tanh(self.signed_distance(x, y) / (SQRT2 * self.epsilon))

    def on_grid(self, grid) -> np.ndarray:
        X, Y = np.meshgrid(grid.xc, grid.yc, indexing="ij")
        return self(X, Y)


def delta_eps(s, epsilon):
    """Regularized interface delta function, unit integral over the real line."""
    s = np.asarray(s, dtype=float)
    return 3.0 / (4.0 * SQRT2 * epsilon) * _sech(s / (SQRT2 * epsilon)) ** 4


def delta_eps_star(s, epsilon, theta):
    """Delta function of a tilted profile measured along a wall-parallel line."""
    st = math.sin(theta)
    return st * delta_eps(np.asarray(s, dtype=float) * st, epsilon)


def gl_concentration(epsilon: float, sigma_la: float) -> float:
    """Line integral of the Ginzburg-Landau energy density across a tanh profile."""
    sig = derive_sigma(sigma_la)
    w = SQRT2 * epsilon

    def density(s):
        z = s / w
        dphi = _sech(z) ** 2 / w
        phi = math.tanh(z)
        return 0.5 * sig * epsilon * dphi * dphi + sig / epsilon * 0.25 * (phi * phi - 1.0) ** 2

    L = 20.0 * epsilon
    left, _ = quad(density, -L, 0.0, epsabs=0.0, epsrel=1e-13, limit=200)
    right, _ = quad(density, 0.0, L, epsabs=0.0, epsrel=1e-13, limit=200)
    return left + right


def contact_angle_residual(theta, theta_eq, s, epsilon, sigma_la):
    """Leading-order wall residual of a tilted profile meeting the wall at ``theta``.

    Vanishes identically when ``theta == theta_eq``.
    """
    z = np.asarray(s, dtype=float) * math.sin(theta) / (SQRT2 * epsilon)
    return 0.75 * sigma_la * (math.cos(theta) - math.cos(theta_eq)) * _sech(z) ** 2


def advective_compat_residual(u_n_C, v, theta, s, epsilon):
    """Mismatch between contact-line speed ``u_n_C`` and wall-tangential fluid speed ``v``.

    Vanishes identically when the two speeds agree.
    """
    z = np.asarray(s, dtype=float) * math.sin(theta) / (SQRT2 * epsilon)
    return (u_n_C - v) * math.sin(theta) / (SQRT2 * epsilon) * _sech(z) ** 2


def critical_viscosity_ratio(theta: float) -> float:
    """Viscosity ratio at which the wedge flow near a contact line reverses."""
    if not 0.0 < theta < math.pi:
        raise ValueError("theta must lie in (0, pi)")
    s, c = math.sin(theta), math.cos(theta)
    num = (theta * c - s) * ((theta - math.pi) ** 2 - s * s)
    den = ((theta - math.pi) * c - s) * (theta * theta - s * s)
    return num / den


@dataclass(frozen=True)
class FitResult:
    """f(eps) ~ a * exp(b * eps) * eps**c."""

    a: float
    b: float
    c: float
    rms_log_residual: float

    def __call__(self, eps):
        eps = np.asarray(eps, dtype=float)
        return self.a * np.exp(self.b * eps) * eps ** self.c


def _log_linear_fit(eps, f):
    A = np.column_stack([np.ones_like(eps), eps, np.log(eps)])
    coef, *_ = np.linalg.lstsq(A, np.log(f), rcond=None)
    return coef


def fit_exponential(eps_values, f_values, method: str = "nonlinear") -> FitResult:
    """Fit f(eps) ~ a * exp(b * eps) * eps**c.

    ``method="log"`` solves the linear least-squares problem for
    ``log f = log a + b eps + c log eps``. ``method="nonlinear"`` (default)
    starts from that solution and minimizes the squared misfit of ``f``
    itself, which weights the large samples the way a direct curve fit
    does. Both are exact on noiseless model data; ``f`` is normalized by
    its maximum so that scaling ``f`` only rescales ``a``.
    """
    eps = np.asarray(eps_values, dtype=float)
    f = np.asarray(f_values, dtype=float)
    if eps.shape != f.shape or eps.ndim != 1:
        raise ValueError("eps_values and f_values must be 1D arrays of equal length")
    if eps.size < 3:
        raise ValueError("fit_exponential needs at least three samples")
    if np.any(f <= 0) or np.any(eps <= 0):
        raise ValueError("fit_exponential needs positive eps and f values")
    if method not in ("log", "nonlinear"):
        raise ValueError("method must be 'log' or 'nonlinear'")
    scale = f.max()
    g = f / scale
    coef = _log_linear_fit(eps, g)
    if method == "nonlinear":
        e0 = eps.max()

        basis = np.column_stack([np.ones_like(eps), eps / e0, np.log(eps / e0)])

        def resid(x):
            return np.exp(basis @ x) - g

        def jac(x):
            return np.exp(basis @ x)[:, None] * basis

        x0 = np.array([coef[0] + coef[2] * np.log(e0), coef[1] * e0, coef[2]])
        x = least_squares(resid, x0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15,
                          gtol=1e-15, max_nfev=20000).x
        # Gauss-Newton polish: the optimizer stops on step size well before
        # the parameters settle to round-off
        for _ in range(100):
            step, *_ = np.linalg.lstsq(jac(x), -resid(x), rcond=None)
            x = x + step
            if np.max(np.abs(step)) <= 1e-15 * max(1.0, np.max(np.abs(x))):
                break
        la, b, c = x
        coef = np.array([la - c * np.log(e0), b / e0, c])
    A = np.column_stack([np.ones_like(eps), eps, np.log(eps)])
    res = np.log(g) - A @ coef
    return FitResult(a=float(np.exp(coef[0]) * scale), b=float(coef[1]), c=float(coef[2]),
                     rms_log_residual=float(np.sqrt(np.mean(res ** 2))))


def extrapolate_quadratic(eps_values, q_values) -> float:
    """Value at eps = 0 of the quadratic through three (eps, q) samples."""
    e = np.asarray(eps_values, dtype=float)
    q = np.asarray(q_values, dtype=float)
    if e.shape != (3,) or q.shape != (3,):
        raise ValueError("extrapolate_quadratic needs exactly three samples")
    if len(set(e.tolist())) != 3:
        raise ValueError("eps values must be distinct")
    total = 0.0
    for i in range(3):
        w = 1.0
        for j in range(3):
            if j != i:
                w *= (0.0 - e[j]) / (e[i] - e[j])
        total += w * q[i]
    return float(total)
