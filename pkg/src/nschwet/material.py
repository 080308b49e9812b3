"""Pointwise closure relations for the binary-fluid mixture.

All functions accept scalars or numpy arrays and are vectorized.
"""
from __future__ import annotations

import numpy as np

from .params import FluidPair, young_tensions

MATCHED_DENSITY_RTOL = 1e-12


def double_well(phi):
    """Psi(phi) = (phi^2 - 1)^2 / 4."""
    phi = np.asarray(phi, dtype=float)
    return 0.25 * (phi * phi - 1.0) ** 2


def d_double_well(phi):
    phi = np.asarray(phi, dtype=float)
    return phi ** 3 - phi


class MaterialLaws:
    """Closures bound to one fluid pair and one equilibrium contact angle.

    Parameters
    ----------
    fluids : FluidPair
    theta_eq : float
        Equilibrium contact angle used for the solid-fluid tensions.
    """

    def __init__(self, fluids: FluidPair, theta_eq: float):
        self.fluids = fluids
        self.theta_eq = theta_eq
        self.sigma = fluids.sigma
        self.sigma_sl, self.sigma_sa = young_tensions(theta_eq, fluids.sigma_la)
        self.matched_density = (
            abs(fluids.rho_l - fluids.rho_a) / fluids.rho_l < MATCHED_DENSITY_RTOL
        )
        if self.matched_density:
            self.lam = None
        else:
            self.lam = fluids.rho_a / (fluids.rho_l - fluids.rho_a)

    @classmethod
    def from_config(cls, config) -> "MaterialLaws":
        return cls(config.fluids, config.wetting.theta_eq)

    # -- density -------------------------------------------------------------
    def density(self, phi):
        """Mixture density with the positivity-preserving extension.

        For rho_l > rho_a the linear law is continued by quadratic arcs
        and constant tails outside [-1 - lam, 1 + lam]. Matched densities
        give a constant. For rho_l < rho_a the roles of the phases are
        swapped through phi -> -phi.
        """
        phi = np.asarray(phi, dtype=float)
        f = self.fluids
        if self.matched_density:
            return np.full_like(phi, f.rho_l)
        if f.rho_l < f.rho_a:
            swapped = MaterialLaws(
                FluidPair(f.rho_a, f.rho_l, f.eta_a, f.eta_l, f.sigma_la, f.lambda_ratio),
                np.pi - self.theta_eq,
            )
            return swapped.density(-phi)
        rl, ra, lam = f.rho_l, f.rho_a, self.lam
        out = 0.5 * (1.0 + phi) * rl + 0.5 * (1.0 - phi) * ra
        lo1, lo2 = -1.0 - 2.0 * lam, -1.0 - lam
        hi1, hi2 = 1.0 + lam, 1.0 + 2.0 * lam
        out = np.where(phi <= lo1, 0.25 * ra, out)
        mid_lo = (phi > lo1) & (phi < lo2)
        out = np.where(mid_lo, 0.25 * ra + 0.25 * ra / lam ** 2 * (1.0 + 2.0 * lam + phi) ** 2, out)
        mid_hi = (phi > hi1) & (phi < hi2)
        out = np.where(
            mid_hi, rl + 0.75 * ra - 0.25 * ra / lam ** 2 * (1.0 + 2.0 * lam - phi) ** 2, out
        )
        out = np.where(phi >= hi2, rl + 0.75 * ra, out)
        return out

    # -- viscosity -----------------------------------------------------------
    def viscosity(self, phi):
        """Arrhenius mixture viscosity, phi clamped to [-1, 1]."""
        phi = np.clip(np.asarray(phi, dtype=float), -1.0, 1.0)
        f = self.fluids
        wl = (1.0 + phi) * f.lambda_ratio
        wa = 1.0 - phi
        return np.exp((wl * np.log(f.eta_l) + wa * np.log(f.eta_a)) / (wl + wa))

    # -- wetting -------------------------------------------------------------
    def sigma_sf(self, phi):
        phi = np.asarray(phi, dtype=float)
        dsig = self.sigma_sa - self.sigma_sl
        return 0.25 * (phi ** 3 - 3.0 * phi) * dsig + 0.5 * (self.sigma_sl + self.sigma_sa)

    def d_sigma_sf(self, phi):
        phi = np.asarray(phi, dtype=float)
        return 0.75 * (phi * phi - 1.0) * (self.sigma_sa - self.sigma_sl)

    # -- relative mass flux --------------------------------------------------
    def jflux_coefficient(self, m: float) -> float:
        """c_J such that J = c_J grad(mu)."""
        if not m > 0:
            raise ValueError("mobility must be positive")
        if self.matched_density:
            return 0.0
        return m * (self.fluids.rho_a - self.fluids.rho_l) / 2.0
