"""Physical and model parameters, derived quantities and case configuration.

A case is fully described by a :class:`CaseConfig`, which is read from and
written to a JSON file with a fixed key layout::

    {
      "fluids":    {"rho_l", "rho_a", "eta_l", "eta_a", "sigma_la", "lambda_ratio"},
      "interface": {"epsilon", "mobility"}  or  {"epsilon", "scaling": {"m0", "eps0", "alpha"}},
      "wetting":   {"theta_eq", "nu1" ("inf" or number), "nu2"},
      "channel":   {"lx", "ly", "u_wall_max", "ramp_time", "interface_x0"},
      "numerics":  {"nx", "ny", "x_stretch", "dt", "t_end", "equil_tol",
                    "lin_tol_ch", "lin_tol_p", "stab_s",
                    optional: "sample_dt", "checkpoint_dt", "solver"}
    }

Unknown keys raise :class:`ConfigError`. All values are SI.
"""
from __future__ import annotations

import copy
import enum
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    """Invalid or inconsistent case configuration."""


class Relaxation(enum.Enum):
    """Marker for an infinite contact-angle relaxation coefficient."""

    INFINITE = "inf"

    def __repr__(self) -> str:
        return "INFINITE"


INFINITE = Relaxation.INFINITE


# --------------------------------------------------------------------------
# Derived quantities
# --------------------------------------------------------------------------

def derive_sigma(sigma_la: float) -> float:
    """Rescaled tension sigma with 2*sqrt(2)*sigma = 3*sigma_la."""
    if not sigma_la > 0:
        raise ValueError(f"sigma_la must be positive, got {sigma_la!r}")
    return 3.0 * sigma_la / (2.0 * math.sqrt(2.0))


def young_tensions(theta_eq: float, sigma_la: float) -> tuple[float, float]:
    """Solid-liquid and solid-ambient tensions ``(sigma_sl, sigma_sa)``.

    Only the difference is fixed by Young's relation; the sum is set to
    ``sigma_la`` so that both tensions stay nonnegative on (0, pi).
    """
    if not 0.0 < theta_eq < math.pi:
        raise ValueError(f"theta_eq must lie in (0, pi), got {theta_eq!r}")
    c = math.cos(theta_eq)
    return 0.5 * sigma_la * (1.0 - c), 0.5 * sigma_la * (1.0 + c)


def slip_length_mobility(eta: float, m: float) -> float:
    """Diffusive slip length sqrt(eta*m)."""
    if eta <= 0 or m <= 0:
        raise ValueError("eta and m must be positive")
    return math.sqrt(eta * m)


def slip_length_gnbc(eta: float, nu2: float) -> float:
    """Navier slip length eta*nu2 (zero for a no-slip wall)."""
    if eta <= 0 or nu2 < 0:
        raise ValueError("need eta > 0 and nu2 >= 0")
    return eta * nu2


def capillary_number(eta: float, u_wall_max: float, sigma: float) -> float:
    if eta <= 0 or sigma <= 0 or u_wall_max < 0:
        raise ValueError("need eta > 0, sigma > 0 and u_wall_max >= 0")
    return eta * u_wall_max / sigma


def mobility_of_epsilon(scaling: "MobilityScaling | tuple", epsilon: float) -> float:
    """m(eps) = m0 * (eps/eps0)**alpha."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not isinstance(scaling, MobilityScaling):
        scaling = MobilityScaling(*scaling)
    return scaling.m0 * (epsilon / scaling.eps0) ** scaling.alpha


# --------------------------------------------------------------------------
# Parameter groups
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FluidPair:
    rho_l: float
    rho_a: float
    eta_l: float
    eta_a: float
    sigma_la: float
    lambda_ratio: float = 1.0

    def __post_init__(self):
        for name in ("rho_l", "rho_a", "eta_l", "eta_a", "sigma_la", "lambda_ratio"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"fluids.{name} must be positive")

    @property
    def sigma(self) -> float:
        return derive_sigma(self.sigma_la)


@dataclass(frozen=True)
class MobilityScaling:
    m0: float
    eps0: float
    alpha: float

    def __post_init__(self):
        if not (self.m0 > 0 and self.eps0 > 0):
            raise ConfigError("scaling.m0 and scaling.eps0 must be positive")
        if not 0.0 <= self.alpha < 3.0:
            raise ConfigError("scaling.alpha must lie in [0, 3)")


@dataclass(frozen=True)
class InterfaceModel:
    epsilon: float
    mobility: float | None = None
    scaling: MobilityScaling | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("interface.epsilon must be positive")
        if (self.mobility is None) == (self.scaling is None):
            raise ConfigError("interface needs exactly one of 'mobility' or 'scaling'")
        if self.mobility is not None and not self.mobility > 0:
            raise ConfigError("interface.mobility must be positive")

    @property
    def m(self) -> float:
        if self.scaling is not None:
            return mobility_of_epsilon(self.scaling, self.epsilon)
        return self.mobility


@dataclass(frozen=True)
class WettingModel:
    theta_eq: float
    nu1: float | Relaxation = INFINITE
    nu2: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.theta_eq < math.pi:
            raise ConfigError("wetting.theta_eq must lie in (0, pi)")
        if self.nu1 is not INFINITE and not self.nu1 > 0:
            raise ConfigError("wetting.nu1 must be positive or 'inf'")
        if self.nu2 < 0:
            raise ConfigError("wetting.nu2 must be nonnegative")

    @property
    def equilibrium(self) -> bool:
        """True when the contact angle is imposed as a static Robin condition."""
        return self.nu1 is INFINITE


@dataclass(frozen=True)
class ChannelSpec:
    lx: float = 0.2
    ly: float = 0.02
    u_wall_max: float = 4e-3
    ramp_time: float = 1.0
    interface_x0: float | None = None

    def __post_init__(self):
        if not (self.lx > 0 and self.ly > 0):
            raise ConfigError("channel.lx and channel.ly must be positive")
        if self.u_wall_max < 0 or self.ramp_time < 0:
            raise ConfigError("channel.u_wall_max and ramp_time must be nonnegative")
        if self.interface_x0 is None:
            object.__setattr__(self, "interface_x0", 0.5 * self.lx)
        if not 0.0 < self.interface_x0 < self.lx:
            raise ConfigError("channel.interface_x0 must lie inside the channel")

    @property
    def ell(self) -> float:
        return 0.5 * self.ly


@dataclass(frozen=True)
class Numerics:
    nx: int = 500
    ny: int = 50
    x_stretch: float = 1.0
    dt: float = 1e-3
    t_end: float = 10.0
    equil_tol: float = 1e-4
    lin_tol_ch: float = 1e-9
    lin_tol_p: float = 1e-10
    stab_s: float = 2.0
    sample_dt: float = 0.05
    checkpoint_dt: float = 0.0
    solver: str = "direct"

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ConfigError("numerics.nx and numerics.ny must be at least 4")
        if not self.dt > 0 or not self.t_end >= 0:
            raise ConfigError("numerics.dt must be positive and t_end nonnegative")
        if self.x_stretch < 1.0:
            raise ConfigError("numerics.x_stretch must be >= 1")
        if self.stab_s < 0:
            raise ConfigError("numerics.stab_s must be nonnegative")
        if self.solver not in ("direct", "krylov"):
            raise ConfigError("numerics.solver must be 'direct' or 'krylov'")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))


_KEYS = {
    "fluids": {"rho_l", "rho_a", "eta_l", "eta_a", "sigma_la", "lambda_ratio"},
    "interface": {"epsilon", "mobility", "scaling"},
    "wetting": {"theta_eq", "nu1", "nu2"},
    "channel": {"lx", "ly", "u_wall_max", "ramp_time", "interface_x0"},
    "numerics": {
        "nx", "ny", "x_stretch", "dt", "t_end", "equil_tol", "lin_tol_ch",
        "lin_tol_p", "stab_s", "sample_dt", "checkpoint_dt", "solver",
    },
}
_SCALING_KEYS = {"m0", "eps0", "alpha"}


def _check_keys(where: str, got: Mapping, allowed: set) -> None:
    unknown = set(got) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


@dataclass(frozen=True)
class CaseConfig:
    fluids: FluidPair
    interface: InterfaceModel
    wetting: WettingModel
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    numerics: Numerics = field(default_factory=Numerics)
    name: str = ""

    def __post_init__(self):
        from .grid import StaggeredGrid  # local: grid depends on params

        grid = StaggeredGrid.from_config(self)
        hmax = grid.max_dx_in_window(
            self.interface.epsilon, self.refine_halfwidth(), self.channel.interface_x0
        )
        if hmax > 0.5 * self.interface.epsilon * (1 + 1e-12):
            raise ConfigError(
                f"grid does not resolve the interface: dx {hmax:.3g} > eps/2 "
                f"({0.5 * self.interface.epsilon:.3g}) inside the refined window"
            )

    # -- derived -----------------------------------------------------------
    @property
    def sigma(self) -> float:
        return self.fluids.sigma

    @property
    def mobility(self) -> float:
        return self.interface.m

    @property
    def tensions(self) -> tuple[float, float]:
        return young_tensions(self.wetting.theta_eq, self.fluids.sigma_la)

    def slip_lengths(self) -> dict:
        f, m, nu2 = self.fluids, self.mobility, self.wetting.nu2
        return {
            "s_m": (slip_length_mobility(f.eta_l, m), slip_length_mobility(f.eta_a, m)),
            "s_nu": (slip_length_gnbc(f.eta_l, nu2), slip_length_gnbc(f.eta_a, nu2)),
        }

    def capillary_number(self) -> float:
        return capillary_number(self.fluids.eta_l, self.channel.u_wall_max, self.sigma)

    def refine_halfwidth(self) -> float:
        """Half-width of the x-window that must resolve the interface.

        4*eps + 2*max slip length, widened by the sagitta of the static
        meniscus when the contact angle differs from pi/2.
        """
        s = self.slip_lengths()
        smax = max(*s["s_m"], *s["s_nu"])
        tilt = abs(0.5 * math.pi - self.wetting.theta_eq)
        sag = self.channel.ell * math.tan(0.5 * tilt)
        return 4.0 * self.interface.epsilon + 2.0 * smax + sag

    # -- serialization -----------------------------------------------------
    def to_dict(self) -> dict:
        iface: dict[str, Any] = {"epsilon": self.interface.epsilon}
        if self.interface.scaling is not None:
            iface["scaling"] = asdict(self.interface.scaling)
        else:
            iface["mobility"] = self.interface.mobility
        wet = asdict(self.wetting)
        wet["nu1"] = "inf" if self.wetting.nu1 is INFINITE else self.wetting.nu1
        return {
            "fluids": asdict(self.fluids),
            "interface": iface,
            "wetting": wet,
            "channel": asdict(self.channel),
            "numerics": asdict(self.numerics),
        }

    @classmethod
    def from_dict(cls, data: Mapping, name: str = "") -> "CaseConfig":
        _check_keys("config", data, set(_KEYS))
        for section in ("fluids", "interface", "wetting"):
            if section not in data:
                raise ConfigError(f"missing section '{section}'")
        for section, sub in data.items():
            if not isinstance(sub, Mapping):
                raise ConfigError(f"section '{section}' must be an object")
            _check_keys(section, sub, _KEYS[section])
        try:
            fluids = FluidPair(**data["fluids"])
            iface = dict(data["interface"])
            if "scaling" in iface:
                if not isinstance(iface["scaling"], Mapping):
                    raise ConfigError("interface.scaling must be an object")
                _check_keys("interface.scaling", iface["scaling"], _SCALING_KEYS)
                iface["scaling"] = MobilityScaling(**iface["scaling"])
            interface = InterfaceModel(**iface)
            wet = dict(data["wetting"])
            nu1 = wet.get("nu1", "inf")
            if isinstance(nu1, str):
                if nu1.lower() not in ("inf", "infinity"):
                    raise ConfigError(f"wetting.nu1 must be 'inf' or a number, got {nu1!r}")
                wet["nu1"] = INFINITE
            elif nu1 is None or (isinstance(nu1, float) and math.isinf(nu1)):
                wet["nu1"] = INFINITE
            wetting = WettingModel(**wet)
            channel = ChannelSpec(**data.get("channel", {}))
            numerics = Numerics(**data.get("numerics", {}))
        except TypeError as exc:  # missing required field
            raise ConfigError(str(exc)) from exc
        return cls(fluids, interface, wetting, channel, numerics, name=name)

    @classmethod
    def load(cls, path: str | Path) -> "CaseConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls.from_dict(data, name=path.stem)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def with_overrides(self, overrides: Mapping[str, Any] | list[str]) -> "CaseConfig":
        """Return a copy with dotted-key overrides applied.

        ``overrides`` is a mapping ``{"numerics.dt": 1e-3}`` or a list of
        ``"key=value"`` strings (values parsed as JSON, falling back to str).
        Setting ``interface.mobility`` drops a scaling law and vice versa.
        """
        if not isinstance(overrides, Mapping):
            parsed = {}
            for item in overrides:
                if "=" not in item:
                    raise ConfigError(f"override must be key=value, got {item!r}")
                key, raw = item.split("=", 1)
                try:
                    parsed[key.strip()] = json.loads(raw)
                except json.JSONDecodeError:
                    parsed[key.strip()] = raw
            overrides = parsed
        data = copy.deepcopy(self.to_dict())
        for key, value in overrides.items():
            parts = key.split(".")
            node = data
            for p in parts[:-1]:
                if p not in node:
                    node[p] = {}
                node = node[p]
            node[parts[-1]] = value
            if parts[:2] == ["interface", "mobility"]:
                data["interface"].pop("scaling", None)
            elif parts[:2] == ["interface", "scaling"]:
                data["interface"].pop("mobility", None)
        return CaseConfig.from_dict(data, name=self.name)

    def replace(self, **kwargs) -> "CaseConfig":
        return replace(self, **kwargs)
