"""Preset registry, simulation driver, epsilon sweeps and fixture comparison."""
from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .analysis import InterfaceProfile, critical_viscosity_ratio, extrapolate_quadratic, fit_exponential
from .cahnhilliard import ChWorkspace, StepFailure, ch_step, chemical_potential
from .diagnostics import (
    DiagnosticError, EquilibrationDetector, QoiRecord, contact_points, dissipation_budget,
    interface_polyline, measure, write_qoi_csv,
)
from .fixtures import TOLERANCE_CLASSES, PaperFixture
from .grid import StaggeredGrid, State, design_x_stretch, write_snapshot
from .material import MaterialLaws
from .navierstokes import NsWorkspace, ns_step
from .params import INFINITE, CaseConfig, ConfigError

log = logging.getLogger(__name__)

PRESET_NAMES = ("1A", "1B", "1C", "2A", "2B", "2C")
STATUSES = ("running", "equilibrated", "not_equilibrated", "escaped", "failed")
MAX_HALVINGS = 5
MIN_NY = 8
ESCAPE_WIDTHS = 5.0
WEDGE_REL_THRESHOLD = 1e-4


# --------------------------------------------------------------------------
# Presets
# --------------------------------------------------------------------------

def preset_path(name: str):
    return resources.files("nschwet").joinpath("presets").joinpath(f"{name}.json")


def load_preset(name: str) -> CaseConfig:
    """Load a named preset (``1A`` ... ``2C``) or a JSON config path."""
    if name in PRESET_NAMES:
        data = json.loads(preset_path(name).read_text(encoding="utf-8"))
        return CaseConfig.from_dict(data, name=name)
    path = Path(name)
    if not path.is_file():
        raise ConfigError(f"unknown case {name!r}: not a preset ({', '.join(PRESET_NAMES)}) or a file")
    return CaseConfig.load(path)


def numerics_for_epsilon(config: CaseConfig, epsilon: float, cells_per_eps: float = 4.0,
                         max_uniform_nx: int = 1000, max_ny: int = 200, dt: float | None = None,
                         mobility: float | None = None) -> CaseConfig:
    """Copy of ``config`` at interface width ``epsilon`` with a grid to match.

    The x-window around the interface gets cells of size
    ``epsilon/cells_per_eps``: uniformly when that needs at most
    ``max_uniform_nx`` cells, otherwise by tanh stretching. ``ny`` follows
    the same cell size, clipped to ``[MIN_NY, max_ny]``. Without an
    explicit ``dt`` the base time step is rescaled like ``h**1.5`` and
    then shortened to divide ``sample_dt``. A mobility
    scaling law in ``config`` is kept, so ``m`` follows ``epsilon``;
    ``mobility`` replaces it by a fixed value.
    """
    if not epsilon > 0 or not cells_per_eps >= 2.0:
        raise ConfigError("epsilon must be positive and cells_per_eps >= 2")
    over = {"interface.epsilon": float(epsilon)}
    if mobility is not None:
        over["interface.mobility"] = float(mobility)
    # a coarse uniform grid that certainly passes validation while we design the real one
    ch = config.channel
    h = epsilon / cells_per_eps
    over.update({"numerics.nx": int(math.ceil(ch.lx / (0.5 * epsilon))) + 1, "numerics.x_stretch": 1.0})
    trial = config.with_overrides(over)
    nx_uniform = int(math.ceil(ch.lx / h - 1e-9))
    W = trial.refine_halfwidth()
    nx_stretched = int(math.ceil(3.0 * W / h)) + 200
    if nx_uniform <= max_uniform_nx or nx_uniform <= nx_stretched:
        nx, beta = nx_uniform, 1.0
    else:
        nx = nx_stretched
        beta = design_x_stretch(nx, ch.lx, ch.interface_x0, W, h)
        # round up to 4 significant digits: more stretching only refines the window
        q = 10.0 ** (math.floor(math.log10(beta)) - 3)
        beta = math.ceil(beta / q) * q
    ny = int(min(max(MIN_NY, math.ceil(ch.ly / h - 1e-9)), max_ny))
    if dt is None:
        # capillary-wave bound scales like h**1.5; keep the base config's margin
        h_old = StaggeredGrid.from_config(config).dx.min()
        dt = config.numerics.dt * (h / h_old) ** 1.5
        # a whole number of steps per sampling interval
        sample = config.numerics.sample_dt
        dt = sample / math.ceil(sample / dt * (1.0 - 1e-9))
    over = {"numerics.nx": nx, "numerics.ny": ny, "numerics.x_stretch": beta,
            "numerics.dt": float(dt)}
    return trial.with_overrides(over)


# --------------------------------------------------------------------------
# Initial state
# --------------------------------------------------------------------------

def initial_state(config: CaseConfig, grid: StaggeredGrid | None = None) -> State:
    """Vertical tanh interface at ``interface_x0``, fluid at rest.

    mu is the discrete chemical potential of phi and p balances the
    resulting capillary force, so the state is steady when the walls do
    not move.
    """
    grid = StaggeredGrid.from_config(config) if grid is None else grid
    laws = MaterialLaws.from_config(config)
    eps = config.interface.epsilon
    state = State.zeros(grid)
    prof = InterfaceProfile(eps, x0=config.channel.interface_x0, y0=config.channel.ell)
    state.phi = prof.on_grid(grid)
    if config.wetting.nu1 is not INFINITE:
        b = prof(grid.xc, 0.0)
        t = prof(grid.xc, config.channel.ly)
        state.phi_wall = np.stack([b, t])
    state.mu = chemical_potential(state.phi, laws, config.wetting, grid, eps, state.phi_wall)
    ws = NsWorkspace(grid, laws, config.wetting, config.channel, eps, config.mobility)
    state.p = ws.initial_pressure(state.phi, state.mu)
    return state


# --------------------------------------------------------------------------
# Driver
# --------------------------------------------------------------------------

def _arrays_of(state: State) -> dict:
    out = {"u": state.u, "v": state.v, "p": state.p, "phi": state.phi, "mu": state.mu,
           "t": np.float64(state.t), "step": np.int64(state.step)}
    if state.phi_wall is not None:
        out["phi_wall"] = state.phi_wall
    return out


def _state_of(data) -> State:
    return State(
        t=float(data["t"]), u=data["u"].copy(), v=data["v"].copy(), p=data["p"].copy(),
        phi=data["phi"].copy(), mu=data["mu"].copy(),
        phi_wall=data["phi_wall"].copy() if "phi_wall" in data else None,
        step=int(data["step"]),
    )


@dataclass
class CaseRun:
    """One simulation of a case: driver state plus its outputs.

    Same config and build give bitwise-identical QoI CSVs: the loop is
    sequential and uses no randomness or wall-clock decisions.
    """

    config: CaseConfig
    out_dir: Path | None = None
    sample_dt: float | None = None
    checkpoint_dt: float | None = None
    status: str = "running"
    records: list = field(default_factory=list)
    state: State | None = None
    grid: StaggeredGrid | None = None
    dt: float = 0.0
    message: str = ""
    wall_time: float = 0.0
    equilibrated_at: float = math.nan

    def __post_init__(self):
        num = self.config.numerics
        if self.sample_dt is None:
            self.sample_dt = num.sample_dt
        if self.checkpoint_dt is None:
            self.checkpoint_dt = num.checkpoint_dt
        if not self.sample_dt > 0:
            raise ConfigError("sample_dt must be positive")
        if self.out_dir is not None:
            self.out_dir = Path(self.out_dir)
        self.grid = StaggeredGrid.from_config(self.config)
        self.laws = MaterialLaws.from_config(self.config)
        self.dt = num.dt
        self.detector = EquilibrationDetector(num.equil_tol, t_start=self.config.channel.ramp_time)
        self._next_sample = 0.0
        self._next_checkpoint = self.checkpoint_dt if self.checkpoint_dt > 0 else math.inf
        self._make_workspaces()

    def _make_workspaces(self):
        c, num = self.config, self.config.numerics
        eps, m = c.interface.epsilon, c.mobility
        self.ch_ws = ChWorkspace(self.grid, self.laws, c.wetting, eps, m, num.stab_s,
                                 num.solver, num.lin_tol_ch)
        self.ns_ws = NsWorkspace(self.grid, self.laws, c.wetting, c.channel, eps, m,
                                 num.solver, num.lin_tol_p)

    # -- pieces ------------------------------------------------------------
    def measure(self, state: State, budget_residual=math.nan) -> QoiRecord:
        c = self.config
        return measure(state, self.laws, c.wetting, self.grid, c.channel, c.interface.epsilon,
                       budget_residual)

    def step(self, state: State, dt: float) -> State:
        c = self.config
        phi, mu, pw = ch_step(state, dt, self.laws, c.wetting, self.ch_ws)
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(mu))):
            raise StepFailure("CH step produced non-finite values")
        u, v, p = ns_step(state, phi, mu, dt, self.laws, c.wetting, c.channel, self.ns_ws, pw)
        return State(state.t + dt, u, v, p, phi, mu, pw, state.step + 1)

    def _escaped(self, state: State) -> str | None:
        eps = self.config.interface.epsilon
        try:
            xb, xt = contact_points(state.phi, self.grid, state.phi_wall)
        except DiagnosticError as exc:
            return str(exc)
        margin = ESCAPE_WIDTHS * eps
        for x in (xb, xt):
            if x < margin or x > self.grid.lx - margin:
                return f"contact point at x={x:.4g} within {margin:.3g} of an end"
        return None

    def _budget(self, prev: State, cur: State) -> float:
        c = self.config
        dt = cur.t - prev.t
        if dt <= 0:
            return math.nan
        b = dissipation_budget(prev, cur, dt, self.laws, c.wetting, self.grid, c.channel,
                               c.interface.epsilon, c.mobility, c.numerics.stab_s)
        return b.relative_residual

    def _sample(self, prev: State | None, state: State) -> bool:
        """Record a sample; returns True when the run should stop."""
        rec = self.measure(state, self._budget(prev, state) if prev is not None else math.nan)
        self.records.append(rec)
        why = self._escaped(state)
        if why is not None:
            self.status, self.message = "escaped", why
            return True
        if self.detector.update(rec):
            self.status = "equilibrated"
            self.equilibrated_at = rec.t
            return True
        return False

    # -- persistence ---------------------------------------------------------
    def checkpoint(self, path: str | Path | None = None) -> Path:
        path = Path(path) if path is not None else self.out_dir / "checkpoint.npz"
        recs = np.array([astuple(r) for r in self.records], dtype=float).reshape(-1, 9)
        hist = np.array(self.detector._hist, dtype=float).reshape(-1, 4)
        tmp = path.with_name(path.name + ".tmp.npz")
        np.savez(tmp, **_arrays_of(self.state), records=recs, detector=hist,
                 dt=np.float64(self.dt), next_sample=np.float64(self._next_sample),
                 next_checkpoint=np.float64(self._next_checkpoint),
                 config=np.array(json.dumps(self.config.to_dict(), sort_keys=True)))
        os.replace(tmp, path)
        return path

    def restore(self, path: str | Path) -> None:
        with np.load(path) as data:
            saved = json.loads(str(data["config"]))
            mine = self.config.to_dict()
            for section in ("fluids", "interface", "wetting", "channel"):
                if saved[section] != json.loads(json.dumps(mine[section])):
                    raise ConfigError(f"checkpoint {path} was written for a different {section} section")
            for key in ("nx", "ny", "x_stretch"):
                if saved["numerics"][key] != mine["numerics"][key]:
                    raise ConfigError(f"checkpoint {path} was written on a different grid")
            self.state = _state_of(data)
            self.records = [QoiRecord(*row) for row in data["records"]]
            self.detector._hist = [tuple(r) for r in data["detector"]]
            self.dt = float(data["dt"])
            self._next_sample = float(data["next_sample"])
            self._next_checkpoint = float(data["next_checkpoint"])

    def write_outputs(self) -> None:
        if self.out_dir is None:
            return
        d = self.out_dir
        write_qoi_csv(d / "qoi.csv", self.records)
        write_snapshot(d / "final.nschw", self.state, self.grid)
        self.config.save(d / "config.json")
        final = self.final()
        info = {
            "status": self.status,
            "message": self.message,
            "t": self.state.t,
            "steps": self.state.step,
            "dt": self.dt,
            "equilibrated_at": None if math.isnan(self.equilibrated_at) else self.equilibrated_at,
            "wall_time": self.wall_time,
            "final": None if final is None else _finite_or_none(_qoi_summary(final)),
        }
        with open(d / "status.json", "w", encoding="utf-8") as fh:
            json.dump(info, fh, indent=2)
            fh.write("\n")

    def final(self) -> QoiRecord | None:
        return self.records[-1] if self.records else None

    # -- loop -----------------------------------------------------------------
    def run(self, t_end: float | None = None, restart: str | Path | None = None,
            max_steps: int | None = None) -> "CaseRun":
        t0 = time.perf_counter()
        t_end = self.config.numerics.t_end if t_end is None else t_end
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        if restart is not None:
            self.restore(restart)
        elif self.state is None:
            self.state = initial_state(self.config, self.grid)
        if not self.records:
            self.records.append(self.measure(self.state))
            self._next_sample = self.sample_dt
        self.status = "running"
        state, prev = self.state, None
        tiny = 1e-9 * self.dt
        nsteps = 0
        # t = anchor + k * dt for constant dt avoids round-off drift in t
        anchor_t, anchor_dt, k = state.t, self.dt, 0
        while state.t < t_end - tiny:
            dt = self.dt
            if state.t + dt > t_end + tiny:
                dt = t_end - state.t
            new = None
            for _ in range(MAX_HALVINGS + 1):
                try:
                    new = self.step(state, dt)
                    break
                except StepFailure as exc:
                    log.warning("step failure at t=%.6g with dt=%.3g: %s", state.t, dt, exc)
                    self.message = str(exc)
                    dt *= 0.5
            if new is None:
                self.status = "failed"
                break
            if dt < self.dt and state.t + self.dt <= t_end + tiny:
                # keep the reduced step after a failure
                self.dt = dt
            if dt == anchor_dt:
                k += 1
                new.t = anchor_t + k * anchor_dt
            else:
                anchor_t, anchor_dt, k = new.t, self.dt, 0
            prev, state = state, new
            self.state = state
            nsteps += 1
            if state.t >= self._next_sample - tiny:
                while self._next_sample <= state.t + tiny:
                    self._next_sample += self.sample_dt
                if self._sample(prev, state):
                    break
            if self.out_dir is not None and state.t >= self._next_checkpoint - tiny:
                self._next_checkpoint += self.checkpoint_dt
                self.checkpoint()
            if max_steps is not None and nsteps >= max_steps:
                break
        if self.status == "running":
            done = state.t >= t_end - tiny
            if done and self.records[-1].t < state.t - tiny:
                self._sample(prev, state)
            if self.status == "running" and done:
                self.status = "not_equilibrated"
        self.wall_time += time.perf_counter() - t0
        if self.out_dir is not None:
            self.checkpoint()
        self.write_outputs()
        return self


def run_case(config: CaseConfig, out_dir=None, restart=None, t_end=None, max_steps=None,
             sample_dt=None, checkpoint_dt=None) -> CaseRun:
    """Run a case to equilibrium, escape, failure or ``t_end``.

    With ``out_dir`` the run writes ``qoi.csv``, ``final.nschw``,
    ``config.json``, ``status.json`` and, every ``checkpoint_dt``,
    ``checkpoint.npz``.
    """
    run = CaseRun(config, out_dir, sample_dt=sample_dt, checkpoint_dt=checkpoint_dt)
    return run.run(t_end=t_end, restart=restart, max_steps=max_steps)


def _qoi_summary(rec: QoiRecord) -> dict:
    return {"dx": abs(rec.dx_bottom), "dx_bottom": rec.dx_bottom,
            "dx_top": rec.dx_top, "theta": rec.theta_mid, "F_S": rec.F_S, "t": rec.t}


def _finite_or_none(d: dict) -> dict:
    return {k: (v if isinstance(v, float) and math.isfinite(v) else None) for k, v in d.items()}


# --------------------------------------------------------------------------
# Sweeps
# --------------------------------------------------------------------------

SWEEP_COLUMNS = ("eps", "m", "s_m", "s_nu", "u_w", "dx", "theta", "F_S", "status")


def _sweep_worker(args):
    data, out = args
    cfg = CaseConfig.from_dict(data)
    run = run_case(cfg, out)
    rec = run.final()
    s = cfg.slip_lengths()
    row = {"eps": cfg.interface.epsilon, "m": cfg.mobility, "s_m": s["s_m"][0],
           "s_nu": s["s_nu"][0], "u_w": cfg.channel.u_wall_max}
    row.update({k: v for k, v in _qoi_summary(rec).items() if k in ("dx", "theta", "F_S")})
    row["status"] = run.status
    return row


def sweep_workers() -> int:
    raw = os.environ.get("NSCHWET_THREADS", "")
    try:
        n = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise ConfigError(f"NSCHWET_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


@dataclass
class SweepResult:
    rows: list
    extrapolated: dict
    fit: dict

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def to_json(self) -> dict:
        return {"rows": self.rows, "extrapolated": self.extrapolated, "fit": self.fit}


def summarize_sweep(rows: list, fit: bool = False) -> SweepResult:
    """Quadratic extrapolation on the three finest rows and optional exponential fits."""
    rows = sorted(rows, key=lambda r: -r["eps"])
    extra, fits = {}, {}
    if len(rows) >= 3:
        last = rows[-3:]
        for q in ("dx", "theta", "F_S"):
            vals = [r[q] for r in last]
            if all(v is not None and math.isfinite(v) for v in vals):
                extra[q] = extrapolate_quadratic([r["eps"] for r in last], vals)
    if fit:
        for q in ("dx", "theta", "F_S"):
            vals = [r[q] for r in rows]
            if len(rows) >= 3 and all(v is not None and math.isfinite(v) and v > 0 for v in vals):
                res = fit_exponential([r["eps"] for r in rows], vals)
                fits[q] = {"a": res.a, "b": res.b, "c": res.c, "rms_log_residual": res.rms_log_residual}
    return SweepResult(rows, extra, fits)


def sweep_epsilon(base_config: CaseConfig, eps_list, scaling=None, out_dir=None, workers=None,
                  cells_per_eps: float = 4.0, fit: bool | None = None, **numerics_kw) -> SweepResult:
    """Run ``base_config`` at each epsilon and tabulate the quantities of interest.

    ``scaling`` (a MobilityScaling or ``(m0, eps0, alpha)``) overrides the
    mobility law of the base config. Cases run concurrently in up to
    ``workers`` processes (default: ``NSCHWET_THREADS`` or the CPU count).
    The exponential fit runs by default when the mobility scales with a
    positive power of epsilon and the walls are no-slip.
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list:
        raise ConfigError("eps_list is empty")
    if len(eps_list) < 3:
        raise ConfigError("sweep_epsilon needs at least three epsilon values")
    if len(set(eps_list)) != len(eps_list):
        raise ConfigError("eps_list contains duplicates")
    base = base_config
    if scaling is not None:
        sc = scaling if isinstance(scaling, dict) else (
            {"m0": scaling[0], "eps0": scaling[1], "alpha": scaling[2]}
            if isinstance(scaling, (tuple, list)) else
            {"m0": scaling.m0, "eps0": scaling.eps0, "alpha": scaling.alpha})
        base = base.with_overrides({"interface.scaling": sc})
    if fit is None:
        sc = base.interface.scaling
        fit = sc is not None and sc.alpha > 0 and base.wetting.nu2 == 0.0
    cfgs = [numerics_for_epsilon(base, e, cells_per_eps, **numerics_kw) for e in eps_list]
    out_dir = Path(out_dir) if out_dir is not None else None
    jobs = []
    for e, c in zip(eps_list, cfgs):
        sub = None if out_dir is None else out_dir / f"eps_{e:.6g}"
        jobs.append((c.to_dict(), sub))
    workers = sweep_workers() if workers is None else max(1, int(workers))
    workers = min(workers, len(jobs))
    if workers == 1:
        rows = [_sweep_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_worker, jobs))
    result = summarize_sweep(rows, fit=fit)
    if out_dir is not None:
        write_sweep_csv(out_dir / "sweep.csv", result.rows)
        with open(out_dir / "sweep.json", "w", encoding="utf-8") as fh:
            json.dump(result.to_json(), fh, indent=2)
            fh.write("\n")
    return result


def write_sweep_csv(path, rows) -> None:
    import csv

    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in SWEEP_COLUMNS})


def read_sweep_csv(path) -> list:
    import csv

    with open(path, newline="") as fh:
        raw = list(csv.DictReader(fh))
    rows = []
    for r in raw:
        row = {}
        for k, v in r.items():
            if k == "status":
                row[k] = v
            else:
                row[k] = float(v) if v not in ("", "None") else math.nan
        rows.append(row)
    return rows


# --------------------------------------------------------------------------
# Triple-wedge classification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WedgeReport:
    mean_tangential: float
    threshold: float
    classification: str
    viscosity_ratio: float
    critical_ratio: float
    expected: str
    samples: int


def _interp_face(field, xs, ys, x, y):
    i = np.clip(np.searchsorted(xs, x) - 1, 0, xs.size - 2)
    j = np.clip(np.searchsorted(ys, y) - 1, 0, ys.size - 2)
    tx = np.clip((x - xs[i]) / (xs[i + 1] - xs[i]), 0.0, 1.0)
    ty = np.clip((y - ys[j]) / (ys[j + 1] - ys[j]), 0.0, 1.0)
    return ((1 - tx) * (1 - ty) * field[i, j] + tx * (1 - ty) * field[i + 1, j]
            + (1 - tx) * ty * field[i, j + 1] + tx * ty * field[i + 1, j + 1])


def interface_tangential_velocity(state: State, grid: StaggeredGrid, band=(0.25, 0.75)):
    """Velocity along the upward unit tangent of the phi = 0 polyline.

    Returns ``(y, u_t)`` for polyline points with ``band[0] ly <= y <= band[1] ly``.
    """
    pts = interface_polyline(state.phi, grid)
    ok = np.all(np.isfinite(pts), axis=1)
    pts = pts[ok]
    if pts.shape[0] < 3:
        raise DiagnosticError("interface polyline has fewer than three points")
    xs, ys = pts[:, 0], pts[:, 1]
    dxdy = np.gradient(xs, ys)
    norm = np.hypot(dxdy, 1.0)
    tx, ty = dxdy / norm, 1.0 / norm
    sel = (ys >= band[0] * grid.ly) & (ys <= band[1] * grid.ly)
    u = _interp_face(state.u, grid.xf, grid.yc, xs[sel], ys[sel])
    v = _interp_face(state.v, grid.xc, grid.yf, xs[sel], ys[sel])
    return ys[sel], u * tx[sel] + v * ty[sel]


def classify_wedge(mean_tangential: float, threshold: float) -> str:
    if mean_tangential > threshold:
        return "middle wedge in ambient"
    if mean_tangential < -threshold:
        return "reversed"
    return "near-critical"


def triple_wedge_report(config: CaseConfig, state: State | None = None, run: CaseRun | None = None,
                        out_dir=None, rel_threshold: float = WEDGE_REL_THRESHOLD) -> WedgeReport:
    """Classify the wedge flow from the interface-tangential velocity at mid-heights.

    Positive mean tangential velocity (upward along the interface, toward
    the upper contact point) means the middle wedge sits in the ambient
    phase. ``|mean| <= rel_threshold * u_w`` is reported as near-critical;
    the default sits well above the round-off level of symmetric cases and
    well below the mid-height signal, which is a small fraction of u_w.
    Runs the case first when neither ``state`` nor ``run`` is given.
    """
    if state is None:
        if run is None:
            run = run_case(config, out_dir)
        if run.status not in ("equilibrated", "not_equilibrated"):
            raise DiagnosticError(f"run ended with status {run.status}: {run.message}")
        state = run.state
    grid = StaggeredGrid.from_config(config)
    _, ut = interface_tangential_velocity(state, grid)
    mean = float(np.mean(ut))
    thr = rel_threshold * config.channel.u_wall_max
    f = config.fluids
    ratio = f.eta_a / f.eta_l
    rc = critical_viscosity_ratio(config.wetting.theta_eq)
    if math.isclose(ratio, rc, rel_tol=1e-9):
        expected = "near-critical"
    else:
        expected = "middle wedge in ambient" if ratio < rc else "reversed"
    return WedgeReport(mean, thr, classify_wedge(mean, thr), ratio, rc, expected, int(ut.size))


# --------------------------------------------------------------------------
# Fixture comparison
# --------------------------------------------------------------------------

def _matches(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-6, abs_tol=0.0)


def compare_to_fixture(qoi_rows, fixture: PaperFixture, tolerance_class: str | None = None) -> dict:
    """Per-row relative deviations of computed QoIs from a fixture.

    ``qoi_rows`` holds dicts with ``dx``, ``theta``, ``F_S`` (SI units) and
    the fixture's match keys (``eps``, ``s``, ``u_w``; ``s`` may be given
    as ``s_m``/``s_nu``). Rows without a fixture counterpart are skipped.
    """
    cls = tolerance_class or fixture.tolerance_class
    tol = TOLERANCE_CLASSES[cls]
    rows = []
    for q in qoi_rows:
        q = dict(q)
        if "s" not in q:
            q["s"] = q.get("s_nu") or q.get("s_m")
            if fixture.table_id in ("table2", "table3"):
                q["s"] = q.get("s_m", q["s"])
        for fr in fixture.diffuse_rows():
            if all(k in q and _matches(float(q[k]), float(fr.params[k])) for k in fixture.match_keys):
                ref = fr.si(fixture.units)
                entry = {"params": {k: fr.params[k] for k in fixture.match_keys}, "quantities": {}}
                ok_all = True
                for name in ("dx", "theta", "F_S"):
                    got = q.get(name)
                    if got is None or not math.isfinite(float(got)):
                        dev, ok = math.nan, False
                    else:
                        dev = (float(got) - ref[name]) / ref[name]
                        ok = abs(dev) <= tol[name]
                    ok_all &= ok
                    entry["quantities"][name] = {"computed": got, "expected": ref[name],
                                                 "rel_dev": dev, "tol": tol[name], "pass": bool(ok)}
                entry["pass"] = bool(ok_all)
                rows.append(entry)
                break
    return {"fixture": fixture.table_id, "tolerance_class": cls, "rows": rows,
            "pass": bool(rows) and all(r["pass"] for r in rows)}


def format_report(report: dict) -> str:
    lines = [f"fixture {report['fixture']} (class {report['tolerance_class']})"]
    for r in report["rows"]:
        key = ", ".join(f"{k}={v:.4g}" for k, v in r["params"].items())
        parts = []
        for name, d in r["quantities"].items():
            parts.append(f"{name} {d['rel_dev']:+.1%} {'ok' if d['pass'] else 'FAIL'}")
        lines.append(f"  [{key}] " + "; ".join(parts) + ("  PASS" if r["pass"] else "  FAIL"))
    if not report["rows"]:
        lines.append("  no matching rows")
    lines.append("PASS" if report["pass"] else "FAIL")
    return "\n".join(lines)
