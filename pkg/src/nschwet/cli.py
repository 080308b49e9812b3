"""Command-line interface: ``nschwet run|sweep|analyze|compare|wedge``.

Exit codes: 0 pass, 1 fail (not equilibrated, escaped, comparison
outside tolerance), 2 invalid input, 3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

from .analysis import extrapolate_quadratic, fit_exponential
from .diagnostics import DiagnosticError
from .fixtures import FIXTURES, get_fixture
from .grid import read_snapshot
from .harness import (
    compare_to_fixture, format_report, load_preset, numerics_for_epsilon, read_sweep_csv,
    run_case, sweep_epsilon, triple_wedge_report,
)
from .params import CaseConfig, ConfigError

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3


class InputError(Exception):
    pass


def _config(args) -> CaseConfig:
    cfg = load_preset(args.case)
    if args.set:
        cfg = cfg.with_overrides(args.set)
    return cfg


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"cannot parse number list {text!r}") from None


def _read_columns(path: str) -> dict:
    """Numeric CSV columns by header name (eps column first)."""
    p = Path(path)
    if not p.is_file():
        raise InputError(f"no such file: {path}")
    with open(p, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise InputError(f"{path}: needs a header and at least one data row")
    header = [h.strip() for h in rows[0]]
    cols: dict[str, list[float]] = {h: [] for h in header}
    for r in rows[1:]:
        if not r:
            continue
        for h, v in zip(header, r):
            try:
                cols[h].append(float(v))
            except ValueError:
                cols[h].append(math.nan)
    numeric = {h: v for h, v in cols.items() if v and not all(math.isnan(x) for x in v)}
    eps_key = next((h for h in numeric if h.lower() in ("eps", "epsilon", "ε")), None)
    if eps_key is None:
        eps_key = next(iter(numeric), None)
    if eps_key is None:
        raise InputError(f"{path}: no numeric columns")
    return {"eps": numeric[eps_key], **{h: v for h, v in numeric.items() if h != eps_key}}


def _value_columns(cols: dict, wanted: str | None) -> list[str]:
    names = [h for h in cols if h != "eps" and h not in ("m", "s_m", "s_nu", "u_w")]
    if wanted:
        if wanted not in cols:
            raise InputError(f"column {wanted!r} not found; have {sorted(cols)}")
        return [wanted]
    if not names:
        raise InputError("no value column found")
    return names


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = _config(args)
    if args.eps is not None:
        cfg = numerics_for_epsilon(cfg, args.eps, args.cells_per_eps)
    if args.t_end is not None:
        cfg = cfg.with_overrides({"numerics.t_end": args.t_end})
    run = run_case(cfg, args.out, restart=args.restart)
    final = run.final()
    print(f"status: {run.status}  t={run.state.t:.4g}  steps={run.state.step}")
    if final is not None:
        dx = abs(final.dx_bottom)
        print(f"dx={dx:.6g} m  theta={final.theta_mid:.6g} rad  F_S={final.F_S:.6g} N/m")
    if run.message:
        print(run.message)
    if run.status == "failed":
        return EXIT_SOLVER
    return EXIT_OK if run.status == "equilibrated" else EXIT_FAIL


def cmd_sweep(args) -> int:
    cfg = _config(args)
    eps = _float_list(args.eps)
    res = sweep_epsilon(cfg, eps, out_dir=args.out, workers=args.workers,
                        cells_per_eps=args.cells_per_eps)
    print(f"{'eps':>10} {'dx':>12} {'theta':>12} {'F_S':>12}  status")
    for r in res.rows:
        print(f"{r['eps']:10.4g} {r['dx']:12.5g} {r['theta']:12.5g} {r['F_S']:12.5g}  {r['status']}")
    for q, v in res.extrapolated.items():
        print(f"extrapolated {q}: {v:.6g}")
    for q, f in res.fit.items():
        print(f"fit {q}: a={f['a']:.5g} b={f['b']:.5g} c={f['c']:.5g}")
    statuses = {r["status"] for r in res.rows}
    if "failed" in statuses:
        return EXIT_SOLVER
    return EXIT_OK if statuses == {"equilibrated"} else EXIT_FAIL


def cmd_fit(args) -> int:
    cols = _read_columns(args.file)
    out = {}
    for name in _value_columns(cols, args.column):
        try:
            res = fit_exponential(cols["eps"], cols[name], method=args.method)
        except ValueError as exc:
            raise InputError(f"column {name}: {exc}") from None
        out[name] = asdict(res)
    print(json.dumps(out if len(out) > 1 else next(iter(out.values())), indent=2))
    return EXIT_OK


def cmd_extrapolate(args) -> int:
    cols = _read_columns(args.file)
    eps = cols["eps"]
    if len(eps) < 3:
        raise InputError("extrapolation needs at least three rows")
    order = sorted(range(len(eps)), key=lambda i: eps[i])[:3]
    out = {}
    for name in _value_columns(cols, args.column):
        try:
            out[name] = extrapolate_quadratic([eps[i] for i in order], [cols[name][i] for i in order])
        except ValueError as exc:
            raise InputError(f"column {name}: {exc}") from None
    print(json.dumps({"eps": sorted(eps[i] for i in order), "extrapolated": out}, indent=2))
    return EXIT_OK


def _rows_from_dir(d: Path) -> list:
    if (d / "sweep.csv").is_file():
        return read_sweep_csv(d / "sweep.csv")
    if (d / "status.json").is_file() and (d / "config.json").is_file():
        cfg = CaseConfig.load(d / "config.json")
        info = json.loads((d / "status.json").read_text())
        final = info.get("final") or {}
        s = cfg.slip_lengths()
        return [{"eps": cfg.interface.epsilon, "m": cfg.mobility, "s_m": s["s_m"][0],
                 "s_nu": s["s_nu"][0], "u_w": cfg.channel.u_wall_max,
                 "dx": final.get("dx"), "theta": final.get("theta"), "F_S": final.get("F_S")}]
    raise InputError(f"{d}: expected sweep.csv or status.json + config.json")


def cmd_compare(args) -> int:
    try:
        fixture = get_fixture(args.fixture)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None
    d = Path(args.dir)
    if not d.is_dir():
        raise InputError(f"no such directory: {d}")
    report = compare_to_fixture(_rows_from_dir(d), fixture, args.tolerance_class)
    text = format_report(report)
    print(text)
    with open(d / f"compare_{fixture.table_id}.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    (d / f"compare_{fixture.table_id}.txt").write_text(text + "\n")
    return EXIT_OK if report["pass"] else EXIT_FAIL


def cmd_wedge(args) -> int:
    d = Path(args.dir)
    if not (d / "final.nschw").is_file() or not (d / "config.json").is_file():
        raise InputError(f"{d}: expected final.nschw and config.json from a run")
    cfg = CaseConfig.load(d / "config.json")
    state, _ = read_snapshot(d / "final.nschw")
    rep = triple_wedge_report(cfg, state=state)
    print(json.dumps(asdict(rep), indent=2))
    return EXIT_OK if rep.classification == rep.expected else EXIT_FAIL


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nschwet", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def case_args(p):
        p.add_argument("--case", required=True, help="preset name (1A..2C) or config JSON path")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, e.g. numerics.dt=1e-3")
        p.add_argument("--cells-per-eps", type=float, default=4.0)

    p = sub.add_parser("run", help="run one case")
    case_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--eps", type=float, help="rescale the case to this epsilon (grid and dt follow)")
    p.add_argument("--t-end", type=float)
    p.add_argument("--restart", help="checkpoint.npz to continue from")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a case over several epsilon values")
    case_args(p)
    p.add_argument("--eps", required=True, help="comma-separated epsilon values")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="curve fits on (eps, value) CSV files")
    asub = p.add_subparsers(dest="analysis", required=True)
    q = asub.add_parser("fit-exp", help="fit a*exp(b*eps)*eps**c")
    q.add_argument("file")
    q.add_argument("--column")
    q.add_argument("--method", choices=("nonlinear", "log"), default="nonlinear")
    q.set_defaults(func=cmd_fit)
    q = asub.add_parser("extrapolate", help="quadratic extrapolation to eps = 0")
    q.add_argument("file")
    q.add_argument("--column")
    q.set_defaults(func=cmd_extrapolate)

    p = sub.add_parser("compare", help="compare a run or sweep with a published table")
    p.add_argument("--fixture", required=True, choices=sorted(FIXTURES))
    p.add_argument("--class", dest="tolerance_class", choices=("A", "B"))
    p.add_argument("dir")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("wedge", help="classify the wedge flow of a finished run")
    p.add_argument("dir")
    p.set_defaults(func=cmd_wedge)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InputError, DiagnosticError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
