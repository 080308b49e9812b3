import math

import pytest

from nschwet.params import CaseConfig


def small_config(**over) -> CaseConfig:
    """Coarse matched-fluid case used by the fast tests."""
    data = {
        "fluids": {"rho_l": 1000.0, "rho_a": 1000.0, "eta_l": 0.1, "eta_a": 0.1,
                   "sigma_la": 0.0728, "lambda_ratio": 1.0},
        "interface": {"epsilon": 1.6e-3, "mobility": 4e-5},
        "wetting": {"theta_eq": math.pi / 2, "nu1": "inf", "nu2": 0.0},
        "channel": {"lx": 0.2, "ly": 0.02, "u_wall_max": 4e-3, "ramp_time": 1.0,
                    "interface_x0": 0.1},
        "numerics": {"nx": 250, "ny": 10, "dt": 2e-3, "t_end": 0.1, "sample_dt": 0.05},
    }
    cfg = CaseConfig.from_dict(data)
    return cfg.with_overrides(over) if over else cfg


@pytest.fixture
def small():
    return small_config()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(results):
        checks = results[n]
        ok = all(c[1] for c in checks)
        failed = [c[0] for c in checks if not c[1]]
        tail = "" if ok else "  (failed: " + "; ".join(failed) + ")"
        tr.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  [{len(checks)} checks]{tail}")
        for label, good, detail in checks:
            tr.write_line(f"    {'ok  ' if good else 'FAIL'} {label}: {detail}")
