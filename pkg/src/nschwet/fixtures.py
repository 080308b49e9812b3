"""Published benchmark tables as comparison fixtures.

Values are stored as printed together with the unit scale of each column;
:meth:`FixtureRow.si` returns them in SI units.
"""
from __future__ import annotations

from dataclasses import dataclass, field

# tolerance classes: relative bounds per quantity
TOLERANCE_CLASSES = {
    "A": {"dx": 0.15, "theta": 0.15, "F_S": 0.20},
    "B": {"dx": 0.05, "theta": 0.05, "F_S": 0.05},
}


@dataclass(frozen=True)
class FixtureRow:
    params: dict
    dx: float
    theta: float
    F_S: float
    kind: str = "diffuse"  # "diffuse", "extrapolated" or "sharp"

    def si(self, units: dict) -> dict:
        return {"dx": self.dx * units["dx"], "theta": self.theta * units["theta"],
                "F_S": self.F_S * units["F_S"]}


@dataclass(frozen=True)
class PaperFixture:
    table_id: str
    case: str
    match_keys: tuple
    units: dict
    rows: tuple = field(default_factory=tuple)
    tolerance_class: str = "A"

    def diffuse_rows(self) -> list[FixtureRow]:
        return [r for r in self.rows if r.kind == "diffuse"]

    def rows_of(self, kind: str) -> list[FixtureRow]:
        return [r for r in self.rows if r.kind == kind]


def _eps_ladder(e0: float, n: int = 6) -> list[float]:
    return [e0 * 2.0 ** (-k) for k in range(n)]


def _table2() -> PaperFixture:
    units = {"dx": 1e-4, "theta": 1e-2, "F_S": 1e-3}
    eps = _eps_ladder(1.6e-3)
    s2 = [(5.101, 7.602, 3.078), (5.380, 7.881, 3.228), (5.566, 8.060, 3.334),
          (5.685, 8.176, 3.403), (5.756, 8.248, 3.445), (5.795, 8.288, 3.468)]
    s1 = [(9.098, 12.56, 5.469), (9.226, 12.43, 5.516), (9.407, 12.52, 5.613),
          (9.568, 12.65, 5.704), (9.680, 12.75, 5.770), (9.748, 12.81, 5.810)]
    rows = []
    for s, m, vals in ((2e-3, 4e-5, s2), (1e-3, 1e-5, s1)):
        for e, (dx, th, fs) in zip(eps, vals):
            rows.append(FixtureRow({"eps": e, "s": s, "m": m}, dx, th, fs))
    rows.append(FixtureRow({"s": 2e-3}, 6.171, 7.836, 3.077, kind="sharp"))
    rows.append(FixtureRow({"s": 1e-3}, 8.848, 10.94, 4.801, kind="sharp"))
    return PaperFixture("table2", "1A", ("eps", "s"), units, tuple(rows))


def _table3() -> PaperFixture:
    units = {"dx": 1e-4, "theta": 1e-2, "F_S": 1e-4}
    data = {
        2e-3: [(8e-3, (11.75, 16.75, 69.76), (12.53, 15.86, 61.93)),
               (4e-3, (5.795, 8.288, 34.68), (6.171, 7.836, 30.77)),
               (2e-3, (2.887, 4.133, 17.31), (3.075, 3.907, 15.36)),
               (1e-3, (1.442, 2.057, 8.651), (1.536, 1.952, 7.678))],
        1e-3: [(8e-3, (20.26, 26.38, 118.1), (18.22, 22.39, 97.25)),
               (4e-3, (9.748, 12.81, 58.10), (8.848, 10.94, 48.01)),
               (2e-3, (4.831, 6.364, 28.94), (4.393, 5.439, 23.93)),
               (1e-3, (2.410, 3.177, 14.46), (2.193, 2.716, 11.96))],
    }
    rows = []
    for s, entries in data.items():
        for uw, di, si in entries:
            rows.append(FixtureRow({"eps": 5e-5, "s": s, "u_w": uw}, *di))
            rows.append(FixtureRow({"s": s, "u_w": uw}, *si, kind="sharp"))
    return PaperFixture("table3", "1B", ("s", "u_w"), units, tuple(rows))


def _table4() -> PaperFixture:
    units = {"dx": 1e-5, "theta": 1e-3, "F_S": 1e-5}
    eps = _eps_ladder(1.6e-3)
    m = [2.0 ** k * 1e-5 for k in (8, 6, 4, 2, 0, -2)]
    s_m = [16e-3, 8e-3, 4e-3, 2e-3, 1e-3, 0.5e-3]
    vals = [(1.550, 2.409, 9.372), (6.811, 10.54, 41.01), (23.74, 36.02, 142.5),
            (56.85, 81.76, 340.3), (96.80, 127.5, 577.0), (140.5, 171.2, 832.5)]
    rows = tuple(FixtureRow({"eps": e, "m": mm, "s": s}, *v)
                 for e, mm, s, v in zip(eps, m, s_m, vals))
    return PaperFixture("table4", "1C", ("eps",), units, rows)


def _table5() -> PaperFixture:
    units = {"dx": 1e-4, "theta": 1e-2, "F_S": 1e-3}
    eps = [2.0 ** k * 1e-4 for k in (4, 3, 2, 1, 0, -1)]
    m = [2.0 ** k * 1e-9 for k in (10, 8, 6, 4, 2, 0)]
    s_m = [320e-6, 160e-6, 80e-6, 40e-6, 20e-6, 10e-6]
    s2 = [(6.443, 8.255, 3.258), (6.393, 8.074, 3.205), (6.291, 7.948, 3.143),
          (6.224, 7.882, 3.105), (6.192, 7.852, 3.088), (6.178, 7.840, 3.081)]
    s1 = [(8.957, 11.27, 4.924), (9.140, 11.27, 4.984), (9.065, 11.15, 4.927),
          (8.962, 11.04, 4.866), (8.898, 10.98, 4.829), (8.870, 10.96, 4.813)]
    rows = []
    for s, vals, extra, sharp in (
        (2e-3, s2, (6.167, 7.831, 3.075), (6.171, 7.836, 3.077)),
        (1e-3, s1, (8.845, 10.93, 4.800), (8.848, 10.94, 4.801)),
    ):
        for e, mm, sm, v in zip(eps, m, s_m, vals):
            rows.append(FixtureRow({"eps": e, "m": mm, "s_m": sm, "s": s}, *v))
        rows.append(FixtureRow({"s": s}, *extra, kind="extrapolated"))
        rows.append(FixtureRow({"s": s}, *sharp, kind="sharp"))
    return PaperFixture("table5", "2A", ("eps", "s"), units, tuple(rows))


FIXTURES = {f.table_id: f for f in (_table2(), _table3(), _table4(), _table5())}


def get_fixture(table_id: str) -> PaperFixture:
    try:
        return FIXTURES[table_id]
    except KeyError:
        raise KeyError(f"unknown fixture {table_id!r}; known: {sorted(FIXTURES)}") from None
