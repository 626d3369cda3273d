"""Trajectory quality metrics and strategy comparison tables.

RMS values are computed over the window from the start of the run to
the goal-reach time (the full record when the goal was never reached),
so strategies with different completion times stay comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DIRECTION_HYSTERESIS = 0.02  # |v| band ignored when counting sign changes [m/s]


class EmptyRecord(ValueError):
    """Metrics requested for a record with no samples."""


@dataclass(frozen=True)
class MetricReport:
    T: float | None              # goal-reach time [s]
    delta_rms: float             # steering angle RMS [rad]
    delta_dot_rms: float         # steering rate RMS [rad/s]
    a_par_rms: float             # longitudinal acceleration RMS [m/s^2]
    a_perp_rms: float            # lateral acceleration RMS [m/s^2]
    safe: bool                   # no recorded corridor violation > 0
    direction_changes: int

    def as_dict(self) -> dict:
        return {
            "T": self.T,
            "delta_rms": self.delta_rms,
            "delta_dot_rms": self.delta_dot_rms,
            "a_par_rms": self.a_par_rms,
            "a_perp_rms": self.a_perp_rms,
            "safe": self.safe,
            "direction_changes": self.direction_changes,
        }


def rms(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return 0.0
    return float(np.sqrt(np.mean(values * values)))


def count_direction_changes(v, hysteresis: float = DIRECTION_HYSTERESIS) -> int:
    """Sign changes of the velocity, ignoring dithering below the hysteresis band."""
    sign = 0
    changes = 0
    for value in np.asarray(v, dtype=float):
        if value > hysteresis:
            if sign < 0:
                changes += 1
            sign = 1
        elif value < -hysteresis:
            if sign > 0:
                changes += 1
            sign = -1
    return changes


def compute_metrics(record) -> MetricReport:
    """Metric report for a closed-loop run record.

    The record must expose t, states, inputs, violation arrays, a
    wheelbase, and goal_reach_time (see sim.RunRecord).
    """
    n = len(record.t)
    if n == 0:
        raise EmptyRecord("record has no samples")
    if record.goal_reach_time is not None:
        end = int(np.searchsorted(record.t, record.goal_reach_time, side="right"))
    else:
        end = n
    v = record.states[:end, 3]
    delta = record.states[:end, 4]
    delta_dot = record.inputs[:end, 1]
    a_par = record.inputs[:end, 0]
    a_perp = v * v * np.tan(delta) / record.wheelbase
    violations = np.asarray(record.violation, dtype=float)
    return MetricReport(
        T=record.goal_reach_time,
        delta_rms=rms(delta),
        delta_dot_rms=rms(delta_dot),
        a_par_rms=rms(a_par),
        a_perp_rms=rms(a_perp),
        safe=bool(np.all(violations <= 0.0)),
        direction_changes=count_direction_changes(record.states[:, 3]),
    )


_COLUMNS = ("T", "delta_rms", "delta_dot_rms", "a_par_rms", "a_perp_rms",
            "safe", "direction_changes")


@dataclass
class ComparisonTable:
    strategies: list[str]
    reports: list[MetricReport]
    best: dict  # column -> strategy name (or None when undecided)

    def to_csv(self) -> str:
        lines = ["strategy," + ",".join(_COLUMNS)]
        for name, rep in zip(self.strategies, self.reports):
            d = rep.as_dict()
            cells = [name]
            for col in _COLUMNS:
                val = d[col]
                if val is None:
                    cells.append("")
                elif isinstance(val, bool):
                    cells.append("true" if val else "false")
                elif isinstance(val, int):
                    cells.append(str(val))
                else:
                    cells.append(f"{val:.6f}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        header = ["strategy"] + list(_COLUMNS)
        rows = [header]
        for name, rep in zip(self.strategies, self.reports):
            d = rep.as_dict()
            row = [name]
            for col in _COLUMNS:
                val = d[col]
                if val is None:
                    cell = "-"
                elif isinstance(val, bool):
                    cell = "yes" if val else "no"
                elif isinstance(val, int):
                    cell = str(val)
                else:
                    cell = f"{val:.4f}"
                if self.best.get(col) == name:
                    cell += "*"
                row.append(cell)
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        out = []
        for r in rows:
            out.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)))
        out.append("(* best value per column; safe=yes dominates)")
        return "\n".join(out) + "\n"


def compare(reports: dict) -> ComparisonTable:
    """Mark the best value per metric column across strategies.

    Lower is better for every numeric column; safe=true dominates
    safe=false (an unsafe run cannot be best in any column).
    """
    strategies = list(reports.keys())
    reps = [reports[s] for s in strategies]
    eligible = [s for s, r in zip(strategies, reps) if r.safe]
    pool = eligible if eligible else strategies
    best: dict = {}
    for col in _COLUMNS:
        if col == "safe":
            best[col] = eligible[0] if len(eligible) == 1 else None
            continue
        candidates = [
            (reports[s].as_dict()[col], s) for s in pool
            if reports[s].as_dict()[col] is not None
        ]
        best[col] = min(candidates)[1] if candidates else None
    return ComparisonTable(strategies, reps, best)
