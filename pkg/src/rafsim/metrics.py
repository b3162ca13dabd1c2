"""Run metrics, summaries, CSV export and strategy comparison."""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field

from .errors import InputError

SCHEMA = "# rafsim-metrics v1"
COMPARE_SCHEMA = "# rafsim-compare v1"
DROP_REASONS = ("no_route", "acl", "dead_port", "ttl", "controller", "misdelivered")


class ScenarioMismatchError(InputError):
    pass


@dataclass
class MetricsReport:
    scenario: str = ""
    topology: str = ""
    strategy: str = ""
    path_computations: int = 0
    candidates_ranked: int = 0
    paths_installed: int = 0
    flow_mod_adds: int = 0
    flow_mod_deletes: int = 0
    packet_ins: int = 0
    packet_outs: int = 0
    feature_replies: int = 0
    bootstrap_msgs: int = 0
    port_status_msgs: int = 0
    flow_removed_msgs: int = 0
    table_full_events: int = 0
    injected: int = 0
    delivered: int = 0
    dropped: int = 0
    in_flight: int = 0
    drops: dict[str, int] = field(default_factory=lambda: dict.fromkeys(DROP_REASONS, 0))
    delays: list[float] = field(default_factory=list)
    per_switch_rules: dict[str, tuple[int, int]] = field(default_factory=dict)
    horizon_truncated: bool = False
    end_time: float = 0.0
    events: int = 0
    wall_ms: float | None = None

    @property
    def flow_mods_sent(self) -> int:
        return self.flow_mod_adds + self.flow_mod_deletes

    @property
    def control_messages(self) -> int:
        return (self.flow_mods_sent + self.packet_ins + self.packet_outs + self.feature_replies
                + self.bootstrap_msgs + self.port_status_msgs + self.flow_removed_msgs)

    @property
    def computation_overhead(self) -> int:
        return self.path_computations + self.candidates_ranked

    @property
    def peak_rules_max(self) -> int:
        return max((p for p, _ in self.per_switch_rules.values()), default=0)

    @property
    def peak_rules_total(self) -> int:
        return sum(p for p, _ in self.per_switch_rules.values())

    @property
    def final_rules_total(self) -> int:
        return sum(f for _, f in self.per_switch_rules.values())

    @property
    def mean_delay(self) -> float | None:
        return statistics.fmean(self.delays) if self.delays else None


@dataclass(frozen=True)
class Summary:
    delivered: int
    dropped: int
    mean_delay: float | None
    median_delay: float | None
    p99_delay: float | None
    max_delay: float | None
    control_messages: int
    flow_mods: int
    peak_rules_max: int
    computation_overhead: int


def _nearest_rank(sorted_values: list[float], q: float) -> float:
    idx = max(0, math.ceil(q * len(sorted_values)) - 1)
    return sorted_values[idx]


def summarize(r: MetricsReport) -> Summary:
    if r.delays:
        ordered = sorted(r.delays)
        mean, median = statistics.fmean(ordered), statistics.median(ordered)
        p99, top = _nearest_rank(ordered, 0.99), ordered[-1]
    else:
        mean = median = p99 = top = None
    return Summary(r.delivered, r.dropped, mean, median, p99, top, r.control_messages,
                   r.flow_mods_sent, r.peak_rules_max, r.computation_overhead)


# -- CSV ------------------------------------------------------------------------

_INT_COLUMNS = (
    "path_computations", "candidates_ranked", "paths_installed", "flow_mods_sent", "flow_mod_adds",
    "flow_mod_deletes", "packet_ins", "packet_outs", "feature_replies", "bootstrap_msgs",
    "port_status_msgs", "flow_removed_msgs", "control_messages", "table_full_events",
    "peak_rules_max", "peak_rules_total", "final_rules_total", "injected", "delivered", "dropped",
    "in_flight",
)
_DELAY_COLUMNS = ("delay_mean_ms", "delay_median_ms", "delay_p99_ms", "delay_max_ms")


def _columns(wall: bool) -> list[str]:
    cols = ["scenario", "topology", "strategy", *_INT_COLUMNS]
    cols += [f"dropped_{r}" for r in DROP_REASONS]
    cols += [*_DELAY_COLUMNS, "end_time_ms", "horizon_truncated"]
    if wall:
        cols.append("controller_wall_ms")
    return cols


def _num(x: float | None) -> str:
    return "" if x is None else f"{x:.6f}"


def as_row(r: MetricsReport, wall: bool = False) -> dict[str, str]:
    s = summarize(r)
    row = {"scenario": r.scenario, "topology": r.topology, "strategy": r.strategy}
    for col in _INT_COLUMNS:
        row[col] = str(getattr(r, col))
    for reason in DROP_REASONS:
        row[f"dropped_{reason}"] = str(r.drops.get(reason, 0))
    row["delay_mean_ms"] = _num(s.mean_delay)
    row["delay_median_ms"] = _num(s.median_delay)
    row["delay_p99_ms"] = _num(s.p99_delay)
    row["delay_max_ms"] = _num(s.max_delay)
    row["end_time_ms"] = _num(r.end_time)
    row["horizon_truncated"] = "1" if r.horizon_truncated else "0"
    if wall:
        row["controller_wall_ms"] = _num(r.wall_ms)
    return row


def export_csv(r: MetricsReport, wall: bool = False) -> str:
    """Two-section CSV: one totals row, then one row per switch.

    Wall-clock time is non-deterministic and only written when ``wall`` is set.
    """
    buf = io.StringIO()
    buf.write(SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = _columns(wall)
    row = as_row(r, wall)
    w.writerow(cols)
    w.writerow([row[c] for c in cols])
    buf.write("\n")
    w.writerow(["switch", "peak_rules", "final_rules"])
    for sw in sorted(r.per_switch_rules):
        peak, final = r.per_switch_rules[sw]
        w.writerow([sw, peak, final])
    return buf.getvalue()


@dataclass
class ParsedMetrics:
    row: dict[str, str | int | float | None]
    per_switch: dict[str, tuple[int, int]]


def parse_csv(text: str) -> ParsedMetrics:
    lines = text.splitlines()
    if not lines or lines[0] != SCHEMA:
        raise InputError("not a rafsim metrics CSV (missing schema line)")
    try:
        blank = lines.index("")
    except ValueError:
        raise InputError("metrics CSV lacks the per-switch section") from None
    head = list(csv.reader(lines[1:blank]))
    if len(head) != 2:
        raise InputError("metrics CSV must carry exactly one totals row")
    row: dict[str, str | int | float | None] = {}
    for col, value in zip(*head):
        if col in ("scenario", "topology", "strategy"):
            row[col] = value
        elif value == "":
            row[col] = None
        elif col in _INT_COLUMNS or col.startswith("dropped_") or col == "horizon_truncated":
            row[col] = int(value)
        else:
            row[col] = float(value)
    per_switch = {}
    for rec in list(csv.reader(lines[blank + 1:]))[1:]:
        if rec:
            per_switch[rec[0]] = (int(rec[1]), int(rec[2]))
    return ParsedMetrics(row, per_switch)


# -- comparison -------------------------------------------------------------------

COMPARED = (
    "computation_overhead", "path_computations", "candidates_ranked", "flow_mods_sent", "packet_ins",
    "packet_outs", "control_messages", "peak_rules_max", "peak_rules_total", "final_rules_total",
    "table_full_events", "mean_delay", "delivered", "dropped",
)


@dataclass(frozen=True)
class Comparison:
    a: str
    b: str
    values: dict[str, tuple[float | None, float | None]]
    ratios: dict[str, float | None]


def compare(a: MetricsReport, b: MetricsReport) -> Comparison:
    """Per-metric ratios ``a / b``; a zero or missing denominator gives ``None``."""
    if (a.scenario, a.topology) != (b.scenario, b.topology):
        raise ScenarioMismatchError(
            f"cannot compare {a.scenario}/{a.topology} with {b.scenario}/{b.topology}")
    values, ratios = {}, {}
    for name in COMPARED:
        va, vb = getattr(a, name), getattr(b, name)
        values[name] = (va, vb)
        ratios[name] = None if va is None or not vb else va / vb
    return Comparison(a.strategy, b.strategy, values, ratios)


def export_comparison(comparisons: list[Comparison]) -> str:
    buf = io.StringIO()
    buf.write(COMPARE_SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["strategy", "baseline", "metric", "value", "baseline_value", "ratio"])
    for c in comparisons:
        for name in COMPARED:
            va, vb = c.values[name]
            w.writerow([c.a, c.b, name, _num(va), _num(vb), _num(c.ratios[name])])
    return buf.getvalue()
