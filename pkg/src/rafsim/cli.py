"""Command-line scenario runner.

    rafsim --topology @reference9 --scenario @reference9 \\
           --strategy raf --strategy all-paths --out results/

A path starting with ``@`` names a file bundled with the package
(``@reference9`` -> ``rafsim/data/reference9.topo`` / ``.scn``).

Exit codes: 0 success, 1 usage error, 2 input error, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources

from .engine import Scenario, load_scenario, simulate, validate_scenario
from .errors import InputError, InvariantViolation, RafsimError
from .metrics import MetricsReport, compare, export_comparison, export_csv, summarize
from .pathfinder import CountMode, Strategy
from .reliability import PathRule, ReliabilityMode
from .topology import Topology, load_topology

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunRequest:
    topology: str
    scenario: str
    out: str
    strategies: list[Strategy] = field(default_factory=lambda: [Strategy.RAF])
    # None keeps whatever the scenario file says (whose own defaults are total/product/static/off)
    seed: int | None = None
    count_mode: CountMode | None = None
    path_rule: PathRule | None = None
    reliability: ReliabilityMode | None = None
    disjoint: bool | None = None
    jobs: int = 1
    wallclock: bool = False


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rafsim", description="Simulate reliability-aware flow installation strategies.")
    p.add_argument("--topology", required=True, metavar="FILE")
    p.add_argument("--scenario", required=True, metavar="FILE")
    p.add_argument("--strategy", action="append", choices=[s.value for s in Strategy],
                   help="repeatable; default raf")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--seed", type=int)
    p.add_argument("--count-mode", choices=[m.value for m in CountMode])
    p.add_argument("--path-rule", choices=[m.value for m in PathRule])
    p.add_argument("--reliability", choices=[m.value for m in ReliabilityMode])
    p.add_argument("--disjoint", choices=["on", "off"])
    p.add_argument("--jobs", type=int, default=1, help="parallel strategy workers")
    p.add_argument("--wallclock", action="store_true", help="add a (non-deterministic) wall-clock column")
    return p


def _resolve(path: str, suffix: str) -> str:
    if path.startswith("@"):
        res = resources.files("rafsim") / "data" / f"{path[1:]}{suffix}"
        if not res.is_file():
            raise InputError(f"no bundled file {path[1:]}{suffix}")
        return str(res)
    return path


def parse_args(argv: list[str]) -> RunRequest:
    ns = _parser().parse_args(argv)
    if ns.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    strategies = []
    for s in ns.strategy or [Strategy.RAF.value]:
        if Strategy(s) not in strategies:
            strategies.append(Strategy(s))
    topo = _resolve(ns.topology, ".topo")
    scen = _resolve(ns.scenario, ".scn")
    for path in (topo, scen):
        if not os.path.isfile(path) or not os.access(path, os.R_OK):
            raise InputError(f"cannot read {path}")
    return RunRequest(
        topo, scen, ns.out, strategies, ns.seed,
        count_mode=None if ns.count_mode is None else CountMode(ns.count_mode),
        path_rule=None if ns.path_rule is None else PathRule(ns.path_rule),
        reliability=None if ns.reliability is None else ReliabilityMode(ns.reliability),
        disjoint=None if ns.disjoint is None else ns.disjoint == "on",
        jobs=ns.jobs, wallclock=ns.wallclock)


def _scenario_for(base: Scenario, req: RunRequest, strategy: Strategy) -> Scenario:
    overrides = {"count_mode": req.count_mode, "path_rule": req.path_rule,
                 "reliability_mode": req.reliability, "disjoint": req.disjoint}
    config = base.config.with_controller(strategy=strategy,
                                         **{k: v for k, v in overrides.items() if v is not None})
    if req.seed is not None:
        config = replace(config, seed=req.seed)
    return replace(base, config=config)


def _run_one(topo: Topology, scenario: Scenario, topology_name: str) -> tuple[MetricsReport, list[str]]:
    sim = simulate(topo, scenario, topology_name)
    return sim.report, sim.check_invariants()


def _summary_table(reports: list[MetricsReport]) -> str:
    head = ("strategy", "computations", "candidates", "flow_mods", "ctrl_msgs", "peak_rules", "table_full",
            "delivered", "dropped", "mean_delay_ms")
    rows = [head]
    for r in reports:
        s = summarize(r)
        rows.append((r.strategy, str(r.path_computations), str(r.candidates_ranked), str(r.flow_mods_sent),
                     str(r.control_messages), str(r.peak_rules_max), str(r.table_full_events),
                     str(r.delivered), str(r.dropped), "-" if s.mean_delay is None else f"{s.mean_delay:.4f}"))
    widths = [max(len(row[i]) for row in rows) for i in range(len(head))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in rows)


def run_scenario(req: RunRequest, stdout=None) -> int:
    """Run every requested strategy and write ``<out>/<strategy>.csv`` (+ comparison)."""
    stdout = stdout or sys.stdout
    topo = load_topology(req.topology)
    base = load_scenario(req.scenario)
    validate_scenario(topo, base)
    topo_name = os.path.splitext(os.path.basename(req.topology))[0]
    scenarios = [_scenario_for(base, req, s) for s in req.strategies]

    if req.jobs > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=min(req.jobs, len(scenarios))) as pool:
            results = list(pool.map(_run_one, [topo] * len(scenarios), scenarios, [topo_name] * len(scenarios)))
    else:
        results = [_run_one(topo, s, topo_name) for s in scenarios]

    reports = [r for r, _ in results]
    problems = [f"{r.strategy}: {p}" for r, probs in results for p in probs]

    os.makedirs(req.out, exist_ok=True)
    for r in reports:
        with open(os.path.join(req.out, f"{r.strategy}.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(export_csv(r, wall=req.wallclock))
    if len(reports) > 1:
        by_name = {r.strategy: r for r in reports}
        baseline = by_name.get(Strategy.ALL_PATHS.value, reports[0])
        comps = [compare(r, baseline) for r in reports if r is not baseline]
        with open(os.path.join(req.out, "comparison.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write(export_comparison(comps))

    print(f"scenario {base.name} on {topo_name}", file=stdout)
    print(_summary_table(reports), file=stdout)
    if problems:
        raise InvariantViolation("; ".join(problems))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        req = parse_args(argv)
    except UsageError as exc:
        _parser().print_usage(sys.stderr)
        print(f"rafsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"rafsim: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        return run_scenario(req)
    except InvariantViolation as exc:
        print(f"rafsim: invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (InputError, OSError) as exc:
        print(f"rafsim: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RafsimError as exc:
        print(f"rafsim: {exc}", file=sys.stderr)
        return EXIT_INVARIANT

