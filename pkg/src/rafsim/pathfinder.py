"""Candidate path enumeration, ranking and the reliability tier function.

The tier function decides how many paths a flow gets from the reliability of
its primary path:

    r > 0.9        -> 1 path
    0.8 < r <= 0.9 -> 2
    0.7 < r <= 0.8 -> 3
    0.6 < r <= 0.7 -> 4
    0.5 < r <= 0.6 -> 5
    r <= 0.5       -> every available path

Counts are totals by default.  With ``count_mode="alternates"`` they count
backup paths on top of the primary (0, 2, 3, 4, 5).
"""

from __future__ import annotations

import enum
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

from .errors import RafsimError
from .reliability import PathRule, path_reliability
from .topology import Topology

DEFAULT_PATH_CAP = 1000


class NoPathError(RafsimError):
    pass


class RankMode(str, enum.Enum):
    RAF = "raf"
    DISTANCE = "distance"


class Strategy(str, enum.Enum):
    RAF = "raf"
    RAF_DISTANCE = "raf-distance"
    ALL_PATHS = "all-paths"

    @property
    def rank_mode(self) -> RankMode:
        return RankMode.DISTANCE if self is Strategy.RAF_DISTANCE else RankMode.RAF


class CountMode(str, enum.Enum):
    TOTAL = "total"
    ALTERNATES = "alternates"


@dataclass(frozen=True)
class Path:
    """A loop-free switch route.

    ``ports[i]`` is the egress port on ``nodes[i]`` toward ``nodes[i + 1]``
    over ``links[i]``; the final switch's egress is host-facing and supplied
    separately (see :meth:`hops`).
    """

    nodes: tuple[str, ...]
    links: tuple[str, ...] = ()
    ports: tuple[int, ...] = ()

    @property
    def hop_count(self) -> int:
        return len(self.nodes)

    def hops(self, dst_attach: int) -> list[tuple[str, int]]:
        return list(zip(self.nodes, self.ports + (dst_attach,)))

    def egress(self, switch: str, dst_attach: int) -> int | None:
        try:
            i = self.nodes.index(switch)
        except ValueError:
            return None
        return self.ports[i] if i < len(self.ports) else dst_attach

    def uses(self, link: str) -> bool:
        return link in self.links


@dataclass(frozen=True)
class RankedPath:
    path: Path
    reliability: float
    score: float


@dataclass(frozen=True)
class PathSet:
    primary: RankedPath
    alternates: tuple[RankedPath, ...]
    candidates: int
    truncated: bool = False

    @property
    def tier_count(self) -> int:
        return 1 + len(self.alternates)

    @property
    def paths(self) -> tuple[RankedPath, ...]:
        return (self.primary,) + self.alternates


@dataclass(frozen=True)
class TierTable:
    boundaries: tuple[float, ...] = (0.9, 0.8, 0.7, 0.6, 0.5)
    counts: tuple[int, ...] = (1, 2, 3, 4, 5)
    alternate_counts: tuple[int, ...] = (0, 2, 3, 4, 5)
    count_mode: CountMode = CountMode.TOTAL

    def __post_init__(self):
        object.__setattr__(self, "count_mode", CountMode(self.count_mode))
        b = self.boundaries
        if not all(0.0 < x < 1.0 for x in b) or any(x <= y for x, y in zip(b, b[1:])):
            raise ValueError("tier boundaries must be strictly descending within (0, 1)")
        if len(self.counts) != len(b) or len(self.alternate_counts) != len(b):
            raise ValueError("one count per tier boundary is required")

    @property
    def effective_counts(self) -> tuple[int, ...]:
        if self.count_mode is CountMode.ALTERNATES:
            return tuple(1 + c for c in self.alternate_counts)
        return self.counts


def tier_path_count(r_primary: float, available: int, table: TierTable = TierTable()) -> int:
    """Total number of paths to install for a primary of reliability ``r_primary``."""
    if available < 1:
        raise ValueError("at least one path must be available")
    for bound, count in zip(table.boundaries, table.effective_counts):
        if r_primary > bound:
            return max(1, min(count, available))
    return available


def enumerate_simple_paths(topo: Topology, src: str, dst: str,
                           cap: int = DEFAULT_PATH_CAP) -> tuple[list[Path], bool]:
    """All simple paths from ``src`` to ``dst`` over up-links, in DFS order.

    Neighbours are visited by ascending egress port, so the result is fully
    deterministic.  Returns ``(paths, truncated)``; ``truncated`` is set when
    more than ``cap`` paths exist and only the first ``cap`` were kept.
    """
    topo.neighbors(src)
    topo.neighbors(dst)
    if cap < 1:
        raise ValueError("cap must be positive")
    if src == dst:
        return [Path((src,))], False

    found: list[Path] = []
    nodes = [src]
    links: list[str] = []
    ports: list[int] = []
    on_path = {src}
    # explicit stack of neighbour iterators keeps deep topologies off the recursion limit
    stack = [iter(topo.neighbors(src))]
    while stack:
        for link_id, port, peer in stack[-1]:
            if peer in on_path or not topo.link(link_id).up:
                continue
            if peer == dst:
                found.append(Path(tuple(nodes) + (dst,), tuple(links) + (link_id,), tuple(ports) + (port,)))
                if len(found) > cap:
                    return found[:cap], True
                continue
            nodes.append(peer)
            links.append(link_id)
            ports.append(port)
            on_path.add(peer)
            stack.append(iter(topo.neighbors(peer)))
            break
        else:
            stack.pop()
            if len(nodes) > 1:
                on_path.discard(nodes.pop())
                links.pop()
                ports.pop()
    return found, False


def rank_paths(paths: Sequence[Path], mode: RankMode | str, rule: PathRule | str,
               link_rel: Callable[[str], float]) -> list[RankedPath]:
    """Order candidates best-first.

    raf:      reliability desc, hop count asc, node sequence asc
    distance: reliability / hop_count desc, reliability desc, node sequence asc
    The link sequence is the last key so parallel links never tie.
    """
    mode = RankMode(mode)
    ranked = []
    for p in paths:
        rel = path_reliability(rule, [link_rel(l) for l in p.links])
        score = rel if mode is RankMode.RAF else rel / p.hop_count
        ranked.append(RankedPath(p, rel, score))
    if mode is RankMode.RAF:
        ranked.sort(key=lambda rp: (-rp.reliability, rp.path.hop_count, rp.path.nodes, rp.path.links))
    else:
        ranked.sort(key=lambda rp: (-rp.score, -rp.reliability, rp.path.nodes, rp.path.links))
    return ranked


@dataclass
class Selector:
    """Bundles the per-run knobs that :func:`select_paths` needs."""

    strategy: Strategy = Strategy.RAF
    table: TierTable = field(default_factory=TierTable)
    rule: PathRule = PathRule.PRODUCT
    cap: int = DEFAULT_PATH_CAP
    disjoint: bool = False

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        self.rule = PathRule(self.rule)


def select_paths(topo: Topology, src: str, dst: str, selector: Selector,
                 link_rel: Callable[[str], float] | None = None) -> PathSet:
    """Enumerate, rank and cut the candidate list down to the installed set.

    ``link_rel`` defaults to the static reliabilities of ``topo``.
    """
    if link_rel is None:
        def link_rel(link_id: str) -> float:
            return topo.link(link_id).reliability
    paths, truncated = enumerate_simple_paths(topo, src, dst, selector.cap)
    if not paths:
        raise NoPathError(f"no path from {src} to {dst}")
    ranked = rank_paths(paths, selector.strategy.rank_mode, selector.rule, link_rel)
    primary = ranked[0]
    if selector.strategy is Strategy.ALL_PATHS:
        want = len(ranked)
    else:
        want = tier_path_count(primary.reliability, len(ranked), selector.table)

    disjoint = selector.disjoint and selector.strategy is not Strategy.ALL_PATHS
    chosen = [primary]
    used = set(primary.path.links)
    for rp in ranked[1:]:
        if len(chosen) >= want:
            break
        if disjoint:
            if used.intersection(rp.path.links):
                continue
            used.update(rp.path.links)
        chosen.append(rp)
    return PathSet(primary, tuple(chosen[1:]), len(paths), truncated)
