"""Physical topology, node equipment budgets and static traffic matrices."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import networkx as nx
import numpy as np

DEFAULT_SLOTS = 320  # 4 THz of 12.5 GHz slots
DEFAULT_SPAN_KM = 80.0
DEFAULT_MAX_SBVTS = 64
DEFAULT_MAX_VERS = 3
DEFAULT_VER_FRACTION = 0.30


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Node:
    id: int
    degree: int = 0
    ver_eligible: bool = False
    max_sbvts: int = DEFAULT_MAX_SBVTS
    max_vers: int = DEFAULT_MAX_VERS
    name: str = ""

    @property
    def label(self) -> str:
        return self.name or str(self.id)


@dataclass(frozen=True)
class Fiber:
    id: int
    a: int
    b: int
    length_km: float
    slots_total: int = DEFAULT_SLOTS

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.a, self.b)

    def direction_from(self, node: int) -> int:
        """Index (0 or 1) of the direction leaving ``node``."""
        if node == self.a:
            return 0
        if node == self.b:
            return 1
        raise ValueError(f"node {node} is not an endpoint of fiber {self.id}")


@dataclass(frozen=True)
class TrafficDemand:
    src: int
    dst: int
    rate_gbps: float
    demand_id: int = 0

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError("demand endpoints must differ")
        if self.rate_gbps <= 0:
            raise ValueError("demand rate must be positive")


@dataclass(frozen=True)
class Topology:
    nodes: tuple[Node, ...]
    fibers: tuple[Fiber, ...]
    span_km: float = DEFAULT_SPAN_KM
    name: str = ""
    ver_fraction: float = DEFAULT_VER_FRACTION

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, int, int], ...], ...]:
        """Per node: ``(neighbor, fiber id, fiber-direction index)`` triples.

        Fiber-direction index is ``2 * fiber.id + direction``.
        """
        adj: list[list[tuple[int, int, int]]] = [[] for _ in self.nodes]
        for f in self.fibers:
            adj[f.a].append((f.b, f.id, 2 * f.id))
            adj[f.b].append((f.a, f.id, 2 * f.id + 1))
        return tuple(tuple(sorted(row)) for row in adj)

    @cached_property
    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(n.id for n in self.nodes)
        for f in self.fibers:
            g.add_edge(f.a, f.b, length_km=f.length_km, fiber=f.id)
        return g

    def fiber_between(self, u: int, v: int) -> Fiber:
        for nbr, fid, _ in self.adjacency[u]:
            if nbr == v:
                return self.fibers[fid]
        raise KeyError((u, v))

    def dir_index(self, u: int, v: int) -> int:
        f = self.fiber_between(u, v)
        return 2 * f.id + f.direction_from(u)


def _validate(nodes: tuple[Node, ...], fibers: tuple[Fiber, ...], span_km: float) -> None:
    if span_km <= 0:
        raise TopologyError("span_km must be positive")
    if [n.id for n in nodes] != list(range(len(nodes))):
        raise TopologyError("node ids must be 0..N-1 in order")
    if len(nodes) < 2 or not fibers:
        raise TopologyError("topology needs at least two nodes and one fiber")
    seen = set()
    for i, f in enumerate(fibers):
        if f.id != i:
            raise TopologyError("fiber ids must be 0..F-1 in order")
        if f.a == f.b:
            raise TopologyError(f"fiber {f.id} is a self-loop")
        if not (0 <= f.a < len(nodes) and 0 <= f.b < len(nodes)):
            raise TopologyError(f"fiber {f.id} references an unknown node")
        if f.length_km <= 0:
            raise TopologyError(f"fiber {f.id} has nonpositive length")
        if f.slots_total <= 0:
            raise TopologyError(f"fiber {f.id} has no spectrum")
        key = frozenset((f.a, f.b))
        if key in seen:
            raise TopologyError(f"duplicate fiber between {f.a} and {f.b}")
        seen.add(key)
    g = nx.Graph()
    g.add_nodes_from(range(len(nodes)))
    g.add_edges_from((f.a, f.b) for f in fibers)
    if not nx.is_connected(g):
        raise TopologyError("topology is not connected")
    for n in nodes:
        if n.max_sbvts <= 0 or n.max_vers < 0:
            raise TopologyError(f"invalid equipment budget at node {n.id}")


def mark_ver_nodes(topology: Topology, fraction: float = DEFAULT_VER_FRACTION) -> Topology:
    """Flag the ``ceil(fraction * N)`` highest-degree nodes as VER sites.

    Ties go to the lower node id.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    n = topology.num_nodes
    # round() guards against 0.3 * 10 = 3.0000000000000004
    k = math.ceil(round(fraction * n, 9))
    ranked = sorted(topology.nodes, key=lambda nd: (-nd.degree, nd.id))
    chosen = {nd.id for nd in ranked[:k]}
    nodes = tuple(replace(nd, ver_eligible=nd.id in chosen) for nd in topology.nodes)
    return replace(topology, nodes=nodes, ver_fraction=fraction)


def build_topology(num_nodes: int, links: list[tuple[int, int, float]], *,
                   span_km: float = DEFAULT_SPAN_KM, slots_total: int = DEFAULT_SLOTS,
                   max_sbvts: int = DEFAULT_MAX_SBVTS, max_vers: int = DEFAULT_MAX_VERS,
                   ver_fraction: float = DEFAULT_VER_FRACTION, names: list[str] | None = None,
                   name: str = "") -> Topology:
    """Assemble and validate a topology from ``(a, b, length_km)`` triples."""
    fibers = tuple(Fiber(i, a, b, float(length), slots_total) for i, (a, b, length) in enumerate(links))
    degree = [0] * num_nodes
    for f in fibers:
        if 0 <= f.a < num_nodes and 0 <= f.b < num_nodes:
            degree[f.a] += 1
            degree[f.b] += 1
    nodes = tuple(
        Node(i, degree[i], False, max_sbvts, max_vers, names[i] if names else "")
        for i in range(num_nodes)
    )
    _validate(nodes, fibers, span_km)
    return mark_ver_nodes(Topology(nodes, fibers, float(span_km), name), ver_fraction)


def topology_from_dict(doc: dict) -> Topology:
    try:
        raw_nodes = sorted(doc["nodes"], key=lambda n: n["id"])
        raw_fibers = doc["fibers"]
        span = float(doc.get("span_km", DEFAULT_SPAN_KM))
    except (KeyError, TypeError) as exc:
        raise TopologyError(f"malformed topology document: {exc}") from exc
    slots = int(doc.get("slots_total", DEFAULT_SLOTS))
    max_sbvts = int(doc.get("max_sbvts", DEFAULT_MAX_SBVTS))
    max_vers = int(doc.get("max_vers", DEFAULT_MAX_VERS))
    fraction = float(doc.get("ver_fraction", DEFAULT_VER_FRACTION))
    num_nodes = len(raw_nodes)
    if [int(n["id"]) for n in raw_nodes] != list(range(num_nodes)):
        raise TopologyError("node ids must be 0..N-1")
    fibers = []
    for i, f in enumerate(sorted(raw_fibers, key=lambda f: f.get("id", 0))):
        fibers.append(Fiber(i, int(f["a"]), int(f["b"]), float(f["length_km"]),
                            int(f.get("slots_total", slots))))
    degree = [0] * num_nodes
    for f in fibers:
        if 0 <= f.a < num_nodes and 0 <= f.b < num_nodes:
            degree[f.a] += 1
            degree[f.b] += 1
    nodes = tuple(
        Node(i, degree[i], False, int(n.get("max_sbvts", max_sbvts)),
             int(n.get("max_vers", max_vers)), str(n.get("name", "")))
        for i, n in enumerate(raw_nodes)
    )
    _validate(nodes, tuple(fibers), span)
    topo = Topology(nodes, tuple(fibers), span, str(doc.get("name", "")))
    return mark_ver_nodes(topo, fraction)


def topology_to_dict(topology: Topology) -> dict:
    slots = {f.slots_total for f in topology.fibers}
    uniform = len(slots) == 1
    doc: dict = {
        "name": topology.name,
        "span_km": topology.span_km,
        "ver_fraction": topology.ver_fraction,
        "nodes": [],
        "fibers": [],
    }
    if uniform:
        doc["slots_total"] = slots.pop()
    for n in topology.nodes:
        entry: dict = {"id": n.id, "max_sbvts": n.max_sbvts, "max_vers": n.max_vers}
        if n.name:
            entry["name"] = n.name
        doc["nodes"].append(entry)
    for f in topology.fibers:
        entry = {"id": f.id, "a": f.a, "b": f.b, "length_km": f.length_km}
        if not uniform:
            entry["slots_total"] = f.slots_total
        doc["fibers"].append(entry)
    return doc


def load_topology(path: str | Path) -> Topology:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise TopologyError(f"{path}: {exc}") from exc
    return topology_from_dict(doc)


def save_topology(topology: Topology, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(topology_to_dict(topology), fh, indent=2)
        fh.write("\n")


def generate_traffic(topology: Topology, atd_gbps: float, seed: int,
                     n_demands: int | None = None) -> list[TrafficDemand]:
    """Static demand matrix with integer rates uniform on ``[5, 2*atd - 5]``.

    With ``n_demands`` set, only that many distinct ordered pairs (drawn
    from the same stream) carry traffic. Demand ids follow row-major
    (src-major) order.
    """
    if atd_gbps < 5:
        raise ValueError("average traffic demand must be at least 5 Gbps")
    lo, hi = 5, math.floor(2 * atd_gbps - 5)
    rng = np.random.default_rng(seed)
    pairs = [(s, d) for s in range(topology.num_nodes) for d in range(topology.num_nodes) if s != d]
    if n_demands is not None:
        if not 0 < n_demands <= len(pairs):
            raise ValueError("n_demands out of range")
        picked = rng.choice(len(pairs), size=n_demands, replace=False)
        pairs = [pairs[i] for i in sorted(picked)]
    rates = rng.integers(lo, hi, size=len(pairs), endpoint=True)
    return [TrafficDemand(s, d, float(r), i) for i, ((s, d), r) in enumerate(zip(pairs, rates))]


def renumber(demands: list[TrafficDemand]) -> list[TrafficDemand]:
    """Sort demands row-major and assign contiguous ids."""
    ordered = sorted(demands, key=lambda d: (d.src, d.dst))
    return [replace(d, demand_id=i) for i, d in enumerate(ordered)]


def load_traffic(path: str | Path, topology: Topology | None = None) -> list[TrafficDemand]:
    """Read a ``src,dst,gbps`` CSV; zero entries are skipped."""
    demands = []
    seen = set()
    with open(path, newline="") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in rows:
            src, dst, rate = int(row["src"]), int(row["dst"]), float(row["gbps"])
            if rate == 0:
                continue
            if (src, dst) in seen:
                raise ValueError(f"duplicate demand {src}->{dst}")
            seen.add((src, dst))
            if topology is not None and not (0 <= src < topology.num_nodes and 0 <= dst < topology.num_nodes):
                raise ValueError(f"demand {src}->{dst} references an unknown node")
            demands.append(TrafficDemand(src, dst, rate))
    return renumber(demands)


def save_traffic(demands: list[TrafficDemand], path: str | Path, header: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst", "gbps"])
        for d in demands:
            w.writerow([d.src, d.dst, f"{d.rate_gbps:g}"])


def random_topology(num_nodes: int, seed: int, *, extra_links: int | None = None,
                    length_range: tuple[float, float] = (100.0, 1200.0), **kwargs) -> Topology:
    """Connected random mesh: a random spanning tree plus ``extra_links`` chords.

    Lengths are whole kilometres drawn uniformly from ``length_range``.
    Remaining keyword arguments go to :func:`build_topology`.
    """
    rng = np.random.default_rng(seed)
    order = rng.permutation(num_nodes)
    links: dict[frozenset, tuple[int, int]] = {}
    for i in range(1, num_nodes):
        a, b = int(order[i]), int(order[rng.integers(i)])
        links[frozenset((a, b))] = (min(a, b), max(a, b))
    if extra_links is None:
        extra_links = num_nodes // 2
    candidates = [(a, b) for a in range(num_nodes) for b in range(a + 1, num_nodes)
                  if frozenset((a, b)) not in links]
    if candidates and extra_links > 0:
        picked = rng.choice(len(candidates), size=min(extra_links, len(candidates)), replace=False)
        for i in sorted(picked):
            a, b = candidates[i]
            links[frozenset((a, b))] = (a, b)
    lo, hi = length_range
    triples = [(a, b, float(rng.integers(int(lo), int(hi), endpoint=True)))
               for a, b in sorted(links.values())]
    return build_topology(num_nodes, triples, **kwargs)
