"""Per-demand auxiliary graph, minimum-power path search and greedy provisioning.

Every physical node ``v`` contributes an electrical aux node ``(v, -1)`` and
one optical aux node ``(v, k)`` per transmission option ``k`` of the
demand's capacity class. Edge weights are the *incremental* power of using
that edge given the current network state; already-powered equipment
costs nothing.

The search is a label-setting Dijkstra variant. Labels carry the
transparent distance since the last electrical point or regeneration, the
slot mask still free along the current transparent segment, and the set of
physical nodes visited (paths never revisit a physical node, so no fiber,
lightpath, SBVT or VER is double-booked within one path and edge weights
add up to the true power increment). Regeneration at VER-capable nodes is
a label reset rather than an explicit edge.
"""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, TextIO

from .power import SplitRequired, TransmissionOption
from .state import InfeasibleError, NetworkState, Segment, run_starts
from .topology import TrafficDemand

log = logging.getLogger(__name__)

ELECTRICAL = -1

TX, RX, TRANSMISSION, LIGHTPATH, REGEN = "tx", "rx", "transmission", "lightpath", "regen"


class NoPath(Exception):
    pass


class Unsplittable(ValueError):
    pass


class AuxEdge(NamedTuple):
    kind: str
    u: tuple[int, int]
    v: tuple[int, int]
    weight: float
    payload: int  # fiber-direction index, lightpath id, or node id


@dataclass
class AuxGraph:
    demand: TrafficDemand
    capacity_gbps: int
    options: tuple[TransmissionOption, ...]
    edges: list[AuxEdge] = field(default_factory=list)
    out: dict[tuple[int, int], list[AuxEdge]] = field(default_factory=dict)
    # per physical node: extra SBVTs for one end, and for two ends of this class
    sbvt_one: list[int | None] = field(default_factory=list)
    sbvt_two: list[int | None] = field(default_factory=list)
    # per physical node: VER overhead to pay for one regeneration, None if impossible
    regen_overhead: list[float | None] = field(default_factory=list)

    def add(self, edge: AuxEdge) -> None:
        self.edges.append(edge)
        self.out.setdefault(edge.u, []).append(edge)

    def has_edge(self, u: tuple[int, int], v: tuple[int, int], kind: str | None = None) -> bool:
        return any(e.v == v and (kind is None or e.kind == kind) for e in self.out.get(u, ()))

    def nodes(self) -> list[tuple[int, int]]:
        n_phys = len(self.sbvt_one)
        return [(v, layer) for v in range(n_phys) for layer in range(-1, len(self.options))]


@dataclass
class AuxPath:
    steps: list[AuxEdge]
    cost: float

    @property
    def hops(self) -> int:
        return len(self.steps)

    @property
    def lightpath_edges(self) -> int:
        return sum(1 for s in self.steps if s.kind == LIGHTPATH)


def build_aux_graph(state: NetworkState, demand: TrafficDemand, capacity_gbps: int) -> AuxGraph:
    """Auxiliary graph holding exactly the edges the current state permits."""
    cat = state.catalog
    topo = state.topology
    options = cat.options_for(capacity_gbps)
    g = AuxGraph(demand, int(capacity_gbps), options)
    edges = g.edges
    out = g.out
    port = cat.router_port_pc
    layers = range(len(options))
    for v in range(topo.num_nodes):
        one = state.sbvt_new_count(v, [capacity_gbps])
        two = state.sbvt_new_count(v, [capacity_gbps, capacity_gbps])
        g.sbvt_one.append(one)
        g.sbvt_two.append(two)
        slot = state.ver_slot(v)
        g.regen_overhead.append(None if slot is None else (cat.ver_overhead_pc if slot[1] else 0.0))
        if one is None:
            continue
        enode = (v, ELECTRICAL)
        tx_out = out[enode] = []
        for k in layers:
            w = port * one + options[k].half_pc
            onode = (v, k)
            tx = AuxEdge(TX, enode, onode, w, v)
            rx = AuxEdge(RX, onode, enode, w, v)
            edges.append(tx)
            edges.append(rx)
            tx_out.append(tx)
            out[onode] = [rx]
    widths = [state.block_width(o) for o in options]
    reach = [o.mtr_km for o in options]
    for u in range(topo.num_nodes):
        for v, fid, d in topo.adjacency[u]:
            length = state.dir_length[d]
            free = state.free_mask(d)
            inc = state.amp_increment(d)
            for k in layers:
                if length <= reach[k] and (widths[k] == 1 and free or run_starts(free, widths[k])):
                    e = AuxEdge(TRANSMISSION, (u, k), (v, k), inc, d)
                    edges.append(e)
                    out.setdefault(e.u, []).append(e)
    seen = set()
    rate = demand.rate_gbps - 1e-9
    for lp in state.lightpaths:
        key = (lp.src, lp.dst)
        if key in seen:
            continue
        if state.lightpaths[lp.id].capacity_gbps - state.used[lp.id] >= rate:
            seen.add(key)
            e = AuxEdge(LIGHTPATH, (lp.src, ELECTRICAL), (lp.dst, ELECTRICAL), 0.0, lp.id)
            edges.append(e)
            out.setdefault(e.u, []).append(e)
    return g


def _dominated(settled: list, km: float, free: int, visited: int, pending: int, fresh: int) -> bool:
    for s_km, s_free, s_visited, s_pending, s_fresh in settled:
        if (s_km <= km and s_pending == pending and s_fresh <= fresh
                and not s_visited & ~visited and not free & ~s_free):
            return True
    return False


def min_pc_path(graph: AuxGraph, state: NetworkState, src: int, dst: int) -> AuxPath:
    """Least-power path from ``src``'s to ``dst``'s electrical aux node.

    Ties are broken by fewer hops, then more lightpath edges, then the
    lexicographic aux-node sequence.
    """
    if src == dst:
        raise ValueError("src and dst must differ")
    options = graph.options
    widths = [state.block_width(o) for o in options]
    mtr = [o.mtr_km for o in options]
    cat = state.catalog
    port = cat.router_port_pc
    regen_w = [[cat.ver_regen_pc(a, b) for b in options] for a in options]
    layers = range(len(options))
    out = graph.out
    dir_length = state.dir_length
    free_mask = state.free_mask
    dir_free: dict[int, int] = {}
    push = heapq.heappush
    pop = heapq.heappop

    start = (src, ELECTRICAL)
    # heap entry: (cost, hops, -lightpath edges, aux-node path, counter,
    #              km, free, visited, pending, fresh, parent entry, step edge)
    heap = [(0.0, 0, 0, (start,), 0, 0.0, -1, 1 << src, 0, 0, None, None)]
    settled: dict[tuple[int, int], list] = {}
    counter = 1

    while heap:
        entry = pop(heap)
        cost, hops, neg_lp, path, _, km, free, visited, pending, fresh, _, _ = entry
        node = path[-1]
        bucket = settled.get(node)
        if bucket is None:
            bucket = settled[node] = []
        elif _dominated(bucket, km, free, visited, pending, fresh):
            continue
        bucket.append((km, free, visited, pending, fresh))
        phys, layer = node
        hops1 = hops + 1
        if layer == ELECTRICAL:
            if phys == dst:
                steps = []
                cur = entry
                while cur[10] is not None:
                    steps.append(cur[11])
                    cur = cur[10]
                steps.reverse()
                return AuxPath(steps, cost)
            for e in out.get(node, ()):
                if e.kind == TX:
                    if pending:
                        two = graph.sbvt_two[phys]
                        if two is None:
                            continue
                        e = e._replace(weight=port * (two - graph.sbvt_one[phys]) + options[e.v[1]].half_pc)
                    counter += 1
                    push(heap, (cost + e.weight, hops1, neg_lp, path + (e.v,), counter,
                                0.0, -1, visited, 0, 1, entry, e))
                else:
                    vbit = 1 << e.v[0]
                    if visited & vbit:
                        continue
                    counter += 1
                    push(heap, (cost, hops1, neg_lp - 1, path + (e.v,), counter,
                                0.0, -1, visited | vbit, 0, 0, entry, e))
            continue

        at_dst = phys == dst
        for e in out.get(node, ()):
            if e.kind == RX:
                if fresh:
                    continue
                counter += 1
                push(heap, (cost + e.weight, hops1, neg_lp, path + (e.v,), counter,
                            0.0, -1, visited, 1, 0, entry, e))
            elif not at_dst:
                vbit = 1 << e.v[0]
                if visited & vbit:
                    continue
                d = e.payload
                km2 = km + dir_length[d]
                if km2 > mtr[layer]:
                    continue
                f = dir_free.get(d)
                if f is None:
                    f = dir_free[d] = free_mask(d)
                free2 = free & f
                if not run_starts(free2, widths[layer]):
                    continue
                counter += 1
                push(heap, (cost + e.weight, hops1, neg_lp, path + (e.v,), counter,
                            km2, free2, visited | vbit, 0, 0, entry, e))
        overhead = graph.regen_overhead[phys]
        if not fresh and not at_dst and overhead is not None:
            row = regen_w[layer]
            for k2 in layers:
                w = row[k2] + overhead
                e = AuxEdge(REGEN, node, (phys, k2), w, phys)
                counter += 1
                push(heap, (cost + w, hops1, neg_lp, path + (e.v,), counter,
                            0.0, -1, visited, 0, 1, entry, e))
    raise NoPath(f"no auxiliary path {src}->{dst}")


def split_demand(demand: TrafficDemand, classes: Sequence[int] = (40, 100, 200, 400)):
    """Split into a full capacity-class part and a remainder.

    The first part is the largest class strictly below the rate, or the
    largest class outright when the rate exceeds it.
    """
    classes = sorted(classes)
    rate = demand.rate_gbps
    if rate <= classes[0]:
        raise Unsplittable(f"{rate:g} Gbps is at or below the smallest class")
    if rate > classes[-1]:
        first = classes[-1]
    else:
        first = max(c for c in classes if c < rate)
    return (TrafficDemand(demand.src, demand.dst, float(first), demand.demand_id),
            TrafficDemand(demand.src, demand.dst, rate - first, demand.demand_id))


class ProvisionResult(NamedTuple):
    provisioned: bool
    delta_pc_w: float


def apply_path(state: NetworkState, path: AuxPath, demand: TrafficDemand, capacity_gbps: int) -> list[int]:
    """Groom and set up lightpaths along ``path``; returns lightpath ids used."""
    options = state.catalog.options_for(capacity_gbps)
    used: list[int] = []
    seg_nodes: list[int] = []
    seg_opt = None
    segments: list[Segment] = []
    lp_src = None
    for step in path.steps:
        if step.kind == LIGHTPATH:
            state.groom(step.payload, demand.rate_gbps)
            used.append(step.payload)
        elif step.kind == TX:
            lp_src = step.u[0]
            seg_nodes = [lp_src]
            seg_opt = options[step.v[1]]
            segments = []
        elif step.kind == TRANSMISSION:
            seg_nodes.append(step.v[0])
        elif step.kind == REGEN:
            segments.append(state.segment(seg_nodes, seg_opt))
            seg_nodes = [step.u[0]]
            seg_opt = options[step.v[1]]
        elif step.kind == RX:
            segments.append(state.segment(seg_nodes, seg_opt))
            lp = state.make_lightpath(lp_src, step.u[0], capacity_gbps, segments)
            state.commit_lightpath(lp, demand.rate_gbps)
            used.append(lp.id)
    return used


class Provisioner:
    """Greedy one-demand-at-a-time provisioning through the auxiliary graph.

    A demand with no path is split into a full-class part and a remainder,
    provisioned depth-first (first part first). If any part fails, the state
    is rolled back to where it was before the demand was attempted.
    """

    def __init__(self, trace: TextIO | None = None):
        self.trace = trace

    def _emit(self, **record) -> None:
        if self.trace is not None:
            self.trace.write(json.dumps(record) + "\n")

    def provision(self, state: NetworkState, demand: TrafficDemand) -> ProvisionResult:
        snap = state.snapshot()
        before = state.ledger.total
        ok = self._provision(state, demand)
        if not ok:
            state.restore(snap)
            self._emit(demand=demand.demand_id, src=demand.src, dst=demand.dst,
                       gbps=demand.rate_gbps, provisioned=False)
            return ProvisionResult(False, 0.0)
        return ProvisionResult(True, state.ledger.total - before)

    def _provision(self, state: NetworkState, demand: TrafficDemand) -> bool:
        cat = state.catalog
        try:
            cap = cat.capacity_class(demand.rate_gbps)
        except SplitRequired:
            cap = None
        if cap is not None:
            graph = build_aux_graph(state, demand, cap)
            try:
                path = min_pc_path(graph, state, demand.src, demand.dst)
            except NoPath:
                path = None
            if path is not None:
                before = state.ledger.total
                try:
                    lps = apply_path(state, path, demand, cap)
                except InfeasibleError:  # pragma: no cover - search guarantees feasibility
                    log.exception("path from search failed to commit")
                    return False
                state.record_route(demand.demand_id, demand.rate_gbps, lps)
                self._emit(demand=demand.demand_id, src=demand.src, dst=demand.dst,
                           gbps=demand.rate_gbps, capacity=cap,
                           edges=[[s.kind, list(s.u), list(s.v), s.payload] for s in path.steps],
                           delta_pc_w=state.ledger.total - before, provisioned=True)
                return True
        try:
            first, rest = split_demand(demand, cat.capacity_classes)
        except Unsplittable:
            return False
        return self._provision(state, first) and self._provision(state, rest)


def provision(state: NetworkState, demand: TrafficDemand) -> ProvisionResult:
    return Provisioner().provision(state, demand)


def replay_order(state: NetworkState, demands: Sequence[TrafficDemand], order: Sequence[int],
                 provisioner: Provisioner | None = None,
                 stop_on_failure: bool = True) -> tuple[bool, list[float]]:
    """Provision ``demands`` in ``order``; returns (all succeeded, per-step deltas)."""
    prov = provisioner or Provisioner()
    deltas = []
    ok = True
    for idx in order:
        res = prov.provision(state, demands[idx])
        deltas.append(res.delta_pc_w)
        if not res.provisioned:
            ok = False
            if stop_on_failure:
                break
    return ok, deltas
