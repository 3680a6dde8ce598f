"""Comparison planners: fixed-order greedy (three orderings) and shortest path."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import networkx as nx

from .auxgraph import Provisioner, ProvisionResult, Unsplittable, split_demand
from .power import SplitRequired, UnreachableError
from .state import InfeasibleError, NetworkState
from .topology import TrafficDemand


class OrderingPolicy(enum.Enum):
    DESCENDING = "descending"
    ASCENDING = "ascending"
    INDEX = "index"


GH_POLICIES = {
    "d-gh": OrderingPolicy.DESCENDING,
    "a-gh": OrderingPolicy.ASCENDING,
    "i-gh": OrderingPolicy.INDEX,
}


@dataclass
class PlanResult:
    planner: str
    success: bool
    total_pc_w: float
    order: list[int]
    state: NetworkState
    provisioned: int
    failed_demand: int | None = None


def order_demands(demands: Sequence[TrafficDemand], policy: OrderingPolicy) -> list[int]:
    """Demand ids in provisioning order; rate ties go to the lower id."""
    ids = sorted(range(len(demands)), key=lambda i: demands[i].demand_id)
    if policy is OrderingPolicy.DESCENDING:
        ids.sort(key=lambda i: -demands[i].rate_gbps)
    elif policy is OrderingPolicy.ASCENDING:
        ids.sort(key=lambda i: demands[i].rate_gbps)
    return ids


def _run_order(name: str, state: NetworkState, demands: Sequence[TrafficDemand],
               order: Sequence[int], provision) -> PlanResult:
    done = 0
    for idx in order:
        if not provision(state, demands[idx]).provisioned:
            return PlanResult(name, False, state.ledger.total, list(order), state, done, idx)
        done += 1
    return PlanResult(name, True, state.ledger.total, list(order), state, done)


def plan_gh(state: NetworkState, demands: Sequence[TrafficDemand], policy: OrderingPolicy,
            provisioner: Provisioner | None = None) -> PlanResult:
    """Provision with the auxiliary-graph method in a fixed order."""
    prov = provisioner or Provisioner()
    name = {v: k for k, v in GH_POLICIES.items()}[policy]
    return _run_order(name, state, demands, order_demands(demands, policy), prov.provision)


# -- shortest-path planner ---------------------------------------------------

def _cut_route(state: NetworkState, route: list[int], cap: int) -> list[list[list[int]]]:
    """Split a node route into lightpaths, each a list of transparent segments.

    Each segment runs as far as the longest-reach option allows and ends
    either at the destination or at a VER node with a free SSR. With no
    such node in reach the lightpath ends at the farthest reachable node
    and a new one starts there through the electrical layer.
    """
    topo = state.topology
    reach = state.catalog.max_reach(cap)
    lightpaths: list[list[list[int]]] = []
    segs: list[list[int]] = []
    regen_used: set[int] = set()
    i = 0
    end = len(route) - 1
    while i < end:
        dist = 0.0
        farthest = None
        farthest_ver = None
        for j in range(i + 1, end + 1):
            dist += topo.fiber_between(route[j - 1], route[j]).length_km
            if dist > reach:
                break
            farthest = j
            node = route[j]
            if j == end or (topo.nodes[node].ver_eligible and node not in regen_used
                            and state.ver_slot(node) is not None):
                farthest_ver = j
        if farthest is None:
            raise UnreachableError(f"fiber {route[i]}-{route[i + 1]} exceeds every option's reach")
        if farthest_ver is not None:
            segs.append(route[i:farthest_ver + 1])
            if farthest_ver == end:
                lightpaths.append(segs)
            else:
                regen_used.add(route[farthest_ver])
            i = farthest_ver
        else:
            segs.append(route[i:farthest + 1])
            lightpaths.append(segs)
            segs = []
            i = farthest
    return lightpaths


class ShortestPathProvisioner:
    """Groom onto a direct lightpath, else new lightpaths on the shortest route."""

    def provision(self, state: NetworkState, demand: TrafficDemand) -> ProvisionResult:
        snap = state.snapshot()
        before = state.ledger.total
        if self._provision(state, demand):
            return ProvisionResult(True, state.ledger.total - before)
        state.restore(snap)
        return ProvisionResult(False, 0.0)

    def _provision(self, state: NetworkState, demand: TrafficDemand) -> bool:
        rate = demand.rate_gbps
        for lp in state.lightpaths:
            if lp.src == demand.src and lp.dst == demand.dst and state.free_capacity(lp.id) >= rate:
                state.groom(lp.id, rate)
                state.record_route(demand.demand_id, rate, [lp.id])
                return True
        try:
            cap = state.catalog.capacity_class(rate)
        except SplitRequired:
            cap = None
        if cap is not None:
            snap = state.snapshot()
            if self._new_lightpaths(state, demand, cap):
                return True
            state.restore(snap)
        try:
            first, rest = split_demand(demand, state.catalog.capacity_classes)
        except Unsplittable:
            return False
        return self._provision(state, first) and self._provision(state, rest)

    def _new_lightpaths(self, state: NetworkState, demand: TrafficDemand, cap: int) -> bool:
        route = shortest_route(state, demand.src, demand.dst)
        try:
            plan = _cut_route(state, route, cap)
            used = []
            for segs in plan:
                segments = [state.segment(nodes, state.catalog.select_option(
                    cap, sum(state.topology.fiber_between(u, v).length_km
                             for u, v in zip(nodes, nodes[1:]))))
                    for nodes in segs]
                lp = state.make_lightpath(segs[0][0], segs[-1][-1], cap, segments)
                state.commit_lightpath(lp, demand.rate_gbps)
                used.append(lp.id)
        except (InfeasibleError, UnreachableError):
            return False
        state.record_route(demand.demand_id, demand.rate_gbps, used)
        return True


def shortest_route(state: NetworkState, src: int, dst: int) -> list[int]:
    return nx.shortest_path(state.topology.graph, src, dst, weight="length_km")


def plan_sp(state: NetworkState, demands: Sequence[TrafficDemand]) -> PlanResult:
    """Shortest-path planner, demands in descending rate order."""
    order = order_demands(demands, OrderingPolicy.DESCENDING)
    return _run_order("sp", state, demands, order, ShortestPathProvisioner().provision)

