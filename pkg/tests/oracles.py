"""Reference computations written independently of the planner internals.

They trade speed for obviousness: power is recomputed from the list of
lightpaths, and the cheapest way to carry one demand is found by trying
every physical alternative against a scratch copy of the network.
"""

from __future__ import annotations

import itertools
import math

from eonplan.power import amp_sites
from eonplan.state import InfeasibleError


def ledger_from_scratch(state) -> dict[str, float]:
    """Power per category from the lightpath list alone."""
    cat = state.catalog
    topo = state.topology
    # SBVT packing: ends attach first-fit in lightpath order (source end first)
    sbvts: dict[int, list[list[float]]] = {}
    for lp in state.lightpaths:
        for node in (lp.src, lp.dst):
            cards = sbvts.setdefault(node, [])
            for card in cards:
                if card[0] < cat.sbvt_sliceability and card[1] + lp.capacity_gbps <= cat.router_port_capacity:
                    card[0] += 1
                    card[1] += lp.capacity_gbps
                    break
            else:
                cards.append([1, lp.capacity_gbps])
    router = cat.router_port_pc * sum(len(c) for c in sbvts.values())
    sbvt = sum(lp.segments[0].option.pc_watts / 2 + lp.segments[-1].option.pc_watts / 2
               for lp in state.lightpaths)
    ssrs: dict[int, int] = {}
    ver = 0.0
    for lp in state.lightpaths:
        for a, b in zip(lp.segments, lp.segments[1:]):
            ver += a.option.pc_watts / 2 + b.option.pc_watts / 2 + cat.ver_ssr_pc
            node = b.nodes[0]
            ssrs[node] = ssrs.get(node, 0) + 1
    ver += cat.ver_overhead_pc * sum(math.ceil(n / cat.ver_ssr_count) for n in ssrs.values())
    active: set[tuple[int, int]] = set()
    for lp in state.lightpaths:
        for seg in lp.segments:
            for u, v in zip(seg.nodes, seg.nodes[1:]):
                active.add((u, v))
    amp = 0.0
    for f in topo.fibers:
        dirs = ((f.a, f.b) in active) + ((f.b, f.a) in active)
        if dirs:
            amp += amp_sites(f.length_km, topo.span_km) * (cat.amp_overhead_pc + dirs * cat.amp_dir_pc)
    oxc = sum(cat.oxc_per_degree * n.degree + cat.oxc_base for n in topo.nodes)
    return {"router": router, "sbvt": sbvt, "amp": amp, "ver": ver, "oxc": oxc,
            "total": router + sbvt + amp + ver + oxc}


def plan_violations(state) -> list[str]:
    """Spectrum, reach and budget rules checked slot by slot."""
    topo = state.topology
    out = []
    used: dict[tuple[int, int, int], int] = {}
    for lp in state.lightpaths:
        if not 0 <= state.used[lp.id] <= lp.capacity_gbps + 1e-9:
            out.append(f"lp {lp.id} load {state.used[lp.id]} outside [0, {lp.capacity_gbps}]")
        if lp.segments[0].nodes[0] != lp.src or lp.segments[-1].nodes[-1] != lp.dst:
            out.append(f"lp {lp.id} endpoints")
        for a, b in zip(lp.segments, lp.segments[1:]):
            if a.nodes[-1] != b.nodes[0]:
                out.append(f"lp {lp.id} segments not joined")
            if not topo.nodes[b.nodes[0]].ver_eligible:
                out.append(f"lp {lp.id} regenerates at non-VER node {b.nodes[0]}")
        for seg in lp.segments:
            length = sum(topo.fiber_between(u, v).length_km for u, v in zip(seg.nodes, seg.nodes[1:]))
            if length > seg.option.mtr_km:
                out.append(f"lp {lp.id} segment {length} km beyond reach {seg.option.mtr_km}")
            if seg.option.capacity_gbps != lp.capacity_gbps:
                out.append(f"lp {lp.id} option capacity mismatch")
            for u, v in zip(seg.nodes, seg.nodes[1:]):
                f = topo.fiber_between(u, v)
                if not (0 <= seg.slot_start and seg.slot_start + seg.option.data_slots <= f.slots_total):
                    out.append(f"lp {lp.id} slots outside fiber spectrum")
                for s in range(seg.slot_start, seg.slot_start + seg.option.data_slots):
                    key = (f.id, int(u == f.a), s)
                    used[key] = used.get(key, 0) + 1
    for key, n in used.items():
        if n > 1:
            out.append(f"slot overlap at {key}")
    ends: dict[int, int] = {}
    for lp in state.lightpaths:
        ends[lp.src] = ends.get(lp.src, 0) + 1
        ends[lp.dst] = ends.get(lp.dst, 0) + 1
    for nd in topo.nodes:
        cards = state.sbvts[nd.id]
        if len(cards) > nd.max_sbvts:
            out.append(f"node {nd.id} exceeds SBVT budget")
        for e, load in cards:
            if e > state.catalog.sbvt_sliceability or load > state.catalog.router_port_capacity:
                out.append(f"node {nd.id} SBVT over sliceability or capacity")
        if sum(e for e, _ in cards) != ends.get(nd.id, 0):
            out.append(f"node {nd.id} SBVT ends do not match lightpaths")
        vers = state.vers[nd.id]
        if len(vers) > nd.max_vers or (vers and not nd.ver_eligible):
            out.append(f"node {nd.id} VER budget or eligibility")
        if any(s > state.catalog.ver_ssr_count for s in vers):
            out.append(f"node {nd.id} VER over SSR count")
    return out


# -- exhaustive search over ways to carry one demand --------------------------

def _simple_paths(topo, u, v, banned):
    """All simple physical paths u -> v avoiding ``banned`` nodes."""
    stack = [(u, [u])]
    while stack:
        node, path = stack.pop()
        if node == v:
            yield path
            continue
        for nbr, _, _ in topo.adjacency[node]:
            if nbr not in path and (nbr == v or nbr not in banned):
                stack.append((nbr, path + [nbr]))


def _new_lightpath_variants(state, path, cap):
    """(segments node lists, options) for every regen pattern and option choice."""
    topo = state.topology
    options = state.catalog.options_for(cap)
    inner = [i for i in range(1, len(path) - 1) if topo.nodes[path[i]].ver_eligible]
    for r in range(len(inner) + 1):
        for cuts in itertools.combinations(inner, r):
            bounds = [0, *cuts, len(path) - 1]
            segs = [path[a:b + 1] for a, b in zip(bounds, bounds[1:])]
            for opts in itertools.product(options, repeat=len(segs)):
                yield segs, opts


def _legs(state, node, dst, visited, rate, cap):
    """Every leg from ``node``: groom an existing lightpath or build a new one."""
    for lp in state.lightpaths:
        if lp.src == node and state.free_capacity(lp.id) >= rate and lp.dst not in visited:
            yield ("groom", lp.id, lp.dst, [node, lp.dst])
    for target in range(state.topology.num_nodes):
        if target in visited:
            continue
        for path in _simple_paths(state.topology, node, target, visited):
            for segs, opts in _new_lightpath_variants(state, path, cap):
                yield ("new", (segs, opts), target, path)


def brute_force_min_delta(state, demand, cap, max_legs=4):
    """Cheapest true power increment over every physical-node-simple way to
    carry ``demand`` with lightpaths of class ``cap``; ``None`` if none.

    Candidates are applied to the live state and rolled back, so every
    spectrum, reach and budget rule is enforced by the real commit code.
    """
    best = None
    base = state.snapshot()
    before = state.ledger.total

    def walk(node, visited, legs):
        nonlocal best
        if node == demand.dst:
            snap = state.snapshot()
            try:
                for kind, payload, _, _ in legs:
                    if kind == "groom":
                        state.groom(payload, demand.rate_gbps)
                    else:
                        segs, opts = payload
                        segments = [state.segment(s, o) for s, o in zip(segs, opts)]
                        lp = state.make_lightpath(segs[0][0], segs[-1][-1], cap, segments)
                        state.commit_lightpath(lp, demand.rate_gbps)
                delta = state.ledger.total - before
                if best is None or delta < best - 1e-9:
                    best = delta
            except InfeasibleError:
                pass
            state.restore(snap)
            return
        if len(legs) == max_legs:
            return
        for leg in list(_legs(state, node, demand.dst, visited, demand.rate_gbps, cap)):
            walk(leg[2], visited | set(leg[3]), legs + [leg])

    walk(demand.src, {demand.src}, [])
    state.restore(base)
    return best


def small_instance(seed: int, short_reach: bool = False):
    """Random 3-4 node network with two options per capacity class and a
    few demands already in place; returns (state, demand, capacity class).

    With ``short_reach`` the options are synthetic rows of 400-900 km reach,
    so longer routes need regeneration or electrical relays.
    """
    import numpy as np

    from eonplan.auxgraph import Provisioner
    from eonplan.power import DEFAULT_OPTIONS, PowerCatalog, TransmissionOption
    from eonplan.state import NetworkState
    from eonplan.topology import TrafficDemand, random_topology

    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 5))
    options = []
    for cap in (40, 100, 200, 400):
        if short_reach:
            reach = sorted(rng.choice(np.arange(400, 901, 50), size=2, replace=False))
            base = float(rng.integers(150, 400))
            options += [TransmissionOption(cap, float(r), i + 1, base + 40 * i) for i, r in enumerate(reach)]
            continue
        rows = [o for o in DEFAULT_OPTIONS if o.capacity_gbps == cap]
        picks = rng.choice(len(rows), size=2, replace=False)
        options += [rows[i] for i in sorted(picks)]
    catalog = PowerCatalog(options=tuple(options))
    topo = random_topology(n, seed=int(rng.integers(1 << 30)), extra_links=int(rng.integers(0, 3)),
                           length_range=(150, 800) if short_reach else (150, 1300), slots_total=int(rng.integers(6, 13)),
                           max_sbvts=int(rng.integers(2, 5)), max_vers=int(rng.integers(0, 3)),
                           ver_fraction=float(rng.choice([0.3, 0.6, 1.0])))
    state = NetworkState(topo, catalog)
    prov = Provisioner()
    for _ in range(int(rng.integers(0, 5))):
        s, d = rng.choice(n, size=2, replace=False)
        prov.provision(state, TrafficDemand(int(s), int(d), float(rng.integers(5, 200))))
    s, d = rng.choice(n, size=2, replace=False)
    rate = float(rng.integers(5, 260))
    return state, TrafficDemand(int(s), int(d), rate), catalog.capacity_class(rate)


def exhaustive_order_pcs(topology, demands, catalog=None) -> dict[tuple[int, ...], float]:
    """Total power of every provisioning order (``inf`` if any demand fails)."""
    from eonplan.auxgraph import replay_order
    from eonplan.state import NetworkState

    out = {}
    for order in itertools.permutations(range(len(demands))):
        state = NetworkState(topology, catalog)
        ok, _ = replay_order(state, demands, order)
        out[order] = state.ledger.total if ok else math.inf
    return out
