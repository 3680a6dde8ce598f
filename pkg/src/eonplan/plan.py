"""Plan documents: export a provisioned network to JSON and re-check it.

A plan document is self-contained. It embeds the topology, the equipment
catalog and the demand list, so it can be validated or replayed without
any other file.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

from .power import PowerCatalog, TransmissionOption
from .state import InfeasibleError, Lightpath, NetworkState, Segment
from .topology import TrafficDemand, topology_from_dict, topology_to_dict

FORMAT_VERSION = 1

_CATALOG_SCALARS = (
    "router_port_pc", "router_port_capacity", "amp_dir_pc", "amp_overhead_pc",
    "ver_ssr_pc", "ver_overhead_pc", "oxc_base", "oxc_per_degree",
    "sbvt_sliceability", "ver_ssr_count",
)


def catalog_to_dict(catalog: PowerCatalog) -> dict:
    doc = {k: getattr(catalog, k) for k in _CATALOG_SCALARS}
    doc["options"] = [asdict(o) for o in catalog.options]
    return doc


def catalog_from_dict(doc: dict) -> PowerCatalog:
    opts = tuple(TransmissionOption(**o) for o in doc["options"])
    return PowerCatalog(options=opts, **{k: doc[k] for k in _CATALOG_SCALARS})


def _segment_doc(seg: Segment) -> dict:
    return {
        "nodes": list(seg.nodes),
        "length_km": seg.length_km,
        "capacity_gbps": seg.option.capacity_gbps,
        "mtr_km": seg.option.mtr_km,
        "slots": seg.option.data_slots,
        "pc_w": seg.option.pc_watts,
        "slot_start": seg.slot_start,
    }


def plan_to_dict(state: NetworkState, demands: Sequence[TrafficDemand], order: Sequence[int],
                 meta: dict) -> dict:
    """JSON-ready description of ``state``; ``meta`` carries planner and seeds."""
    return {
        "format": FORMAT_VERSION,
        "meta": dict(meta),
        "topology": topology_to_dict(state.topology),
        "catalog": catalog_to_dict(state.catalog),
        "guard_slots": state.guard_slots,
        "demands": [{"id": d.demand_id, "src": d.src, "dst": d.dst, "gbps": d.rate_gbps}
                    for d in demands],
        "order": [int(i) for i in order],
        "lightpaths": [
            {"id": lp.id, "src": lp.src, "dst": lp.dst, "capacity_gbps": lp.capacity_gbps,
             "used_gbps": state.used[lp.id],
             "segments": [_segment_doc(s) for s in lp.segments]}
            for lp in state.lightpaths
        ],
        "routes": [{"demand_id": tag, "gbps": rate, "lightpaths": list(lps)}
                   for tag, rate, lps in state.routes],
        "nodes": [
            {"id": n.id,
             "sbvts": [{"ends": e, "load_gbps": load} for e, load in state.sbvts[n.id]],
             "vers": list(state.vers[n.id])}
            for n in state.topology.nodes
        ],
        "ledger": state.ledger._asdict() | {"total": state.ledger.total},
        "equipment": state.equipment_counts(),
        "lightpath_counts": {str(c): k for c, k in state.lightpath_counts().items()},
    }


def dump_plan(doc: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_plan(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def demands_from_plan(doc: dict) -> list[TrafficDemand]:
    return [TrafficDemand(d["src"], d["dst"], float(d["gbps"]), d["id"]) for d in doc["demands"]]


def state_from_plan(doc: dict) -> NetworkState:
    """Rebuild the network state by re-committing every recorded lightpath.

    Raises :class:`InfeasibleError` when a lightpath breaks a spectrum,
    reach or budget rule.
    """
    topo = topology_from_dict(doc["topology"])
    catalog = catalog_from_dict(doc["catalog"])
    state = NetworkState(topo, catalog, guard_slots=doc.get("guard_slots", 0))
    for lp_doc in doc["lightpaths"]:
        segments = []
        for s in lp_doc["segments"]:
            opt = TransmissionOption(s["capacity_gbps"], s["mtr_km"], s["slots"], s["pc_w"])
            if opt not in catalog.options:
                raise InfeasibleError(f"lightpath {lp_doc['id']} uses an option outside the catalog")
            seg = state.segment(s["nodes"], opt)
            segments.append(Segment(seg.nodes, seg.dirs, seg.length_km, opt, s["slot_start"]))
        lp = Lightpath(lp_doc["id"], lp_doc["src"], lp_doc["dst"], lp_doc["capacity_gbps"],
                       tuple(segments))
        state.commit_lightpath(lp, lp_doc["used_gbps"])
    for r in doc["routes"]:
        state.record_route(r["demand_id"], r["gbps"], r["lightpaths"])
    return state


def _close(a: float, b: float, rel: float = 1e-6) -> bool:
    return math.isclose(a, b, rel_tol=rel, abs_tol=1e-9)


def validate_plan(doc: dict) -> list[str]:
    """Every violated plan invariant, as readable messages (empty when valid)."""
    errors: list[str] = []
    try:
        state = state_from_plan(doc)
    except (InfeasibleError, KeyError, ValueError) as exc:
        return [f"lightpaths do not rebuild: {exc}"]

    demands = {d["id"]: d for d in doc["demands"]}
    carried = [0.0] * len(state.lightpaths)
    routed = {i: 0.0 for i in demands}
    for r in doc["routes"]:
        did = r["demand_id"]
        if did not in demands:
            errors.append(f"route for unknown demand {did}")
            continue
        routed[did] += r["gbps"]
        hops = [state.lightpaths[i] for i in r["lightpaths"]] if all(
            0 <= i < len(state.lightpaths) for i in r["lightpaths"]) else None
        if not hops:
            errors.append(f"route for demand {did} references no valid lightpaths")
            continue
        d = demands[did]
        chain_ok = hops[0].src == d["src"] and hops[-1].dst == d["dst"] and all(
            a.dst == b.src for a, b in zip(hops, hops[1:]))
        if not chain_ok:
            errors.append(f"route for demand {did} does not chain {d['src']}->{d['dst']}")
        for lp in hops:
            carried[lp.id] += r["gbps"]
    for lp in state.lightpaths:
        if not _close(carried[lp.id], state.used[lp.id]):
            errors.append(f"lightpath {lp.id} carries {carried[lp.id]:g} Gbps "
                          f"but records {state.used[lp.id]:g}")
        if state.used[lp.id] > lp.capacity_gbps + 1e-9:
            errors.append(f"lightpath {lp.id} is over capacity")
    complete = doc["meta"].get("success", True)
    for did, rate in routed.items():
        want = float(demands[did]["gbps"])
        if rate > want + 1e-9 or (complete and not _close(rate, want)):
            errors.append(f"demand {did} routes {rate:g} of {want:g} Gbps")

    fresh = state.recompute_ledger()
    for key, value in fresh._asdict().items():
        if not _close(value, doc["ledger"][key]):
            errors.append(f"ledger {key} is {doc['ledger'][key]} but recomputes to {value}")
    if not _close(fresh.total, doc["ledger"]["total"]):
        errors.append("ledger total does not match the recomputed total")
    for n in doc["nodes"]:
        nid = n["id"]
        want_sbvts = [(s["ends"], s["load_gbps"]) for s in n["sbvts"]]
        if [(e, load) for e, load in state.sbvts[nid]] != want_sbvts:
            errors.append(f"node {nid} SBVT usage differs from the rebuilt plan")
        if list(state.vers[nid]) != n["vers"]:
            errors.append(f"node {nid} VER usage differs from the rebuilt plan")
    return errors
