"""Mutable provisioning substrate: spectrum, lightpaths, equipment and power ledger.

Spectrum occupancy is kept as one Python ``int`` bitmask per fiber
direction (bit ``i`` set means slot ``i`` is taken). Fiber direction ``2*f``
runs from ``fiber.a`` to ``fiber.b`` and ``2*f + 1`` the other way.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .power import PowerCatalog, TransmissionOption, amp_sites
from .topology import Topology

CATEGORIES = ("router", "sbvt", "amp", "ver", "oxc")


class InfeasibleError(RuntimeError):
    """A commit would violate a resource constraint; nothing was changed."""


class NoSpectrum(InfeasibleError):
    pass


class BudgetExceeded(InfeasibleError):
    pass


class InsufficientCapacity(InfeasibleError):
    pass


@dataclass(frozen=True)
class Segment:
    """Transparent stretch of a lightpath on one contiguous slot block."""

    nodes: tuple[int, ...]
    dirs: tuple[int, ...]
    length_km: float
    option: TransmissionOption
    slot_start: int = -1

    @property
    def slot_count(self) -> int:
        return self.option.data_slots


@dataclass(frozen=True)
class Lightpath:
    id: int
    src: int
    dst: int
    capacity_gbps: int
    segments: tuple[Segment, ...]

    @property
    def regen_nodes(self) -> tuple[int, ...]:
        return tuple(s.nodes[0] for s in self.segments[1:])

    @property
    def length_km(self) -> float:
        return sum(s.length_km for s in self.segments)


class PowerLedger(NamedTuple):
    router: float = 0.0
    sbvt: float = 0.0
    amp: float = 0.0
    ver: float = 0.0
    oxc: float = 0.0

    @property
    def total(self) -> float:
        return self.router + self.sbvt + self.amp + self.ver + self.oxc

    def as_dict(self) -> dict[str, float]:
        return dict(self._asdict(), total=self.total)


class Snapshot(NamedTuple):
    occ: tuple
    dir_active: tuple
    sbvts: tuple
    vers: tuple
    lightpaths: tuple
    used: tuple
    routes: tuple
    ledger: tuple


def run_starts(free: int, width: int) -> int:
    """Bitmask of slot indices where ``width`` consecutive free slots begin."""
    m = free
    covered = 1
    # invariant: bit i of m is set iff slots i .. i+covered-1 are all free
    while covered < width:
        step = min(covered, width - covered)
        m &= m >> step
        covered += step
    return m


def lowest_bit(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


class NetworkState:
    """Single-writer provisioning state for one planning run."""

    def __init__(self, topology: Topology, catalog: PowerCatalog | None = None,
                 guard_slots: int = 0):
        self.topology = topology
        self.catalog = catalog or PowerCatalog()
        self.guard_slots = guard_slots
        fibers = topology.fibers
        self.full_masks = tuple((1 << f.slots_total) - 1 for f in fibers for _ in (0, 1))
        self.sites = tuple(amp_sites(f.length_km, topology.span_km) for f in fibers)
        self.dir_length = tuple(f.length_km for f in fibers for _ in (0, 1))
        self.oxc_total = sum(self.catalog.oxc_pc(n.degree) for n in topology.nodes)
        self.reset()

    # -- lifecycle ----------------------------------------------------------

    def reset(self) -> None:
        n_dirs = 2 * len(self.topology.fibers)
        self.occ = [0] * n_dirs
        self.dir_active = [False] * n_dirs
        self.sbvts: list[tuple[tuple[int, float], ...]] = [() for _ in self.topology.nodes]
        self.vers: list[tuple[int, ...]] = [() for _ in self.topology.nodes]
        self.lightpaths: list[Lightpath] = []
        self.used: list[float] = []
        self.routes: list[tuple[int, float, tuple[int, ...]]] = []
        self.ledger = PowerLedger(oxc=self.oxc_total)

    def snapshot(self) -> Snapshot:
        return Snapshot(tuple(self.occ), tuple(self.dir_active), tuple(self.sbvts),
                        tuple(self.vers), tuple(self.lightpaths), tuple(self.used),
                        tuple(self.routes), self.ledger)

    def restore(self, snap: Snapshot) -> None:
        self.occ = list(snap.occ)
        self.dir_active = list(snap.dir_active)
        self.sbvts = list(snap.sbvts)
        self.vers = list(snap.vers)
        self.lightpaths = list(snap.lightpaths)
        self.used = list(snap.used)
        self.routes = list(snap.routes)
        self.ledger = snap.ledger

    @property
    def total_pc(self) -> float:
        return self.ledger.total

    # -- spectrum -----------------------------------------------------------

    def block_width(self, option: TransmissionOption) -> int:
        return option.data_slots + self.guard_slots

    def free_mask(self, dir_index: int) -> int:
        return self.full_masks[dir_index] & ~self.occ[dir_index]

    def common_free(self, dirs: Sequence[int]) -> int:
        free = -1
        for d in dirs:
            free &= self.free_mask(d)
        return free if dirs else 0

    def first_fit_slots(self, dirs: Sequence[int], slot_count: int) -> int:
        """Lowest start index of ``slot_count`` slots free on every direction."""
        if slot_count < 1:
            raise ValueError("slot_count must be at least 1")
        starts = run_starts(self.common_free(dirs), slot_count)
        if not starts:
            raise NoSpectrum(f"no {slot_count} contiguous slots on {list(dirs)}")
        return lowest_bit(starts)

    # -- equipment queries --------------------------------------------------

    def sbvt_new_count(self, node: int, caps: Sequence[float]) -> int | None:
        """SBVTs that must newly activate to attach lightpath ends of ``caps``.

        Ends go first-fit onto existing SBVTs (sliceability and port
        capacity permitting). ``None`` if the node budget would be exceeded.
        """
        slots = list(self.sbvts[node])
        limit_ends = self.catalog.sbvt_sliceability
        limit_cap = self.catalog.router_port_capacity
        fresh = 0
        for c in caps:
            for i, (ends, load) in enumerate(slots):
                if ends < limit_ends and load + c <= limit_cap:
                    slots[i] = (ends + 1, load + c)
                    break
            else:
                if c > limit_cap:
                    return None
                slots.append((1, c))
                fresh += 1
        if len(slots) > self.topology.nodes[node].max_sbvts:
            return None
        return fresh

    def ver_slot(self, node: int) -> tuple[int, bool] | None:
        """(VER index, newly activated) for one more SSR at ``node``, or None."""
        spec = self.topology.nodes[node]
        if not spec.ver_eligible:
            return None
        for i, ssrs in enumerate(self.vers[node]):
            if ssrs < self.catalog.ver_ssr_count:
                return i, False
        if len(self.vers[node]) < spec.max_vers:
            return len(self.vers[node]), True
        return None

    def amp_increment(self, dir_index: int) -> float:
        """Extra amplifier PC if ``dir_index`` starts carrying light."""
        if self.dir_active[dir_index]:
            return 0.0
        other = dir_index ^ 1
        cat = self.catalog
        per_site = cat.amp_dir_pc if self.dir_active[other] else cat.amp_dir_pc + cat.amp_overhead_pc
        return self.sites[dir_index >> 1] * per_site

    def free_capacity(self, lp_id: int) -> float:
        return self.lightpaths[lp_id].capacity_gbps - self.used[lp_id]

    # -- mutation -----------------------------------------------------------

    def assign_spectrum(self, segments: Sequence[Segment]) -> tuple[Segment, ...]:
        """Return copies of ``segments`` with first-fit slot starts filled in."""
        pending: dict[int, int] = {}
        out = []
        for seg in segments:
            width = self.block_width(seg.option)
            free = -1
            for d in seg.dirs:
                free &= self.full_masks[d] & ~(self.occ[d] | pending.get(d, 0))
            starts = run_starts(free, width)
            if not starts:
                raise NoSpectrum(f"no {width} contiguous slots on {list(seg.dirs)}")
            start = lowest_bit(starts)
            block = ((1 << width) - 1) << start
            for d in seg.dirs:
                pending[d] = pending.get(d, 0) | block
            out.append(Segment(seg.nodes, seg.dirs, seg.length_km, seg.option, start))
        return tuple(out)

    def check_lightpath(self, lp: Lightpath) -> None:
        """Raise if ``lp`` is malformed or conflicts with current occupancy."""
        if not lp.segments:
            raise InfeasibleError("lightpath without segments")
        if lp.segments[0].nodes[0] != lp.src or lp.segments[-1].nodes[-1] != lp.dst:
            raise InfeasibleError("segments do not join src to dst")
        taken: dict[int, int] = {}
        for k, seg in enumerate(lp.segments):
            if seg.option.capacity_gbps != lp.capacity_gbps:
                raise InfeasibleError("segment option capacity differs from lightpath")
            if len(seg.dirs) != len(seg.nodes) - 1 or not seg.dirs:
                raise InfeasibleError("segment route malformed")
            for u, v, d in zip(seg.nodes, seg.nodes[1:], seg.dirs):
                if self.topology.dir_index(u, v) != d:
                    raise InfeasibleError(f"direction {d} does not run {u}->{v}")
            length = sum(self.dir_length[d] for d in seg.dirs)
            if abs(length - seg.length_km) > 1e-6 or length > seg.option.mtr_km:
                raise InfeasibleError("segment exceeds maximum transparent reach")
            if k and seg.nodes[0] != lp.segments[k - 1].nodes[-1]:
                raise InfeasibleError("segments are not contiguous")
            width = self.block_width(seg.option)
            if seg.slot_start < 0:
                raise InfeasibleError("segment has no spectrum assigned")
            block = ((1 << width) - 1) << seg.slot_start
            for d in seg.dirs:
                if block & ~self.full_masks[d]:
                    raise NoSpectrum("slot block outside the fiber spectrum")
                if (self.occ[d] | taken.get(d, 0)) & block:
                    raise NoSpectrum(f"spectrum conflict on direction {d}")
                taken[d] = taken.get(d, 0) | block

    def commit_lightpath(self, lp: Lightpath, used_gbps: float = 0.0) -> float:
        """Activate ``lp`` and return the power increment; atomic on failure."""
        if lp.id != len(self.lightpaths):
            raise InfeasibleError("lightpath id must be the next free index")
        if not 0 <= used_gbps <= lp.capacity_gbps:
            raise InsufficientCapacity("used capacity outside [0, capacity]")
        self.check_lightpath(lp)
        cat = self.catalog
        c = lp.capacity_gbps
        new_tx = self.sbvt_new_count(lp.src, [c])
        new_rx = self.sbvt_new_count(lp.dst, [c])
        if new_tx is None or new_rx is None:
            raise BudgetExceeded("SBVT budget exceeded")
        regen = []
        for k, node in enumerate(lp.regen_nodes):
            slot = self.ver_slot(node)
            if slot is None or node in lp.regen_nodes[:k]:
                raise BudgetExceeded(f"no VER capacity at node {node}")
            regen.append((node, slot))

        d_router = cat.router_port_pc * (new_tx + new_rx)
        d_sbvt = lp.segments[0].option.half_pc + lp.segments[-1].option.half_pc
        d_amp = 0.0
        d_ver = 0.0
        for a, b in zip(lp.segments, lp.segments[1:]):
            d_ver += cat.ver_regen_pc(a.option, b.option)

        # mutation starts here; nothing below can fail
        self._attach_end(lp.src, c)
        self._attach_end(lp.dst, c)
        for node, (idx, is_new) in regen:
            vers = list(self.vers[node])
            if is_new:
                vers.append(0)
                d_ver += cat.ver_overhead_pc
            vers[idx] += 1
            self.vers[node] = tuple(vers)
        for seg in lp.segments:
            block = ((1 << self.block_width(seg.option)) - 1) << seg.slot_start
            for d in seg.dirs:
                d_amp += self.amp_increment(d)
                self.dir_active[d] = True
                self.occ[d] |= block
        self.lightpaths.append(lp)
        self.used.append(float(used_gbps))
        old = self.ledger
        self.ledger = PowerLedger(old.router + d_router, old.sbvt + d_sbvt, old.amp + d_amp,
                                  old.ver + d_ver, old.oxc)
        return self.ledger.total - old.total

    def _attach_end(self, node: int, cap: float) -> None:
        slots = list(self.sbvts[node])
        for i, (ends, load) in enumerate(slots):
            if ends < self.catalog.sbvt_sliceability and load + cap <= self.catalog.router_port_capacity:
                slots[i] = (ends + 1, load + cap)
                break
        else:
            slots.append((1, cap))
        self.sbvts[node] = tuple(slots)

    def groom(self, lp_id: int, rate_gbps: float) -> float:
        """Carry ``rate_gbps`` more on an existing lightpath; costs no power."""
        if rate_gbps < 0:
            raise ValueError("rate must be nonnegative")
        if rate_gbps > self.free_capacity(lp_id) + 1e-9:
            raise InsufficientCapacity(
                f"lightpath {lp_id} has {self.free_capacity(lp_id):g} Gbps free, need {rate_gbps:g}")
        self.used[lp_id] += rate_gbps
        return 0.0

    def record_route(self, tag: int, rate_gbps: float, lp_ids: Sequence[int]) -> None:
        self.routes.append((tag, rate_gbps, tuple(lp_ids)))

    # -- accounting ---------------------------------------------------------

    def recompute_ledger(self) -> PowerLedger:
        """Power of all active equipment, computed from scratch."""
        cat = self.catalog
        router = cat.router_port_pc * sum(len(s) for s in self.sbvts)
        sbvt = 0.0
        ver = 0.0
        for lp in self.lightpaths:
            sbvt += lp.segments[0].option.half_pc + lp.segments[-1].option.half_pc
            for a, b in zip(lp.segments, lp.segments[1:]):
                ver += cat.ver_regen_pc(a.option, b.option)
        ver += cat.ver_overhead_pc * sum(1 for vs in self.vers for s in vs if s > 0)
        amp = 0.0
        for fid, n_sites in enumerate(self.sites):
            active = int(self.dir_active[2 * fid]) + int(self.dir_active[2 * fid + 1])
            amp += n_sites * cat.amp_site_pc(active)
        return PowerLedger(router, sbvt, amp, ver, self.oxc_total)

    def equipment_counts(self) -> dict[str, int]:
        return {
            "router_ports": sum(len(s) for s in self.sbvts),
            "sbvts": sum(len(s) for s in self.sbvts),
            "sbvt_tx_ends": len(self.lightpaths),
            "sbvt_rx_ends": len(self.lightpaths),
            "vers": sum(1 for vs in self.vers for s in vs if s > 0),
            "ssrs": sum(sum(vs) for vs in self.vers),
        }

    def lightpath_counts(self) -> dict[int, int]:
        counts = {c: 0 for c in self.catalog.capacity_classes}
        for lp in self.lightpaths:
            counts[lp.capacity_gbps] = counts.get(lp.capacity_gbps, 0) + 1
        return counts

    def make_lightpath(self, src: int, dst: int, capacity_gbps: int,
                       segments: Sequence[Segment]) -> Lightpath:
        """Next-id lightpath over ``segments`` with first-fit spectrum."""
        return Lightpath(len(self.lightpaths), src, dst, int(capacity_gbps),
                         self.assign_spectrum(segments))

    def segment(self, nodes: Sequence[int], option: TransmissionOption) -> Segment:
        dirs = tuple(self.topology.dir_index(u, v) for u, v in zip(nodes, nodes[1:]))
        return Segment(tuple(nodes), dirs, sum(self.dir_length[d] for d in dirs), option)
