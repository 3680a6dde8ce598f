"""Equipment power-consumption model and the sub-transponder option catalog.

All powers are in watts, capacities in Gbps and distances in km.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

CAPACITY_CLASSES = (40, 100, 200, 400)


class UnreachableError(ValueError):
    """No transmission option of the requested capacity covers the distance."""


class SplitRequired(Exception):
    """The rate is above the largest capacity class and must be split."""


@dataclass(frozen=True, order=True)
class TransmissionOption:
    capacity_gbps: int
    mtr_km: float
    data_slots: int
    pc_watts: float

    @property
    def half_pc(self) -> float:
        # origination or termination at an SBVT costs half the sub-transponder PC
        return self.pc_watts / 2.0


# (capacity, MTR, data slots, PC) for every sub-transponder/VER transmission option.
DEFAULT_OPTIONS: tuple[TransmissionOption, ...] = tuple(
    TransmissionOption(*row)
    for row in [
        (40, 600.0, 1, 154.8),
        (40, 1900.0, 1, 183.6),
        (40, 2500.0, 2, 183.6),
        (40, 3000.0, 3, 183.6),
        (40, 4000.0, 4, 183.6),
        (100, 600.0, 1, 198.0),
        (100, 1900.0, 1, 270.0),
        (100, 2500.0, 2, 270.0),
        (100, 3000.0, 3, 270.0),
        (100, 3500.0, 4, 270.0),
        (200, 500.0, 1, 333.0),
        (200, 600.0, 2, 333.0),
        (200, 750.0, 3, 333.0),
        (200, 1900.0, 4, 432.0),
        (200, 2200.0, 5, 432.0),
        (200, 2500.0, 6, 432.0),
        (400, 500.0, 4, 432.0),
        (400, 600.0, 6, 432.0),
        (400, 750.0, 8, 432.0),
        (400, 1900.0, 10, 630.0),
        (400, 2200.0, 12, 630.0),
        (400, 2500.0, 14, 630.0),
    ]
)


@dataclass(frozen=True)
class PowerCatalog:
    """Power figures for every piece of network equipment.

    Defaults reproduce the reference equipment table: router port 560 W at
    400 Gbps, amplifier 30 W per direction plus 140 W site overhead, VER
    10 W per SSR plus 25 W overhead, BV-OXC ``135*d + 150``.
    """

    router_port_pc: float = 560.0
    router_port_capacity: float = 400.0
    amp_dir_pc: float = 30.0
    amp_overhead_pc: float = 140.0
    ver_ssr_pc: float = 10.0
    ver_overhead_pc: float = 25.0
    oxc_base: float = 150.0
    oxc_per_degree: float = 135.0
    options: tuple[TransmissionOption, ...] = DEFAULT_OPTIONS
    sbvt_sliceability: int = 3
    ver_ssr_count: int = 16
    _by_capacity: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        scalars = (
            self.router_port_pc, self.router_port_capacity, self.amp_dir_pc,
            self.amp_overhead_pc, self.ver_ssr_pc, self.ver_overhead_pc,
            self.oxc_base, self.oxc_per_degree, self.sbvt_sliceability,
            self.ver_ssr_count,
        )
        if any(v <= 0 for v in scalars):
            raise ValueError("all catalog values must be strictly positive")
        if not self.options:
            raise ValueError("catalog needs at least one transmission option")
        by_cap: dict[int, tuple[TransmissionOption, ...]] = {}
        for opt in sorted(self.options):
            if opt.mtr_km <= 0 or opt.data_slots <= 0 or opt.pc_watts <= 0:
                raise ValueError(f"invalid transmission option {opt}")
            by_cap.setdefault(opt.capacity_gbps, ())
            by_cap[opt.capacity_gbps] += (opt,)
        object.__setattr__(self, "_by_capacity", by_cap)

    @property
    def capacity_classes(self) -> tuple[int, ...]:
        return tuple(sorted(self._by_capacity))

    def options_for(self, capacity_gbps: float) -> tuple[TransmissionOption, ...]:
        return self._by_capacity.get(int(capacity_gbps), ())

    def max_reach(self, capacity_gbps: float) -> float:
        opts = self.options_for(capacity_gbps)
        return max((o.mtr_km for o in opts), default=0.0)

    def lookup(self, capacity_gbps: float, mtr_km: float) -> TransmissionOption:
        for opt in self.options_for(capacity_gbps):
            if opt.mtr_km == mtr_km:
                return opt
        raise KeyError((capacity_gbps, mtr_km))

    def with_options(self, options: Iterable[TransmissionOption]) -> "PowerCatalog":
        return replace(self, options=tuple(options))

    # -- equipment formulas -------------------------------------------------

    def oxc_pc(self, degree: int) -> float:
        if degree < 0:
            raise ValueError("degree must be nonnegative")
        return self.oxc_per_degree * degree + self.oxc_base

    def amp_site_pc(self, active_directions: int) -> float:
        if active_directions not in (0, 1, 2):
            raise ValueError("an amplifier site has 0, 1 or 2 active directions")
        if active_directions == 0:
            return 0.0
        return self.amp_overhead_pc + active_directions * self.amp_dir_pc

    def ver_regen_pc(self, option: TransmissionOption,
                     out_option: TransmissionOption | None = None) -> float:
        """PC of one regeneration: termination + re-generation + one SSR.

        The VER overhead is charged by the network state when a VER
        first activates, not here.
        """
        out = option if out_option is None else out_option
        return option.half_pc + out.half_pc + self.ver_ssr_pc

    def capacity_class(self, rate_gbps: float) -> int:
        """Smallest capacity class able to carry ``rate_gbps``."""
        if rate_gbps <= 0:
            raise ValueError("rate must be positive")
        for cap in self.capacity_classes:
            if cap >= rate_gbps:
                return cap
        raise SplitRequired(rate_gbps)

    def select_option(self, capacity_gbps: float, transparent_km: float) -> TransmissionOption:
        """Cheapest option of a capacity class that reaches ``transparent_km``.

        Ties on PC go to the option with fewer data slots.
        """
        feasible = [o for o in self.options_for(capacity_gbps) if o.mtr_km >= transparent_km]
        if not feasible:
            raise UnreachableError(
                f"no {capacity_gbps} Gbps option reaches {transparent_km:g} km")
        return min(feasible, key=lambda o: (o.pc_watts, o.data_slots, o.mtr_km))


def inline_amp_count(length_km: float, span_km: float) -> int:
    """Inline amplifier sites on a fiber; end-node pre/post amplifiers excluded."""
    if length_km <= 0 or span_km <= 0:
        raise ValueError("length and span must be positive")
    return max(math.ceil(length_km / span_km) - 1, 0)


def amp_sites(length_km: float, span_km: float) -> int:
    """Inline sites plus the two end-node sites (pre/post amplifiers)."""
    return inline_amp_count(length_km, span_km) + 2


def load_options_csv(path: str | Path) -> tuple[TransmissionOption, ...]:
    """Read a ``capacity,mtr_km,slots,pc_w`` catalog file."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return tuple(
        TransmissionOption(int(r["capacity"]), float(r["mtr_km"]), int(r["slots"]), float(r["pc_w"]))
        for r in rows
    )


def save_options_csv(options: Sequence[TransmissionOption], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["capacity", "mtr_km", "slots", "pc_w"])
        for o in options:
            w.writerow([o.capacity_gbps, f"{o.mtr_km:g}", o.data_slots, f"{o.pc_watts:g}"])
