"""Experiment orchestration: replicas, metric aggregation and output files."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .baselines import GH_POLICIES, PlanResult, order_demands, plan_gh, plan_sp
from .plan import dump_plan, plan_to_dict
from .power import PowerCatalog
from .qlearning import QLearnConfig, TrainResult, train, write_training_log
from .state import NetworkState
from .topology import Topology, TrafficDemand, generate_traffic, load_topology, load_traffic, save_traffic

log = logging.getLogger(__name__)

PLANNERS = ("sp", "d-gh", "a-gh", "i-gh", "qag")
CATEGORIES = ("router", "sbvt", "amp", "ver", "oxc")
EQUIPMENT = ("router_ports", "sbvts", "sbvt_tx_ends", "sbvt_rx_ends", "vers", "ssrs")


@dataclass(frozen=True)
class RunConfig:
    topology: Path
    planner: str = "qag"
    traffic: Path | None = None
    atd_gbps: float | None = None
    traffic_seed: int = 0
    learn_seed: int = 0
    n_demands: int | None = None
    replicas: int = 10
    out_dir: Path = Path("out")
    qlearn: QLearnConfig = field(default_factory=QLearnConfig)
    catalog: PowerCatalog = field(default_factory=PowerCatalog)
    guard_slots: int = 0
    block: int = 1000
    jobs: int = 1
    figures: bool = True

    def __post_init__(self):
        if self.planner not in PLANNERS:
            raise ValueError(f"planner must be one of {', '.join(PLANNERS)}")
        if (self.traffic is None) == (self.atd_gbps is None):
            raise ValueError("give exactly one of a traffic file or an average traffic demand")
        if self.replicas < 1 or self.jobs < 1 or self.block < 1:
            raise ValueError("replicas, jobs and block must be positive")

    def seeds(self, replica: int) -> tuple[int, int]:
        return self.traffic_seed + replica, self.learn_seed + replica


@dataclass
class ReplicaResult:
    replica: int
    traffic_seed: int
    learn_seed: int
    planner: str
    success: bool
    total_pc_w: float
    pc: dict[str, float]
    lightpaths: dict[int, int]
    equipment: dict[str, int]
    success_blocks: list[int]
    wall_s: float
    best_curve: list[float] = field(default_factory=list)


@dataclass
class Report:
    config: RunConfig
    replicas: list[ReplicaResult]

    def metric_names(self) -> list[str]:
        caps = sorted({c for r in self.replicas for c in r.lightpaths})
        return (["total_pc_w"] + [f"{c}_w" for c in CATEGORIES]
                + [f"lp_{c}" for c in caps] + list(EQUIPMENT))

    def values(self, r: ReplicaResult) -> dict[str, float]:
        row = {"total_pc_w": r.total_pc_w}
        row.update({f"{c}_w": r.pc[c] for c in CATEGORIES})
        row.update({f"lp_{c}": n for c, n in r.lightpaths.items()})
        row.update(r.equipment)
        return row

    def aggregate(self) -> dict[str, tuple[float, float]]:
        """Mean and population standard deviation of every metric."""
        names = self.metric_names()
        table = np.array([[self.values(r).get(n, 0) for n in names] for r in self.replicas], dtype=float)
        return {n: (float(table[:, i].mean()), float(table[:, i].std(ddof=0)))
                for i, n in enumerate(names)}

    @property
    def all_feasible(self) -> bool:
        return all(r.success for r in self.replicas)


def header_line(cfg: RunConfig) -> str:
    return f"planner={cfg.planner} traffic_seed={cfg.traffic_seed} learn_seed={cfg.learn_seed}"


def replica_dir(cfg: RunConfig, replica: int) -> Path:
    return Path(cfg.out_dir) / f"replica_{replica:03d}"


def replica_demands(cfg: RunConfig, topo: Topology, replica: int) -> list[TrafficDemand]:
    if cfg.traffic is not None:
        return load_traffic(cfg.traffic, topo)
    tseed, _ = cfg.seeds(replica)
    return generate_traffic(topo, cfg.atd_gbps, tseed, cfg.n_demands)


def run_planner(cfg: RunConfig, topo: Topology, demands: Sequence[TrafficDemand],
                learn_seed: int, checkpoint=None) -> tuple[PlanResult, TrainResult | None]:
    """Run the configured planner on one demand set."""
    fresh = lambda: NetworkState(topo, cfg.catalog, cfg.guard_slots)  # noqa: E731
    if cfg.planner == "sp":
        return plan_sp(fresh(), demands), None
    if cfg.planner != "qag":
        return plan_gh(fresh(), demands, GH_POLICIES[cfg.planner]), None
    seeds = []
    if cfg.qlearn.seed_baselines:
        seeds = [order_demands(demands, p) for p in GH_POLICIES.values()]
    qcfg = replace(cfg.qlearn, seed=learn_seed)
    tr = train(topo, demands, qcfg, cfg.catalog, seed_orders=seeds, checkpoint=checkpoint,
               guard_slots=cfg.guard_slots)
    if tr.feasible:
        plan = PlanResult("qag", True, tr.best_pc_w, tr.best_order, tr.best_plan, len(demands))
    else:
        plan = PlanResult("qag", False, float("nan"), [], fresh(), 0)
    return plan, tr


def run_replica(cfg: RunConfig, replica: int) -> ReplicaResult:
    topo = load_topology(cfg.topology)
    tseed, lseed = cfg.seeds(replica)
    demands = replica_demands(cfg, topo, replica)
    rdir = replica_dir(cfg, replica)
    rdir.mkdir(parents=True, exist_ok=True)
    head = f"planner={cfg.planner} traffic_seed={tseed} learn_seed={lseed}"
    save_traffic(demands, rdir / "traffic.csv", header=head)

    def checkpoint(episode, qtable):
        qtable.to_csv(rdir / "qtable.csv", header=f"{head} episode={episode}")

    t0 = time.perf_counter()
    plan, tr = run_planner(cfg, topo, demands, lseed, checkpoint)
    wall = time.perf_counter() - t0

    meta = {"planner": cfg.planner, "traffic_seed": tseed, "learn_seed": lseed,
            "replica": replica, "success": plan.success}
    dump_plan(plan_to_dict(plan.state, demands, plan.order, meta), rdir / "plan.json")
    blocks: list[int] = []
    curve: list[float] = []
    if tr is not None:
        write_training_log(tr.log, rdir / "training_log.csv", header=head)
        tr.qtable.to_csv(rdir / "qtable.csv", header=head)
        blocks = tr.success_blocks(cfg.block)
        curve = tr.best_curve
    state = plan.state
    log.info("replica %d: %s %s, %.1f W in %.1f s", replica, cfg.planner,
             "feasible" if plan.success else "infeasible", plan.total_pc_w, wall)
    return ReplicaResult(
        replica, tseed, lseed, cfg.planner, plan.success, plan.total_pc_w,
        dict(zip(CATEGORIES, state.ledger)), state.lightpath_counts(),
        state.equipment_counts(), blocks, wall, curve)


def run(cfg: RunConfig) -> Report:
    """Run every replica, then write the report files (and figures)."""
    Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
    if cfg.jobs > 1 and cfg.replicas > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(run_replica, [cfg] * cfg.replicas, range(cfg.replicas)))
    else:
        results = [run_replica(cfg, r) for r in range(cfg.replicas)]
    report = Report(cfg, results)
    write_report(report)
    if cfg.figures:
        from .plotting import render_figures
        render_figures(report, Path(cfg.out_dir))
    return report


# -- output files ------------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.6f}" if isinstance(v, float) else str(v)


def _writer(path: Path, cfg: RunConfig, columns: Sequence[str]):
    fh = open(path, "w", newline="")
    fh.write(f"# {header_line(cfg)}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    return fh, w


def write_report(report: Report) -> None:
    cfg = report.config
    out = Path(cfg.out_dir)
    names = report.metric_names()

    fh, w = _writer(out / "report.csv", cfg, ["replica", "traffic_seed", "learn_seed", "success"] + names)
    with fh:
        for r in report.replicas:
            vals = report.values(r)
            w.writerow([r.replica, r.traffic_seed, r.learn_seed, int(r.success)]
                       + [_fmt(vals.get(n, 0)) for n in names])
        agg = report.aggregate()
        for i, label in enumerate(("mean", "std")):
            n_ok = sum(r.success for r in report.replicas)
            w.writerow([label, "", "", _fmt(n_ok / len(report.replicas)) if i == 0 else ""]
                       + [_fmt(agg[n][i]) for n in names])

    fh, w = _writer(out / "pc_breakdown.csv", cfg, ["replica"] + [f"{c}_w" for c in CATEGORIES] + ["total_w"])
    with fh:
        for r in report.replicas:
            w.writerow([r.replica] + [_fmt(r.pc[c]) for c in CATEGORIES] + [_fmt(r.total_pc_w)])

    fh, w = _writer(out / "lightpath_counts.csv", cfg, ["replica", "capacity_gbps", "count"])
    with fh:
        for r in report.replicas:
            for cap in sorted(r.lightpaths):
                w.writerow([r.replica, cap, r.lightpaths[cap]])

    fh, w = _writer(out / "equipment_counts.csv", cfg, ["replica"] + list(EQUIPMENT))
    with fh:
        for r in report.replicas:
            w.writerow([r.replica] + [r.equipment[k] for k in EQUIPMENT])

    if cfg.planner == "qag":
        fh, w = _writer(out / "success_blocks.csv", cfg, ["replica", "block", "first_episode", "successes"])
        with fh:
            for r in report.replicas:
                for b, n in enumerate(r.success_blocks):
                    w.writerow([r.replica, b, b * cfg.block, n])

    # wall time lives apart from report.csv so reruns stay byte-identical
    fh, w = _writer(out / "timing.csv", cfg, ["replica", "wall_s"])
    with fh:
        for r in report.replicas:
            w.writerow([r.replica, f"{r.wall_s:.3f}"])
