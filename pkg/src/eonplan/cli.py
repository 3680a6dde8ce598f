"""Command-line entry point: ``eonplan plan | gen-traffic | validate-plan | replay``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .auxgraph import Provisioner
from .baselines import ShortestPathProvisioner
from .harness import PLANNERS, RunConfig, run
from .plan import catalog_from_dict, demands_from_plan, dump_plan, load_plan, plan_to_dict, validate_plan
from .power import PowerCatalog, load_options_csv
from .qlearning import QLearnConfig
from .state import NetworkState
from .topology import generate_traffic, load_topology, save_traffic, topology_from_dict

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# (config key, type, default); flags use the same names with dashes
PLAN_KEYS = (
    ("topology", Path, None),
    ("traffic", Path, None),
    ("atd", float, None),
    ("demands", int, None),
    ("planner", str, "qag"),
    ("replicas", int, 10),
    ("seed", int, 0),
    ("traffic_seed", int, None),
    ("learn_seed", int, None),
    ("out", Path, Path("out")),
    ("episodes", int, 10_000),
    ("alpha", float, 0.1),
    ("gamma", float, 0.99),
    ("eps_min", float, 0.01),
    ("eps_max", float, 1.0),
    ("eps_decay", float, 0.001),
    ("penalty", float, 1e9),
    ("bonus", float, 1e6),
    ("seed_baselines", bool, True),
    ("checkpoint_every", int, 0),
    ("block", int, 1000),
    ("jobs", int, 1),
    ("figures", bool, True),
    ("catalog", Path, None),
    ("guard_slots", int, 0),
)


def _add_plan_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="TOML file supplying any of the options below")
    for key, typ, _ in PLAN_KEYS:
        flag = "--" + key.replace("_", "-")
        if typ is bool:
            p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None)
        elif key == "planner":
            p.add_argument(flag, dest=key, choices=PLANNERS, default=None)
        else:
            p.add_argument(flag, dest=key, type=typ, default=None)


def resolve_plan_options(args: argparse.Namespace) -> dict:
    """Merge defaults, the config file and flags (flags win)."""
    conf = {}
    if args.config is not None:
        with open(args.config, "rb") as fh:
            conf = tomllib.load(fh)
        unknown = set(conf) - {k for k, _, _ in PLAN_KEYS}
        if unknown:
            raise SystemExit(f"unknown config keys: {', '.join(sorted(unknown))}")
    opts = {}
    for key, typ, default in PLAN_KEYS:
        value = getattr(args, key)
        if value is None and key in conf:
            value = typ(conf[key])
        opts[key] = default if value is None else value
    return opts


def build_run_config(opts: dict) -> RunConfig:
    if opts["topology"] is None:
        raise SystemExit("a topology file is required")
    catalog = PowerCatalog()
    if opts["catalog"] is not None:
        catalog = catalog.with_options(load_options_csv(opts["catalog"]))
    qcfg = QLearnConfig(
        alpha=opts["alpha"], gamma=opts["gamma"], eps_min=opts["eps_min"], eps_max=opts["eps_max"],
        eps_decay=opts["eps_decay"], total_episodes=opts["episodes"], penalty_p=opts["penalty"],
        bonus_r=opts["bonus"], seed_baselines=opts["seed_baselines"],
        checkpoint_every=opts["checkpoint_every"])
    seed = opts["seed"]
    return RunConfig(
        topology=opts["topology"], planner=opts["planner"], traffic=opts["traffic"],
        atd_gbps=opts["atd"],
        traffic_seed=seed if opts["traffic_seed"] is None else opts["traffic_seed"],
        learn_seed=seed if opts["learn_seed"] is None else opts["learn_seed"],
        n_demands=opts["demands"], replicas=opts["replicas"], out_dir=opts["out"], qlearn=qcfg,
        catalog=catalog, guard_slots=opts["guard_slots"], block=opts["block"], jobs=opts["jobs"],
        figures=opts["figures"])


def cmd_plan(args: argparse.Namespace) -> int:
    try:
        cfg = build_run_config(resolve_plan_options(args))
    except ValueError as exc:
        raise SystemExit(f"invalid configuration: {exc}")
    report = run(cfg)
    agg = report.aggregate()
    for r in report.replicas:
        status = "feasible" if r.success else "INFEASIBLE"
        print(f"replica {r.replica}: {status} total_pc_w={r.total_pc_w:.1f}")
    mean, std = agg["total_pc_w"]
    print(f"mean total_pc_w={mean:.1f} std={std:.1f} -> {cfg.out_dir}")
    if cfg.planner != "qag" and not report.all_feasible:
        return 2
    return 0


def cmd_gen_traffic(args: argparse.Namespace) -> int:
    topo = load_topology(args.topology)
    demands = generate_traffic(topo, args.atd, args.seed, args.demands)
    save_traffic(demands, args.out, header=f"atd={args.atd:g} traffic_seed={args.seed}")
    print(f"{len(demands)} demands -> {args.out}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    bad = 0
    for path in args.plans:
        errors = validate_plan(load_plan(path))
        if errors:
            bad += 1
            print(f"{path}: INVALID")
            for e in errors:
                print(f"  {e}")
        else:
            print(f"{path}: ok")
    return 1 if bad else 0


def cmd_replay(args: argparse.Namespace) -> int:
    doc = load_plan(args.plan)
    topo = topology_from_dict(doc["topology"])
    state = NetworkState(topo, catalog_from_dict(doc["catalog"]), doc.get("guard_slots", 0))
    demands = demands_from_plan(doc)
    order = doc["order"] if args.order is None else [int(x) for x in args.order.split(",")]
    trace = open(args.trace, "w") if args.trace else None
    try:
        if doc["meta"].get("planner") == "sp":
            prov = ShortestPathProvisioner()
        else:
            prov = Provisioner(trace=trace)
        ok = True
        for idx in order:
            if not prov.provision(state, demands[idx]).provisioned:
                ok = False
                print(f"demand {idx} could not be provisioned")
                break
    finally:
        if trace:
            trace.close()
    total = state.ledger.total
    print(f"replayed {len(order)} demands: {'feasible' if ok else 'infeasible'} total_pc_w={total!r}")
    if args.out:
        meta = dict(doc["meta"], success=ok, replayed_from=str(args.plan))
        dump_plan(plan_to_dict(state, demands, order, meta), args.out)
    if args.order is None:
        recorded = doc["ledger"]["total"]
        if total != recorded:
            print(f"MISMATCH: plan records total_pc_w={recorded!r}")
            return 1
        print("matches the recorded plan")
    return 0 if ok else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eonplan", description="Energy-aware IP-over-EON planner")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan one or more demand sets and write a report")
    _add_plan_args(p)
    p.set_defaults(func=cmd_plan)

    g = sub.add_parser("gen-traffic", help="write a random demand matrix")
    g.add_argument("--topology", type=Path, required=True)
    g.add_argument("--atd", type=float, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--demands", type=int, default=None, help="number of node pairs carrying traffic")
    g.add_argument("--out", type=Path, required=True)
    g.set_defaults(func=cmd_gen_traffic)

    v = sub.add_parser("validate-plan", help="re-check every invariant of plan files")
    v.add_argument("plans", type=Path, nargs="+")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("replay", help="re-provision a plan's demands in its recorded order")
    r.add_argument("--plan", type=Path, required=True)
    r.add_argument("--order", default=None, help="comma-separated demand ids instead of the recorded order")
    r.add_argument("--trace", type=Path, default=None, help="write per-demand path records (JSON lines)")
    r.add_argument("--out", type=Path, default=None, help="write the replayed plan here")
    r.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
