"""PNG figures rendered next to the CSV report files."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import CATEGORIES, EQUIPMENT, Report  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "savefig.dpi": 120,
}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    # fixed metadata keeps reruns byte-identical
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def pc_breakdown(report: Report, path: Path) -> Path:
    fig, ax = plt.subplots()
    ids = [r.replica for r in report.replicas]
    bottom = np.zeros(len(ids))
    for cat in CATEGORIES:
        vals = np.array([r.pc[cat] / 1e3 for r in report.replicas])
        ax.bar(ids, vals, bottom=bottom, label=cat)
        bottom += vals
    ax.set_xlabel("replica")
    ax.set_ylabel("power consumption (kW)")
    ax.set_title(f"PC by equipment, planner {report.config.planner}")
    ax.legend(ncol=len(CATEGORIES), loc="lower right")
    return _save(fig, path)


def lightpath_counts(report: Report, path: Path) -> Path:
    fig, ax = plt.subplots()
    caps = sorted({c for r in report.replicas for c in r.lightpaths})
    means = [np.mean([r.lightpaths.get(c, 0) for r in report.replicas]) for c in caps]
    stds = [np.std([r.lightpaths.get(c, 0) for r in report.replicas]) for c in caps]
    ax.bar([str(c) for c in caps], means, yerr=stds, capsize=4)
    ax.set_xlabel("lightpath capacity (Gbps)")
    ax.set_ylabel("lightpaths (mean over replicas)")
    return _save(fig, path)


def equipment_counts(report: Report, path: Path) -> Path:
    fig, ax = plt.subplots()
    means = [np.mean([r.equipment[k] for r in report.replicas]) for k in EQUIPMENT]
    ax.bar(range(len(EQUIPMENT)), means)
    ax.set_xticks(range(len(EQUIPMENT)), EQUIPMENT, rotation=30, ha="right")
    ax.set_ylabel("count (mean over replicas)")
    return _save(fig, path)


def success_blocks(report: Report, path: Path) -> Path:
    fig, ax = plt.subplots()
    for r in report.replicas:
        ax.plot(range(len(r.success_blocks)), r.success_blocks, marker="o", label=f"replica {r.replica}")
    ax.set_xlabel(f"episode block ({report.config.block} episodes)")
    ax.set_ylabel("successful episodes")
    if len(report.replicas) <= 10:
        ax.legend()
    return _save(fig, path)


def training_curve(report: Report, path: Path) -> Path:
    fig, ax = plt.subplots()
    for r in report.replicas:
        curve = [v / 1e3 if math.isfinite(v) else np.nan for v in r.best_curve]
        ax.plot(range(len(curve)), curve, label=f"replica {r.replica}")
    ax.set_xlabel("episode (seeded replays first)")
    ax.set_ylabel("best total PC so far (kW)")
    if len(report.replicas) <= 10:
        ax.legend()
    return _save(fig, path)


def render_figures(report: Report, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    with plt.rc_context(STYLE):
        paths = [
            pc_breakdown(report, out_dir / "pc_breakdown.png"),
            lightpath_counts(report, out_dir / "lightpath_counts.png"),
            equipment_counts(report, out_dir / "equipment_counts.png"),
        ]
        if report.config.planner == "qag":
            paths.append(success_blocks(report, out_dir / "success_blocks.png"))
            paths.append(training_curve(report, out_dir / "training_curve.png"))
    return paths
