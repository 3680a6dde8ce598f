"""Tabular Q-learning over the order in which demands are provisioned.

The state is the number of demands already provisioned and an action
picks the next (not yet taken) demand. Each step provisions the chosen
demand with the greedy auxiliary-graph method; the reward is the negative
power increment, ``-P`` on failure, and ``+R`` on top when the last demand
goes through.

Random draws come from one ``numpy.random.Generator`` seeded from the
config, in this order per step: one uniform draw for the exploration coin,
then (only when exploring) one integer draw indexing the sorted list of
untaken demand ids.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .auxgraph import Provisioner, replay_order
from .power import PowerCatalog
from .state import NetworkState, Snapshot
from .topology import Topology, TrafficDemand


@dataclass(frozen=True)
class QLearnConfig:
    alpha: float = 0.1
    gamma: float = 0.99
    eps_min: float = 0.01
    eps_max: float = 1.0
    eps_decay: float = 0.001
    total_episodes: int = 10_000
    penalty_p: float = 1e9
    bonus_r: float = 1e6
    seed: int = 0
    seed_baselines: bool = True
    checkpoint_every: int = 0

    def __post_init__(self):
        for name in ("alpha", "gamma", "eps_min", "eps_max"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.eps_min > self.eps_max:
            raise ValueError("eps_min must not exceed eps_max")
        if self.eps_decay < 0 or self.total_episodes < 0:
            raise ValueError("eps_decay and total_episodes must be nonnegative")
        if self.penalty_p <= 0 or self.bonus_r <= 0:
            raise ValueError("penalty and bonus must be positive")


def epsilon(episode: int, cfg: QLearnConfig) -> float:
    """Exploration rate after ``episode`` episodes (exponential decay)."""
    if episode < 0:
        raise ValueError("episode must be nonnegative")
    return cfg.eps_min + (cfg.eps_max - cfg.eps_min) * math.exp(-cfg.eps_decay * episode)


def q_update(q: float, reward: float, max_next_q: float, cfg: QLearnConfig) -> float:
    return (1.0 - cfg.alpha) * q + cfg.alpha * (reward + cfg.gamma * max_next_q)


class QTable:
    """``(num_demands + 2) x num_demands`` table of action values."""

    def __init__(self, num_demands: int):
        self.num_demands = num_demands
        self.values = np.zeros((num_demands + 2, num_demands))

    def best(self, state: int, taken: np.ndarray) -> int:
        row = np.where(taken, -np.inf, self.values[state])
        return int(np.argmax(row))

    def max_value(self, state: int, taken: np.ndarray) -> float:
        if taken.all():
            return 0.0
        return float(self.values[state][~taken].max())

    def to_csv(self, path: str | Path, header: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header:
                fh.write(f"# {header}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["state", "action", "q"])
            for s in range(self.values.shape[0]):
                for a in range(self.values.shape[1]):
                    w.writerow([s, a, repr(float(self.values[s, a]))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "QTable":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
        n = max(int(r["action"]) for r in rows) + 1
        table = cls(n)
        for r in rows:
            table.values[int(r["state"]), int(r["action"])] = float(r["q"])
        return table


def select_action(qtable: QTable, state: int, taken: np.ndarray, eps: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy choice among untaken demands.

    Exploits when the uniform draw exceeds ``eps`` (ties go to the lowest
    demand id), otherwise picks an untaken demand uniformly at random.
    """
    if taken.all():
        raise ValueError("every action is already taken")
    if rng.random() > eps:
        return qtable.best(state, taken)
    free = np.flatnonzero(~taken)
    return int(free[rng.integers(len(free))])


@dataclass
class EpisodeResult:
    success: bool
    total_pc_w: float
    order: list[int]
    steps: int


class _Trie:
    __slots__ = ("children", "snapshot", "ok", "delta", "total")

    def __init__(self, ok: bool, delta: float, total: float, snapshot: Snapshot | None):
        self.children: dict[int, _Trie] = {}
        self.ok = ok
        self.delta = delta
        self.total = total
        self.snapshot = snapshot


class EpisodeEnv:
    """Provisioning environment that memoizes results by order prefix.

    Provisioning is deterministic given the sequence of demands already
    placed, so identical prefixes across episodes reuse the stored outcome
    and network snapshot instead of re-running the greedy method.
    """

    def __init__(self, state: NetworkState, demands: Sequence[TrafficDemand],
                 provisioner: Provisioner | None = None, max_cached: int = 400_000):
        self.state = state
        self.demands = list(demands)
        self.provisioner = provisioner or Provisioner()
        self.max_cached = max_cached
        self.cached = 0
        self.root = _Trie(True, 0.0, state.ledger.total, state.snapshot())
        # trie node whose snapshot matches the live network state
        self._live = self.root
        self.node = self.root

    def reset(self) -> None:
        self.node = self.root

    @property
    def total_pc(self) -> float:
        return self.node.total

    def step(self, action: int) -> tuple[bool, float]:
        node = self.node
        child = node.children.get(action)
        if child is None:
            if self._live is not node:
                self.state.restore(node.snapshot)
            res = self.provisioner.provision(self.state, self.demands[action])
            total = self.state.ledger.total
            keep = self.cached < self.max_cached
            child = _Trie(res.provisioned, res.delta_pc_w, total,
                          self.state.snapshot() if keep and res.provisioned else None)
            if keep:
                node.children[action] = child
                self.cached += 1
            self._live = child if res.provisioned else node
        self.node = child
        return child.ok, child.delta

    def materialize(self) -> None:
        """Make ``self.state`` reflect the current episode position."""
        if self._live is not self.node:
            self.state.restore(self.node.snapshot)
            self._live = self.node


def run_episode(env: EpisodeEnv, qtable: QTable, eps: float, cfg: QLearnConfig,
                rng: np.random.Generator, forced_order: Sequence[int] | None = None) -> EpisodeResult:
    """One pass over the demand set; the Q-table is updated in place."""
    n = len(env.demands)
    env.reset()
    taken = np.zeros(n, dtype=bool)
    order: list[int] = []
    state = 0
    success = False
    for step in range(n):
        if forced_order is not None:
            action = int(forced_order[step])
        else:
            action = select_action(qtable, state, taken, eps, rng)
        ok, delta = env.step(action)
        done = False
        if ok:
            reward = -delta
            taken[action] = True
            order.append(action)
            if len(order) == n:
                done = success = True
                reward += cfg.bonus_r
        else:
            done = True
            reward = -cfg.penalty_p
        next_q = 0.0 if done else qtable.max_value(state + 1, taken)
        qtable.values[state, action] = q_update(qtable.values[state, action], reward, next_q, cfg)
        state += 1
        if done:
            return EpisodeResult(success, env.total_pc, order, step + 1)
    return EpisodeResult(success, env.total_pc, order, n)


@dataclass
class TrainResult:
    best_order: list[int] | None
    best_pc_w: float
    best_plan: NetworkState | None
    log: list[tuple[int, float, bool, float, int]]
    qtable: QTable
    best_curve: list[float] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.best_order is not None

    def success_blocks(self, block: int = 1000) -> list[int]:
        """Successful episodes per block of ``block`` learning episodes."""
        counts: list[int] = []
        for episode, _, success, _, _ in self.log:
            if episode < 0:
                continue
            b = episode // block
            while len(counts) <= b:
                counts.append(0)
            counts[b] += int(success)
        return counts


def train(topology: Topology, demands: Sequence[TrafficDemand], cfg: QLearnConfig,
          catalog: PowerCatalog | None = None,
          seed_orders: Sequence[Sequence[int]] = (),
          checkpoint: Callable[[int, QTable], None] | None = None,
          provisioner: Provisioner | None = None, guard_slots: int = 0) -> TrainResult:
    """Learn a provisioning order; keep the lowest-power successful episode.

    ``seed_orders`` are replayed as forced episodes (logged with negative
    episode numbers) before learning starts, with ordinary Q updates.
    """
    n = len(demands)
    qtable = QTable(n)
    log: list[tuple[int, float, bool, float, int]] = []
    best_curve: list[float] = []
    if n == 0 or (cfg.total_episodes == 0 and not seed_orders):
        return TrainResult(None, math.inf, None, log, qtable)
    rng = np.random.default_rng(cfg.seed)
    env = EpisodeEnv(NetworkState(topology, catalog, guard_slots), demands, provisioner)
    best_pc = math.inf
    best_order = None

    def consider(res: EpisodeResult) -> None:
        nonlocal best_pc, best_order
        if res.success and res.total_pc_w < best_pc:
            best_pc = res.total_pc_w
            best_order = list(res.order)
        best_curve.append(best_pc)

    for i, order in enumerate(seed_orders):
        res = run_episode(env, qtable, 0.0, cfg, rng, forced_order=order)
        log.append((i - len(seed_orders), 0.0, res.success, res.total_pc_w, res.steps))
        consider(res)
    for episode in range(cfg.total_episodes):
        eps = epsilon(episode, cfg)
        res = run_episode(env, qtable, eps, cfg, rng)
        log.append((episode, eps, res.success, res.total_pc_w, res.steps))
        consider(res)
        if checkpoint and cfg.checkpoint_every and (episode + 1) % cfg.checkpoint_every == 0:
            checkpoint(episode + 1, qtable)

    plan = None
    if best_order is not None:
        plan = NetworkState(topology, catalog, guard_slots)
        ok, _ = replay_order(plan, demands, best_order)
        if not ok or plan.ledger.total != best_pc:
            raise RuntimeError("replaying the best order did not reproduce its power")
    return TrainResult(best_order, best_pc, plan, log, qtable, best_curve)


def write_training_log(log, path: str | Path, header: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(f"# {header}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "epsilon", "success", "total_pc_w", "steps"])
        for episode, eps, success, pc, steps in log:
            w.writerow([episode, f"{eps:.12g}", int(success), f"{pc:.6f}", steps])
