"""The semi-random graph process engine.

Vertices are ``0 .. n-1``. Each round a uniformly random vertex (the square)
is presented, the strategy answers with a circle, and the arc
``square -> circle`` is added. The state also carries the matching and the
green/red colouring used by the augmenting-path strategies; strategies change
those only through the methods below, which keep the colouring consistent.
"""

from __future__ import annotations

import csv
import json
import subprocess
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

UNCOLORED, GREEN, RED = 0, 1, 2
GENERATOR = "numpy.random.PCG64"


class ProcessError(RuntimeError):
    """Engine-level failure: invalid move or corrupted bookkeeping."""


class StrategyError(ProcessError):
    pass


class Rng:
    """Seeded source of uniform integers, buffered for speed.

    ``randbelow(k)`` returns ``floor(u * k)`` for a uniform 53-bit double
    ``u``; the bias is at most ``k / 2**53``.
    """

    generator = GENERATOR

    def __init__(self, seed: int, buffer: int = 1 << 16):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))
        self._size = buffer
        self._buf: list = []
        self._pos = 0

    def random(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(self._size).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def randbelow(self, k: int) -> int:
        if k <= 0:
            raise ValueError("randbelow needs a positive bound")
        return int(self.random() * k)


class Arc(NamedTuple):
    square: int
    circle: int
    round: int
    unusable: bool = False


class Strategy:
    """Base class for players.

    ``choose_circle`` sees the state before the arc is added and must return
    a vertex other than the square that is not yet adjacent to it. It may set
    ``self.unusable`` to flag the arc as one the matching will never use.
    ``on_applied`` runs after the engine has recorded the arc.
    """

    name = "strategy"
    unusable = False

    def choose_circle(self, state: "ProcessState", square: int) -> int:
        raise NotImplementedError

    def on_applied(self, state: "ProcessState", arc: Arc) -> None:
        pass

    def sample(self, state: "ProcessState") -> dict:
        """Extra per-sample values recorded in trajectories."""
        return {}


class ProcessState:
    def __init__(self, n: int, retain_arcs: bool = True):
        if not isinstance(n, (int, np.integer)) or n < 2 or n % 2:
            raise ValueError(f"n must be an even integer >= 2, got {n!r}")
        n = int(n)
        self.n = n
        self.step = 0
        self.retain_arcs = retain_arcs
        self.arcs: list[Arc] = []
        self.mate = [-1] * n
        self.unsat = list(range(n))
        self.upos = list(range(n))
        self.color = bytearray(n)
        self.green_link = [-1] * n
        self.green_in: dict[int, list] = {}
        self.n_green = 0
        self.n_red = 0
        self.circle_count = [0] * n
        self.square_count = [0] * n
        self.edges: set[int] = set()
        self.preset: list[tuple[int, int]] = []
        self.observers: list = []

    # --- queries --------------------------------------------------------

    @property
    def n_unsaturated(self) -> int:
        return len(self.unsat)

    @property
    def matching_size(self) -> int:
        return (self.n - len(self.unsat)) // 2

    def is_saturated(self, v: int) -> bool:
        return self.upos[v] < 0

    def has_edge(self, u: int, v: int) -> bool:
        return (u * self.n + v if u < v else v * self.n + u) in self.edges

    def matching(self) -> list[tuple[int, int]]:
        return [(u, m) for u, m in enumerate(self.mate) if m > u]

    def random_unsaturated(self, rng: Rng) -> int:
        return self.unsat[rng.randbelow(len(self.unsat))]

    def snapshot(self) -> dict:
        return {"step": self.step, "matched": self.matching_size,
                "unsaturated": len(self.unsat), "green": self.n_green, "red": self.n_red}

    # --- graph updates (engine only) --------------------------------------

    def _add_arc(self, u: int, v: int, unusable: bool) -> Arc:
        key = u * self.n + v if u < v else v * self.n + u
        if key in self.edges:
            raise StrategyError(f"arc {u}->{v} would create a multi-edge")
        self.edges.add(key)
        self.step += 1
        self.square_count[u] += 1
        self.circle_count[v] += 1
        arc = Arc(u, v, self.step, unusable)
        if self.retain_arcs:
            self.arcs.append(arc)
        return arc

    # --- matching and colouring ----------------------------------------------

    def _drop_unsat(self, v: int) -> None:
        i = self.upos[v]
        if i < 0:
            raise ProcessError(f"vertex {v} is already saturated")
        last = self.unsat.pop()
        if last != v:
            self.unsat[i] = last
            self.upos[last] = i
        self.upos[v] = -1

    def _add_unsat(self, v: int) -> None:
        self.upos[v] = len(self.unsat)
        self.unsat.append(v)

    def _saturate(self, v: int) -> None:
        self._drop_unsat(v)
        for x in self.green_in.pop(v, ()):
            self._uncolor_pair(x)

    def _uncolor_pair(self, x: int) -> None:
        r = self.mate[x]
        self.color[x] = UNCOLORED
        self.color[r] = UNCOLORED
        self.green_link[x] = -1
        self.n_green -= 1
        self.n_red -= 1

    def match(self, u: int, v: int) -> None:
        """Add ``uv`` to the matching; green edges into ``u`` or ``v`` lose their colour."""
        if u == v or self.upos[u] < 0 or self.upos[v] < 0:
            raise ProcessError(f"cannot match {u} and {v}")
        self.mate[u] = v
        self.mate[v] = u
        self._saturate(u)
        self._saturate(v)

    def augment(self, r: int, v: int) -> tuple[int, int]:
        """Augment along ``y - x - r - v`` where ``r`` is red, ``x`` its mate, ``y`` x's green link."""
        if self.color[r] != RED:
            raise ProcessError(f"vertex {r} is not red")
        x = self.mate[r]
        y = self.green_link[x]
        if y < 0 or self.upos[y] < 0 or self.color[x] != GREEN:
            raise ProcessError(f"red vertex {r} has no usable green link (mate {x}, link {y})")
        if v == y or self.upos[v] < 0:
            raise ProcessError(f"augmenting endpoint {v} must be unsaturated and differ from {y}")
        links = self.green_in[y]
        links.remove(x)
        if not links:
            del self.green_in[y]
        self._uncolor_pair(x)
        self.mate[x] = y
        self.mate[y] = x
        self.mate[r] = v
        self.mate[v] = r
        self._saturate(y)
        self._saturate(v)
        return x, y

    def make_green(self, w: int, y: int) -> None:
        """Colour saturated, uncoloured ``w`` green with link ``y`` and its mate red."""
        if self.upos[w] >= 0 or self.color[w] != UNCOLORED or self.upos[y] < 0:
            raise ProcessError(f"cannot colour {w} green towards {y}")
        m = self.mate[w]
        self.color[w] = GREEN
        self.color[m] = RED
        self.green_link[w] = y
        self.green_in.setdefault(y, []).append(w)
        self.n_green += 1
        self.n_red += 1

    def uncolor_all(self) -> None:
        for x, y in enumerate(self.green_link):
            if y >= 0:
                self.green_link[x] = -1
        self.color = bytearray(self.n)
        self.green_in.clear()
        self.n_green = self.n_red = 0

    def preset_matching(self, pairs) -> None:
        """Install matching pairs as if their edges already existed (no rounds are charged)."""
        for u, v in pairs:
            key = u * self.n + v if u < v else v * self.n + u
            self.edges.add(key)
            self.match(u, v)
            self.preset.append((u, v))

    # --- consistency --------------------------------------------------------

    def check_invariants(self) -> None:
        n = self.n
        matched = 0
        for u in range(n):
            m = self.mate[u]
            if m >= 0:
                if self.mate[m] != u or m == u:
                    raise ProcessError(f"mate table inconsistent at {u}")
                if not self.has_edge(u, m):
                    raise ProcessError(f"matching pair {u},{m} is not an edge")
                matched += 1
                if self.upos[u] >= 0:
                    raise ProcessError(f"matched vertex {u} listed as unsaturated")
            elif self.upos[u] < 0 or self.unsat[self.upos[u]] != u:
                raise ProcessError(f"unsaturated vertex {u} missing from the unsaturated list")
        if len(self.unsat) != n - matched:
            raise ProcessError("unsaturated count mismatch")
        greens = [v for v in range(n) if self.color[v] == GREEN]
        reds = [v for v in range(n) if self.color[v] == RED]
        if len(greens) != len(reds) or len(greens) != self.n_green or self.n_red != len(reds):
            raise ProcessError("green/red counts disagree")
        n_links = 0
        for x in greens:
            if self.mate[x] < 0 or self.color[self.mate[x]] != RED:
                raise ProcessError(f"green vertex {x} without a red mate")
            y = self.green_link[x]
            if y < 0 or self.upos[y] < 0 or x not in self.green_in.get(y, ()):
                raise ProcessError(f"green vertex {x} has a broken link {y}")
            if not self.has_edge(x, y):
                raise ProcessError(f"green edge {x}-{y} is not in the graph")
        for y, xs in self.green_in.items():
            n_links += len(xs)
            if self.upos[y] < 0:
                raise ProcessError(f"green edge ends at saturated {y}")
        if n_links != len(greens):
            raise ProcessError("green edge count differs from green vertex count")
        if sum(self.square_count) != self.step or sum(self.circle_count) != self.step:
            raise ProcessError("square/circle totals differ from the step count")


def new_process(n: int, seed: int = 0, retain_arcs: bool = True) -> tuple[ProcessState, Rng]:
    """Fresh empty graph on ``n`` vertices and the run's generator."""
    return ProcessState(n, retain_arcs), Rng(seed)


def play_round(state: ProcessState, strategy: Strategy, rng: Rng) -> Arc:
    u = rng.randbelow(state.n)
    strategy.unusable = False
    v = strategy.choose_circle(state, u)
    if v == u or not 0 <= v < state.n:
        raise StrategyError(f"{strategy.name} answered square {u} with invalid circle {v}")
    arc = state._add_arc(u, v, strategy.unusable)
    strategy.on_applied(state, arc)
    for obs in state.observers:
        obs.observe(arc)
    return arc


TRAJECTORY_COLUMNS = ("step", "matched", "unsaturated", "green", "red", "X", "Y", "U", "D", "W")


@dataclass
class Trajectory:
    n: int
    rows: list = field(default_factory=list)
    stopped: bool = False
    capped: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, np.nan) for r in self.rows], dtype=float)

    def scaled(self, name: str) -> np.ndarray:
        return self.column(name) / self.n

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRAJECTORY_COLUMNS)
            for r in self.rows:
                w.writerow([r.get(c, "") for c in TRAJECTORY_COLUMNS])

    def write_meta(self, path, **extra) -> dict:
        meta = {"n": self.n, "generator": GENERATOR, "git_describe": git_describe(),
                "stopped": self.stopped, "capped": self.capped}
        meta.update(self.meta)
        meta.update(extra)
        with open(path, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
        return meta


def read_trajectory_csv(path, n: int) -> Trajectory:
    traj = Trajectory(n)
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            traj.rows.append({k: int(v) for k, v in rec.items() if v != ""})
    return traj


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, timeout=5)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _sample(state, strategy, tracker) -> dict:
    row = state.snapshot()
    if tracker is not None:
        row.update(tracker.counts())
    row.update(strategy.sample(state))
    return row


def run_until(state: ProcessState, strategy: Strategy, rng: Rng,
              stop: Callable[[ProcessState], bool], sample_every: int = 1,
              max_rounds: Optional[int] = None, tracker=None) -> Trajectory:
    """Play rounds until ``stop(state)`` holds or ``max_rounds`` more rounds were played.

    The trajectory holds the initial state, every ``sample_every``-th round,
    and the final state. ``capped`` is set when the round budget ran out
    first; ``stopped`` when the predicate was satisfied.
    """
    if sample_every < 1:
        raise ValueError("sample_every must be positive")
    if tracker is not None and tracker not in state.observers:
        state.observers.append(tracker)
    traj = Trajectory(state.n, meta={"strategy": strategy.name, "seed": getattr(rng, "seed", None)})
    traj.rows.append(_sample(state, strategy, tracker))
    limit = None if max_rounds is None else state.step + max_rounds
    last = state.step
    while not stop(state):
        if limit is not None and state.step >= limit:
            traj.capped = True
            break
        play_round(state, strategy, rng)
        if state.step % sample_every == 0:
            traj.rows.append(_sample(state, strategy, tracker))
            last = state.step
    else:
        traj.stopped = True
    if last != state.step:
        traj.rows.append(_sample(state, strategy, tracker))
    return traj
