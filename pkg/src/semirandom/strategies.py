"""Player strategies for building a perfect matching.

* ``WarmupStrategy`` - greedy matching plus length-3 augmenting paths, circles
  placed uniformly on unsaturated vertices.
* ``PhasedStrategy`` - the same case analysis, but every circle aimed at the
  unsaturated set goes to a vertex with the fewest circles.
* ``cleanup_run`` - the two-step finishing procedure for the last few
  unsaturated vertices.
* ``UniformCircleStrategy`` - a structure-blind reference player.
* ``upper_bound_pipeline`` - phased, then warm-up, then clean-up.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from .process import (GREEN, RED, Arc, ProcessError, ProcessState, Rng, Strategy,
                      StrategyError, new_process, play_round, run_until)

_TRIES = 64


def _fits(state: ProcessState, u: int, v: int, exclude: int) -> bool:
    return v != u and v != exclude and not state.has_edge(u, v)


def pick_unsaturated(state: ProcessState, rng: Rng, u: int, exclude: int = -1):
    """Uniform unsaturated vertex other than ``u``/``exclude`` and not adjacent to ``u``.

    Returns ``None`` when no such vertex exists.
    """
    pool = state.unsat
    if not pool:
        return None
    for _ in range(_TRIES):
        v = pool[rng.randbelow(len(pool))]
        if _fits(state, u, v, exclude):
            return v
    ok = [v for v in pool if _fits(state, u, v, exclude)]
    return ok[rng.randbelow(len(ok))] if ok else None


def pick_spare(state: ProcessState, rng: Rng, u: int, saturated_only: bool = False) -> int:
    """Uniform vertex not adjacent to ``u`` (optionally saturated) for a throw-away circle."""
    n = state.n
    upos = state.upos
    for _ in range(_TRIES):
        v = rng.randbelow(n)
        if v != u and not (saturated_only and upos[v] >= 0) and not state.has_edge(u, v):
            return v
    ok = [v for v in range(n) if v != u and not (saturated_only and upos[v] >= 0)
          and not state.has_edge(u, v)]
    if not ok and saturated_only:
        return pick_spare(state, rng, u, False)
    if not ok:
        raise StrategyError(f"vertex {u} is adjacent to every other vertex")
    return ok[rng.randbelow(len(ok))]


class _Planned(Strategy):
    """Strategy that decides a logical target, then places the circle.

    Normally the circle lands on the target. If every admissible target is
    already adjacent to the square, the existing edge is reused and the
    circle is discarded on a spare vertex.
    """

    def __init__(self, rng: Rng, spare_saturated_only: bool = False):
        self.rng = rng
        self.spare_saturated_only = spare_saturated_only
        self.case = None
        self.target = -1

    def _aim(self, state, u, exclude=-1):
        v = pick_unsaturated(state, self.rng, u, exclude)
        if v is not None:
            return v, v
        cands = [w for w in state.unsat if w != u and w != exclude]
        if not cands:
            raise StrategyError(f"no unsaturated vertex available for square {u}")
        self.unusable = True
        return cands[self.rng.randbelow(len(cands))], self._spare(state, u)

    def _spare(self, state, u):
        self.unusable = True
        return pick_spare(state, self.rng, u, self.spare_saturated_only)


class WarmupStrategy(_Planned):
    """Randomised greedy strategy with length-3 augmentations.

    ``a4_saturated_only`` restricts the throw-away circle of a square that
    lands on a green vertex to saturated vertices (used inside the
    pipeline); otherwise it is uniform over all admissible vertices.
    """

    name = "warmup"

    def __init__(self, rng: Rng, a4_saturated_only: bool = False):
        super().__init__(rng, a4_saturated_only)

    def choose_circle(self, state, u):
        if state.upos[u] >= 0:
            self.case = 1
            self.target, circle = self._aim(state, u)
            return circle
        c = state.color[u]
        if c == RED:
            self.case = 2
            y = state.green_link[state.mate[u]]
            if y < 0:
                raise ProcessError(f"red vertex {u} has a mate without a green link")
            self.target, circle = self._aim(state, u, y)
            return circle
        if c == GREEN or not state.unsat:
            self.case = 4
            return self._spare(state, u)
        self.case = 3
        self.target, circle = self._aim(state, u)
        return circle

    def on_applied(self, state, arc):
        case = self.case
        if case == 1:
            state.match(arc.square, self.target)
        elif case == 2:
            state.augment(arc.square, self.target)
        elif case == 3:
            state.make_green(arc.square, self.target)


class CircleBuckets:
    """Bucket queue of unsaturated vertices keyed by circle count.

    Each bucket is a heap of vertex ids so the minimum ties break towards the
    lowest index. Entries are removed lazily: a heap entry is live while the
    vertex is unsaturated and its circle count still equals the bucket key.
    """

    def __init__(self, state: ProcessState):
        self.state = state
        self.heaps: dict[int, list] = {}
        self.size: dict[int, int] = {}
        for v in state.unsat:
            c = state.circle_count[v]
            self.heaps.setdefault(c, []).append(v)
            self.size[c] = self.size.get(c, 0) + 1
        for h in self.heaps.values():
            heapq.heapify(h)
        self.low = min(self.size) if self.size else 0

    def _live(self, v, key):
        st = self.state
        return st.upos[v] >= 0 and st.circle_count[v] == key

    def _clean_top(self, key):
        heap = self.heaps.get(key)
        while heap and not self._live(heap[0], key):
            heapq.heappop(heap)
        return heap

    def settle(self) -> int:
        """Advance ``low`` to the smallest non-empty key and return it (-1 if empty)."""
        if not self.state.unsat:
            return -1
        size = self.size
        while size.get(self.low, 0) == 0:
            self.low += 1
        return self.low

    def minimum(self, exclude: int = -1) -> int:
        key = self.settle()
        if key < 0:
            raise StrategyError("no unsaturated vertices left")
        top_key = max(self.size) if self.size else key
        while key <= top_key:
            if self.size.get(key, 0):
                heap = self._clean_top(key)
                if heap[0] != exclude:
                    return heap[0]
                if self.size[key] > 1:
                    held = heapq.heappop(heap)
                    heap = self._clean_top(key)
                    best = heap[0]
                    heapq.heappush(heap, held)
                    return best
            key += 1
        raise StrategyError(f"no unsaturated vertex other than {exclude}")

    def removed(self, v: int, key: int) -> None:
        self.size[key] -= 1

    def bumped(self, v: int, old: int) -> None:
        self.size[old] -= 1
        new = old + 1
        self.size[new] = self.size.get(new, 0) + 1
        heapq.heappush(self.heaps.setdefault(new, []), v)

    def count(self, key: int) -> int:
        return self.size.get(key, 0)


class PhasedStrategy(_Planned):
    """Deterministic min-circle strategy.

    Phase ``q`` is the stretch during which every unsaturated vertex carries
    ``q-1`` or ``q`` circles; ``boundaries[q-1]`` is the round at which the
    last unsaturated vertex with ``q-1`` circles disappeared.
    """

    name = "phased"

    def __init__(self, state: ProcessState, rng: Rng):
        super().__init__(rng, spare_saturated_only=True)
        self.buckets = CircleBuckets(state)
        self.boundaries: list[int] = []
        low = self.buckets.settle()
        self._seen_low = max(low, 0)

    @property
    def phase(self) -> int:
        return self._seen_low + 1

    def _min(self, state, u, exclude=-1):
        v = self.buckets.minimum(exclude)
        if v == u:
            v = self.buckets.minimum(u)
        if state.has_edge(u, v):
            raise StrategyError(f"min-circle target {v} is already adjacent to square {u}")
        return v

    def choose_circle(self, state, u):
        if state.upos[u] >= 0:
            self.case = 1
            self.target = self._min(state, u)
            return self.target
        c = state.color[u]
        if c == RED:
            self.case = 2
            y = state.green_link[state.mate[u]]
            self.target = self._min(state, u, y)
            return self.target
        if c == GREEN or not state.unsat:
            self.case = 4
            return self._spare(state, u)
        self.case = 3
        self.target = self._min(state, u)
        return self.target

    def on_applied(self, state, arc):
        b = self.buckets
        cc = state.circle_count
        case = self.case
        t = self.target
        if case == 1:
            u = arc.square
            b.removed(u, cc[u])
            b.removed(t, cc[t] - 1)
            state.match(u, t)
        elif case == 2:
            y = state.green_link[state.mate[arc.square]]
            b.removed(y, cc[y])
            b.removed(t, cc[t] - 1)
            state.augment(arc.square, t)
        elif case == 3:
            b.bumped(t, cc[t] - 1)
            state.make_green(arc.square, t)
        else:
            return
        low = b.settle()
        while low > self._seen_low:
            self._seen_low += 1
            self.boundaries.append(state.step)

    def red_of_type(self, q: int) -> int:
        """Red vertices whose mate's green edge ends at a vertex with ``q`` circles."""
        return q * self.buckets.count(q)

    def sample(self, state):
        q = self.phase
        return {"phase": q, "R_q": self.red_of_type(q), "R_prev": self.red_of_type(q - 1)}


class UniformCircleStrategy(Strategy):
    """Circle uniform over the vertices that keep the graph simple."""

    name = "uniform"

    def __init__(self, rng: Rng):
        self.rng = rng

    def choose_circle(self, state, u):
        n = state.n
        rng = self.rng
        for _ in range(_TRIES):
            v = rng.randbelow(n - 1)
            if v >= u:
                v += 1
            if not state.has_edge(u, v):
                return v
        return pick_spare(state, rng, u)


# --- clean-up --------------------------------------------------------------------

@dataclass
class CleanupConfig:
    eps: float = 1e-14
    round_cap: Optional[int] = None

    def cap(self, n: int) -> int:
        if self.round_cap is not None:
            return self.round_cap
        return 10 * math.ceil(100 * math.sqrt(self.eps) * n)

    @staticmethod
    def schedule(j0: int) -> list[int]:
        """``j_k = floor((3/4)^k j0)`` for k = 0, 1, ... down to the first zero."""
        out = [j0]
        k = 1
        while out[-1] > 0:
            out.append(math.floor(0.75 ** k * j0))
            k += 1
        return out

    @staticmethod
    def sprinkle(j_prev: int, n: int) -> int:
        return math.floor(math.sqrt(3 * j_prev * n) / 4)


class _CleanupPlayer(_Planned):
    """Clean-up rounds. A saturated ``x`` with an edge to an unsaturated vertex
    made during sprinkling makes its mate red."""

    name = "cleanup"

    def __init__(self, rng):
        super().__init__(rng, spare_saturated_only=True)
        self.sprinkling = True
        self.links: dict[int, list] = {}
        self.back: dict[int, list] = {}

    def reset(self):
        self.links.clear()
        self.back.clear()

    @property
    def n_red(self) -> int:
        return len(self.links)

    def is_red(self, state, v) -> bool:
        return state.upos[v] < 0 and state.mate[v] in self.links

    def choose_circle(self, state, u):
        if self.sprinkling:
            if state.upos[u] >= 0 or not state.unsat:
                self.case = 0
                return self._spare(state, u)
            self.case = 3
            self.target, circle = self._aim(state, u)
            return circle
        if state.upos[u] >= 0:
            self.case = 1
            self.target, circle = self._aim(state, u)
            return circle
        x = state.mate[u]
        if x in self.links:
            self.case = 2
            y = self.links[x][-1]
            self.target, circle = self._aim(state, u, y)
            return circle
        self.case = 0
        return self._spare(state, u)

    def _saturated(self, v):
        for x in self.back.pop(v, ()):
            lst = self.links[x]
            lst.remove(v)
            if not lst:
                del self.links[x]

    def on_applied(self, state, arc):
        case = self.case
        t = self.target
        if case == 3:
            x = arc.square
            self.links.setdefault(x, []).append(t)
            self.back.setdefault(t, []).append(x)
        elif case == 1:
            state.match(arc.square, t)
            self._saturated(arc.square)
            self._saturated(t)
        elif case == 2:
            r = arc.square
            x = state.mate[r]
            y = self.links[x][-1]
            augment_path(state, y, x, r, t)
            self._saturated(y)
            self._saturated(t)


def augment_path(state: ProcessState, y: int, x: int, r: int, v: int) -> None:
    """Flip ``y - x = r - v`` (``x r`` matched, ``y`` and ``v`` unsaturated)."""
    if state.mate[x] != r or y == v or state.upos[y] < 0 or state.upos[v] < 0:
        raise ProcessError(f"{y}-{x}-{r}-{v} is not an augmenting path")
    if not state.has_edge(x, y) or not state.has_edge(r, v):
        raise ProcessError(f"{y}-{x}-{r}-{v} uses a missing edge")
    state.mate[x] = y
    state.mate[y] = x
    state.mate[r] = v
    state.mate[v] = r
    state._saturate(y)
    state._saturate(v)


@dataclass
class CleanupStage:
    k: int
    j_prev: int
    j_k: int
    sprinkled: int
    rounds: int
    red_after_sprinkle: int


@dataclass
class CleanupReport:
    rounds: int = 0
    j0: int = 0
    completed: bool = True
    remaining: int = 0
    stages: list = field(default_factory=list)

    def __int__(self):
        return self.rounds


class CleanupFailure(StrategyError):
    def __init__(self, report: CleanupReport):
        super().__init__(f"clean-up exhausted its round cap with {report.remaining} "
                         f"unsaturated vertices left")
        self.report = report


def cleanup_run(state: ProcessState, rng: Rng, cfg: CleanupConfig = CleanupConfig(),
                raise_on_cap: bool = False) -> CleanupReport:
    """Saturate every remaining vertex; returns the per-stage accounting.

    Stage ``k`` uncolours everything, sprinkles ``floor(sqrt(3 j_{k-1} n)/4)``
    rounds to create red vertices, then augments until at most ``j_k``
    unsaturated vertices remain.
    """
    n = state.n
    j0 = len(state.unsat)
    if j0 > cfg.eps * n:
        raise ValueError(f"clean-up needs at most {cfg.eps * n:g} unsaturated vertices, found {j0}")
    report = CleanupReport(j0=j0)
    if j0 == 0:
        return report
    cap = cfg.cap(n)
    player = _CleanupPlayer(rng)
    start = state.step
    sched = CleanupConfig.schedule(j0)
    for k in range(1, len(sched)):
        j_prev, j_k = sched[k - 1], sched[k]
        if len(state.unsat) <= j_k:
            continue
        state.uncolor_all()
        player.reset()
        begin = state.step
        player.sprinkling = True
        todo = CleanupConfig.sprinkle(j_prev, n)
        for _ in range(todo):
            if state.step - start >= cap:
                break
            play_round(state, player, rng)
        reds = player.n_red
        player.sprinkling = False
        while len(state.unsat) > j_k and state.step - start < cap:
            play_round(state, player, rng)
        report.stages.append(CleanupStage(k, j_prev, j_k, todo, state.step - begin, reds))
        if state.step - start >= cap and len(state.unsat) > j_k:
            break
    report.rounds = state.step - start
    report.remaining = len(state.unsat)
    report.completed = report.remaining == 0
    if not report.completed and raise_on_cap:
        raise CleanupFailure(report)
    return report


# --- pipeline ----------------------------------------------------------------------

@dataclass
class PipelineReport:
    n: int
    seed: int
    stage_rounds: list
    total_rounds: int
    perfect: bool
    phase_boundaries: list
    failed_stage: Optional[str] = None
    cleanup: Optional[dict] = None

    def to_dict(self) -> dict:
        return {"stage_rounds": list(self.stage_rounds), "total_rounds": self.total_rounds,
                "n": self.n, "seed": self.seed, "perfect": self.perfect,
                "phase_boundaries": list(self.phase_boundaries),
                "failed_stage": self.failed_stage}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def upper_bound_pipeline(n: int, seed: int, k: int = 1100, continuation_eps: float = 1e-6,
                         cleanup_eps: float = 1e-14, stage_cap: float = 5.0,
                         verify: bool = True, return_state: bool = False):
    """Phased strategy for ``k`` phases, greedy continuation, then clean-up.

    Each stage may use at most ``stage_cap * n`` rounds. With ``verify`` the
    final matching is checked against the arc list.
    """
    from .matching import Digraph, is_perfect_matching

    state, rng = new_process(n, seed, retain_arcs=verify)
    cap = int(stage_cap * n)
    rounds = [0, 0, 0]
    bounds: list[int] = []
    failed = None

    if k > 0:
        phased = PhasedStrategy(state, rng)
        limit = continuation_eps * n
        traj = run_until(state, phased, rng,
                         lambda s: len(phased.boundaries) >= k or len(s.unsat) <= limit,
                         sample_every=cap + 1, max_rounds=cap)
        rounds[0] = state.step
        bounds = list(phased.boundaries[:k])
        if traj.capped:
            failed = "phased"

    if failed is None:
        state.uncolor_all()
        warm = WarmupStrategy(rng, a4_saturated_only=True)
        limit = cleanup_eps * n
        begin = state.step
        traj = run_until(state, warm, rng, lambda s: len(s.unsat) <= limit,
                         sample_every=cap + 1, max_rounds=cap)
        rounds[1] = state.step - begin
        if traj.capped:
            failed = "continuation"

    cleanup = None
    if failed is None:
        rep = cleanup_run(state, rng, CleanupConfig(eps=max(cleanup_eps, len(state.unsat) / n)))
        rounds[2] = rep.rounds
        cleanup = asdict(rep)
        if not rep.completed:
            failed = "cleanup"

    perfect = len(state.unsat) == 0
    if verify:
        perfect = is_perfect_matching(Digraph.from_state(state), state.matching())
    report = PipelineReport(n, seed, rounds, state.step, perfect, bounds, failed, cleanup)
    return (report, state) if return_state else report
