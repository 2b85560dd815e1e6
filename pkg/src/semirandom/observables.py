"""Square-coverage counters behind the lower bound.

For every vertex ``j`` with exactly one square, let ``s`` be that square's
round and ``v_s`` the circle placed in round ``s``.

* X - vertices with at least one square; Y - with exactly one.
* U - redundant: ``S_j = 1`` and ``v_s`` received a square after round ``s``.
* W - redundant vertices whose ``v_s`` is itself redundant.
* D - dangerous: ``S_j = 1`` and ``v_s`` (call it ``j2``) received exactly one
  square after round ``s``, at round ``t2`` with circle ``j3`` outside
  ``{j, j2}``, and ``j3`` has had no square since ``t2``.

Every update touches only the square's vertex and the vertices pointing at
it, so a round costs amortised O(1).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

COUNT_NAMES = ("X", "Y", "U", "D", "W")


class ObservableError(RuntimeError):
    pass


class CoverageTracker:
    def __init__(self, n: int):
        self.n = n
        self.round = 0
        self.sq = [0] * n
        self.first = [0] * n
        self.tgt = [-1] * n
        self.after = [0] * n          # squares on tgt after the first square, capped at 2
        self.j3 = [-1] * n
        self.danger = bytearray(n)
        self.redundant = bytearray(n)
        self.nred_to = [0] * n        # redundant vertices whose target is this vertex
        self.pointers: dict[int, list] = {}
        self.chains: dict[int, list] = {}
        self.X = self.Y = self.U = self.D = self.W = 0

    # --- redundancy and W ---------------------------------------------------

    def _make_redundant(self, j):
        self.redundant[j] = 1
        self.U += 1
        a = self.tgt[j]
        self.nred_to[a] += 1
        self.W += self.redundant[a] + self.nred_to[j]

    def _drop_redundant(self, j):
        self.redundant[j] = 0
        self.U -= 1
        a = self.tgt[j]
        self.nred_to[a] -= 1
        self.W -= self.redundant[a] + self.nred_to[j]

    def _drop_danger(self, j):
        self.danger[j] = 0
        self.D -= 1

    # --- updates ----------------------------------------------------------------

    def observe(self, arc) -> None:
        u, v, r = arc[0], arc[1], arc[2]
        if r != self.round + 1:
            raise ObservableError(f"expected round {self.round + 1}, got {r}")
        if u == v:
            raise ObservableError(f"self-loop at {u}")
        self.round = r

        # Chains waiting for a square on their third vertex die.
        for j in self.chains.pop(u, ()):
            if self.danger[j] and self.j3[j] == u:
                self._drop_danger(j)

        # Vertices whose target is u gain a later square.
        live = self.pointers.get(u)
        if live:
            keep = []
            for j in live:
                if self.sq[j] != 1 or self.tgt[j] != u:
                    continue
                self.after[j] += 1
                if self.after[j] == 1:
                    self._make_redundant(j)
                    if v != j:
                        self.j3[j] = v
                        self.danger[j] = 1
                        self.D += 1
                        self.chains.setdefault(v, []).append(j)
                    keep.append(j)
                else:
                    self.after[j] = 2
                    if self.danger[j]:
                        self._drop_danger(j)
            if keep:
                self.pointers[u] = keep
            else:
                del self.pointers[u]

        s = self.sq[u] = self.sq[u] + 1
        if s == 1:
            self.X += 1
            self.Y += 1
            self.first[u] = r
            self.tgt[u] = v
            self.pointers.setdefault(v, []).append(u)
        elif s == 2:
            self.Y -= 1
            if self.redundant[u]:
                self._drop_redundant(u)
            if self.danger[u]:
                self._drop_danger(u)

    def counts(self) -> dict:
        return {"X": self.X, "Y": self.Y, "U": self.U, "D": self.D, "W": self.W}

    def delta_u_if_square(self, u: int) -> int:
        """Change of U if the next square landed on ``u`` (state untouched)."""
        gain = 0
        for j in self.pointers.get(u, ()):
            if self.sq[j] == 1 and self.tgt[j] == u and self.after[j] == 0:
                gain += 1
        return gain - self.redundant[u]


def recount(n: int, arcs) -> dict:
    """Counts recomputed from scratch from an arc list (test oracle)."""
    squares: list[list[int]] = [[] for _ in range(n)]
    circle_at = {}
    for a in arcs:
        squares[a[0]].append(a[2])
        circle_at[a[2]] = a[1]
    X = sum(1 for s in squares if s)
    single = [j for j in range(n) if len(squares[j]) == 1]
    red = set()
    D = 0
    for j in single:
        s = squares[j][0]
        j2 = circle_at[s]
        later = [t for t in squares[j2] if t > s]
        if later:
            red.add(j)
        if len(later) == 1:
            t2 = later[0]
            j3 = circle_at[t2]
            if j3 not in (j, j2) and not any(t > t2 for t in squares[j3]):
                D += 1
    W = sum(1 for j in red if circle_at[squares[j][0]] in red)
    return {"X": X, "Y": len(single), "U": len(red), "D": D, "W": W}


@dataclass
class CertificateReport:
    t: int
    n: int
    X: int
    U: int
    W: int
    lhs: float
    rhs: float
    mu: float
    omega: float
    matching_possible: bool

    def scaled(self) -> dict:
        n = self.n
        return {"t": self.t / n, "X": self.X / n, "U": self.U / n, "W": self.W / n,
                "lhs": self.lhs / n, "rhs": self.rhs / n}

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def certificate(tracker: CoverageTracker, t: int = None, mu: float = None,
                omega: float = None) -> CertificateReport:
    """``X - U + W`` against ``n/2 - 3t/mu``.

    When the left side is smaller, no approximate perfect matching with
    in-degrees at most ``omega`` and deficiency ``1/mu`` can exist.
    """
    n = tracker.n
    t = tracker.round if t is None else t
    mu = math.sqrt(n) if mu is None else mu
    if mu <= 0:
        raise ValueError("mu must be positive")
    omega = 2 * mu if omega is None else omega
    lhs = tracker.X - tracker.U + tracker.W
    rhs = n / 2 - 3 * t / mu
    return CertificateReport(t, n, tracker.X, tracker.U, tracker.W, lhs, rhs, mu, omega, lhs >= rhs)


def well_behaved_check(state, omega: float = None) -> bool:
    """No vertex carries more than ``omega`` circles (default ``2 sqrt(n)``)."""
    omega = 2 * math.sqrt(state.n) if omega is None else omega
    return max(state.circle_count, default=0) <= omega


def attach(state) -> CoverageTracker:
    """Tracker fed by every later round of ``state`` (which must be fresh)."""
    if state.step:
        raise ObservableError("attach a tracker before the first round")
    tr = CoverageTracker(state.n)
    state.observers.append(tr)
    return tr
