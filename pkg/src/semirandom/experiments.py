"""Simulation runs compared against their differential-equation references.

References are always integrated here, in-process, from the same solver the
bounds come from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import odelab
from .observables import CoverageTracker, certificate
from .process import Rng, Trajectory, new_process, play_round
from .strategies import PhasedStrategy, UniformCircleStrategy, WarmupStrategy

REFERENCE_H = 1e-4


@lru_cache(maxsize=8)
def warmup_reference(stop_x: float = 0.999, h: float = REFERENCE_H) -> odelab.OdeSolution:
    """Warm-up solution ``(x, r)`` from the empty graph up to ``x = stop_x``."""
    return odelab.integrate(odelab.warmup_system(), 0.0, (0.0, 0.0), h,
                            lambda s, v: v[0] - stop_x, s_max=3.0)


@lru_cache(maxsize=8)
def phased_reference(k: int, h: float = REFERENCE_H) -> odelab.PhaseCascade:
    return odelab.phase_cascade(k, h, keep_solutions=True)


def phased_at(cascade: odelab.PhaseCascade, s: float) -> tuple[int, float, float, float]:
    """``(q, x_q, y_q, z_q)`` at time ``s`` for the phase active then."""
    q = int(np.searchsorted(cascade.c, s)) + 1
    if q > len(cascade.c):
        raise ValueError(f"s={s} lies beyond the last computed phase")
    x, y = (float(v) for v in cascade.solutions[q - 1].at(s))
    return q, x, y, (q - 1) * (1.0 - x - y / q)


@dataclass
class Comparison:
    strategy: str
    n: int
    seed: int
    rounds: int
    max_dx: float
    max_dr: float
    samples: int
    max_dtype: float = float("nan")
    trajectory: Trajectory = field(default=None, repr=False)
    boundaries: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"strategy": self.strategy, "n": self.n, "seed": self.seed,
                "rounds": self.rounds, "max_dx": self.max_dx, "max_dr": self.max_dr,
                "max_dtype": self.max_dtype, "samples": self.samples,
                "phase_boundaries": list(self.boundaries)}


def simulate(n: int, seed: int, strategy: str = "warmup", stop_unsat_frac: float = 0.01,
             phases: int = 0, rounds_frac: float = None, sample_every: int = None,
             compare: bool = False, observe: bool = True) -> Comparison:
    """One run sampled every ``sample_every`` rounds (default ``n/1000``).

    Stops at ``|U| <= stop_unsat_frac * n``, after ``rounds_frac * n`` rounds,
    or (phased) once ``phases`` phases are complete. With ``compare`` the
    saturated and red fractions are checked against the ODE reference of the
    strategy at every sample.
    """
    sample_every = sample_every or max(1, n // 1000)
    state, rng = new_process(n, seed, retain_arcs=False)
    strat = _circle_strategy(strategy, state, rng)
    tracker = None
    if observe:
        tracker = CoverageTracker(n)
        state.observers.append(tracker)
    traj = Trajectory(n, meta={"strategy": strat.name, "seed": seed})
    limit = stop_unsat_frac * n
    end = math.inf if rounds_frac is None else rounds_frac * n
    phased = strategy == "phased"
    if compare and strategy == "uniform":
        raise ValueError("no ODE reference for the uniform strategy's matching")
    if compare and phased:
        # One spare phase so a run finishing phase ``phases`` late stays covered.
        cascade = phased_reference(max(phases, 1) + 1)
    elif compare:
        ref = warmup_reference(max(0.999, 1 - stop_unsat_frac / 2))
    dev = {"x": 0.0, "r": 0.0, "type": 0.0}

    def sample():
        row = state.snapshot()
        if tracker is not None:
            row.update(tracker.counts())
        s = state.step / n
        if phased:
            row["phase"] = strat.phase
        if compare and phased:
            q, x, y, z = phased_at(cascade, min(s, cascade.c[-1]))
            row["R_q"] = strat.red_of_type(q)
            dev["r"] = max(dev["r"], abs(row["red"] / n - (y + z)))
            dev["type"] = max(dev["type"], abs(row["R_q"] / n - y))
        elif compare:
            x, r = (float(v) for v in ref.at(s))
            dev["r"] = max(dev["r"], abs(row["red"] / n - r))
        if compare:
            dev["x"] = max(dev["x"], abs((n - row["unsaturated"]) / n - x))
        traj.rows.append(row)

    sample()
    last = state.step
    while len(state.unsat) > limit and state.step < end:
        if phased and phases and len(strat.boundaries) >= phases:
            break
        play_round(state, strat, rng)
        if state.step % sample_every == 0:
            sample()
            last = state.step
    if last != state.step:
        sample()
    traj.stopped = True
    nan = math.nan
    return Comparison(strat.name, n, seed, state.step,
                      dev["x"] if compare else nan, dev["r"] if compare else nan,
                      len(traj.rows), dev["type"] if compare and phased else nan, traj,
                      list(strat.boundaries) if phased else [])


def compare_warmup(n: int, seed: int, stop_unsat_frac: float = 0.01,
                   sample_every: int = None) -> Comparison:
    """Saturated fraction and red fraction against ``(x, r)`` up to the stop."""
    return simulate(n, seed, "warmup", stop_unsat_frac, sample_every=sample_every,
                    compare=True, observe=False)


def compare_phased(n: int, seed: int, phases: int = 5, stop_unsat_frac: float = 0.01,
                   sample_every: int = None) -> Comparison:
    """Saturated and red fractions against phase ``q`` of the cascade.

    All red vertices are of type ``q`` or ``q-1``, so the red fraction is
    compared with ``y_q + z_q``, which is continuous across phase changes.
    The type-``q`` count alone (``max_dtype``) jumps at each boundary and is
    only reported. ``q`` is the phase the ODE is in at time ``t / n``; the run
    stops when the simulation or the ODE finishes phase ``phases``, or at the
    unsaturation stop.
    """
    return simulate(n, seed, "phased", stop_unsat_frac, phases, sample_every=sample_every,
                    compare=True, observe=False)


@dataclass
class LowerboundSweep:
    n: int
    seed: int
    mu: float
    rows: list
    flip_round: int
    warning: str = ""

    @property
    def flip(self) -> float:
        return self.flip_round / self.n if self.flip_round >= 0 else math.nan

    def summary(self) -> dict:
        return {"n": self.n, "seed": self.seed, "mu": self.mu, "flip_round": self.flip_round,
                "flip": self.flip, "alpha": odelab.find_alpha(1e-10), "warning": self.warning}


SWEEP_COLUMNS = ("t", "X", "U", "W", "lhs", "rhs", "matching_possible")


def lowerbound_sweep(n: int, seed: int, grid: float = 0.01, t_max: float = 1.0,
                     mu: float = None, strategy: str = "uniform") -> LowerboundSweep:
    """Certificate values on the grid ``t/n = 0, grid, 2 grid, ...`` plus the
    first round at which it holds (checked every round)."""
    mu = math.sqrt(n) if mu is None else mu
    state, rng = new_process(n, seed, retain_arcs=False)
    tr = CoverageTracker(n)
    state.observers.append(tr)
    strat = _circle_strategy(strategy, state, Rng(seed + 0x9E3779B9))
    rows = []
    flip = -1
    half = n / 2
    k = 0
    last = int(round(t_max * n))
    while True:
        t = state.step
        if t == int(round(k * grid * n)):
            c = certificate(tr, t, mu)
            rows.append(c.scaled() | {"matching_possible": c.matching_possible})
            k += 1
        if flip < 0 and tr.X - tr.U + tr.W >= half - 3 * t / mu:
            flip = t
        if t >= last:
            break
        play_round(state, strat, rng)
    warning = ""
    if n < 100_000:
        warning = (f"n={n}: fluctuations of order {1 / math.sqrt(n):.3f} in t/n; "
                   "the flip point is only loosely located")
    return LowerboundSweep(n, seed, mu, rows, flip, warning)


def _circle_strategy(name, state, rng):
    if name == "uniform":
        return UniformCircleStrategy(rng)
    if name == "warmup":
        return WarmupStrategy(rng)
    if name == "phased":
        return PhasedStrategy(state, rng)
    raise ValueError(f"unknown strategy {name!r}")
