"""Differential-equation side of the semi-random matching process.

Fixed-step classical RK4 with event localisation by bisection, the three
families of systems that govern the strategies (greedy warm-up, the phased
min-circle cascade, and the lower-bound coverage counts), and the assembly
of the two constants alpha and beta.
"""

from __future__ import annotations

import json
import math
import time
from array import array
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

Vector = tuple
Rhs = Callable[[float, Vector], Vector]
EventFn = Callable[[float, Vector], float]

DEFAULT_H = 1e-6
EVENT_TOL = 1e-12
# Largest h * |lambda| allowed inside a single RK4 substep.
STIFF_STEP = 0.1

PUBLISHED_ALPHA = 0.93261
PUBLISHED_BETA = 1.20524
PUBLISHED_CK = 1.20365
PUBLISHED_CONTINUATION = 0.00158
PUBLISHED_WARMUP = 1.2769497
CLEANUP_SHARE = 1e-5
WARMUP_EPS = 1e-14
CONTINUATION_START = 1.0 - 1e-6


class OdeError(RuntimeError):
    """Raised when an integration cannot proceed."""


class GuardViolation(OdeError):
    pass


@dataclass
class OdeSystem:
    """A first-order autonomous-or-not system ``y' = rhs(s, y)``.

    ``guard`` returns False once the state leaves the region where ``rhs`` is
    trusted. ``stiffness`` (optional) returns an estimate of the spectral
    radius of the Jacobian; the integrator subdivides a grid step when
    ``h * stiffness`` would exceed ``STIFF_STEP``.
    """

    name: str
    dim: int
    rhs: Rhs
    labels: tuple = ()
    guard: Optional[Callable[[float, Vector], bool]] = None
    stiffness: Optional[Callable[[float, Vector], float]] = None


@dataclass
class OdeSolution:
    system: str
    h: float
    s: np.ndarray
    y: np.ndarray
    event_s: Optional[float] = None
    event_y: Optional[tuple] = None
    status: str = "s_max"
    substeps: int = 0

    @property
    def triggered(self) -> bool:
        return self.event_s is not None

    @property
    def final(self) -> tuple:
        if self.event_y is not None:
            return self.event_s, self.event_y
        return float(self.s[-1]), tuple(self.y[-1])

    def at(self, s):
        """Linear interpolation of the stored grid (vectorised over ``s``)."""
        s = np.asarray(s, dtype=float)
        cols = [np.interp(s, self.s, self.y[:, i]) for i in range(self.y.shape[1])]
        return np.stack(cols, axis=-1)


def _rk4(f: Rhs, s: float, y: Vector, h: float) -> Vector:
    k1 = f(s, y)
    hh = 0.5 * h
    k2 = f(s + hh, tuple(a + hh * b for a, b in zip(y, k1)))
    k3 = f(s + hh, tuple(a + hh * b for a, b in zip(y, k2)))
    k4 = f(s + h, tuple(a + h * b for a, b in zip(y, k3)))
    h6 = h / 6.0
    return tuple(a + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
                 for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))


def _advance(system: OdeSystem, s: float, y: Vector, h: float) -> tuple[Vector, int]:
    """Move from ``s`` to ``s + h``; one RK4 step unless the system is stiff there."""
    stiff = system.stiffness
    if stiff is None or h * stiff(s, y) <= STIFF_STEP:
        return _rk4(system.rhs, s, y, h), 1
    end = s + h
    count = 0
    while True:
        rem = end - s
        if rem <= 0.0:
            return y, count
        sub = min(rem, STIFF_STEP / stiff(s, y))
        if rem - sub < 1e-3 * sub:
            sub = rem
        y = _rk4(system.rhs, s, y, sub)
        s += sub
        count += 1
        if count > 10_000_000:
            raise OdeError(f"{system.name}: stiffness substepping did not terminate near s={s}")


def _inside(system: OdeSystem, s: float, y: Vector) -> bool:
    if not all(math.isfinite(v) for v in y):
        return False
    return system.guard is None or system.guard(s, y)


def integrate(system: OdeSystem, s0: float, y0: Sequence[float], h: float = DEFAULT_H,
              event: Optional[EventFn] = None, s_max: float = 3.0,
              event_tol: float = EVENT_TOL, store: bool = True) -> OdeSolution:
    """Integrate ``system`` on the grid ``s0 + i*h`` until ``event`` fires or ``s_max``.

    ``event(s, y)`` fires when it changes from negative to non-negative. The
    crossing is bracketed by one grid step and then bisected by re-integrating
    from the last grid point, until the bracket is narrower than ``event_tol``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    y = tuple(float(v) for v in y0)
    if len(y) != system.dim:
        raise ValueError(f"{system.name}: expected {system.dim} initial values, got {len(y)}")
    if not _inside(system, s0, y):
        raise GuardViolation(f"{system.name}: initial state {y} at s={s0} is outside the guard region")

    grid_s = array("d", [s0])
    grid_y = array("d", y)
    substeps = 0
    if event is not None and event(s0, y) >= 0.0:
        return OdeSolution(system.name, h, np.array(grid_s), np.array(grid_y).reshape(-1, system.dim),
                           event_s=s0, event_y=y, status="event")

    i = 0
    s = s0
    n_steps = int(math.ceil((s_max - s0) / h - 1e-9))
    while i < n_steps:
        s_next = s0 + (i + 1) * h
        y_next, used = _advance(system, s, y, s_next - s)
        substeps += used
        if event is not None and _inside(system, s_next, y_next) and event(s_next, y_next) >= 0.0:
            ev_s, ev_y = _bisect_event(system, event, s, y, s_next - s, event_tol)
            if store:
                grid_s.append(s_next)
                grid_y.extend(y_next)
            return OdeSolution(system.name, h, np.array(grid_s),
                               np.array(grid_y).reshape(-1, system.dim),
                               event_s=ev_s, event_y=ev_y, status="event", substeps=substeps)
        if not _inside(system, s_next, y_next):
            if event is not None:
                # The guard can be crossed inside the step after the event already fired.
                probe = _first_inside_event(system, event, s, y, s_next - s, event_tol)
                if probe is not None:
                    return OdeSolution(system.name, h, np.array(grid_s),
                                       np.array(grid_y).reshape(-1, system.dim),
                                       event_s=probe[0], event_y=probe[1], status="event",
                                       substeps=substeps)
            raise GuardViolation(
                f"{system.name}: left guard region between s={s:.12g} and s={s_next:.12g} "
                f"(state {y} -> {y_next})")
        i += 1
        s, y = s_next, y_next
        if store:
            grid_s.append(s)
            grid_y.extend(y)
    if not store:
        grid_s.append(s)
        grid_y.extend(y)
    return OdeSolution(system.name, h, np.array(grid_s), np.array(grid_y).reshape(-1, system.dim),
                       status="s_max", substeps=substeps)


def _bisect_event(system, event, s, y, width, tol):
    lo, hi = 0.0, width
    y_hi, _ = _advance(system, s, y, hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        y_mid, _ = _advance(system, s, y, mid)
        if _inside(system, s + mid, y_mid) and event(s + mid, y_mid) >= 0.0:
            hi, y_hi = mid, y_mid
        else:
            lo = mid
    return s + hi, y_hi


def _first_inside_event(system, event, s, y, width, tol):
    lo, hi = 0.0, width
    found = None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        y_mid, _ = _advance(system, s, y, mid)
        if not _inside(system, s + mid, y_mid):
            hi = mid
        elif event(s + mid, y_mid) >= 0.0:
            hi = mid
            found = (s + mid, y_mid)
        else:
            lo = mid
    return found


# --- systems -----------------------------------------------------------------

def warmup_system(guard_eps: float = 1e-15) -> OdeSystem:
    """Saturated fraction ``x`` and red fraction ``r`` under the randomised greedy strategy."""

    def rhs(s, v):
        x, r = v
        w = 1.0 - x
        return (2.0 * (w + r), -2.0 * r / w * (w + r) - r + x - 2.0 * r)

    def guard(s, v):
        return v[0] < 1.0 - guard_eps and abs(v[1]) < 2.0

    def stiffness(s, v):
        w = 1.0 - v[0]
        return 2.0 * (w + 2.0 * abs(v[1])) / w + 3.0

    return OdeSystem("warmup", 2, rhs, ("x", "r"), guard, stiffness)


def phase_system(q: int) -> OdeSystem:
    """Phase ``q`` of the min-circle strategy in ``(x_q, y_q)``.

    ``z_q = (q-1)(1 - x - y/q)`` is the fraction of type ``q-1`` red
    vertices; for ``q = 1`` it vanishes and the system reduces to
    ``x' = 2(1 - x + y)``, ``y' = x - 4y``.
    """
    if q < 1:
        raise ValueError("phase index starts at 1")
    qf = float(q)
    qm1 = qf - 1.0

    def rhs(s, v):
        x, y = v
        z = qm1 * (1.0 - x - y / qf)
        return (2.0 * (1.0 - x + y + z), qf * (x - 3.0 * y - 2.0 * z) - y)

    def stiffness(s, v):
        return qf + 3.0

    return OdeSystem(f"phase{q}", 2, rhs, ("x", "y"), None, stiffness)


def phase_end_event(q: int) -> EventFn:
    """Zero when every unsaturated vertex carries ``q`` circles (``z_q = 0``)."""
    qf = float(q)
    return lambda s, v: v[1] - qf * (1.0 - v[0])


def lower_bound_system() -> OdeSystem:
    def rhs(s, v):
        x, y, u, d, w = v
        return (1.0 - x, 1.0 - x - y, y - 2.0 * u, y - u - 3.0 * d, d - 2.0 * w)

    return OdeSystem("lower", 5, rhs, ("x", "y", "u", "d", "w"))


# --- lower bound ---------------------------------------------------------------

class LowerForms(NamedTuple):
    x: float
    y: float
    u: float
    d: float
    w: float
    g: float


def lower_closed_forms(b: float) -> LowerForms:
    if b < 0:
        raise ValueError("b must be non-negative")
    e1, e2, e3 = math.exp(-b), math.exp(-2 * b), math.exp(-3 * b)
    x = 1.0 - e1
    y = b * e1
    u = (b - 1.0) * e1 + e2
    d = 0.5 * e1 + 0.5 * e3 - e2
    w = 0.5 * e1 - b * e2 - 0.5 * e3
    g = 1.0 + 0.5 * (1.0 - 2.0 * b) * e1 - (b + 1.0) * e2 - 0.5 * e3
    return LowerForms(x, y, u, d, w, g)


def g_function(b: float) -> float:
    return lower_closed_forms(b).g


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Smallest-bracket bisection for an increasing sign change of ``f`` on ``[lo, hi]``.

    Returns the right end of the final bracket, i.e. a point where ``f >= 0``.
    """
    flo, fhi = f(lo), f(hi)
    if not (flo < 0.0 <= fhi):
        raise ValueError(f"no increasing sign change on [{lo}, {hi}]: f={flo}, {fhi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def find_alpha(tol: float = 1e-12, samples: int = 2001) -> float:
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = 0.0, 2.0
    grid = np.linspace(lo, hi, samples)
    vals = np.array([g_function(b) for b in grid])
    if np.any(np.diff(vals) <= 0):
        raise OdeError("g is not increasing on the bracketing interval")
    return bisect(lambda b: g_function(b) - 0.5, lo, hi, tol)


# --- upper bound ---------------------------------------------------------------

@dataclass
class PhaseCascade:
    k: int
    h: float
    c: list = field(default_factory=list)
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)
    z_start: list = field(default_factory=list)
    solutions: list = field(default_factory=list)

    @property
    def c_k(self) -> float:
        return self.c[-1]

    @property
    def x_k(self) -> float:
        return self.x[-1]

    def rows(self):
        return [(q + 1, self.c[q], self.x[q], self.y[q]) for q in range(len(self.c))]


def phase_cascade(k: int, h: float = DEFAULT_H, s_max: float = 3.0,
                  event_tol: float = EVENT_TOL, keep_solutions: bool = False) -> PhaseCascade:
    """Integrate phases 1..k, each starting where the previous one ended with ``y_q = 0``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    out = PhaseCascade(k=k, h=h)
    s, x = 0.0, 0.0
    for q in range(1, k + 1):
        sol = integrate(phase_system(q), s, (x, 0.0), h, phase_end_event(q), s_max,
                        event_tol, store=keep_solutions)
        if not sol.triggered:
            raise OdeError(f"phase {q} did not end before s={s_max}")
        out.z_start.append((q - 1) * (1.0 - x))
        s, (x, y) = sol.event_s, sol.event_y
        out.c.append(s)
        out.x.append(x)
        out.y.append(y)
        if keep_solutions:
            out.solutions.append(sol)
    return out


def warmup_event_time(x0: float = 0.0, r0: float = 0.0, target: float = 1.0 - WARMUP_EPS / 3,
                      h: float = DEFAULT_H, s_max: float = 3.0) -> float:
    sol = integrate(warmup_system(), 0.0, (x0, r0), h, lambda s, v: v[0] - target, s_max,
                    store=False)
    if not sol.triggered:
        raise OdeError(f"warm-up from x0={x0} never reached {target}")
    return sol.event_s


def continuation_time(h: float = DEFAULT_H) -> float:
    return warmup_event_time(CONTINUATION_START, 0.0, 1.0 - WARMUP_EPS, h, s_max=0.1)


@dataclass
class BoundsReport:
    alpha: float
    beta: float
    c_k: float
    x_k: float
    continuation_time: float
    cleanup: float
    k: int
    c_q: list
    h: float
    tol: float
    partial: bool = False
    deltas: dict = field(default_factory=dict)
    seconds: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "beta_components": {"c_k": self.c_k, "continuation": self.continuation_time,
                                "cleanup": self.cleanup},
            "x_k": self.x_k,
            "k": self.k,
            "partial": self.partial,
            "c_q": list(self.c_q),
            "continuation_time": self.continuation_time,
            "solver": {"h": self.h, "tol": self.tol, "method": "rk4-fixed+stiff-substeps"},
            "half_step_deltas": dict(self.deltas),
            "seconds": dict(self.seconds),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def assemble_beta(cascade: PhaseCascade, continuation: float, alpha: float = float("nan"),
                  tol: float = EVENT_TOL, full_k: int = 1100) -> BoundsReport:
    beta = cascade.c_k + continuation + CLEANUP_SHARE
    return BoundsReport(alpha=alpha, beta=beta, c_k=cascade.c_k, x_k=cascade.x_k,
                        continuation_time=continuation, cleanup=CLEANUP_SHARE, k=cascade.k,
                        c_q=list(cascade.c), h=cascade.h, tol=tol, partial=cascade.k < full_k)


def compute_bounds(k: int = 1100, h: float = DEFAULT_H, tol: float = EVENT_TOL,
                   convergence_check: bool = False) -> BoundsReport:
    """alpha, the k-phase cascade, the continuation run and beta in one report."""
    t0 = time.perf_counter()
    alpha = find_alpha(min(tol, 1e-9))
    t1 = time.perf_counter()
    cascade = phase_cascade(k, h, event_tol=tol)
    t2 = time.perf_counter()
    cont = continuation_time(h)
    t3 = time.perf_counter()
    report = assemble_beta(cascade, cont, alpha, tol)
    report.seconds = {"alpha": t1 - t0, "cascade": t2 - t1, "continuation": t3 - t2}
    if convergence_check:
        half = phase_cascade(k, h / 2, event_tol=tol)
        cont_half = continuation_time(h / 2)
        report.deltas = {
            "c_k": abs(half.c_k - cascade.c_k),
            "x_k": abs(half.x_k - cascade.x_k),
            "continuation": abs(cont_half - cont),
        }
    return report
