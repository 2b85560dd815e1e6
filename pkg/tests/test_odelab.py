import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from semirandom import odelab
from semirandom.odelab import (GuardViolation, OdeSystem, assemble_beta, find_alpha,
                               integrate, lower_bound_system, lower_closed_forms,
                               phase_cascade, phase_system, warmup_system)


def decay():
    return OdeSystem("decay", 1, lambda s, v: (-v[0],), ("x",))


def test_exponential_event():
    sol = integrate(decay(), 0.0, (1.0,), 1e-4, lambda s, v: math.exp(-1) - v[0], s_max=3.0)
    assert sol.triggered and abs(sol.event_s - 1.0) <= 1e-8


def test_grid_spacing_and_s_max_report():
    sol = integrate(decay(), 0.0, (1.0,), 0.01, lambda s, v: -1.0, s_max=0.5)
    assert not sol.triggered and sol.status == "s_max"
    assert np.allclose(np.diff(sol.s), 0.01) and abs(sol.s[-1] - 0.5) < 1e-12


def test_guard_violation_aborts():
    grow = OdeSystem("grow", 1, lambda s, v: (1.0,), ("x",), guard=lambda s, v: v[0] < 1.0)
    with pytest.raises(GuardViolation):
        integrate(grow, 0.0, (0.0,), 0.01, s_max=2.0)
    with pytest.raises(GuardViolation):
        integrate(grow, 0.0, (1.5,), 0.01)


def test_symbolic_closed_forms():
    sympy = pytest.importorskip("sympy")
    b = sympy.symbols("b", nonnegative=True)
    E = sympy.exp
    x = 1 - E(-b)
    y = b * E(-b)
    u = (b - 1) * E(-b) + E(-2 * b)
    d = E(-b) / 2 + E(-3 * b) / 2 - E(-2 * b)
    w = E(-b) / 2 - b * E(-2 * b) - E(-3 * b) / 2
    g = 1 + (1 - 2 * b) / 2 * E(-b) - (b + 1) * E(-2 * b) - E(-3 * b) / 2
    for lhs, rhs in [(x, 1 - x), (y, 1 - x - y), (u, y - 2 * u), (d, y - u - 3 * d),
                     (w, d - 2 * w)]:
        assert sympy.simplify(sympy.diff(lhs, b) - rhs) == 0
        assert lhs.subs(b, 0) == 0
    assert sympy.simplify(g - (x + w - u)) == 0


def test_closed_forms_by_finite_differences():
    h = 1e-5
    for i in range(1, 31):
        b = 0.1 * i
        f = lower_closed_forms(b)
        lo, hi = lower_closed_forms(b - h), lower_closed_forms(b + h)
        der = [(p - m) / (2 * h) for p, m in zip(hi, lo)]
        rhs = [1 - f.x, 1 - f.x - f.y, f.y - 2 * f.u, f.y - f.u - 3 * f.d, f.d - 2 * f.w]
        assert max(abs(a - r) for a, r in zip(der[:5], rhs)) <= 1e-10


def test_g_identity_dense():
    for b in np.linspace(0, 5, 5001):
        f = lower_closed_forms(float(b))
        assert abs(f.g - (f.x + f.w - f.u)) <= 1e-12


def test_closed_form_examples():
    assert lower_closed_forms(0.0) == (0, 0, 0, 0, 0, 0)
    assert abs(lower_closed_forms(math.log(2)).x - 0.5) < 1e-15
    oracle = 1 - math.exp(-1) / 2 - 2 * math.exp(-2) - math.exp(-3) / 2
    assert abs(lower_closed_forms(1.0).g - oracle) < 1e-14
    assert abs(oracle - 0.5205) < 5e-5


def test_lower_system_matches_closed_forms():
    sol = integrate(lower_bound_system(), 0.0, (0.0,) * 5, 1e-4, s_max=2.0)
    for b in (0.5, 1.0, 2.0):
        i = int(round(b / 1e-4))
        assert abs(sol.s[i] - b) < 1e-12
        exact = lower_closed_forms(b)[:5]
        assert max(abs(a - e) for a, e in zip(sol.y[i], exact)) <= 1e-8


def test_find_alpha():
    a = find_alpha(1e-9)
    assert 0.93261 <= a <= 0.93262
    g = odelab.g_function
    assert g(a - 1e-4) < 0.5 < g(a + 1e-4)
    assert abs(find_alpha(1e-6) - a) <= 1e-5
    with pytest.raises(ValueError):
        find_alpha(0)


@settings(max_examples=50, deadline=None)
@given(b=st.floats(0.0, 10.0))
def test_g_increasing_and_bounded(b):
    f = lower_closed_forms(b)
    assert 0.0 <= f.w <= f.u + 1e-15 and f.u <= f.y + 1e-15 and f.x <= 1.0
    assert odelab.g_function(b + 1e-3) > f.g


def test_system_initial_slopes():
    assert warmup_system().rhs(0.0, (0.0, 0.0)) == (2.0, 0.0)
    assert phase_system(1).rhs(0.0, (0.0, 0.0)) == (2.0, 0.0)
    x, y = 0.3, 0.1
    assert phase_system(1).rhs(0.0, (x, y)) == pytest.approx((2 * (1 - x + y), x - 4 * y))


def test_warmup_constant_and_lower_edge():
    s = odelab.warmup_event_time(h=1e-5)
    assert 1.276 <= s <= odelab.PUBLISHED_WARMUP


def test_continuation_run():
    sol = integrate(warmup_system(), 0.0, (1 - 1e-6, 0.0), 1e-6, s_max=0.00158)
    assert 1 - sol.final[1][0] < 1e-14


def test_cascade_structure():
    cas = phase_cascade(8, h=1e-5, keep_solutions=True)
    assert all(a < b for a, b in zip(cas.c, cas.c[1:]))
    for q in range(1, 9):
        x, y = cas.x[q - 1], cas.y[q - 1]
        assert abs((q - 1) * (1 - x - y / q)) <= 1e-9 * max(q, 1) or q == 1
        assert abs(y - q * (1 - x)) <= 1e-9
    for q in range(2, 9):
        # Next phase starts at the previous end: x carried over, y reset, z equal to old y.
        sol = cas.solutions[q - 1]
        assert sol.y[0][0] == cas.x[q - 2] and sol.y[0][1] == 0.0
        assert abs(cas.z_start[q - 1] - cas.y[q - 2]) <= 1e-10


def test_c1_regression_anchor_and_half_step():
    a = phase_cascade(1, h=1e-5).c[0]
    b = phase_cascade(1, h=5e-6).c[0]
    assert abs(a - b) <= 1e-8
    assert abs(a - 0.7367931778039931) <= 1e-9


def test_assemble_beta_components():
    cas = odelab.PhaseCascade(k=1100, h=1e-6, c=[1.20365], x=[1 - 1e-6], y=[0.0])
    rep = assemble_beta(cas, 0.00158, alpha=0.93261)
    assert round(rep.beta, 5) == 1.20524 and not rep.partial
    d = rep.to_dict()
    assert d["beta_components"] == {"c_k": 1.20365, "continuation": 0.00158, "cleanup": 1e-5}


def test_partial_cascade_flagged():
    rep = odelab.compute_bounds(k=1, h=1e-5)
    assert rep.partial and rep.k == 1 and len(rep.c_q) == 1
