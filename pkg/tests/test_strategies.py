import math

import pytest

from semirandom import odelab
from semirandom.process import GREEN, RED, Rng, new_process, play_round, run_until
from semirandom.strategies import (CleanupConfig, PhasedStrategy, StrategyError,
                                   WarmupStrategy, cleanup_run,
                                   upper_bound_pipeline)


def _warmup_time(x):
    """ODE time at which the warm-up solution reaches ``x``."""
    return odelab.warmup_event_time(0.0, 0.0, x, h=1e-5)


# --- warm-up rules ------------------------------------------------------------------

def test_a1_matches_square_and_circle(scripted):
    state, _ = new_process(10, 0)
    rng = scripted([4])
    arc = play_round(state, WarmupStrategy(Rng(1)), rng)
    assert arc.square == 4 and state.mate[4] == arc.circle and state.mate[arc.circle] == 4
    assert state.upos[4] < 0 and state.upos[arc.circle] < 0


def test_a3_then_a2_augments(scripted):
    state, _ = new_process(8, 0)
    state.preset_matching([(0, 1)])
    strat = WarmupStrategy(Rng(3))
    play_round(state, strat, scripted([0]))           # A3: 0 turns green, 1 red
    assert state.color[0] == GREEN and state.color[1] == RED
    y = state.green_link[0]
    arc = play_round(state, strat, scripted([1]))     # A2 along y-0-1-v
    v = arc.circle
    assert v != y and strat.case == 2
    assert state.mate[y] == 0 and state.mate[1] == v
    assert state.matching_size == 2 and state.n_green == state.n_red == 0
    state.check_invariants()


def test_a4_on_green_vertex_is_unusable(scripted):
    state, _ = new_process(8, 0)
    state.preset_matching([(0, 1)])
    strat = WarmupStrategy(Rng(3))
    play_round(state, strat, scripted([0]))
    arc = play_round(state, strat, scripted([0]))
    assert arc.unusable and strat.case == 4 and state.matching_size == 1


def test_a4_in_pipeline_mode_hits_saturated(scripted):
    state, _ = new_process(40, 0)
    state.preset_matching((2 * i, 2 * i + 1) for i in range(15))
    strat = WarmupStrategy(Rng(3), a4_saturated_only=True)
    play_round(state, strat, scripted([0]))
    for _ in range(10):
        arc = play_round(state, strat, scripted([0]))
        assert arc.unusable and state.upos[arc.circle] < 0


def test_warmup_tracks_ode_at_ten_percent_unsaturated():
    n = 10**5
    state, rng = new_process(n, 1, retain_arcs=False)
    run_until(state, WarmupStrategy(rng), rng, lambda s: len(s.unsat) <= 0.1 * n,
              sample_every=n)
    assert abs(state.step / n - _warmup_time(0.9)) <= 0.01


def test_warmup_one_percent_time_over_seeds():
    n = 10**5
    target = n * _warmup_time(0.99)
    steps = []
    for seed in range(10):
        state, rng = new_process(n, seed, retain_arcs=False)
        run_until(state, WarmupStrategy(rng), rng, lambda s: len(s.unsat) <= 0.01 * n,
                  sample_every=n)
        steps.append(state.step)
    assert abs(sum(steps) / len(steps) - target) <= 0.01 * target


# --- phased rules -----------------------------------------------------------------------

def test_b3_lowest_index_tie_break(scripted):
    state, _ = new_process(10, 0)
    state.preset_matching([(0, 1)])
    strat = PhasedStrategy(state, Rng(1))
    arc = play_round(state, strat, scripted([0]))
    assert arc.circle == 2 and strat.case == 3
    arc = play_round(state, strat, scripted([3]))   # B1 skips 2 (one circle) and 3 itself
    assert arc.circle == 4 and state.mate[3] == 4


def test_b2_excludes_green_link(scripted):
    state, _ = new_process(10, 0)
    state.preset_matching([(0, 1)])
    strat = PhasedStrategy(state, Rng(1))
    play_round(state, strat, scripted([0]))          # 0 -> 2 green
    arc = play_round(state, strat, scripted([1]))    # red 1: min over U minus {2}
    assert arc.circle == 3 and state.mate[0] == 2 and state.mate[1] == 3


def _type_counts(state):
    out = {}
    for v in range(state.n):
        if state.color[v] == RED:
            y = state.green_link[state.mate[v]]
            q = state.circle_count[y]
            out[q] = out.get(q, 0) + 1
    return out


def test_phase_invariants_each_round():
    n = 1000
    state, rng = new_process(n, 4)
    strat = PhasedStrategy(state, rng)
    seen_at_boundary = 0
    while state.unsat:
        unsat_before = set(state.unsat)
        arc = play_round(state, strat, rng)
        q = strat.phase
        counts = {state.circle_count[v] for v in state.unsat}
        assert counts <= {q - 1, q}
        if arc.unusable:
            assert arc.circle not in unsat_before
        types = _type_counts(state)
        assert set(types) <= {q - 1, q}
        for t, c in types.items():
            assert c == strat.red_of_type(t)
        if strat.boundaries and strat.boundaries[-1] == state.step and state.unsat:
            assert counts == {q - 1}
            seen_at_boundary += 1
    assert strat.boundaries == sorted(strat.boundaries)
    assert seen_at_boundary >= 3


def test_phase_one_end_matches_ode():
    n = 10**5
    state, rng = new_process(n, 1, retain_arcs=False)
    strat = PhasedStrategy(state, rng)
    while not strat.boundaries:
        play_round(state, strat, rng)
    cascade = odelab.phase_cascade(1, h=1e-5)
    assert abs(state.matching_size * 2 / n - cascade.x[0]) <= 0.01


def test_phased_error_without_candidates():
    state, rng = new_process(2, 0)
    state.preset_matching([(0, 1)])
    strat = PhasedStrategy(state, rng)
    with pytest.raises(StrategyError):
        strat.buckets.minimum()


# --- clean-up ------------------------------------------------------------------------

def test_cleanup_schedule_and_sprinkle():
    sched = CleanupConfig.schedule(100)
    assert sched[0] == 100 and sched[-1] == 0
    assert all(a >= b for a, b in zip(sched, sched[1:]))
    assert sched[1] == 75 and sched[2] == 56
    assert CleanupConfig.sprinkle(100, 10**6) == math.floor(math.sqrt(3e8) / 4)
    assert CleanupConfig.sprinkle(0, 10**6) == 0
    assert CleanupConfig(eps=1e-14).cap(10**14) == 10 * math.ceil(100 * 1e-7 * 1e14)


def test_cleanup_nothing_to_do():
    state, rng = new_process(10, 0)
    state.preset_matching([(0, 1), (2, 3), (4, 5), (6, 7), (8, 9)])
    assert cleanup_run(state, rng).rounds == 0


def test_cleanup_rejects_large_deficit():
    state, rng = new_process(100, 0)
    with pytest.raises(ValueError):
        cleanup_run(state, rng, CleanupConfig(eps=0.01))


def _near_perfect(n, unsat, seed):
    state, rng = new_process(n, seed, retain_arcs=False)
    state.preset_matching((2 * i, 2 * i + 1) for i in range((n - unsat) // 2))
    return state, rng


def test_cleanup_respects_stage_bound():
    # |U| = 10^-4 n at n = 10^6: each stage within max(4 sqrt(j_{k-1} n), log^2 n).
    n = 10**6
    for seed in range(10):
        state, rng = _near_perfect(n, 100, seed)
        rep = cleanup_run(state, rng, CleanupConfig(eps=1e-4))
        assert rep.completed and not state.unsat
        bound = sum(max(4 * math.sqrt(s.j_prev * n), math.log(n) ** 2) for s in rep.stages)
        assert rep.rounds <= bound
        for s in rep.stages:
            assert s.rounds <= max(4 * math.sqrt(s.j_prev * n), math.log(n) ** 2)


def test_cleanup_cap_reports_failure():
    state, rng = _near_perfect(10**4, 10, 0)
    rep = cleanup_run(state, rng, CleanupConfig(eps=1e-3, round_cap=5))
    assert not rep.completed and rep.remaining > 0 and rep.rounds == 5


# --- pipeline ------------------------------------------------------------------------

def test_pipeline_report_shape():
    rep = upper_bound_pipeline(1000, 3, k=30, continuation_eps=1e-2, cleanup_eps=1e-3)
    d = rep.to_dict()
    assert set(d) >= {"stage_rounds", "total_rounds", "n", "perfect", "phase_boundaries"}
    assert sum(d["stage_rounds"]) == d["total_rounds"] and d["perfect"]
    assert d["phase_boundaries"] == sorted(d["phase_boundaries"])


def test_pipeline_symbolic_assembly():
    assert round(1.20365 + 0.00158 + 1e-5, 5) == 1.20524


CLEANUP_COST = ("clean-up at cleanup_eps=1e-3 costs roughly 0.1n-0.15n at any n, since its "
                "cost scales like sqrt(eps) n; see the decisions ledger")


@pytest.mark.xfail(strict=True, reason=CLEANUP_COST)
def test_pipeline_large_n_stays_under_warmup_only_bound():
    worst = 0.0
    for seed in range(10):
        rep = upper_bound_pipeline(10**5, seed, k=30, continuation_eps=1e-2,
                                   cleanup_eps=1e-3, verify=False)
        assert rep.perfect
        worst = max(worst, rep.total_rounds / 10**5)
    assert worst <= 1.28


@pytest.mark.xfail(strict=True, reason=CLEANUP_COST)
def test_pure_warmup_pipeline_near_warmup_constant():
    ratios = [upper_bound_pipeline(10**4, s, k=0, cleanup_eps=1e-3, verify=False).total_rounds
              / 10**4 for s in range(20)]
    assert all(abs(r - 1.27696) <= 0.02 for r in ratios), ratios
