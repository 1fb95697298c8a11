import math

import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as scistats

from exclusion_lab.event_core import Clock
from exclusion_lab.kernels import RateKernel, TaggedKernel
from exclusion_lab.labeled_coupling import (
    CoupledSimulator,
    CoupledState,
    LabeledSimulator,
    LabeledState,
    OrderViolation,
    check_order,
    f_count,
    from_positions,
    joint_rates,
    k_insert,
    make_ordered_pair,
    packed_step_state,
    reverse,
    s_relabel,
    t_move,
    target_site,
    theta_shift,
)

P = RateKernel({1: 2, -1: 1, 2: 1, -2: 1})


# --- single-cloud transforms -------------------------------------------------


def test_t_move_basic_overtake():
    s = from_positions([1, 2, 5])
    out = t_move(s, 0, 2)
    assert out.pos == [2, 3, 5] and out.base == 0


def test_t_move_no_overtake_touches_one_label():
    s = from_positions([1, 4, 9])
    out = t_move(s, 1, 2)
    assert out.pos == [1, 6, 9]


def test_t_move_rejects_occupied_target():
    s = from_positions([1, 2, 5])
    with pytest.raises(ValueError):
        t_move(s, 0, 1)


def test_t_move_zero_is_identity():
    s = from_positions([1, 2, 5])
    assert t_move(s, 0, 0) == s


positions_strategy = st.lists(
    st.integers(-40, 40), min_size=1, max_size=14, unique=True
).map(sorted)


@given(positions_strategy, st.integers(0, 13), st.integers(-4, 4))
@settings(max_examples=400)
def test_t_move_preserves_multiset_and_order(pos, idx, z):
    if idx >= len(pos):
        idx = idx % len(pos)
    s = from_positions(pos)
    tgt = pos[idx] + z
    if z == 0 or tgt in s.occ:
        return
    out = t_move(s, idx, z)
    expected = sorted(set(pos) - {pos[idx]} | {tgt})
    assert out.pos == expected
    assert all(a < b for a, b in zip(out.pos, out.pos[1:]))


@given(positions_strategy, st.integers(0, 13), st.integers(1, 4))
@settings(max_examples=400)
def test_t_move_negative_is_reverse_conjugate(pos, idx, z):
    if idx >= len(pos):
        idx = idx % len(pos)
    s = from_positions(pos)
    tgt = pos[idx] - z
    if tgt in s.occ:
        return
    direct = t_move(s, idx, -z)
    conjugated = reverse(t_move(reverse(s), -idx, z))
    assert direct.pos == conjugated.pos and direct.base == conjugated.base


def test_theta_shift_examples():
    s = from_positions([-3, -1, 1, 4])
    out = theta_shift(s, 2)
    assert out.pos == [-5, -3, -1, 2]
    with pytest.raises(ValueError):
        theta_shift(s, 1)  # occupied site
    back = theta_shift(theta_shift(s, 2), -2)
    assert back == s


def test_s_relabel_examples():
    s = from_positions([-2, -1, 1])
    out = s_relabel(s, 1)
    assert out.pos == s.pos
    assert out.base == -1 and out.top == 1
    assert s_relabel(s, 0) == s
    # relabeled state reads old label j+z at new label j
    assert out.position(-1) == -2
    assert out.position(1) == 1


def test_relabel_after_shift_matches_right_jump_pattern():
    # a rightward tagged jump with label shift: new label j holds old j+1's
    # site minus one, so the cloud drops by one unit with labels following
    s = from_positions([-4, -2, 2, 4], base=-3)
    out = s_relabel(theta_shift(s, 1), 1)
    assert out.pos == [-5, -3, 1, 3]
    assert out.base == -4 and out.top == -1
    assert out.position(-4) == -5 and out.position(-1) == 3


def test_k_insert_matches_shift_down_rule():
    s = from_positions([-4, -3, -1, 2, 3])
    out = k_insert(s, 0)
    assert out.pos == [-4, -3, -1, 0, 2, 3]
    assert out.base == -1
    # label 2 now holds the inserted site, lower labels shifted down
    assert out.position(2) == 0
    assert out.position(1) == -1
    assert out.position(-1) == -4
    assert out.position(3) == 2


def test_k_insert_occupied_site_is_identity():
    s = from_positions([-4, -3, -1, 2, 3])
    assert k_insert(s, 2) == s


@given(positions_strategy, st.integers(-45, 45))
@settings(max_examples=300)
def test_k_insert_grows_multiset(pos, site):
    s = from_positions(pos)
    out = k_insert(s, site)
    if site in set(pos):
        assert out == s
    else:
        assert out.pos == sorted(set(pos) | {site})
        assert all(a < b for a, b in zip(out.pos, out.pos[1:]))


def test_f_count_examples():
    step = packed_step_state(30)
    assert f_count(step) == 0
    s = from_positions([-5, -2, 3])
    assert f_count(s) == 1
    with pytest.raises(ValueError):
        f_count(from_positions([2, 3]))


def test_f_count_packed_fallback_when_tracked_block_moves_right():
    s = LabeledState([5, 7], base=3, floor=-10)
    assert f_count(s) == 2  # top implicit label sits at -11 <= -1


def test_position_sentinels_and_implicit_block():
    s = from_positions([1, 5], base=2)
    assert s.position(1) == -math.inf
    assert s.position(4) == math.inf
    packed = packed_step_state(5)
    assert packed.position(packed.base - 1) == packed.floor - 1
    assert packed.position(packed.base - 3) == packed.floor - 3


# --- selector ------------------------------------------------------------------


def test_target_site_frozen_example():
    upper, lower = from_positions([-3, -1]), from_positions([-4, -3])
    assert target_site(upper, lower, 0, 2, 2) == 1
    moved_u = t_move(upper, 0, 1)
    moved_l = t_move(lower, 0, 2)
    assert moved_u.pos == [-2, -1] and moved_l.pos == [-3, -2]
    assert check_order(moved_u, moved_l)


def test_target_site_zero_when_upper_ahead():
    upper, lower = from_positions([5]), from_positions([1])
    assert target_site(upper, lower, 0, 2, 2) == 0


def test_target_site_equal_states_follows_exactly():
    state = from_positions([-4, -1, 3])
    for z in (1, 2):
        for label in range(3):
            lower = state.copy()
            if not lower.legal_target(lower.pos[label] + z):
                continue
            assert target_site(state, lower, label, z, 2) == z


def test_target_site_random_oracle(rng):
    # exhaustive post-condition check over s in {0..span}
    cases = 0
    while cases < 3000:
        span = int(rng.integers(2, 5))
        n = int(rng.integers(2, 13))
        exclude = bool(rng.integers(0, 2))
        upper, lower = make_ordered_pair(rng, n, span=3 * n, exclude_origin=exclude)
        label = int(rng.integers(0, n))
        legal = [z for z in range(1, span + 1) if lower.legal_target(lower.pos[label] + z)]
        if not legal:
            continue
        z = int(legal[rng.integers(0, len(legal))])
        zp = target_site(upper, lower, label, z, span)
        moved_l = t_move(lower, label, z)
        if zp > 0:
            assert upper.legal_target(upper.pos[label] + zp)
            assert upper.pos[label] + zp <= lower.pos[label] + z
            assert check_order(t_move(upper, label, zp), moved_l)
        else:
            assert check_order(upper, moved_l)
        cases += 1


# --- joint rates -----------------------------------------------------------------


def _marginal_rate_sums(events, side):
    out = {}
    for ev in events:
        z = ev.lower_z if side == "lower" else ev.upper_z
        if ev.kind == "tag" or z is None:
            continue
        out[(ev.label, z)] = out.get((ev.label, z), 0.0) + ev.rate
    return out


def test_joint_rates_marginals_reconstruct_kernel(rng):
    for _ in range(40):
        n = int(rng.integers(2, 10))
        upper, lower = make_ordered_pair(rng, n, span=24)
        pair = CoupledState(upper, lower)
        events = joint_rates(pair, P)
        for side, state in (("lower", lower), ("upper", upper)):
            sums = _marginal_rate_sums(events, side)
            for label in state.labels():
                anchor = state.pos[label - state.base]
                for d in P.displacements():
                    want = P.rate(d) if state.legal_target(anchor + d) else 0.0
                    got = sums.get((label, d), 0.0)
                    assert got == pytest.approx(want, abs=1e-12), (side, label, d)


def test_joint_rates_equal_states_have_no_residuals():
    state = from_positions([-6, -4, -1, 3])
    pair = CoupledState(state.copy(), state.copy())
    events = joint_rates(pair, P)
    assert all(not ev.kind.startswith("solo") for ev in events)
    for ev in events:
        if ev.kind == "pair+":
            assert ev.lower_z == ev.upper_z
        elif ev.kind == "pair-":
            assert ev.lower_z == ev.upper_z


def test_joint_rates_stuck_lower_leaves_only_upper_moves():
    # lower jammed against the excluded origin under a range-1 kernel:
    # no legal lower jump exists, so every event moves the upper alone
    short = RateKernel({1: 1.0})
    lower = from_positions([-2, -1], exclude_origin=True)
    upper = from_positions([3, 5], exclude_origin=True)
    pair = CoupledState(upper, lower)
    events = joint_rates(pair, short, variant="plus")
    assert events and all(ev.kind == "solo+" for ev in events)
    assert all(ev.rate == pytest.approx(1.0) for ev in events)


def test_joint_rates_tagged_variants():
    q = TaggedKernel({1: 0.3, -1: 0.2})
    state = from_positions([-5, -2, 2], exclude_origin=True)
    pair = CoupledState(state.copy(), state.copy())
    right = [ev for ev in joint_rates(pair, P, tagged=q, variant="right") if ev.kind == "tag"]
    assert {ev.upper_z for ev in right} == {-1, 1}
    full = [ev for ev in joint_rates(pair, P, variant="full") if ev.kind == "tag"]
    assert not full


# --- coupled simulation -----------------------------------------------------------


def test_coupled_zero_horizon_keeps_order(rng):
    upper, lower = make_ordered_pair(rng, 10, span=20)
    pair = CoupledState(upper, lower)
    sim = CoupledSimulator(pair, P, clock=Clock.from_seed(1), variant="full")
    sim.run_to(0.0)
    pair.assert_order()
    assert sim.events == 0


def test_coupled_rejects_unordered_pair():
    with pytest.raises(ValueError):
        CoupledState(from_positions([0, 1]), from_positions([0, 2]))


def test_order_violation_raises_with_dump():
    pair = CoupledState(from_positions([5, 9]), from_positions([1, 2]))
    pair.upper.pos[0] = -7  # corrupt the state behind the invariant's back
    pair.upper.occ = set(pair.upper.pos)
    with pytest.raises(OrderViolation) as err:
        pair.assert_order("in test")
    assert "upper" in err.value.dump


def test_coupled_run_all_variants_keep_order_and_counts(rng):
    q = TaggedKernel({1: 0.08, -1: 0.08})
    for variant in ("plus", "full", "right", "left"):
        upper, lower = make_ordered_pair(
            rng, 18, span=30, exclude_origin=variant in ("right", "left")
        )
        pair = CoupledState(upper, lower)
        sim = CoupledSimulator(
            pair, P, q if variant in ("right", "left") else None,
            variant=variant, clock=Clock.from_seed(33), keep_log=True,
        )
        sim.run_to(12.0)
        assert sim.events == len(sim.log)
        assert check_order(pair.upper, pair.lower)


def test_counting_identity_standalone():
    # left-block label count drops by net crossings plus relabeled tagged jumps
    q = TaggedKernel({1: 0.4, -1: 0.4})
    for gen, sign in (("plain", 0), ("right", 1), ("left", -1)):
        st_ = packed_step_state(60)
        start_f = f_count(st_)
        sim = LabeledSimulator(st_, P, q, generator=gen, clock=Clock.from_seed(5))
        sim.run_to(10.0)
        assert sim.packed_valid
        c = sim.counters
        assert start_f - f_count(st_) == c.net_crossings + sign * c.relabels


def test_counting_identity_coupled_marginals():
    q = TaggedKernel({1: 0.3, -1: 0.3})
    pair = CoupledState(packed_step_state(60), packed_step_state(60))
    sim = CoupledSimulator(pair, P, q, variant="right", clock=Clock.from_seed(6))
    sim.run_to(10.0)
    cu, cl = sim.upper_counters, sim.lower_counters
    assert 0 - f_count(pair.upper) == cu.net_crossings + cu.relabels
    assert 0 - f_count(pair.lower) == cl.net_crossings


def test_f_count_antitone_on_ordered_pairs(rng):
    for _ in range(300):
        n = int(rng.integers(2, 20))
        upper, lower = make_ordered_pair(rng, n, span=30)
        if upper.pos[0] > -1 or lower.pos[0] > -1:
            continue
        assert f_count(upper) <= f_count(lower)


def test_shift_monotone_identities(rng):
    hits = 0
    while hits < 400:
        n = int(rng.integers(2, 15))
        state, _ = make_ordered_pair(rng, n, span=25)
        z = int(rng.integers(1, 3))
        if not state.is_occupied(-z):
            assert check_order(theta_shift(state, -z), state)
            hits += 1
        if not state.is_occupied(z):
            assert check_order(s_relabel(theta_shift(state, z), z), state)
            hits += 1


def test_marginal_law_smoke_against_standalone():
    # lower marginal of the full coupling vs a standalone run: same law
    reps = 300
    ref, got = [], []
    for r in range(reps):
        st_ = packed_step_state(30)
        sim = LabeledSimulator(st_, P, None, generator="plain", clock=Clock.from_seed(900, r))
        sim.run_to(3.0)
        ref.append(f_count(st_))
        pair = CoupledState(packed_step_state(30), packed_step_state(30))
        csim = CoupledSimulator(pair, P, None, variant="full", clock=Clock.from_seed(901, r))
        csim.run_to(3.0)
        got.append(f_count(pair.lower))
    assert scistats.ks_2samp(ref, got).pvalue > 0.001


def test_simulator_requires_matching_setup():
    with pytest.raises(ValueError):
        CoupledSimulator(
            CoupledState(from_positions([1]), from_positions([0])),
            P, None, variant="right", clock=Clock.from_seed(1),
        )
    with pytest.raises(ValueError):
        LabeledSimulator(from_positions([1]), P, TaggedKernel({1: 0.1}),
                         generator="plain", clock=Clock.from_seed(1))
    with pytest.raises(ValueError):
        LabeledSimulator(from_positions([1], exclude_origin=True), P, None,
                         generator="sideways", clock=Clock.from_seed(1))
