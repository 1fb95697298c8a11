import numpy as np
import pytest

from exclusion_lab.environment import (
    Absorbed,
    EnvSimulator,
    TorusSimulator,
    apply_exchange,
    apply_tagged_shift,
    bernoulli_state,
    exchange_events,
    explicit_state,
    simulate_env,
    step_state,
)
from exclusion_lab.event_core import Clock
from exclusion_lab.kernels import RateKernel, TaggedKernel
from exclusion_lab.observables import occupancy_product


def test_step_init():
    st = step_state(3)
    assert [st.occupancy(s) for s in (-3, -2, -1)] == [1, 1, 1]
    assert [st.occupancy(s) for s in (1, 2, 3)] == [0, 0, 0]
    with pytest.raises(KeyError):
        st.occupancy(0)


def test_bernoulli_init_full():
    st = bernoulli_state(2, 1.0, np.random.default_rng(0))
    assert all(st.occupancy(s) == 1 for s in (-2, -1, 1, 2))


def test_explicit_init():
    st = explicit_state(2, [1, 0, 0, 1])
    assert st.occupancy(-2) == 1
    assert st.occupancy(-1) == 0
    assert st.occupancy(1) == 0
    assert st.occupancy(2) == 1
    with pytest.raises(ValueError):
        explicit_state(2, [1, 0, 0])


def test_exchange_events_step_config(p_star):
    st = step_state(4)
    events = dict(exchange_events(st, p_star))
    assert events[(-1, 1)] == p_star.rate(2)
    assert (1, -1) not in events
    # no jumps into the origin
    assert all(y != 0 and x != 0 for x, y in events)


def test_exchange_events_full_config(p_star):
    st = explicit_state(3, [1] * 6)
    assert exchange_events(st, p_star) == []


def test_exchange_table_matches_enumeration_oracle(p_star, rng):
    # brute-force enumeration total equals the simulator's interior rate total
    st = bernoulli_state(12, 0.5, rng, lambda_left=0.5, rho_right=0.5)
    sim = EnvSimulator(st, p_star, None, clock=Clock.from_seed(8))
    oracle = sum(rate for _, rate in exchange_events(st, p_star))
    boundary = sum(
        sim.table.rate_of(eid) for eid in range(sim._b_base, sim._t_base)
    )
    assert sim.table.total == pytest.approx(oracle + boundary, rel=1e-9)


def test_apply_exchange_counters():
    st = step_state(3)
    apply_exchange(st, -1, 1)
    assert st.right_crossings == 1 and st.left_crossings == 0
    st2 = explicit_state(3, [1, 1, 0, 0, 1, 0])
    apply_exchange(st2, -2, -1)
    assert st2.right_crossings == 0 and st2.left_crossings == 0
    st3 = explicit_state(3, [1, 0, 0, 1, 0, 0])
    apply_exchange(st3, 1, -1)
    assert st3.left_crossings == 1


def test_apply_exchange_validates():
    st = step_state(3)
    with pytest.raises(AssertionError):
        apply_exchange(st, 1, -1)  # source vacant


def test_tagged_shift_right_and_back(rng):
    st = explicit_state(3, [1, 1, 1, 0, 0, 0], lambda_left=1.0, rho_right=0.0)
    apply_tagged_shift(st, 1, rng)
    assert st.occupancy(-1) == 0  # vacated seat
    assert st.occupancy(-3) == 1 and st.occupancy(-2) == 1
    assert st.tagged_right == 1
    apply_tagged_shift(st, -1, rng)
    assert [st.occupancy(s) for s in (-3, -2, -1, 1, 2, 3)] == [1, 1, 1, 0, 0, 0]
    assert st.displacement == 0


def test_tagged_shift_validates_target(rng):
    st = step_state(3)
    with pytest.raises(AssertionError):
        apply_tagged_shift(st, -1, rng)  # site -1 occupied
    with pytest.raises(ValueError):
        apply_tagged_shift(st, 2, rng)


def test_run_zero_horizon(p_star):
    st = step_state(10)
    rep = simulate_env(st, p_star, None, 0.0, clock=Clock.from_seed(4))
    assert rep.net_crossings == 0 and rep.events == 0


def test_env_run_is_deterministic(p_star, q_slow):
    def run():
        st = step_state(40)
        return simulate_env(
            st, p_star, q_slow, 8.0, clock=Clock.from_seed(77),
            cylinders=[occupancy_product([-1], [1])],
        )

    a, b = run(), run()
    assert a == b


def test_particle_conservation_reconciles(p_star, rng):
    st = bernoulli_state(15, 0.5, rng, lambda_left=0.6, rho_right=0.3)
    q = TaggedKernel({1: 0.4, -1: 0.4})
    sim = EnvSimulator(st, p_star, q, clock=Clock.from_seed(13))
    start = st.particle_count()
    sim.run_to(30.0)
    expected = start + sim.created - sim.destroyed + sim.resampled_in - sim.resampled_out
    assert st.particle_count() == expected
    assert st.right_crossings >= 0 and st.left_crossings >= 0


def test_crossing_counters_match_cut_log(p_star, rng):
    st = bernoulli_state(15, 0.5, rng, lambda_left=0.5, rho_right=0.5)
    sim = EnvSimulator(st, p_star, None, clock=Clock.from_seed(14), cuts=(0.0,))
    sim.run_to(20.0)
    assert sim.cut_counts["cut(-1,1)"] == st.net_crossings


def test_monitor_flags_small_window(p_star):
    st = step_state(6)
    sim = EnvSimulator(st, p_star, None, clock=Clock.from_seed(15), monitor=True)
    sim.run_to(20.0)
    assert not sim.boundary_clear
    rep = simulate_env(step_state(6), p_star, None, 20.0,
                       clock=Clock.from_seed(15), monitor=True)
    assert not rep.valid


def test_env_rejects_long_tagged_jumps(p_star):
    with pytest.raises(ValueError, match="nearest-neighbor"):
        EnvSimulator(step_state(10), p_star, TaggedKernel({2: 0.1}),
                     clock=Clock.from_seed(16))


def test_absorbed_signal():
    p = RateKernel({1: 1.0})
    st = explicit_state(2, [0, 0, 0, 0], lambda_left=0.0, rho_right=0.0)
    sim = EnvSimulator(st, p, None, clock=Clock.from_seed(17))
    with pytest.raises(Absorbed):
        sim.run_to(1.0)


def test_snapshot_times_monotone_counters(p_star):
    st = step_state(50)
    rep = simulate_env(st, p_star, None, 10.0, clock=Clock.from_seed(18),
                       snapshot_times=(5.0,))
    snap = rep.snapshots[5.0]
    assert snap["right_crossings"] <= rep.right_crossings
    assert snap["left_crossings"] <= rep.left_crossings


def test_torus_flux_matches_bond_average(p_star):
    # ring-averaged flux and single-bond counting estimate the same mean
    rings, bonds = [], []
    for r in range(8):
        clock = Clock.from_seed(19, r)
        sim = TorusSimulator(32, p_star, 0.5, clock=clock, reference_bond=(5, 6))
        sim.run_to(150.0)
        rings.append(sim.flux / (32 * 150.0))
        bonds.append(sim.ref_count / 150.0)
    from exclusion_lab.observables import agree_within, mean_se

    mr, sr = mean_se(rings)
    mb, sb = mean_se(bonds)
    assert agree_within(mr, sr, mb, sb, 4.0)
