import math

import numpy as np
import pytest

from exclusion_lab.environment import step_state
from exclusion_lab.event_core import Clock
from exclusion_lab.half_line import (
    BoundarySimulator,
    BoundaryState,
    ThreeClassSimulator,
    bernoulli_segment,
    boundary_rates,
    current_bound_check,
    empty_segment,
    run_blockage_indicator,
    run_half_line_creation,
    run_three_class,
    simulate_segment,
)
from exclusion_lab.kernels import RateKernel, drift_mean
from exclusion_lab.observables import mean_se


def test_boundary_rates_full_left_reservoir(p_star):
    st = bernoulli_segment(1, 30, 0.5, np.random.default_rng(0), 1.0, 0.3)
    for (kind, *args), rate in boundary_rates(st, p_star):
        if kind == "destroy" and args[0] <= 2:
            pytest.fail("left destruction should vanish at lambda=1")


def test_boundary_rates_zero_right_reservoir(p_star):
    st = empty_segment(1, 30, 0.5, 0.0)
    kinds = {(kind, args[0]) for (kind, *args), _ in boundary_rates(st, p_star)}
    assert all(site <= p_star.range_ for kind, site in kinds if kind == "create")


def test_boundary_rates_vacant_edge_site(p_star):
    st = empty_segment(1, 30, 1.0, 0.0)
    rates = {args[0]: rate for (kind, *args), rate in boundary_rates(st, p_star) if kind == "create"}
    assert rates[1] == pytest.approx(p_star.rate(1) + p_star.rate(2))
    assert rates[2] == pytest.approx(p_star.rate(2))


def test_boundary_table_matches_enumeration(p_star, rng):
    st = bernoulli_segment(1, 40, 0.4, rng, 0.7, 0.2)
    sim = BoundarySimulator(st, p_star, clock=Clock.from_seed(1))
    oracle = sum(rate for _, rate in boundary_rates(st, p_star))
    assert sim.table.total == pytest.approx(oracle, rel=1e-9)


def test_segment_state_validation():
    with pytest.raises(ValueError):
        BoundaryState(5, 3, [], 0.5, 0.5)
    with pytest.raises(ValueError):
        BoundaryState(1, 2, [0, 1], 1.5, 0.0)


def test_empty_start_zero_horizon(p_star):
    rep = simulate_segment(
        empty_segment(1, 30, 1.0, 0.0), p_star, 0.0,
        clock=Clock.from_seed(2), burn_in=0.0, batches=1,
        product_sets=[(5,), (6,)],
    )
    assert all(v == 0.0 for v in rep.product_averages.values())


def test_halfline_requires_positive_drift():
    symmetric = RateKernel({1: 1, -1: 1, 2: 1, -2: 1})
    with pytest.raises(ValueError, match="drift"):
        run_half_line_creation(100, symmetric, 10.0, seed=1)


def test_density_monotone_in_reservoir_grid(p_star):
    # stationary bulk density is nondecreasing in both reservoir densities
    grid = {}
    mid = (20,)
    for i, lam in enumerate((0.2, 0.5, 0.8)):
        for j, rho in enumerate((0.0, 0.3, 0.6)):
            if lam < rho:
                continue
            samples = []
            for r in range(4):
                rep = simulate_segment(
                    empty_segment(1, 40, lam, rho), p_star, 300.0,
                    clock=Clock.from_seed(900 + 10 * i + j, r),
                    burn_in=0.5, batches=5, product_sets=[mid],
                )
                samples.extend(b[mid] for b in rep.batch_product_averages)
            grid[(lam, rho)] = mean_se(samples)
    tol = 3.0
    for (lam, rho), (m, se) in grid.items():
        for (lam2, rho2), (m2, se2) in grid.items():
            if lam2 >= lam and rho2 >= rho:
                assert m2 - m >= -tol * math.hypot(se, se2), (
                    (lam, rho, m), (lam2, rho2, m2)
                )


def test_current_bound_trivial_cases(p_star):
    assert drift_mean(p_star) * max(0.0, 0.0) == 0.0
    out = current_bound_check(1, 40, p_star, 0.0, 0.0, seed=3,
                              horizon=40.0, burn_in=0.5, replicas=2)
    assert out["bound"] == 0.0
    assert out["passed"]
    # bound arithmetic for mixed densities
    out2 = current_bound_check(1, 40, p_star, 1.0, 0.5, seed=4,
                               horizon=40.0, burn_in=0.5, replicas=2)
    assert out2["bound"] == pytest.approx(0.25)


def test_current_bound_rejects_short_segment(p_star):
    with pytest.raises(ValueError):
        current_bound_check(1, 4, p_star, 0.5, 0.0, seed=5)


def test_three_class_initial_classes(p_star):
    st = step_state(20)
    sim = ThreeClassSimulator(st, p_star, clock=Clock.from_seed(6))
    assert sim.class_of(-1) == 1
    assert sim.class_of(1) == 2 and sim.class_of(2) == 2
    assert sim.class_of(3) == 3
    counts = sim.class_counts()
    assert sum(counts) == 40
    assert counts == (20, 2, 18)


def test_three_class_zero_horizon_probabilities(p_star):
    out = run_three_class(20, p_star, 0.0, [(1,), ()], seed=7, replicas=8)
    mean_b1, _, n = out["estimates"][(1,)]
    assert n == 8
    assert mean_b1 == 0.0  # site threshold+1 starts with a third-class hole
    mean_empty, _, _ = out["estimates"][()]
    assert mean_empty == 1.0  # vacuous event


def test_three_class_counts_conserved_and_class3_monotone(p_star):
    st = step_state(40)
    sim = ThreeClassSimulator(st, p_star, clock=Clock.from_seed(8), monitor=True)
    last_c3 = sim.class_counts()[2]
    for k in range(1, 11):
        sim.run_to(k * 1.5)
        counts = sim.class_counts()
        assert sum(counts) == 80
        assert counts[2] <= last_c3
        last_c3 = counts[2]
    assert sim.boundary_clear
    assert sim.class3_entered == 0
    # classes match occupancy: particles first class, holes never
    for s in range(-40, 41):
        if s == 0:
            continue
        assert (sim.class_of(s) == 1) == (st.occupancy(s) == 1)


def test_three_class_dominates_plain_occupation(p_star):
    # the never-visited indicator dominates plain occupancy at the shifted sites
    sets = [(1, 2)]
    cls = run_three_class(60, p_star, 8.0, sets, seed=9, replicas=300)
    blk = run_blockage_indicator(60, p_star, 8.0, sets, seed=10, replicas=300)
    m3, s3, _ = cls["estimates"][(1, 2)]
    mb, sb, _ = blk["estimates"][(1, 2)]
    assert mb <= m3 + 3 * math.hypot(s3, sb)


def test_symmetric_part_profile_is_monotone(p_star):
    # keep only the symmetric part of the kernel: with a full left reservoir
    # and an empty right drain the stationary profile decreases across the
    # segment (order preserved from the step-like boundary data)
    sym = RateKernel({z: min(p_star.rate(z), p_star.rate(-z)) for z in p_star.displacements()})
    probes = [(5,), (12,), (19,), (26,)]
    samples = {s: [] for s in probes}
    for r in range(6):
        rep = simulate_segment(
            empty_segment(1, 30, 1.0, 0.0), sym, 2000.0,
            clock=Clock.from_seed(300, r), burn_in=0.5, batches=5,
            product_sets=probes,
        )
        for s in probes:
            samples[s].extend(b[s] for b in rep.batch_product_averages)
    stats = {s: mean_se(samples[s]) for s in probes}
    for a, b in zip(probes, probes[1:]):
        ma, sa = stats[a]
        mb, sb = stats[b]
        assert ma - mb >= -3 * math.hypot(sa, sb), (a, b, stats)


def test_halfline_creation_runs_and_reports(p_star):
    out = run_half_line_creation(60, p_star, 30.0, seed=11, replicas=2,
                                 burn_in=0.2, batches=5, window=(10, 40))
    assert 0.0 <= out["single"].mean <= 1.0
    assert 0.0 <= out["pair"].mean <= 1.0
    assert len(out["site_averages"]) == 30
