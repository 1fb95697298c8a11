import numpy as np
import pytest

from exclusion_lab.event_core import Clock
from exclusion_lab.environment import TorusSimulator
from exclusion_lab.observables import (
    CurrentSpec,
    agree_within,
    batch_ci,
    cesaro_translate,
    g_profile,
    instantaneous_current,
    mean_se,
    occupancy_product,
)


def _step_window(w):
    occ = {s: 1 if s < 0 else 0 for s in range(-w, w + 1) if s != 0}
    return occ


def test_instantaneous_current_step_config(p_star):
    occ = _step_window(6)
    assert instantaneous_current(occ, p_star, (-1, 1)) == pytest.approx(1.0)


def test_instantaneous_current_empty_and_full(p_star):
    empty = {s: 0 for s in range(-6, 7) if s != 0}
    full = {s: 1 for s in range(-6, 7) if s != 0}
    assert instantaneous_current(empty, p_star, (-1, 1)) == 0.0
    assert instantaneous_current(full, p_star, (2, 3)) == 0.0


def test_instantaneous_current_rejects_edge_bond(p_star):
    occ = _step_window(4)
    with pytest.raises(ValueError, match="window edge"):
        instantaneous_current(occ, p_star, (3, 4))


def test_current_spec_validates_bond():
    with pytest.raises(ValueError):
        CurrentSpec((2, 5))
    with pytest.raises(ValueError):
        CurrentSpec((1, 2), mode="sideways")
    assert CurrentSpec((-1, 1)).boundary == 0.0
    assert CurrentSpec((4, 5)).boundary == 4.5


def test_cylinder_spec_naming_and_eval():
    spec = occupancy_product([-1], [1])
    assert spec.name == "avg[x=-1](1-x=1)"
    assert spec.evaluate({-1: 1, 1: 0}) == 1.0
    assert spec.evaluate({-1: 1, 1: 1}) == 0.0
    with pytest.raises(ValueError):
        occupancy_product([2], [2])


def test_cesaro_constant_density():
    avgs = {(s,): 0.37 for s in range(1, 50)}
    assert cesaro_translate(avgs, (0,), range(1, 50)) == pytest.approx(0.37)


def test_cesaro_synthetic_product_measure(rng):
    # product-measure snapshots at density 0.5: pair average ~ 0.25
    sites = 60
    snaps = rng.random((4000, sites)) < 0.5
    pair_avg = {}
    for s in range(sites - 1):
        pair_avg[(s, s + 1)] = float((snaps[:, s] & snaps[:, s + 1]).mean())
    est = cesaro_translate(pair_avg, (0, 1), range(1, sites - 2))
    assert est == pytest.approx(0.25, abs=0.01)


def test_cesaro_rejects_out_of_region():
    avgs = {(s,): 0.2 for s in range(5)}
    with pytest.raises(ValueError, match="outside"):
        cesaro_translate(avgs, (0,), range(1, 10))


def test_cesaro_window_shift_changes_estimate_by_range_over_n():
    rng = np.random.default_rng(3)
    avgs = {(s,): float(rng.random()) for s in range(200)}
    n = 150
    a = cesaro_translate(avgs, (0,), range(1, n + 1))
    b = cesaro_translate(avgs, (0,), range(2, n + 2))
    assert abs(a - b) <= 1.0 / n


def test_g_profile_trivial_cases(p_star):
    zeros = {s: 0.0 for s in range(-5, 30)}
    assert g_profile(zeros, p_star, range(2, 10)) == pytest.approx([0.0] * 8)
    ones = {s: 1.0 for s in range(-5, 30)}
    vals = g_profile(ones, p_star, range(2, 10))
    # weights: |j|=0 contributes p(1)+p(2), |j|=1 contributes p(2) each side
    assert vals == pytest.approx([5.0] * 8)


def test_batch_ci_constant_series():
    ci = batch_ci([2.0] * 10)
    assert ci.halfwidth == 0.0 and ci.degenerate


def test_batch_ci_two_batches_uses_one_dof():
    ci = batch_ci([0.0, 1.0], confidence=0.95)
    # t quantile with 1 dof at 97.5% is 12.706; se = sqrt(0.5/2) = 0.5
    assert ci.mean == pytest.approx(0.5)
    assert ci.halfwidth == pytest.approx(12.706 * 0.5, rel=0.001)


def test_batch_ci_requires_two_batches():
    with pytest.raises(ValueError):
        batch_ci([1.0])


def test_batch_ci_coverage_on_iid_normal():
    rng = np.random.default_rng(12)
    trials = 10_000
    batches = 10
    data = rng.normal(0.0, 1.0, size=(trials, batches))
    covered = 0
    for row in data:
        ci = batch_ci(list(row), confidence=0.95)
        covered += ci.lo <= 0.0 <= ci.hi
    assert covered / trials == pytest.approx(0.95, abs=0.02)


def test_halfwidth_shrinks_like_inverse_sqrt_samples():
    rng = np.random.default_rng(4)
    hw = []
    for n in (40, 160, 640):
        widths = [batch_ci(list(rng.normal(size=n))).halfwidth for _ in range(60)]
        hw.append(np.mean(widths))
    assert hw[0] / hw[1] == pytest.approx(2.0, rel=0.15)
    assert hw[1] / hw[2] == pytest.approx(2.0, rel=0.15)


def test_counting_and_instantaneous_currents_agree_on_ring(p_star):
    # same stationary mean, measured two ways on the ring at half filling
    count_rates, inst_rates = [], []
    horizon = 150.0
    for r in range(12):
        clock = Clock.from_seed(77, r)
        sim = TorusSimulator(64, p_star, 0.5, clock=clock, reference_bond=(10, 11))
        sim.run_to(horizon)
        count_rates.append(sim.ref_count / horizon)
        inst_rates.append(sim.averager.averages(horizon)["inst_ref"])
    mc, sc = mean_se(count_rates)
    mi, si = mean_se(inst_rates)
    assert agree_within(mc, sc, mi, si, 3.0)


def test_agree_within_basic():
    assert agree_within(1.0, 0.1, 1.2, 0.1, 3.0)
    assert not agree_within(1.0, 0.01, 1.2, 0.01, 3.0)
