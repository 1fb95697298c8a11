"""Boundary-driven exclusion on a finite segment, and the three-class tracker.

The segment process holds sites m..n with creation/destruction events at
both edges standing in for infinite reservoirs at densities lambda (left)
and rho (right): a vacant near-edge site gains a particle at the total rate
of in-range jumps from the reservoir side, an occupied one loses its
particle at the total rate of jumps out, weighted by the reservoir's vacancy.

The half-line-with-creation process is the lambda=1, rho=0 segment started
empty.  The three-class tracker runs the obstacle process while giving every
hole a persistent identity and a class: holes that have visited the sites
left of a threshold are second class, holes that never have are third class;
particles are first class.  Class counts and the never-visited indicator
feed the comparison checks against the half-line process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .event_core import Clock, DrawBuffer, RateTable
from .kernels import RateKernel, drift_mean
from .observables import batch_ci, cesaro_translate
from . import environment


@dataclass
class BoundaryState:
    """Occupancy of sites m..n with reservoir densities at both edges."""

    m: int
    n: int
    occ: list[int]
    lam: float
    rho: float

    def __post_init__(self):
        if self.m > self.n:
            raise ValueError("need m <= n")
        if len(self.occ) != self.n - self.m + 1:
            raise ValueError("occupancy length must match the segment")
        for d in (self.lam, self.rho):
            if not 0.0 <= d <= 1.0:
                raise ValueError("reservoir densities must lie in [0, 1]")

    def occupancy(self, site: int) -> int:
        if not self.m <= site <= self.n:
            raise KeyError(site)
        return self.occ[site - self.m]

    def particle_count(self) -> int:
        return sum(self.occ)


def empty_segment(m: int, n: int, lam: float, rho: float) -> BoundaryState:
    return BoundaryState(m, n, [0] * (n - m + 1), lam, rho)


def bernoulli_segment(
    m: int, n: int, density: float, rng: np.random.Generator, lam: float, rho: float
) -> BoundaryState:
    occ = (rng.random(n - m + 1) < density).astype(int).tolist()
    return BoundaryState(m, n, occ, lam, rho)


def boundary_rates(state: BoundaryState, p: RateKernel) -> list[tuple[tuple, float]]:
    """Enumerate the currently possible events with their rates.

    Entries are ((kind, ...), rate) with kinds "ex" (interior exchange),
    "create" and "destroy" (edge events at a site).  Used as the brute-force
    oracle for the incremental table and by the tests.
    """
    out = []
    m, n, occ = state.m, state.n, state.occ
    span = p.range_
    for x in range(m, n + 1):
        if not occ[x - m]:
            continue
        for d in p.displacements():
            y = x + d
            if m <= y <= n and not occ[y - m]:
                out.append((("ex", x, y), p.rate(d)))
    for y in range(m, min(m + span, n + 1)):
        reach = sum(p.rate(k) for k in range(y - m + 1, span + 1))
        back = sum(p.rate(-k) for k in range(y - m + 1, span + 1))
        if not occ[y - m] and state.lam * reach > 0:
            out.append((("create", y), state.lam * reach))
        if occ[y - m] and (1.0 - state.lam) * back > 0:
            out.append((("destroy", y), (1.0 - state.lam) * back))
    for x in range(max(n - span + 1, m), n + 1):
        reach = sum(p.rate(k) for k in range(n - x + 1, span + 1))
        back = sum(p.rate(-k) for k in range(n - x + 1, span + 1))
        if occ[x - m] and (1.0 - state.rho) * reach > 0:
            out.append((("destroy", x), (1.0 - state.rho) * reach))
        if not occ[x - m] and state.rho * back > 0:
            out.append((("create", x), state.rho * back))
    return out


class _ProductTracker:
    """Lazily integrated time averages of occupancy products over site sets."""

    def __init__(self, sets: Sequence[tuple[int, ...]], occ_at, start: float):
        self.sets = [tuple(sorted(s)) for s in sets]
        self._occ_at = occ_at
        self.integrals = [0.0] * len(self.sets)
        self._value = [self._eval(k) for k in range(len(self.sets))]
        self._last = [start] * len(self.sets)
        self._by_site: dict[int, list[int]] = {}
        for k, s in enumerate(self.sets):
            for site in s:
                self._by_site.setdefault(site, []).append(k)

    def _eval(self, k: int) -> int:
        v = 1
        for site in self.sets[k]:
            v &= self._occ_at(site)
        return v

    def touch(self, site: int, now: float) -> None:
        """Settle integrals of products containing ``site`` before it flips."""
        for k in self._by_site.get(site, ()):
            self.integrals[k] += self._value[k] * (now - self._last[k])
            self._last[k] = now

    def refresh(self, site: int) -> None:
        for k in self._by_site.get(site, ()):
            self._value[k] = self._eval(k)

    def flush(self, now: float) -> None:
        for k in range(len(self.sets)):
            self.integrals[k] += self._value[k] * (now - self._last[k])
            self._last[k] = now

    def snapshot(self) -> tuple[float, ...]:
        return tuple(self.integrals)


class BoundarySimulator:
    """Exact event-driven simulator for the segment with reservoirs."""

    def __init__(
        self,
        state: BoundaryState,
        p: RateKernel,
        *,
        clock: Clock,
        cuts: Sequence[float] = (),
        product_sets: Sequence[tuple[int, ...]] = (),
    ):
        if state.n - state.m + 1 < 2 * p.range_ + 1:
            raise ValueError("segment shorter than twice the kernel range")
        self.state = state
        self.p = p
        self.clock = clock
        self._draw = DrawBuffer(clock.rng)
        self.events = 0
        m, n = state.m, state.n
        self._m, self._n = m, n
        self._occ = state.occ
        self._disp = list(p.displacements())
        self._prate = [p.rate(d) for d in self._disp]
        self._nd = len(self._disp)
        span = p.range_

        n_sites = n - m + 1
        self._ex_base = 0
        n_ex = n_sites * self._nd
        self._b_base = n_ex
        self._b_slots: list[tuple[int, float, float]] = []
        for y in range(m, m + span):
            reach = sum(p.rate(k) for k in range(y - m + 1, span + 1))
            back = sum(p.rate(-k) for k in range(y - m + 1, span + 1))
            self._b_slots.append((y, state.lam * reach, (1.0 - state.lam) * back))
        for x in range(n - span + 1, n + 1):
            reach = sum(p.rate(k) for k in range(n - x + 1, span + 1))
            back = sum(p.rate(-k) for k in range(n - x + 1, span + 1))
            self._b_slots.append((x, state.rho * back, (1.0 - state.rho) * reach))
        self._n_slots = self._b_base + 2 * len(self._b_slots)

        self.table = RateTable((i, 0.0) for i in range(self._n_slots))
        self._touch = self._build_touch_lists()
        for eid in range(self._n_slots):
            self.table.set_rate(eid, self._slot_rate(eid))
        self.table.recompute()

        self.cut_boundaries = [float(c) for c in cuts]
        self.cut_counts = [0] * len(self.cut_boundaries)
        self.products = _ProductTracker(
            product_sets, lambda s: self._occ[s - m], clock.now
        )
        self.created = 0
        self.destroyed = 0
        self.initial_particles = state.particle_count()

    def _slot_ex(self, site: int, k: int) -> int:
        return self._ex_base + (site - self._m) * self._nd + k

    def _build_touch_lists(self) -> list[tuple[int, ...]]:
        m, n = self._m, self._n
        touch: list[set[int]] = [set() for _ in range(n - m + 1)]
        for site in range(m, n + 1):
            for k, d in enumerate(self._disp):
                tgt = site + d
                if m <= tgt <= n:
                    eid = self._slot_ex(site, k)
                    touch[site - m].add(eid)
                    touch[tgt - m].add(eid)
        for j, (site, _, _) in enumerate(self._b_slots):
            touch[site - m].add(self._b_base + 2 * j)
            touch[site - m].add(self._b_base + 2 * j + 1)
        return [tuple(sorted(s)) for s in touch]

    def _slot_rate(self, eid: int) -> float:
        if eid < self._b_base:
            off, k = divmod(eid, self._nd)
            site = off + self._m
            if not self._occ[off]:
                return 0.0
            tgt = site + self._disp[k]
            if tgt < self._m or tgt > self._n or self._occ[tgt - self._m]:
                return 0.0
            return self._prate[k]
        j, which = divmod(eid - self._b_base, 2)
        site, create, destroy = self._b_slots[j]
        bit = self._occ[site - self._m]
        return (create if not bit else 0.0) if which == 0 else (destroy if bit else 0.0)

    def _refresh_sites(self, sites: Iterable[int]) -> None:
        seen = set()
        for s in sites:
            for eid in self._touch[s - self._m]:
                if eid not in seen:
                    seen.add(eid)
                    self.table.set_rate(eid, self._slot_rate(eid))

    def _flip(self, site: int, bit: int, now: float) -> None:
        self.products.touch(site, now)
        self._occ[site - self._m] = bit
        self.products.refresh(site)

    # hooks for subclasses tracking hole identities
    def _on_exchange(self, x: int, y: int) -> None:
        pass

    def _on_boundary(self, site: int, created: bool) -> None:
        pass

    def _dispatch(self, eid: int, now: float) -> None:
        if eid < self._b_base:
            off, k = divmod(eid, self._nd)
            x = off + self._m
            y = x + self._disp[k]
            self._flip(x, 0, now)
            self._flip(y, 1, now)
            for idx, b in enumerate(self.cut_boundaries):
                if x < b < y:
                    self.cut_counts[idx] += 1
                elif y < b < x:
                    self.cut_counts[idx] -= 1
            self._on_exchange(x, y)
            self._refresh_sites((x, y))
        else:
            j, which = divmod(eid - self._b_base, 2)
            site, _, _ = self._b_slots[j]
            if which == 0:
                self._flip(site, 1, now)
                self.created += 1
                self._on_boundary(site, True)
            else:
                self._flip(site, 0, now)
                self.destroyed += 1
                self._on_boundary(site, False)
            self._refresh_sites((site,))

    def run_to(self, t_end: float) -> None:
        clock = self.clock
        draw = self._draw
        while True:
            total = self.table.total
            if total <= 0.0:
                # frozen segment (e.g. zero reservoirs around an empty or full
                # configuration) is a legal absorbing state: time just passes
                clock.now = t_end
                return
            t_next = clock.now + draw.exponential() / total
            if t_next >= t_end:
                clock.now = t_end
                return
            clock.now = t_next
            eid = self.table.sample_point(draw.uniform() * total)
            self._dispatch(eid, t_next)
            self.events += 1


@dataclass
class SegmentReport:
    """Time-averaged products and cut currents from one segment replica."""

    horizon: float
    burn_in_time: float
    events: int
    product_averages: dict[tuple[int, ...], float]
    batch_product_averages: list[dict[tuple[int, ...], float]]
    cut_rates: dict[float, float]
    cut_batch_rates: list[dict[float, float]]


def simulate_segment(
    state: BoundaryState,
    p: RateKernel,
    horizon: float,
    *,
    clock: Clock,
    burn_in: float = 0.2,
    batches: int = 10,
    cuts: Sequence[float] = (),
    product_sets: Sequence[tuple[int, ...]] = (),
) -> SegmentReport:
    """Run a segment replica, averaging products over the burned-in window."""
    sim = BoundarySimulator(state, p, clock=clock, cuts=cuts, product_sets=product_sets)
    burn_t = burn_in * horizon
    edges = [burn_t + (horizon - burn_t) * k / batches for k in range(batches + 1)]
    prod_marks = []
    cut_marks = []
    for t in edges:
        sim.run_to(t)
        sim.products.flush(t)
        prod_marks.append(sim.products.snapshot())
        cut_marks.append(list(sim.cut_counts))

    keys = sim.products.sets
    span_b = horizon - burn_t
    first, last = prod_marks[0], prod_marks[-1]
    product_averages = {
        key: (last[k] - first[k]) / span_b if span_b > 0 else 0.0
        for k, key in enumerate(keys)
    }
    batch_avgs = []
    cut_batch = []
    for a, b in zip(range(batches), range(1, batches + 1)):
        dt = edges[b] - edges[a]
        batch_avgs.append(
            {
                key: (prod_marks[b][k] - prod_marks[a][k]) / dt if dt > 0 else 0.0
                for k, key in enumerate(keys)
            }
        )
        cut_batch.append(
            {
                c: (cut_marks[b][i] - cut_marks[a][i]) / dt if dt > 0 else 0.0
                for i, c in enumerate(sim.cut_boundaries)
            }
        )
    cut_rates = {
        c: (cut_marks[-1][i] - cut_marks[0][i]) / span_b if span_b > 0 else 0.0
        for i, c in enumerate(sim.cut_boundaries)
    }
    return SegmentReport(
        horizon=horizon,
        burn_in_time=burn_t,
        events=sim.events,
        product_averages=product_averages,
        batch_product_averages=batch_avgs,
        cut_rates=cut_rates,
        cut_batch_rates=cut_batch,
    )


def run_half_line_creation(
    n: int,
    p: RateKernel,
    horizon: float,
    *,
    seed: int,
    replicas: int = 1,
    burn_in: float = 0.2,
    batches: int = 10,
    window: tuple[int, int] = (50, 150),
    pair_adjacent: bool = True,
) -> dict:
    """Half-line process with full creation pressure, truncated at site n.

    Runs the (1..n) segment with lambda=1, rho=0 from the empty state and
    reports the window Cesaro averages of single-site densities and of
    adjacent-pair products, with batch-means CIs across replicas x batches.
    """
    if drift_mean(p) <= 0:
        raise ValueError("half-line creation runs need a positive drift mean")
    if n < 4 * p.range_:
        raise ValueError("segment too short relative to the kernel range")
    lo, hi = window
    singles = [(s,) for s in range(lo + 1, hi + 1)]
    pairs = [(s, s + 1) for s in range(lo + 1, hi + 1)] if pair_adjacent else []
    sets = singles + pairs
    reports = []
    for r in range(replicas):
        clock = Clock.from_seed(seed, r)
        state = empty_segment(1, n, 1.0, 0.0)
        reports.append(
            simulate_segment(
                state, p, horizon,
                clock=clock, burn_in=burn_in, batches=batches, product_sets=sets,
            )
        )
    offsets = range(1, hi - lo + 1)
    single_samples = []
    pair_samples = []
    for rep in reports:
        for bavg in rep.batch_product_averages:
            single_samples.append(cesaro_translate(bavg, (lo,), offsets))
            if pair_adjacent:
                pair_samples.append(cesaro_translate(bavg, (lo, lo + 1), offsets))
    out = {
        "reports": reports,
        "site_averages": {
            s: float(np.mean([rep.product_averages[(s,)] for rep in reports]))
            for s in range(lo + 1, hi + 1)
        },
        "single": batch_ci(single_samples, burn_in=burn_in),
        "single_point": cesaro_translate(
            {k: float(np.mean([rep.product_averages[k] for rep in reports])) for k in reports[0].product_averages},
            (lo,),
            offsets,
        ),
    }
    if pair_adjacent:
        out["pair"] = batch_ci(pair_samples, burn_in=burn_in)
    return out


def current_bound_check(
    m: int,
    n: int,
    p: RateKernel,
    lam: float,
    rho: float,
    *,
    seed: int,
    horizon: float = 1200.0,
    burn_in: float = 0.5,
    replicas: int = 8,
    batches: int = 10,
    confidence: float = 0.99,
) -> dict:
    """Stationary mid-segment current against the reservoir bound.

    The bound is drift_mean * max(lam(1-lam), rho(1-rho)); the measured
    counting current at the mid bond should not fall below it by more than
    the CI halfwidth.
    """
    if n - m <= 2 * p.range_:
        raise ValueError("segment must be longer than twice the kernel range")
    if lam < rho:
        raise ValueError("expected lam >= rho")
    mid = (m + n) // 2
    cut = mid + 0.5
    samples = []
    for r in range(replicas):
        clock = Clock.from_seed(seed, r)
        state = empty_segment(m, n, lam, rho)
        rep = simulate_segment(
            state, p, horizon,
            clock=clock, burn_in=burn_in, batches=batches, cuts=(cut,),
        )
        samples.extend(b[cut] for b in rep.cut_batch_rates)
    ci = batch_ci(samples, confidence=confidence, burn_in=burn_in)
    bound = drift_mean(p) * max(lam * (1.0 - lam), rho * (1.0 - rho))
    return {
        "measured": ci,
        "bound": bound,
        "passed": ci.mean >= bound - ci.halfwidth,
        "bond": (mid, mid + 1),
    }


class ThreeClassSimulator(environment.EnvSimulator):
    """Obstacle process with persistent hole classes.

    Holes start second class on the sites up to ``threshold`` and third
    class beyond it; a third-class hole is relabeled second class the moment
    it lands on a site <= threshold.  Particles are first class.  Classes
    attach to holes, so they ride along when a particle swaps into a hole.
    """

    def __init__(self, state: environment.EnvState, p: RateKernel, *, clock: Clock,
                 threshold: int | None = None, **kwargs):
        self.threshold = p.range_ if threshold is None else threshold
        w = state.window
        if w <= 2 * self.threshold + 2:
            raise ValueError("window too small for the class threshold")
        self.cls = [0] * (2 * w + 1)
        for s in range(-w, w + 1):
            if s == 0:
                continue
            if state.occ[s + w]:
                self.cls[s + w] = 1
            else:
                self.cls[s + w] = 2 if s <= self.threshold else 3
        self.class3_entered = 0
        super().__init__(state, p, None, clock=clock, **kwargs)

    def class_of(self, site: int) -> int:
        return self.cls[site + self._w]

    def class_counts(self) -> tuple[int, int, int]:
        counts = [0, 0, 0]
        for s in range(-self._w, self._w + 1):
            if s != 0:
                counts[self.cls[s + self._w] - 1] += 1
        return tuple(counts)

    def _dispatch(self, eid: int) -> None:
        w = self._w
        if eid < self._b_base:
            site, k = divmod(eid - self._ex_base, self._nd)
            x = site - w
            y = x + self._disp[k]
            hole = self.cls[y + w]
            self.cls[y + w] = 1
            self.cls[x + w] = 2 if (hole == 3 and x <= self.threshold) else hole
        elif eid < self._t_base:
            j, which = divmod(eid - self._b_base, 2)
            site, _, _ = self._b_slots[j]
            if which == 0:
                self.cls[site + w] = 1  # a hole identity leaves through this edge
            else:
                self.cls[site + w] = 3  # a fresh never-visited hole enters
                self.class3_entered += 1
        super()._dispatch(eid)


def run_three_class(
    window: int,
    p: RateKernel,
    horizon: float,
    site_sets: Sequence[tuple[int, ...]],
    *,
    seed: int,
    replicas: int,
    threshold: int | None = None,
) -> dict:
    """Monte Carlo estimates of 'no third-class hole anywhere on the set'.

    Each requested set B is evaluated at sites B + threshold at the final
    time; returns per-set indicator means, standard errors, and the count of
    invalid (boundary-flagged) replicas.
    """
    thr = p.range_ if threshold is None else threshold
    hits = {tuple(B): [] for B in site_sets}
    invalid = 0
    class3_in = 0
    for r in range(replicas):
        clock = Clock.from_seed(seed, r)
        state = environment.step_state(window)
        sim = ThreeClassSimulator(state, p, clock=clock, threshold=thr, monitor=True)
        sim.run_to(horizon)
        if not sim.boundary_clear:
            invalid += 1
            continue
        class3_in += sim.class3_entered
        for B in hits:
            ok = all(sim.class_of(x + thr) != 3 for x in B)
            hits[B].append(1.0 if ok else 0.0)
    out = {"invalid": invalid, "class3_entered": class3_in, "estimates": {}}
    for B, vals in hits.items():
        mean = float(np.mean(vals)) if vals else float("nan")
        se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        out["estimates"][B] = (mean, se, len(vals))
    return out


def run_blockage_indicator(
    window: int,
    p: RateKernel,
    horizon: float,
    site_sets: Sequence[tuple[int, ...]],
    *,
    seed: int,
    replicas: int,
    offset: int | None = None,
) -> dict:
    """Plain obstacle-process estimates of 'all of A + offset occupied' at the
    final time (offset defaults to the kernel range)."""
    off = p.range_ if offset is None else offset
    hits = {tuple(A): [] for A in site_sets}
    invalid = 0
    for r in range(replicas):
        clock = Clock.from_seed(seed, r)
        state = environment.step_state(window)
        sim = environment.EnvSimulator(state, p, None, clock=clock, monitor=True)
        sim.run_to(horizon)
        if not sim.boundary_clear:
            invalid += 1
            continue
        for A in hits:
            ok = all(state.occupancy(x + off) == 1 for x in A)
            hits[A].append(1.0 if ok else 0.0)
    out = {"invalid": invalid, "estimates": {}}
    for A, vals in hits.items():
        mean = float(np.mean(vals)) if vals else float("nan")
        se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        out["estimates"][A] = (mean, se, len(vals))
    return out
