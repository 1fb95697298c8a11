"""Exclusion dynamics seen from the tagged particle, on a finite window.

The state is the occupancy of sites -W..W with the origin left out (the
tagged particle's seat).  Bulk particles exchange with vacant sites at
kernel rates; the tagged particle's nearest-neighbor jumps shift the whole
window and resample the site entering at the far edge from the matching
reservoir density.  The static-obstacle process is the special case with no
tagged jumps.  Reservoir creation/destruction events at the window edges
mimic an infinite exterior at fixed densities, and a boundary-influence
monitor flags runs whose disturbance cone reaches the edges.

Also contains the periodic-ring simulator used for homogeneous
cross-checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .event_core import Clock, DrawBuffer, RateTable, TimeAverager
from .kernels import RateKernel, TaggedKernel
from .observables import CylinderSpec, CurrentSpec, instantaneous_current


@dataclass
class EnvState:
    """Occupancy window around the tagged particle plus crossing counters.

    ``occ[site + window]`` holds the bit for ``site``; the slot at the
    origin exists but is pinned to 0.  Counters: ``right_crossings`` /
    ``left_crossings`` count bulk particles crossing the (-1, 1) cut,
    ``tagged_right`` / ``tagged_left`` count tagged jumps.
    """

    window: int
    occ: list[int]
    lambda_left: float = 1.0
    rho_right: float = 0.0
    right_crossings: int = 0
    left_crossings: int = 0
    tagged_right: int = 0
    tagged_left: int = 0

    def __post_init__(self):
        if len(self.occ) != 2 * self.window + 1:
            raise ValueError("occupancy must cover sites -W..W including the origin slot")
        if self.occ[self.window] != 0:
            raise ValueError("origin slot must be empty")
        for d in (self.lambda_left, self.rho_right):
            if not 0.0 <= d <= 1.0:
                raise ValueError("reservoir densities must lie in [0, 1]")

    @property
    def net_crossings(self) -> int:
        return self.right_crossings - self.left_crossings

    @property
    def displacement(self) -> int:
        return self.tagged_right - self.tagged_left

    def occupancy(self, site: int) -> int:
        if site == 0 or abs(site) > self.window:
            raise KeyError(site)
        return self.occ[site + self.window]

    def snapshot(self) -> dict[int, int]:
        w = self.window
        return {s: self.occ[s + w] for s in range(-w, w + 1) if s != 0}

    def particle_count(self) -> int:
        return sum(self.occ)

    def sites(self) -> Iterable[int]:
        w = self.window
        return (s for s in range(-w, w + 1) if s != 0)


def step_state(window: int, lambda_left: float = 1.0, rho_right: float = 0.0) -> EnvState:
    """Fully occupied left of the origin, empty right of it."""
    occ = [1] * window + [0] + [0] * window
    return EnvState(window, occ, lambda_left, rho_right)


def bernoulli_state(
    window: int, density: float, rng: np.random.Generator,
    lambda_left: float | None = None, rho_right: float | None = None,
) -> EnvState:
    """Independent Bernoulli(density) occupancies; reservoirs default to the same density."""
    occ = (rng.random(2 * window + 1) < density).astype(int).tolist()
    occ[window] = 0
    lam = density if lambda_left is None else lambda_left
    rho = density if rho_right is None else rho_right
    return EnvState(window, occ, lam, rho)


def explicit_state(
    window: int, bits: Sequence[int], lambda_left: float = 1.0, rho_right: float = 0.0
) -> EnvState:
    """Build from explicit bits listed for sites -W..-1, 1..W (no origin slot)."""
    if len(bits) != 2 * window:
        raise ValueError(f"expected {2 * window} bits, got {len(bits)}")
    occ = [int(b) for b in bits[:window]] + [0] + [int(b) for b in bits[window:]]
    if any(b not in (0, 1) for b in occ):
        raise ValueError("occupancies must be 0/1")
    return EnvState(window, occ, lambda_left, rho_right)


def exchange_events(state: EnvState, p: RateKernel) -> list[tuple[tuple[int, int], float]]:
    """Enumerate every currently possible bulk jump (x -> y) with its rate."""
    out = []
    w = state.window
    occ = state.occ
    for x in state.sites():
        if not occ[x + w]:
            continue
        for d in p.displacements():
            y = x + d
            if y == 0 or abs(y) > w or occ[y + w]:
                continue
            out.append(((x, y), p.rate(d)))
    return out


def apply_exchange(state: EnvState, x: int, y: int) -> None:
    """Move the particle at x to the vacant site y, updating cut counters."""
    w = state.window
    if state.occ[x + w] != 1 or state.occ[y + w] != 0 or x == 0 or y == 0:
        raise AssertionError(f"illegal exchange ({x} -> {y})")
    state.occ[x + w] = 0
    state.occ[y + w] = 1
    if x <= -1 and y >= 1:
        state.right_crossings += 1
    elif x >= 1 and y <= -1:
        state.left_crossings += 1


def apply_tagged_shift(state: EnvState, z: int, rng: np.random.Generator) -> None:
    """Shift the window after a tagged jump to the vacant site z in {-1, +1}.

    New occupancy is old occupancy at site + z; the vacated seat at -z is
    empty, and the site entering at the far edge is Bernoulli from the
    reservoir on that side.
    """
    if z not in (-1, 1):
        raise ValueError("tagged jumps are nearest-neighbor")
    w = state.window
    if state.occ[z + w] != 0:
        raise AssertionError(f"tagged jump onto occupied site {z}")
    occ = state.occ
    if z == 1:
        occ[:-1] = occ[1:]
        occ[-1] = 1 if rng.random() < state.rho_right else 0
        state.tagged_right += 1
    else:
        occ[1:] = occ[:-1]
        occ[0] = 1 if rng.random() < state.lambda_left else 0
        state.tagged_left += 1
    occ[w] = 0  # origin slot stays empty


class Absorbed(RuntimeError):
    """Raised when a simulator with no legal events is asked to advance."""


@dataclass
class EnvReport:
    """Counters, time averages and batch data from one replica."""

    horizon: float
    burn_in_time: float
    events: int
    right_crossings: int
    left_crossings: int
    tagged_right: int
    tagged_left: int
    averages_full: dict[str, float]
    averages_burned: dict[str, float]
    batch_averages: list[dict[str, float]]
    cut_rates_burned: dict[str, float]
    cut_batch_rates: list[dict[str, float]]
    cut_totals: dict[str, int]
    snapshots: dict[float, dict[str, int]]
    valid: bool
    monitor_note: str = ""

    @property
    def net_crossings(self) -> int:
        return self.right_crossings - self.left_crossings

    @property
    def displacement(self) -> int:
        return self.tagged_right - self.tagged_left


def _cut_name(boundary: float) -> str:
    if boundary == 0.0:
        return "cut(-1,1)"
    lo = int(math.floor(boundary))
    return f"cut({lo},{lo + 1})"


class EnvSimulator:
    """Exact event-driven simulator for the window dynamics.

    Builds a static table of event slots (one per site/displacement pair,
    plus reservoir and tagged slots) and refreshes only the slots whose
    rates an event can change; a tagged shift moves every coordinate, so it
    triggers a full rebuild (tagged rates are tiny, so this stays cheap).
    """

    def __init__(
        self,
        state: EnvState,
        p: RateKernel,
        q: TaggedKernel | None = None,
        *,
        clock: Clock,
        cuts: Sequence[float] = (0.0,),
        cylinders: Sequence[CylinderSpec] = (),
        instantaneous_bonds: Sequence[tuple[int, int]] = (),
        monitor: bool = False,
    ):
        if q is not None and q.rates and not q.nearest_neighbor:
            raise ValueError("environment runs need a nearest-neighbor tagged kernel")
        if state.window < p.range_:
            raise ValueError("window must be at least the kernel range")
        self.state = state
        self.p = p
        self.q = q
        self.clock = clock
        self._draw = DrawBuffer(clock.rng)
        self.events = 0
        w = state.window
        self._w = w
        self._occ = state.occ
        self._disp = list(p.displacements())
        self._prate = [p.rate(d) for d in self._disp]
        self._nd = len(self._disp)
        span = p.range_

        # slot layout: exchanges, then boundary creation/destruction, then tagged
        n_sites = 2 * w + 1
        self._ex_base = 0
        n_ex = n_sites * self._nd
        self._b_base = n_ex
        self._edge_sites = (
            [(-w + k) for k in range(span)],  # left edge band
            [(w - k) for k in range(span)],   # right edge band
        )
        # per edge site: (create rate factor, destroy rate factor)
        lam, rho = state.lambda_left, state.rho_right
        self._b_slots: list[tuple[int, float, float]] = []  # (site, create_rate, destroy_rate)
        for y in self._edge_sites[0]:
            reach = sum(p.rate(k) for k in range(y - (-w) + 1, span + 1))
            back = sum(p.rate(-k) for k in range(y - (-w) + 1, span + 1))
            self._b_slots.append((y, lam * reach, (1.0 - lam) * back))
        for x in self._edge_sites[1]:
            reach = sum(p.rate(k) for k in range(w - x + 1, span + 1))
            back = sum(p.rate(-k) for k in range(w - x + 1, span + 1))
            self._b_slots.append((x, rho * back, (1.0 - rho) * reach))
        n_b = 2 * len(self._b_slots)  # create slot + destroy slot per entry
        self._t_base = self._b_base + n_b
        self._n_slots = self._t_base + 2  # tagged z=+1, z=-1

        self.table = RateTable((i, 0.0) for i in range(self._n_slots))
        self._touch = self._build_touch_lists()
        self._refresh_all()

        # observable machinery
        self._cyl_specs = list(cylinders)
        self._inst_bonds = [CurrentSpec(b, "instantaneous") for b in instantaneous_bonds]
        names = [c.name for c in self._cyl_specs] + [
            f"inst{b.bond}" for b in self._inst_bonds
        ]
        self.averager = TimeAverager(names, start=clock.now)
        self._evaluators = self._build_evaluators()

        self.cut_boundaries = [float(c) for c in cuts]
        self.cut_names = [_cut_name(c) for c in self.cut_boundaries]
        self.cut_counts = {name: 0 for name in self.cut_names}

        self.monitor = monitor
        self._left_probe: float | None = None   # most negative vacant site seen
        self._right_probe: float | None = None  # most positive occupied site seen
        if monitor:
            for s in state.sites():
                self._note_site(s, state.occ[s + w])

        self.created = 0
        self.destroyed = 0
        self.resampled_in = 0
        self.resampled_out = 0
        self.initial_particles = state.particle_count()

    # --- construction helpers ------------------------------------------------

    def _slot_ex(self, site: int, k: int) -> int:
        return self._ex_base + (site + self._w) * self._nd + k

    def _build_touch_lists(self) -> list[tuple[int, ...]]:
        w = self._w
        touch: list[set[int]] = [set() for _ in range(2 * w + 1)]
        for site in range(-w, w + 1):
            for k, d in enumerate(self._disp):
                src_ok = site != 0 and abs(site) <= w
                tgt = site + d
                if src_ok and tgt != 0 and abs(tgt) <= w:
                    eid = self._slot_ex(site, k)
                    touch[site + w].add(eid)
                    touch[tgt + w].add(eid)
        for j, (site, _, _) in enumerate(self._b_slots):
            touch[site + self._w].add(self._b_base + 2 * j)
            touch[site + self._w].add(self._b_base + 2 * j + 1)
        if self.q is not None:
            touch[1 + w].add(self._t_base)
            touch[-1 + w].add(self._t_base + 1)
        return [tuple(sorted(s)) for s in touch]

    def _ex_rate(self, site: int, k: int) -> float:
        w = self._w
        if site == 0 or abs(site) > w or not self._occ[site + w]:
            return 0.0
        tgt = site + self._disp[k]
        if tgt == 0 or abs(tgt) > w or self._occ[tgt + w]:
            return 0.0
        return self._prate[k]

    def _slot_rate(self, eid: int) -> float:
        if eid < self._b_base:
            site, k = divmod(eid - self._ex_base, self._nd)
            return self._ex_rate(site - self._w, k)
        if eid < self._t_base:
            j, which = divmod(eid - self._b_base, 2)
            site, create, destroy = self._b_slots[j]
            bit = self._occ[site + self._w]
            return (create if not bit else 0.0) if which == 0 else (destroy if bit else 0.0)
        z = 1 if eid == self._t_base else -1
        if self.q is None:
            return 0.0
        return self.q.rate(z) * (0 if self._occ[z + self._w] else 1)

    def _refresh_sites(self, sites: Iterable[int]) -> None:
        seen = set()
        for s in sites:
            for eid in self._touch[s + self._w]:
                if eid not in seen:
                    seen.add(eid)
                    self.table.set_rate(eid, self._slot_rate(eid))

    def _refresh_all(self) -> None:
        for eid in range(self._n_slots):
            self.table.set_rate(eid, self._slot_rate(eid))
        self.table.recompute()

    def _build_evaluators(self):
        evals = []
        w = self._w
        occ = self._occ
        for spec in self._cyl_specs:
            compiled = tuple(
                (coef, tuple((s + w, want) for s, want in factors))
                for coef, factors in spec.terms
            )

            def ev(compiled=compiled):
                val = 0.0
                for coef, factors in compiled:
                    for idx, want in factors:
                        if occ[idx] != want:
                            break
                    else:
                        val += coef
                return val

            evals.append(ev)
        for spec in self._inst_bonds:
            i, j = spec.bond

            def ev_inst(i=i, j=j):
                snap = {
                    s: occ[s + w]
                    for s in range(j - self.p.range_, i + self.p.range_ + 1)
                    if s != 0
                }
                return instantaneous_current(snap, self.p, (i, j))

            evals.append(ev_inst)
        return evals

    def _values(self) -> list[float]:
        return [ev() for ev in self._evaluators]

    # --- monitor -------------------------------------------------------------

    def _note_site(self, site: int, bit: int) -> None:
        if bit == 0 and site < 0:
            if self._left_probe is None or site < self._left_probe:
                self._left_probe = site
        elif bit == 1 and site > 0:
            if self._right_probe is None or site > self._right_probe:
                self._right_probe = site

    @property
    def boundary_clear(self) -> bool:
        span = self.p.range_
        w = self._w
        if self._left_probe is not None and self._left_probe <= -w + span:
            return False
        if self._right_probe is not None and self._right_probe >= w - span:
            return False
        return True

    def monitor_note(self) -> str:
        return f"left_probe={self._left_probe} right_probe={self._right_probe}"

    # --- dynamics ------------------------------------------------------------

    def _dispatch(self, eid: int) -> None:
        w = self._w
        state = self.state
        if eid < self._b_base:
            site, k = divmod(eid - self._ex_base, self._nd)
            x = site - w
            y = x + self._disp[k]
            apply_exchange(state, x, y)
            for name, b in zip(self.cut_names, self.cut_boundaries):
                if x < b < y:
                    self.cut_counts[name] += 1
                elif y < b < x:
                    self.cut_counts[name] -= 1
            if self.monitor:
                self._note_site(x, 0)
                self._note_site(y, 1)
            self._refresh_sites((x, y))
        elif eid < self._t_base:
            j, which = divmod(eid - self._b_base, 2)
            site, _, _ = self._b_slots[j]
            if which == 0:
                self._occ[site + w] = 1
                self.created += 1
                if self.monitor:
                    self._note_site(site, 1)
            else:
                self._occ[site + w] = 0
                self.destroyed += 1
                if self.monitor:
                    self._note_site(site, 0)
            self._refresh_sites((site,))
        else:
            z = 1 if eid == self._t_base else -1
            if self.monitor:
                if self._left_probe is not None:
                    self._left_probe -= z
                if self._right_probe is not None:
                    self._right_probe -= z
            edge_occupied_before = self._occ[0] if z == 1 else self._occ[-1]
            apply_tagged_shift(state, z, self.clock.rng)
            entered = self._occ[-1] if z == 1 else self._occ[0]
            self.resampled_in += entered
            self.resampled_out += edge_occupied_before
            if self.monitor:
                self._note_site(-z, 0)  # the vacated seat
                self._note_site(w if z == 1 else -w, entered)
            self._refresh_all()

    def run_to(self, t_end: float) -> None:
        """Advance to time ``t_end`` exactly, accumulating observables."""
        clock = self.clock
        table = self.table
        draw = self._draw
        acc = self.averager.accumulate
        while True:
            total = table.total
            if total <= 0.0:
                raise Absorbed(f"no events possible at t={clock.now}")
            t_next = clock.now + draw.exponential() / total
            if t_next >= t_end:
                acc(t_end, self._values())
                clock.now = t_end
                return
            acc(t_next, self._values())
            clock.now = t_next
            eid = table.sample_point(draw.uniform() * total)
            self._dispatch(eid)
            self.events += 1


def simulate_env(
    state: EnvState,
    p: RateKernel,
    q: TaggedKernel | None,
    horizon: float,
    *,
    clock: Clock,
    burn_in: float = 0.0,
    batches: int = 1,
    cuts: Sequence[float] = (0.0,),
    cylinders: Sequence[CylinderSpec] = (),
    instantaneous_bonds: Sequence[tuple[int, int]] = (),
    snapshot_times: Sequence[float] = (),
    monitor: bool = False,
) -> EnvReport:
    """Run one replica to ``horizon`` and report counters plus time averages.

    ``burn_in`` is a fraction of the horizon discarded before the averaged
    window, which is split into ``batches`` equal spans for batch means.
    The full-window averages (no burn-in) are reported alongside.
    """
    sim = EnvSimulator(
        state, p, q,
        clock=clock, cuts=cuts, cylinders=cylinders,
        instantaneous_bonds=instantaneous_bonds, monitor=monitor,
    )
    burn_t = burn_in * horizon
    edges = [burn_t + (horizon - burn_t) * k / batches for k in range(batches + 1)]
    snaps = {}
    marks = sorted(set(float(t) for t in snapshot_times) | set(edges) | {horizon})
    integ_marks: dict[float, tuple] = {}
    cut_marks: dict[float, dict[str, int]] = {}
    for t in marks:
        if t > horizon + 1e-12:
            raise ValueError("snapshot time beyond horizon")
        sim.run_to(min(t, horizon))
        integ_marks[t] = sim.averager.snapshot()
        cut_marks[t] = dict(sim.cut_counts)
        if t in set(float(x) for x in snapshot_times):
            snaps[t] = {
                "right_crossings": state.right_crossings,
                "left_crossings": state.left_crossings,
                "tagged_right": state.tagged_right,
                "tagged_left": state.tagged_left,
            }

    names = sim.averager.names
    final = integ_marks[marks[-1]]
    avg_full = {n: (final[i] / horizon if horizon > 0 else 0.0) for i, n in enumerate(names)}
    span_b = horizon - burn_t
    start = integ_marks[edges[0]]
    avg_burn = {
        n: ((final[i] - start[i]) / span_b if span_b > 0 else 0.0)
        for i, n in enumerate(names)
    }
    batch_avgs = []
    cut_batch = []
    for a, b in zip(edges, edges[1:]):
        ia, ib = integ_marks[a], integ_marks[b]
        dt = b - a
        batch_avgs.append({n: (ib[i] - ia[i]) / dt if dt > 0 else 0.0 for i, n in enumerate(names)})
        cut_batch.append({
            name: (cut_marks[b][name] - cut_marks[a][name]) / dt if dt > 0 else 0.0
            for name in sim.cut_names
        })
    cut_burned = {
        name: (cut_marks[horizon][name] - cut_marks[edges[0]][name]) / span_b if span_b > 0 else 0.0
        for name in sim.cut_names
    }
    return EnvReport(
        horizon=horizon,
        burn_in_time=burn_t,
        events=sim.events,
        right_crossings=state.right_crossings,
        left_crossings=state.left_crossings,
        tagged_right=state.tagged_right,
        tagged_left=state.tagged_left,
        averages_full=avg_full,
        averages_burned=avg_burn,
        batch_averages=batch_avgs,
        cut_rates_burned=cut_burned,
        cut_batch_rates=cut_batch,
        cut_totals=dict(sim.cut_counts),
        snapshots=snaps,
        valid=(not monitor) or sim.boundary_clear,
        monitor_note=sim.monitor_note() if monitor else "",
    )


class TorusSimulator:
    """Homogeneous exclusion on a ring of L sites (no obstacle, no tagged).

    Measures the ring-averaged current (total signed displacement per site
    per unit time) plus optional per-cut counters and instantaneous-current
    averages at a reference bond.
    """

    def __init__(
        self,
        length: int,
        p: RateKernel,
        density: float,
        *,
        clock: Clock,
        reference_bond: tuple[int, int] | None = None,
    ):
        if length <= 2 * p.range_ + 2:
            raise ValueError("ring too small for the kernel range")
        self.L = length
        self.p = p
        self.clock = clock
        self._draw = DrawBuffer(clock.rng)
        self._occ = (clock.rng.random(length) < density).astype(int).tolist()
        self._disp = list(p.displacements())
        self._prate = [p.rate(d) for d in self._disp]
        self._nd = len(self._disp)
        self.events = 0
        self.flux = 0  # sum of signed displacements of all jumps
        self.ref_bond = reference_bond
        self.ref_count = 0
        names = ["inst_ref"] if reference_bond else []
        self.averager = TimeAverager(names, start=clock.now)
        self.table = RateTable((i, 0.0) for i in range(length * self._nd))
        self._touch = [
            tuple(
                sorted(
                    {s * self._nd + k for k in range(self._nd)}
                    | {((s - d) % length) * self._nd + k for k, d in enumerate(self._disp)}
                )
            )
            for s in range(length)
        ]
        for eid in range(length * self._nd):
            self.table.set_rate(eid, self._rate(eid))
        self.table.recompute()

    def _rate(self, eid: int) -> float:
        s, k = divmod(eid, self._nd)
        if not self._occ[s]:
            return 0.0
        t = (s + self._disp[k]) % self.L
        return 0.0 if self._occ[t] else self._prate[k]

    def _inst_ref(self) -> float:
        i, j = self.ref_bond
        span = self.p.range_
        snap = {s: self._occ[s % self.L] for s in range(j - span, i + span + 1)}
        return instantaneous_current(snap, self.p, (i, j), exclude_origin=False)

    def run_to(self, t_end: float) -> None:
        clock = self.clock
        draw = self._draw
        while True:
            total = self.table.total
            if total <= 0.0:
                raise Absorbed(f"ring frozen at t={clock.now}")
            t_next = clock.now + draw.exponential() / total
            values = [self._inst_ref()] if self.ref_bond else []
            if t_next >= t_end:
                self.averager.accumulate(t_end, values)
                clock.now = t_end
                return
            self.averager.accumulate(t_next, values)
            clock.now = t_next
            eid = self.table.sample_point(draw.uniform() * total)
            s, k = divmod(eid, self._nd)
            d = self._disp[k]
            t = (s + d) % self.L
            self._occ[s] = 0
            self._occ[t] = 1
            self.flux += d
            if self.ref_bond is not None:
                b = self.ref_bond[0] + 0.5
                if d > 0:
                    if (b - s) % self.L < d:
                        self.ref_count += 1
                else:
                    if (s - b) % self.L < -d:
                        self.ref_count -= 1
            self.events += 1
