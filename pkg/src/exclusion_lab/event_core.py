"""Exact continuous-time event engine.

A ``RateTable`` keeps a dynamic set of rated events behind a Fenwick (binary
indexed) tree so that single-rate updates and weighted sampling both cost
O(log n).  ``Clock`` couples simulation time to a seeded random stream, and
``TimeAverager`` accumulates exact piecewise-constant time integrals of
observables along the event path.

Simulation is exact in the Gillespie sense: waiting times are exponential in
the cached total rate and the next event is chosen proportionally to its
rate.  Tolerances therefore live purely in the statistics, never in the
dynamics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

#: Exact total recomputation interval; bounds floating-point drift of the
#: incrementally maintained tree at negligible cost.
RECOMPUTE_EVERY = 1 << 16


class RateTable:
    """Indexed collection of (event-id, rate) pairs with O(log n) updates.

    Event ids may be arbitrary hashables; they are mapped to dense slots in
    insertion order.  Sampling returns the first event whose cumulative rate
    exceeds the drawn point; on an exact floating-point boundary the lower
    slot wins, so sampling is deterministic given the random stream.
    """

    def __init__(self, entries: Iterable[tuple[Hashable, float]] = ()):
        self._slot: dict[Hashable, int] = {}
        self._ids: list[Hashable] = []
        self._rates: list[float] = []
        self._tree: list[float] = [0.0]
        self._cap = 0
        self._updates = 0
        for event_id, rate in entries:
            self.set_rate(event_id, rate)

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, event_id: Hashable) -> bool:
        return event_id in self._slot

    def ids(self) -> tuple[Hashable, ...]:
        return tuple(self._ids)

    def rate_of(self, event_id: Hashable) -> float:
        return self._rates[self._slot[event_id]]

    @property
    def total(self) -> float:
        return self._prefix(self._cap)

    def exact_total(self) -> float:
        """Resummed total, bypassing the tree (an independent oracle)."""
        return math.fsum(self._rates)

    def set_rate(self, event_id: Hashable, rate: float) -> None:
        rate = float(rate)
        if rate < 0.0:
            raise ValueError(f"negative rate {rate} for event {event_id!r}")
        slot = self._slot.get(event_id)
        if slot is None:
            slot = len(self._ids)
            self._slot[event_id] = slot
            self._ids.append(event_id)
            self._rates.append(0.0)
            if slot >= self._cap:
                self._grow()
        delta = rate - self._rates[slot]
        self._rates[slot] = rate
        if delta != 0.0:
            self._add(slot, delta)
        self._updates += 1
        if self._updates >= RECOMPUTE_EVERY:
            self.recompute()

    def update_many(self, pairs: Iterable[tuple[Hashable, float]]) -> None:
        for event_id, rate in pairs:
            self.set_rate(event_id, rate)

    def recompute(self) -> None:
        """Rebuild the tree exactly from the stored rates (O(n))."""
        self._updates = 0
        tree = [0.0] * (self._cap + 1)
        for i, r in enumerate(self._rates):
            tree[i + 1] += r
        for j in range(1, self._cap + 1):
            parent = j + (j & -j)
            if parent <= self._cap:
                tree[parent] += tree[j]
        self._tree = tree

    def sample_point(self, point: float) -> Hashable:
        """Event at cumulative coordinate ``point`` in [0, total)."""
        slot = self._descend(point)
        n = len(self._rates)
        while slot < n and self._rates[slot] == 0.0:
            slot += 1
        if slot >= n:
            slot = n - 1
            while slot > 0 and self._rates[slot] == 0.0:
                slot -= 1
        return self._ids[slot]

    def sample_point_linear(self, point: float) -> Hashable:
        """Linear-scan sampler with identical selection semantics (debug oracle).

        Returns the first positive-rate slot whose cumulative sum reaches
        past ``point``; a point landing exactly on a slot boundary goes to
        the lower slot, matching the tree descent.
        """
        acc = 0.0
        last_positive = None
        for slot, r in enumerate(self._rates):
            if r > 0.0:
                acc += r
                if acc >= point:
                    return self._ids[slot]
                last_positive = slot
        if last_positive is None:
            raise ValueError("cannot sample from an all-zero table")
        return self._ids[last_positive]

    # Fenwick internals -----------------------------------------------------

    def _grow(self) -> None:
        self._cap = max(16, 2 * self._cap)
        if self._cap < len(self._rates):
            self._cap = len(self._rates)
        self.recompute()

    def _add(self, slot: int, delta: float) -> None:
        j = slot + 1
        tree = self._tree
        cap = self._cap
        while j <= cap:
            tree[j] += delta
            j += j & -j

    def _prefix(self, count: int) -> float:
        s = 0.0
        j = count
        tree = self._tree
        while j > 0:
            s += tree[j]
            j &= j - 1
        return s

    def _descend(self, point: float) -> int:
        """Largest slot count whose prefix sum is strictly below ``point``."""
        pos = 0
        rem = point
        bit = 1
        while bit << 1 <= self._cap:
            bit <<= 1
        tree = self._tree
        while bit:
            nxt = pos + bit
            if nxt <= self._cap and tree[nxt] < rem:
                rem -= tree[nxt]
                pos = nxt
            bit >>= 1
        return pos


@dataclass
class Clock:
    """Simulation time plus its seeded random stream.

    Replica streams derive from (master seed, replica index) through numpy's
    splittable SeedSequence, so replicas are independent and reproducible.
    """

    now: float
    rng: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int, replica: int = 0) -> "Clock":
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(replica,))
        return cls(now=0.0, rng=np.random.default_rng(ss))


class DrawBuffer:
    """Block-buffered uniform and unit-exponential draws.

    Thin wrapper that amortises numpy call overhead in event loops; draws
    come out in a fixed order, so determinism is unchanged.
    """

    def __init__(self, rng: np.random.Generator, block: int = 8192):
        self._rng = rng
        self._block = block
        self._uni = np.empty(0)
        self._exp = np.empty(0)
        self._iu = 0
        self._ie = 0

    def uniform(self) -> float:
        if self._iu >= len(self._uni):
            self._uni = self._rng.random(self._block)
            self._iu = 0
        v = self._uni[self._iu]
        self._iu += 1
        return float(v)

    def exponential(self) -> float:
        if self._ie >= len(self._exp):
            self._exp = self._rng.exponential(1.0, self._block)
            self._ie = 0
        v = self._exp[self._ie]
        self._ie += 1
        return float(v)


def sample_next(table: RateTable, clock: Clock):
    """Advance the clock to the next event and return (event-id, new time).

    Returns None when the total rate is zero (absorbed); the caller decides
    whether absorption is legal in its context.
    """
    total = table.total
    if total <= 0.0:
        return None
    dt = clock.rng.exponential(1.0 / total)
    point = clock.rng.random() * total
    clock.now += dt
    return table.sample_point(point), clock.now


class TimeAverager:
    """Running time integrals of named piecewise-constant observables."""

    def __init__(self, names: Sequence[str], start: float = 0.0):
        self.names = list(names)
        self.integrals = [0.0] * len(self.names)
        self.last_update = start

    def accumulate(self, until: float, values: Sequence[float]) -> None:
        """Add value * (until - last_update) for each observable.

        ``values`` must be the observable values over the elapsed interval,
        i.e. evaluated on the state before any change at ``until``.
        """
        dt = until - self.last_update
        if dt < 0:
            raise ValueError("time ran backwards in accumulate")
        if dt > 0.0:
            ints = self.integrals
            for i, v in enumerate(values):
                ints[i] += v * dt
        self.last_update = until

    def accumulate_eval(self, until: float, evaluate: Callable[[], Sequence[float]]) -> None:
        if until < self.last_update:
            raise ValueError("time ran backwards in accumulate")
        if until > self.last_update:
            self.accumulate(until, evaluate())
        else:
            self.last_update = until

    def snapshot(self) -> tuple[float, ...]:
        return tuple(self.integrals)

    def averages(self, elapsed: float) -> dict[str, float]:
        if elapsed <= 0:
            return {name: 0.0 for name in self.names}
        return {name: ig / elapsed for name, ig in zip(self.names, self.integrals)}
