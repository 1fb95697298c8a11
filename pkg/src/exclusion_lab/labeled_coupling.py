"""Label-indexed particle clouds and the order-preserving coupled simulator.

Positions are tracked per label as a strictly increasing sequence.  A bulk
jump relabels the overtaken particles so the sequence stays sorted; a tagged
jump shifts every position, optionally followed by a label shift.  Two
clouds with the same labels are coupled through an explicit target-site
selector: whenever the lower cloud's particle i jumps right by z, the upper
cloud's particle i moves to the matched hole no further right than the
lower's landing site, and the leftover rate moves the upper alone.  Leftward
jumps run the mirrored construction with the roles swapped.  The coupled
chain preserves the componentwise order exactly; the simulator asserts it
after every event.

State modes:
  * finite cloud - all particles at finite sites; labels outside the
    tracked range are at -/+ infinity.
  * left-packed  - an implicit frozen block occupies every site left of a
    floor, standing in for a deep fully packed region; labels below the
    tracked range live on consecutive sites under the floor.

Simulation uses thinning against a constant dominating rate (each candidate
jump is proposed at its kernel rate and accepted exactly with probability
actual/proposed), which keeps the chain exact without maintaining a dynamic
rate table.
"""

from __future__ import annotations

from bisect import bisect_left, insort
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .event_core import Clock, DrawBuffer
from .kernels import RateKernel, TaggedKernel, decompose_attractive

INF = float("inf")


class OrderViolation(RuntimeError):
    """The coupled pair left the ordered set; carries a replayable dump."""

    def __init__(self, message: str, dump: dict | None = None):
        super().__init__(message)
        self.dump = dump or {}


class LabeledState:
    """Strictly increasing particle positions indexed by contiguous labels."""

    __slots__ = ("pos", "base", "occ", "floor", "exclude_origin")

    def __init__(
        self,
        positions: Sequence[int],
        base: int = 0,
        *,
        floor: int | None = None,
        exclude_origin: bool = False,
    ):
        pos = [int(x) for x in positions]
        if any(a >= b for a, b in zip(pos, pos[1:])):
            raise ValueError("positions must be strictly increasing")
        if exclude_origin and 0 in pos:
            raise ValueError("no particle may sit on the tagged seat")
        if floor is not None and pos and pos[0] < floor:
            raise ValueError("tracked positions must sit at or above the floor")
        self.pos = pos
        self.base = int(base)
        self.occ = set(pos)
        self.floor = floor
        self.exclude_origin = exclude_origin

    # --- basic queries -----------------------------------------------------

    def __len__(self) -> int:
        return len(self.pos)

    @property
    def top(self) -> int:
        return self.base + len(self.pos) - 1

    @property
    def left_packed(self) -> bool:
        return self.floor is not None

    def labels(self) -> range:
        return range(self.base, self.base + len(self.pos))

    def tracks(self, label: int) -> bool:
        return self.base <= label <= self.top

    def position(self, label: int) -> float:
        """Position of ``label``; implicit block and sentinels included."""
        if self.tracks(label):
            return self.pos[label - self.base]
        if label < self.base:
            if self.floor is not None:
                return self.floor - (self.base - label)
            return -INF
        return INF

    def is_occupied(self, site: int) -> bool:
        if self.floor is not None and site < self.floor:
            return True
        return site in self.occ

    def legal_target(self, site: int) -> bool:
        if self.exclude_origin and site == 0:
            return False
        return not self.is_occupied(site)

    def multiset(self) -> tuple[int, ...]:
        return tuple(self.pos)

    def copy(self) -> "LabeledState":
        dup = LabeledState.__new__(LabeledState)
        dup.pos = list(self.pos)
        dup.base = self.base
        dup.occ = set(self.occ)
        dup.floor = self.floor
        dup.exclude_origin = self.exclude_origin
        return dup

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LabeledState)
            and self.pos == other.pos
            and self.base == other.base
            and self.floor == other.floor
            and self.exclude_origin == other.exclude_origin
        )

    def __repr__(self) -> str:
        tail = f", floor={self.floor}" if self.floor is not None else ""
        return f"LabeledState({self.pos!r}, base={self.base}{tail})"

    # --- in-place dynamics (used by the simulators) --------------------------

    def move(self, label: int, z: int) -> int:
        """Jump particle ``label`` by ``z`` to a vacant site, relabeling the
        overtaken particles; returns the crossing sign over the origin cut
        (+1 negative-to-positive, -1 the reverse, 0 otherwise)."""
        if z == 0:
            return 0
        idx = label - self.base
        old = self.pos[idx]
        tgt = old + z
        if not self.legal_target(tgt):
            raise AssertionError(f"illegal move of label {label} by {z} onto {tgt}")
        if self.floor is not None and tgt < self.floor:
            raise AssertionError("move below the frozen floor")
        del self.pos[idx]
        insort(self.pos, tgt)
        self.occ.discard(old)
        self.occ.add(tgt)
        if old <= -1 and tgt >= 1:
            return 1
        if old >= 1 and tgt <= -1:
            return -1
        return 0

    def shift(self, z: int, relabel: bool) -> None:
        """Tagged jump to vacant site z: all positions drop by z; with
        ``relabel`` the labels shift by z as well."""
        if z == 0:
            raise ValueError("tagged displacement must be nonzero")
        if self.is_occupied(z):
            raise AssertionError(f"tagged jump onto occupied site {z}")
        self.pos = [x - z for x in self.pos]
        self.occ = set(self.pos)
        if self.floor is not None:
            self.floor -= z
        if relabel:
            self.base -= z


def from_positions(
    positions: Sequence[int], base: int = 0, *, exclude_origin: bool = False
) -> LabeledState:
    return LabeledState(positions, base, exclude_origin=exclude_origin)


def packed_step_state(depth: int, *, exclude_origin: bool = True) -> LabeledState:
    """Step configuration: labels -depth+1..0 on sites -depth..-1, with the
    implicit frozen block continuing leftward under the floor."""
    if depth < 1:
        raise ValueError("depth must be positive")
    positions = list(range(-depth, 0))
    return LabeledState(
        positions, base=-depth + 1, floor=-depth, exclude_origin=exclude_origin
    )


# --- pure transform surface (functional wrappers over the in-place ops) ------


def t_move(state: LabeledState, label: int, z: int) -> LabeledState:
    """Particle ``label`` jumps by ``z``; rejects when the target is illegal."""
    if not state.tracks(label):
        raise ValueError(f"label {label} is not tracked")
    if z == 0:
        return state.copy()
    tgt = state.pos[label - state.base] + z
    if not state.legal_target(tgt):
        raise ValueError(f"target {tgt} is occupied or excluded")
    out = state.copy()
    out.move(label, z)
    return out


def theta_shift(state: LabeledState, z: int) -> LabeledState:
    """Tagged jump to vacant site z without label shift."""
    if state.is_occupied(z):
        raise ValueError(f"site {z} is occupied")
    out = state.copy()
    out.shift(z, relabel=False)
    return out


def s_relabel(state: LabeledState, z: int) -> LabeledState:
    """Shift labels by z: new label j holds old label j+z's position."""
    out = state.copy()
    out.base -= z
    return out


def k_insert(state: LabeledState, site: int) -> LabeledState:
    """Add a particle at a vacant site, shifting the labels at or below the
    insertion point down; inserting at an occupied site is the identity."""
    if state.left_packed:
        raise ValueError("insertion is defined for finite clouds only")
    if site in state.occ:
        return state.copy()
    out = state.copy()
    insort(out.pos, int(site))
    out.occ.add(int(site))
    out.base -= 1
    return out


def f_count(state: LabeledState) -> int:
    """Largest label at a site <= -1."""
    idx = bisect_left(state.pos, 0) - 1  # rightmost tracked position < 0
    if idx >= 0:
        return state.base + idx
    if state.floor is not None and state.floor - 1 <= -1:
        return state.base - 1
    raise ValueError("no tracked position at or below -1")


def reverse(state: LabeledState) -> LabeledState:
    """Mirror the cloud through the origin; labels negate as well."""
    if state.left_packed:
        raise ValueError("reversal is defined for finite clouds only")
    positions = [-x for x in reversed(state.pos)]
    base = -(state.base + len(state.pos) - 1)
    return LabeledState(positions, base, exclude_origin=state.exclude_origin)


# --- target-site selector -----------------------------------------------------


def _match_plus(upper: LabeledState, lower: LabeledState, label: int, span: int):
    """Hole matching for rightward jumps of ``label``.

    Returns the list of (z, z') pairs: z runs over the lower cloud's legal
    rightward displacements up to span, largest first; z' is the matched
    displacement of the upper cloud (0 when the upper stays put).
    """
    yi = lower.pos[label - lower.base]
    xi = upper.pos[label - upper.base]
    gap = xi - yi
    out = []
    prev = None
    dead = False
    for z in range(span, 0, -1):
        if not lower.legal_target(yi + z):
            continue
        if dead:
            out.append((z, 0))
            continue
        ub = z - gap
        if prev is not None and prev - 1 < ub:
            ub = prev - 1
        zp = 0
        for cand in range(ub, 0, -1):
            if upper.legal_target(xi + cand):
                zp = cand
                break
        out.append((z, zp))
        if zp == 0:
            dead = True
        else:
            prev = zp
    return out


def _match_minus(upper: LabeledState, lower: LabeledState, label: int, span: int):
    """Mirrored hole matching for leftward jumps: the upper cloud drives,
    the lower follows.  Returns (z, z') with z the upper's legal leftward
    displacements and z' the lower's matched leftward displacement."""
    yi = lower.pos[label - lower.base]
    xi = upper.pos[label - upper.base]
    gap = xi - yi
    out = []
    prev = None
    dead = False
    for z in range(span, 0, -1):
        if not upper.legal_target(xi - z):
            continue
        if dead:
            out.append((z, 0))
            continue
        ub = z - gap
        if prev is not None and prev - 1 < ub:
            ub = prev - 1
        zp = 0
        for cand in range(ub, 0, -1):
            if lower.legal_target(yi - cand):
                zp = cand
                break
        out.append((z, zp))
        if zp == 0:
            dead = True
        else:
            prev = zp
    return out


def target_site(
    upper: LabeledState, lower: LabeledState, label: int, z: int, span: int
) -> int:
    """Displacement z' >= 0 for the upper cloud paired with the lower cloud's
    rightward jump of ``label`` by ``z``.

    Guarantees upper_pos + z' <= lower_pos + z and that moving both keeps
    the componentwise order; z' = 0 means the upper stays put.
    """
    if not (0 < z <= span):
        raise ValueError("need 0 < z <= span")
    if not lower.tracks(label):
        raise ValueError(f"label {label} not tracked by the lower cloud")
    if not upper.tracks(label):
        return 0  # the upper particle sits at +infinity; it never moves
    yi = lower.pos[label - lower.base]
    xi = upper.pos[label - upper.base]
    if xi < yi:
        raise ValueError("clouds are not ordered at this label")
    if not lower.legal_target(yi + z):
        raise ValueError("the lower jump itself is not legal")
    for zz, zp in _match_plus(upper, lower, label, span):
        if zz == z:
            if zp > 0 and xi + zp > yi + z:
                raise AssertionError("selector produced an overshooting target")
            return zp
    raise AssertionError("legal jump missing from its own hole enumeration")


def make_ordered_pair(
    rng: np.random.Generator,
    count: int,
    *,
    span: int = 30,
    exclude_origin: bool = False,
    max_gap: int = 3,
) -> tuple[LabeledState, LabeledState]:
    """Random finite clouds (upper, lower) with upper >= lower componentwise.

    The lower cloud is a sorted sample; the upper adds a nondecreasing
    sequence of gaps, which keeps it strictly increasing.  Sites are pushed
    off the origin by the order-preserving map v -> v+1 for v >= 0.
    """
    lo = np.sort(rng.choice(np.arange(-span, span), size=count, replace=False))
    gaps = np.cumsum(rng.integers(0, max_gap + 1, size=count) * (rng.random(count) < 0.5))
    up = lo + gaps
    fix = lambda v: int(v) + 1 if v >= 0 else int(v)
    upper = LabeledState([fix(v) for v in up], 0, exclude_origin=exclude_origin)
    lower = LabeledState([fix(v) for v in lo], 0, exclude_origin=exclude_origin)
    return upper, lower


# --- order audit ---------------------------------------------------------------


def check_order(upper: LabeledState, lower: LabeledState) -> bool:
    """Componentwise order over every label, sentinels and implicit blocks
    included."""
    if lower.left_packed:
        if not upper.left_packed:
            return False  # deep labels: finite implicit under -infinity
        # implicit positions differ by a label-independent constant
        if upper.floor - upper.base < lower.floor - lower.base:
            return False
    lo = min(upper.base, lower.base)
    hi = max(upper.top, lower.top)
    a0 = max(upper.base, lower.base)
    a1 = min(upper.top, lower.top)
    if a0 <= a1:
        us = upper.pos[a0 - upper.base : a1 - upper.base + 1]
        ls = lower.pos[a0 - lower.base : a1 - lower.base + 1]
        for xu, xl in zip(us, ls):
            if xu < xl:
                return False
    for label in range(lo, a0):
        if upper.position(label) < lower.position(label):
            return False
    for label in range(a1 + 1, hi + 1):
        if upper.position(label) < lower.position(label):
            return False
    return True


@dataclass
class CoupledState:
    """Ordered pair of clouds; ``upper >= lower`` is the running invariant."""

    upper: LabeledState
    lower: LabeledState

    def __post_init__(self):
        if not check_order(self.upper, self.lower):
            raise ValueError("initial clouds are not ordered")

    def assert_order(self, context: str = "") -> None:
        if not check_order(self.upper, self.lower):
            raise OrderViolation(
                f"order violated {context}",
                dump={"upper": repr(self.upper), "lower": repr(self.lower)},
            )


# --- joint rate enumeration (inspection and tests) ------------------------------


@dataclass(frozen=True)
class JointEvent:
    kind: str          # "pair+", "solo+", "pair-", "solo-", "tag"
    label: int | None
    lower_z: int | None  # signed displacement of the lower cloud (None if it stays)
    upper_z: int | None  # signed displacement of the upper cloud (None if it stays)
    rate: float


def joint_rates(
    pair: CoupledState,
    p: RateKernel,
    *,
    tagged: TaggedKernel | None = None,
    variant: str = "full",
) -> list[JointEvent]:
    """Enumerate the full joint rate table at the current pair state.

    Verifies per (label, displacement) that paired plus residual rates add
    up to the marginal kernel rate on each side.
    """
    kp = decompose_attractive(p)
    span = p.range_
    upper, lower = pair.upper, pair.lower
    events: list[JointEvent] = []
    directions = ["+"] if variant == "plus" else ["+", "-"]
    for label in sorted(set(lower.labels()) | set(upper.labels())):
        for direction in directions:
            rates = kp.plus if direction == "+" else kp.minus
            sgn = 1 if direction == "+" else -1
            driver, follower = (lower, upper) if direction == "+" else (upper, lower)
            matches = {}
            if driver.tracks(label) and follower.tracks(label):
                fn = _match_plus if direction == "+" else _match_minus
                matches = dict(fn(upper, lower, label, span))
            elif driver.tracks(label):
                anchor = driver.pos[label - driver.base]
                matches = {
                    z: 0
                    for z in range(1, span + 1)
                    if driver.legal_target(anchor + sgn * z)
                }
            # paired events: driver jump z, follower jump matches[z]
            for z, zp in matches.items():
                r = rates.get(z, 0.0)
                if r <= 0:
                    continue
                lz, uz = (sgn * z, sgn * zp or None) if direction == "+" else (sgn * zp or None, sgn * z)
                events.append(JointEvent(f"pair{direction}", label, lz, uz, r))
            # solo events for the follower-side marginal
            solo_side = upper if direction == "+" else lower
            if solo_side.tracks(label):
                anchor = solo_side.pos[label - solo_side.base]
                matched_rate = {}
                for z, zp in matches.items():
                    if zp > 0:
                        matched_rate[zp] = rates.get(z, 0.0)
                for s in range(1, span + 1):
                    r = rates.get(s, 0.0)
                    if r <= 0 or not solo_side.legal_target(anchor + sgn * s):
                        continue
                    residual = r - matched_rate.get(s, 0.0)
                    if residual < -1e-12:
                        raise AssertionError("negative residual rate: selector inconsistency")
                    residual = max(residual, 0.0)
                    if residual > 0:
                        if direction == "+":
                            events.append(JointEvent("solo+", label, None, s, residual))
                        else:
                            events.append(JointEvent("solo-", label, -s, None, residual))
    if variant in ("right", "left") and tagged is not None:
        for y in tagged.displacements():
            side = pair.upper if variant == "right" else pair.lower
            if not side.is_occupied(y):
                events.append(JointEvent("tag", None, None, y, tagged.rate(y)))
    return events


# --- simulators -----------------------------------------------------------------


@dataclass
class MarginalCounters:
    """Per-cloud event counters for the counting identities."""

    crossings_up: int = 0    # negative side -> positive side
    crossings_down: int = 0
    tagged_right: int = 0
    tagged_left: int = 0
    relabels: int = 0

    @property
    def net_crossings(self) -> int:
        return self.crossings_up - self.crossings_down


class _Thinner:
    """Shared candidate-drawing machinery for the thinning simulators."""

    def __init__(self, weights: Sequence[float], clock: Clock):
        self.cum = []
        acc = 0.0
        for w in weights:
            acc += w
            self.cum.append(acc)
        self.total = acc
        self.clock = clock
        self.draw = DrawBuffer(clock.rng)

    def next_candidate(self, t_end: float) -> int | None:
        """Advance the clock; return a candidate index or None at the horizon."""
        t_next = self.clock.now + self.draw.exponential() / self.total
        if t_next >= t_end:
            self.clock.now = t_end
            return None
        self.clock.now = t_next
        u = self.draw.uniform() * self.total
        idx = bisect_left(self.cum, u)
        if idx >= len(self.cum):
            idx = len(self.cum) - 1
        return idx


GENERATORS = ("plain", "right", "left")


class LabeledSimulator:
    """Standalone cloud dynamics under one generator flavor.

    ``generator`` selects what a tagged jump does to the labels: "plain"
    never relabels, "right" relabels after rightward tagged jumps, "left"
    after leftward ones.
    """

    def __init__(
        self,
        state: LabeledState,
        p: RateKernel,
        q: TaggedKernel | None = None,
        *,
        generator: str = "plain",
        clock: Clock,
    ):
        if generator not in GENERATORS:
            raise ValueError(f"unknown generator {generator!r}")
        if q is not None and q.rates and not state.exclude_origin:
            raise ValueError("tagged dynamics need the origin excluded")
        self.state = state
        self.p = p
        self.q = q
        self.generator = generator
        self.clock = clock
        self.counters = MarginalCounters()
        self.events = 0
        self._margin = INF  # least (vacated site - floor) seen, packed mode
        self._disp = list(p.displacements())
        self._tag = list(q.displacements()) if q is not None else []
        n = len(state)
        weights = [p.rate(d) for d in self._disp for _ in range(n)]
        weights += [q.rate(y) for y in self._tag]
        self._n = n
        self._thin = _Thinner(weights, clock)

    def _apply_tag(self, y: int) -> None:
        st = self.state
        relabel = (self.generator == "right" and y > 0) or (
            self.generator == "left" and y < 0
        )
        st.shift(y, relabel=relabel)
        if y > 0:
            self.counters.tagged_right += 1
        else:
            self.counters.tagged_left += 1
        if relabel:
            self.counters.relabels += 1

    def run_to(self, t_end: float) -> None:
        st = self.state
        n = self._n
        nd = len(self._disp)
        while True:
            idx = self._thin.next_candidate(t_end)
            if idx is None:
                return
            if idx >= n * nd:
                y = self._tag[idx - n * nd]
                if not st.is_occupied(y):
                    self._apply_tag(y)
                    self.events += 1
                continue
            k, off = divmod(idx, n)
            d = self._disp[k]
            old = st.pos[off]
            tgt = old + d
            if st.legal_target(tgt):
                if st.floor is not None and old - st.floor < self._margin:
                    self._margin = old - st.floor
                sign = st.move(st.base + off, d)
                if sign > 0:
                    self.counters.crossings_up += 1
                elif sign < 0:
                    self.counters.crossings_down += 1
                self.events += 1

    @property
    def packed_valid(self) -> bool:
        """Whether the frozen block stayed outside every vacancy's reach."""
        return self.state.floor is None or self._margin >= self.p.range_


class CoupledSimulator:
    """Joint dynamics of an ordered pair, exact in both marginals.

    ``variant``: "plus" couples only rightward jumps, "full" both
    directions, "right" adds tagged jumps to the upper cloud (relabeling on
    rightward ones), "left" adds tagged jumps to the lower cloud
    (relabeling on leftward ones).  The componentwise order is asserted
    after every event; a violation raises with a replayable dump.
    """

    VARIANTS = ("plus", "full", "right", "left")

    def __init__(
        self,
        pair: CoupledState,
        p: RateKernel,
        q: TaggedKernel | None = None,
        *,
        variant: str = "full",
        clock: Clock,
        keep_log: bool = False,
    ):
        if variant not in self.VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        if variant in ("right", "left") and (q is None or not q.rates):
            raise ValueError("tagged variants need a tagged kernel")
        if variant in ("plus", "full"):
            q = None
        self.pair = pair
        self.kp = decompose_attractive(p)
        self.span = p.range_
        self.p = p
        self.q = q
        self.variant = variant
        self.clock = clock
        self.keep_log = keep_log
        self.log: list[tuple] = []
        self.upper_counters = MarginalCounters()
        self.lower_counters = MarginalCounters()
        self.events = 0
        self._margin_u = INF
        self._margin_l = INF
        if len(pair.upper) != len(pair.lower):
            raise ValueError("clouds must hold the same number of particles")
        n = len(pair.upper)
        self._n = n
        pos_keys = sorted(self.kp.plus)
        neg_keys = sorted(self.kp.minus)
        if variant == "plus":
            neg_keys = []
        self._pos_keys = pos_keys
        self._neg_keys = neg_keys
        self._tag = list(q.displacements()) if q is not None else []
        weights: list[float] = []
        for z in pos_keys:          # channel block 0: lower drives right
            weights += [self.kp.plus[z]] * n
        for s in pos_keys:          # block 1: upper solo right
            weights += [self.kp.plus[s]] * n
        for z in neg_keys:          # block 2: upper drives left
            weights += [self.kp.minus[z]] * n
        for s in neg_keys:          # block 3: lower solo left
            weights += [self.kp.minus[s]] * n
        weights += [q.rate(y) for y in self._tag]
        self._blocks = (
            len(pos_keys) * n,
            2 * len(pos_keys) * n,
            (2 * len(pos_keys) + len(neg_keys)) * n,
            (2 * len(pos_keys) + 2 * len(neg_keys)) * n,
        )
        self._thin = _Thinner(weights, clock)

    # --- event helpers ------------------------------------------------------

    def _note(self, kind: str, label, z, s) -> None:
        if self.keep_log:
            self.log.append((self.clock.now, kind, label, z, s))

    def _cross(self, counters: MarginalCounters, sign: int) -> None:
        if sign > 0:
            counters.crossings_up += 1
        elif sign < 0:
            counters.crossings_down += 1

    def _vacated(self, st: LabeledState, old: int, is_upper: bool) -> None:
        if st.floor is None:
            return
        rel = old - st.floor
        if is_upper:
            if rel < self._margin_u:
                self._margin_u = rel
        elif rel < self._margin_l:
            self._margin_l = rel

    @property
    def packed_valid(self) -> bool:
        span = self.span
        up_ok = self.pair.upper.floor is None or self._margin_u >= span
        lo_ok = self.pair.lower.floor is None or self._margin_l >= span
        return up_ok and lo_ok

    def _drive_plus(self, off: int, z: int) -> bool:
        lower, upper = self.pair.lower, self.pair.upper
        label = lower.base + off
        yi = lower.pos[off]
        if not lower.legal_target(yi + z):
            return False
        s = 0
        if upper.tracks(label):
            s = target_site(upper, lower, label, z, self.span)
        self._vacated(lower, yi, False)
        self._cross(self.lower_counters, lower.move(label, z))
        if s > 0:
            self._vacated(upper, upper.pos[label - upper.base], True)
            self._cross(self.upper_counters, upper.move(label, s))
        self._note("pair+", label, z, s)
        return True

    def _solo_plus(self, off: int, s: int) -> bool:
        upper, lower = self.pair.upper, self.pair.lower
        label = upper.base + off
        xi = upper.pos[off]
        if not upper.legal_target(xi + s):
            return False
        matched = 0.0
        if lower.tracks(label):
            for z, zp in _match_plus(upper, lower, label, self.span):
                if zp == s:
                    matched = self.kp.plus.get(z, 0.0)
                    break
        full = self.kp.plus[s]
        residual = full - matched
        if residual < -1e-12:
            raise AssertionError("negative residual rate in solo+ channel")
        if residual <= 0.0:
            return False
        if residual < full and self._thin.draw.uniform() * full >= residual:
            return False
        self._vacated(upper, xi, True)
        self._cross(self.upper_counters, upper.move(label, s))
        self._note("solo+", label, None, s)
        return True

    def _drive_minus(self, off: int, z: int) -> bool:
        lower, upper = self.pair.lower, self.pair.upper
        label = upper.base + off
        xi = upper.pos[off]
        if not upper.legal_target(xi - z):
            return False
        s = 0
        if lower.tracks(label):
            for zz, zp in _match_minus(upper, lower, label, self.span):
                if zz == z:
                    s = zp
                    break
        self._vacated(upper, xi, True)
        self._cross(self.upper_counters, upper.move(label, -z))
        if s > 0:
            self._vacated(lower, lower.pos[label - lower.base], False)
            self._cross(self.lower_counters, lower.move(label, -s))
        self._note("pair-", label, -z, -s if s else None)
        return True

    def _solo_minus(self, off: int, s: int) -> bool:
        lower, upper = self.pair.lower, self.pair.upper
        label = lower.base + off
        yi = lower.pos[off]
        if not lower.legal_target(yi - s):
            return False
        matched = 0.0
        if upper.tracks(label):
            for z, zp in _match_minus(upper, lower, label, self.span):
                if zp == s:
                    matched = self.kp.minus.get(z, 0.0)
                    break
        full = self.kp.minus[s]
        residual = full - matched
        if residual < -1e-12:
            raise AssertionError("negative residual rate in solo- channel")
        if residual <= 0.0:
            return False
        if residual < full and self._thin.draw.uniform() * full >= residual:
            return False
        self._vacated(lower, yi, False)
        self._cross(self.lower_counters, lower.move(label, -s))
        self._note("solo-", label, -s, None)
        return True

    def _tagged(self, y: int) -> bool:
        upper, lower = self.pair.upper, self.pair.lower
        if self.variant == "right":
            side, counters = upper, self.upper_counters
            relabel = y > 0
        else:
            side, counters = lower, self.lower_counters
            relabel = y < 0
        if side.is_occupied(y):
            return False
        side.shift(y, relabel=relabel)
        if y > 0:
            counters.tagged_right += 1
        else:
            counters.tagged_left += 1
        if relabel:
            counters.relabels += 1
        self._note("tag", None, y, None)
        return True

    def run_to(self, t_end: float) -> None:
        n = self._n
        b0, b1, b2, b3 = self._blocks
        while True:
            idx = self._thin.next_candidate(t_end)
            if idx is None:
                return
            if idx < b0:
                k, off = divmod(idx, n)
                fired = self._drive_plus(off, self._pos_keys[k])
            elif idx < b1:
                k, off = divmod(idx - b0, n)
                fired = self._solo_plus(off, self._pos_keys[k])
            elif idx < b2:
                k, off = divmod(idx - b1, n)
                fired = self._drive_minus(off, self._neg_keys[k])
            elif idx < b3:
                k, off = divmod(idx - b2, n)
                fired = self._solo_minus(off, self._neg_keys[k])
            else:
                fired = self._tagged(self._tag[idx - b3])
            if fired:
                self.events += 1
                self.pair.assert_order(f"after event {self.events} at t={self.clock.now}")
