"""Jump-rate kernels and their validators.

A kernel maps signed integer displacements to non-negative jump rates and is
immutable once built.  Two validator families cover the assumption sets the
simulators rely on: the near-symmetric range-2 conditions used by tagged
environment runs, and the directional-dominance conditions used by obstacle
runs.  The attractive decomposition splits a kernel into rightward and
leftward halves whose monotonicity makes order-preserving coupling possible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping


def _clean_rates(rates: Mapping[int, float]) -> dict[int, float]:
    out = {}
    for z, r in rates.items():
        z = int(z)
        r = float(r)
        if z == 0:
            raise ValueError("displacement 0 is not a jump")
        if r < 0:
            raise ValueError(f"negative rate {r} at displacement {z}")
        if r > 0:
            out[z] = r
    return out


@dataclass(frozen=True)
class RateKernel:
    """Finite-range jump rates for the bulk (red) particles.

    Zero entries are dropped so that ``range_`` is minimal: rates(z) = 0 for
    every |z| > range_ and some rate at |z| = range_ is positive.
    """

    rates: Mapping[int, float]
    range_: int = field(init=False)

    def __post_init__(self):
        cleaned = _clean_rates(self.rates)
        if not cleaned:
            raise ValueError("kernel needs at least one positive rate")
        object.__setattr__(self, "rates", MappingProxyType(cleaned))
        object.__setattr__(self, "range_", max(abs(z) for z in cleaned))

    def rate(self, z: int) -> float:
        return self.rates.get(z, 0.0)

    def total(self) -> float:
        return sum(self.rates.values())

    def displacements(self) -> tuple[int, ...]:
        return tuple(sorted(self.rates))


@dataclass(frozen=True)
class TaggedKernel:
    """Jump rates of the tagged particle; empty means the tagged particle is frozen."""

    rates: Mapping[int, float]
    range_: int = field(init=False)

    def __post_init__(self):
        cleaned = _clean_rates(self.rates)
        object.__setattr__(self, "rates", MappingProxyType(cleaned))
        object.__setattr__(self, "range_", max((abs(z) for z in cleaned), default=1))

    @property
    def nearest_neighbor(self) -> bool:
        return all(abs(z) <= 1 for z in self.rates)

    def rate(self, z: int) -> float:
        return self.rates.get(z, 0.0)

    def total(self) -> float:
        return sum(self.rates.values())

    def displacements(self) -> tuple[int, ...]:
        return tuple(sorted(self.rates))


@dataclass(frozen=True)
class ValidationReport:
    """Pass/fail verdicts per named condition; never raises."""

    checks: Mapping[str, bool]

    def __post_init__(self):
        object.__setattr__(self, "checks", MappingProxyType(dict(self.checks)))

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def failed(self) -> tuple[str, ...]:
        return tuple(name for name, good in self.checks.items() if not good)


def validate_env_kernel(p: RateKernel) -> ValidationReport:
    """Check the two conditions required by tagged environment runs.

    positivity:     p(2) = p(-2) > 0 and p(1) > p(-1)
    attractiveness: p(-1) >= p(-2) and p(k) = 0 for |k| > 2
    """
    checks = {
        "positivity": p.rate(2) == p.rate(-2) > 0 and p.rate(1) > p.rate(-1),
        "attractiveness": p.rate(-1) >= p.rate(-2) and p.range_ <= 2,
    }
    return ValidationReport(checks)


def validate_blockage_kernel(p: RateKernel) -> ValidationReport:
    """Check the obstacle-run conditions: rightward dominance with a strict
    gap somewhere, jump range R > 1, and p(R) > 0."""
    dominance = all(p.rate(k) >= p.rate(-k) for k in range(1, p.range_ + 1))
    strict = any(p.rate(k) > p.rate(-k) for k in range(1, p.range_ + 1))
    checks = {
        "forward_dominance": dominance,
        "strict_somewhere": strict,
        "range_above_one": p.range_ > 1,
        "top_rate_positive": p.rate(p.range_) > 0,
    }
    return ValidationReport(checks)


def drift_mean(p: RateKernel) -> float:
    """Mean displacement per unit time of a free particle: sum of z * p(z)."""
    return float(sum(z * r for z, r in p.rates.items()))


def bernoulli_current(p: RateKernel, rho: float) -> float:
    """Stationary current of the homogeneous process at product density rho.

    Equals rho*(1-rho) * sum_{k>=1} k*(p(k) - p(-k)), i.e. rho*(1-rho) times
    the drift mean.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    return rho * (1.0 - rho) * drift_mean(p)


@dataclass(frozen=True)
class KernelPair:
    """Directional split of a kernel: ``plus`` holds the rightward rates
    {p(k)}_{k>0}, ``minus`` the leftward rates {p(-k)}_{k>0} written as a
    reversed rightward kernel.  Both halves are non-increasing in the jump
    length, which is what the coupled simulator requires.
    """

    plus: Mapping[int, float]
    minus: Mapping[int, float]
    range_: int

    def __post_init__(self):
        object.__setattr__(self, "plus", MappingProxyType(dict(self.plus)))
        object.__setattr__(self, "minus", MappingProxyType(dict(self.minus)))

    def recombined(self, x: int, y: int) -> float:
        """Effective rate for a jump x -> y: plus(y-x) + minus(x-y)."""
        d = y - x
        if d > 0:
            return self.plus.get(d, 0.0)
        return self.minus.get(-d, 0.0)


def _monotone(rates: Mapping[int, float], span: int) -> bool:
    seq = [rates.get(k, 0.0) for k in range(1, span + 1)]
    return all(a >= b for a, b in zip(seq, seq[1:]))


def decompose_attractive(p: RateKernel) -> KernelPair:
    """Split ``p`` into directional halves, rejecting kernels whose
    directional rates increase with jump length."""
    plus = {k: r for k, r in p.rates.items() if k > 0}
    minus = {-k: r for k, r in p.rates.items() if k < 0}
    span = p.range_
    if not _monotone(plus, span):
        raise ValueError("rightward rates are not non-increasing in jump length")
    if not _monotone(minus, span):
        raise ValueError("leftward rates are not non-increasing in jump length")
    pair = KernelPair(plus=plus, minus=minus, range_=span)
    for d in range(-span, span + 1):
        if d == 0:
            continue
        if pair.recombined(0, d) != p.rate(d):
            raise AssertionError("directional split does not recombine to the kernel")
    return pair


#: Default bulk kernel used throughout the experiments: the smallest integer
#: kernel satisfying every validator at once (drift mean 1).
DEFAULT_KERNEL = RateKernel({1: 2.0, -1: 1.0, 2: 1.0, -2: 1.0})
