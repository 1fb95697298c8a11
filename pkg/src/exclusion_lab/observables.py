"""Statistical layer: cylinder functions, currents, Cesàro means, batch CIs.

Currents are measured two ways: by counting crossing events at a cut (the
low-variance default) and by time-averaging the instantaneous rate read off
the configuration.  Both estimate the same stationary mean, which the test
suite checks.  Confidence intervals come from batch means with a Student-t
quantile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from scipy import stats

from .kernels import RateKernel


@dataclass(frozen=True)
class CylinderSpec:
    """Sum of coefficient * product-of-site-indicators local functions.

    ``terms`` is a tuple of (coefficient, factors) where factors is a tuple
    of (site, wanted-bit): a factor contributes the indicator {occ(site) ==
    wanted}.  Example: occupied at -1 and vacant at 1 is one term with
    factors ((-1, 1), (1, 0)).
    """

    terms: tuple[tuple[float, tuple[tuple[int, int], ...]], ...]
    name: str

    def sites(self) -> tuple[int, ...]:
        out = set()
        for _, factors in self.terms:
            for site, _ in factors:
                out.add(site)
        return tuple(sorted(out))

    def evaluate(self, occ: Mapping[int, int]) -> float:
        value = 0.0
        for coef, factors in self.terms:
            prod = coef
            for site, want in factors:
                if occ[site] != want:
                    prod = 0.0
                    break
            value += prod
        return value


def occupancy_product(sites: Iterable[int], vacant: Iterable[int] = ()) -> CylinderSpec:
    """Indicator of 'all of ``sites`` occupied and all of ``vacant`` empty'."""
    occ_f = tuple((int(s), 1) for s in sites)
    vac_f = tuple((int(s), 0) for s in vacant)
    factors = occ_f + vac_f
    if len({s for s, _ in factors}) != len(factors):
        raise ValueError("cylinder sites must be distinct")
    name = "avg" + "".join(
        f"[x={s}]" if w else f"(1-x={s})" for s, w in factors
    )
    return CylinderSpec(terms=((1.0, factors),), name=name)


@dataclass(frozen=True)
class CurrentSpec:
    """Current across the cut between ``bond`` = (i, j); ``mode`` selects the
    counting estimator or the instantaneous configuration sum."""

    bond: tuple[int, int]
    mode: str = "counting"

    def __post_init__(self):
        i, j = self.bond
        if not (j == i + 1 or (i, j) == (-1, 1)):
            raise ValueError("bond must be adjacent sites or the cut (-1, 1)")
        if self.mode not in ("counting", "instantaneous"):
            raise ValueError(f"unknown current mode {self.mode!r}")

    @property
    def boundary(self) -> float:
        """Real coordinate of the cut; a jump x -> y crosses iff x < b < y."""
        i, j = self.bond
        return 0.0 if (i, j) == (-1, 1) else i + 0.5


def instantaneous_current(
    occ: Mapping[int, int],
    p: RateKernel,
    bond: tuple[int, int],
    exclude_origin: bool = True,
) -> float:
    """Net instantaneous crossing rate of the cut between bond = (i, j).

    Exact finite sum over source-target pairs straddling the cut within the
    kernel range:  sum p(y-x) occ(x)(1-occ(y)) - p(x-y) occ(y)(1-occ(x)).
    Raises KeyError (wrapped as ValueError) when the bond sits within range
    of the edge of the supplied window.
    """
    spec = CurrentSpec(bond)
    i, j = spec.bond
    span = p.range_
    value = 0.0
    try:
        for x in range(j - span, i + 1):
            for y in range(j, x + span + 1):
                if exclude_origin and (x == 0 or y == 0):
                    continue
                if y <= x:
                    continue
                value += p.rate(y - x) * occ[x] * (1 - occ[y])
                value -= p.rate(x - y) * occ[y] * (1 - occ[x])
    except KeyError as exc:
        raise ValueError(f"bond {bond} lies within kernel range of the window edge") from exc
    return value


def cesaro_translate(
    averages: Mapping[tuple[int, ...], float],
    base_set: Sequence[int],
    offsets: Iterable[int],
) -> float:
    """Arithmetic mean over ``offsets`` of the averaged product on the
    translated site set base_set + i.

    ``averages`` maps sorted site tuples to their time-averaged products; a
    missing translate means the request leaves the measured region.
    """
    base = tuple(sorted(int(s) for s in base_set))
    total = 0.0
    count = 0
    for i in offsets:
        key = tuple(s + i for s in base)
        if key not in averages:
            raise ValueError(f"translate {key} outside the measured region")
        total += averages[key]
        count += 1
    if count == 0:
        raise ValueError("no offsets supplied")
    return total / count


def g_profile(
    densities: Mapping[int, float], p: RateKernel, i_range: Iterable[int]
) -> list[float]:
    """Weighted sliding-window sums of site densities.

    For each i, returns sum over |j| <= R-1 of (sum_{k=|j|+1}^{R} p(k)) *
    density(i+j); under a zero-current invariant regime this sequence is
    non-decreasing in i.
    """
    span = p.range_
    weights = {j: sum(p.rate(k) for k in range(abs(j) + 1, span + 1)) for j in range(-span + 1, span)}
    out = []
    for i in i_range:
        try:
            out.append(sum(w * densities[i + j] for j, w in weights.items()))
        except KeyError as exc:
            raise ValueError(f"density at site {exc.args[0]} not available") from exc
    return out


@dataclass(frozen=True)
class BatchCI:
    """Batch-means confidence interval."""

    mean: float
    halfwidth: float
    batches: int
    confidence: float
    burn_in: float = 0.0
    degenerate: bool = False

    @property
    def lo(self) -> float:
        return self.mean - self.halfwidth

    @property
    def hi(self) -> float:
        return self.mean + self.halfwidth


def batch_ci(values: Sequence[float], confidence: float = 0.99, burn_in: float = 0.0) -> BatchCI:
    """Student-t interval over batch means (n-1 degrees of freedom)."""
    n = len(values)
    if n < 2:
        raise ValueError("need at least two batches")
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    if var <= 0.0:
        return BatchCI(mean, 0.0, n, confidence, burn_in, degenerate=True)
    q = float(stats.t.ppf(0.5 + confidence / 2.0, n - 1))
    hw = q * math.sqrt(var / n)
    return BatchCI(mean, hw, n, confidence, burn_in)


def mean_se(values: Sequence[float]) -> tuple[float, float]:
    """Sample mean and its standard error."""
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def agree_within(
    mean_a: float, se_a: float, mean_b: float, se_b: float, sigmas: float = 3.0
) -> bool:
    """Whether two estimates agree within ``sigmas`` combined standard errors."""
    return abs(mean_a - mean_b) <= sigmas * math.hypot(se_a, se_b)


def stats_csv(entries: Sequence[tuple[str, BatchCI, int]]) -> str:
    """Aggregated-statistics CSV: name, mean, ci_halfwidth, batches,
    replicas, burn_in.  Names are stable so downstream scripts can grep."""
    lines = ["name,mean,ci_halfwidth,batches,replicas,burn_in"]
    for name, ci, replicas in entries:
        lines.append(
            f"{name},{ci.mean!r},{ci.halfwidth!r},{ci.batches},{replicas},{ci.burn_in!r}"
        )
    return "\n".join(lines) + "\n"
