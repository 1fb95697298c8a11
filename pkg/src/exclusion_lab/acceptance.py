"""The verification suite: one runnable check per headline claim.

Each criterion runs at fixed desk-scale parameters with its tolerance pinned
here, produces an AcceptanceResult with the measured numbers, and never
raises on a statistical failure (failures are verdicts).  The obstacle
current estimate is a first-class cached artifact consumed by the dependent
criteria, so the suite is topologically ordered: the current estimate runs
before the error-bound and tagged-speed checks.

Determinism: every criterion derives its replica streams from (master seed,
criterion index), so `verify all --seed N` twice gives identical verdicts.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import environment, half_line, labeled_coupling
from .event_core import Clock
from .harness import ConfigError, GapSelection, select_tagged_gap
from .kernels import DEFAULT_KERNEL, TaggedKernel
from .observables import agree_within, batch_ci, mean_se, occupancy_product

P_STAR = DEFAULT_KERNEL
CONFIDENCE = 0.99

CRITERIA = (
    "coupling-order",
    "selector-oracle",
    "marginal-law",
    "bernoulli-current",
    "current-positivity",
    "error-bound",
    "constant-current",
    "halfline-density",
    "halfline-current-bound",
    "three-class-comparison",
    "identity-checks",
    "tagged-speed",
    "monotone-F",
    "shift-monotonicity",
)


@dataclass
class AcceptanceResult:
    criterion: str
    verdict: str  # "pass" | "fail" | "invalid"
    measured: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    notes: str = ""
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def line(self) -> str:
        idx = CRITERIA.index(self.criterion) + 1
        tail = f" ({self.notes})" if self.notes else ""
        return f"AC-{idx:02d} {self.criterion}: {self.verdict.upper()}{tail}"

    def to_dict(self) -> dict:
        # wall-clock elapsed stays out: verdict files must be byte-identical
        # for identical (criteria, seed) requests
        return {
            "criterion": self.criterion,
            "verdict": self.verdict,
            "measured": _plain(self.measured),
            "thresholds": _plain(self.thresholds),
            "seeds": self.seeds,
            "notes": self.notes,
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _seed_for(master: int, criterion: str) -> int:
    idx = CRITERIA.index(criterion)
    ss = np.random.SeedSequence(entropy=master, spawn_key=(idx,))
    return int(ss.generate_state(1)[0])


# --- criterion implementations ----------------------------------------------------


def _coupling_order(ctx: dict) -> AcceptanceResult:
    """Zero order violations across the coupled variants, >= 1e6 events."""
    seed = _seed_for(ctx["seed"], "coupling-order")
    q = TaggedKernel({1: 0.05, -1: 0.05})
    target_per_variant = 350_000
    totals = {}
    rng = np.random.default_rng(seed)
    violations = 0
    note = ""
    for variant in ("full", "right", "left"):
        events = 0
        replica = 0
        while events < target_per_variant:
            n = int(rng.integers(5, 41))
            upper, lower = labeled_coupling.make_ordered_pair(
                rng, n, span=60, exclude_origin=variant in ("right", "left")
            )
            pair = labeled_coupling.CoupledState(upper, lower)
            sim = labeled_coupling.CoupledSimulator(
                pair, P_STAR, q if variant in ("right", "left") else None,
                variant=variant, clock=Clock.from_seed(seed, replica),
            )
            try:
                sim.run_to(5.0)
            except labeled_coupling.OrderViolation as exc:
                violations += 1
                note = f"violation in {variant} replica {replica}: {exc}"
                break
            events += sim.events
            replica += 1
        totals[variant] = events
    total = sum(totals.values())
    verdict = "pass" if violations == 0 and total >= 1_000_000 else "fail"
    return AcceptanceResult(
        "coupling-order", verdict,
        measured={"events": totals, "total_events": total, "violations": violations},
        thresholds={"violations": 0, "min_events": 1_000_000},
        seeds=[seed], notes=note or f"{total} events, 0 violations",
    )


def _selector_oracle(ctx: dict) -> AcceptanceResult:
    """Selector post conditions verified case by case by exhaustive search."""
    seed = _seed_for(ctx["seed"], "selector-oracle")
    rng = np.random.default_rng(seed)
    cases = 0
    bad = 0
    note = ""
    while cases < 100_000:
        span = int(rng.integers(2, 5))
        n = int(rng.integers(2, 13))
        exclude = bool(rng.integers(0, 2))
        upper, lower = labeled_coupling.make_ordered_pair(
            rng, n, span=3 * n, exclude_origin=exclude
        )
        label = int(rng.integers(0, n))
        legal = [
            z for z in range(1, span + 1)
            if lower.legal_target(lower.pos[label] + z)
        ]
        if not legal:
            continue
        z = int(legal[rng.integers(0, len(legal))])
        zp = labeled_coupling.target_site(upper, lower, label, z, span)
        moved_lower = labeled_coupling.t_move(lower, label, z)
        # independent exhaustive check: which s in 0..span satisfy both posts
        # (the landing-site budget binds only when the upper actually moves)
        good = set()
        for s in range(span + 1):
            if s > 0 and not upper.legal_target(upper.pos[label] + s):
                continue
            if s > 0 and upper.pos[label] + s > lower.pos[label] + z:
                continue
            cand = labeled_coupling.t_move(upper, label, s) if s else upper
            if labeled_coupling.check_order(cand, moved_lower):
                good.add(s)
        cases += 1
        if zp not in good:
            bad += 1
            if not note:
                note = (
                    f"case upper={upper.pos} lower={lower.pos} i={label} z={z}"
                    f" -> z'={zp}, valid set {sorted(good)}"
                )
            break
    verdict = "pass" if bad == 0 else "fail"
    return AcceptanceResult(
        "selector-oracle", verdict,
        measured={"cases": cases, "failures": bad},
        thresholds={"failures": 0, "cases": 100_000},
        seeds=[seed], notes=note or f"{cases} cases",
    )


_MARG_DEPTH = 40
_MARG_T = 5.0
_MARG_REPS = 2000
_MARG_Q = {1: 0.05, -1: 0.05}


def _marginal_samples_standalone(generator, q, seed, reps):
    f_vals, d_vals = [], []
    for r in range(reps):
        st = labeled_coupling.packed_step_state(_MARG_DEPTH)
        sim = labeled_coupling.LabeledSimulator(
            st, P_STAR, q, generator=generator, clock=Clock.from_seed(seed, r)
        )
        sim.run_to(_MARG_T)
        if not sim.packed_valid:
            raise AssertionError("frozen block disturbed in a marginal-law run")
        f_vals.append(labeled_coupling.f_count(st))
        d_vals.append(st.position(0) + 1)
    return f_vals, d_vals


def _marginal_samples_coupled(variant, q, seed, reps):
    f_vals, d_vals = [], []
    for r in range(reps):
        pair = labeled_coupling.CoupledState(
            labeled_coupling.packed_step_state(_MARG_DEPTH),
            labeled_coupling.packed_step_state(_MARG_DEPTH),
        )
        sim = labeled_coupling.CoupledSimulator(
            pair, P_STAR, q, variant=variant, clock=Clock.from_seed(seed, r)
        )
        sim.run_to(_MARG_T)
        if not sim.packed_valid:
            raise AssertionError("frozen block disturbed in a marginal-law run")
        f_vals.append(labeled_coupling.f_count(pair.lower))
        d_vals.append(pair.lower.position(0) + 1)
    return f_vals, d_vals


def _marginal_law(ctx: dict) -> AcceptanceResult:
    """Coupled lower-marginal laws match the standalone generators."""
    seed = _seed_for(ctx["seed"], "marginal-law")
    q = TaggedKernel(_MARG_Q)
    plain_f, plain_d = _marginal_samples_standalone("plain", None, seed + 1, _MARG_REPS)
    left_f, left_d = _marginal_samples_standalone("left", q, seed + 2, _MARG_REPS)
    comparisons = {
        "full": ((plain_f, plain_d), None),
        "right": ((plain_f, plain_d), q),
        "left": ((left_f, left_d), q),
    }
    pvals = {}
    alpha = 0.01
    for k, (variant, ((ref_f, ref_d), qq)) in enumerate(comparisons.items()):
        got_f, got_d = _marginal_samples_coupled(variant, qq, seed + 10 + k, _MARG_REPS)
        pvals[f"{variant}:f_count"] = float(stats.ks_2samp(ref_f, got_f).pvalue)
        pvals[f"{variant}:displacement"] = float(stats.ks_2samp(ref_d, got_d).pvalue)
    verdict = "pass" if all(p > alpha for p in pvals.values()) else "fail"
    return AcceptanceResult(
        "marginal-law", verdict,
        measured={"p_values": pvals, "replicas_per_side": _MARG_REPS},
        thresholds={"alpha": alpha},
        seeds=[seed],
        notes="min p = %.3f" % min(pvals.values()),
    )


def _bernoulli_current(ctx: dict) -> AcceptanceResult:
    """Ring current at half filling matches rho(1-rho) times the drift mean."""
    seed = _seed_for(ctx["seed"], "bernoulli-current")
    samples = []
    for r in range(16):
        clock = Clock.from_seed(seed, r)
        sim = environment.TorusSimulator(256, P_STAR, 0.5, clock=clock)
        sim.run_to(200.0)
        samples.append(sim.flux / (sim.L * 200.0))
    mean, se = mean_se(samples)
    target = 0.25
    tol = 0.01
    verdict = "pass" if abs(mean - target) <= tol else "fail"
    return AcceptanceResult(
        "bernoulli-current", verdict,
        measured={"current": mean, "se": se},
        thresholds={"target": target, "tolerance": tol},
        seeds=[seed], notes=f"current={mean:.4f}",
    )


_BLOCKAGE_W = 400
_BLOCKAGE_T = 50.0
_BLOCKAGE_REPS = 64


def _blockage_reports(seed: int, q: TaggedKernel | None, reps: int, cuts=(0.0,), cylinders=(), snapshot_times=()):
    out = []
    for r in range(reps):
        st = environment.step_state(_BLOCKAGE_W)
        out.append(
            environment.simulate_env(
                st, P_STAR, q, _BLOCKAGE_T,
                clock=Clock.from_seed(seed, r), burn_in=0.2, batches=10,
                cuts=cuts, cylinders=cylinders, snapshot_times=snapshot_times,
                monitor=True,
            )
        )
    return out


def _current_positivity(ctx: dict) -> AcceptanceResult:
    """Obstacle current from the step start is positive and time-stable."""
    seed = _seed_for(ctx["seed"], "current-positivity")
    reports = _blockage_reports(seed, None, _BLOCKAGE_REPS, snapshot_times=(_BLOCKAGE_T / 2,))
    invalid = sum(not rep.valid for rep in reports)
    full = [rep.net_crossings / _BLOCKAGE_T for rep in reports]
    half = [
        (rep.snapshots[_BLOCKAGE_T / 2]["right_crossings"]
         - rep.snapshots[_BLOCKAGE_T / 2]["left_crossings"]) / (_BLOCKAGE_T / 2)
        for rep in reports
    ]
    ci = batch_ci(full, CONFIDENCE)
    m_half, _ = mean_se(half)
    drift = abs(m_half - ci.mean) / ci.mean if ci.mean > 0 else math.inf
    verdict = "pass" if invalid == 0 and ci.lo > 0 and drift < 0.15 else "fail"
    if invalid:
        verdict = "invalid"
    ctx["c1"] = ci.mean
    ctx["c1_ci"] = ci
    ctx["blockage_reports"] = reports
    ctx["blockage_seed"] = seed
    _write_c1_artifact(ctx)
    return AcceptanceResult(
        "current-positivity", verdict,
        measured={"c1": ci.mean, "ci": [ci.lo, ci.hi], "half_horizon": m_half,
                  "stability_rel_diff": drift, "invalid_runs": invalid},
        thresholds={"ci_excludes_zero": True, "stability": 0.15},
        seeds=[seed], notes=f"C1={ci.mean:.4f}, drift {100 * drift:.1f}%",
    )


def _write_c1_artifact(ctx: dict) -> None:
    art_dir = ctx.get("artifacts")
    if art_dir is None:
        return
    art_dir = Path(art_dir)
    art_dir.mkdir(parents=True, exist_ok=True)
    ci = ctx["c1_ci"]
    blob = {
        "c1": ctx["c1"],
        "ci": [ci.lo, ci.hi],
        "halfwidth": ci.halfwidth,
        "seed": ctx["blockage_seed"],
        "window": _BLOCKAGE_W,
        "horizon": _BLOCKAGE_T,
        "replicas": _BLOCKAGE_REPS,
        "kernel": {str(z): r for z, r in sorted(P_STAR.rates.items())},
    }
    (art_dir / "c1.json").write_text(json.dumps(_plain(blob), indent=2, sort_keys=True) + "\n")


def _load_c1(ctx: dict) -> tuple[float, object]:
    if "c1" in ctx:
        return ctx["c1"], ctx.get("c1_ci")
    art_dir = ctx.get("artifacts")
    if art_dir is not None:
        path = Path(art_dir) / "c1.json"
        if path.exists():
            blob = json.loads(path.read_text())
            lo, hi = blob["ci"]
            from .observables import BatchCI

            ci = BatchCI(blob["c1"], blob["halfwidth"], blob["replicas"], CONFIDENCE)
            ctx["c1"], ctx["c1_ci"] = blob["c1"], ci
            return blob["c1"], ci
    raise ConfigError("no cached obstacle current: run current-positivity first")


def _error_bound(ctx: dict) -> AcceptanceResult:
    """A slow tagged walker moves the mean current by at most q(1)+q(-1)."""
    seed = _seed_for(ctx["seed"], "error-bound")
    c1, c1_ci = _load_c1(ctx)
    q = TaggedKernel({1: 0.01, -1: 0.012})
    reports = _blockage_reports(seed, q, _BLOCKAGE_REPS)
    invalid = sum(not rep.valid for rep in reports)
    ci = batch_ci([rep.net_crossings / _BLOCKAGE_T for rep in reports], CONFIDENCE)
    budget = q.rate(1) + q.rate(-1)  # the perturbation bound per unit time
    allowance = budget + ci.halfwidth + c1_ci.halfwidth
    gap = abs(ci.mean - c1)
    verdict = "pass" if invalid == 0 and gap <= allowance else "fail"
    if invalid:
        verdict = "invalid"
    return AcceptanceResult(
        "error-bound", verdict,
        measured={"tagged_mean": ci.mean, "c1": c1, "gap": gap, "invalid_runs": invalid},
        thresholds={"allowance": allowance, "rate_budget": budget},
        seeds=[seed], notes=f"gap={gap:.4f} <= {allowance:.4f}",
    )


def _constant_current(ctx: dict) -> AcceptanceResult:
    """Burned-in counting currents agree across bulk cuts.

    Runs longer than the current estimate (T=150, wider window, 60% burn-in)
    so the slow density relaxation around the obstacle has settled before
    the averaged span.
    """
    seed = _seed_for(ctx["seed"], "constant-current")
    cuts = (0.0, 5.5, 10.5)
    reports = []
    for r in range(_BLOCKAGE_REPS):
        st = environment.step_state(800)
        reports.append(
            environment.simulate_env(
                st, P_STAR, None, 150.0,
                clock=Clock.from_seed(seed, r), burn_in=0.6, batches=10,
                cuts=cuts, monitor=True,
            )
        )
    invalid = sum(not rep.valid for rep in reports)
    names = list(reports[0].cut_rates_burned)
    measured = {}
    stats_by_cut = {}
    for name in names:
        vals = [rep.cut_rates_burned[name] for rep in reports]
        stats_by_cut[name] = mean_se(vals)
        measured[name] = stats_by_cut[name][0]
    ok = True
    worst = 0.0
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            ma, sa = stats_by_cut[a]
            mb, sb = stats_by_cut[b]
            sep = abs(ma - mb) / max(math.hypot(sa, sb), 1e-300)
            worst = max(worst, sep)
            ok = ok and agree_within(ma, sa, mb, sb, 3.0)
    verdict = "pass" if ok and invalid == 0 else ("invalid" if invalid else "fail")
    return AcceptanceResult(
        "constant-current", verdict,
        measured={"currents": measured, "worst_separation_sigmas": worst,
                  "invalid_runs": invalid},
        thresholds={"sigmas": 3.0},
        seeds=[seed], notes=f"worst separation {worst:.2f} sigma",
    )


def _halfline_density(ctx: dict) -> AcceptanceResult:
    """Window Cesaro densities of the half-line process with full creation."""
    seed = _seed_for(ctx["seed"], "halfline-density")
    out = half_line.run_half_line_creation(
        200, P_STAR, 400.0, seed=seed, replicas=8, burn_in=0.2, batches=10,
        window=(50, 150),
    )
    single, pair = out["single"], out["pair"]
    ok1 = abs(single.mean - 0.5) <= 0.03
    ok2 = abs(pair.mean - 0.25) <= 0.04
    verdict = "pass" if ok1 and ok2 else "fail"
    ctx["halfline_out"] = out
    return AcceptanceResult(
        "halfline-density", verdict,
        measured={"single": single.mean, "single_hw": single.halfwidth,
                  "pair": pair.mean, "pair_hw": pair.halfwidth},
        thresholds={"single": [0.47, 0.53], "pair": [0.21, 0.29]},
        seeds=[seed],
        notes=f"single={single.mean:.3f}, pair={pair.mean:.3f}",
    )


def _halfline_current_bound(ctx: dict) -> AcceptanceResult:
    """Mid-segment current does not fall below the reservoir bound."""
    seed = _seed_for(ctx["seed"], "halfline-current-bound")
    out = half_line.current_bound_check(
        1, 100, P_STAR, 0.5, 0.0, seed=seed,
        horizon=1200.0, burn_in=0.5, replicas=8, confidence=CONFIDENCE,
    )
    ci = out["measured"]
    verdict = "pass" if out["passed"] else "fail"
    return AcceptanceResult(
        "halfline-current-bound", verdict,
        measured={"current": ci.mean, "halfwidth": ci.halfwidth},
        thresholds={"bound": out["bound"]},
        seeds=[seed],
        notes=f"{ci.mean:.4f} >= {out['bound']} - {ci.halfwidth:.4f}",
    )


def _three_class(ctx: dict) -> AcceptanceResult:
    """Occupation beyond the threshold is dominated by the never-visited check."""
    seed = _seed_for(ctx["seed"], "three-class-comparison")
    sets = [(1,), (1, 2)]
    reps = 1200
    cls = half_line.run_three_class(120, P_STAR, 20.0, sets, seed=seed, replicas=reps)
    blk = half_line.run_blockage_indicator(
        120, P_STAR, 20.0, sets, seed=seed + 1, replicas=reps
    )
    ok = True
    measured = {}
    for B in sets:
        m3, s3, _ = cls["estimates"][B]
        mb, sb, _ = blk["estimates"][B]
        margin = m3 + 3.0 * math.hypot(s3, sb) - mb
        measured[str(B)] = {"blockage": mb, "three_class": m3, "margin": margin}
        ok = ok and margin >= 0.0
    invalid = cls["invalid"] + blk["invalid"]
    verdict = "pass" if ok and invalid == 0 else ("invalid" if invalid else "fail")
    return AcceptanceResult(
        "three-class-comparison", verdict,
        measured={"sets": measured, "invalid_runs": invalid,
                  "class3_entered": cls["class3_entered"]},
        thresholds={"sigmas": 3.0},
        seeds=[seed], notes="dominance holds" if ok else "dominance violated",
    )


def _tagged_reports(ctx: dict) -> list:
    if "tagged_reports" not in ctx:
        c1, _ = _load_c1(ctx)
        gap = select_tagged_gap(c1, 0.01, P_STAR)
        ctx["gap"] = gap
        seed = _seed_for(ctx["seed"], "tagged-speed")
        q = TaggedKernel({1: gap.q_plus, -1: gap.q_minus})
        cylinders = [
            occupancy_product([-1], [1]),
            occupancy_product([1], [-1]),
            occupancy_product([], [1]),
            occupancy_product([], [-1]),
        ]
        reports = []
        for r in range(128):
            st = environment.step_state(_BLOCKAGE_W)
            reports.append(
                environment.simulate_env(
                    st, P_STAR, q, _BLOCKAGE_T,
                    clock=Clock.from_seed(seed, r), burn_in=0.2, batches=10,
                    cylinders=cylinders, monitor=True,
                )
            )
        ctx["tagged_reports"] = reports
        ctx["tagged_seed"] = seed
        ctx["tagged_q"] = q
    return ctx["tagged_reports"]


def _identity_checks(ctx: dict) -> AcceptanceResult:
    """Counting currents match their compensator time averages."""
    reports = _tagged_reports(ctx)
    q = ctx["tagged_q"]
    lhs1, rhs1, lhs2, rhs2 = [], [], [], []
    for rep in reports:
        a = rep.averages_full
        lhs1.append(
            P_STAR.rate(2) * a["avg[x=-1](1-x=1)"] - P_STAR.rate(-2) * a["avg[x=1](1-x=-1)"]
        )
        rhs1.append(rep.net_crossings / rep.horizon)
        lhs2.append(q.rate(1) * a["avg(1-x=1)"] - q.rate(-1) * a["avg(1-x=-1)"])
        rhs2.append(rep.displacement / rep.horizon)
    m1l, s1l = mean_se(lhs1)
    m1r, s1r = mean_se(rhs1)
    m2l, s2l = mean_se(lhs2)
    m2r, s2r = mean_se(rhs2)
    ok1 = agree_within(m1l, s1l, m1r, s1r, 3.0)
    ok2 = agree_within(m2l, s2l, m2r, s2r, 3.0)
    invalid = sum(not rep.valid for rep in reports)
    verdict = "pass" if ok1 and ok2 and invalid == 0 else ("invalid" if invalid else "fail")
    return AcceptanceResult(
        "identity-checks", verdict,
        measured={
            "crossing_identity": {"compensator": m1l, "count": m1r},
            "displacement_identity": {"compensator": m2l, "count": m2r},
            "invalid_runs": invalid,
        },
        thresholds={"sigmas": 3.0},
        seeds=[ctx.get("tagged_seed", -1)],
        notes=f"crossing {m1l:.4f}~{m1r:.4f}, displacement {m2l:.5f}~{m2r:.5f}",
    )


def _tagged_speed(ctx: dict) -> AcceptanceResult:
    """Headline check: negative-drift tagged walker with positive speed."""
    reports = _tagged_reports(ctx)
    gap: GapSelection = ctx["gap"]
    speeds = [rep.displacement / rep.horizon for rep in reports]
    ci = batch_ci(speeds, CONFIDENCE)
    floor = 0.5 * gap.predicted_bound
    invalid = sum(not rep.valid for rep in reports)
    excludes = ci.lo > 0.0
    verdict = "pass" if excludes and ci.mean >= floor and invalid == 0 else "fail"
    if invalid:
        verdict = "invalid"
    return AcceptanceResult(
        "tagged-speed", verdict,
        measured={
            "speed": ci.mean, "ci": [ci.lo, ci.hi],
            "q_minus": gap.q_minus, "predicted_bound": gap.predicted_bound,
            "invalid_runs": invalid,
        },
        thresholds={"ci_excludes_zero": True, "floor": floor},
        seeds=[ctx.get("tagged_seed", -1)],
        notes=f"speed={ci.mean:.5f}, CI=[{ci.lo:.5f},{ci.hi:.5f}], floor={floor:.5f}",
    )


def _monotone_f(ctx: dict) -> AcceptanceResult:
    """The left-block label count is antitone in the componentwise order."""
    seed = _seed_for(ctx["seed"], "monotone-F")
    rng = np.random.default_rng(seed)
    cases = 0
    bad = 0
    while cases < 10_000:
        n = int(rng.integers(2, 25))
        upper, lower = labeled_coupling.make_ordered_pair(rng, n, span=40)
        if upper.pos[0] > -1 or lower.pos[0] > -1:
            continue
        cases += 1
        if labeled_coupling.f_count(upper) > labeled_coupling.f_count(lower):
            bad += 1
            break
    verdict = "pass" if bad == 0 else "fail"
    return AcceptanceResult(
        "monotone-F", verdict,
        measured={"cases": cases, "failures": bad},
        thresholds={"failures": 0},
        seeds=[seed], notes=f"{cases} ordered pairs",
    )


def _shift_monotonicity(ctx: dict) -> AcceptanceResult:
    """Tagged shifts move a cloud up: away-shift and shift-with-relabel."""
    seed = _seed_for(ctx["seed"], "shift-monotonicity")
    rng = np.random.default_rng(seed)
    checked = {"theta": 0, "relabel": 0}
    bad = 0
    trials = 0
    while (checked["theta"] < 5000 or checked["relabel"] < 5000) and trials < 200_000:
        trials += 1
        n = int(rng.integers(2, 25))
        state, _ = labeled_coupling.make_ordered_pair(rng, n, span=40)
        z = int(rng.integers(1, 3))
        if not state.is_occupied(-z):
            shifted = labeled_coupling.theta_shift(state, -z)
            checked["theta"] += 1
            if not labeled_coupling.check_order(shifted, state):
                bad += 1
                break
        if not state.is_occupied(z):
            shifted = labeled_coupling.s_relabel(labeled_coupling.theta_shift(state, z), z)
            checked["relabel"] += 1
            if not labeled_coupling.check_order(shifted, state):
                bad += 1
                break
    verdict = "pass" if bad == 0 and min(checked.values()) >= 5000 else "fail"
    return AcceptanceResult(
        "shift-monotonicity", verdict,
        measured={"checked": checked, "failures": bad},
        thresholds={"failures": 0, "min_cases": 5000},
        seeds=[seed], notes=f"{checked} cases",
    )


_IMPLS: dict[str, Callable[[dict], AcceptanceResult]] = {
    "coupling-order": _coupling_order,
    "selector-oracle": _selector_oracle,
    "marginal-law": _marginal_law,
    "bernoulli-current": _bernoulli_current,
    "current-positivity": _current_positivity,
    "error-bound": _error_bound,
    "constant-current": _constant_current,
    "halfline-density": _halfline_density,
    "halfline-current-bound": _halfline_current_bound,
    "three-class-comparison": _three_class,
    "identity-checks": _identity_checks,
    "tagged-speed": _tagged_speed,
    "monotone-F": _monotone_f,
    "shift-monotonicity": _shift_monotonicity,
}


def run_suite(
    ids: Sequence[str] | str = "all",
    *,
    seed: int = 7,
    artifacts: str | Path | None = None,
    out: str | Path | None = None,
    echo: bool = True,
) -> list[AcceptanceResult]:
    """Run the requested criteria (in dependency order) and report verdicts.

    ``artifacts`` is the directory holding the cached obstacle-current
    estimate; criteria that need it and do not find it fail with an
    instruction to run current-positivity first.
    """
    if ids == "all" or ids == ["all"]:
        wanted = list(CRITERIA)
    else:
        wanted = [ids] if isinstance(ids, str) else list(ids)
        unknown = [w for w in wanted if w not in CRITERIA]
        if unknown:
            raise ConfigError(f"unknown criteria: {', '.join(unknown)}")
        wanted.sort(key=CRITERIA.index)
    ctx: dict = {"seed": seed, "artifacts": artifacts}
    results = []
    for name in wanted:
        start = time.time()
        try:
            res = _IMPLS[name](ctx)
        except ConfigError as exc:
            res = AcceptanceResult(name, "fail", notes=str(exc))
        res.elapsed = time.time() - start
        results.append(res)
        if echo:
            print(res.line(), flush=True)
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "seed": seed,
            "verdicts": [r.to_dict() for r in results],
            "all_pass": all(r.passed for r in results),
        }
        out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return results
