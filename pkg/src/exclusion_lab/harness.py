"""Experiment configuration, replica orchestration, and result files.

Configs are TOML files with signed-integer string keys for kernels.  Every
run is deterministic given (config, seed): replica r draws its stream from
the master seed through a splittable derivation, and aggregation is a pure
fold over the per-replica reports in replica order.  Each CSV is written
together with a manifest (full config, config hash, package version) that
suffices to reproduce it.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__, environment, half_line, labeled_coupling
from .event_core import Clock
from .kernels import (
    RateKernel,
    TaggedKernel,
    validate_blockage_kernel,
    validate_env_kernel,
)
from .observables import occupancy_product

EXPERIMENTS = ("env", "torus", "halfline", "threeclass", "couple")


class ConfigError(ValueError):
    """A config failed validation; the message names the offending field."""


def _kernel_table(raw: Mapping[str, Any], label: str) -> dict[int, float]:
    out = {}
    for key, val in raw.items():
        try:
            z = int(key)
        except ValueError as exc:
            raise ConfigError(f"{label}: displacement key {key!r} is not an integer") from exc
        out[z] = float(val)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated description of one experiment."""

    experiment: str
    p: RateKernel
    q: TaggedKernel | None
    horizon: float
    replicas: int
    seed: int
    burn_in: float = 0.2
    batches: int = 10
    confidence: float = 0.99
    geometry: Mapping[str, Any] = field(default_factory=dict)
    cylinders: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...] = ()
    cuts: tuple[float, ...] = ()
    snapshot_times: tuple[float, ...] = ()

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: unknown id {self.experiment!r}")
        if self.horizon < 0:
            raise ConfigError("horizon: must be non-negative")
        if self.replicas <= 0:
            raise ConfigError("replicas: must be positive")
        if not 0.0 <= self.burn_in < 1.0:
            raise ConfigError("burn_in: must be a fraction in [0, 1)")
        if self.batches < 1:
            raise ConfigError("batches: must be at least 1")
        if not 0.5 < self.confidence < 1.0:
            raise ConfigError("confidence: must lie in (0.5, 1)")
        geo = self.geometry
        if self.experiment in ("env", "threeclass"):
            window = int(geo.get("window", 0))
            if window < self.p.range_:
                raise ConfigError("geometry.window: must be at least the kernel range")
            init = geo.get("init", "step")
            if init not in ("step", "bernoulli") and not isinstance(init, list):
                raise ConfigError("geometry.init: expected 'step', 'bernoulli', or a bit list")
            if init == "bernoulli" and not 0.0 <= float(geo.get("density", -1)) <= 1.0:
                raise ConfigError("geometry.density: required in [0,1] for bernoulli init")
            if self.q is not None and self.q.rates:
                if self.experiment == "threeclass":
                    raise ConfigError("q: the three-class run keeps the obstacle static")
                report = validate_env_kernel(self.p)
                if not report.ok:
                    raise ConfigError(
                        f"p: fails the tagged-run conditions: {report.failed()}"
                    )
                if not self.q.nearest_neighbor:
                    raise ConfigError("q: tagged jumps must be nearest-neighbor")
            else:
                report = validate_blockage_kernel(self.p)
                if not report.ok:
                    raise ConfigError(f"p: fails the obstacle-run conditions: {report.failed()}")
        elif self.experiment == "torus":
            if int(geo.get("length", 0)) <= 2 * self.p.range_ + 2:
                raise ConfigError("geometry.length: ring too small for the kernel range")
            if not 0.0 <= float(geo.get("density", -1.0)) <= 1.0:
                raise ConfigError("geometry.density: required in [0,1]")
        elif self.experiment == "halfline":
            seg = geo.get("segment")
            if not (isinstance(seg, (list, tuple)) and len(seg) == 2 and seg[0] <= seg[1]):
                raise ConfigError("geometry.segment: expected [m, n] with m <= n")
            if seg[1] - seg[0] < 2 * self.p.range_ + 1:
                raise ConfigError("geometry.segment: shorter than twice the kernel range")
            for name in ("lambda_left", "rho_right"):
                if not 0.0 <= float(geo.get(name, -1.0)) <= 1.0:
                    raise ConfigError(f"geometry.{name}: required in [0,1]")
        elif self.experiment == "couple":
            variant = geo.get("variant", "full")
            if variant not in labeled_coupling.CoupledSimulator.VARIANTS:
                raise ConfigError(f"geometry.variant: unknown {variant!r}")
            if variant in ("right", "left") and (self.q is None or not self.q.rates):
                raise ConfigError("q: tagged variants need a tagged kernel")
            mode = geo.get("mode", "cloud")
            if mode not in ("cloud", "packed"):
                raise ConfigError("geometry.mode: expected 'cloud' or 'packed'")
            if mode == "cloud" and int(geo.get("particles", 0)) < 1:
                raise ConfigError("geometry.particles: must be positive")
            if mode == "packed" and int(geo.get("depth", 0)) < 1:
                raise ConfigError("geometry.depth: must be positive")
            try:
                labeled_coupling.decompose_attractive(self.p)
            except ValueError as exc:
                raise ConfigError(f"p: {exc}") from exc

    # --- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "experiment": self.experiment,
            "horizon": self.horizon,
            "replicas": self.replicas,
            "seed": self.seed,
            "burn_in": self.burn_in,
            "batches": self.batches,
            "confidence": self.confidence,
            "p": {str(z): r for z, r in sorted(self.p.rates.items())},
        }
        if self.q is not None:
            out["q"] = {str(z): r for z, r in sorted(self.q.rates.items())}
        if self.geometry:
            out["geometry"] = dict(self.geometry)
        if self.cylinders:
            out["observables"] = {
                "cylinders": [
                    {"occupied": list(occ), "vacant": list(vac)} for occ, vac in self.cylinders
                ]
            }
        if self.cuts:
            out.setdefault("observables", {})["cuts"] = list(self.cuts)
        if self.snapshot_times:
            out.setdefault("observables", {})["snapshot_times"] = list(self.snapshot_times)
        return out

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ExperimentConfig":
        data = dict(raw)
        missing = [k for k in ("experiment", "horizon", "replicas", "seed", "p") if k not in data]
        if missing:
            raise ConfigError(f"missing required fields: {', '.join(missing)}")
        try:
            p = RateKernel(_kernel_table(data["p"], "p"))
        except ValueError as exc:
            raise ConfigError(f"p: {exc}") from exc
        q = None
        if "q" in data and data["q"]:
            try:
                q = TaggedKernel(_kernel_table(data["q"], "q"))
            except ValueError as exc:
                raise ConfigError(f"q: {exc}") from exc
        obs = data.get("observables", {})
        cylinders = tuple(
            (tuple(int(s) for s in c.get("occupied", ())), tuple(int(s) for s in c.get("vacant", ())))
            for c in obs.get("cylinders", ())
        )
        cfg = cls(
            experiment=str(data["experiment"]),
            p=p,
            q=q,
            horizon=float(data["horizon"]),
            replicas=int(data["replicas"]),
            seed=int(data["seed"]),
            burn_in=float(data.get("burn_in", 0.2)),
            batches=int(data.get("batches", 10)),
            confidence=float(data.get("confidence", 0.99)),
            geometry=dict(data.get("geometry", {})),
            cylinders=cylinders,
            cuts=tuple(float(c) for c in obs.get("cuts", ())),
            snapshot_times=tuple(float(t) for t in obs.get("snapshot_times", ())),
        )
        cfg.validate()
        return cfg

    @classmethod
    def from_toml(cls, text: str) -> "ExperimentConfig":
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config is not valid TOML: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_path(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_toml(Path(path).read_text())

    def to_toml(self) -> str:
        return _emit_toml(self.to_dict())

    def sha256(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def replace(self, **changes) -> "ExperimentConfig":
        data = self.to_dict()
        for key, value in changes.items():
            data[key] = value
        return ExperimentConfig.from_dict(data)


def _emit_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_emit_value(v) for v in value) + "]"
    if isinstance(value, Mapping):
        items = ", ".join(f"{json.dumps(str(k))} = {_emit_value(v)}" for k, v in value.items())
        return "{" + items + "}"
    raise TypeError(f"cannot serialize {type(value)!r}")


def _toml_key(key: str) -> str:
    bare = key and all(c.isalnum() or c in "_-" for c in key)
    return key if bare else json.dumps(key)


def _emit_toml(data: Mapping[str, Any]) -> str:
    """Minimal TOML writer for the restricted config shape."""
    lines = []
    tables = {}
    for key, value in data.items():
        if isinstance(value, Mapping):
            tables[key] = value
        else:
            lines.append(f"{_toml_key(key)} = {_emit_value(value)}")
    for key, value in tables.items():
        lines.append("")
        lines.append(f"[{_toml_key(key)}]")
        for k, v in value.items():
            lines.append(f"{_toml_key(str(k))} = {_emit_value(v)}")
    return "\n".join(lines) + "\n"


# --- experiment dispatch ---------------------------------------------------------


def _env_state_for(cfg: ExperimentConfig, clock: Clock) -> environment.EnvState:
    geo = cfg.geometry
    window = int(geo["window"])
    init = geo.get("init", "step")
    lam = float(geo.get("lambda_left", 1.0))
    rho = float(geo.get("rho_right", 0.0))
    if init == "step":
        return environment.step_state(window, lam, rho)
    if init == "bernoulli":
        return environment.bernoulli_state(window, float(geo["density"]), clock.rng, lam, rho)
    return environment.explicit_state(window, list(init), lam, rho)


def _run_env(cfg: ExperimentConfig) -> list[environment.EnvReport]:
    cylinders = [occupancy_product(occ, vac) for occ, vac in cfg.cylinders]
    monitor = cfg.geometry.get("init", "step") == "step"
    reports = []
    for r in range(cfg.replicas):
        clock = Clock.from_seed(cfg.seed, r)
        state = _env_state_for(cfg, clock)
        reports.append(
            environment.simulate_env(
                state, cfg.p, cfg.q, cfg.horizon,
                clock=clock, burn_in=cfg.burn_in, batches=cfg.batches,
                cuts=cfg.cuts or (0.0,), cylinders=cylinders,
                snapshot_times=cfg.snapshot_times, monitor=monitor,
            )
        )
    return reports


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None) -> dict:
    """Run all replicas of an experiment; optionally write CSV + manifest.

    Returns a dict with the per-replica reports and the CSV text.  Identical
    (config, seed) pairs produce byte-identical CSV.
    """
    cfg.validate()
    result: dict[str, Any] = {"config": cfg}
    if cfg.experiment in ("env",):
        reports = _run_env(cfg)
        names = [occupancy_product(occ, vac).name for occ, vac in cfg.cylinders]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["replica", "T", "N_T", "D_T", "r_T", "l_T", "valid"] + names)
        for r, rep in enumerate(reports):
            writer.writerow(
                [r, rep.horizon, rep.net_crossings, rep.displacement,
                 rep.tagged_right, rep.tagged_left, int(rep.valid)]
                + [repr(rep.averages_full[n]) for n in names]
            )
        result["reports"] = reports
        result["csv"] = buf.getvalue()
        if names:
            from .observables import batch_ci, stats_csv

            entries = []
            for n in names:
                samples = [b[n] for rep in reports for b in rep.batch_averages]
                entries.append((n, batch_ci(samples, cfg.confidence, cfg.burn_in),
                                cfg.replicas))
            result["stats_csv"] = stats_csv(entries)
    elif cfg.experiment == "torus":
        rows = []
        for r in range(cfg.replicas):
            clock = Clock.from_seed(cfg.seed, r)
            sim = environment.TorusSimulator(
                int(cfg.geometry["length"]), cfg.p, float(cfg.geometry["density"]), clock=clock
            )
            sim.run_to(cfg.horizon)
            rows.append((r, cfg.horizon, sim.events, sim.flux,
                         sim.flux / (sim.L * cfg.horizon) if cfg.horizon > 0 else 0.0))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["replica", "T", "events", "flux", "ring_current"])
        for row in rows:
            writer.writerow([row[0], row[1], row[2], row[3], repr(row[4])])
        result["rows"] = rows
        result["csv"] = buf.getvalue()
    elif cfg.experiment == "halfline":
        m, n = (int(v) for v in cfg.geometry["segment"])
        lam = float(cfg.geometry["lambda_left"])
        rho = float(cfg.geometry["rho_right"])
        init = cfg.geometry.get("init", "empty")
        sets = [(s,) for s in range(m, n + 1)]
        reports = []
        for r in range(cfg.replicas):
            clock = Clock.from_seed(cfg.seed, r)
            if init == "empty":
                state = half_line.empty_segment(m, n, lam, rho)
            else:
                state = half_line.bernoulli_segment(
                    m, n, float(cfg.geometry["density"]), clock.rng, lam, rho
                )
            reports.append(
                half_line.simulate_segment(
                    state, cfg.p, cfg.horizon, clock=clock,
                    burn_in=cfg.burn_in, batches=cfg.batches,
                    cuts=cfg.cuts, product_sets=sets,
                )
            )
        from .observables import batch_ci

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["site", "avg_density", "ci_halfwidth"])
        for s in range(m, n + 1):
            samples = [b[(s,)] for rep in reports for b in rep.batch_product_averages]
            if len(samples) >= 2:
                ci = batch_ci(samples, cfg.confidence, cfg.burn_in)
                writer.writerow([s, repr(ci.mean), repr(ci.halfwidth)])
            else:
                writer.writerow([s, repr(samples[0]), repr(0.0)])
        result["reports"] = reports
        result["csv"] = buf.getvalue()
    elif cfg.experiment == "threeclass":
        window = int(cfg.geometry["window"])
        sets = [tuple(int(x) for x in B) for B in cfg.geometry.get("sets", [[1]])]
        est = half_line.run_three_class(
            window, cfg.p, cfg.horizon, sets, seed=cfg.seed, replicas=cfg.replicas
        )
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["set", "estimate", "se", "replicas", "invalid"])
        for B, (mean, se, count) in sorted(est["estimates"].items()):
            writer.writerow([json.dumps(list(B)), repr(mean), repr(se), count, est["invalid"]])
        result["estimates"] = est
        result["csv"] = buf.getvalue()
    elif cfg.experiment == "couple":
        result.update(_run_couple(cfg))
    else:  # pragma: no cover - validate() guards this
        raise ConfigError(f"experiment: unknown id {cfg.experiment!r}")

    if out is not None:
        out = Path(out)
        out.write_text(result["csv"])
        if "stats_csv" in result:
            out.with_suffix(out.suffix + ".stats.csv").write_text(result["stats_csv"])
        manifest = {
            "config": cfg.to_dict(),
            "config_sha256": cfg.sha256(),
            "version": __version__,
            "csv": out.name,
        }
        out.with_suffix(out.suffix + ".manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        )
    return result


def _run_couple(cfg: ExperimentConfig) -> dict:
    geo = cfg.geometry
    variant = geo.get("variant", "full")
    mode = geo.get("mode", "cloud")
    rows = []
    violation = None
    for r in range(cfg.replicas):
        clock = Clock.from_seed(cfg.seed, r)
        if mode == "cloud":
            upper, lower = labeled_coupling.make_ordered_pair(
                clock.rng, int(geo["particles"]),
                span=int(geo.get("span_sites", 40)),
                exclude_origin=variant in ("right", "left"),
            )
        else:
            depth = int(geo["depth"])
            upper = labeled_coupling.packed_step_state(depth)
            lower = labeled_coupling.packed_step_state(depth)
        pair = labeled_coupling.CoupledState(upper, lower)
        sim = labeled_coupling.CoupledSimulator(
            pair, cfg.p, cfg.q, variant=variant, clock=clock, keep_log=True
        )
        try:
            sim.run_to(cfg.horizon)
        except labeled_coupling.OrderViolation as exc:
            violation = {"replica": r, "dump": exc.dump, "log": sim.log}
            break
        rows.append((r, sim.events,
                     labeled_coupling.check_order(pair.upper, pair.lower)))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["replica", "events", "order_ok"])
    for row in rows:
        writer.writerow([row[0], row[1], int(row[2])])
    return {"rows": rows, "csv": buf.getvalue(), "violation": violation}


# --- tagged gap selection ---------------------------------------------------------


@dataclass(frozen=True)
class GapSelection:
    """Leftward tagged rate chosen from a measured obstacle current."""

    q_plus: float
    q_minus: float
    c1: float
    c0: float
    predicted_bound: float


def select_tagged_gap(c1: float, q_plus: float, p: RateKernel) -> GapSelection:
    """Pick q(-1) > q(1) so the predicted displacement rate stays positive.

    Budgets 2.2*q(1) of the measured current for the tagged perturbation,
    then sets the drift gap to a quarter of the remaining predicted rate:
    q(-1) = q(1) + 0.25*(q(1)/p(2))*C0 with C0 = c1 - 2.2*q(1), leaving a
    predicted displacement rate of at least 0.75*(q(1)/p(2))*C0.
    """
    if q_plus <= 0.0:
        raise ConfigError("q(1) must be positive; a one-sided tagged kernel is degenerate")
    if p.rate(2) <= 0.0:
        raise ConfigError("p(2) must be positive")
    c0 = c1 - 2.2 * q_plus
    if c0 <= 0.0:
        raise ConfigError(
            "kernel too slow: measured current does not cover the tagged budget"
        )
    unit = q_plus / p.rate(2) * c0
    q_minus = q_plus + 0.25 * unit
    if q_minus > 1.2 * q_plus + 1e-15:
        raise ConfigError("tagged budget exceeded: q(-1) would outgrow 1.2*q(1)")
    return GapSelection(
        q_plus=q_plus,
        q_minus=q_minus,
        c1=c1,
        c0=c0,
        predicted_bound=0.75 * unit,
    )
