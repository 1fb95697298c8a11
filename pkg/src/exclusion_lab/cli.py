"""Command-line front end.

Subcommands: ``env`` (tagged-environment / obstacle / ring runs),
``halfline`` (boundary-driven segments), ``threeclass`` (hole-class
comparison runs), ``couple`` (order-coupled pairs), and ``verify`` (the
acceptance suite).  Exit codes: 0 pass, 1 fail, 2 invariant violation,
3 config error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import acceptance
from .environment import Absorbed
from .harness import ConfigError, ExperimentConfig, run_experiment
from .labeled_coupling import OrderViolation

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INVARIANT = 2
EXIT_CONFIG = 3

_ALLOWED = {
    "env": ("env", "torus"),
    "halfline": ("halfline",),
    "threeclass": ("threeclass",),
    "couple": ("couple",),
}


def _add_run_parser(sub, name: str, help_text: str):
    par = sub.add_parser(name, help=help_text)
    par.add_argument("--config", required=True, help="TOML experiment config")
    par.add_argument("--seed", type=int, default=None, help="override the config seed")
    par.add_argument("--replicas", type=int, default=None, help="override replica count")
    par.add_argument("--out", default=None, help="CSV output path (manifest written next to it)")
    if name == "couple":
        par.add_argument(
            "--variant", choices=("plus", "full", "right", "left"), default=None,
            help="override the coupling variant",
        )
    return par


def _load_config(args, command: str) -> ExperimentConfig:
    cfg = ExperimentConfig.from_path(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.replicas is not None:
        changes["replicas"] = args.replicas
    if command == "couple" and getattr(args, "variant", None):
        geo = dict(cfg.geometry)
        geo["variant"] = args.variant
        changes["geometry"] = geo
    if changes:
        cfg = cfg.replace(**changes)
    if cfg.experiment not in _ALLOWED[command]:
        raise ConfigError(
            f"experiment: config declares {cfg.experiment!r}, not runnable by '{command}'"
        )
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="exclusion-lab",
        description="Event-driven exclusion-process simulators and their verification suite.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_parser(sub, "env", "tagged-environment, obstacle, or ring experiment")
    _add_run_parser(sub, "halfline", "boundary-driven segment experiment")
    _add_run_parser(sub, "threeclass", "hole-class comparison experiment")
    _add_run_parser(sub, "couple", "order-coupled pair experiment")

    ver = sub.add_parser("verify", help="run acceptance criteria")
    ver.add_argument("ids", nargs="*", default=["all"], help="criterion ids or 'all'")
    ver.add_argument("--seed", type=int, default=7)
    ver.add_argument("--out", default="verify-out", help="directory for verdicts and artifacts")
    ver.add_argument("--artifacts", default=None,
                     help="artifact cache directory (defaults to <out>/artifacts)")

    args = parser.parse_args(argv)

    if args.command == "verify":
        out_dir = Path(args.out)
        artifacts = Path(args.artifacts) if args.artifacts else out_dir / "artifacts"
        try:
            results = acceptance.run_suite(
                args.ids or ["all"], seed=args.seed,
                artifacts=artifacts, out=out_dir / "verdicts.json",
            )
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except (OrderViolation, AssertionError, Absorbed) as exc:
            print(f"invariant violation: {exc}", file=sys.stderr)
            return EXIT_INVARIANT
        return EXIT_PASS if all(r.passed for r in results) else EXIT_FAIL

    try:
        cfg = _load_config(args, args.command)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run_experiment(cfg, out=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OrderViolation, AssertionError, Absorbed) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT

    if cfg.experiment == "couple" and result.get("violation") is not None:
        dump = result["violation"]
        log_path = Path(args.out or "order-violation").with_suffix(".events.log")
        with log_path.open("w") as fh:
            fh.write(json.dumps({"replica": dump["replica"], "dump": dump["dump"]}) + "\n")
            for entry in dump["log"]:
                t, kind, label, z, s = entry
                fh.write(f"{t!r},{kind},{label},{z},{s}\n")
        print(f"order violation in replica {dump['replica']}; event log at {log_path}",
              file=sys.stderr)
        return EXIT_INVARIANT
    if args.out is None:
        sys.stdout.write(result["csv"])
    return EXIT_PASS


if __name__ == "__main__":
    sys.exit(main())
