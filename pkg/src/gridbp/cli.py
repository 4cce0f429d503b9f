"""``gridbp`` command line: run a seeded sweep and write the CSV summary.

Settings are layered, later layers winning: built-in defaults, ``--preset``,
the ``--config`` file, ``GRIDBP_*`` environment variables, then flags.

A config file has up to three sections::

    [scenario]
    n_agents = 50
    arena = 70, 70

    [bp]
    n_particles = 200
    damping = 0.5

    [sweep]
    param = noise_factor
    values = 0, 0.1, 0.2, 0.3
    trials = 30
    seed = 7

Keys under ``[scenario]`` and ``[bp]`` are :class:`ScenarioConfig` field
names. Environment variables use the upper-cased key, e.g.
``GRIDBP_N_PARTICLES=100`` or ``GRIDBP_TRIALS=5``.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import fields

from .experiment import PRESETS, ExperimentPlan, emit_csv, run_plan
from .sim import ScenarioConfig

ENV_PREFIX = "GRIDBP_"
_SWEEP_KEYS = ("param", "values", "trials", "seed", "jobs")

_OPTIONAL = {"kernel_width": float, "send_limit": int}


class ConfigError(ValueError):
    pass


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def coerce(name: str, text: str):
    """Parse ``text`` as a value of the :class:`ScenarioConfig` field ``name``."""
    defaults = {f.name: f.default for f in fields(ScenarioConfig)}
    if name not in defaults:
        raise ConfigError(f"unknown setting {name!r}")
    text = text.strip()
    try:
        if name in _OPTIONAL:
            return None if text.lower() in ("", "none") else _OPTIONAL[name](text)
        default = defaults[name]
        if isinstance(default, bool):
            return _parse_bool(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            parts = [float(p) for p in text.replace("x", ",").split(",") if p.strip()]
            if len(parts) != 2:
                raise ValueError("expected width, height")
            return tuple(parts)
        return text
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from None


def _split_values(name: str, text: str) -> tuple:
    return tuple(coerce(name, v) for v in text.split(",") if v.strip())


def read_config(path: str) -> tuple[dict, dict]:
    """Scenario overrides and raw sweep settings from an INI file."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"bad config {path}: {exc}") from None
    scenario, sweep = {}, {}
    for section in parser.sections():
        if section in ("scenario", "bp"):
            for key, text in parser.items(section):
                scenario[key] = coerce(key, text)
        elif section == "sweep":
            for key, text in parser.items(section):
                if key not in _SWEEP_KEYS:
                    raise ConfigError(f"unknown sweep key {key!r}")
                sweep[key] = text
        else:
            raise ConfigError(f"unknown section [{section}]")
    return scenario, sweep


def read_env(environ=None) -> tuple[dict, dict]:
    environ = os.environ if environ is None else environ
    names = set(ScenarioConfig.field_names())
    scenario, sweep = {}, {}
    for var, text in environ.items():
        if not var.startswith(ENV_PREFIX):
            continue
        key = var[len(ENV_PREFIX):].lower()
        if key in names:
            scenario[key] = coerce(key, text)
        elif key in _SWEEP_KEYS:
            sweep[key] = text
        else:
            raise ConfigError(f"unknown environment setting {var}")
    return scenario, sweep


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gridbp",
        description="Run seeded Grid-BP localization trials over a parameter sweep "
                    "and write one CSV row per swept value.")
    p.add_argument("--config", help="INI file with [scenario], [bp] and [sweep] sections")
    p.add_argument("--preset", choices=sorted(PRESETS), help="start from a named network size")
    p.add_argument("--trials", type=int, help="trials per swept value")
    p.add_argument("--sweep", help="ScenarioConfig field to sweep (default noise_factor)")
    p.add_argument("--values", help="comma-separated sweep values, ascending")
    p.add_argument("--seed", type=int, help="base seed; trial seeds are hashed from it")
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout (default)")
    p.add_argument("--baseline", action="store_true",
                   help="run the anchors-only single-update baseline instead of Grid-BP")
    p.add_argument("--jobs", type=int, help="worker processes (default 1)")
    p.add_argument("--dump", help="write one JSON line per trial result to this path")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one ScenarioConfig field; repeatable")
    return p


def plan_from_args(args: argparse.Namespace, environ=None) -> tuple[ExperimentPlan, int]:
    overrides: dict = dict(PRESETS[args.preset]) if args.preset else {}
    sweep: dict = {}
    if args.config:
        s, w = read_config(args.config)
        overrides.update(s)
        sweep.update(w)
    s, w = read_env(environ)
    overrides.update(s)
    sweep.update(w)
    for item in args.set:
        key, sep, text = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = coerce(key.strip(), text)
    for key in ("trials", "seed", "jobs", "values"):
        if getattr(args, key) is not None:
            sweep[key] = str(getattr(args, key))
    if args.sweep is not None:
        sweep["param"] = args.sweep

    try:
        if "seed" in sweep:
            overrides["seed"] = int(sweep["seed"])
        base = ScenarioConfig(**overrides)
        param = sweep.get("param", "noise_factor").strip()
        if param not in ScenarioConfig.field_names():
            raise ConfigError(f"cannot sweep unknown field {param!r}")
        values = _split_values(param, sweep["values"]) if "values" in sweep else (getattr(base, param),)
        plan = ExperimentPlan(base=base, sweep_param=param, sweep_values=values,
                              trials=int(sweep.get("trials", 1)), out=args.out,
                              baseline=args.baseline)
        jobs = int(sweep.get("jobs", 1))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if jobs < 1:
        raise ConfigError("jobs must be >= 1")
    return plan, jobs


def main(argv=None, environ=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        plan, jobs = plan_from_args(args, environ)
    except ConfigError as exc:
        print(f"gridbp: configuration error: {exc}", file=sys.stderr)
        return 2

    failures: list = []
    try:
        if args.dump:
            with open(args.dump, "w", encoding="utf-8", newline="\n") as dump:
                rows = run_plan(plan, jobs=jobs, failures=failures, dump=dump)
        else:
            rows = run_plan(plan, jobs=jobs, failures=failures)
        emit_csv(rows, plan.out)
    except OSError as exc:
        print(f"gridbp: cannot write output: {exc}", file=sys.stderr)
        return 1

    for f in failures:
        print(f"gridbp: trial {f.trial} at {plan.sweep_param}={f.sweep_value} "
              f"(seed {f.seed}) failed: {f.error}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
