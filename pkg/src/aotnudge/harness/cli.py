"""Command line interface: ``aotnudge run|catalog|run-all|verify``."""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..errors import ConfigError, DivergenceError, ResolutionError
from .catalog import catalog, catalog_names, lookup
from .config import load_config, parse_overrides
from .runner import output_root, run, verify

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3
EXIT_VERIFY = 4


def _resolve(target: str, overrides: dict, long: bool):
    path = Path(target)
    if path.is_file():
        return load_config(path, overrides)
    if target in catalog_names():
        cfg = lookup(target, long)
        return cfg.with_overrides(overrides) if overrides else cfg
    raise ConfigError(f"{target!r} is neither a config file nor a catalog entry ({', '.join(catalog_names())})", "config")


def _report(record) -> int:
    print(f"{record.config.name}: {record.run_dir} ({record.wall_time:.1f} s)")
    for c in record.checks:
        print("  " + c.line())
    return EXIT_OK if record.passed else EXIT_VERIFY


def _guarded(fn):
    try:
        return fn()
    except (ConfigError, ResolutionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGENCE


def cmd_run(args) -> int:
    def go():
        cfg = _resolve(args.config, parse_overrides(args.set), args.long)
        return _report(run(cfg, args.out))

    return _guarded(go)


def cmd_catalog(args) -> int:
    entries = catalog(args.long)
    if args.show:
        try:
            print(lookup(args.show, args.long).to_ini(), end="")
        except KeyError as e:
            print(f"error: {e.args[0]}", file=sys.stderr)
            return EXIT_VALIDATION
        return EXIT_OK
    for name, cfg in entries.items():
        print(f"{name:6s} {cfg.system:10s} T={cfg.T:<6g} {cfg.values.get('description', '')}")
    return EXIT_OK


def _run_entry(name: str, long: bool, root: str):
    cfg = lookup(name, long)
    try:
        rec = run(cfg, Path(root) / name)
    except (ConfigError, ResolutionError) as e:
        return name, EXIT_VALIDATION, [f"error: {e}"]
    except DivergenceError as e:
        return name, EXIT_DIVERGENCE, [f"error: {e}"]
    lines = [f"{name}: {rec.run_dir} ({rec.wall_time:.1f} s)"] + ["  " + c.line() for c in rec.checks]
    return name, EXIT_OK if rec.passed else EXIT_VERIFY, lines


def cmd_run_all(args) -> int:
    names = args.only.split(",") if args.only else catalog_names()
    unknown = [n for n in names if n not in catalog_names()]
    if unknown:
        print(f"error: unknown catalog entries {', '.join(unknown)}; valid: {', '.join(catalog_names())}", file=sys.stderr)
        return EXIT_VALIDATION
    root = str(args.out or output_root())
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_entry, names, [args.long] * len(names), [root] * len(names)))
    else:
        results = [_run_entry(n, args.long, root) for n in names]
    worst = EXIT_OK
    for _, code, lines in results:
        print("\n".join(lines))
        worst = max(worst, code)
    return worst


def cmd_verify(args) -> int:
    try:
        rep = verify(args.run_dir)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    print(rep.name)
    for line in rep.lines():
        print("  " + line)
    return EXIT_OK if rep.passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aotnudge", description="Nudging twin experiments on Lorenz, KdV and 2D Euler.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a config file or a catalog entry")
    p.add_argument("config", help="INI file with an [experiment] section, or a catalog name")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    p.add_argument("--out", help="run directory (default: $AOTNUDGE_OUTPUT_ROOT/<name>)")
    p.add_argument("--long", action="store_true", help="use the opt-in long horizon for catalog entries")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("catalog", help="list the built-in experiments")
    p.add_argument("--show", metavar="NAME", help="print one entry as an INI config")
    p.add_argument("--long", action="store_true")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("run-all", help="run every catalog entry")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--only", help="comma separated subset of entries")
    p.add_argument("--out", help="output root (default: $AOTNUDGE_OUTPUT_ROOT)")
    p.add_argument("--long", action="store_true")
    p.set_defaults(func=cmd_run_all)

    p = sub.add_parser("verify", help="re-check a finished run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
