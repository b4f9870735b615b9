"""Command-line interface: run, sweep, derive and check subcommands."""
from __future__ import annotations

import argparse
import copy
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import ConfigError, CoreShellError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _setup_logging(verbose: bool, logfile: Path | None = None) -> None:
    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if logfile is not None:
        logfile.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(logfile, mode="w"))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)-7s %(name)s: %(message)s",
        datefmt="%H:%M:%S",
        handlers=handlers,
        force=True,
    )


def _output_root(cli_dir: str | None, cfg_dir: str) -> Path:
    env = os.environ.get("CORESHELL_OUTPUT_ROOT")
    base = Path(cli_dir) if cli_dir else Path(cfg_dir)
    if env and not base.is_absolute():
        base = Path(env) / base
    return base


def _apply_overrides(args, effective: dict) -> dict:
    effective = copy.deepcopy(effective)
    if args.snapshot_every is not None:
        effective["output"]["snapshot_every"] = args.snapshot_every
    if getattr(args, "mesh_level", None):
        effective["mesh"]["level"] = args.mesh_level
    return effective


def _execute_run(effective: dict, outdir: Path, threads: int = 1) -> int:
    """Build a simulation from an effective-config mapping and run it."""
    from .config import dump_toml, parse_config
    from .driver import Simulation
    from .output import persist_run, snapshot_writer

    cfg = parse_config(effective, base_dir=".")
    sim = Simulation(
        cfg.spec,
        cfg.core,
        cfg.shell,
        cfg.interface,
        cfg.protocol,
        cfg.settings,
        mesh_level=cfg.mesh_level,
    )
    outdir.mkdir(parents=True, exist_ok=True)
    dump_toml(cfg.effective, outdir / "config_effective.toml")
    callback = None
    if cfg.output.snapshot_every and cfg.output.write_vtk:
        callback = snapshot_writer(outdir / "snapshots")
    try:
        result = sim.run(
            snapshot_callback=callback,
            snapshot_every=cfg.output.snapshot_every,
            log_every=cfg.output.log_every,
        )
    except CoreShellError as exc:
        logger.error("run failed: %s", exc)
        return EXIT_RUNTIME
    persist_run(result, sim, outdir, cfg.effective, cfg.output.write_plots)
    if result.diagnostics.get("termination") == "aborted":
        logger.error("run aborted: %s", result.diagnostics.get("abort_reason"))
        return EXIT_RUNTIME
    print(
        f"final SOL {result.final_sol:.4f}, pattern {result.pattern.code}, "
        f"termination {result.diagnostics['termination']}"
    )
    return EXIT_OK


def cmd_run(args) -> int:
    from .config import load_config

    cfg = load_config(args.config)
    effective = _apply_overrides(args, cfg.effective)
    outdir = _output_root(args.output_dir, cfg.effective["output"]["directory"])
    _setup_logging(args.verbose, outdir / "run.log")
    return _execute_run(effective, outdir, threads=args.threads)


def _sweep_member(payload) -> tuple[str, int]:
    effective, outdir = payload
    _setup_logging(False, Path(outdir) / "run.log")
    code = _execute_run(effective, Path(outdir))
    return str(outdir), code


def _parse_vary(expr: str) -> tuple[str, list]:
    if "=" not in expr:
        raise ConfigError("--vary expects 'dotted.key=v1,v2,...'")
    key, _, values = expr.partition("=")
    parsed = []
    for tok in values.split(","):
        tok = tok.strip()
        try:
            parsed.append(float(tok))
        except ValueError:
            parsed.append(tok)
    if not parsed:
        raise ConfigError("--vary received an empty value list")
    return key.strip(), parsed


def cmd_sweep(args) -> int:
    from .config import load_config, parse_config, set_by_path

    cfg = load_config(args.config)
    key, values = _parse_vary(args.vary)
    root = _output_root(args.output_dir, cfg.effective["output"]["directory"])
    _setup_logging(args.verbose, root / "sweep.log")

    jobs = []
    for v in values:
        effective = _apply_overrides(args, cfg.effective)
        set_by_path(effective, key, v)
        parse_config(effective, base_dir=".")  # validate before launching
        member = root / f"{key.replace('.', '_')}={v:g}" if isinstance(v, float) else root / f"{key.replace('.', '_')}={v}"
        jobs.append((effective, member))

    results: list[tuple[str, int]] = []
    if args.threads > 1 and not args.deterministic:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(_sweep_member, jobs))
    else:
        for job in jobs:
            results.append(_sweep_member(job))

    summary = root / "sweep_summary.csv"
    lines = ["member,exit_code"]
    worst = EXIT_OK
    for outdir, code in results:
        lines.append(f"{outdir},{code}")
        worst = max(worst, code)
    summary.parent.mkdir(parents=True, exist_ok=True)
    summary.write_text("\n".join(lines) + "\n")
    print(f"sweep finished: {len(results)} runs, summary in {summary}")
    return worst


def cmd_derive(args) -> int:
    from .config import load_config

    cfg = load_config(args.config)
    print(f"{'parameter':<28}{'core':>14}{'shell':>14}")
    rows = [
        ("c_max (mol/m^3)", cfg.core.c_max, cfg.shell.c_max),
        ("Omega (m^3/mol)", cfg.core.partial_molar_volume, cfg.shell.partial_molar_volume),
        ("D0 (m^2/s)", cfg.core.diffusivity, cfg.shell.diffusivity),
        ("E (GPa)", cfg.core.youngs_modulus / 1e9, cfg.shell.youngs_modulus / 1e9),
        ("nu", cfg.core.poisson, cfg.shell.poisson),
        ("G_c (N/m)", cfg.core.gc, cfg.shell.gc),
        ("l (um)", cfg.core.ell * 1e6, cfg.shell.ell * 1e6),
    ]
    for name, a, b in rows:
        print(f"{name:<28}{a:>14.6g}{b:>14.6g}")
    gci = cfg.interface.gc_interface(cfg.core.gc, cfg.shell.gc)
    print(f"{'G_c,interface (N/m)':<28}{gci:>14.6g}")
    return EXIT_OK


def cmd_check(args) -> int:
    from .verification import run_all

    _setup_logging(args.verbose)
    results = run_all()
    for res in results:
        print(res.line())
    if all(r.passed for r in results):
        print(f"all {len(results)} checks passed")
        return EXIT_OK
    failed = sum(not r.passed for r in results)
    print(f"{failed} of {len(results)} checks FAILED")
    return EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coreshell",
        description="Chemo-mechano-damage simulation of core-shell cathode particles",
    )
    parser.add_argument("--verbose", action="store_true", help="debug-level logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one CC-CV simulation from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    p_run.add_argument("--snapshot-every", type=int, default=None, metavar="N_STEPS")
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--deterministic", action="store_true", help="force serial execution")
    p_run.add_argument("--mesh-level", choices=("coarse", "medium", "fine"), default=None)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a one-parameter sweep")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--vary", required=True, metavar="KEY=V1,V2,...")
    p_sweep.add_argument("--output-dir", default=None)
    p_sweep.add_argument("--snapshot-every", type=int, default=None)
    p_sweep.add_argument("--threads", type=int, default=1)
    p_sweep.add_argument("--deterministic", action="store_true")
    p_sweep.add_argument("--mesh-level", choices=("coarse", "medium", "fine"), default=None)
    p_sweep.set_defaults(func=cmd_sweep)

    p_derive = sub.add_parser("derive", help="print derived material parameters")
    p_derive.add_argument("config")
    p_derive.set_defaults(func=cmd_derive)

    p_check = sub.add_parser("check", help="run the analytic-oracle verification suite")
    p_check.set_defaults(func=cmd_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CoreShellError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
