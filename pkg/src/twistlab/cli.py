"""Command line: `twistlab run`, `twistlab atoms make|validate`, `twistlab kernel Kj`.

Exit codes: 0 all criteria pass, 1 a criterion failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .atoms import make_atom, validate_atom
from .grid import make_grid

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
DELIM = "----"


def _kv(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise harness.ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _print_block(title: str, body: str):
    print(f"{DELIM} {title}")
    print(body.rstrip("\n"))
    print(DELIM)


def cmd_run(args) -> int:
    ids = harness.REGISTRY_IDS if args.experiment == "all" else (args.experiment,)
    overrides = _kv(args.set)
    if args.workers is not None:
        overrides["workers"] = str(args.workers)
    if args.no_figures:
        overrides["figures"] = "false"
    cfgs = []
    for eid in ids:
        if args.config:
            cfg = harness.load_config(args.config, eid, overrides)
        else:
            cfg = harness.make_config(eid, overrides)
        cfgs.append(cfg)
    out = Path(args.out or cfgs[0].out or "twistlab-out")
    status = EXIT_OK
    for cfg in cfgs:
        report = harness.run_experiment(cfg)
        harness.emit_report(report, "csv", out / f"{cfg.experiment}.csv")
        harness.emit_report(report, "json", out / f"{cfg.experiment}.json")
        _print_block(f"{cfg.experiment} report", harness.report_csv(report))
        if cfg.figures and report.sweeps:
            from .plotting import render_report
            for p in render_report(report, out / "figures"):
                print(f"figure {p}")
        if not report.passed:
            status = EXIT_FAIL
    return status


def cmd_atoms_make(args) -> int:
    from .io import save_atom

    grid = make_grid(1, args.M, args.L)
    atom = make_atom(grid, complex(args.z0), args.r, args.p, args.sigma, seed=args.seed)
    paths = save_atom(atom, args.out)
    print(f"atom N0={atom.N0} written to {paths[0]} (+ {paths[1].name})")
    return EXIT_OK


def cmd_atoms_validate(args) -> int:
    from .io import load_atom

    rep = validate_atom(load_atom(args.file))
    rows = [f"support_leak,{rep.support_leak:.6e}", f"sup_ratio,{rep.sup_ratio:.6e}",
            f"worst_moment_ratio,{rep.worst_moment_ratio():.6e}", f"degenerate,{str(rep.degenerate).lower()}",
            f"passed,{str(rep.passed).lower()}"]
    _print_block("atom validation", "\n".join(rows))
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_kernel(args) -> int:
    from .io import save_decay_report
    from .subordination import compute_a_tau, kernel_Kj, verify_kernel_decay

    if args.which != "Kj":
        raise harness.ConfigError(f"unknown kernel {args.which!r}")
    K = kernel_Kj(args.j, np.linspace(4.0 / args.radii, 4.0, args.radii), compute_a_tau(tau=2.0 ** args.j))
    rep = verify_kernel_decay(K)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_decay_report(rep, out)
    profile = out.with_suffix(".csv")
    lines = ["r,re,im,abs"] + [f"{r:.6e},{v.real:.6e},{v.imag:.6e},{abs(v):.6e}" for r, v in zip(K.r, K.values)]
    profile.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _print_block(f"K_j decay j={args.j}", rep.to_json())
    passed = rep.slope <= harness.THRESHOLDS["C11.slope_j6"][0]
    return EXIT_OK if passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twistlab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a named experiment (E1..E10 or all)")
    run.add_argument("experiment")
    run.add_argument("--config", help="key = value config file")
    run.add_argument("--out", help="output directory")
    run.add_argument("--workers", type=int)
    run.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    run.add_argument("--no-figures", action="store_true", help="skip rendering figures")
    run.set_defaults(func=cmd_run)

    atoms = sub.add_parser("atoms", help="make or validate atoms")
    asub = atoms.add_subparsers(dest="action", required=True)
    mk = asub.add_parser("make")
    mk.add_argument("--z0", default="0")
    mk.add_argument("--r", type=float, required=True)
    mk.add_argument("--p", type=float, default=1.0)
    mk.add_argument("--sigma", type=float, default=1.0)
    mk.add_argument("--M", type=int, default=128)
    mk.add_argument("--L", type=float, default=16.0)
    mk.add_argument("--seed", type=int, default=0)
    mk.add_argument("--out", required=True)
    mk.set_defaults(func=cmd_atoms_make)
    va = asub.add_parser("validate")
    va.add_argument("file")
    va.set_defaults(func=cmd_atoms_validate)

    ker = sub.add_parser("kernel", help="compute an oscillatory kernel")
    ker.add_argument("which", help="kernel name (Kj)")
    ker.add_argument("--j", type=int, required=True)
    ker.add_argument("--radii", type=int, default=800)
    ker.add_argument("--out", required=True)
    ker.set_defaults(func=cmd_kernel)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
