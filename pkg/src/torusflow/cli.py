"""Command-line interface.

Exit codes: 0 all checks pass, 1 usage/config error, 2 numerical failure,
3 acceptance check failed (the report is still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as config_mod
from .errors import ConfigInvalid, ConfigSyntax, IoError, TorusFlowError
from .experiment import initial_data, load_checks, run_experiment, write_report
from .metric import StencilSpec, conformal_distance_matrix, sample_points
from .plots import emit_plots
from .snapshot import read_snapshot, write_snapshot

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CHECKS = 0, 1, 2, 3

log = logging.getLogger("torusflow")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="torusflow", description="Supersizing Ricci flows on the flat square torus.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ini = sub.add_parser("initial", help="build and snapshot the initial factor u0")
    ini.add_argument("--config", type=Path)
    ini.add_argument("--i", type=int, nargs="+")
    ini.add_argument("--n", type=int)
    ini.add_argument("--out", type=Path)

    run = sub.add_parser("run", help="run the full experiment")
    run.add_argument("--config", type=Path, required=True)
    run.add_argument("--out", type=Path)
    run.add_argument("--i", type=int, nargs="+")
    run.add_argument("--n", type=int)
    run.add_argument("--scheme", choices=("imex", "rk4", "split"))
    run.add_argument("--stencil-radius", type=int, choices=(1, 2, 3))
    run.add_argument("--t-end", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--no-plots", action="store_true")

    dist = sub.add_parser("distance", help="distance matrix for a snapshot")
    dist.add_argument("snapshot", type=Path)
    dist.add_argument("--points", choices=("halton", "lattice"), default="halton")
    dist.add_argument("--count", type=int, default=64, help="point count, or lattice order")
    dist.add_argument("--seed", type=int, default=7)
    dist.add_argument("--stencil-radius", type=int, choices=(1, 2, 3), default=2)
    dist.add_argument("--out", type=Path, help="CSV path (default: stdout)")

    ver = sub.add_parser("verify", help="re-evaluate the checks stored in a report")
    ver.add_argument("report", type=Path, help="report.json or the directory holding it")
    return p


def _load_config(args, required: bool):
    if args.config is None:
        if required:
            raise ConfigInvalid("config: --config is required")
        return None
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalid(f"config: cannot read {args.config}: {exc}") from exc
    return config_mod.parse_config(text, check_feasibility=False)


def cmd_initial(args) -> int:
    cfg = _load_config(args, required=False)
    orders = args.i or (cfg.i_list if cfg else None)
    if not orders:
        raise ConfigInvalid("i: give --i or a config with i_list")
    out = args.out or Path(cfg.output_dir if cfg else ".")
    out.mkdir(parents=True, exist_ok=True)
    for i in orders:
        n = args.n or (cfg.n_for(i) if cfg else None)
        if n is None:
            raise ConfigInvalid("n: give --n or a config with n")
        deficit = cfg.deficit(i) if cfg else None
        data = initial_data(i, n, cfg.pair_policy if cfg else "all_pairs", deficit)
        write_snapshot(data.u0, 0.0, out / f"u0_i{i}_n{n}.rt2f")
        data.skeleton.to_csv(out / f"skeleton_i{i}.csv")
        meta = {
            "i": i,
            "n": n,
            "width": data.spec.width,
            "transition": data.spec.transition,
            "achieved_area": data.spec.achieved_area,
            "target_area": 2.0 - (deficit if deficit is not None else 1.0 / i),
        }
        (out / f"initial_i{i}_n{n}.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        print(f"i={i} n={n} w={data.spec.width:.6g} area={data.spec.achieved_area:.9f}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config(args, required=True)
    cfg = config_mod.override(
        cfg,
        check_feasibility=True,
        i_list=args.i,
        n=args.n,
        scheme=args.scheme,
        stencil_radius=args.stencil_radius,
        t_end=args.t_end,
        seed=args.seed,
        output_dir=str(args.out) if args.out else None,
    )
    out = Path(cfg.output_dir)
    report = run_experiment(cfg, out)
    write_report(report, out)
    if not args.no_plots:
        emit_plots(report, out / "plots")
    for c in report.checks:
        tag = "PASS" if c.passed else "FAIL"
        scope = f"i={c.i}" if c.i is not None else "all"
        print(f"{tag} {c.name:<28} {scope:<5} {c.lhs:.6g} {c.relation} {c.rhs:.6g}  ({c.note})")
    return EXIT_OK if report.all_passed else EXIT_CHECKS


def cmd_distance(args) -> int:
    u, t = read_snapshot(args.snapshot)
    pts = sample_points(args.points, args.count, args.seed)
    D = conformal_distance_matrix(u, pts, StencilSpec(args.stencil_radius), label=f"t={t:.17g}")
    if args.out:
        D.to_csv(args.out)
    else:
        import csv

        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow([f"{p.x:.17g}:{p.y:.17g}" for p in D.points])
        w.writerows([[f"{v:.17g}" for v in row] for row in D.d])
    return EXIT_OK


def cmd_verify(args) -> int:
    path = args.report / "report.json" if args.report.is_dir() else args.report
    try:
        data = json.loads(path.read_text())
        checks = load_checks(path)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigInvalid(f"report: cannot load {path}: {exc}") from exc
    stored = {(c["name"], c["i"]): c["passed"] for c in data["checks"]}
    ok = True
    for c in checks:
        if stored[(c.name, c.i)] != c.passed:
            print(f"MISMATCH {c.name} i={c.i}: stored {stored[(c.name, c.i)]}, recomputed {c.passed}")
            ok = False
        tag = "PASS" if c.passed else "FAIL"
        print(f"{tag} {c.name} i={c.i} lhs={c.lhs:.6g} {c.relation} rhs={c.rhs:.6g} slack={c.slack:.3g}")
        ok = ok and c.passed
    return EXIT_OK if ok else EXIT_CHECKS


COMMANDS = {"initial": cmd_initial, "run": cmd_run, "distance": cmd_distance, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigSyntax, ConfigInvalid, IoError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TorusFlowError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
