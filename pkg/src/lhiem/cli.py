"""Command-line interface: ``lhiem synth|fit|run|report``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .errors import DataError, LhiemError, StepError

log = logging.getLogger("lhiem")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lhiem", description="Dynamic health-expenditure microsimulation.")
    p.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic initial population")
    s.add_argument("--n", type=int, default=100_000, help="number of persons")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True, help="snapshot file to write")
    s.add_argument("--targets", help="synthesis targets (JSON)")
    s.add_argument("--spending-map", help="per-cell spending map (CSV)")

    f = sub.add_parser("fit", help="fit the two-part spending model")
    f.add_argument("--train", help="two-year panel (CSV); the built-in synthetic panel when omitted")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--cp", type=float, help="override the complexity parameter (default: one-SE rule)")
    f.add_argument("--folds", type=int, default=10)
    f.add_argument("--out", required=True, help="output directory")

    r = sub.add_parser("run", help="run a scenario")
    r.add_argument("--config", required=True, help="scenario file (YAML)")
    r.add_argument("--seed", type=int, required=True)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--threads", type=int, help="worker threads inside each year step")
    r.add_argument("--horizon", type=int, help="override the configured horizon")
    r.add_argument("--resume-from", type=int, help="continue from this year's snapshot in --out")

    rep = sub.add_parser("report", help="run the variant suite and write comparison tables")
    rep.add_argument("--suite", required=True, help="suite file (YAML): config, variants")
    rep.add_argument("--seed", type=int, required=True)
    rep.add_argument("--out", required=True, help="output directory")
    rep.add_argument("--threads", type=int)
    return p


def cmd_synth(args) -> None:
    from .population import save_population
    from .synthpop import generate_population, load_spending_map, load_targets

    pop = generate_population(args.n, load_targets(args.targets), load_spending_map(args.spending_map), args.seed)
    save_population(pop, args.out)
    log.info("wrote %d persons in %d families to %s", len(pop), pop.n_families, args.out)


def cmd_fit(args) -> None:
    from .expenditure.panel import load_panel, synthetic_panel
    from .expenditure.twopart import fit_two_part

    panel = load_panel(args.train) if args.train else synthetic_panel()
    model = fit_two_part(panel, seed=args.seed, override_cp=args.cp, n_folds=args.folds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.json")
    import pandas as pd

    pd.DataFrame(model.curve.rows()).to_csv(out / "cv_curve.csv", index=False, float_format=None)
    pd.DataFrame(model.tree.leaf_table()).to_csv(out / "leaves.csv", index=False)
    log.info("model with %d splits written to %s", model.tree.n_splits, out)


def _scenario(path, seed, threads=None, horizon=None):
    from dataclasses import replace

    from .engine import load_config

    cfg = load_config(path)
    cfg = replace(cfg, seed=seed)
    if threads is not None:
        cfg = replace(cfg, threads=threads)
    if horizon is not None:
        cfg = replace(cfg, horizon=horizon)
    return cfg


def cmd_run(args) -> None:
    from .engine import initial_population, run_simulation

    cfg = _scenario(args.config, args.seed, args.threads, args.horizon)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=True), encoding="utf-8")
    results = run_simulation(cfg, initial_population(cfg), out, resume_from=args.resume_from)
    log.info("%d years written to %s", len(results), out / "aggregates.csv")


def cmd_report(args) -> None:
    from .engine import initial_population
    from .harness import participation_report, run_suite

    suite_path = Path(args.suite)
    try:
        suite = yaml.safe_load(suite_path.read_text(encoding="utf-8")) or {}
    except OSError as exc:
        raise DataError(f"cannot read suite file {suite_path}: {exc}") from exc
    if "config" not in suite:
        raise DataError(f"{suite_path}: suite needs a 'config' entry")
    cfg_path = Path(suite["config"])
    if not cfg_path.is_absolute():
        cfg_path = suite_path.parent / cfg_path
    cfg = _scenario(cfg_path, args.seed, args.threads, suite.get("horizon"))
    variants = suite.get("variants", [1, 2, 3, 4, 5, 6, 7])
    out = Path(args.out)
    report = run_suite(cfg, variants, initial_population(cfg))
    report.save(out)
    if 2 in report.aggregates:
        participation_report(report.aggregates[2]).to_csv(out / "participation.csv", index=False, float_format=None)
    log.info("suite of %d variants written to %s", len(variants), out)


COMMANDS = {"synth": cmd_synth, "fit": cmd_fit, "run": cmd_run, "report": cmd_report}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except DataError as exc:
        sys.stderr.write(f"lhiem {args.command}: data error: {exc}\n")
        return EXIT_DATA
    except StepError as exc:
        code = EXIT_DATA if isinstance(exc.cause, DataError) else EXIT_RUNTIME
        sys.stderr.write(f"lhiem {args.command}: {exc}\n")
        return code
    except (ValueError, KeyError) as exc:
        sys.stderr.write(f"lhiem {args.command}: invalid input: {exc}\n")
        return EXIT_DATA
    except (LhiemError, RuntimeError, ArithmeticError) as exc:
        sys.stderr.write(f"lhiem {args.command}: runtime error: {exc}\n")
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
