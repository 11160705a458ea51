"""Command-line pipeline: levels -> train -> run-agent -> features / sweep -> synth-truth -> predict -> plot.

Exit codes:
    0  success
    1  any other failure (e.g. too few levels to fit a model)
    2  bad command line
    3  malformed input file or invalid configuration
    4  input file not found
    5  policy weights missing for a policy-guided agent

Failures print one JSON object on stderr: ``{"error": kind, "code": n, "message": text}``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from functools import partial
from pathlib import Path

from . import __version__
from . import files
from .errors import ConfigurationError, ContractViolation, InsufficientDataError, MissingWeightsError
from .evaluation import DEFAULT_BLEND, evaluate_config, generate_synthetic_truth
from .experiments import ORACLE_STREAM
from .levels import generate_pack, read_pack, reference_pack, write_pack
from .mcts import MYOPIC_GAMMA, SQRT2, VariantConfig
from .parallel import pmap
from .policy import train_policy
from .predict import FitConfig, PopulationParams
from .records import AGENTS
from .seeding import derive_seed
from .stats import (DEFAULT_SWEEP_FRACTIONS, DEFAULT_TOP_GOALS, DEFAULT_TOP_MOVES, collect_runs,
                    correlation_sweep, features_by_level, group_by_level, sweep_table)
from .svg import scatter_chart, sweep_chart

EXIT_OK, EXIT_GENERIC, EXIT_USAGE, EXIT_SCHEMA, EXIT_MISSING_FILE, EXIT_MISSING_WEIGHTS = range(6)
DEFAULT_WORKERS = 16


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fail(kind: str, code: int, message: str) -> int:
    line = json.dumps({"error": kind, "code": code, "message": " ".join(str(message).split())})
    print(line, file=sys.stderr)
    return code


def _manifest(args, inputs=(), outputs=()) -> dict:
    """Provenance header. Pool size and directories are left out so outputs do not depend on them."""
    skip = {"func", "command", "workers", "out", "out_dir", "levels", "weights", "runs_csv", "percentile_runs",
            "truth", "features", "params", "sweep", "predictions"}
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return {"tool": "aiplaytest", "version": __version__, "command": args.command, "flags": flags,
            "inputs": [Path(p).name for p in inputs if p], "outputs": [Path(p).name for p in outputs if p]}


def _require(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return p


def _load_levels(args):
    return read_pack(_require(args.levels))


def _load_weights(path):
    if path is None:
        raise MissingWeightsError("this agent needs --weights")
    if not Path(path).is_file():
        raise MissingWeightsError(f"weights file not found: {path}")
    return files.read_weights(path)


# --------------------------------------------------------------------------- commands


def cmd_levels(args) -> int:
    levels = reference_pack() if args.pack == "reference" else generate_pack(args.count, args.seed)
    header = "manifest: " + json.dumps(_manifest(args, outputs=[args.out]), sort_keys=True)
    write_pack(args.out, levels, header)
    return EXIT_OK


def _train_one(level, iterations, population, seed):
    return train_policy(level, iterations, population, seed)


def cmd_train(args) -> int:
    levels = _load_levels(args)
    fn = partial(_train_one, iterations=args.iterations, population=args.population, seed=args.seed)
    trained = pmap(fn, levels, args.workers)
    files.write_weights(args.out, {lv.level_id: w for lv, w in zip(levels, trained)},
                        _manifest(args, [args.levels], [args.out]))
    return EXIT_OK


def _variant(args) -> VariantConfig:
    return VariantConfig.for_agent(args.agent, gamma=args.gamma, c=args.c, budget=args.budget,
                                   rollout_cap=args.rollout_cap)


def cmd_run_agent(args) -> int:
    levels = _load_levels(args)
    config = _variant(args)
    weights = _load_weights(args.weights) if config.learned else None
    records = collect_runs(levels, config, args.runs, args.seed, weights, workers=args.workers)
    files.write_runs(args.out, records, _manifest(args, [args.levels, args.weights], [args.out]))
    return EXIT_OK


def cmd_features(args) -> int:
    records = files.read_runs(_require(args.runs_csv))
    pct = files.read_runs(_require(args.percentile_runs)) if args.percentile_runs else None
    if pct is not None and args.set.upper() != "F3P":
        raise UsageError("--percentile-runs only applies to --set f3p")
    vectors = features_by_level(records, args.set, percentile_records=pct,
                                top_moves_fraction=args.top_moves, top_goals_fraction=args.top_goals)
    files.write_features(args.out, vectors.values(),
                         _manifest(args, [args.runs_csv, args.percentile_runs], [args.out]))
    return EXIT_OK


def cmd_sweep(args) -> int:
    records = files.read_runs(_require(args.runs_csv))
    truth = files.read_truth(_require(args.truth))
    cells = correlation_sweep(group_by_level(records), {k: v.pass_rate for k, v in truth.items()},
                              args.fractions)
    files.write_sweep(args.out, cells, _manifest(args, [args.runs_csv, args.truth], [args.out]))
    return EXIT_OK


def cmd_synth_truth(args) -> int:
    levels = _load_levels(args)
    weights = _load_weights(args.weights)
    params = files.read_params(_require(args.params)) if args.params else PopulationParams()
    oracle = collect_runs(levels, VariantConfig.for_agent("policy-only"), args.runs,
                          derive_seed(args.seed, ORACLE_STREAM), weights, workers=args.workers)
    truth = generate_synthetic_truth(levels, params, oracle, args.seed, blend=tuple(args.blend),
                                     top_fraction=args.top_moves)
    files.write_truth(args.out, truth.records, _manifest(args, [args.levels, args.weights, args.params],
                                                         [args.out]))
    return EXIT_OK


def _feature_inputs(specs):
    out = []
    for item in specs:
        label, sep, path = item.partition("=")
        if not sep or not label or not path:
            raise UsageError(f"--features expects LABEL=PATH, got {item!r}")
        out.append((label, path))
    return out


def cmd_predict(args) -> int:
    truth = files.read_truth(_require(args.truth))
    inputs = _feature_inputs(args.features)
    models = ("baseline", "extended") if args.model == "both" else (args.model,)
    if args.predictions and len(inputs) * len(models) != 1:
        raise UsageError("--predictions needs exactly one feature input and one model")
    fit = FitConfig(iterations=args.fit_iterations, population=args.fit_population,
                    churn_weight=args.churn_weight)
    reports = []
    for model in models:
        for label, path in inputs:
            feats = files.read_features(_require(path))
            sets = {fv.feature_set for fv in feats.values()}
            if len(sets) != 1:
                raise ConfigurationError(f"{path}: mixed feature sets {sorted(sets)}")
            reports.append(evaluate_config(label, sets.pop(), model, feats, truth, k=args.folds,
                                           extended_seeds=args.seeds, seed=args.seed, fit_config=fit,
                                           workers=args.workers))
    manifest = _manifest(args, [args.truth] + [p for _, p in inputs], [args.out, args.predictions])
    files.write_report(args.out, reports, manifest)
    if args.predictions:
        rep = reports[0]
        rows = [(lid, p.pass_rate, p.churn_rate, truth[lid].pass_rate, truth[lid].churn_rate)
                for lid, p in rep.predictions.items()]
        files.write_predictions(args.predictions, rows, manifest)
    return EXIT_OK


def cmd_plot(args) -> int:
    if not args.sweep and not args.truth:
        raise UsageError("plot needs --sweep and/or --truth")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.sweep:
        table = sweep_table(files.read_sweep(_require(args.sweep)))
        (out / "sweep.svg").write_text(sweep_chart(table))
    if args.truth:
        truth = files.read_truth(_require(args.truth))
        pts = [(lid, r.pass_rate, r.churn_rate) for lid, r in sorted(truth.items())]
        (out / "pass_churn.svg").write_text(scatter_chart(pts))
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def _fraction(s: str) -> float:
    v = float(s)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"{s} is not in (0, 1]")
    return v


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{s} must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="aiplaytest", description="AI playtesting pipeline for pass and churn rate prediction.",
                formatter_class=fmt)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed=True, workers=False):
        if seed:
            sp.add_argument("--seed", type=int, default=0, help="master seed for every random stream")
        if workers:
            sp.add_argument("--workers", type=_positive_int, default=DEFAULT_WORKERS,
                            help="process pool size; outputs do not depend on it")

    sp = sub.add_parser("levels", help="write a level pack file", formatter_class=fmt)
    sp.add_argument("--pack", choices=("reference", "generated"), default="reference",
                    help="ten hand-tuned levels, or a seeded random pack")
    sp.add_argument("--count", type=_positive_int, default=30, help="number of generated levels")
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(func=cmd_levels)

    sp = sub.add_parser("train", help="train the rollout policy on every level", formatter_class=fmt)
    sp.add_argument("--levels", required=True, help="level pack file")
    sp.add_argument("--iterations", type=_positive_int, default=30, help="cross-entropy iterations")
    sp.add_argument("--population", type=_positive_int, default=32, help="candidates per iteration")
    sp.add_argument("--out", required=True, help="weights JSON")
    common(sp, workers=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("run-agent", help="play every level with one agent", formatter_class=fmt)
    sp.add_argument("--levels", required=True, help="level pack file")
    sp.add_argument("--agent", choices=AGENTS, required=True)
    sp.add_argument("--weights", help="weights JSON (needed by policy-guided agents)")
    sp.add_argument("--budget", type=_positive_int, default=200, help="search iterations per move")
    sp.add_argument("--rollout-cap", type=_positive_int, default=10, help="maximum rollout length in moves")
    sp.add_argument("--gamma", type=float, default=None,
                    help=f"discount; default {MYOPIC_GAMMA} for the myopic variants and 1.0 otherwise")
    sp.add_argument("--c", type=float, default=SQRT2, help="UCT exploration constant")
    sp.add_argument("--runs", type=_positive_int, default=20,
                    help="runs per level (use 1000 for policy-only)")
    sp.add_argument("--out", required=True, help="runs CSV")
    common(sp, workers=True)
    sp.set_defaults(func=cmd_run_agent)

    sp = sub.add_parser("features", help="per-level gameplay features", formatter_class=fmt)
    sp.add_argument("--runs", dest="runs_csv", required=True, help="runs CSV")
    sp.add_argument("--set", choices=("f16", "f3", "f3p"), default="f3p", type=str.lower,
                    help="feature set")
    sp.add_argument("--percentile-runs", help="runs CSV supplying the best-run averages of f3p")
    sp.add_argument("--top-moves", type=_fraction, default=DEFAULT_TOP_MOVES,
                    help="best-run fraction for the moves-left average")
    sp.add_argument("--top-goals", type=_fraction, default=DEFAULT_TOP_GOALS,
                    help="best-run fraction for the cleared-goals average")
    sp.add_argument("--out", required=True, help="features CSV")
    sp.set_defaults(func=cmd_features)

    sp = sub.add_parser("sweep", help="rank correlation of best-run features with pass rate", formatter_class=fmt)
    sp.add_argument("--runs", dest="runs_csv", required=True, help="runs CSV")
    sp.add_argument("--truth", required=True, help="truth CSV")
    sp.add_argument("--fractions", type=_fraction, nargs="+", default=list(DEFAULT_SWEEP_FRACTIONS))
    sp.add_argument("--out", required=True, help="sweep CSV")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("synth-truth", help="synthetic player pass and churn rates", formatter_class=fmt)
    sp.add_argument("--levels", required=True, help="level pack file")
    sp.add_argument("--weights", required=True, help="weights JSON for the oracle policy agent")
    sp.add_argument("--params", help="population parameters JSON (default: built-in reference)")
    sp.add_argument("--runs", type=_positive_int, default=1000, help="oracle runs per level")
    sp.add_argument("--blend", type=float, nargs=2, default=list(DEFAULT_BLEND),
                    metavar=("MOVES_LEFT", "PASS"), help="capability weights")
    sp.add_argument("--top-moves", type=_fraction, default=DEFAULT_TOP_MOVES,
                    help="best-run fraction for the oracle moves-left average")
    sp.add_argument("--out", required=True, help="truth CSV")
    common(sp, workers=True)
    sp.set_defaults(func=cmd_synth_truth)

    sp = sub.add_parser("predict", help="cross-validated pass and churn prediction", formatter_class=fmt)
    sp.add_argument("--features", action="append", required=True, metavar="LABEL=PATH",
                    help="features CSV tagged with an agent label; repeatable")
    sp.add_argument("--truth", required=True, help="truth CSV")
    sp.add_argument("--model", choices=("baseline", "extended", "both"), default="both")
    sp.add_argument("--folds", type=_positive_int, default=5)
    sp.add_argument("--seeds", type=_positive_int, default=5, help="population fits averaged per fold")
    sp.add_argument("--fit-iterations", type=_positive_int, default=FitConfig.iterations)
    sp.add_argument("--fit-population", type=_positive_int, default=FitConfig.population)
    sp.add_argument("--churn-weight", type=float, default=FitConfig.churn_weight,
                    help="weight of churn error in the population fit")
    sp.add_argument("--out", required=True, help="report CSV")
    sp.add_argument("--predictions", help="per-level held-out predictions CSV (single configuration only)")
    common(sp, workers=True)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("plot", help="SVG charts of a sweep and of truth", formatter_class=fmt)
    sp.add_argument("--sweep", help="sweep CSV")
    sp.add_argument("--truth", help="truth CSV")
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "blend", None) is not None and not all(math.isfinite(b) for b in args.blend):
            raise UsageError("--blend weights must be finite")
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", EXIT_USAGE, exc)
    except MissingWeightsError as exc:
        return _fail("missing_weights", EXIT_MISSING_WEIGHTS, exc)
    except FileNotFoundError as exc:
        return _fail("missing_file", EXIT_MISSING_FILE, exc)
    except (ConfigurationError, ContractViolation) as exc:
        return _fail("schema", EXIT_SCHEMA, exc)
    except InsufficientDataError as exc:
        return _fail("insufficient_data", EXIT_GENERIC, exc)
    except Exception as exc:  # noqa: BLE001 - the CLI reports every failure as one line
        return _fail(type(exc).__name__, EXIT_GENERIC, exc)


if __name__ == "__main__":
    sys.exit(main())
