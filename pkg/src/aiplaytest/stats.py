"""Run collection, gameplay features, best-run subsets and rank correlation."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .env import LevelConfig
from .errors import ContractViolation, MissingWeightsError, UndefinedCorrelationError
from .mcts import VariantConfig, play_level
from .parallel import pmap
from .policy import PolicyWeights, play_episodes
from .records import RunRecord
from .seeding import derive_seed

FEATURE_SETS = ("F16", "F3", "F3P")
F3_NAMES = ("pass_rate", "moves_left_ratio", "cleared_goals")
_SUMMARY = ("mean", "std", "min", "max", "p5", "p10", "p25", "p50", "p75")
F16_NAMES = ("pass_mean", "pass_std") + tuple(
    f"{q}_{s}" for q in ("cleared_goals", "moves_left_ratio") for s in _SUMMARY
)

DEFAULT_TOP_MOVES = 0.15
DEFAULT_TOP_GOALS = 0.05
DEFAULT_SWEEP_FRACTIONS = (0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


def run_seed(master_seed: int, level_id: int, run_index: int) -> int:
    return derive_seed(master_seed, level_id, run_index)


def _play_one(task) -> RunRecord:
    level, config, weights, seed = task
    return play_level(level, config, weights, seed)


def collect_runs(levels: Sequence[LevelConfig], config: VariantConfig, n_runs: int, master_seed: int,
                 weights: Mapping[int, PolicyWeights] | None = None, workers: int = 1) -> list[RunRecord]:
    """``n_runs`` seeded runs per level, ordered by level then run index."""
    if n_runs < 1:
        raise ContractViolation("n_runs must be >= 1")
    weights = weights or {}
    if config.learned:
        missing = [lv.level_id for lv in levels if lv.level_id not in weights]
        if missing:
            raise MissingWeightsError(f"no trained policy weights for levels {missing}")
    if not config.searches:
        out = []
        for lv in levels:
            seeds = [run_seed(master_seed, lv.level_id, i) for i in range(n_runs)]
            budget = config.move_budget_for(lv)
            ep = play_episodes(lv, weights[lv.level_id], seeds, budget)
            for i, s in enumerate(seeds):
                passed = bool(ep.passed[i])
                mu = int(ep.moves_used[i])
                out.append(RunRecord(lv.level_id, config.agent, s, passed, mu,
                                     budget - mu if passed else 0,
                                     (lv.goal_count - int(ep.goals_remaining[i])) / lv.goal_count, budget))
        return out
    tasks = [(lv, config, weights.get(lv.level_id), run_seed(master_seed, lv.level_id, i))
             for lv in levels for i in range(n_runs)]
    return pmap(_play_one, tasks, workers)


def group_by_level(records: Iterable[RunRecord]) -> dict[int, list[RunRecord]]:
    out: dict[int, list[RunRecord]] = defaultdict(list)
    for r in records:
        out[r.level_id].append(r)
    return dict(out)


_KEYS: dict[str, Callable[[RunRecord], float]] = {
    "moves_left": lambda r: r.moves_left,
    "goals_cleared_fraction": lambda r: r.goals_cleared_fraction,
}


def subset_size(fraction: float, n: int) -> int:
    # round() guards against 0.15 * 20 == 3.0000000000000004
    return max(1, math.ceil(round(fraction * n, 9)))


def best_run_subset(records: Sequence[RunRecord], fraction: float, key: str = "moves_left") -> list[RunRecord]:
    """Top ``ceil(fraction * n)`` runs by ``key`` (descending), ties to the lower seed."""
    if not records:
        raise ContractViolation("best_run_subset needs at least one record")
    if not 0.0 < fraction <= 1.0:
        raise ContractViolation(f"fraction {fraction} outside (0, 1]")
    keyf = _KEYS[key] if isinstance(key, str) else key
    ranked = sorted(records, key=lambda r: (-keyf(r), r.seed))
    return ranked[: subset_size(fraction, len(records))]


@dataclass(frozen=True)
class FeatureVector:
    level_id: int
    feature_set: str
    values: dict = field(hash=False)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.values)

    def as_array(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = self.names if names is None else names
        return np.array([self.values[n] for n in names], dtype=float)


def _summary(x: np.ndarray) -> list[float]:
    p5, p10, p25, p50, p75 = np.percentile(x, [5, 10, 25, 50, 75])
    return [x.mean(), x.std(), x.min(), x.max(), p5, p10, p25, p50, p75]


def _mean(values) -> float:
    # fsum is exactly rounded, so the mean does not depend on record order
    values = [float(v) for v in values]
    return math.fsum(values) / len(values)


def extract_features(records: Sequence[RunRecord], feature_set: str = "F3", *,
                     top_moves_fraction: float = DEFAULT_TOP_MOVES,
                     top_goals_fraction: float = DEFAULT_TOP_GOALS,
                     percentile_records: Sequence[RunRecord] | None = None) -> FeatureVector:
    """Per-level features from one level's runs.

    ``percentile_records`` supplies the runs used for the best-run averages of
    F3P (e.g. many cheap policy-only runs next to a few search runs); the pass
    rate always comes from ``records``.
    """
    if not records:
        raise ContractViolation("extract_features needs at least one record")
    fs = feature_set.upper()
    if fs not in FEATURE_SETS:
        raise ContractViolation(f"unknown feature set {feature_set!r}")
    level_ids = {r.level_id for r in records}
    if len(level_ids) != 1:
        raise ContractViolation(f"records span several levels: {sorted(level_ids)}")
    level_id = level_ids.pop()
    passed = np.array([r.passed for r in records], dtype=float)
    goals = np.array([r.goals_cleared_fraction for r in records])
    ratio = np.array([r.moves_left_ratio for r in records])

    if fs == "F16":
        vals = [passed.mean(), passed.std()] + _summary(goals) + _summary(ratio)
        values = dict(zip(F16_NAMES, (float(v) for v in vals)))
    elif fs == "F3":
        values = {"pass_rate": _mean(passed), "moves_left_ratio": _mean(ratio),
                  "cleared_goals": _mean(goals)}
    else:
        pool = records if percentile_records is None else percentile_records
        if not pool:
            raise ContractViolation("percentile_records is empty")
        top_moves = best_run_subset(pool, top_moves_fraction, "moves_left")
        top_goals = best_run_subset(pool, top_goals_fraction, "goals_cleared_fraction")
        values = {"pass_rate": _mean(passed),
                  "moves_left_ratio": _mean([r.moves_left_ratio for r in top_moves]),
                  "cleared_goals": _mean([r.goals_cleared_fraction for r in top_goals])}
    return FeatureVector(level_id, fs, values)


def features_by_level(records: Iterable[RunRecord], feature_set: str, *,
                      percentile_records: Iterable[RunRecord] | None = None,
                      **kw) -> dict[int, FeatureVector]:
    by_level = group_by_level(records)
    pct = group_by_level(percentile_records) if percentile_records is not None else {}
    return {
        lid: extract_features(recs, feature_set, percentile_records=pct.get(lid), **kw)
        for lid, recs in sorted(by_level.items())
    }


def average_ranks(x) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    breaks = np.flatnonzero(xs[1:] != xs[:-1]) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks, [n]))
    ranks = np.empty(n)
    ranks[order] = np.repeat((starts + ends + 1) / 2.0, ends - starts)
    return ranks


def pearson(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm = x - x.mean()
    ym = y - y.mean()
    sxx = float(xm @ xm)
    syy = float(ym @ ym)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("zero variance input")
    return float(np.clip((xm @ ym) / math.sqrt(sxx * syy), -1.0, 1.0))


def spearman(x, y) -> float:
    """Spearman's rho: Pearson correlation of average ranks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ContractViolation("spearman needs two 1-d sequences of equal length")
    if len(x) < 3:
        raise ContractViolation("spearman needs at least 3 pairs")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ContractViolation("spearman inputs must be finite")
    return pearson(average_ranks(x), average_ranks(y))


@dataclass(frozen=True)
class SweepCell:
    fraction: float
    feature: str
    rho: float


def best_fraction_features(records: Sequence[RunRecord], fraction: float) -> dict[str, float]:
    """The three F3 averages restricted to the best ``fraction`` of runs."""
    by_moves = best_run_subset(records, fraction, "moves_left")
    by_goals = best_run_subset(records, fraction, "goals_cleared_fraction")
    return {
        "pass_rate": _mean([r.passed for r in by_moves]),
        "moves_left_ratio": _mean([r.moves_left_ratio for r in by_moves]),
        "cleared_goals": _mean([r.goals_cleared_fraction for r in by_goals]),
    }


def correlation_sweep(records_by_level: Mapping[int, Sequence[RunRecord]], truth_pass: Mapping[int, float],
                      fractions: Sequence[float] = DEFAULT_SWEEP_FRACTIONS) -> list[SweepCell]:
    """Spearman rho between each best-fraction feature and the true pass rates.

    Undefined correlations are recorded as NaN.
    """
    levels = sorted(lid for lid in records_by_level if lid in truth_pass)
    if len(levels) < 3:
        raise ContractViolation("correlation sweep needs at least 3 levels with truth")
    truth = [truth_pass[lid] for lid in levels]
    cells = []
    for p in fractions:
        feats = [best_fraction_features(records_by_level[lid], p) for lid in levels]
        for name in F3_NAMES:
            try:
                rho = spearman([f[name] for f in feats], truth)
            except UndefinedCorrelationError:
                rho = float("nan")
            cells.append(SweepCell(float(p), name, rho))
    return cells


def sweep_table(cells: Sequence[SweepCell]) -> dict[str, dict[float, float]]:
    table: dict[str, dict[float, float]] = defaultdict(dict)
    for c in cells:
        table[c.feature][c.fraction] = c.rho
    return dict(table)
