"""Cross-validated evaluation of the predictors and the synthetic player truth."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .env import LevelConfig
from .errors import ContractViolation
from .predict import (FitConfig, PopulationParams, fit_linear, fit_population, normalize_difficulty,
                      predict_linear, simulate_population)
from .records import GroundTruthRecord, LevelPrediction, RunRecord
from .seeding import derive_seed, generator
from .stats import DEFAULT_TOP_MOVES, FeatureVector, best_run_subset, features_by_level, group_by_level

PREDICTORS = ("baseline", "extended")
GRID_AGENTS = {"MCTS": "policy-myopic", "DRL": "policy-only"}
DEFAULT_BLEND = (0.5, 0.5)


def kfold_split(level_ids: Sequence[int], k: int = 5, seed: int = 0) -> list[list[int]]:
    """Seeded shuffle, then ``k`` contiguous folds whose sizes differ by at most one."""
    ids = sorted(level_ids)
    if not 1 <= k <= len(ids):
        raise ContractViolation(f"cannot split {len(ids)} levels into {k} folds")
    perm = generator(seed, 0xF01D).permutation(len(ids))
    return [[ids[i] for i in part] for part in np.array_split(perm, k)]


def mse(predictions: Mapping[int, float], truth: Mapping[int, float]) -> float:
    if set(predictions) != set(truth):
        raise ContractViolation("predictions and truth cover different levels")
    if not predictions:
        raise ContractViolation("mse of nothing")
    return float(np.mean([(predictions[k] - truth[k]) ** 2 for k in predictions]))


@dataclass(frozen=True)
class SummaryReport:
    predictor: str
    agent: str
    feature_set: str
    pass_folds: tuple[float, ...]
    churn_folds: tuple[float, ...]
    predictions: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def tag(self) -> str:
        return f"{self.predictor.capitalize()}-{self.agent}-{self.feature_set}"

    @property
    def pass_mu(self) -> float:
        return float(np.mean(self.pass_folds))

    @property
    def pass_sigma(self) -> float:
        return float(np.std(self.pass_folds))

    @property
    def churn_mu(self) -> float:
        return float(np.mean(self.churn_folds))

    @property
    def churn_sigma(self) -> float:
        return float(np.std(self.churn_folds))


def _restrict(mapping: Mapping, ids) -> dict:
    return {lid: mapping[lid] for lid in ids}


def _fold_errors(predictor, features, truth, train, test, *, extended_seeds, fit_config, seed, workers):
    """(pass MSE, churn MSE, held-out predictions) for one fold."""
    model = fit_linear(_restrict(features, train), _restrict(truth, train))
    true_pass = {l: truth[l].pass_rate for l in test}
    true_churn = {l: truth[l].churn_rate for l in test}
    if predictor == "baseline":
        preds = {lid: predict_linear(model, features[lid]) for lid in test}
        return (mse({l: p.pass_rate for l, p in preds.items()}, true_pass),
                mse({l: p.churn_rate for l, p in preds.items()}, true_churn), preds)

    ids = sorted(features)
    pass_hat = {lid: predict_linear(model, features[lid]).pass_rate for lid in ids}
    diff = normalize_difficulty(pass_hat, reference=[pass_hat[l] for l in train])
    pe, ce, runs = [], [], []
    for s in range(extended_seeds):
        fit_seed = derive_seed(seed, s)
        params, _ = fit_population(_restrict(diff, train), _restrict(truth, train), fit_config,
                                   seed=fit_seed, workers=workers)
        sim = simulate_population([diff[l] for l in ids], params, derive_seed(fit_seed, 0x51), ids)
        out = {p.level_id: p for p in sim.predictions}
        pe.append(mse({l: out[l].pass_rate for l in test}, true_pass))
        ce.append(mse({l: out[l].churn_rate for l in test}, true_churn))
        runs.append(out)
    preds = {l: LevelPrediction(l, float(np.mean([o[l].pass_rate for o in runs])),
                                float(np.mean([o[l].churn_rate for o in runs]))) for l in test}
    return float(np.mean(pe)), float(np.mean(ce)), preds


def evaluate_config(agent: str, feature_set: str, predictor: str,
                    features: Mapping[int, FeatureVector], truth: Mapping[int, GroundTruthRecord], *,
                    k: int = 5, extended_seeds: int = 5, seed: int = 0,
                    fit_config: FitConfig = FitConfig(), workers: int = 1) -> SummaryReport:
    """k-fold error of one predictor on one agent's features.

    The extended predictor fits the population only on training levels, then
    simulates the full level sequence; its fold error is averaged over
    ``extended_seeds`` independently seeded fits.
    """
    if predictor not in PREDICTORS:
        raise ContractViolation(f"unknown predictor {predictor!r}")
    if set(features) != set(truth):
        raise ContractViolation("features and truth cover different levels")
    folds = kfold_split(list(truth), k, seed)
    pass_f, churn_f, held_out = [], [], {}
    for i, test in enumerate(folds):
        train = sorted(set(truth) - set(test))
        try:
            p, c, preds = _fold_errors(predictor, features, truth, train, sorted(test),
                                       extended_seeds=extended_seeds, fit_config=fit_config,
                                       seed=derive_seed(seed, i), workers=workers)
        except Exception as exc:
            raise type(exc)(f"fold {i + 1}/{k}: {exc}") from exc
        pass_f.append(p)
        churn_f.append(c)
        held_out.update(preds)
    return SummaryReport(predictor, agent, feature_set.upper(), tuple(pass_f), tuple(churn_f),
                         dict(sorted(held_out.items())))


def grid_features(feature_set: str, records: Sequence[RunRecord],
                  percentile_records: Sequence[RunRecord] | None = None, **kw) -> dict[int, FeatureVector]:
    """Per-level features; F3P takes its best-run averages from ``percentile_records`` if given."""
    pct = percentile_records if feature_set.upper() == "F3P" else None
    return features_by_level(records, feature_set, percentile_records=pct, **kw)


# --------------------------------------------------------------------------- synthetic truth


@dataclass(frozen=True)
class SyntheticTruth:
    records: list[GroundTruthRecord]
    difficulty: dict[int, float]
    capability: dict[int, float] = field(default_factory=dict)


def oracle_capability(records: Sequence[RunRecord], blend=DEFAULT_BLEND,
                      top_fraction: float = DEFAULT_TOP_MOVES) -> float:
    """Blend of best-run moves-left ratio and mean pass rate."""
    top = best_run_subset(records, top_fraction, "moves_left")
    ml = float(np.mean([r.moves_left_ratio for r in top]))
    pr = float(np.mean([r.passed for r in records]))
    return blend[0] * ml + blend[1] * pr


def oracle_difficulty(records: Sequence[RunRecord], blend=DEFAULT_BLEND,
                      top_fraction: float = DEFAULT_TOP_MOVES) -> tuple[dict[int, float], dict[int, float]]:
    """Min-max scaled ``1 - capability`` per level (hardest 1, easiest 0)."""
    cap = {lid: oracle_capability(recs, blend, top_fraction)
           for lid, recs in sorted(group_by_level(records).items())}
    return normalize_difficulty(cap), cap


def generate_synthetic_truth(levels: Sequence[LevelConfig], params: PopulationParams,
                             oracle_records: Sequence[RunRecord], seed: int,
                             blend=DEFAULT_BLEND, top_fraction: float = DEFAULT_TOP_MOVES) -> SyntheticTruth:
    """Stand-in "human" pass and churn rates for ``levels`` played in order."""
    ids = [lv.level_id for lv in levels]
    by_level = group_by_level(oracle_records)
    missing = [lid for lid in ids if lid not in by_level]
    if missing:
        raise ContractViolation(f"no oracle runs for levels {missing}")
    diff, cap = oracle_difficulty([r for lid in ids for r in by_level[lid]], blend, top_fraction)
    sim = simulate_population([diff[lid] for lid in ids], params, derive_seed(seed, 0x7237), ids)
    recs = [GroundTruthRecord(p.level_id, p.pass_rate, p.churn_rate) for p in sim.predictions]
    return SyntheticTruth(recs, diff, cap)
