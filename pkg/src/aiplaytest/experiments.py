"""End-to-end experiment drivers shared by the scripts and the acceptance suite.

``build_grid_data`` plays a level pack with the two grid agents and derives
synthetic truth; ``run_grid`` cross-validates every predictor, agent and
feature set on that data.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import partial
from typing import Sequence

from .env import LevelConfig
from .evaluation import GRID_AGENTS, PREDICTORS, SummaryReport, SyntheticTruth, evaluate_config, \
    generate_synthetic_truth, grid_features
from .mcts import VariantConfig
from .parallel import pmap
from .policy import PolicyWeights, train_policy
from .predict import FitConfig, PopulationParams
from .records import RunRecord
from .seeding import derive_seed
from .stats import FEATURE_SETS, collect_runs

ORACLE_STREAM = 0x0AC1E
SEARCH_RUNS = 20
POLICY_RUNS = 1000


@dataclass
class GridData:
    levels: list[LevelConfig]
    weights: dict[int, PolicyWeights]
    runs: dict[str, list[RunRecord]]  # grid agent label -> records
    truth: SyntheticTruth
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def truth_by_level(self):
        return {r.level_id: r for r in self.truth.records}

    def features(self, agent: str, feature_set: str):
        pct = self.runs["DRL"] if feature_set.upper() == "F3P" else None
        return grid_features(feature_set, self.runs[agent], percentile_records=pct)


def _train(level, seed, iterations, population):
    return train_policy(level, iterations, population, seed)


def train_all(levels: Sequence[LevelConfig], seed: int, workers: int = 1, iterations: int = 30,
              population: int = 32) -> dict[int, PolicyWeights]:
    fn = partial(_train, seed=seed, iterations=iterations, population=population)
    return {lv.level_id: w for lv, w in zip(levels, pmap(fn, list(levels), workers))}


def build_grid_data(levels: Sequence[LevelConfig], seed: int = 0, workers: int = 1,
                    params: PopulationParams = PopulationParams(), search_runs: int = SEARCH_RUNS,
                    policy_runs: int = POLICY_RUNS, budget: int = 200) -> GridData:
    """Train, play both grid agents, and generate synthetic truth from separate oracle runs."""
    levels = list(levels)
    t = {}
    t0 = time.perf_counter()
    weights = train_all(levels, seed, workers)
    t["train"] = time.perf_counter() - t0
    runs = {}
    for label, agent in GRID_AGENTS.items():
        t0 = time.perf_counter()
        cfg = VariantConfig.for_agent(agent, budget=budget)
        n = policy_runs if agent == "policy-only" else search_runs
        runs[label] = collect_runs(levels, cfg, n, derive_seed(seed, 0xA9, len(runs)), weights, workers)
        t[f"runs_{label}"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    oracle = collect_runs(levels, VariantConfig.for_agent("policy-only"), policy_runs,
                          derive_seed(seed, ORACLE_STREAM), weights, workers)
    truth = generate_synthetic_truth(levels, params, oracle, seed)
    t["truth"] = time.perf_counter() - t0
    return GridData(levels, weights, runs, truth, t)


def run_grid(data: GridData, seed: int = 0, workers: int = 1, fit_config: FitConfig = FitConfig(),
             extended_seeds: int = 5, k: int = 5, predictors: Sequence[str] = PREDICTORS,
             agents: Sequence[str] = tuple(GRID_AGENTS), feature_sets: Sequence[str] = FEATURE_SETS
             ) -> list[SummaryReport]:
    """One report per predictor x agent x feature set, in that nesting order."""
    truth = data.truth_by_level
    out = []
    for predictor in predictors:
        for agent in agents:
            for fs in feature_sets:
                out.append(evaluate_config(agent, fs, predictor, data.features(agent, fs), truth, k=k,
                                           extended_seeds=extended_seeds, seed=seed, fit_config=fit_config,
                                           workers=workers))
    return out
