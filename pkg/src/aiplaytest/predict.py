"""Pass/churn predictors: a linear baseline and a simulated player population.

The population model walks every simulated player through the level sequence.
Each player carries three traits drawn from Beta distributions: skill,
persistence and boredom. At every level a player may first quit out of
boredom. Otherwise they keep attempting until they pass, give up after a
failure (probability ``1 - persistence``), or hit ``max_attempts``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Mapping, Sequence

import numba as nb
import numpy as np

from . import _kernels as K
from .errors import ConfigurationError, ContractViolation, InsufficientDataError
from .parallel import pmap
from .records import LevelPrediction
from .seeding import derive_seed, generator

TARGETS = ("pass_rate", "churn_rate")
RIDGE_LAMBDA = 1e-8


# --------------------------------------------------------------------------- baseline


@dataclass(frozen=True)
class LinearModel:
    feature_names: tuple[str, ...]
    weights: np.ndarray  # (n_features, 2): one column per target
    intercepts: np.ndarray  # (2,)
    ridge: bool = False

    def __post_init__(self):
        if self.weights.shape != (len(self.feature_names), len(TARGETS)):
            raise ContractViolation("weight matrix does not match feature names")

    def raw(self, x) -> np.ndarray:
        """Unclamped affine prediction for one feature row (or a matrix of rows)."""
        return np.asarray(x, dtype=float) @ self.weights + self.intercepts


def _design(features: Mapping[int, object], level_ids: Sequence[int], names=None):
    rows = []
    for lid in level_ids:
        fv = features[lid]
        if names is None:
            names = fv.names
        elif tuple(fv.names) != tuple(names):
            raise ContractViolation(f"level {lid}: feature names {fv.names} != {tuple(names)}")
        rows.append(fv.as_array(names))
    return np.array(rows, dtype=float).reshape(len(level_ids), len(names)), tuple(names)


def solve_ols(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """Centered least squares; falls back to a tiny ridge if the design is rank deficient."""
    xm = x.mean(axis=0)
    ym = y.mean(axis=0)
    xc = x - xm
    gram = xc.T @ xc
    k = gram.shape[0]
    ridge = k > 0 and np.linalg.matrix_rank(xc) < k
    if ridge:
        gram = gram + RIDGE_LAMBDA * np.eye(k)
    w = np.linalg.solve(gram, xc.T @ (y - ym)) if k else np.zeros((0, y.shape[1]))
    return w, ym - xm @ w, bool(ridge)


def fit_linear(features: Mapping[int, object], truth: Mapping[int, object],
               level_ids: Sequence[int] | None = None) -> LinearModel:
    """OLS from per-level feature vectors to the (pass, churn) truth.

    ``truth`` values need ``pass_rate`` and ``churn_rate`` attributes.
    """
    ids = sorted(truth) if level_ids is None else list(level_ids)
    missing = [lid for lid in ids if lid not in features or lid not in truth]
    if missing:
        raise ContractViolation(f"levels {missing} lack features or truth")
    if not ids:
        raise InsufficientDataError("no levels to fit")
    x, names = _design(features, ids)
    if len(ids) < len(names) + 2:
        raise InsufficientDataError(
            f"{len(ids)} levels cannot fit {len(names)} features (need >= {len(names) + 2})")
    y = np.array([[getattr(truth[lid], t) for t in TARGETS] for lid in ids], dtype=float)
    w, b, ridge = solve_ols(x, y)
    return LinearModel(names, w, b, ridge)


def predict_linear(model: LinearModel, feature_vector) -> LevelPrediction:
    if tuple(feature_vector.names) != model.feature_names:
        raise ContractViolation(f"feature names {feature_vector.names} != model {model.feature_names}")
    p, c = np.clip(model.raw(feature_vector.as_array()), 0.0, 1.0)
    return LevelPrediction(feature_vector.level_id, float(p), float(c))


def normalize_difficulty(pass_rates: Mapping[int, float],
                         reference: Sequence[float] | None = None) -> dict[int, float]:
    """Map predicted pass rates to difficulties: easiest 0, hardest 1.

    The range comes from ``reference`` when given (e.g. the training levels),
    and values outside it are clamped. A degenerate range yields 0.5 everywhere.
    """
    ref = np.asarray(list(pass_rates.values()) if reference is None else list(reference), dtype=float)
    if ref.size < 2 or ref.max() == ref.min():
        return {lid: 0.5 for lid in pass_rates}
    hi, lo = float(ref.max()), float(ref.min())
    return {lid: float(np.clip((hi - p) / (hi - lo), 0.0, 1.0)) for lid, p in pass_rates.items()}


# --------------------------------------------------------------------------- population


@dataclass(frozen=True)
class PopulationParams:
    skill_alpha: float = 4.0
    skill_beta: float = 2.0
    persistence_alpha: float = 16.0
    persistence_beta: float = 1.0
    boredom_alpha: float = 1.0
    boredom_beta: float = 100.0
    slope: float = 6.0
    population_size: int = 10_000
    max_attempts: int = 50

    def __post_init__(self):
        for name in SHAPE_FIELDS:
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigurationError(f"{name} must be a positive finite number, got {v}")
        if self.population_size < 1 or self.max_attempts < 1:
            raise ConfigurationError("population_size and max_attempts must be >= 1")

    def vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in SHAPE_FIELDS])

    def with_vector(self, v) -> "PopulationParams":
        return replace(self, **{n: float(x) for n, x in zip(SHAPE_FIELDS, v)})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "PopulationParams":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigurationError(f"unknown population parameters {unknown}")
        return cls(**d)


SHAPE_FIELDS = ("skill_alpha", "skill_beta", "persistence_alpha", "persistence_beta",
                "boredom_alpha", "boredom_beta", "slope")


@dataclass(frozen=True)
class PopulationTrace:
    entering: np.ndarray  # players entering each level
    capped: np.ndarray  # players who ran out of attempts at each level
    truncated: bool  # the population died out before the last level


@dataclass(frozen=True)
class SimulationResult:
    predictions: list[LevelPrediction]
    trace: PopulationTrace

    def pass_rates(self) -> np.ndarray:
        return np.array([p.pass_rate for p in self.predictions])

    def churn_rates(self) -> np.ndarray:
        return np.array([p.churn_rate for p in self.predictions])


def draw_traits(params: PopulationParams, seed: int) -> np.ndarray:
    """(3, population_size) array of skill, persistence and boredom."""
    rng = generator(seed, 0x7A175)
    n = params.population_size
    return np.stack([rng.beta(params.skill_alpha, params.skill_beta, n),
                     rng.beta(params.persistence_alpha, params.persistence_beta, n),
                     rng.beta(params.boredom_alpha, params.boredom_beta, n)])


@nb.njit(cache=True)
def _simulate(difficulty, skill, persistence, boredom, slope, max_attempts, base_seed):
    n_levels = difficulty.shape[0]
    n = skill.shape[0]
    entering = np.zeros(n_levels, np.int64)
    attempted = np.zeros(n_levels, np.int64)
    churned = np.zeros(n_levels, np.int64)
    capped = np.zeros(n_levels, np.int64)
    credit = np.zeros(n_levels)
    for i in range(n):
        _, rng = K.splitmix_next(base_seed + np.uint64(i) * K._GOLDEN)
        for lv in range(n_levels):
            entering[lv] += 1
            rng, u = K.rand_uniform(rng)
            if u < boredom[i]:
                churned[lv] += 1
                break
            attempted[lv] += 1
            q = 1.0 / (1.0 + math.exp(-slope * (skill[i] - difficulty[lv])))
            quit_now = False
            tries = 0
            while True:
                tries += 1
                rng, u = K.rand_uniform(rng)
                if u < q:
                    credit[lv] += 1.0 / tries
                    break
                rng, u = K.rand_uniform(rng)
                if u >= persistence[i]:
                    quit_now = True
                    break
                if tries >= max_attempts:
                    capped[lv] += 1
                    break
            if quit_now:
                churned[lv] += 1
                break
    return entering, attempted, churned, capped, credit


def simulate_population(difficulties: Sequence[float], params: PopulationParams, seed: int,
                        level_ids: Sequence[int] | None = None, traits: np.ndarray | None = None
                        ) -> SimulationResult:
    """Pass and churn rate per level for a simulated player population.

    ``difficulties`` are in play order. Levels reached by nobody report pass
    rate 0 and churn rate 1, and the trace is flagged as truncated.
    """
    d = np.asarray(difficulties, dtype=float)
    ids = list(range(1, len(d) + 1)) if level_ids is None else list(level_ids)
    if len(ids) != len(d):
        raise ContractViolation("level_ids and difficulties differ in length")
    if traits is None:
        traits = draw_traits(params, seed)
    entering, attempted, churned, capped, credit = _simulate(
        d, traits[0], traits[1], traits[2], float(params.slope), int(params.max_attempts),
        np.uint64(derive_seed(seed, 0x9A1E5)))
    preds = []
    for j, lid in enumerate(ids):
        if entering[j] == 0:
            preds.append(LevelPrediction(lid, 0.0, 1.0))
            continue
        pr = credit[j] / attempted[j] if attempted[j] else 0.0
        preds.append(LevelPrediction(lid, float(pr), float(churned[j] / entering[j])))
    trace = PopulationTrace(entering.copy(), capped.copy(), bool(len(d) and entering[-1] == 0))
    return SimulationResult(preds, trace)


# --------------------------------------------------------------------------- fitting


@dataclass(frozen=True)
class FitConfig:
    """Cross-entropy search over log-parameters."""

    iterations: int = 12
    population: int = 24
    elite_fraction: float = 0.25
    init_std: float = 0.5
    min_std: float = 0.02
    churn_weight: float = 1.0
    start: PopulationParams = field(default_factory=PopulationParams)

    def __post_init__(self):
        if self.iterations < 1 or self.population < 1:
            raise ConfigurationError("iterations and population must be >= 1")
        if not 0.0 < self.elite_fraction <= 1.0:
            raise ConfigurationError("elite_fraction must be in (0, 1]")


def objective(result: SimulationResult, truth: Mapping[int, object], level_ids: Sequence[int],
              churn_weight: float = 1.0) -> float:
    by_id = {p.level_id: p for p in result.predictions}
    pe = np.mean([(by_id[l].pass_rate - truth[l].pass_rate) ** 2 for l in level_ids])
    ce = np.mean([(by_id[l].churn_rate - truth[l].churn_rate) ** 2 for l in level_ids])
    return float(0.5 * (pe + churn_weight * ce))


def _evaluate(task):
    params, difficulties, ids, truth, train_ids, sim_seed, churn_weight = task
    res = simulate_population(difficulties, params, sim_seed, ids)
    return objective(res, truth, train_ids, churn_weight)


def sample_candidates(rng: np.random.Generator, mean: np.ndarray, std: np.ndarray, n: int) -> np.ndarray:
    return mean + std * rng.standard_normal((n, mean.size))


def fit_population(difficulties: Mapping[int, float], truth: Mapping[int, object],
                   config: FitConfig = FitConfig(), seed: int = 0, workers: int = 1
                   ) -> tuple[PopulationParams, float]:
    """Fit population parameters to the truth of the levels present in ``truth``.

    The whole sequence in ``difficulties`` (ordered by level id) is simulated,
    but only levels in ``truth`` enter the objective. Every candidate uses the
    same simulation seed. Returns the best candidate seen and its objective.
    """
    ids = sorted(difficulties)
    train = sorted(lid for lid in truth if lid in difficulties)
    if len(train) < 5:
        raise InsufficientDataError(f"population fit needs >= 5 training levels, got {len(train)}")
    d = [difficulties[lid] for lid in ids]
    truth = {lid: truth[lid] for lid in train}
    rng = generator(seed, 0xF17)
    sim_seed = derive_seed(seed, 0x5EED)
    mean = np.log(config.start.vector())
    std = np.full(mean.size, config.init_std)
    n_elite = max(1, int(round(config.elite_fraction * config.population)))
    best, best_score = None, math.inf
    for _ in range(config.iterations):
        cand = sample_candidates(rng, mean, std, config.population)
        params = [config.start.with_vector(np.exp(c)) for c in cand]
        scores = np.array(pmap(_evaluate, [(p, d, ids, truth, train, sim_seed, config.churn_weight)
                                           for p in params], workers))
        order = np.argsort(scores, kind="stable")
        if scores[order[0]] < best_score:
            best, best_score = params[order[0]], float(scores[order[0]])
        elite = cand[order[:n_elite]]
        mean = elite.mean(axis=0)
        std = np.maximum(elite.std(axis=0), config.min_std)
    return best, best_score
