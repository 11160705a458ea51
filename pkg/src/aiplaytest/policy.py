"""Rollout policies: uniform random, and a softmax policy over hand-made action features.

The softmax policy scores each legal action by ``w . phi(s, a) / temperature``
with four features per action:

0. group size / board cells
1. goal tiles in the group / max(goals remaining, 1)
2. 1 if popping the group wins the level
3. fraction of the level goal already cleared

Weights are found per level with the cross-entropy method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from . import _kernels as K
from .env import Action, GameState, LevelConfig, Status, legal_action_cells, new_level
from .errors import ConfigurationError, ContractViolation
from .parallel import pmap
from .seeding import derive_seed

FEATURE_NAMES = ("group_fraction", "goal_fraction", "wins_level", "goal_progress")
N_FEATURES = K.N_FEATURES

POLICY_ONLY_BUDGET_MULTIPLIER = 4
_AGENT_STREAM = 0xA6E7


class Uniform:
    """Marker for the uniform random rollout policy."""

    def __repr__(self):
        return "UNIFORM"


UNIFORM = Uniform()


@dataclass(frozen=True)
class PolicyWeights:
    weights: tuple[float, ...]
    temperature: float = 1.0
    level_id: int | None = None
    seed: int | None = None

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) != N_FEATURES:
            raise ConfigurationError(f"expected {N_FEATURES} weights, got {len(w)}")
        if not all(math.isfinite(x) for x in w):
            raise ConfigurationError("policy weights must be finite")
        if not (self.temperature > 0 and math.isfinite(self.temperature)):
            raise ConfigurationError("temperature must be > 0")
        object.__setattr__(self, "weights", w)

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)

    @classmethod
    def zeros(cls, **kw) -> "PolicyWeights":
        return cls((0.0,) * N_FEATURES, **kw)


def _legal_or_raise(state: GameState) -> tuple[np.ndarray, np.ndarray]:
    if state.status != Status.IN_PROGRESS:
        raise ContractViolation(f"state is terminal ({state.status.name})")
    cells, sizes = legal_action_cells(state)
    if len(cells) == 0:
        raise ContractViolation("no legal actions")
    return cells, sizes


def action_features(state: GameState, action: Action) -> np.ndarray:
    cells, sizes = _legal_or_raise(state)
    cfg = state.config
    cell = action.row * cfg.width + action.col
    hit = np.flatnonzero(cells == cell)
    if not (0 <= action.row < cfg.height and 0 <= action.col < cfg.width) or len(hit) == 0:
        raise ContractViolation(f"illegal action {tuple(action)}")
    s = int(sizes[hit[0]])
    g = state.goals_remaining
    return np.array([
        s / cfg.cells,
        min(s, g) / max(g, 1),
        1.0 if s >= g else 0.0,
        (cfg.goal_count - g) / cfg.goal_count,
    ])


def action_probabilities(state: GameState, weights: PolicyWeights | Uniform) -> np.ndarray:
    """Probabilities over ``legal_actions(state)``, in the same order."""
    cells, sizes = _legal_or_raise(state)
    k = len(cells)
    if isinstance(weights, Uniform):
        return np.full(k, 1.0 / k)
    out = np.empty(k)
    K.action_logits(sizes, k, state.config.cells, state.goals_remaining, state.config.goal_count,
                    weights.vector, 1.0 / weights.temperature, out)
    K.softmax_inplace(out, k)
    return out


def sample_action(state: GameState, weights: PolicyWeights | Uniform, rng: np.random.Generator) -> Action:
    cells, sizes = _legal_or_raise(state)
    learned = not isinstance(weights, Uniform)
    vec = weights.vector if learned else np.zeros(N_FEATURES)
    inv_t = 1.0 / weights.temperature if learned else 1.0
    scratch = np.empty(len(cells))
    i = K.pick_index(sizes, len(cells), state.config.cells, state.goals_remaining,
                     state.config.goal_count, learned, vec, inv_t, rng.random(), scratch)
    c = int(cells[i])
    return Action(c // state.config.width, c % state.config.width)


@dataclass
class EpisodeBatch:
    returns: np.ndarray
    moves_used: np.ndarray
    goals_remaining: np.ndarray
    status: np.ndarray

    @property
    def passed(self) -> np.ndarray:
        return self.status == Status.WON


def agent_seed(seed: int) -> int:
    return derive_seed(seed, _AGENT_STREAM)


def play_episodes(level: LevelConfig, weights: PolicyWeights | Uniform, seeds, agent_budget: int) -> EpisodeBatch:
    """Play whole levels with the policy alone, one episode per seed."""
    seeds = [int(s) for s in seeds]
    n = len(seeds)
    grids = np.empty((n, level.cells), np.int8)
    env_rngs = np.empty(n, np.uint64)
    agent_rngs = np.empty(n, np.uint64)
    for i, s in enumerate(seeds):
        st = new_level(level, s)
        grids[i] = st.flat
        env_rngs[i] = st.rng_state
        agent_rngs[i] = agent_seed(s)
    learned = not isinstance(weights, Uniform)
    vec = weights.vector if learned else np.zeros(N_FEATURES)
    inv_t = 1.0 / weights.temperature if learned else 1.0
    out = EpisodeBatch(np.empty(n), np.empty(n, np.int64), np.empty(n, np.int64), np.empty(n, np.int64))
    K.batch_episodes(grids, level.height, level.width, level.num_colors, level.goal_count, agent_budget,
                     env_rngs, learned, vec, inv_t, agent_rngs,
                     out.returns, out.moves_used, out.goals_remaining, out.status)
    return out


def policy_only_budget(level: LevelConfig) -> int:
    return POLICY_ONLY_BUDGET_MULTIPLIER * level.move_budget


def _score(vec: np.ndarray, level: LevelConfig, seeds, budget: int, temperature: float) -> float:
    w = PolicyWeights(tuple(vec), temperature)
    return float(play_episodes(level, w, seeds, budget).returns.mean())


def train_policy(level: LevelConfig, iterations: int = 30, population: int = 32, seed: int = 0, *,
                 episodes: int = 32, elite_fraction: float = 0.25, init_std: float = 20.0,
                 min_std: float = 0.5, temperature: float = 1.0, agent_budget: int | None = None,
                 workers: int = 1) -> PolicyWeights:
    """Cross-entropy search for softmax weights maximising mean episode return.

    Every candidate is scored on the same fixed set of episode seeds, so scores
    are comparable across iterations and the best candidate seen is returned.
    """
    if iterations < 1 or population < 1:
        raise ConfigurationError("iterations and population must be >= 1")
    budget = agent_budget or policy_only_budget(level)
    rng = np.random.default_rng(derive_seed(seed, level.level_id, 0xCE))
    ep_seeds = [derive_seed(seed, level.level_id, 0xE9, i) for i in range(episodes)]
    mean = np.zeros(N_FEATURES)
    std = np.full(N_FEATURES, init_std)
    n_elite = max(1, math.ceil(elite_fraction * population))
    best_vec, best_score = None, -math.inf
    score = partial(_score, level=level, seeds=ep_seeds, budget=budget, temperature=temperature)
    for _ in range(iterations):
        cands = mean + std * rng.standard_normal((population, N_FEATURES))
        scores = np.asarray(pmap(score, list(cands), workers))
        order = np.argsort(-scores, kind="stable")
        if scores[order[0]] > best_score:
            best_score = float(scores[order[0]])
            best_vec = cands[order[0]].copy()
        elite = cands[order[:n_elite]]
        mean = elite.mean(axis=0)
        std = np.maximum(elite.std(axis=0), min_std)
    return PolicyWeights(tuple(best_vec), temperature, level_id=level.level_id, seed=seed)
