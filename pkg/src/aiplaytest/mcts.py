"""Monte Carlo tree search with UCT selection and discounted backpropagation.

Four variants differ only in the rollout policy (uniform or learned softmax)
and the discount factor (1.0, or 0.9 for the myopic variants, applied to both
rollout returns and backpropagation).

Value convention: a node's accumulated value ``V`` sums returns measured from
the moment the node is entered, so each backed-up sample is
``edge_reward(node) + gamma * (return of the node below)``. With this
convention ``V / N`` of a child is the action value of the move leading to it,
which is what the UCT rule compares.

The search is generic over a *model* object exposing ``actions(state)``,
``step(state, action) -> (state, reward)``, ``terminal(state)`` and
``rollout(state, cap, gamma, rng) -> float``. :class:`ColorPopModel` is the
game model; :mod:`aiplaytest.toy` has small enumerable MDPs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import _kernels as K
from .env import Action, GameState, LevelConfig, Status, legal_action_cells, new_level, step, transition
from .errors import ConfigurationError, ContractViolation
from .policy import (UNIFORM, PolicyWeights, Uniform, agent_seed, play_episodes,
                     policy_only_budget)
from .records import AGENTS, RunRecord
from .seeding import derive_seed

SQRT2 = math.sqrt(2.0)
MYOPIC_GAMMA = 0.9
_BELIEF_STREAM = 0xB311EF

# agent name -> (rollout policy, gamma); policy-only runs no search
_VARIANTS = {
    "vanilla": ("uniform", 1.0),
    "policy": ("learned", 1.0),
    "myopic": ("uniform", MYOPIC_GAMMA),
    "policy-myopic": ("learned", MYOPIC_GAMMA),
    "policy-only": ("learned", 1.0),
}


@dataclass(frozen=True)
class VariantConfig:
    agent: str = "vanilla"
    rollout_policy: str = "uniform"
    gamma: float = 1.0
    c: float = SQRT2
    budget: int = 200
    rollout_cap: int = 10
    agent_move_budget: int | None = None

    def __post_init__(self):
        if self.agent not in AGENTS:
            raise ConfigurationError(f"unknown agent {self.agent!r}")
        if self.rollout_policy not in ("uniform", "learned"):
            raise ConfigurationError(f"unknown rollout policy {self.rollout_policy!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError("gamma must be in (0, 1]")
        if self.c < 0:
            raise ConfigurationError("c must be >= 0")
        if self.budget < 1 or self.rollout_cap < 1:
            raise ConfigurationError("budget and rollout_cap must be >= 1")
        if self.agent_move_budget is not None and self.agent_move_budget < 1:
            raise ConfigurationError("agent_move_budget must be >= 1")

    @classmethod
    def for_agent(cls, agent: str, gamma: float | None = None, **overrides) -> "VariantConfig":
        if agent not in _VARIANTS:
            raise ConfigurationError(f"unknown agent {agent!r}")
        policy, default_gamma = _VARIANTS[agent]
        return cls(agent=agent, rollout_policy=policy,
                   gamma=default_gamma if gamma is None else gamma, **overrides)

    @property
    def searches(self) -> bool:
        return self.agent != "policy-only"

    @property
    def learned(self) -> bool:
        return self.rollout_policy == "learned"

    def move_budget_for(self, level: LevelConfig) -> int:
        if self.agent_move_budget is not None:
            return self.agent_move_budget
        return level.move_budget if self.searches else policy_only_budget(level)


class ColorPopModel:
    """Search model over :class:`GameState`; rollouts run in compiled code."""

    def __init__(self, move_budget: int, weights: PolicyWeights | Uniform = UNIFORM):
        self.move_budget = move_budget
        self.learned = not isinstance(weights, Uniform)
        self._vec = weights.vector if self.learned else np.zeros(K.N_FEATURES)
        self._inv_t = 1.0 / weights.temperature if self.learned else 1.0

    def actions(self, state: GameState) -> list[Action]:
        cells, _ = legal_action_cells(state)
        w = state.config.width
        return [Action(c // w, c % w) for c in cells.tolist()]

    def step(self, state: GameState, action: Action) -> tuple[GameState, float]:
        out = transition(state, action.row * state.config.width + action.col, self.move_budget)
        return out.next_state, out.reward

    def terminal(self, state: GameState) -> bool:
        return state.status != Status.IN_PROGRESS

    def rollout(self, state: GameState, cap: int, gamma: float, rng: np.random.Generator) -> float:
        if state.status != Status.IN_PROGRESS:
            return 0.0
        cfg = state.config
        ret, *_ = K.simulate(
            state.flat, cfg.height, cfg.width, cfg.num_colors, cfg.goal_count,
            state.moves_used, state.goals_remaining, self.move_budget, np.uint64(state.rng_state),
            cap, gamma, self.learned, self._vec, self._inv_t,
            np.uint64(rng.integers(0, 2**63)),
        )
        return float(ret)


@dataclass(slots=True, eq=False)
class SearchNode:
    state: Any
    action: Any = None
    edge_reward: float = 0.0
    visits: int = 0
    value: float = 0.0
    children: dict = field(default_factory=dict)
    untried: list = field(default_factory=list)
    terminal: bool = False

    @property
    def mean(self) -> float:
        return self.value / self.visits

    def depth(self) -> int:
        if not self.children:
            return 0
        return 1 + max(ch.depth() for ch in self.children.values())

    def iter_nodes(self):
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children.values())


def make_node(model, state, action=None, edge_reward: float = 0.0) -> SearchNode:
    term = model.terminal(state)
    return SearchNode(state, action, edge_reward, untried=[] if term else list(model.actions(state)),
                      terminal=term)


@dataclass
class SearchTree:
    root: SearchNode
    config: VariantConfig
    rng: np.random.Generator
    model: Any
    max_depth: int = 0
    discarded: int = 0
    reused: int = 0

    @classmethod
    def fresh(cls, state, config: VariantConfig, rng: np.random.Generator, model) -> "SearchTree":
        return cls(make_node(model, state), config, rng, model)

    def advance(self, action, observed) -> None:
        """Re-root at ``action``'s child, keeping its statistics.

        If the observed next board differs from the cached child (the real
        refill differed from the one the search imagined) the subtree is
        dropped and a fresh root is built from ``observed``.
        """
        child = self.root.children.get(action)
        if child is not None and same_board(child.state, observed):
            child.action = None
            self.root = child
            self.reused += 1
        else:
            self.root = make_node(self.model, observed)
            self.discarded += 1


def same_board(a, b) -> bool:
    """Equality on everything an agent can observe (the refill stream excluded)."""
    if not isinstance(a, GameState):
        return a == b
    return (a.moves_used == b.moves_used and a.goals_remaining == b.goals_remaining
            and a.status == b.status and np.array_equal(a.flat, b.flat))


def uct_score(child: SearchNode, parent_visits: int, c: float) -> float:
    return child.value / child.visits + c * math.sqrt(math.log(parent_visits) / child.visits)


def best_uct_child(node: SearchNode, c: float) -> SearchNode:
    """Argmax of the UCT score over ``node``'s children; ties go to the smallest action."""
    log_n = math.log(node.visits)
    best, best_score = None, -math.inf
    for action, ch in node.children.items():
        s = ch.value / ch.visits + c * math.sqrt(log_n / ch.visits)
        if s > best_score or (s == best_score and action < best.action):
            best, best_score = ch, s
    return best


def select(tree: SearchTree) -> list[SearchNode]:
    node = tree.root
    path = [node]
    c = tree.config.c
    while not node.untried and node.children and not node.terminal:
        node = best_uct_child(node, c)
        path.append(node)
    return path


def expand(tree: SearchTree, node: SearchNode, rng: np.random.Generator | None = None) -> SearchNode:
    if node.terminal:
        raise ContractViolation("cannot expand a terminal node")
    if not node.untried:
        raise ContractViolation("node has no untried actions")
    rng = tree.rng if rng is None else rng
    action = node.untried.pop(int(rng.integers(len(node.untried))))
    state, reward = tree.model.step(node.state, action)
    child = make_node(tree.model, state, action, reward)
    node.children[action] = child
    return child


def discounted_return(rewards, gamma: float) -> float:
    total, disc = 0.0, 1.0
    for r in rewards:
        total += disc * r
        disc *= gamma
    return total


def rollout(state, config: VariantConfig, rng: np.random.Generator, model) -> float:
    """Discounted return of a capped rollout from ``state`` (0 for terminal states)."""
    if model.terminal(state):
        return 0.0
    return model.rollout(state, config.rollout_cap, config.gamma, rng)


def backpropagate(path: list[SearchNode], leaf_value: float, config: VariantConfig) -> None:
    """Walk leaf to root: N += 1, v = r + gamma * v_below, V += v."""
    gamma = config.gamma
    leaf = path[-1]
    leaf.visits += 1
    leaf.value += leaf_value
    v = leaf_value
    for node in reversed(path[:-1]):
        v = node.edge_reward + gamma * v
        node.visits += 1
        node.value += v


def run_iteration(tree: SearchTree) -> None:
    path = select(tree)
    leaf = path[-1]
    if not leaf.terminal and leaf.untried:
        leaf = expand(tree, leaf)
        path.append(leaf)
    tail = 0.0 if leaf.terminal else rollout(leaf.state, tree.config, tree.rng, tree.model)
    backpropagate(path, leaf.edge_reward + tree.config.gamma * tail, tree.config)
    if len(path) - 1 > tree.max_depth:
        tree.max_depth = len(path) - 1


def most_visited(node: SearchNode):
    best, best_n = None, -1
    for action, ch in node.children.items():
        if ch.visits > best_n or (ch.visits == best_n and action < best):
            best, best_n = action, ch.visits
    return best


def decide(tree: SearchTree):
    """Run ``config.budget`` search iterations and return the most visited root action."""
    if tree.root.terminal:
        raise ContractViolation("cannot decide from a terminal state")
    tree.max_depth = 0
    for _ in range(tree.config.budget):
        run_iteration(tree)
    return most_visited(tree.root)


def _record(level: LevelConfig, agent: str, seed: int, passed: bool, moves_used: int,
            goals_remaining: int, budget: int) -> RunRecord:
    return RunRecord(
        level_id=level.level_id,
        agent=agent,
        seed=int(seed),
        passed=bool(passed),
        moves_used=int(moves_used),
        moves_left=int(budget - moves_used) if passed else 0,
        goals_cleared_fraction=(level.goal_count - int(goals_remaining)) / level.goal_count,
        agent_budget=int(budget),
    )


def play_level(level: LevelConfig, config: VariantConfig, weights: PolicyWeights | None = None,
               seed: int = 0, *, clairvoyant: bool = False, trace: list | None = None) -> RunRecord:
    """Play one full level. Search agents commit one move per ``decide`` and reuse the subtree.

    The agent plans on the observed board with a private, imagined refill
    stream; the real game refills from its own hidden stream. Pass
    ``clairvoyant=True`` to let the search see the true stream instead.
    """
    if config.learned and weights is None:
        raise ConfigurationError(f"agent {config.agent!r} needs trained policy weights")
    budget = config.move_budget_for(level)
    if not config.searches:
        ep = play_episodes(level, weights, [seed], budget)
        return _record(level, config.agent, seed, ep.passed[0], ep.moves_used[0], ep.goals_remaining[0], budget)

    belief = np.random.default_rng(derive_seed(seed, _BELIEF_STREAM))

    def observe(s: GameState) -> GameState:
        if clairvoyant:
            return s
        return s.replace(rng_state=int(belief.integers(0, 2**64, dtype=np.uint64)))

    state = new_level(level, seed)
    model = ColorPopModel(budget, weights if config.learned else UNIFORM)
    tree = SearchTree.fresh(observe(state), config, np.random.default_rng(agent_seed(seed)), model)
    while state.status == Status.IN_PROGRESS:
        action = decide(tree)
        if trace is not None:
            trace.append(tree.max_depth)
        state = step(state, action, budget).next_state
        tree.advance(action, observe(state))
    return _record(level, config.agent, seed, state.status == Status.WON, state.moves_used,
                   state.goals_remaining, budget)
