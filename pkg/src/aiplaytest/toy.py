"""Small deterministic MDPs whose action sequences can be enumerated.

States are tuples of the actions taken so far. Each MDP doubles as a search
model for :mod:`aiplaytest.mcts` and provides a brute-force solver to check it
against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass
class TableMDP:
    """Finite-horizon tree MDP; ``rewards[prefix]`` is paid on reaching ``prefix``."""

    branching: tuple[int, ...]
    rewards: dict

    def actions(self, state: tuple) -> list[int]:
        if len(state) >= len(self.branching):
            return []
        return list(range(self.branching[len(state)]))

    def step(self, state: tuple, action: int) -> tuple[tuple, float]:
        nxt = state + (action,)
        return nxt, float(self.rewards.get(nxt, 0.0))

    def terminal(self, state: tuple) -> bool:
        return len(state) >= len(self.branching)

    def rollout(self, state: tuple, cap: int, gamma: float, rng: np.random.Generator) -> float:
        total, disc = 0.0, 1.0
        for _ in range(cap):
            if self.terminal(state):
                break
            state, r = self.step(state, int(rng.integers(self.branching[len(state)])))
            total += disc * r
            disc *= gamma
        return total

    def sequences(self):
        return itertools.product(*(range(b) for b in self.branching))

    def sequence_return(self, seq, gamma: float = 1.0) -> float:
        state, total, disc = (), 0.0, 1.0
        for a in seq:
            state, r = self.step(state, a)
            total += disc * r
            disc *= gamma
        return total

    def optimal_first_actions(self, gamma: float = 1.0) -> set[int]:
        """First actions of every return-maximising sequence, by enumeration."""
        best, firsts = -np.inf, set()
        for seq in self.sequences():
            v = self.sequence_return(seq, gamma)
            if v > best + 1e-12:
                best, firsts = v, {seq[0]}
            elif abs(v - best) <= 1e-12:
                firsts.add(seq[0])
        return firsts


def two_armed() -> TableMDP:
    return TableMDP((2,), {(0,): 1.0, (1,): 0.0})


def random_tree(branching=(10, 10), seed: int = 0) -> TableMDP:
    """Uniform [0, 1) reward on every edge."""
    rng = np.random.default_rng(seed)
    rewards = {}
    for depth in range(1, len(branching) + 1):
        for prefix in itertools.product(*(range(b) for b in branching[:depth])):
            rewards[prefix] = float(rng.random())
    return TableMDP(tuple(branching), rewards)


def delayed_reward(depth: int = 5) -> TableMDP:
    """Binary chain: action 0 pays 0.1 now, only the all-ones path pays 1.0 at the end."""
    rewards = {}
    for d in range(1, depth + 1):
        for prefix in itertools.product((0, 1), repeat=d):
            if prefix[-1] == 0:
                rewards[prefix] = 0.1
    rewards[(1,) * depth] = 1.0
    return TableMDP((2,) * depth, rewards)


def needle(branching=(4, 4, 4)) -> TableMDP:
    """Action 0 pays a safe 0.6 on every leaf; action 3 hides a single 1.0 leaf."""
    rewards = {}
    for seq in itertools.product(*(range(b) for b in branching)):
        if seq[0] == 0:
            rewards[seq] = 0.6
        elif seq == (3,) + tuple(b - 1 for b in branching[1:]):
            rewards[seq] = 1.0
    return TableMDP(tuple(branching), rewards)
