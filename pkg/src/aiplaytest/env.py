"""ColorPop: a seeded pop-connected-groups puzzle with gravity and refill.

A move pops a connected group of two or more same-coloured tiles. Tiles above
fall down, the emptied cells are refilled from the state's own random stream
(uniform colours, column-major order), and every popped tile counts towards the
level goal. The level is won when the goal reaches zero and lost when the move
budget runs out first. If a board has no legal move while the level is still in
progress, the whole board is redrawn at no move cost.

Because the refill stream is part of :class:`GameState`, ``step`` is a pure
function: the same state and action always give the same outcome.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .errors import ConfigurationError, ContractViolation
from .seeding import derive_seed

REWARD_MOVE = K.R_MOVE
REWARD_GOAL = K.R_GOAL
REWARD_WIN = K.R_WIN
REWARD_LOSE = K.R_LOSE


class Status(enum.IntEnum):
    IN_PROGRESS = K.IN_PROGRESS
    WON = K.WON
    LOST = K.LOST


@dataclass(frozen=True)
class LevelConfig:
    level_id: int
    width: int
    height: int
    num_colors: int
    goal_count: int
    move_budget: int
    refill_seed_salt: int = 0
    name: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        problems = []
        if self.level_id < 1:
            problems.append(f"level_id={self.level_id} must be >= 1")
        for key in ("width", "height"):
            v = getattr(self, key)
            if not 4 <= v <= 16:
                problems.append(f"{key}={v} outside [4, 16]")
        if not 2 <= self.num_colors <= 8:
            problems.append(f"num_colors={self.num_colors} outside [2, 8]")
        if self.goal_count < 1:
            problems.append(f"goal_count={self.goal_count} must be >= 1")
        elif self.goal_count > 10 * self.width * self.height:
            problems.append(f"goal_count={self.goal_count} exceeds 10 * cells")
        if self.move_budget < 1:
            problems.append(f"move_budget={self.move_budget} must be >= 1")
        if not 0 <= self.refill_seed_salt < 2**64:
            problems.append("refill_seed_salt must be a 64-bit unsigned integer")
        if problems:
            raise ConfigurationError(f"level {self.level_id}: " + "; ".join(problems))

    @property
    def cells(self) -> int:
        return self.width * self.height


class Action(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True, eq=False)
class GameState:
    """Immutable game state. ``grid`` is a read-only (height, width) int8 array."""

    config: LevelConfig
    grid: np.ndarray
    moves_used: int
    goals_remaining: int
    rng_state: int
    status: Status = Status.IN_PROGRESS
    _flat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        flat = np.ascontiguousarray(self.grid, dtype=np.int8).reshape(-1)
        flat.flags.writeable = False
        object.__setattr__(self, "_flat", flat)
        object.__setattr__(self, "grid", flat.reshape(self.config.height, self.config.width))

    @property
    def flat(self) -> np.ndarray:
        return self._flat

    def __eq__(self, other):
        if not isinstance(other, GameState):
            return NotImplemented
        return (
            self.config == other.config
            and self.moves_used == other.moves_used
            and self.goals_remaining == other.goals_remaining
            and self.rng_state == other.rng_state
            and self.status == other.status
            and np.array_equal(self._flat, other._flat)
        )

    __hash__ = None

    def replace(self, **changes) -> "GameState":
        values = dict(
            config=self.config,
            grid=self.grid,
            moves_used=self.moves_used,
            goals_remaining=self.goals_remaining,
            rng_state=self.rng_state,
            status=self.status,
        )
        values.update(changes)
        return GameState(**values)


@dataclass(frozen=True)
class StepEvents:
    tiles_cleared: int
    goals_cleared: int
    won: bool
    lost: bool


@dataclass(frozen=True)
class StepOutcome:
    next_state: GameState
    reward: float
    events: StepEvents


def reward_for(events: StepEvents) -> float:
    """Reward table: a per-move cost, a bonus per goal tile, and win/lose terms."""
    r = REWARD_MOVE + REWARD_GOAL * events.goals_cleared
    if events.won:
        r += REWARD_WIN
    if events.lost:
        r += REWARD_LOSE
    return r


def new_level(config: LevelConfig, seed: int) -> GameState:
    config.validate()
    rng = np.uint64(derive_seed(seed, config.refill_seed_salt, config.level_id))
    flat = np.empty(config.cells, np.int8)
    rng = K.fill_live(flat, config.height, config.width, config.num_colors, rng)
    return GameState(config, flat, 0, config.goal_count, int(rng))


def legal_action_cells(state: GameState) -> tuple[np.ndarray, np.ndarray]:
    """Representative cells and group sizes of all legal moves (fast path)."""
    if state.status != Status.IN_PROGRESS:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    n = state.config.cells
    cells = np.empty(n, np.int64)
    sizes = np.empty(n, np.int64)
    k = K.legal_moves(state.flat, state.config.height, state.config.width, cells, sizes)
    return cells[:k], sizes[:k]


def legal_actions(state: GameState) -> list[Action]:
    """One action per group of size >= 2, at its smallest (row, col), sorted."""
    cells, _ = legal_action_cells(state)
    w = state.config.width
    return [Action(int(c) // w, int(c) % w) for c in cells]


def group_size(state: GameState, action: Action) -> int:
    cfg = state.config
    if not (0 <= action.row < cfg.height and 0 <= action.col < cfg.width):
        return 0
    return int(K.group_size_at(state.flat, cfg.height, cfg.width, action.row * cfg.width + action.col))


def _check_legal(state: GameState, action: Action) -> None:
    if state.status != Status.IN_PROGRESS:
        raise ContractViolation(f"state is terminal ({state.status.name})")
    cfg = state.config
    cells, _ = legal_action_cells(state)
    cell = action.row * cfg.width + action.col
    if not (0 <= action.row < cfg.height and 0 <= action.col < cfg.width) or cell not in cells:
        raise ContractViolation(f"illegal action {tuple(action)}")


def step(state: GameState, action: Action, move_budget: int) -> StepOutcome:
    _check_legal(state, action)
    if state.moves_used >= move_budget:
        raise ContractViolation("move budget already exhausted")
    return transition(state, action.row * state.config.width + action.col, move_budget)


def transition(state: GameState, cell: int, move_budget: int) -> StepOutcome:
    """``step`` without the legality check; ``cell`` must start a legal group."""
    cfg = state.config
    grid = state.flat.copy()
    moves, goals, status, reward, rng, cleared, goals_cleared = K.step_inplace(
        grid, cfg.height, cfg.width, cfg.num_colors, cell,
        state.moves_used, state.goals_remaining, move_budget, np.uint64(state.rng_state),
    )
    status = Status(status)
    nxt = GameState(cfg, grid, int(moves), int(goals), int(rng), status)
    events = StepEvents(int(cleared), int(goals_cleared), status == Status.WON, status == Status.LOST)
    return StepOutcome(nxt, float(reward), events)


def is_terminal(state: GameState, move_budget: int | None = None) -> Status:
    """Status implied by the state; ``move_budget`` enables the out-of-moves check."""
    if state.goals_remaining == 0:
        return Status.WON
    if move_budget is not None and state.moves_used >= move_budget:
        return Status.LOST
    return state.status


def from_grid(config: LevelConfig, grid, *, goals_remaining: int | None = None,
              moves_used: int = 0, rng_state: int = 0) -> GameState:
    """Build a state from an explicit colour grid (tests and worked examples)."""
    arr = np.asarray(grid, dtype=np.int8)
    if arr.shape != (config.height, config.width):
        raise ConfigurationError(f"grid shape {arr.shape} != {(config.height, config.width)}")
    if arr.min() < 0 or arr.max() >= config.num_colors:
        raise ConfigurationError("grid colours out of range")
    goals = config.goal_count if goals_remaining is None else goals_remaining
    status = Status.WON if goals == 0 else Status.IN_PROGRESS
    return GameState(config, arr, moves_used, goals, rng_state, status)


def reshuffle_if_dead(state: GameState) -> GameState:
    """Redraw the whole board from the state's stream if no move is possible; costs no move."""
    cfg = state.config
    if state.status != Status.IN_PROGRESS or K.has_group(state.flat, cfg.height, cfg.width):
        return state
    grid = np.empty(cfg.cells, np.int8)
    rng = K.fill_live(grid, cfg.height, cfg.width, cfg.num_colors, np.uint64(state.rng_state))
    return state.replace(grid=grid, rng_state=int(rng))
