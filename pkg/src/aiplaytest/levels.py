"""Level packs: the built-in reference pack, a procedural generator and the pack file format.

Pack files are INI-style text, one section per level::

    # comment lines are allowed
    [E1]
    level_id = 1
    width = 6
    height = 6
    num_colors = 3
    goal_count = 40
    move_budget = 12
    refill_seed_salt = 1001

The section name becomes the level's display name. Every key above is
required and no other key is accepted.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .env import LevelConfig
from .errors import ConfigurationError
from .seeding import derive_seed

PACK_KEYS = tuple(f.name for f in fields(LevelConfig) if f.name != "name")

# (name, width, height, colours, goal, moves); later rows are harder.
_REFERENCE = [
    ("E1", 6, 6, 3, 40, 12),
    ("E2", 7, 7, 4, 45, 14),
    ("E3", 8, 8, 4, 60, 15),
    ("E4", 7, 7, 5, 60, 15),
    ("E5", 8, 8, 5, 70, 15),
    ("H1", 8, 8, 6, 55, 14),
    ("H2", 9, 9, 5, 90, 17),
    ("H3", 8, 8, 5, 80, 16),
    ("H4", 10, 10, 6, 80, 18),
    ("H5", 9, 9, 6, 70, 16),
]
HARDEST = ("H1", "H2", "H3", "H4", "H5")


def reference_pack() -> list[LevelConfig]:
    """Ten hand-tuned levels, easy (E1) to very hard (H1-H5)."""
    return [
        LevelConfig(i + 1, w, h, c, g, m, refill_seed_salt=1000 + i + 1, name=name)
        for i, (name, w, h, c, g, m) in enumerate(_REFERENCE)
    ]


def by_name(levels: Iterable[LevelConfig], names: Sequence[str]) -> list[LevelConfig]:
    index = {lv.name: lv for lv in levels}
    return [index[n] for n in names]


# Typical tiles popped per move by the search agents at 1x budget, per colour count.
_TILES_PER_MOVE = {3: 9.0, 4: 6.5, 5: 5.0, 6: 4.2}


def generate_pack(n: int, seed: int = 0, first_id: int = 1) -> list[LevelConfig]:
    """``n`` random levels whose goal-per-move demand spans easy to out-of-reach.

    The demand is drawn relative to what a searching agent typically clears per
    move on a board of that size and palette. It ranges from about a third of
    that rate, easy for every agent, to twice that rate, where only the policy
    agent with its larger move allowance gets through.
    """
    rng = np.random.default_rng(derive_seed(seed, 0x1E7E15))
    out = []
    for i in range(n):
        colors = int(rng.integers(3, 7))
        size = int(rng.integers(6, 10))
        moves = int(rng.integers(10, 21))
        demand = float(np.exp(rng.uniform(np.log(0.35), np.log(2.0))))
        rate = _TILES_PER_MOVE[colors] * np.sqrt(size / 8.0)
        goal = max(2, int(round(demand * rate * moves)))
        goal = min(goal, 10 * size * size)
        lid = first_id + i
        out.append(LevelConfig(lid, size, size, colors, goal, moves,
                               refill_seed_salt=derive_seed(seed, lid) >> 1, name=f"L{lid}"))
    return out


def dumps_pack(levels: Sequence[LevelConfig], header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        for line in header.splitlines():
            buf.write(f"# {line}\n")
    for lv in levels:
        buf.write(f"[{lv.name or f'level{lv.level_id}'}]\n")
        for key in PACK_KEYS:
            buf.write(f"{key} = {getattr(lv, key)}\n")
        buf.write("\n")
    return buf.getvalue()


def write_pack(path, levels: Sequence[LevelConfig], header: str | None = None) -> None:
    Path(path).write_text(dumps_pack(levels, header))


def loads_pack(text: str) -> list[LevelConfig]:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                       inline_comment_prefixes=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"level pack: {exc}".splitlines()[0]) from exc
    levels = []
    for section in parser.sections():
        items = dict(parser.items(section))
        unknown = sorted(set(items) - set(PACK_KEYS))
        missing = sorted(set(PACK_KEYS) - set(items))
        if unknown:
            raise ConfigurationError(f"level pack [{section}]: unknown keys {unknown}")
        if missing:
            raise ConfigurationError(f"level pack [{section}]: missing keys {missing}")
        try:
            values = {k: int(v) for k, v in items.items()}
        except ValueError as exc:
            raise ConfigurationError(f"level pack [{section}]: {exc}") from exc
        levels.append(LevelConfig(name=section, **values))
    ids = [lv.level_id for lv in levels]
    if len(set(ids)) != len(ids):
        raise ConfigurationError("level pack: duplicate level_id")
    if not levels:
        raise ConfigurationError("level pack is empty")
    return levels


def read_pack(path) -> list[LevelConfig]:
    return loads_pack(Path(path).read_text())
