"""Independent slow reference implementations used only by the tests."""

import math
from collections import deque

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix(state):
    state = (state + GOLDEN) & MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return state, z ^ (z >> 31)


def below(state, n):
    state, z = splitmix(state)
    return state, ((z >> 32) * n) >> 32


def flood_groups(grid):
    """All 4-connected same-colour groups as sorted lists of (row, col)."""
    grid = np.asarray(grid)
    h, w = grid.shape
    seen = np.zeros_like(grid, dtype=bool)
    groups = []
    for r in range(h):
        for c in range(w):
            if seen[r, c]:
                continue
            color = grid[r, c]
            q = deque([(r, c)])
            seen[r, c] = True
            cells = []
            while q:
                y, x = q.popleft()
                cells.append((y, x))
                for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    yy, xx = y + dy, x + dx
                    if 0 <= yy < h and 0 <= xx < w and not seen[yy, xx] and grid[yy, xx] == color:
                        seen[yy, xx] = True
                        q.append((yy, xx))
            groups.append(sorted(cells))
    return groups


def legal_cells(grid):
    return sorted(g[0] for g in flood_groups(grid) if len(g) >= 2)


def pop_oracle(grid, cell, ncolors, rng):
    """Remove the group at ``cell``, let tiles fall, refill column by column from the top."""
    grid = [list(row) for row in np.asarray(grid)]
    h, w = len(grid), len(grid[0])
    group = next(g for g in flood_groups(grid) if tuple(cell) in g)
    for y, x in group:
        grid[y][x] = None
    for x in range(w):
        col = [grid[y][x] for y in range(h) if grid[y][x] is not None]
        col = [None] * (h - len(col)) + col
        for y in range(h):
            grid[y][x] = col[y]
    for x in range(w):
        for y in range(h):
            if grid[y][x] is None:
                rng, k = below(rng, ncolors)
                grid[y][x] = k
    return np.array(grid), len(group), rng


def average_ranks(x):
    """Ranks by counting: rank = (#less) + (#equal + 1) / 2."""
    x = list(x)
    return [sum(v < xi for v in x) + (sum(v == xi for v in x) + 1) / 2 for xi in x]


def pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def spearman(x, y):
    return pearson(average_ranks(x), average_ranks(y))


def gauss_jordan_solve(a, b):
    """Solve a x = b (square a, b may have several columns) by Gauss-Jordan with partial pivoting."""
    a = [list(map(float, row)) for row in a]
    b = [list(map(float, row)) for row in b]
    n = len(a)
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(a[r][col]))
        a[col], a[piv] = a[piv], a[col]
        b[col], b[piv] = b[piv], b[col]
        p = a[col][col]
        a[col] = [v / p for v in a[col]]
        b[col] = [v / p for v in b[col]]
        for r in range(n):
            if r != col and a[r][col] != 0.0:
                f = a[r][col]
                a[r] = [v - f * u for v, u in zip(a[r], a[col])]
                b[r] = [v - f * u for v, u in zip(b[r], b[col])]
    return np.array(b)


def normal_equations(x, y):
    """Intercept-augmented OLS: returns (weights, intercepts)."""
    x = np.asarray(x, float)
    design = np.hstack([np.ones((len(x), 1)), x])
    beta = gauss_jordan_solve(design.T @ design, design.T @ np.asarray(y, float))
    return beta[1:], beta[0]


def tree_value(node, gamma):
    """Recursive backup oracle for fixed rollouts.

    ``node`` is a dict {"r": edge reward, "leaf": rollout value or None, "kids": [...]}
    where every root-to-leaf path is backpropagated once per leaf. Returns the
    total V accumulated at ``node`` and the list of per-leaf returns seen there.
    """
    if not node["kids"]:
        v = node["leaf"]
        return v, [v]
    seen = []
    for kid in node["kids"]:
        _, below_vals = tree_value(kid, gamma)
        seen.extend(node["r"] + gamma * v for v in below_vals)
    return sum(seen), seen


def uniform01(state):
    state, z = splitmix(state)
    return state, (z >> 11) / 9007199254740992.0


def population_walk(difficulty, skill, persistence, boredom, slope, max_attempts, base_seed):
    """Plain-Python replay of every player's trajectory with the same random stream.

    Returns per-level (entering, attempted, churned, capped, credit) lists.
    """
    n_levels = len(difficulty)
    entering = [0] * n_levels
    attempted = [0] * n_levels
    churned = [0] * n_levels
    capped = [0] * n_levels
    credit = [0.0] * n_levels
    for i in range(len(skill)):
        _, rng = splitmix((base_seed + i * GOLDEN) & MASK)
        for lv in range(n_levels):
            entering[lv] += 1
            rng, u = uniform01(rng)
            if u < boredom[i]:
                churned[lv] += 1
                break
            attempted[lv] += 1
            q = 1.0 / (1.0 + math.exp(-slope * (skill[i] - difficulty[lv])))
            outcome = None
            for tries in range(1, max_attempts + 1):
                rng, u = uniform01(rng)
                if u < q:
                    credit[lv] += 1.0 / tries
                    outcome = "pass"
                    break
                rng, u = uniform01(rng)
                if u >= persistence[i]:
                    outcome = "quit"
                    break
            if outcome is None:
                capped[lv] += 1
            if outcome == "quit":
                churned[lv] += 1
                break
    return entering, attempted, churned, capped, credit
