"""Compiled ColorPop dynamics.

Grids are flat int8 arrays in row-major order (cell = row * width + col),
row 0 is the top, gravity pulls towards the last row and -1 marks an empty
cell. All randomness comes from splitmix64 streams passed in and returned as
uint64 values, so every kernel is a pure function of its arguments.
"""

import numba as nb
import numpy as np

IN_PROGRESS = 0
WON = 1
LOST = 2

R_MOVE = -0.01
R_GOAL = 0.1
R_WIN = 1.0
R_LOSE = -1.0

N_FEATURES = 4

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S11 = np.uint64(11)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_S32 = np.uint64(32)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(cache=True)
def splitmix_next(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    z = z ^ (z >> _S31)
    return state, z


@nb.njit(cache=True)
def rand_below(state, n):
    state, z = splitmix_next(state)
    return state, np.int64(((z >> _S32) * np.uint64(n)) >> _S32)


@nb.njit(cache=True)
def rand_uniform(state):
    state, z = splitmix_next(state)
    return state, np.float64(z >> _S11) * _INV53


@nb.njit(cache=True)
def find_groups(grid, h, w, labels, stack, reps, sizes):
    """Label connected same-colour components; returns the component count.

    Components are discovered in row-major order, so ``reps[g]`` is the
    lexicographically smallest cell of component ``g`` and ``reps`` is sorted.
    """
    n = h * w
    for i in range(n):
        labels[i] = -1
    ng = 0
    for start in range(n):
        if labels[start] != -1 or grid[start] < 0:
            continue
        color = grid[start]
        labels[start] = ng
        stack[0] = start
        top = 1
        size = 0
        while top > 0:
            top -= 1
            c = stack[top]
            size += 1
            r = c // w
            col = c - r * w
            if r > 0:
                o = c - w
                if labels[o] == -1 and grid[o] == color:
                    labels[o] = ng
                    stack[top] = o
                    top += 1
            if r < h - 1:
                o = c + w
                if labels[o] == -1 and grid[o] == color:
                    labels[o] = ng
                    stack[top] = o
                    top += 1
            if col > 0:
                o = c - 1
                if labels[o] == -1 and grid[o] == color:
                    labels[o] = ng
                    stack[top] = o
                    top += 1
            if col < w - 1:
                o = c + 1
                if labels[o] == -1 and grid[o] == color:
                    labels[o] = ng
                    stack[top] = o
                    top += 1
        reps[ng] = start
        sizes[ng] = size
        ng += 1
    return ng


@nb.njit(cache=True)
def legal_moves(grid, h, w, out_cells, out_sizes):
    """Write (representative cell, group size) of every group of size >= 2."""
    n = h * w
    labels = np.empty(n, np.int32)
    stack = np.empty(n, np.int64)
    reps = np.empty(n, np.int64)
    sizes = np.empty(n, np.int64)
    ng = find_groups(grid, h, w, labels, stack, reps, sizes)
    k = 0
    for g in range(ng):
        if sizes[g] >= 2:
            out_cells[k] = reps[g]
            out_sizes[k] = sizes[g]
            k += 1
    return k


@nb.njit(cache=True)
def group_size_at(grid, h, w, cell):
    n = h * w
    if grid[cell] < 0:
        return 0
    seen = np.zeros(n, np.bool_)
    stack = np.empty(n, np.int64)
    color = grid[cell]
    seen[cell] = True
    stack[0] = cell
    top = 1
    size = 0
    while top > 0:
        top -= 1
        c = stack[top]
        size += 1
        r = c // w
        col = c - r * w
        if r > 0 and not seen[c - w] and grid[c - w] == color:
            seen[c - w] = True
            stack[top] = c - w
            top += 1
        if r < h - 1 and not seen[c + w] and grid[c + w] == color:
            seen[c + w] = True
            stack[top] = c + w
            top += 1
        if col > 0 and not seen[c - 1] and grid[c - 1] == color:
            seen[c - 1] = True
            stack[top] = c - 1
            top += 1
        if col < w - 1 and not seen[c + 1] and grid[c + 1] == color:
            seen[c + 1] = True
            stack[top] = c + 1
            top += 1
    return size


@nb.njit(cache=True)
def has_group(grid, h, w):
    for r in range(h):
        for c in range(w):
            v = grid[r * w + c]
            if v < 0:
                continue
            if c + 1 < w and grid[r * w + c + 1] == v:
                return True
            if r + 1 < h and grid[(r + 1) * w + c] == v:
                return True
    return False


@nb.njit(cache=True)
def fill_all(grid, h, w, ncolors, rng):
    # column-major, top to bottom
    for col in range(w):
        for r in range(h):
            rng, k = rand_below(rng, ncolors)
            grid[r * w + col] = k
    return rng


@nb.njit(cache=True)
def fill_live(grid, h, w, ncolors, rng):
    """Fill every cell, redrawing the whole board until a legal move exists."""
    rng = fill_all(grid, h, w, ncolors, rng)
    while not has_group(grid, h, w):
        rng = fill_all(grid, h, w, ncolors, rng)
    return rng


@nb.njit(cache=True)
def pop_group(grid, h, w, ncolors, cell, rng):
    """Remove the group at ``cell``, apply gravity and refill. Returns (cleared, rng)."""
    n = h * w
    color = grid[cell]
    stack = np.empty(n, np.int64)
    grid[cell] = -1
    stack[0] = cell
    top = 1
    cleared = 0
    while top > 0:
        top -= 1
        c = stack[top]
        cleared += 1
        r = c // w
        col = c - r * w
        if r > 0 and grid[c - w] == color:
            grid[c - w] = -1
            stack[top] = c - w
            top += 1
        if r < h - 1 and grid[c + w] == color:
            grid[c + w] = -1
            stack[top] = c + w
            top += 1
        if col > 0 and grid[c - 1] == color:
            grid[c - 1] = -1
            stack[top] = c - 1
            top += 1
        if col < w - 1 and grid[c + 1] == color:
            grid[c + 1] = -1
            stack[top] = c + 1
            top += 1
    for col in range(w):
        write = h - 1
        for r in range(h - 1, -1, -1):
            v = grid[r * w + col]
            if v >= 0:
                grid[write * w + col] = v
                write -= 1
        for r in range(write, -1, -1):
            grid[r * w + col] = -1
    for col in range(w):
        for r in range(h):
            if grid[r * w + col] < 0:
                rng, k = rand_below(rng, ncolors)
                grid[r * w + col] = k
    return cleared, rng


@nb.njit(cache=True)
def step_inplace(grid, h, w, ncolors, cell, moves_used, goals_remaining, budget, rng):
    """One move. Mutates ``grid``.

    Returns (moves_used, goals_remaining, status, reward, rng, tiles_cleared,
    goals_cleared).
    """
    cleared, rng = pop_group(grid, h, w, ncolors, cell, rng)
    goals_cleared = min(cleared, goals_remaining)
    goals_remaining -= goals_cleared
    moves_used += 1
    reward = R_MOVE + R_GOAL * goals_cleared
    if goals_remaining == 0:
        status = WON
        reward += R_WIN
    elif moves_used >= budget:
        status = LOST
        reward += R_LOSE
    else:
        status = IN_PROGRESS
        while not has_group(grid, h, w):
            rng = fill_all(grid, h, w, ncolors, rng)
    return moves_used, goals_remaining, status, reward, rng, cleared, goals_cleared


@nb.njit(cache=True)
def action_logits(sizes, k, ncells, goals_remaining, goal_count, weights, inv_temp, out):
    g = max(goals_remaining, 1)
    progress = (goal_count - goals_remaining) / goal_count
    for i in range(k):
        s = sizes[i]
        f0 = s / ncells
        f1 = min(s, goals_remaining) / g
        f2 = 1.0 if s >= goals_remaining else 0.0
        out[i] = (weights[0] * f0 + weights[1] * f1 + weights[2] * f2 + weights[3] * progress) * inv_temp


@nb.njit(cache=True)
def softmax_inplace(logits, k):
    m = logits[0]
    for i in range(1, k):
        if logits[i] > m:
            m = logits[i]
    total = 0.0
    for i in range(k):
        logits[i] = np.exp(logits[i] - m)
        total += logits[i]
    for i in range(k):
        logits[i] /= total


@nb.njit(cache=True)
def pick_index(sizes, k, ncells, goals_remaining, goal_count, learned, weights, inv_temp, u, scratch):
    """Map a uniform draw ``u`` to an action index (uniform or softmax policy)."""
    if not learned:
        i = np.int64(u * k)
        return min(i, k - 1)
    action_logits(sizes, k, ncells, goals_remaining, goal_count, weights, inv_temp, scratch)
    softmax_inplace(scratch, k)
    acc = 0.0
    for i in range(k):
        acc += scratch[i]
        if u < acc:
            return i
    return k - 1


@nb.njit(cache=True)
def simulate(grid0, h, w, ncolors, goal_count, moves_used, goals_remaining, budget,
             env_rng, cap, gamma, learned, weights, inv_temp, agent_rng):
    """Play up to ``cap`` moves from a non-terminal state.

    Returns (discounted_return, moves_used, goals_remaining, status, agent_rng).
    """
    n = h * w
    grid = grid0.copy()
    labels = np.empty(n, np.int32)
    stack = np.empty(n, np.int64)
    reps = np.empty(n, np.int64)
    sizes = np.empty(n, np.int64)
    cells = np.empty(n, np.int64)
    gsizes = np.empty(n, np.int64)
    scratch = np.empty(n, np.float64)
    ret = 0.0
    disc = 1.0
    status = IN_PROGRESS
    t = 0
    while t < cap:
        ng = find_groups(grid, h, w, labels, stack, reps, sizes)
        k = 0
        for g in range(ng):
            if sizes[g] >= 2:
                cells[k] = reps[g]
                gsizes[k] = sizes[g]
                k += 1
        agent_rng, u = rand_uniform(agent_rng)
        i = pick_index(gsizes, k, n, goals_remaining, goal_count, learned, weights, inv_temp, u, scratch)
        moves_used, goals_remaining, status, reward, env_rng, _, _ = step_inplace(
            grid, h, w, ncolors, cells[i], moves_used, goals_remaining, budget, env_rng
        )
        ret += disc * reward
        disc *= gamma
        t += 1
        if status != IN_PROGRESS:
            break
    return ret, moves_used, goals_remaining, status, agent_rng


@nb.njit(cache=True)
def batch_episodes(grids, h, w, ncolors, goal_count, budget, env_rngs, learned, weights,
                   inv_temp, agent_rngs, out_return, out_moves, out_goals, out_status):
    """Full episodes from fresh boards, one per row of ``grids``."""
    for e in range(grids.shape[0]):
        ret, mu, gr, st, _ = simulate(
            grids[e], h, w, ncolors, goal_count, 0, goal_count, budget, env_rngs[e],
            budget, 1.0, learned, weights, inv_temp, agent_rngs[e],
        )
        out_return[e] = ret
        out_moves[e] = mu
        out_goals[e] = gr
        out_status[e] = st
