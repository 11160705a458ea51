import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aiplaytest import mcts, toy
from aiplaytest.env import LevelConfig, Status, from_grid, legal_actions, new_level
from aiplaytest.errors import ConfigurationError, ContractViolation
from aiplaytest.mcts import (ColorPopModel, SearchNode, SearchTree, VariantConfig, backpropagate,
                             best_uct_child, decide, expand, play_level, rollout, select, uct_score)
from aiplaytest.policy import PolicyWeights

import oracles

VARIANTS = ("vanilla", "policy", "myopic", "policy-myopic")
WEIGHTS = PolicyWeights((10.0, 5.0, 10.0, 0.0))


def node(v, n, action=None):
    return SearchNode(state=None, action=action, visits=n, value=v)


def worked_parent():
    parent = node(0.0, 10)
    parent.children = {"A": node(3.0, 5, "A"), "B": node(1.0, 2, "B")}
    return parent


def test_uct_worked_example():
    parent = worked_parent()
    a, b = parent.children["A"], parent.children["B"]
    assert round(uct_score(a, 10, math.sqrt(2)), 4) == 1.5597
    assert round(uct_score(b, 10, math.sqrt(2)), 4) == 2.0174
    assert abs(uct_score(a, 10, math.sqrt(2)) - (0.6 + math.sqrt(2 * math.log(10) / 5))) <= 1e-12
    assert abs(uct_score(b, 10, math.sqrt(2)) - (0.5 + math.sqrt(2 * math.log(10) / 2))) <= 1e-12
    assert best_uct_child(parent, math.sqrt(2)) is b


def test_uct_pure_exploitation():
    parent = worked_parent()
    assert best_uct_child(parent, 0.0) is parent.children["A"]


def test_uct_ties_go_to_smallest_action():
    parent = node(0.0, 6)
    parent.children = {a: node(1.0, 2, a) for a in (3, 1, 2)}
    assert best_uct_child(parent, 1.0).action == 1


def test_selection_stops_at_node_with_untried_actions():
    model = toy.random_tree((3, 3), seed=1)
    tree = SearchTree.fresh((), VariantConfig(budget=1), np.random.default_rng(0), model)
    child = expand(tree, tree.root)
    backpropagate([tree.root, child], 100.0, tree.config)
    assert tree.root.untried
    assert select(tree) == [tree.root]


def test_expand_bookkeeping_and_determinism():
    model = toy.random_tree((3, 2), seed=4)
    trees = [SearchTree.fresh((), VariantConfig(), np.random.default_rng(7), model) for _ in range(2)]
    kids = [expand(t, t.root) for t in trees]
    for t, kid in zip(trees, kids):
        assert len(t.root.untried) == 2 and len(t.root.children) == 1
        assert kid.visits == 0 and kid.value == 0.0
        assert kid.edge_reward == model.rewards[kid.state]
        assert set(t.root.untried) | set(t.root.children) == set(model.actions(()))
    assert kids[0].state == kids[1].state


def test_expand_terminal_raises():
    model = toy.two_armed()
    tree = SearchTree.fresh((), VariantConfig(), np.random.default_rng(0), model)
    kid = expand(tree, tree.root)
    assert kid.terminal
    with pytest.raises(ContractViolation):
        expand(tree, kid)


def chain(rewards):
    model = toy.TableMDP((1,) * len(rewards), {})
    prefix = ()
    for r in rewards:
        prefix += (0,)
        model.rewards[prefix] = r
    return model


def test_rollout_discounted_sum():
    rng = np.random.default_rng(0)
    assert abs(rollout((), VariantConfig(gamma=0.9), rng, chain((1.0, 0.0, 2.0))) - 2.62) <= 1e-12
    assert rollout((), VariantConfig(gamma=1.0), rng, chain((1.0, 1.0, 1.0))) == 3.0
    assert rollout((0, 0, 0), VariantConfig(gamma=0.9), rng, chain((1.0, 0.0, 2.0))) == 0.0


def test_rollout_respects_cap():
    rng = np.random.default_rng(0)
    model = chain((1.0,) * 20)
    assert rollout((), VariantConfig(gamma=1.0, rollout_cap=10), rng, model) == 10.0


def test_colorpop_rollout_on_terminal_state_is_zero():
    cfg = LevelConfig(1, 4, 4, 2, 5, 5)
    won = from_grid(cfg, np.zeros((4, 4), int), goals_remaining=0)
    assert rollout(won, VariantConfig(), np.random.default_rng(0), ColorPopModel(5)) == 0.0


def test_backprop_examples():
    cfg = VariantConfig(gamma=0.9)
    parent, leaf = SearchNode(None, edge_reward=1.0), SearchNode(None)
    backpropagate([parent, leaf], 2.0, cfg)
    assert abs(parent.value - 2.8) <= 1e-12 and parent.visits == 1
    assert leaf.value == 2.0 and leaf.visits == 1

    path = [SearchNode(None) for _ in range(4)]
    backpropagate(path, 5.0, VariantConfig(gamma=1.0))
    assert all(n.value == 5.0 for n in path)

    before = path[0].visits
    backpropagate(path, 1.0, VariantConfig(gamma=1.0))
    backpropagate(path[:2], 1.0, VariantConfig(gamma=1.0))
    assert path[0].visits == before + 2


def spec_tree(draw_float):
    """Random 3-level tree as an oracle dict (root, children, grandchildren)."""
    def leaf():
        return {"r": draw_float(), "leaf": draw_float(), "kids": []}

    def mid():
        k = int(abs(draw_float() * 7)) % 3 + 1
        return {"r": draw_float(), "leaf": None, "kids": [leaf() for _ in range(k)]}

    return {"r": 0.0, "leaf": None, "kids": [mid() for _ in range(3)]}


def to_nodes(d):
    n = SearchNode(None, edge_reward=d["r"])
    n.children = {i: to_nodes(k) for i, k in enumerate(d["kids"])}
    return n


def leaf_paths(d, n, prefix=()):
    prefix = prefix + ((d, n),)
    if not d["kids"]:
        yield prefix
    for i, k in enumerate(d["kids"]):
        yield from leaf_paths(k, n.children[i], prefix)


@settings(max_examples=200)
@given(st.lists(st.floats(-5, 5), min_size=40, max_size=40), st.sampled_from([1.0, 0.9, 0.5]))
def test_backprop_matches_recursive_oracle(values, gamma):
    it = iter(values * 3)
    d = spec_tree(lambda: next(it))
    root = to_nodes(d)
    for path in leaf_paths(d, root):
        backpropagate([n for _, n in path], path[-1][0]["leaf"], VariantConfig(gamma=gamma))

    def check(dd, nn):
        expected, seen = oracles.tree_value(dd, gamma)
        assert abs(nn.value - expected) <= 1e-12
        assert nn.visits == len(seen)
        for i, k in enumerate(dd["kids"]):
            check(k, nn.children[i])

    check(d, root)


def assert_visit_invariant(tree, fresh_root):
    root = tree.root
    total = sum(ch.visits for ch in root.children.values())
    assert root.visits == (total if fresh_root else total + 1)
    for n in root.iter_nodes():
        if n is not root and n.children:
            assert n.visits == 1 + sum(ch.visits for ch in n.children.values())
        assert set(n.untried).isdisjoint(n.children)
        if n.state is not None and not n.terminal:
            assert set(n.untried) | set(n.children) == set(tree.model.actions(n.state))


def test_visit_invariant_after_every_decide():
    rng = np.random.default_rng(2024)
    for i in range(1000):
        branching = tuple(int(b) for b in rng.integers(1, 5, size=int(rng.integers(1, 5))))
        model = toy.random_tree(branching, seed=i)
        cfg = VariantConfig(budget=int(rng.integers(1, 60)), gamma=float(rng.choice([1.0, 0.9])))
        tree = SearchTree.fresh((), cfg, np.random.default_rng(i), model)
        decide(tree)
        assert tree.root.visits == cfg.budget
        assert_visit_invariant(tree, fresh_root=True)


def test_visit_invariant_with_subtree_reuse():
    cfg = VariantConfig(budget=40)
    level = LevelConfig(1, 6, 6, 4, 60, 12)
    state = new_level(level, 5)
    model = ColorPopModel(level.move_budget)
    tree = SearchTree.fresh(state, cfg, np.random.default_rng(1), model)
    fresh = True
    while state.status == Status.IN_PROGRESS:
        carried = tree.root.visits
        action = decide(tree)
        assert tree.root.visits == carried + cfg.budget
        assert_visit_invariant(tree, fresh)
        state = mcts.step(state, action, level.move_budget).next_state
        kept = tree.reused
        tree.advance(action, state)
        fresh = tree.reused == kept
    assert tree.reused > 0


def test_budget_one_returns_expanded_child():
    model = toy.random_tree((5, 2), seed=3)
    tree = SearchTree.fresh((), VariantConfig(budget=1), np.random.default_rng(9), model)
    action = decide(tree)
    assert list(tree.root.children) == [action]


def test_two_armed_budget_50():
    for s in range(20):
        tree = SearchTree.fresh((), VariantConfig(budget=50), np.random.default_rng(s), toy.two_armed())
        assert decide(tree) == 0


def test_decide_on_terminal_root_raises():
    tree = SearchTree.fresh((0,), VariantConfig(), np.random.default_rng(0), toy.two_armed())
    with pytest.raises(ContractViolation):
        decide(tree)


def test_decide_is_deterministic():
    level = LevelConfig(1, 8, 8, 4, 60, 15)
    state = new_level(level, 3)
    picks = set()
    for _ in range(3):
        tree = SearchTree.fresh(state, VariantConfig(), np.random.default_rng(42), ColorPopModel(15))
        picks.add(decide(tree))
    assert len(picks) == 1


def test_tree_depth_near_four():
    from aiplaytest.levels import by_name, reference_pack
    (lv,) = by_name(reference_pack(), ["E3"])
    depths = []
    play_level(lv, VariantConfig.for_agent("vanilla"), seed=1, trace=depths)
    assert 3 <= float(np.median(depths)) <= 5


@pytest.mark.parametrize("agent", VARIANTS)
def test_trivially_easy_level_always_passes(agent):
    lv = LevelConfig(1, 4, 4, 2, 2, 5)
    cfg = VariantConfig.for_agent(agent, budget=20)
    for seed in range(5):
        rec = play_level(lv, cfg, WEIGHTS, seed)
        assert rec.passed
        assert rec.moves_left == lv.move_budget - rec.moves_used


def test_moves_left_definition():
    lv = LevelConfig(2, 6, 6, 4, 80, 6)
    cfg = VariantConfig.for_agent("vanilla", budget=20)
    for seed in range(4):
        rec = play_level(lv, cfg, None, seed)
        if rec.passed:
            assert rec.moves_left == 6 - rec.moves_used
        else:
            assert rec.moves_left == 0 and rec.moves_used == 6
        assert 0.0 <= rec.goals_cleared_fraction <= 1.0


def test_policy_only_uses_four_times_budget():
    lv = LevelConfig(3, 6, 6, 4, 200, 5)
    rec = play_level(lv, VariantConfig.for_agent("policy-only"), WEIGHTS, 0)
    assert rec.agent_budget == 20
    assert rec.moves_used <= 20


def test_learned_variants_need_weights():
    with pytest.raises(ConfigurationError):
        play_level(LevelConfig(1, 4, 4, 2, 2, 5), VariantConfig.for_agent("policy"), None, 0)


def test_play_level_is_deterministic():
    lv = LevelConfig(4, 6, 6, 4, 60, 10)
    cfg = VariantConfig.for_agent("policy-myopic", budget=30)
    assert play_level(lv, cfg, WEIGHTS, 8) == play_level(lv, cfg, WEIGHTS, 8)


def test_variant_defaults():
    assert VariantConfig.for_agent("vanilla").gamma == 1.0
    assert VariantConfig.for_agent("policy").gamma == 1.0
    assert VariantConfig.for_agent("myopic").gamma == 0.9
    assert VariantConfig.for_agent("policy-myopic").gamma == 0.9
    assert VariantConfig().c == math.sqrt(2) and VariantConfig().budget == 200
    assert VariantConfig().rollout_cap == 10
    with pytest.raises(ConfigurationError):
        VariantConfig(gamma=0.0)
    with pytest.raises(ConfigurationError):
        VariantConfig.for_agent("greedy")


def test_same_board_ignores_refill_stream():
    s = new_level(LevelConfig(1, 5, 5, 3, 20, 5), 1)
    assert mcts.same_board(s, s.replace(rng_state=s.rng_state ^ 1))
    assert not mcts.same_board(s, s.replace(goals_remaining=s.goals_remaining - 1))
