from __future__ import annotations

import json
from collections import Counter

import pytest

from services.generators import GenConfig, add_random_edges, random_sp_graph
from services.spdag import (
    DecompositionError,
    TreeKind,
    decompose,
    forest_to_dot,
    forest_to_json,
    is_series_parallel,
    iter_subtrees,
    tree_edges,
    tree_violations,
)
from services.taskgraph import TaskGraph, normalize_endpoints


def _edge_set(g):
    return Counter((e.src, e.dst) for e in g.edges)


def _forest_edges(forest):
    edges = Counter()
    for tree in forest:
        edges.update(tree_edges(tree))
    return edges


def test_fig1_decomposes_into_one_tree(fig1):
    forest = decompose(fig1, 0, "random", 0)
    assert len(forest) == 1
    assert forest.cuts == []
    tree = forest.trees[0]
    assert tree.kind is TreeKind.PARALLEL
    assert tree.endpoints == (0, 5)
    assert _forest_edges(forest) == _edge_set(fig1)
    assert tree_violations(tree) == []


def test_fig1_tree_structure(fig1):
    tree = decompose(fig1, 0).trees[0]
    parallels = sorted(t.endpoints for t in iter_subtrees(tree) if t.kind is TreeKind.PARALLEL)
    assert parallels == [(0, 5), (1, 3)]
    series = sorted(t.endpoints for t in iter_subtrees(tree) if t.kind is TreeKind.SERIES)
    assert series == [(0, 5), (0, 5), (1, 3)]


def test_fig2_deadlocks_at_node_1_and_cuts_the_shorter_branch(fig1, fig2):
    forest = decompose(fig2, 0, "smallest-outsize-first", 0)
    assert len(forest.cuts) == 1
    event = forest.cuts[0]
    assert event.node == 1
    assert set(event.active) == {(1, 4), (1, 5)}
    assert event.cut == (1, 4)

    assert len(forest) == 2
    core, cut = forest.trees
    assert cut.kind is TreeKind.LEAF and cut.endpoints == (1, 4)
    assert Counter(tree_edges(core)) == _edge_set(fig1)
    assert _forest_edges(forest) == _edge_set(fig2)


def test_fig2_cutting_the_other_branch_leaves_a_parallel_0_4(fig2):
    def cut_1_5(active, rng):
        return [t.endpoints for t in active].index((1, 5))

    forest = decompose(fig2, 0, cut_1_5, 0)
    assert len(forest) == 2
    core = forest.trees[0]
    assert (0, 4) in {t.endpoints for t in iter_subtrees(core) if t.kind is TreeKind.PARALLEL}
    assert _forest_edges(forest) == _edge_set(fig2)


def test_single_edge_graph():
    g = TaskGraph.from_edges(2, [(0, 1, 1.0)])
    forest = decompose(g, 0)
    assert len(forest) == 1
    assert forest.trees[0].kind is TreeKind.LEAF


def test_multiple_sources_are_rejected():
    g = TaskGraph.from_edges(3, [(0, 2, 1.0), (1, 2, 1.0)])
    with pytest.raises(DecompositionError):
        decompose(g, 0)


def test_cyclic_graph_is_rejected():
    g = TaskGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (2, 1, 1.0)])
    with pytest.raises(DecompositionError):
        decompose(g, 0)


def test_unknown_cut_rule_is_rejected(fig1):
    with pytest.raises(DecompositionError):
        decompose(fig1, 0, "largest-first")


def test_is_series_parallel(fig1, fig2):
    assert is_series_parallel(fig1)
    assert not is_series_parallel(fig2)


def test_decomposition_is_deterministic_per_seed(fig2):
    a = forest_to_json(decompose(fig2, 0, "random", 7))
    b = forest_to_json(decompose(fig2, 0, "random", 7))
    assert a == b


def test_forest_emitters(fig2):
    forest = decompose(fig2, 0, "smallest-outsize-first", 0)
    doc = json.loads(forest_to_json(forest))
    assert len(doc["trees"]) == 2
    assert doc["cuts"][0]["cut"] == [1, 4]
    dot = forest_to_dot(forest)
    assert dot.startswith("digraph forest {")
    assert dot.count("subgraph cluster_") == 2
    assert '"1-4"' in dot


@pytest.mark.slow
def test_random_sp_graphs_give_one_tree_covering_all_edges():
    for seed in range(1000):
        n = 2 + seed % 199
        g, _ = random_sp_graph(GenConfig(n_tasks=n, seed=seed))
        normalized, start, _ = normalize_endpoints(g, 1.0)
        forest = decompose(normalized, start, "random", seed)
        assert len(forest) == 1, f"seed {seed}"
        assert _forest_edges(forest) == _edge_set(normalized), f"seed {seed}"


@pytest.mark.slow
def test_almost_sp_forests_partition_the_edge_set():
    for seed in range(500):
        g, _ = random_sp_graph(GenConfig(n_tasks=100, seed=seed))
        g = add_random_edges(g, seed % 201, seed)
        normalized, start, _ = normalize_endpoints(g, 1.0)
        forest = decompose(normalized, start, "random", seed)
        assert _forest_edges(forest) == _edge_set(normalized), f"seed {seed}"
        assert forest.steps <= 4 * normalized.num_edges + 1
        for tree in forest:
            assert tree_violations(tree) == []
