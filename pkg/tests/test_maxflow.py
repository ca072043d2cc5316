import itertools
import time

import numpy as np
import pytest

from segdepth.maxflow import FlowGraph, maxflow


def random_graph(rng, n):
    g = FlowGraph(n)
    g.add_tedges(np.arange(n), rng.integers(0, 21, n), rng.integers(0, 21, n))
    m = int(rng.integers(0, n * (n - 1) // 2 + 1)) if n > 1 else 0
    for _ in range(m):
        u, v = rng.choice(n, 2, replace=False)
        g.add_edge(int(u), int(v), int(rng.integers(0, 21)), int(rng.integers(0, 21)))
    return g


def brute_min_cut(g: FlowGraph) -> float:
    """Minimum over all 2^n source sets of the cut capacity."""
    n = g.node_count
    sides = np.array(list(itertools.product([False, True], repeat=n)), dtype=bool)
    cost = (sides * g.cap_sink).sum(1) + (~sides * g.cap_source).sum(1)
    for u, v, cuv, cvu in g.edges:
        cost = cost + np.where(sides[:, u] & ~sides[:, v], cuv, 0) + np.where(sides[:, v] & ~sides[:, u], cvu, 0)
    return float(cost.min())


def test_single_node():
    g = FlowGraph(1)
    g.add_tedge(0, 5, 3)
    flow, side = maxflow(g)
    assert flow == 3 and side[0]


def test_two_node_example():
    g = FlowGraph(2)
    g.add_tedge(0, 4, 1)
    g.add_tedge(1, 1, 4)
    g.add_edge(0, 1, 2)
    flow, side = maxflow(g)
    assert flow == brute_min_cut(g) == 4
    assert g.cut_value(side) == flow


def test_empty_graph():
    flow, side = maxflow(FlowGraph(0))
    assert flow == 0 and len(side) == 0


def test_500_random_graphs_against_enumeration():
    rng = np.random.default_rng(2024)
    maxflow(random_graph(rng, 3))   # compile outside the timed region
    t0 = time.perf_counter()
    for _ in range(500):
        g = random_graph(rng, int(rng.integers(1, 11)))
        flow, side = maxflow(g)
        assert flow == brute_min_cut(g)
        assert g.cut_value(side) == flow
    assert time.perf_counter() - t0 < 10


def test_flow_conservation_and_capacity():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(2, 30))
        g = random_graph(rng, n)
        flow, _ = maxflow(g)
        tails, heads, caps = g.arc_arrays()
        net = g.arc_flows()
        assert np.all(net <= caps[0::2] + 1e-9) and np.all(-net <= caps[1::2] + 1e-9)
        tr0 = g.cap_source - g.cap_sink
        # signed terminal flow into each node, beyond the trivially saturated min(cs, ct)
        f = tr0 - g.terminal_residual
        assert np.all(np.where(tr0 >= 0, (f >= -1e-9) & (f <= tr0 + 1e-9), (f <= 1e-9) & (f >= tr0 - 1e-9)))
        balance = f.copy()
        np.add.at(balance, tails[0::2], -net)
        np.add.at(balance, heads[0::2], net)
        np.testing.assert_allclose(balance, 0, atol=1e-9)
        base = np.minimum(g.cap_source, g.cap_sink).sum()
        assert flow == pytest.approx(base + f[f > 0].sum())


def test_large_random_against_scipy():
    sp = pytest.importorskip("scipy.sparse.csgraph")
    from scipy.sparse import csr_matrix
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(20, 200))
        g = FlowGraph(n)
        cs, ct = rng.integers(0, 50, n), rng.integers(0, 50, n)
        g.add_tedges(np.arange(n), cs, ct)
        m = 4 * n
        u = rng.integers(0, n, m)
        v = (u + rng.integers(1, n, m)) % n
        cuv, cvu = rng.integers(0, 30, m), rng.integers(0, 30, m)
        g.add_edges(u, v, cuv, cvu)
        flow, side = maxflow(g)
        dense = np.zeros((n + 2, n + 2), dtype=np.int64)
        np.add.at(dense, (u, v), cuv)
        np.add.at(dense, (v, u), cvu)
        dense[n, :n] += cs
        dense[:n, n + 1] += ct
        ref = sp.maximum_flow(csr_matrix(dense), n, n + 1).flow_value
        assert flow == ref
        assert g.cut_value(side) == flow


def test_minimal_source_set():
    # two equal-capacity cuts: {} and {0}; the minimal source set is empty
    g = FlowGraph(1)
    g.add_tedge(0, 2, 2)
    _, side = maxflow(g)
    assert not side[0]


def test_rejects_negative_capacities():
    g = FlowGraph(2)
    with pytest.raises(ValueError):
        g.add_edge(0, 1, -1)
    with pytest.raises(ValueError):
        g.add_tedge(0, -1, 0)
    with pytest.raises(ValueError):
        g.add_edge(0, 0, 1)
