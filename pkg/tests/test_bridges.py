import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from cycloop.bridges import BridgeConfig, BridgeError, insert_bridge, remove_bridge, sample_rho
from cycloop.graph import complete_graph, cubic_lattice, single_edge
from cycloop.stats import chi_square_counts


def test_tiny_beta_is_empty(rng):
    g = complete_graph(4)
    assert all(sample_rho(g, 1e-12, rng).total_count == 0 for _ in range(1000))


def test_single_edge_mean_count(rng):
    g = single_edge()
    counts = np.array([sample_rho(g, 1.0, rng).total_count for _ in range(10 ** 5)])
    assert abs(counts.mean() - 1.0) < 3 * math.sqrt(1.0 / counts.size)


def test_k4_total_is_poisson_12(rng):
    g = complete_graph(4)
    counts = np.array([sample_rho(g, 2.0, rng).total_count for _ in range(10 ** 5)])
    k = np.arange(60)
    prob = stats.poisson.pmf(k, 12.0)
    prob[-1] += stats.poisson.sf(k[-1], 12.0)
    _, p, _ = chi_square_counts(np.bincount(np.minimum(counts, 59), minlength=60), prob)
    assert p > 0.01


def test_times_uniform_and_edges_uniform(rng):
    g = cubic_lattice(2, 3)
    w = [sample_rho(g, 1.5, rng) for _ in range(3000)]
    times = np.concatenate([x.times for x in w])
    edges = np.concatenate([x.edge_ids for x in w])
    assert stats.kstest(times / 1.5, "uniform").pvalue > 0.01
    _, p, _ = chi_square_counts(np.bincount(edges, minlength=g.n_edges), np.full(g.n_edges, 1 / g.n_edges))
    assert p > 0.01


def test_insert_remove_inverse():
    w = BridgeConfig.from_arrays(1.0, 3, [0, 2], [0.5, 0.1])
    w2 = insert_bridge(w, 1, 0.3)
    assert w2.total_count == 3 and w2.contains(1, 0.3)
    assert remove_bridge(w2, 1, 0.3) == w


def test_insert_duplicate_time_rejected():
    w = BridgeConfig.from_arrays(1.0, 2, [0], [0.5])
    with pytest.raises(BridgeError):
        insert_bridge(w, 0, 0.5)


def test_remove_from_empty_rejected():
    with pytest.raises(BridgeError):
        remove_bridge(BridgeConfig.empty(1.0, 2), 0, 0.5)


def test_time_range_checked():
    with pytest.raises(BridgeError):
        BridgeConfig.from_arrays(1.0, 1, [0], [1.0])
    with pytest.raises(BridgeError):
        insert_bridge(BridgeConfig.empty(1.0, 1), 0, -0.1)


def test_sorted_by_edge_then_time():
    w = BridgeConfig.from_arrays(2.0, 3, [2, 0, 2, 0], [0.1, 1.5, 0.05, 0.2])
    np.testing.assert_array_equal(w.edge_ids, [0, 0, 2, 2])
    np.testing.assert_array_equal(w.times, [0.2, 1.5, 0.05, 0.1])
    np.testing.assert_array_equal(w.counts(), [2, 0, 2])
    np.testing.assert_array_equal(w.times_on(2), [0.05, 0.1])


def test_serialisation_round_trips(rng):
    g = cubic_lattice(2, 3)
    w = sample_rho(g, 1.3, rng)
    assert BridgeConfig.from_json(w.to_json(g), g) == w
    assert BridgeConfig.from_csv(w.to_csv(g), 1.3, g) == w
    assert w.to_csv(g).splitlines()[0] == "edge_u,edge_v,time"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.floats(0, 1, exclude_max=True)), max_size=20, unique_by=lambda x: x[1]))
def test_insert_sequence_then_remove_all(items):
    w = BridgeConfig.empty(1.0, 5)
    for e, t in items:
        w = insert_bridge(w, e, t)
    w.validate()
    assert w.total_count == len(items)
    for e, t in reversed(items):
        w = remove_bridge(w, e, t)
    assert w == BridgeConfig.empty(1.0, 5)
