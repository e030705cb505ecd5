import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cycloop.pd import pd_stick_rows
from cycloop.splitmerge import (Partition, jump_rate, merge, run_continuous, run_discrete, run_discrete_many,
                                size_biased_index, split, step_discrete, trajectory_csv)
from cycloop.stats import chi_square_counts, ks_test


def P(*xs):
    return Partition(list(xs))


def test_split_examples():
    assert split(P(1.0), 0, 0.5).allclose(P(0.5, 0.5))
    assert split(P(0.6, 0.4), 1, 0.25).allclose(P(0.6, 0.3, 0.1))


def test_merge_examples():
    assert merge(P(0.5, 0.5), 0, 1).allclose(P(1.0))
    assert merge(P(0.4, 0.3, 0.3), 1, 2).allclose(P(0.6, 0.4))
    with pytest.raises(ValueError):
        merge(P(0.5, 0.5), 1, 1)


def test_split_sum_preserved(rng):
    for _ in range(10 ** 4):
        p = Partition.normalised(rng.random(rng.integers(1, 8)))
        q = split(p, int(rng.integers(len(p))), float(rng.uniform(0.01, 0.99)))
        assert abs(q.parts.sum() - 1) < 1e-12
        assert np.all(np.diff(q.parts) <= 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=8), st.data())
def test_merge_undoes_split(raw, data):
    p = Partition.normalised(raw)
    i = data.draw(st.integers(0, len(p) - 1))
    u = data.draw(st.floats(0.05, 0.95))
    q = split(p, i, u)
    a = int(np.flatnonzero(np.isclose(q.parts, u * p[i], rtol=0, atol=1e-15))[0])
    b = [j for j in np.flatnonzero(np.isclose(q.parts, p[i] - u * p[i], rtol=0, atol=1e-15)) if j != a][0]
    assert merge(q, a, int(b)).allclose(p, atol=1e-12)


def test_invalid_partitions():
    with pytest.raises(ValueError):
        Partition([0.5, 0.4])
    with pytest.raises(ValueError):
        Partition([])
    with pytest.raises(ValueError):
        Partition([1.2, -0.2])
    with pytest.raises(IndexError):
        split(P(1.0), 1, 0.5)


def test_tiny_parts_dropped():
    p = Partition([1 - 1e-13, 1e-13])
    assert len(p) == 1 and p[0] == 1.0


def test_size_biased_index(rng):
    assert all(size_biased_index(P(1.0), rng) == 0 for _ in range(100))
    p = P(0.7, 0.3)
    hits = np.array([size_biased_index(p, rng) for _ in range(10 ** 5)])
    assert abs((hits == 0).mean() - 0.7) < 0.005


def test_first_pick_from_pd1_uniform(rng):
    rows = pd_stick_rows(1.0, 5000, rng)
    idx = [size_biased_index(Partition(r[r > 0]), rng) for r in rows]
    picks = rows[np.arange(rows.shape[0]), idx]
    _, pval = ks_test(picks, lambda x: np.clip(x, 0, 1))
    assert pval > 0.01


def test_unit_partition_only_splits(rng):
    outcomes = [len(step_discrete(P(1.0), 0.3, 1.0, rng)) for _ in range(20000)]
    frac = np.mean(np.array(outcomes) == 2)
    assert abs(frac - 0.3) < 3 * np.sqrt(0.3 * 0.7 / 20000)
    assert set(outcomes) <= {1, 2}


def test_one_step_kernel_masses(rng):
    bs, bm = 0.6, 0.8
    start = P(0.5, 0.5)
    # cells indexed by the new number of parts minus one: merge, stay, split
    sizes = np.array([len(step_discrete(start, bs, bm, rng)) for _ in range(40000)])
    prob = [bm / 2, 1 - bs / 2 - bm / 2, bs / 2]
    _, p, _ = chi_square_counts(np.bincount(sizes - 1, minlength=3), prob)
    assert p > 0.01


def test_run_discrete_stream_matches_steps():
    p = P(0.5, 0.3, 0.2)
    a = run_discrete(p, 1.0, 1.0, 200, np.random.default_rng(1))
    rng = np.random.default_rng(1)
    b = p
    for _ in range(200):
        b = step_discrete(b, 1.0, 1.0, rng)
    assert a == b


def test_run_discrete_many_keeps_mass(rng):
    out = run_discrete_many([P(1.0)] * 50, 1.0, 1.0, 300, rng)
    assert all(abs(q.parts.sum() - 1) < 1e-9 for q in out)


def test_continuous_horizon_zero_and_rate(rng):
    p = P(0.5, 0.3, 0.2)
    assert run_continuous(p, 1.0, 2.0, 0.0, rng) == p
    assert jump_rate(P(1.0), 0.7, 0.2) == pytest.approx(0.7)
    assert jump_rate(P(0.5, 0.5), 1.0, 1.0) == pytest.approx(1.0)


def test_continuous_long_run_pd1_largest(rng):
    largest = [run_continuous(P(1.0), 1.0, 1.0, 60.0, rng)[0] for _ in range(1500)]
    oracle = pd_stick_rows(1.0, 20000, rng)[:, 0]
    _, p = ks_test(largest, oracle)
    assert p > 0.01


def test_trajectory_csv():
    text = trajectory_csv([(0, P(1.0)), (1, P(0.5, 0.5))])
    lines = text.splitlines()
    assert lines[0] == "t_or_step,n_parts," + ",".join(f"p{i}" for i in range(1, 11))
    assert lines[2].startswith("1,2,0.5,0.5,0,")
