import math

import numpy as np
import pytest
from scipy import stats

from cycloop.bridges import insert_bridge, remove_bridge, sample_rho
from cycloop.decomposition import CYCLES, LOOPS, decompose
from cycloop.graph import complete_graph, cubic_lattice, cycle_graph, single_edge
from cycloop.mcmc import (ChainError, ChainState, ct_step, default_thin, mh_acceptance, mh_step, run_chain,
                          samples_csv)
from cycloop.stats import chi_square_counts


def single_edge_law(theta, beta, kmax=40):
    k = np.arange(kmax)
    n_cycles = np.where(k % 2 == 0, 2, 1)
    logw = n_cycles * math.log(theta) + k * math.log(beta) - np.array([math.lgamma(i + 1) for i in k])
    p = np.exp(logw - logw.max())
    return p / p.sum()


def test_acceptance_formula():
    assert mh_acceptance(1.0, 0.5, 3, 0, 0, True) == 1.0
    assert mh_acceptance(1.0, 0.1, 3, 0, 0, True) == pytest.approx(0.3)
    assert mh_acceptance(2.0, 1.0, 1, 1, -1, False) == pytest.approx(0.5)
    assert mh_acceptance(2.0, 1.0, 1, 0, 1, True) == 1.0


def test_missing_seed_and_bad_args():
    g = single_edge()
    with pytest.raises(ValueError):
        next(run_chain(g, 1.0, 2.0, CYCLES, 100, 10, 1))
    with pytest.raises(ValueError):
        next(run_chain(g, 1.0, 2.0, CYCLES, 100, 10, 1, seed=1, sampler="direct"))
    with pytest.raises(ValueError):
        next(run_chain(complete_graph(3), 1.0, 2.0, LOOPS, 100, 10, 1, seed=1))


@pytest.mark.parametrize("model", [CYCLES, LOOPS])
def test_deltas_match_recomputation(model, rng):
    g = cubic_lattice(2, 3)
    s = ChainState(g, 1.0, 2.0, model, omega=sample_rho(g, 1.0, rng))
    for _ in range(200):
        mh_step(s, rng)
        w = s.omega
        base = decompose(w, g, model).n_objects
        assert base == s.n_objects
        e, t = int(rng.integers(g.n_edges)), float(rng.random())
        assert s.insert_delta(e, t) == decompose(insert_bridge(w, e, t), g, model).n_objects - base
        if s.n_bridges:
            b = int(rng.integers(s.n_bridges))
            e, t = s.bridge(b)
            assert s.remove_delta(b) == decompose(remove_bridge(w, e, t), g, model).n_objects - base


@pytest.mark.parametrize("g,model", [
    (complete_graph(4), CYCLES), (cubic_lattice(2, 3), CYCLES), (cubic_lattice(2, 3), LOOPS),
    (cycle_graph(4), LOOPS), (complete_graph(5), CYCLES),
])
@pytest.mark.parametrize("sampler", ["mh", "ct"])
def test_debug_mode_every_step(g, model, sampler):
    n = 3000 if sampler == "mh" else 60.0
    out = list(run_chain(g, 1.0, 2.0, model, n, burn_in=0, thin=n / 10, seed=5, sampler=sampler, debug=True))
    assert len(out) >= 10


def test_state_matches_full_decomposition(rng):
    g = cubic_lattice(2, 3)
    s = ChainState(g, 1.5, 0.5, LOOPS)
    for _ in range(30):
        for _ in range(50):
            mh_step(s, rng)
        dec = decompose(s.omega, g, LOOPS)
        smp = s.sample()
        np.testing.assert_allclose(smp.lengths, dec.sorted_lengths())
        assert s.is_consistent()


def test_deterministic_replay():
    g = complete_graph(4)
    a = list(run_chain(g, 1.0, 2.0, CYCLES, 5000, 100, 50, seed=11))
    b = list(run_chain(g, 1.0, 2.0, CYCLES, 5000, 100, 50, seed=11))
    assert samples_csv(a) == samples_csv(b)
    c = list(run_chain(g, 1.0, 2.0, CYCLES, 5000, 100, 50, seed=12))
    assert samples_csv(a) != samples_csv(c)


def test_stepping_apis(rng):
    g = single_edge()
    s = ChainState(g, 1.0, 2.0)
    mh_step(s, rng)
    assert s.step_count == 1
    s, dt = ct_step(s, rng)
    assert dt > 0 and s.time == pytest.approx(dt)


def _count_law_pvalue(samples, theta, beta):
    counts = np.bincount([x.n_bridges for x in samples], minlength=40)[:40]
    _, p, _ = chi_square_counts(counts, single_edge_law(theta, beta))
    return p


def test_mh_single_edge_theta2_law():
    smp = list(run_chain(single_edge(), 1.0, 2.0, CYCLES, 10 ** 6, 1000, 50, seed=3))
    assert _count_law_pvalue(smp, 2.0, 1.0) > 0.01


def test_ct_single_edge_theta2_law():
    smp = list(run_chain(single_edge(), 1.0, 2.0, CYCLES, 2 * 10 ** 5, 100, 10.0, seed=4, sampler="ct"))
    assert _count_law_pvalue(smp, 2.0, 1.0) > 0.01


def test_theta_half_single_edge_law():
    smp = list(run_chain(single_edge(), 1.5, 0.5, CYCLES, 10 ** 6, 1000, 50, seed=6))
    assert _count_law_pvalue(smp, 0.5, 1.5) > 0.01


def test_theta1_per_edge_counts_poisson():
    g = complete_graph(4)
    smp = list(run_chain(g, 0.5, 1.0, CYCLES, 4 * 10 ** 5, 1000, 40, seed=8))
    counts = np.array([s.n_bridges for s in smp])
    k = np.arange(30)
    prob = stats.poisson.pmf(k, 3.0)
    prob[-1] += stats.poisson.sf(29, 3.0)
    _, p, _ = chi_square_counts(np.bincount(counts, minlength=30)[:30], prob)
    assert p > 0.01


def test_theta1_chain_agrees_with_direct_sampling():
    g = complete_graph(5)
    chain = [s.n_objects for s in run_chain(g, 0.8, 1.0, CYCLES, 10 ** 6, 1000, 50, seed=9)]
    direct = [s.n_objects for s in run_chain(g, 0.8, 1.0, CYCLES, 20000, 0, 1, seed=9, sampler="direct")]
    assert abs(np.mean(chain) - np.mean(direct)) < 4 * math.hypot(np.std(chain) / math.sqrt(len(chain) / 3),
                                                                 np.std(direct) / math.sqrt(len(direct)))


def test_ct_time_grid():
    out = list(run_chain(single_edge(), 1.0, 2.0, CYCLES, 20.0, 5.0, 2.5, seed=1, sampler="ct"))
    assert len(out) == 7
    assert all(s.time <= 5.0 + 2.5 * i + 1e-12 for i, s in enumerate(out))


def test_check_every_passes():
    g = cubic_lattice(2, 3)
    n = sum(1 for _ in run_chain(g, 1.0, 2.0, LOOPS, 20000, 1000, 100, seed=2, check_every=1))
    assert n == 191


def test_growth_keeps_consistency(rng):
    g = complete_graph(6)
    s = ChainState(g, 4.0, 3.0, CYCLES, debug=True)
    for _ in range(5000):
        mh_step(s, rng)
    assert s.n_bridges > 40 and s.is_consistent()


def test_samples_csv_layout():
    smp = list(run_chain(single_edge(), 1.0, 2.0, CYCLES, 300, 100, 100, seed=1))
    lines = samples_csv(smp).splitlines()
    assert lines[0].split(",")[:4] == ["step", "n_bridges", "n_objects", "len_1"]
    assert len(lines[0].split(",")) == 13 and len(lines) == 4


def test_default_thin():
    assert default_thin(cubic_lattice(2, 3), 1.0) == 12


def test_single_edge_transition_probabilities():
    ks = np.array([s.n_bridges for s in run_chain(single_edge(), 1.0, 2.0, CYCLES, 2 * 10 ** 5, 0, 1, seed=21)])
    src, step = ks[:-1], np.diff(ks)
    for k in range(5):
        at = src == k
        # one edge: two cycles when k is even, one when odd, so any move from even k merges
        delta = -1 if k % 2 == 0 else 1
        p_up = 0.5 * mh_acceptance(2.0, 1.0, 1, k, delta, True)
        n = int(at.sum())
        assert abs((step[at] == 1).mean() - p_up) < 4 * math.sqrt(p_up * (1 - p_up) / n)
        if k:
            p_down = 0.5 * mh_acceptance(2.0, 1.0, 1, k, delta, False)
            assert abs((step[at] == -1).mean() - p_down) < 4 * math.sqrt(p_down * (1 - p_down) / n)
