import itertools
import math

import numpy as np
import pytest

from cycloop.graph import GraphError, complete_graph, cubic_lattice, cycle_graph, path_graph, single_edge
from cycloop.oracle import (ANTI, FERRO, PAULI, SPIN, DimensionError, Spectrum, coupling_op, embed, free_energy,
                            gibbs, hamiltonian, magnetization_diagonal, mean_power_of_two, neel_energy, spin_op,
                            transposition_op, verify_cycle_identity, verify_loop_identity)

GRAPHS = [single_edge(), path_graph(3), complete_graph(3), cycle_graph(4), complete_graph(4), cubic_lattice(2, 2)]


def test_pauli_algebra():
    for i in (1, 2, 3):
        np.testing.assert_allclose(PAULI[i] @ PAULI[i], np.eye(2), atol=1e-15)
    np.testing.assert_allclose(PAULI[1] @ PAULI[2], 1j * PAULI[3], atol=1e-15)


def test_spin_commutators():
    n = 3
    for x, y in itertools.product(range(n), repeat=2):
        s1, s2, s3 = spin_op(1, x, n), spin_op(2, y, n), spin_op(3, x, n)
        comm = s1 @ s2 - s2 @ s1
        np.testing.assert_allclose(comm, 1j * (x == y) * s3, atol=1e-12)


def test_spin_square():
    n = 3
    for x in range(n):
        total = sum(spin_op(i, x, n) @ spin_op(i, x, n) for i in (1, 2, 3))
        np.testing.assert_allclose(total, 0.75 * np.eye(2 ** n), atol=1e-12)


def test_two_site_coupling_spectrum():
    ev = np.linalg.eigvalsh(coupling_op(0, 1, 2))
    np.testing.assert_allclose(ev, [-0.75, 0.25, 0.25, 0.25], atol=1e-12)


def test_single_edge_ferro_spectrum():
    ev = np.linalg.eigvalsh(hamiltonian(single_edge(), FERRO))
    np.testing.assert_allclose(ev, [-0.25, -0.25, -0.25, 0.75], atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_coupling_is_transposition(n):
    for x, y in itertools.combinations(range(n), 2):
        np.testing.assert_allclose(coupling_op(x, y, n), 0.5 * transposition_op(x, y, n) - 0.25 * np.eye(2 ** n),
                                   atol=1e-12)


@pytest.mark.parametrize("g", GRAPHS)
@pytest.mark.parametrize("kind", [FERRO, ANTI])
def test_hamiltonian_commutes_with_magnetisation(g, kind):
    H = hamiltonian(g, kind, 0.37)
    M = np.diag(magnetization_diagonal(g.n_vertices))
    assert np.max(np.abs(H @ M - M @ H)) < 1e-11


def test_magnetisation_diagonal_matches_spin_sum():
    n = 3
    M = sum(spin_op(3, x, n) for x in range(n)).real
    np.testing.assert_allclose(np.diag(M), magnetization_diagonal(n))


def test_gibbs_basics():
    H = hamiltonian(cycle_graph(4), ANTI, 0.2)
    assert gibbs(np.eye(16), H, 1.3) == pytest.approx(1.0)
    A = embed({0: SPIN[3], 2: SPIN[3]}, 4).real
    assert gibbs(A, H, 0.0) == pytest.approx(np.trace(A) / 16, abs=1e-14)


@pytest.mark.parametrize("g", GRAPHS)
def test_free_energy_field_symmetry(g):
    for kind in (FERRO, ANTI):
        for beta in (0.3, 1.0, 4.0):
            a = free_energy(hamiltonian(g, kind, 0.4), beta)
            b = free_energy(hamiltonian(g, kind, -0.4), beta)
            assert abs(a - b) < 1e-10


@pytest.mark.parametrize("g", GRAPHS[:4])
def test_free_energy_lipschitz(g):
    h = 0.6
    for kind in (FERRO, ANTI):
        spec = Spectrum(hamiltonian(g, kind, h))
        betas = np.linspace(0.1, 3.0, 15)
        bf = np.array([b * spec.free_energy(b) for b in betas])
        bound = 0.75 * g.n_edges + abs(h) / 2 * g.n_vertices
        for i, j in itertools.combinations(range(betas.size), 2):
            assert abs(bf[i] - bf[j]) <= abs(betas[i] - betas[j]) * bound + 1e-12


def test_large_beta_free_energy_below_neel():
    g = cubic_lattice(2, 2)
    assert free_energy(hamiltonian(g, ANTI), 50.0) <= -g.n_edges / 4


def test_neel_energy():
    assert neel_energy(single_edge()) == pytest.approx(-0.25)
    assert neel_energy(cubic_lattice(2, 2)) == pytest.approx(-1.0)


def test_size_cap():
    with pytest.raises(DimensionError):
        hamiltonian(complete_graph(13), FERRO)


def test_exact_one_edge_partition_functions():
    g = single_edge()
    z_f = math.exp(Spectrum(hamiltonian(g, FERRO)).log_partition(2.0))
    z_a = math.exp(Spectrum(hamiltonian(g, ANTI)).log_partition(2.0))
    assert z_f == pytest.approx(3 * math.exp(0.5) + math.exp(-1.5), rel=1e-12)
    assert z_a == pytest.approx(3 * math.exp(-0.5) + math.exp(1.5), rel=1e-12)


def test_one_edge_power_of_two(rng):
    m, se = mean_power_of_two(single_edge(), 1.0, "cycles", 2 * 10 ** 5, rng)
    assert abs(m - (3 + math.exp(-2))) < 3 * se
    m, se = mean_power_of_two(single_edge(), 1.0, "loops", 2 * 10 ** 5, rng)
    assert abs(m - (3 * math.exp(-1) + math.e)) < 3 * se


def test_cycle_identity_small(rng):
    rep = verify_cycle_identity(path_graph(3), 0.5, 0.3, 2 * 10 ** 5, rng)
    assert rep.max_abs_z() < 3.5
    assert len(rep.magnetizations) == 3 and len(rep.correlations) == 2


def test_loop_identity_small(rng):
    rep = verify_loop_identity(cycle_graph(4), 0.5, 0.0, 2 * 10 ** 5, rng)
    assert rep.max_abs_z() < 3.5
    assert all(c["exact"] * (-1) ** c["y"] >= 0 for c in rep.correlations)


def test_loop_identity_needs_bipartition(rng):
    with pytest.raises(GraphError):
        verify_loop_identity(complete_graph(3), 0.5, 0.0, 100, rng)


def test_identity_size_limit(rng):
    with pytest.raises(DimensionError):
        verify_cycle_identity(complete_graph(9), 0.5, 0.0, 100, rng)
