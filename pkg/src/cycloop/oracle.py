"""Exact diagonalisation of spin-1/2 Heisenberg Hamiltonians on small graphs.

Basis convention: the computational basis is the tensor product of
``|up> = (1, 0)`` and ``|down> = (0, 1)`` with vertex 0 as the most
significant factor, so bit ``n - 1 - x`` of a basis index is the state of
vertex ``x`` (0 = up).

The Monte Carlo side of the cycle and loop representations also lives here:
for the Poisson bridge process at inverse temperature ``beta``,

    Tr exp(-2 beta H_ferro) = exp(beta |E| / 2) * E[prod_cycles 2 cosh(h L)]
    Tr exp(-2 beta H_anti)  = exp(beta |E| / 2) * E[prod_loops 2 cosh(beta h w)]

where ``L`` is the cycle length and ``w`` the loop winding number.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels as K
from .decomposition import CYCLES, LOOPS, orientation
from .graph import Graph, GraphError
from .stats import ratio_estimate, z_score

MAX_VERTICES = 12
FERRO, ANTI = "ferro", "anti"

PAULI = {
    1: np.array([[0, 1], [1, 0]], dtype=np.complex128),
    2: np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    3: np.array([[1, 0], [0, -1]], dtype=np.complex128),
}
SPIN = {i: m / 2 for i, m in PAULI.items()}


class DimensionError(ValueError):
    """Raised when an operator would exceed the dense size cap."""


def _check_size(n: int, cap: int = MAX_VERTICES):
    if not 1 <= n <= cap:
        raise DimensionError(f"dense operators are limited to 1..{cap} vertices, got {n}")


def embed(local: dict[int, np.ndarray], n: int) -> np.ndarray:
    """Kronecker product with ``local[x]`` at slot ``x`` and identity elsewhere."""
    _check_size(n)
    out = np.ones((1, 1), dtype=np.result_type(*local.values()))
    eye = np.eye(2, dtype=out.dtype)
    for x in range(n):
        out = np.kron(out, local.get(x, eye))
    return out


def spin_op(i: int, x: int, n_vertices: int) -> np.ndarray:
    """Spin operator ``S^(i)`` acting on vertex ``x``."""
    if i not in SPIN:
        raise ValueError("direction must be 1, 2 or 3")
    if not 0 <= x < n_vertices:
        raise ValueError("vertex out of range")
    return embed({x: SPIN[i]}, n_vertices)


def coupling_op(x: int, y: int, n_vertices: int) -> np.ndarray:
    """``S_x . S_y`` as a real symmetric matrix."""
    total = sum(embed({x: SPIN[i], y: SPIN[i]}, n_vertices) for i in (1, 2, 3))
    return total.real.copy()


def transposition_op(x: int, y: int, n_vertices: int) -> np.ndarray:
    """Permutation matrix exchanging the states of ``x`` and ``y``."""
    _check_size(n_vertices)
    dim = 1 << n_vertices
    idx = np.arange(dim)
    bx = (idx >> (n_vertices - 1 - x)) & 1
    by = (idx >> (n_vertices - 1 - y)) & 1
    flip = (bx != by).astype(np.int64) * ((1 << (n_vertices - 1 - x)) | (1 << (n_vertices - 1 - y)))
    out = np.zeros((dim, dim))
    out[idx ^ flip, idx] = 1.0
    return out


def magnetization_diagonal(n_vertices: int) -> np.ndarray:
    """Diagonal of the total ``S^(3)`` in the computational basis."""
    idx = np.arange(1 << n_vertices)
    ups = np.zeros(idx.size)
    for x in range(n_vertices):
        ups += 1 - ((idx >> (n_vertices - 1 - x)) & 1)
    return ups - n_vertices / 2


def hamiltonian(g: Graph, kind: str, h: float = 0.0) -> np.ndarray:
    """Heisenberg Hamiltonian ``-/+ sum S_x.S_y - h sum S^(3)_x`` (real symmetric)."""
    _check_size(g.n_vertices)
    if kind not in (FERRO, ANTI):
        raise ValueError(f"kind must be {FERRO!r} or {ANTI!r}")
    sign = -1.0 if kind == FERRO else 1.0
    dim = 1 << g.n_vertices
    H = np.zeros((dim, dim))
    for x, y in g.edges:
        H += sign * coupling_op(x, y, g.n_vertices)
    H[np.diag_indices(dim)] -= h * magnetization_diagonal(g.n_vertices)
    return H


class Spectrum:
    """Eigendecomposition of a Hermitian matrix with Gibbs-state helpers."""

    def __init__(self, H: np.ndarray):
        if np.max(np.abs(H - H.conj().T)) > 1e-12:
            raise ValueError("matrix is not Hermitian")
        self.energies, self.vectors = np.linalg.eigh(H)
        self.ground = float(self.energies[0])

    def _weights(self, beta: float) -> np.ndarray:
        w = np.exp(-beta * (self.energies - self.ground))
        return w / w.sum()

    def log_partition(self, beta: float) -> float:
        """``log Tr exp(-beta H)``, evaluated stably."""
        return float(-beta * self.ground + np.log(np.exp(-beta * (self.energies - self.ground)).sum()))

    def free_energy(self, beta: float) -> float:
        if beta <= 0:
            raise ValueError("free energy needs beta > 0")
        return -self.log_partition(beta) / beta

    def expectation(self, A: np.ndarray, beta: float):
        diag = np.einsum("ij,ik,kj->j", self.vectors.conj(), A, self.vectors)
        val = np.dot(self._weights(beta), diag)
        return float(val.real) if abs(val.imag) < 1e-12 else complex(val)

    def expectation_diagonal(self, d: np.ndarray, beta: float) -> float:
        """Expectation of an operator that is diagonal in the computational basis."""
        diag = (np.abs(self.vectors) ** 2 * d[:, None]).sum(axis=0)
        return float(np.dot(self._weights(beta), diag))


def gibbs(A: np.ndarray, H: np.ndarray, beta: float):
    """``Tr(A exp(-beta H)) / Tr exp(-beta H)``."""
    if A.shape != H.shape:
        raise ValueError("operator dimensions differ")
    return Spectrum(H).expectation(A, beta)


def free_energy(H: np.ndarray, beta: float) -> float:
    return Spectrum(H).free_energy(beta)


@lru_cache(maxsize=64)
def _spectrum(g: Graph, kind: str, h: float) -> Spectrum:
    return Spectrum(hamiltonian(g, kind, h))


def neel_energy(g: Graph) -> float:
    """Energy of the Neel state (A up, B down) under the zero-field antiferromagnet.

    Evaluated from single-site expectations, which is exact for a product state.
    """
    if g.bipartition is None:
        raise GraphError("Neel state needs a bipartition")
    up = np.array([1, 0], dtype=np.complex128)
    down = np.array([0, 1], dtype=np.complex128)
    local = [up if c == 0 else down for c in g.bipartition]
    mean = np.array([[np.vdot(v, SPIN[i] @ v).real for i in (1, 2, 3)] for v in local])
    return float(sum(mean[x] @ mean[y] for x, y in g.edges))


# ---------------------------------------------------------------------------------
# Monte Carlo side of the representations

@dataclass
class IdentityReport:
    """Comparison of exact traces with the bridge-process estimates."""

    graph: dict
    model: str
    beta: float
    h: float
    n_samples: int
    exact: float
    mc_estimate: float
    mc_stderr: float
    z_score: float
    correlations: list = field(default_factory=list)
    magnetizations: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def max_abs_z(self) -> float:
        zs = [abs(self.z_score)] + [abs(c["z_score"]) for c in self.correlations + self.magnetizations]
        return max(zs)


def _mc_weights(g: Graph, beta: float, h: float, model: str, n: int, rng, chunk: int = 100_000):
    is_a, sign = orientation(g, model)
    ea = g.edge_array()
    eu, ev = np.ascontiguousarray(ea[:, 0]), np.ascontiguousarray(ea[:, 1])
    field_scale = beta * h if model == LOOPS else h
    W = np.empty(n)
    lab0 = np.empty((n, g.n_vertices), np.int64)
    val0 = np.empty((n, g.n_vertices))
    for lo in range(0, n, chunk):
        m = min(chunk, n - lo)
        counts = rng.poisson(beta * g.n_edges, m)
        total = int(counts.sum())
        ids = rng.integers(0, g.n_edges, total, dtype=np.int64)
        times = rng.random(total) * beta
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        w, l0, v0 = K.identity_batch(g.n_vertices, eu, ev, beta, is_a, model == LOOPS, sign,
                                     field_scale, offsets, ids, times)
        W[lo:lo + m], lab0[lo:lo + m], val0[lo:lo + m] = w, l0, v0
    return W, lab0, val0, field_scale


def identity_samples(g: Graph, beta: float, h: float, model: str, n_mc: int, rng):
    """Raw Monte Carlo weights; concatenate several calls to pool replicas."""
    W, lab0, val0, _ = _mc_weights(g, beta, h, model, n_mc, rng)
    return {"W": W, "lab0": lab0, "val0": val0}


def identity_report(g: Graph, beta: float, h: float, model: str, raw: dict) -> IdentityReport:
    """Compare pooled Monte Carlo weights with exact traces."""
    if g.n_vertices > 8:
        raise DimensionError("identity checks are limited to 8 vertices")
    W, lab0, val0 = raw["W"], raw["lab0"], raw["val0"]
    n_mc = W.size
    kind = FERRO if model == CYCLES else ANTI
    spec = _spectrum(g, kind, float(h))
    exact = math.exp(spec.log_partition(2 * beta))
    pref = math.exp(beta * g.n_edges / 2)
    est = pref * W.mean()
    se = pref * W.std(ddof=1) / math.sqrt(n_mc)
    stag = g.sublattice_sign() if model == LOOPS else np.ones(g.n_vertices, np.int64)
    t = np.tanh((beta * h if model == LOOPS else h) * val0)

    corrs = []
    for y in range(1, g.n_vertices):
        op = embed({0: SPIN[3], y: SPIN[3]}, g.n_vertices).real
        ex = spec.expectation(op, 2 * beta)
        f = np.where(lab0[:, 0] == lab0[:, y], 1.0, t[:, 0] * t[:, y])
        r, rse = ratio_estimate(W * f, W)
        s = stag[0] * stag[y] / 4
        corrs.append({"x": 0, "y": y, "exact": ex, "mc_estimate": float(s * r),
                      "mc_stderr": float(abs(s) * rse), "z_score": z_score(s * r, ex, abs(s) * rse)})
    mags = []
    if h != 0:
        for x in range(g.n_vertices):
            ex = spec.expectation(spin_op(3, x, g.n_vertices).real, 2 * beta)
            r, rse = ratio_estimate(W * t[:, x], W)
            s = stag[x] / 2
            mags.append({"x": x, "exact": ex, "mc_estimate": float(s * r),
                         "mc_stderr": float(abs(s) * rse), "z_score": z_score(s * r, ex, abs(s) * rse)})
    return IdentityReport(g.to_dict(), model, beta, h, n_mc, exact, float(est), float(se),
                          z_score(est, exact, se), corrs, mags)


def _verify(g: Graph, beta: float, h: float, n_mc: int, rng, model: str) -> IdentityReport:
    if g.n_vertices > 8:
        raise DimensionError("identity checks are limited to 8 vertices")
    return identity_report(g, beta, h, model, identity_samples(g, beta, h, model, n_mc, rng))


def verify_cycle_identity(g: Graph, beta: float, h: float, n_mc: int, rng) -> IdentityReport:
    """Ferromagnet partition function, correlations and magnetisation vs cycles."""
    return _verify(g, beta, h, n_mc, rng, CYCLES)


def verify_loop_identity(g: Graph, beta: float, h: float, n_mc: int, rng) -> IdentityReport:
    """Antiferromagnet partition function and staggered correlations vs loops."""
    if g.bipartition is None:
        raise GraphError("loop identity needs a bipartite graph")
    return _verify(g, beta, h, n_mc, rng, LOOPS)


def mean_power_of_two(g: Graph, beta: float, model: str, n_mc: int, rng) -> tuple[float, float]:
    """Monte Carlo ``E[2 ** (#objects)]`` under the bridge process, with its error."""
    W, _, _, _ = _mc_weights(g, beta, 0.0, model, n_mc, rng)
    return float(W.mean()), float(W.std(ddof=1) / math.sqrt(n_mc))
