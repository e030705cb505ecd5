"""Observables, bounds and experiments built on the samplers."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels as K
from .bridges import sample_rho, sample_rho_arrays
from .decomposition import CYCLES, LOOPS, contact_report, decompose, orientation
from .graph import Graph, complete_graph
from .mcmc import ChainState, _UniformStream
from .pd import pd_stick_rows
from .stats import ks_test

__all__ = [
    "LengthSample", "eta_infinity_hat", "eta_macro_hat", "gw_survival", "high_temp_bound",
    "HighTempBound", "schramm_experiment", "SchrammReport", "contact_scaling_experiment",
    "ContactScalingReport", "ks_test",
]


@dataclass
class LengthSample:
    """Object lengths (time units) and strand counts of many configurations."""

    n_vertices: int
    beta: float
    model: str
    lengths: list = field(default_factory=list)
    strands: list = field(default_factory=list)

    def add(self, lengths, strands):
        self.lengths.append(np.asarray(lengths, dtype=np.float64))
        self.strands.append(np.asarray(strands, dtype=np.int64))

    @classmethod
    def from_chain(cls, samples, n_vertices: int, beta: float, model: str) -> "LengthSample":
        out = cls(n_vertices, beta, model)
        for s in samples:
            out.add(s.lengths, s.strands)
        return out

    def __len__(self) -> int:
        return len(self.lengths)


def _fraction_above(samples: LengthSample, threshold: float) -> float:
    if not len(samples):
        raise ValueError("no samples")
    fr = [s[l > threshold].sum() / samples.n_vertices for l, s in zip(samples.lengths, samples.strands)]
    return float(np.mean(fr))


def eta_infinity_hat(samples: LengthSample, cutoff: float) -> float:
    """Mean fraction of vertices ``x`` whose object through ``(x, 0)`` is longer than ``cutoff``.

    ``cutoff`` is a length in time units; multiply a strand count by beta to
    convert.
    """
    if not cutoff > 0:
        raise ValueError("cutoff must be positive")
    return _fraction_above(samples, cutoff)


def eta_macro_hat(samples: LengthSample, eps: float) -> float:
    """As ``eta_infinity_hat`` with the cutoff ``eps * beta * |V|``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return _fraction_above(samples, eps * samples.beta * samples.n_vertices)


def gw_survival(s: float) -> float:
    """Survival probability of a Galton-Watson tree with Poisson(s) offspring.

    The largest root of ``eta = 1 - exp(-s eta)``: bisection to 1e-12
    followed by fixed-point polishing.
    """
    if not s > 0:
        raise ValueError("mean offspring must be positive")
    if s <= 1:
        return 0.0

    def f(eta):
        return -math.expm1(-s * eta) - eta

    lo, hi = 1e-300, 1.0
    while f(lo) <= 0:
        lo *= 1e10
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    eta = 0.5 * (lo + hi)
    for _ in range(100):
        nxt = -math.expm1(-s * eta)
        if nxt == eta:
            break
        eta = nxt
    return eta


@dataclass(frozen=True)
class HighTempBound:
    value: float
    a: float
    vacuous: bool


def high_temp_bound(theta: float, beta: float, kappa: int, k: int, model: str = CYCLES) -> HighTempBound:
    """Upper bound on the probability that the object through a vertex is longer than ``beta * k``.

    The bound is ``[a kappa (1 - 1/kappa)^(1 - kappa)]^k / (a (kappa - 1))``
    with a model-dependent ``a``; it is flagged vacuous when it is at least 1.
    """
    if kappa < 2:
        raise ValueError("kappa must be at least 2")
    if not (theta > 0 and beta > 0):
        raise ValueError("theta and beta must be positive")
    if theta <= 1:
        a = -math.expm1(-beta) / theta
    elif model == CYCLES:
        a = -math.expm1(-beta)
    elif model == LOOPS:
        a = math.exp(-beta) * math.expm1(beta * theta)
    else:
        raise ValueError(f"unknown model {model!r}")
    growth = a * kappa * (1 - 1 / kappa) ** (1 - kappa)
    value = growth ** k / (a * (kappa - 1))
    return HighTempBound(value, a, value >= 1)


# ---------------------------------------------------------------------------------
# complete graph: random stirring and its Poisson-Dirichlet limit

@dataclass
class SchrammReport:
    n: int
    c: float
    theta: float
    beta: float
    n_samples: int
    eta_limit: float
    macro_cutoff: float
    macro_fraction: float
    largest_mean: float
    pd_largest_mean: float
    ks_statistic: float
    ks_p_value: float
    giant_fraction: float
    eta_by_cutoff: dict

    def to_dict(self) -> dict:
        return asdict(self)


def _stirring_strands(g: Graph, beta: float, n_samples: int, rng, eu, ev):
    is_a, sign = orientation(g, CYCLES)
    for _ in range(n_samples):
        ids, times = sample_rho_arrays(g.n_edges, beta, rng)
        out = K.decompose(g.n_vertices, eu[ids], ev[ids], times, beta, is_a, False, sign)
        yield ids, out[6]


def _giant(n: int, eu, ev, ids) -> int:
    used = np.unique(ids)
    adj = coo_matrix((np.ones(used.size), (eu[used], ev[used])), shape=(n, n))
    _, comp = connected_components(adj, directed=False)
    return int(np.bincount(comp).max())


def _schramm_setup(n: int, c: float):
    if not c > 0.5:
        raise ValueError("c must exceed 1/2")
    g = complete_graph(n)
    cutoff = n ** (2 / 3)
    cutoffs = sorted({1, 2, 4, 8, 16, 32, round(cutoff, 6)})
    return g, 2 * c / (n - 1), gw_survival(2 * c), cutoff, cutoffs


def schramm_samples(n: int, c: float, n_samples: int, rng: np.random.Generator,
                    theta: float = 1.0, thin: int | None = None) -> dict:
    """Per-sample observables of the stirring experiment (see ``schramm_experiment``)."""
    g, beta, eta, cutoff, cutoffs = _schramm_setup(n, c)
    ea = g.edge_array()
    eu, ev = np.ascontiguousarray(ea[:, 0]), np.ascontiguousarray(ea[:, 1])
    largest = np.empty(n_samples)
    macro = np.empty(n_samples)
    giant = np.empty(n_samples)
    by_cut = np.empty((n_samples, len(cutoffs)))
    if theta == 1:
        stream = _stirring_strands(g, beta, n_samples, rng, eu, ev)
    else:
        stream = _chain_strands(g, beta, theta, n_samples, rng, thin)
    for i, (ids, strands) in enumerate(stream):
        largest[i] = strands.max() / (n * eta)
        macro[i] = strands[strands > cutoff].sum() / n
        giant[i] = _giant(n, eu, ev, ids) / n
        by_cut[i] = [strands[strands > kc].sum() / n for kc in cutoffs]
    return {"largest": largest, "macro": macro, "giant": giant, "by_cut": by_cut}


def schramm_summary(n: int, c: float, theta: float, raw: dict, rng: np.random.Generator) -> SchrammReport:
    """KS comparison with a fresh PD(1) oracle sample of the same size."""
    _, beta, eta, cutoff, cutoffs = _schramm_setup(n, c)
    largest = raw["largest"]
    oracle = pd_stick_rows(1.0, largest.size, rng)[:, 0]
    d, p = ks_test(largest, oracle)
    return SchrammReport(n, c, theta, beta, int(largest.size), eta, cutoff, float(raw["macro"].mean()),
                         float(largest.mean()), float(oracle.mean()), d, p, float(raw["giant"].mean()),
                         {str(kc): float(v) for kc, v in zip(cutoffs, raw["by_cut"].mean(axis=0))})


def schramm_experiment(n: int, c: float, n_samples: int, rng: np.random.Generator,
                       theta: float = 1.0, thin: int | None = None) -> SchrammReport:
    """Cycle structure of the interchange process on the complete graph.

    Samples at ``beta = 2c / (n - 1)`` so the expected number of bridges is
    ``c n``. Cycle sizes in vertices are normalised by ``n * eta`` with
    ``eta`` the Galton-Watson survival probability for mean ``2c``; the
    largest normalised cycle is compared with the largest part of PD(1) by a
    two-sample KS test. The macroscopic fraction counts vertices in cycles
    longer than ``n ** (2/3)``. ``giant_fraction`` (largest connected
    component of the bridged edges) and ``eta_by_cutoff`` are diagnostics.
    For ``theta != 1`` the samples come from the Metropolis-Hastings chain.
    """
    raw = schramm_samples(n, c, n_samples, rng, theta, thin)
    return schramm_summary(n, c, theta, raw, rng)


def configurations(g: Graph, beta: float, theta: float, n_samples: int, rng: np.random.Generator,
                   model: str = CYCLES, thin: int | None = None, chain: bool = False):
    """Bridge configurations from the theta-weighted measure.

    Independent Poisson draws when ``theta == 1`` (unless ``chain`` is set);
    otherwise thinned states of the Metropolis-Hastings chain after a burn-in
    of ten thinning intervals.
    """
    if theta == 1 and not chain:
        for _ in range(n_samples):
            yield sample_rho(g, beta, rng)
        return
    state = ChainState(g, beta, theta, model)
    stream = _UniformStream(rng)
    thin = thin or max(1, int(math.ceil(beta * g.n_edges)))

    def advance(n):
        while n:
            rows = stream.take(n)
            state._advance(rows, continuous=False)
            n -= rows.shape[0]

    advance(10 * thin)
    for _ in range(n_samples):
        advance(thin)
        yield state.omega


def _chain_strands(g: Graph, beta: float, theta: float, n_samples: int, rng, thin):
    for w in configurations(g, beta, theta, n_samples, rng, CYCLES, thin):
        yield w.edge_ids, decompose(w, g, CYCLES).n_strands


# ---------------------------------------------------------------------------------
# contact zones

@dataclass
class ContactScalingReport:
    n_samples: int
    n_pairs: int
    min_strands: int
    zone_slope: float
    zone_r2: float
    zone_max_rel_residual: float
    bridge_slope: float
    bridge_r2: float

    def to_dict(self) -> dict:
        return asdict(self)


def _fit_through_origin(x, y):
    slope = float(np.dot(x, y) / np.dot(x, x))
    resid = y - slope * x
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return slope, r2, resid


def contact_scaling_experiment(g: Graph, beta: float, theta: float, n_samples: int,
                               rng: np.random.Generator, model: str = CYCLES,
                               min_strands: int | None = None, thin: int | None = None) -> ContactScalingReport:
    """Regress pair contact zones and pair contact bridges on ``lambda * lambda'``.

    ``lambda`` counts the time-0 strands of a cycle. Only pairs where both
    cycles have at least ``min_strands`` strands enter the fit (default: 5%
    of the vertices, at least 2).
    """
    min_strands = min_strands or max(2, int(math.ceil(0.05 * g.n_vertices)))
    xs, zones, bridges = [], [], []
    for w in configurations(g, beta, theta, n_samples, rng, model, thin):
        dec = decompose(w, g, model)
        rep = contact_report(w, dec, g)
        lam = dec.lengths / beta
        big = np.flatnonzero(lam >= min_strands)
        for ai, a in enumerate(big):
            for b in big[ai + 1:]:
                key = (int(min(a, b)), int(max(a, b)))
                xs.append(lam[a] * lam[b])
                zones.append(rep.pair_zone.get(key, 0.0))
                bridges.append(rep.pair_bridges.get(key, 0))
    if not xs:
        return ContactScalingReport(n_samples, 0, min_strands, math.nan, math.nan, math.nan, math.nan, math.nan)
    x = np.array(xs, dtype=np.float64)
    zs, zr2, zres = _fit_through_origin(x, np.array(zones))
    bs, br2, _ = _fit_through_origin(x, np.array(bridges, dtype=np.float64))
    return ContactScalingReport(n_samples, int(x.size), min_strands, zs, zr2,
                                float(np.max(np.abs(zres) / x)), bs, br2)
