"""Poisson-Dirichlet samplers and related Poisson point process utilities.

Two independent constructions of PD(theta):

* stick breaking (GEM): ``P_k = T_k * prod_{i<k} (1 - T_i)`` with
  ``T_i ~ Beta(1, theta)``, then sorted;
* normalised atoms of the Poisson process with intensity
  ``theta * exp(-x) / x``, generated as ``xi_i = exp(-T_i) * E_i`` where
  ``T_i`` are arrival times of a rate-theta Poisson process and ``E_i`` are
  standard exponentials.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .splitmerge import Partition
from .stats import TestReport, ks_test


def sample_beta_1_theta(theta: float, rng: np.random.Generator, size=None):
    """Beta(1, theta) by inversion: ``1 - U ** (1 / theta)``."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    u = rng.random(size)
    return -np.expm1(np.log1p(-u) / theta)


def beta_1_theta_cdf(theta: float) -> Callable:
    return lambda x: -np.expm1(theta * np.log1p(-np.clip(x, 0.0, 1.0)))


def _initial_width(theta: float, tol: float) -> int:
    return int(theta * (math.log(max(theta, 1.0) / tol) + 5.0)) + 16


def gem_rows(theta: float, n: int, rng: np.random.Generator, tol: float = 1e-10) -> np.ndarray:
    """``n`` stick-breaking sequences in generation order, zero padded.

    Each row stops at the first stick after which the unbroken rest is
    below ``tol``.
    """
    if not 0 < tol <= 1e-6:
        raise ValueError("tol must lie in (0, 1e-6]")
    width = _initial_width(theta, tol)
    sticks = sample_beta_1_theta(theta, rng, (n, width))
    while True:
        rest = np.cumprod(1.0 - sticks, axis=1)
        hit = rest < tol
        if hit.any(axis=1).all():
            break
        sticks = np.hstack([sticks, sample_beta_1_theta(theta, rng, (n, width))])
    k = hit.argmax(axis=1) + 1
    before = np.hstack([np.ones((n, 1)), rest[:, :-1]])
    weights = sticks * before
    weights[np.arange(weights.shape[1])[None, :] >= k[:, None]] = 0.0
    return weights[:, :k.max()]


def sample_gem(theta: float, tol: float, rng: np.random.Generator) -> np.ndarray:
    """Stick-breaking weights in generation order until the rest is below ``tol``."""
    row = gem_rows(theta, 1, rng, tol)[0]
    return row[row > 0]


def _rank_rows(x: np.ndarray) -> np.ndarray:
    out = -np.sort(-x, axis=1)
    return out / out.sum(axis=1, keepdims=True)


def pd_stick_rows(theta: float, n: int, rng: np.random.Generator, tol: float = 1e-10) -> np.ndarray:
    """``n`` PD(theta) samples by stick breaking, as sorted normalised rows."""
    return _rank_rows(gem_rows(theta, n, rng, tol))


def sample_pd_stick(theta: float, rng: np.random.Generator, tol: float = 1e-10) -> Partition:
    """PD(theta) by sorting GEM weights; the leftover mass is renormalised away."""
    row = pd_stick_rows(theta, 1, rng, tol)[0]
    return Partition(row[row > 0])


@dataclass(frozen=True)
class PPPSample:
    """Atoms of one Poisson process realisation, largest first.

    ``total`` includes ``tail``, the expected mass of the atoms that were not
    generated (``theta * exp(-T_last)``).
    """

    points: np.ndarray
    total: float
    tail: float


def ppp_rows(theta: float, n: int, rng: np.random.Generator, tol: float = 1e-10):
    """``n`` realisations of the Poisson process with intensity ``theta exp(-x) / x``.

    Returns ``(points, totals, tails)``: zero-padded atoms sorted
    decreasingly per row, totals including the tail estimate, and the tail
    estimates. A row stops at the first arrival ``T`` with expected remaining
    mass ``theta * exp(-T)`` below ``tol`` times the mass collected so far.
    """
    if not theta > 0:
        raise ValueError("theta must be positive")
    width = _initial_width(theta, tol)
    gaps = rng.exponential(1.0 / theta, (n, width))
    marks = rng.exponential(1.0, (n, width))
    while True:
        arrivals = np.cumsum(gaps, axis=1)
        atoms = np.exp(-arrivals) * marks
        collected = np.cumsum(atoms, axis=1)
        hit = theta * np.exp(-arrivals) < tol * collected
        if hit.any(axis=1).all():
            break
        gaps = np.hstack([gaps, rng.exponential(1.0 / theta, (n, width))])
        marks = np.hstack([marks, rng.exponential(1.0, (n, width))])
    k = hit.argmax(axis=1) + 1
    rows = np.arange(n)
    tails = theta * np.exp(-arrivals[rows, k - 1])
    totals = collected[rows, k - 1] + tails
    atoms[np.arange(atoms.shape[1])[None, :] >= k[:, None]] = 0.0
    points = -np.sort(-atoms[:, :k.max()], axis=1)
    return points, totals, tails


def sample_ppp(theta: float, rng: np.random.Generator, tol: float = 1e-10) -> PPPSample:
    """One realisation of the Poisson process with intensity ``theta exp(-x) / x``."""
    points, totals, tails = ppp_rows(theta, 1, rng, tol)
    return PPPSample(points[0][points[0] > 0], float(totals[0]), float(tails[0]))


def pd_ppp_rows(theta: float, n: int, rng: np.random.Generator, tol: float = 1e-10):
    """``n`` PD(theta) samples as normalised atoms; also the unnormalised totals."""
    points, totals, _ = ppp_rows(theta, n, rng, tol)
    return _rank_rows(points), totals


def sample_pd_ppp(theta: float, rng: np.random.Generator, tol: float = 1e-10) -> tuple[Partition, float]:
    """PD(theta) as normalised ordered atoms; also returns the unnormalised total."""
    smp = sample_ppp(theta, rng, tol)
    return Partition.normalised(smp.points), smp.total


def sample_gamma(shape: float, rng: np.random.Generator, size=None):
    return rng.gamma(shape, 1.0, size)


def sample_beta(a: float, b: float, rng: np.random.Generator, size=None):
    """Beta(a, b) as ``X / (X + Y)`` with independent Gamma(a), Gamma(b)."""
    x = sample_gamma(a, rng, size)
    y = sample_gamma(b, rng, size)
    return x / (x + y)


@dataclass(frozen=True)
class CampbellResult:
    empirical: float
    stderr: float
    analytic: float
    integrable: bool

    @property
    def z(self) -> float:
        return (self.empirical - self.analytic) / self.stderr if self.stderr > 0 else 0.0


def campbell_integral(f: Callable, theta: float) -> tuple[float, bool]:
    """``exp(-int (1 - exp(-f(x))) theta exp(-x) / x dx)`` by adaptive quadrature.

    Returns the value and whether quadrature converged (a divergent integral,
    e.g. from ``f`` not vanishing at 0, is reported as not integrable).
    """
    def g(x):
        with np.errstate(over="ignore", invalid="ignore"):
            return -np.expm1(-f(np.array([x]))[0]) * theta * math.exp(-x) / x

    ok = True
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            lo, _ = integrate.quad(g, 0.0, 1.0, limit=200)
            hi, _ = integrate.quad(g, 1.0, np.inf, limit=200)
            total = lo + hi
        except integrate.IntegrationWarning:
            ok = False
            total = math.inf
    if not math.isfinite(total):
        ok = False
    return math.exp(-total) if ok else 0.0, ok


def campbell_check(f: Callable, theta: float, n_samples: int, rng: np.random.Generator,
                   tol: float = 1e-10) -> CampbellResult:
    """Monte Carlo mean of ``exp(-sum f(xi_i))`` against the Laplace functional.

    ``f`` must be vectorised and vanish at 0.
    """
    analytic, ok = campbell_integral(f, theta)
    vals = np.empty(n_samples)
    chunk = 50_000
    with np.errstate(over="ignore", invalid="ignore"):
        for lo in range(0, n_samples, chunk):
            points, _, _ = ppp_rows(theta, min(chunk, n_samples - lo), rng, tol)
            fx = np.where(points > 0, f(points), 0.0)
            vals[lo:lo + points.shape[0]] = np.exp(-fx.sum(axis=1))
    se = float(vals.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return CampbellResult(float(vals.mean()), se, analytic, ok)


def size_biased_picks(rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One size-biased pick from each row of normalised parts."""
    cum = np.cumsum(rows, axis=1)
    u = rng.random(rows.shape[0]) * cum[:, -1]
    idx = (cum <= u[:, None]).sum(axis=1)
    idx = np.minimum(idx, rows.shape[1] - 1)
    return rows[np.arange(rows.shape[0]), idx]


def size_biased_pick(p: Partition, rng: np.random.Generator) -> float:
    return float(size_biased_picks(p.parts[None, :], rng)[0])


def size_biased_pick_test(theta: float, n_samples: int, rng: np.random.Generator,
                          sampler: str = "stick") -> TestReport:
    """KS test of a size-biased pick from PD(theta) against Beta(1, theta)."""
    if sampler == "stick":
        rows = pd_stick_rows(theta, n_samples, rng)
    else:
        rows, _ = pd_ppp_rows(theta, n_samples, rng)
    picks = size_biased_picks(rows, rng)
    d, p = ks_test(picks, beta_1_theta_cdf(theta))
    return TestReport(f"size_biased_pick_beta_1_{theta:g}", n_samples, d, p)
