"""Goodness-of-fit helpers and the JSON test-report record."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

ALPHA = 0.01
MIN_KS_SAMPLES = 100


@dataclass(frozen=True)
class TestReport:
    __test__ = False

    test: str
    n: int
    statistic: float
    p_value: float
    alpha: float = ALPHA

    @property
    def passed(self) -> bool:
        return bool(self.p_value > self.alpha)

    def to_dict(self) -> dict:
        return {"test": self.test, "n": self.n, "statistic": self.statistic,
                "p_value": self.p_value, "pass": self.passed}


def ks_test(sample, reference: Callable | np.ndarray) -> tuple[float, float]:
    """Kolmogorov-Smirnov statistic and asymptotic p-value.

    ``reference`` is either a vectorised CDF (one-sample test) or a second
    sample (two-sample test). Fewer than 100 observations are rejected
    because the asymptotic p-value is unreliable there.
    """
    x = np.asarray(sample, dtype=np.float64)
    if x.size < MIN_KS_SAMPLES:
        raise ValueError(f"KS test needs at least {MIN_KS_SAMPLES} observations, got {x.size}")
    if callable(reference):
        res = stats.kstest(x, reference, method="asymp")
    else:
        y = np.asarray(reference, dtype=np.float64)
        if y.size < MIN_KS_SAMPLES:
            raise ValueError(f"KS test needs at least {MIN_KS_SAMPLES} observations, got {y.size}")
        res = stats.ks_2samp(x, y, method="asymp")
    return float(res.statistic), float(res.pvalue)


def chi_square_counts(observed, expected_prob, min_expected: float = 5.0) -> tuple[float, float, int]:
    """Chi-square test of counts against cell probabilities.

    Cells with small expectation are pooled from the right so every pooled
    cell expects at least ``min_expected`` observations. Returns the
    statistic, p-value and degrees of freedom.
    """
    obs = np.asarray(observed, dtype=np.float64)
    prob = np.asarray(expected_prob, dtype=np.float64)
    n = obs.sum()
    exp = prob / prob.sum() * n
    pooled_o, pooled_e = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            pooled_o.append(acc_o)
            pooled_e.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if pooled_e:
            pooled_o[-1] += acc_o
            pooled_e[-1] += acc_e
        else:
            pooled_o.append(acc_o)
            pooled_e.append(acc_e)
    po, pe = np.array(pooled_o), np.array(pooled_e)
    stat = float(((po - pe) ** 2 / pe).sum())
    dof = po.size - 1
    return stat, float(stats.chi2.sf(stat, dof)) if dof > 0 else 1.0, dof


def z_score(estimate: float, exact: float, stderr: float) -> float:
    if stderr == 0:
        return 0.0 if estimate == exact else float("inf")
    return float((estimate - exact) / stderr)


def ratio_estimate(num, den) -> tuple[float, float]:
    """Ratio of sample means with a delta-method standard error."""
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    r = num.mean() / den.mean()
    resid = num - r * den
    se = resid.std(ddof=1) / (np.sqrt(num.size) * abs(den.mean()))
    return float(r), float(se)
