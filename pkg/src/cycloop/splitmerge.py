"""Split-merge dynamics on ranked partitions of the unit interval.

A step picks two parts independently with probability proportional to their
size. Picking the same part twice proposes a uniform split, picking two
different parts proposes merging them. Proposals are accepted with
probability ``beta_s`` (split) or ``beta_m`` (merge); the Poisson-Dirichlet
law with parameter ``beta_s / beta_m`` is invariant.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from numba import njit

DROP_BELOW = 1e-12


@njit(cache=True)
def _pick(p, m, u):
    target = u * p[:m].sum()
    acc = 0.0
    for i in range(m):
        acc += p[i]
        if target < acc:
            return i
    return m - 1


@njit(cache=True)
def _remove(p, m, i):
    for k in range(i, m - 1):
        p[k] = p[k + 1]
    return m - 1


@njit(cache=True)
def _insert_sorted(p, m, x):
    i = m
    while i > 0 and p[i - 1] < x:
        p[i] = p[i - 1]
        i -= 1
    p[i] = x
    return m + 1


@njit(cache=True)
def _renormalise(p, m):
    s = p[:m].sum()
    for k in range(m):
        p[k] /= s


@njit(cache=True)
def _step(p, m, u_i, u_j, u_acc, u_split, beta_s, beta_m):
    """One kernel step on the sorted buffer ``p[:m]``; returns (m, moved)."""
    i = _pick(p, m, u_i)
    j = _pick(p, m, u_j)
    if i == j:
        if u_acc >= beta_s:
            return m, False
        x = p[i]
        a = u_split * x
        b = x - a
        m = _remove(p, m, i)
        dropped = False
        for piece in (a, b):
            if piece >= DROP_BELOW:
                m = _insert_sorted(p, m, piece)
            else:
                dropped = True
        if dropped:
            _renormalise(p, m)
        return m, True
    if u_acc >= beta_m:
        return m, False
    s = p[i] + p[j]
    hi, lo = (i, j) if i > j else (j, i)
    m = _remove(p, m, hi)
    m = _remove(p, m, lo)
    m = _insert_sorted(p, m, s)
    return m, True


@njit(cache=True)
def _run_batch(buf, sizes, u, beta_s, beta_m):
    n_steps = u.shape[1]
    for r in range(buf.shape[0]):
        m = sizes[r]
        for s in range(n_steps):
            m, _ = _step(buf[r], m, u[r, s, 0], u[r, s, 1], u[r, s, 2], u[r, s, 3], beta_s, beta_m)
        sizes[r] = m


@dataclass(frozen=True, eq=False)
class Partition:
    """Nonincreasing positive parts summing to one (zero tail implicit)."""

    parts: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.parts, dtype=np.float64).ravel()
        if p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("parts must be a nonempty list of nonnegative numbers")
        p = -np.sort(-p)
        keep = p >= DROP_BELOW
        if not keep.all():
            p = p[keep]
            p = p / p.sum()
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"parts sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "parts", p)

    @classmethod
    def normalised(cls, values) -> "Partition":
        v = np.asarray(values, dtype=np.float64)
        return cls(v / v.sum())

    def __len__(self) -> int:
        return int(self.parts.size)

    def __getitem__(self, i):
        return self.parts[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.parts, other.parts)

    def allclose(self, other, atol: float = 1e-12) -> bool:
        return len(self) == len(other) and bool(np.allclose(self.parts, other.parts, rtol=0, atol=atol))

    def _buffer(self, extra: int = 1) -> np.ndarray:
        buf = np.zeros(self.parts.size + extra)
        buf[:self.parts.size] = self.parts
        return buf

    @classmethod
    def _wrap(cls, buf, m) -> "Partition":
        p = buf[:m].copy()
        p.setflags(write=False)
        obj = cls.__new__(cls)
        object.__setattr__(obj, "parts", p)
        return obj


def _check_index(p: Partition, i: int):
    if not 0 <= i < len(p):
        raise IndexError(f"part index {i} out of range for {len(p)} parts")


def split(p: Partition, i: int, u: float) -> Partition:
    """Replace part ``i`` by ``u * p_i`` and ``(1 - u) * p_i``."""
    _check_index(p, i)
    if not 0 < u < 1:
        raise ValueError("u must lie in (0, 1)")
    parts = np.concatenate([np.delete(p.parts, i), [u * p.parts[i], p.parts[i] - u * p.parts[i]]])
    return Partition(parts)


def merge(p: Partition, i: int, j: int) -> Partition:
    """Replace parts ``i`` and ``j`` by their sum."""
    _check_index(p, i)
    _check_index(p, j)
    if i == j:
        raise ValueError("merge needs two distinct parts")
    parts = np.concatenate([np.delete(p.parts, [i, j]), [p.parts[i] + p.parts[j]]])
    return Partition(parts)


def size_biased_index(p: Partition, rng: np.random.Generator) -> int:
    """Index ``i`` with probability ``p_i``."""
    return int(_pick(p.parts, len(p), rng.random()))


def _check_rates(beta_s, beta_m):
    if not (0 < beta_s <= 1 and 0 < beta_m <= 1):
        raise ValueError("acceptance parameters must lie in (0, 1]")


def step_discrete(p: Partition, beta_s: float, beta_m: float, rng: np.random.Generator) -> Partition:
    """One step of the split-merge kernel."""
    _check_rates(beta_s, beta_m)
    buf = p._buffer()
    u = rng.random(4)
    m, moved = _step(buf, len(p), u[0], u[1], u[2], u[3], beta_s, beta_m)
    return Partition._wrap(buf, m) if moved else p


def run_discrete(p: Partition, beta_s: float, beta_m: float, n_steps: int,
                 rng: np.random.Generator) -> Partition:
    """``n_steps`` kernel steps; same random stream as repeated ``step_discrete``."""
    for _ in range(n_steps):
        p = step_discrete(p, beta_s, beta_m, rng)
    return p


def run_discrete_many(partitions, beta_s: float, beta_m: float, n_steps: int,
                      rng: np.random.Generator) -> list[Partition]:
    """Evolve many independent partitions ``n_steps`` steps each (compiled loop)."""
    _check_rates(beta_s, beta_m)
    sizes = np.array([len(p) for p in partitions], dtype=np.int64)
    buf = np.zeros((len(partitions), int(sizes.max()) + n_steps + 1))
    for r, p in enumerate(partitions):
        buf[r, :len(p)] = p.parts
    u = rng.random((len(partitions), n_steps, 4))
    _run_batch(buf, sizes, u, beta_s, beta_m)
    return [Partition._wrap(buf[r], sizes[r]) for r in range(len(partitions))]


def jump_rate(p: Partition, beta_s: float, beta_m: float) -> float:
    """Total rate ``beta_s * sum p_i^2 + beta_m * sum_{i != j} p_i p_j``."""
    sq = float(np.dot(p.parts, p.parts))
    return beta_s * sq + beta_m * max(0.0, 1.0 - sq)


def run_continuous(p: Partition, beta_s: float, beta_m: float, horizon: float,
                   rng: np.random.Generator) -> Partition:
    """Continuous-time chain: part ``i`` splits at rate ``beta_s p_i^2``, an
    ordered pair merges at rate ``beta_m p_i p_j``. Simulated by holding for an
    exponential time and then drawing the jump by rejection."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if not (beta_s > 0 and beta_m > 0):
        raise ValueError("rates must be positive")
    top = max(beta_s, beta_m)
    acc_s, acc_m = beta_s / top, beta_m / top
    t = 0.0
    buf = p._buffer(extra=4)
    m = len(p)
    while True:
        q = jump_rate(Partition._wrap(buf, m), beta_s, beta_m)
        t += rng.exponential(1.0 / q)
        if t > horizon:
            return Partition._wrap(buf, m)
        while True:
            u = rng.random(4)
            m, moved = _step(buf, m, u[0], u[1], u[2], u[3], acc_s, acc_m)
            if moved:
                break
        if buf.size < m + 2:
            buf = np.concatenate([buf, np.zeros(buf.size)])


def trajectory_csv(rows, width: int = 10) -> str:
    """CSV ``t_or_step, n_parts, p1..p_width`` from ``(t, Partition)`` pairs."""
    out = io.StringIO()
    wr = csv.writer(out, lineterminator="\n")
    wr.writerow(["t_or_step", "n_parts"] + [f"p{i + 1}" for i in range(width)])
    for t, p in rows:
        top = list(p.parts[:width]) + [0.0] * max(0, width - len(p))
        wr.writerow([format(float(t), ".17g"), len(p)] + [format(float(x), ".17g") for x in top])
    return out.getvalue()
