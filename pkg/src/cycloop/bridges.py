"""Bridge configurations: finite sets of marks ``(edge, time)`` on ``E x [0, beta)``.

A configuration is stored as two parallel arrays sorted by edge index and
then by time, which makes the per-edge time lists contiguous slices.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph


class BridgeError(ValueError):
    """Precondition violation on insert/remove or malformed input."""


@dataclass(frozen=True, eq=False)
class BridgeConfig:
    """Immutable bridge configuration.

    Attributes:
        beta: Circumference of the time circle.
        n_edges: Size of the edge set the edge ids refer to.
        edge_ids: int64 array, nondecreasing.
        times: float64 array, strictly increasing within each edge.
    """

    beta: float
    n_edges: int
    edge_ids: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.beta > 0:
            raise BridgeError("beta must be positive")
        e = np.ascontiguousarray(self.edge_ids, dtype=np.int64)
        t = np.ascontiguousarray(self.times, dtype=np.float64)
        if e.shape != t.shape or e.ndim != 1:
            raise BridgeError("edge_ids and times must be 1-d arrays of equal length")
        e.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "edge_ids", e)
        object.__setattr__(self, "times", t)

    @classmethod
    def empty(cls, beta: float, n_edges: int) -> "BridgeConfig":
        return cls(beta, n_edges, np.empty(0, np.int64), np.empty(0, np.float64))

    @classmethod
    def from_arrays(cls, beta: float, n_edges: int, edge_ids, times) -> "BridgeConfig":
        """Sort and validate arbitrary (edge, time) arrays."""
        e = np.asarray(edge_ids, dtype=np.int64)
        t = np.asarray(times, dtype=np.float64)
        order = np.lexsort((t, e))
        w = cls(beta, n_edges, e[order], t[order])
        w.validate()
        return w

    @property
    def total_count(self) -> int:
        return int(self.edge_ids.size)

    def __len__(self) -> int:
        return self.total_count

    def __eq__(self, other) -> bool:
        if not isinstance(other, BridgeConfig):
            return NotImplemented
        return (self.beta == other.beta and self.n_edges == other.n_edges
                and np.array_equal(self.edge_ids, other.edge_ids)
                and np.array_equal(self.times, other.times))

    def _slice(self, e: int) -> tuple[int, int]:
        lo = int(np.searchsorted(self.edge_ids, e, "left"))
        hi = int(np.searchsorted(self.edge_ids, e, "right"))
        return lo, hi

    def times_on(self, e: int) -> np.ndarray:
        """Sorted bridge times on edge ``e``."""
        lo, hi = self._slice(e)
        return self.times[lo:hi]

    def counts(self) -> np.ndarray:
        """Number of bridges on each edge."""
        return np.bincount(self.edge_ids, minlength=self.n_edges)

    def contains(self, e: int, t: float) -> bool:
        ts = self.times_on(e)
        i = int(np.searchsorted(ts, t))
        return i < ts.size and ts[i] == t

    def validate(self) -> None:
        e, t = self.edge_ids, self.times
        if e.size == 0:
            return
        if e.min() < 0 or e.max() >= self.n_edges:
            raise BridgeError("edge id out of range")
        if t.min() < 0 or t.max() >= self.beta:
            raise BridgeError("bridge time outside [0, beta)")
        same = e[1:] == e[:-1]
        if np.any(e[1:] < e[:-1]) or np.any(same & (t[1:] <= t[:-1])):
            raise BridgeError("bridges not sorted or repeated on an edge")

    def endpoints(self, g: Graph) -> tuple[np.ndarray, np.ndarray]:
        ea = g.edge_array()
        if ea.shape[0] != self.n_edges:
            raise BridgeError("graph edge count does not match configuration")
        return ea[self.edge_ids, 0], ea[self.edge_ids, 1]

    # serialisation -----------------------------------------------------------------

    def to_rows(self, g: Graph) -> list[tuple[int, int, float]]:
        u, v = self.endpoints(g)
        return [(int(a), int(b), float(t)) for a, b, t in zip(u, v, self.times)]

    def to_json(self, g: Graph) -> str:
        # repr() of a float is the shortest exact round-trip form
        return json.dumps({"beta": self.beta, "bridges": self.to_rows(g)})

    @classmethod
    def from_json(cls, text: str, g: Graph) -> "BridgeConfig":
        d = json.loads(text)
        return cls._from_rows(float(d["beta"]), d["bridges"], g)

    def to_csv(self, g: Graph) -> str:
        out = io.StringIO()
        wr = csv.writer(out, lineterminator="\n")
        wr.writerow(["edge_u", "edge_v", "time"])
        for a, b, t in self.to_rows(g):
            wr.writerow([a, b, format(t, ".17g")])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str, beta: float, g: Graph) -> "BridgeConfig":
        rows = list(csv.reader(io.StringIO(text)))
        return cls._from_rows(beta, [(int(a), int(b), float(t)) for a, b, t in rows[1:]], g)

    @classmethod
    def _from_rows(cls, beta, rows, g: Graph) -> "BridgeConfig":
        e = [g.edge_index(int(a), int(b)) for a, b, _ in rows]
        t = [float(r[2]) for r in rows]
        return cls.from_arrays(beta, g.n_edges, e, t)


def sample_rho(g: Graph, beta: float, rng: np.random.Generator) -> BridgeConfig:
    """Draw from the rate-one Poisson process on ``E x [0, beta)``."""
    if not beta > 0:
        raise BridgeError("beta must be positive")
    e, t = sample_rho_arrays(g.n_edges, beta, rng)
    order = np.lexsort((t, e))
    return BridgeConfig(beta, g.n_edges, e[order], t[order])


def sample_rho_arrays(n_edges: int, beta: float, rng: np.random.Generator):
    """Unsorted ``(edge_ids, times)`` of a Poisson configuration.

    The total is Poisson(beta |E|) and, given the total, marks are i.i.d.
    uniform; this is the same law as independent per-edge Poisson(beta) counts.
    Exact time coincidences (probability zero) are redrawn.
    """
    k = int(rng.poisson(beta * n_edges))
    e = rng.integers(0, n_edges, size=k, dtype=np.int64)
    while True:
        t = rng.random(k) * beta
        np.minimum(t, np.nextafter(beta, 0.0), out=t)
        if np.unique(t).size == k:
            return e, t


def insert_bridge(w: BridgeConfig, e: int, t: float) -> BridgeConfig:
    """Return ``w`` plus the bridge ``(e, t)``."""
    if not 0 <= e < w.n_edges:
        raise BridgeError(f"edge id {e} out of range")
    if not 0 <= t < w.beta:
        raise BridgeError(f"time {t} outside [0, {w.beta})")
    if np.any(w.times == t):
        raise BridgeError(f"time {t} already occupied")
    lo, hi = w._slice(e)
    pos = lo + int(np.searchsorted(w.times[lo:hi], t))
    return BridgeConfig(w.beta, w.n_edges, np.insert(w.edge_ids, pos, e), np.insert(w.times, pos, t))


def remove_bridge(w: BridgeConfig, e: int, t: float) -> BridgeConfig:
    """Return ``w`` minus the bridge ``(e, t)``."""
    lo, hi = w._slice(e)
    ts = w.times[lo:hi]
    i = int(np.searchsorted(ts, t))
    if i >= ts.size or ts[i] != t:
        raise BridgeError(f"no bridge at ({e}, {t})")
    return BridgeConfig(w.beta, w.n_edges, np.delete(w.edge_ids, lo + i), np.delete(w.times, lo + i))
