"""Markov chains for the measures proportional to ``theta ** (#objects) * rho``.

Two samplers share one incremental state:

* ``mh_step``: discrete-time Metropolis-Hastings with single-bridge insertion
  and deletion proposals.
* ``ct_step``: the continuous-time birth-death dynamics in which a bridge
  appears at rate ``sqrt(theta) ** delta`` and disappears at rate
  ``sqrt(theta) ** delta`` (``delta = +1`` for a split, ``-1`` for a merge),
  simulated by thinning against the constant rate ``max(sqrt(theta), 1/sqrt(theta))``.

Labels of the closed trajectories are maintained incrementally: a merge
relabels the smaller object, a split retraces one of the two halves.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import _kernels as K
from .bridges import BridgeConfig, sample_rho
from .decomposition import CYCLES, LOOPS, Decomposition, _from_arrays, decompose, orientation
from .graph import Graph

_CHUNK = 1 << 15


class ChainError(RuntimeError):
    """Raised when the incremental labelling disagrees with a recomputation."""


@dataclass(frozen=True)
class ChainSample:
    """Observables of one emitted state.

    ``lengths`` are sorted decreasingly and ``strands``/``windings`` follow
    the same order. ``vertex_lengths[x]`` is the length of the object through
    ``(x, 0)``.
    """

    step: int
    time: float
    n_bridges: int
    lengths: np.ndarray
    strands: np.ndarray
    windings: np.ndarray
    vertex_lengths: np.ndarray

    @property
    def n_objects(self) -> int:
        return int(self.lengths.size)


class ChainState:
    """Bridge configuration plus its incrementally maintained decomposition."""

    def __init__(self, g: Graph, beta: float, theta: float, model: str = CYCLES,
                 omega: BridgeConfig | None = None, debug: bool = False):
        if not theta > 0:
            raise ValueError("theta must be positive")
        if not beta > 0:
            raise ValueError("beta must be positive")
        if g.n_edges == 0:
            raise ValueError("graph has no edges")
        self.graph = g
        self.beta = float(beta)
        self.theta = float(theta)
        self.model = model
        self.debug = debug
        self.is_a, self.sign = orientation(g, model)
        ea = g.edge_array()
        self._eu = np.ascontiguousarray(ea[:, 0])
        self._ev = np.ascontiguousarray(ea[:, 1])
        self.clock = np.zeros(1)
        self._iv = np.zeros(K.IV_SIZE, np.int64)
        self._load(omega if omega is not None else BridgeConfig.empty(beta, g.n_edges))

    # -- storage ------------------------------------------------------------------

    def _load(self, omega: BridgeConfig, cap: int | None = None, bcap: int | None = None):
        g = self.graph
        if omega.beta != self.beta or omega.n_edges != g.n_edges:
            raise ValueError("configuration does not match the chain's graph and beta")
        k = omega.total_count
        bu, bv = omega.endpoints(g)
        expected_deg = 2 * self.beta * g.max_degree() * max(self.theta, 1.0)
        cap = cap or int(max(16, 2 * expected_deg + 16))
        bcap = bcap or int(max(64, 2 * k + 16, 3 * self.beta * g.n_edges * max(self.theta, 1.0) + 64))
        ev_t, ev_p, ev_m = K.build_events(g.n_vertices, bu, bv, omega.times, cap)
        lcap = g.n_vertices + bcap + 1
        seg_lab = np.full(ev_p.shape, -1, np.int64)
        nseg = np.zeros(lcap, np.int64)
        n_obj = K.label_all(ev_t, ev_p, ev_m, self.is_a, self.model == LOOPS, seg_lab, nseg)
        self._ev_t, self._ev_p, self._ev_m, self._seg_lab, self._nseg = ev_t, ev_p, ev_m, seg_lab, nseg
        self._free = np.zeros(lcap, np.int64)
        free = np.arange(lcap - 1, n_obj - 1, -1, dtype=np.int64)
        self._free[:free.size] = free
        self._br_u = np.zeros(bcap, np.int64)
        self._br_v = np.zeros(bcap, np.int64)
        self._br_e = np.zeros(bcap, np.int64)
        self._br_t = np.zeros(bcap)
        self._br_u[:k], self._br_v[:k] = bu, bv
        self._br_e[:k], self._br_t[:k] = omega.edge_ids, omega.times
        self._iv[K.NB] = k
        self._iv[K.NOBJ] = n_obj
        self._iv[K.NFREE] = free.size

    def _grow(self):
        """Double storage, keeping labels, free ids and bridge order intact."""
        n, cap = self._ev_t.shape
        k = int(self._iv[K.NB])
        new_cap, new_bcap = 2 * cap, 2 * self._br_u.size
        lcap_old = self._nseg.size
        lcap = n + new_bcap + 1

        def widen(a, fill):
            out = np.full((n, new_cap), fill, a.dtype)
            out[:, :cap] = a
            return out

        self._ev_t = widen(self._ev_t, 0.0)
        self._ev_p = widen(self._ev_p, 0)
        self._seg_lab = widen(self._seg_lab, -1)
        nseg = np.zeros(lcap, np.int64)
        nseg[:lcap_old] = self._nseg
        self._nseg = nseg
        nf = int(self._iv[K.NFREE])
        free = np.zeros(lcap, np.int64)
        extra = np.arange(lcap - 1, lcap_old - 1, -1, dtype=np.int64)
        free[:extra.size] = extra
        free[extra.size:extra.size + nf] = self._free[:nf]
        self._free = free
        self._iv[K.NFREE] = nf + extra.size
        for name in ("_br_u", "_br_v", "_br_e", "_br_t"):
            old = getattr(self, name)
            new = np.zeros(new_bcap, old.dtype)
            new[:k] = old[:k]
            setattr(self, name, new)

    def _advance(self, rows: np.ndarray, continuous: bool, t_stop: float = math.inf) -> tuple[int, bool]:
        """Consume rows of uniforms; returns (rows used, whether t_stop was reached)."""
        i = 0
        while i < rows.shape[0]:
            i, status = K.chain_run(
                rows, i, rows.shape[0], continuous, t_stop, self.debug, self._eu, self._ev,
                self.beta, self.theta, self.model == LOOPS, self.is_a, self._ev_t, self._ev_p,
                self._ev_m, self._seg_lab, self._nseg, self._free, self._br_u, self._br_v,
                self._br_e, self._br_t, self._iv, self.clock)
            if status == K.NEED_GROW:
                self._grow()
            elif status == K.MISMATCH:
                raise ChainError(f"incremental labels diverged at step {self.step_count}")
            elif status == K.TIME_UP:
                return i, True
        return i, False

    # -- public view ----------------------------------------------------------------

    @property
    def step_count(self) -> int:
        return int(self._iv[K.STEPS])

    @property
    def accept_count(self) -> int:
        return int(self._iv[K.ACCEPTS])

    @property
    def n_bridges(self) -> int:
        return int(self._iv[K.NB])

    @property
    def n_objects(self) -> int:
        return int(self._iv[K.NOBJ])

    @property
    def time(self) -> float:
        return float(self.clock[0])

    @property
    def omega(self) -> BridgeConfig:
        k = self.n_bridges
        return BridgeConfig.from_arrays(self.beta, self.graph.n_edges, self._br_e[:k], self._br_t[:k])

    @property
    def dec(self) -> Decomposition:
        n = self.graph.n_vertices
        m = int(self._ev_m.max()) if n else 0
        cap = max(m, 1)
        return _from_arrays(self.model, self.beta, self._ev_t[:, :cap].copy(), self._ev_p[:, :cap].copy(),
                            self._ev_m.copy(), self._seg_lab[:, :cap].copy(), self.is_a, self.sign,
                            self._nseg.size)

    def insert_delta(self, e: int, t: float) -> int:
        """Change in the object count if a bridge were added at ``(e, t)``."""
        return int(K.insert_delta(self._ev_t, self._ev_m, self._seg_lab, self._eu[e], self._ev[e], t))

    def remove_delta(self, b: int) -> int:
        """Change in the object count if bridge number ``b`` were removed."""
        return int(K.remove_delta(self._ev_t, self._ev_m, self._seg_lab, self.model == LOOPS,
                                  self._br_u[b], self._br_v[b], self._br_t[b]))

    def bridge(self, b: int) -> tuple[int, float]:
        return int(self._br_e[b]), float(self._br_t[b])

    def is_consistent(self) -> bool:
        """Compare maintained labels and object count with a full recomputation."""
        return bool(K.labels_consistent(self._ev_t, self._ev_p, self._ev_m, self.is_a,
                                        self.model == LOOPS, self._seg_lab, self._nseg, self.n_objects))

    def sample(self) -> ChainSample:
        length, signed, strands = K.object_stats(self._ev_t, self._ev_m, self._seg_lab, self.beta,
                                                 self.sign, self._nseg.size)
        live = self._nseg > 0
        length, signed, strands = length[live], signed[live], strands[live]
        order = np.argsort(-length, kind="stable")
        vl = K.vertex_lengths(self._ev_t, self._ev_m, self._seg_lab, self.beta, self._nseg.size)
        return ChainSample(self.step_count, self.time, self.n_bridges, length[order], strands[order],
                           np.rint(signed[order] / self.beta).astype(np.int64), vl)


def mh_step(s: ChainState, rng: np.random.Generator) -> ChainState:
    """One Metropolis-Hastings proposal (insert or delete with probability 1/2 each)."""
    s._advance(rng.random((1, 5)), continuous=False)
    return s


def ct_step(s: ChainState, rng: np.random.Generator) -> tuple[ChainState, float]:
    """One candidate event of the continuous-time chain; returns the holding time."""
    before = s.time
    s._advance(rng.random((1, 5)), continuous=True)
    return s, s.time - before


def mh_acceptance(theta: float, beta: float, n_edges: int, k: int, delta: int, insert: bool) -> float:
    """Metropolis-Hastings acceptance probability of a single proposal."""
    if insert:
        return min(1.0, theta ** delta * beta * n_edges / (k + 1))
    return min(1.0, theta ** delta * k / (beta * n_edges))


class _UniformStream:
    """Rows of five uniforms drawn in fixed-size chunks for reproducibility."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.buf = np.empty((0, 5))
        self.pos = 0

    def peek(self) -> np.ndarray:
        if self.pos >= self.buf.shape[0]:
            self.buf = self.rng.random((_CHUNK, 5))
            self.pos = 0
        return self.buf[self.pos:]

    def take(self, n: int) -> np.ndarray:
        rows = self.peek()[:n]
        self.pos += rows.shape[0]
        return rows


def default_burn_in(g: Graph, beta: float) -> int:
    return int(math.ceil(10 * beta * g.n_edges))


def default_thin(g: Graph, beta: float) -> int:
    return max(1, int(math.ceil(beta * g.n_edges)))


def run_chain(g: Graph, beta: float, theta: float, model: str, n_steps, burn_in=None, thin=None,
              seed=None, sampler: str = "mh", debug: bool = False, check_every: int | None = None,
              omega: BridgeConfig | None = None) -> Iterator[ChainSample]:
    """Yield thinned post-burn-in samples.

    For ``sampler="mh"`` the arguments count proposals. For ``"ct"`` they are
    continuous times: the state is recorded at ``burn_in + j * thin`` up to
    ``n_steps``, which gives time-weighted statistics. ``"direct"`` (theta = 1
    only) yields ``(n_steps - burn_in) // thin`` independent Poisson samples.
    ``check_every`` compares the incremental labels with a recomputation at
    that many emitted samples.
    """
    if model == LOOPS and g.bipartition is None:
        raise ValueError("loops need a bipartite graph")
    if model not in (CYCLES, LOOPS):
        raise ValueError(f"unknown model {model!r}")
    if seed is None:
        raise ValueError("a seed is required")
    burn_in = default_burn_in(g, beta) if burn_in is None else burn_in
    thin = default_thin(g, beta) if thin is None else thin
    if not n_steps > burn_in:
        raise ValueError("n_steps must exceed burn_in")
    if thin <= 0:
        raise ValueError("thin must be positive")
    rng = np.random.default_rng(seed)

    if sampler == "direct":
        if theta != 1:
            raise ValueError("direct sampling is only exact for theta = 1")
        yield from _direct(g, beta, model, int((n_steps - burn_in) // thin), rng)
        return

    state = ChainState(g, beta, theta, model, omega=omega, debug=debug)
    stream = _UniformStream(rng)
    emitted = 0

    def checked(smp):
        if check_every and emitted % check_every == 0 and not state.is_consistent():
            raise ChainError(f"incremental labels diverged before step {state.step_count}")
        return smp

    if sampler == "mh":
        target = int(burn_in)
        while target <= n_steps:
            while state.step_count < target:
                rows = stream.take(target - state.step_count)
                state._advance(rows, continuous=False)
            yield checked(state.sample())
            emitted += 1
            target += int(thin)
    elif sampler == "ct":
        target = float(burn_in)
        while target <= n_steps:
            done = False
            while not done:
                used, done = state._advance(stream.peek(), continuous=True, t_stop=target)
                stream.pos += used
            yield checked(state.sample())
            emitted += 1
            target = float(burn_in) + emitted * float(thin)
    else:
        raise ValueError(f"unknown sampler {sampler!r}")


def _direct(g: Graph, beta: float, model: str, n: int, rng) -> Iterator[ChainSample]:
    for i in range(n):
        w = sample_rho(g, beta, rng)
        d = decompose(w, g, model)
        order = np.argsort(-d.lengths, kind="stable")
        vl = d.lengths[d.object_at_zero()]
        yield ChainSample(i, 0.0, w.total_count, d.lengths[order], d.n_strands[order],
                          d.windings[order], vl)


def samples_csv(samples, width: int = 10) -> str:
    """CSV stream ``step, n_bridges, n_objects, len_1..len_width``."""
    out = io.StringIO()
    wr = csv.writer(out, lineterminator="\n")
    wr.writerow(["step", "n_bridges", "n_objects"] + [f"len_{i + 1}" for i in range(width)])
    for s in samples:
        top = list(s.lengths[:width]) + [0.0] * max(0, width - s.lengths.size)
        wr.writerow([s.step, s.n_bridges, s.n_objects] + [format(float(x), ".17g") for x in top])
    return out.getvalue()
