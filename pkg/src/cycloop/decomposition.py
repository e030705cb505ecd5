"""Cycle and loop decompositions of a bridge configuration.

Given bridges on the time cylinder ``V x [0, beta)``, a *cycle* follows a
vertical line upwards and jumps across every bridge it meets; a *loop* does
the same but runs downwards on the B class of a bipartite graph. Both kinds
of closed trajectory partition the cylinder.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .bridges import BridgeConfig
from .graph import Graph, GraphError

CYCLES = "cycles"
LOOPS = "loops"
MODELS = (CYCLES, LOOPS)


def orientation(g: Graph, model: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-vertex direction flags (``is_a``) and signs for ``model``."""
    if model == CYCLES:
        return np.ones(g.n_vertices, np.bool_), np.ones(g.n_vertices)
    if model == LOOPS:
        if g.bipartition is None:
            raise GraphError("loops need a bipartite graph with a bipartition")
        sign = g.sublattice_sign()
        return sign > 0, sign.astype(np.float64)
    raise ValueError(f"unknown model {model!r}")


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Closed trajectories of one configuration.

    Object ids run over ``0..n_objects-1``. ``lengths`` are in time units,
    ``windings`` are integers (``lengths / beta`` for cycles) and
    ``n_strands[c]`` counts the vertices ``x`` whose point ``(x, 0)`` lies
    on object ``c``.
    """

    model: str
    beta: float
    lengths: np.ndarray
    windings: np.ndarray
    n_strands: np.ndarray
    ev_t: np.ndarray = field(repr=False)
    ev_p: np.ndarray = field(repr=False)
    ev_m: np.ndarray = field(repr=False)
    seg_lab: np.ndarray = field(repr=False)
    is_a: np.ndarray = field(repr=False)

    @property
    def n_objects(self) -> int:
        return int(self.lengths.size)

    @property
    def n_vertices(self) -> int:
        return int(self.ev_m.size)

    def __len__(self) -> int:
        return self.n_objects

    def label_at(self, x: int, t: float) -> int:
        """Id of the object covering ``(x, s)`` for ``s`` just below ``t``."""
        return int(self.seg_lab[x, K.segment_at(self.ev_t, self.ev_m, x, t)])

    def object_at_zero(self) -> np.ndarray:
        """Id of the object through ``(x, 0)`` for every vertex."""
        last = np.maximum(self.ev_m - 1, 0)
        return self.seg_lab[np.arange(self.n_vertices), last].copy()

    def sorted_lengths(self) -> np.ndarray:
        return np.sort(self.lengths)[::-1]

    def legs(self, c: int) -> list[tuple[int, float, float, int]]:
        """Trajectory of object ``c`` as ``(vertex, start, length, direction)`` legs.

        Direction is +1 when the leg runs up in time and -1 when it runs
        down; ``start`` is where the leg begins in traversal order.
        """
        loops = self.model == LOOPS
        sx = sj = None
        for x in range(self.n_vertices):
            top = max(int(self.ev_m[x]), 1)
            hit = np.flatnonzero(self.seg_lab[x, :top] == c)
            if hit.size:
                sx, sj = x, int(hit[0])
                break
        if sx is None:
            raise KeyError(c)
        out = []
        x, j = sx, sj
        while True:
            m = int(self.ev_m[x])
            d = K.segment_length(self.ev_t, self.ev_m, self.beta, x, j)
            lo = float(self.ev_t[x, j]) if m else 0.0
            up = (not loops) or bool(self.is_a[x])
            start = lo if up else (lo + d) % self.beta
            out.append((x, start, float(d), 1 if up else -1))
            x, j = K.next_segment(self.ev_t, self.ev_p, self.ev_m, self.is_a, loops, x, j)
            if (x, j) == (sx, sj):
                return out

    def summary_csv(self) -> str:
        out = io.StringIO()
        wr = csv.writer(out, lineterminator="\n")
        wr.writerow(["cycle_id", "length", "winding", "n_strands"])
        for c in range(self.n_objects):
            wr.writerow([c, format(float(self.lengths[c]), ".17g"), int(self.windings[c]),
                         int(self.n_strands[c])])
        return out.getvalue()


def _from_arrays(model, beta, ev_t, ev_p, ev_m, seg_lab, is_a, sign, n_labels) -> Decomposition:
    length, signed, strands = K.object_stats(ev_t, ev_m, seg_lab, beta, sign, n_labels)
    used = np.flatnonzero(length > 0)
    if used.size != n_labels:
        remap = np.full(n_labels, -1, np.int64)
        remap[used] = np.arange(used.size)
        seg_lab = np.where(seg_lab >= 0, remap[np.maximum(seg_lab, 0)], -1)
        length, signed, strands = length[used], signed[used], strands[used]
    windings = np.rint(signed / beta).astype(np.int64)
    return Decomposition(model, float(beta), length, windings, strands,
                         ev_t, ev_p, ev_m, seg_lab, is_a)


def decompose(w: BridgeConfig, g: Graph, model: str = CYCLES) -> Decomposition:
    is_a, sign = orientation(g, model)
    bu, bv = w.endpoints(g)
    ev_t, ev_p, ev_m = K.build_events(g.n_vertices, bu, bv, w.times, 1)
    seg_lab = np.empty_like(ev_p)
    nseg = np.zeros(g.n_vertices + w.total_count + 1, np.int64)
    n_obj = K.label_all(ev_t, ev_p, ev_m, is_a, model == LOOPS, seg_lab, nseg)
    return _from_arrays(model, w.beta, ev_t, ev_p, ev_m, seg_lab, is_a, sign, n_obj)


def cycles(w: BridgeConfig, g: Graph) -> Decomposition:
    """Cycles of ``w``: trajectories moving up in time at every vertex."""
    return decompose(w, g, CYCLES)


def loops(w: BridgeConfig, g: Graph) -> Decomposition:
    """Loops of ``w``: time runs up on class A and down on class B."""
    return decompose(w, g, LOOPS)


def cycle_containing(dec: Decomposition, x: int) -> tuple[int, float]:
    """Id and length of the object through ``(x, 0)``."""
    c = int(dec.object_at_zero()[x])
    return c, float(dec.lengths[c])


@dataclass(frozen=True)
class ContactReport:
    """Contact measures between objects.

    ``self_zone[c]`` is the measure of edge-times whose two endpoints both
    lie on object ``c``; ``pair_zone[(a, b)]`` (with ``a < b``) the measure
    where the endpoints lie on ``a`` and ``b``. The bridge counterparts count
    bridges of the configuration instead of measure.
    """

    self_zone: np.ndarray
    self_bridges: np.ndarray
    pair_zone: dict
    pair_bridges: dict
    strands: np.ndarray

    def total_zone(self) -> float:
        return float(self.self_zone.sum() + sum(self.pair_zone.values()))

    def total_bridges(self) -> int:
        return int(self.self_bridges.sum() + sum(self.pair_bridges.values()))


def _pair_totals(a, b, weights, n_obj):
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    key = lo * n_obj + hi
    keys, inv = np.unique(key, return_inverse=True)
    sums = np.bincount(inv, weights=weights)
    return {(int(k // n_obj), int(k % n_obj)): float(s) for k, s in zip(keys, sums)}


def contact_report(w: BridgeConfig, dec: Decomposition, g: Graph) -> ContactReport:
    """Self and pair contact zones and bridges of ``dec``."""
    n_obj = dec.n_objects
    ea = g.edge_array()
    la, lb, ln, _ = K.contact_sweep(ea[:, 0], ea[:, 1], w.beta, dec.ev_t, dec.ev_m, dec.seg_lab)
    same = la == lb
    self_zone = np.bincount(la[same], weights=ln[same], minlength=n_obj)
    diff = ~same
    pair_zone = _pair_totals(la[diff], lb[diff], ln[diff], n_obj)

    bu, bv = w.endpoints(g)
    ba, bb = K.bridge_sides(dec.ev_t, dec.ev_m, dec.seg_lab, dec.model == LOOPS, bu, bv, w.times)
    same = ba == bb
    self_bridges = np.bincount(ba[same], minlength=n_obj)
    diff = ~same
    pair_bridges = {k: int(round(v)) for k, v in
                    _pair_totals(ba[diff], bb[diff], np.ones(int(diff.sum())), n_obj).items()}
    return ContactReport(self_zone, self_bridges, pair_zone, pair_bridges, dec.n_strands.copy())
