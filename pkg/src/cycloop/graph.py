"""Finite undirected graphs with dense integer vertices.

Vertices are ``0..n_vertices-1``. Edges are stored once as ``(u, v)`` with
``u < v`` and kept sorted, so two graphs built from the same edge set compare
equal. An optional bipartition assigns each vertex to class 0 (A) or 1 (B).
"""

from __future__ import annotations

import itertools
import json
import warnings
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

A, B = 0, 1


class GraphError(ValueError):
    """Raised for malformed graphs or invalid bipartitions."""


def _canonical_edges(edges: Iterable[Sequence[int]], n_vertices: int) -> tuple[tuple[int, int], ...]:
    seen = set()
    dropped = 0
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < n_vertices and 0 <= v < n_vertices):
            raise GraphError(f"edge ({u}, {v}) has an endpoint outside 0..{n_vertices - 1}")
        if u == v:
            raise GraphError(f"self-edge at vertex {u}")
        key = (u, v) if u < v else (v, u)
        if key in seen:
            dropped += 1
            continue
        seen.add(key)
    if dropped:
        warnings.warn(f"collapsed {dropped} duplicate edge(s)", stacklevel=3)
    return tuple(sorted(seen))


@dataclass(frozen=True)
class Graph:
    """Immutable simple graph.

    Attributes:
        n_vertices: Number of vertices.
        edges: Sorted tuple of ``(u, v)`` pairs with ``u < v``.
        bipartition: Tuple of 0/1 labels (0 = A, 1 = B) or ``None``.
    """

    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    bipartition: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n_vertices < 1:
            raise GraphError("a graph needs at least one vertex")
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            try:
                canon = _canonical_edges(self.edges, self.n_vertices)
            except UserWarning as exc:
                raise GraphError(str(exc)) from None
        object.__setattr__(self, "edges", canon)
        if self.bipartition is not None:
            part = tuple(int(c) for c in self.bipartition)
            if len(part) != self.n_vertices or any(c not in (A, B) for c in part):
                raise GraphError("bipartition must give a 0/1 label for every vertex")
            for u, v in canon:
                if part[u] == part[v]:
                    raise GraphError(f"edge ({u}, {v}) does not cross the bipartition")
            object.__setattr__(self, "bipartition", part)

    @classmethod
    def from_edges(cls, n_vertices: int, edges, bipartition=None) -> "Graph":
        """Build a graph, collapsing duplicate edges with a warning."""
        return cls(n_vertices, _canonical_edges(edges, n_vertices), bipartition)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def is_bipartite(self) -> bool:
        return self.bipartition is not None

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def max_degree(self) -> int:
        return int(self.degrees().max()) if self.edges else 0

    def edge_array(self) -> np.ndarray:
        """Edges as an ``(|E|, 2)`` int64 array."""
        return np.array(self.edges, dtype=np.int64).reshape(-1, 2)

    def edge_index(self, u: int, v: int) -> int:
        """Position of edge ``{u, v}`` in ``edges``."""
        key = (u, v) if u < v else (v, u)
        lookup = self.__dict__.get("_index")
        if lookup is None:
            lookup = {e: i for i, e in enumerate(self.edges)}
            object.__setattr__(self, "_index", lookup)
        try:
            return lookup[key]
        except KeyError:
            raise GraphError(f"({u}, {v}) is not an edge") from None

    def neighbours(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def with_bipartition(self) -> "Graph":
        """Return a copy with a bipartition attached; raises if none exists."""
        part = find_bipartition(self)
        if part is None:
            raise GraphError("graph is not bipartite")
        return Graph(self.n_vertices, self.edges, part)

    def sublattice_sign(self) -> np.ndarray:
        """+1 on class A, -1 on class B."""
        if self.bipartition is None:
            raise GraphError("graph has no bipartition")
        return 1 - 2 * np.asarray(self.bipartition, dtype=np.int64)

    def to_dict(self) -> dict:
        return {
            "vertices": self.n_vertices,
            "edges": [list(e) for e in self.edges],
            "bipartition": None if self.bipartition is None else list(self.bipartition),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Graph":
        return cls(int(d["vertices"]), tuple(tuple(e) for e in d["edges"]), d.get("bipartition"))

    @classmethod
    def from_json(cls, text: str) -> "Graph":
        return cls.from_dict(json.loads(text))


def find_bipartition(g: Graph) -> tuple[int, ...] | None:
    """Two-colour ``g`` by breadth-first search; ``None`` if an odd cycle exists."""
    colour = [-1] * g.n_vertices
    adj = g.neighbours()
    for root in range(g.n_vertices):
        if colour[root] >= 0:
            continue
        colour[root] = A
        queue = deque([root])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if colour[y] < 0:
                    colour[y] = 1 - colour[x]
                    queue.append(y)
                elif colour[y] == colour[x]:
                    return None
    return tuple(colour)


def cubic_lattice(d: int, n: int, periodic: bool = False, bipartition: bool = True) -> Graph:
    """Nearest-neighbour lattice on ``{0..n-1}^d`` in row-major vertex order.

    With ``periodic`` the coordinates wrap. The parity colouring is attached
    when requested and consistent; an odd periodic side has no valid
    colouring, so it is omitted with a warning.
    """
    if not 1 <= d <= 4:
        raise GraphError("dimension must be between 1 and 4")
    if n < 1:
        raise GraphError("side length must be positive")
    shape = (n,) * d
    coords = list(itertools.product(range(n), repeat=d))
    index = {c: i for i, c in enumerate(coords)}
    raw = []
    for c in coords:
        for axis in range(d):
            nxt = list(c)
            nxt[axis] += 1
            if nxt[axis] == n:
                if not periodic:
                    continue
                nxt[axis] = 0
            if tuple(nxt) != c:
                raw.append((index[c], index[tuple(nxt)]))
    n_vertices = int(np.prod(shape))
    edges = _canonical_edges(raw, n_vertices)
    part = None
    if bipartition:
        if periodic and n % 2 == 1 and n > 1:
            warnings.warn(f"periodic lattice with odd side {n} is not bipartite; bipartition omitted",
                          stacklevel=2)
        else:
            part = tuple(sum(c) % 2 for c in coords)
    return Graph(n_vertices, edges, part)


def complete_graph(n: int) -> Graph:
    if n < 2:
        raise GraphError("complete graph needs n >= 2")
    edges = tuple(itertools.combinations(range(n), 2))
    return Graph(n, edges, (A, B) if n == 2 else None)


def path_graph(n: int) -> Graph:
    if n < 2:
        raise GraphError("path needs n >= 2")
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)), tuple(i % 2 for i in range(n)))


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise GraphError("cycle needs n >= 3")
    edges = tuple((i, (i + 1) % n) for i in range(n))
    g = Graph(n, edges)
    return g.with_bipartition() if n % 2 == 0 else g


def single_edge() -> Graph:
    return path_graph(2)


def parse_graph_spec(spec: str) -> Graph:
    """Parse a short textual graph description.

    Accepted forms: ``edge``, ``triangle``, ``path:N``, ``cycle:N``,
    ``complete:N``, ``lattice:D:N`` with an optional ``:periodic`` suffix,
    and ``file:PATH`` pointing at a graph JSON document.
    """
    head, *rest = spec.split(":")
    try:
        if head == "edge" and not rest:
            return single_edge()
        if head == "triangle" and not rest:
            return complete_graph(3)
        if head == "path":
            return path_graph(int(rest[0]))
        if head == "cycle":
            return cycle_graph(int(rest[0]))
        if head == "complete":
            return complete_graph(int(rest[0]))
        if head == "lattice":
            periodic = len(rest) > 2 and rest[2] == "periodic"
            return cubic_lattice(int(rest[0]), int(rest[1]), periodic)
        if head == "file":
            with open(":".join(rest)) as fh:
                return Graph.from_json(fh.read())
    except (IndexError, ValueError) as exc:
        raise GraphError(f"bad graph spec {spec!r}: {exc}") from None
    raise GraphError(f"unknown graph spec {spec!r}")
