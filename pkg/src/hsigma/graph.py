"""Finite pinned weighted graphs and wired-boundary collapses."""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GraphError(ValueError):
    """Base class for graph validation failures."""


class SelfLoopError(GraphError):
    pass


class NonPositiveWeightError(GraphError):
    pass


class DisconnectedGraphError(GraphError):
    pass


class MissingPinError(GraphError):
    pass


class LevelError(GraphError):
    pass


Edge = tuple[int, int, float]


def _weight_matrix(vertices: Sequence[int], edges: Iterable[Edge]) -> np.ndarray:
    index = {v: k for k, v in enumerate(vertices)}
    if len(index) != len(vertices):
        raise GraphError("duplicate vertex ids")
    W = np.zeros((len(vertices), len(vertices)))
    for i, j, w in edges:
        i, j, w = int(i), int(j), float(w)
        if i == j:
            raise SelfLoopError(f"self-loop at vertex {i}")
        if i not in index or j not in index:
            raise GraphError(f"edge ({i}, {j}) references an unknown vertex")
        if not w > 0 or not np.isfinite(w):
            raise NonPositiveWeightError(f"edge ({i}, {j}) has weight {w}")
        a, b = index[i], index[j]
        if W[a, b] != 0 and W[a, b] != w:
            raise GraphError(f"edge ({i}, {j}) listed twice with different weights")
        W[a, b] = W[b, a] = w
    return W


def _is_connected(W: np.ndarray) -> bool:
    n = W.shape[0]
    seen = {0}
    stack = [0]
    while stack:
        a = stack.pop()
        for b in np.flatnonzero(W[a]):
            if b not in seen:
                seen.add(int(b))
                stack.append(int(b))
    return len(seen) == n


@dataclass(frozen=True)
class PinnedGraph:
    """Weighted graph on ``V ∪ {pin}`` with fields clamped to zero at the pin.

    ``vertices`` always lists the pin first, so index 0 of every field vector is
    the pin and ``[1:]`` is the interior set V.  ``weights`` is the dense
    symmetric matrix W in that order, with zeros off the edge set.
    """

    vertices: tuple[int, ...]
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.weights.setflags(write=False)

    @property
    def pin(self) -> int:
        return self.vertices[0]

    @property
    def interior(self) -> tuple[int, ...]:
        return self.vertices[1:]

    @property
    def n(self) -> int:
        """Number of vertices including the pin."""
        return len(self.vertices)

    @property
    def index(self) -> dict[int, int]:
        return {v: k for k, v in enumerate(self.vertices)}

    def edges(self) -> list[Edge]:
        iu, ju = np.nonzero(np.triu(self.weights))
        return [(self.vertices[a], self.vertices[b], float(self.weights[a, b])) for a, b in zip(iu, ju)]

    def edge_index(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Positional endpoints and weights of every undirected edge."""
        iu, ju = np.nonzero(np.triu(self.weights))
        return iu, ju, self.weights[iu, ju]

    @property
    def interior_weights(self) -> np.ndarray:
        """W restricted to V x V."""
        return self.weights[1:, 1:]

    @property
    def pin_weights(self) -> np.ndarray:
        """The vector (W_{i,pin})_{i in V}."""
        return self.weights[1:, 0]

    def weight(self, i: int, j: int) -> float:
        idx = self.index
        return float(self.weights[idx[i], idx[j]])

    def with_weights(self, weights: np.ndarray) -> PinnedGraph:
        """Same vertex set, new weight matrix (must keep the sparsity pattern)."""
        weights = np.array(weights, dtype=float)
        if not np.array_equal(weights > 0, self.weights > 0):
            raise GraphError("weight rescaling must preserve the edge set")
        return PinnedGraph(self.vertices, weights)

    def to_json(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "pin": self.pin,
            "edges": [[i, j, w] for i, j, w in self.edges()],
        }


def build_pinned_graph(vertices: Iterable[int], pin: int, edges: Iterable[Edge]) -> PinnedGraph:
    """Validate the inputs and return a :class:`PinnedGraph`.

    Raises a distinct :class:`GraphError` subclass for a missing pin, a
    self-loop, a non-positive weight and a disconnected graph.
    """
    vertices = [int(v) for v in vertices]
    pin = int(pin)
    if pin not in vertices:
        raise MissingPinError(f"pin {pin} is not a vertex")
    ordered = [pin] + [v for v in vertices if v != pin]
    if len(ordered) < 2:
        raise GraphError("the interior vertex set V must be non-empty")
    W = _weight_matrix(ordered, edges)
    if not _is_connected(W):
        raise DisconnectedGraphError("graph is not connected")
    return PinnedGraph(tuple(ordered), W)


@dataclass(frozen=True)
class HostGraph:
    """Unpinned weighted graph standing in for a truncated infinite graph."""

    vertices: tuple[int, ...]
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.weights.setflags(write=False)

    @property
    def index(self) -> dict[int, int]:
        return {v: k for k, v in enumerate(self.vertices)}

    def neighbors(self, v: int) -> set[int]:
        row = self.weights[self.index[v]]
        return {self.vertices[k] for k in np.flatnonzero(row)}

    def edges(self) -> list[Edge]:
        iu, ju = np.nonzero(np.triu(self.weights))
        return [(self.vertices[a], self.vertices[b], float(self.weights[a, b])) for a, b in zip(iu, ju)]


def build_host_graph(vertices: Iterable[int], edges: Iterable[Edge]) -> HostGraph:
    vertices = [int(v) for v in vertices]
    W = _weight_matrix(vertices, edges)
    if not vertices or not _is_connected(W):
        raise DisconnectedGraphError("host graph is empty or not connected")
    return HostGraph(tuple(vertices), W)


@dataclass(frozen=True)
class HostExhaustion:
    """Nested levels V_1 ⊂ ... ⊂ V_m inside a finite host graph.

    Levels are numbered from 1 as in ``wired_collapse(exhaustion, n)``.
    """

    host: HostGraph
    levels: tuple[frozenset[int], ...]

    def __post_init__(self):
        hv = set(self.host.vertices)
        if not self.levels:
            raise LevelError("an exhaustion needs at least one level")
        prev: frozenset[int] = frozenset()
        for k, level in enumerate(self.levels, start=1):
            if not level:
                raise LevelError(f"level {k} is empty")
            if not level < hv:
                raise LevelError(f"level {k} must be a strict subset of the host vertices")
            if not prev < level:
                raise LevelError(f"level {k} does not strictly contain level {k - 1}")
            prev = level
        last = self.levels[-1]
        # every neighbor of V_m lies in the host by construction; the host must
        # also reach outside V_m so that the collapsed pin is attached
        if not any(self.host.neighbors(v) - last for v in last):
            raise LevelError("largest level has no boundary inside the host")

    @property
    def m(self) -> int:
        return len(self.levels)

    def pin_id(self, n: int) -> int:
        """Reserved id of the collapsed boundary vertex at level ``n``."""
        return min(self.host.vertices) - n

    def level_vertex(self, n: int, v: int) -> int:
        """Image of host vertex ``v`` in the level-``n`` collapse."""
        return v if v in self.levels[n - 1] else self.pin_id(n)

    def to_json(self) -> dict:
        return {
            "host": {
                "vertices": list(self.host.vertices),
                "edges": [[i, j, w] for i, j, w in self.host.edges()],
            },
            "levels": [sorted(level) for level in self.levels],
        }


def build_exhaustion(host: HostGraph, levels: Iterable[Iterable[int]]) -> HostExhaustion:
    return HostExhaustion(host, tuple(frozenset(int(v) for v in level) for level in levels))


def wired_collapse(exhaustion: HostExhaustion, n: int) -> PinnedGraph:
    """Collapse every host vertex outside V_n into one pin δ_n.

    Weights inside V_n are kept; ``W[i, δ_n]`` is the total host weight from
    ``i`` to the complement of V_n.
    """
    if not 1 <= n <= exhaustion.m:
        raise LevelError(f"level {n} outside 1..{exhaustion.m}")
    host = exhaustion.host
    level = exhaustion.levels[n - 1]
    hidx = host.index
    inside = [v for v in host.vertices if v in level]
    outside = [hidx[v] for v in host.vertices if v not in level]
    pos = [hidx[v] for v in inside]
    W = np.zeros((len(inside) + 1, len(inside) + 1))
    W[1:, 1:] = host.weights[np.ix_(pos, pos)]
    boundary = host.weights[np.ix_(pos, outside)].sum(axis=1)
    W[1:, 0] = W[0, 1:] = boundary
    if not _is_connected(W):
        raise DisconnectedGraphError(f"wired collapse at level {n} is disconnected")
    return PinnedGraph((exhaustion.pin_id(n), *inside), W)


def _edges_from_json(raw) -> list[Edge]:
    return [(int(i), int(j), float(w)) for i, j, w in raw]


def graph_from_json(doc: dict) -> PinnedGraph:
    return build_pinned_graph(doc["vertices"], doc["pin"], _edges_from_json(doc["edges"]))


def exhaustion_from_json(doc: dict) -> HostExhaustion:
    host = doc["host"]
    return build_exhaustion(
        build_host_graph(host["vertices"], _edges_from_json(host["edges"])), doc["levels"]
    )


def load_graph(path: str | Path) -> PinnedGraph:
    return graph_from_json(json.loads(Path(path).read_text()))


def load_exhaustion(path: str | Path) -> HostExhaustion:
    return exhaustion_from_json(json.loads(Path(path).read_text()))


# Small named graphs used by tests and the default suites.


def single_edge(w: float = 1.0) -> PinnedGraph:
    return build_pinned_graph([0, 1], 0, [(0, 1, w)])


def path_graph(n_interior: int, w: float = 1.0) -> PinnedGraph:
    """Path δ=0 – 1 – ... – n_interior."""
    verts = list(range(n_interior + 1))
    return build_pinned_graph(verts, 0, [(k, k + 1, w) for k in range(n_interior)])


def triangle(w: float = 1.0) -> PinnedGraph:
    return build_pinned_graph([0, 1, 2], 0, [(0, 1, w), (1, 2, w), (0, 2, w)])


def path_exhaustion(radius: int, levels: Sequence[Sequence[int]], w: float = 1.0) -> HostExhaustion:
    """Host path on ``-radius..radius`` with the given levels."""
    verts = list(range(-radius, radius + 1))
    host = build_host_graph(verts, [(k, k + 1, w) for k in verts[:-1]])
    return build_exhaustion(host, levels)
