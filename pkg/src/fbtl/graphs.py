"""Relation graphs over items, their independent sets, and edge-cover sets.

Items are 0-based internally. The text format used by :func:`save_graph` and
:func:`load_graph` is 1-based::

    n 5
    independent 1 3 5
    1 2
    2 3
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import networkx as nx
import numpy as np

from .errors import DomainError, ParameterError, ParseError

__all__ = [
    "FAMILIES",
    "RelationGraph",
    "EdgeCoverSets",
    "gen_family",
    "greedy_independent_set",
    "tree_size",
    "edge_cover_sets",
    "overlap_stats",
    "pair_arrays",
    "save_graph",
    "load_graph",
]

FAMILIES = (
    "disconnected",
    "clique",
    "r_disconnected_cliques",
    "d_regular",
    "k_ary_tree",
    "star",
    "cycle",
)


def _norm_edge(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class RelationGraph:
    """Undirected graph on ``n`` items with a fixed independent set."""

    n: int
    edges: frozenset
    independent_set: tuple
    family: str | None = None
    param: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"n must be positive, got {self.n}")
        edges = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ParameterError(f"self-loop at item {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise DomainError(f"edge ({i}, {j}) outside [0, {self.n})")
            edges.add(_norm_edge(i, j))
        object.__setattr__(self, "edges", frozenset(edges))
        ind = tuple(int(k) for k in self.independent_set)
        if len(set(ind)) != len(ind):
            raise ParameterError("independent set has repeated items")
        if any(not 0 <= k < self.n for k in ind):
            raise DomainError("independent set item outside the graph")
        for a, b in itertools.combinations(ind, 2):
            if _norm_edge(a, b) in edges:
                raise ParameterError(f"items {a} and {b} are adjacent but both independent")
        object.__setattr__(self, "independent_set", ind)

    @property
    def alpha(self) -> int:
        return len(self.independent_set)

    @cached_property
    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj

    @property
    def max_degree(self) -> int:
        return int(self.adjacency.sum(axis=1).max()) if self.n else 0

    def neighbors(self, i: int) -> set[int]:
        return set(np.flatnonzero(self.adjacency[i]).tolist())

    @cached_property
    def closed_basis_neighborhood(self) -> np.ndarray:
        """Boolean ``n x alpha`` matrix: ``[i, k]`` iff basis item k is i or adjacent to i."""
        ind = np.asarray(self.independent_set, dtype=int)
        out = self.adjacency[:, ind].copy()
        out[ind, np.arange(len(ind))] = True
        return out

    def basis_position(self, item: int) -> int:
        try:
            return self.independent_set.index(item)
        except ValueError:
            raise DomainError(f"item {item} is not in the independent set") from None


def greedy_independent_set(n: int, edges) -> tuple[int, ...]:
    """Maximal independent set picked greedily by ascending item index."""
    blocked = np.zeros(n, dtype=bool)
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    chosen = []
    for i in range(n):
        if not blocked[i]:
            chosen.append(i)
            blocked[i] = True
            blocked[adj[i]] = True
    return tuple(chosen)


def tree_size(k: int, height: int) -> int:
    """Number of nodes in a full k-ary tree of the given height."""
    return sum(k**level for level in range(height + 1))


def _tree_height(k: int, n: int) -> int:
    h = 0
    while tree_size(k, h) < n:
        h += 1
    if tree_size(k, h) != n:
        raise ParameterError(f"n={n} is not the size of a full {k}-ary tree")
    return h


def gen_family(family: str, n: int, param: int | None = None, seed: int | None = 0) -> RelationGraph:
    """Build a relation graph from one of the named families.

    ``param`` is ``r`` for ``r_disconnected_cliques``, ``d`` for ``d_regular``
    and ``k`` for ``k_ary_tree``; other families ignore it. Only
    ``d_regular`` uses ``seed``.
    """
    if n < 1:
        raise ParameterError(f"n must be positive, got {n}")
    edges: list[tuple[int, int]] = []
    if family == "disconnected":
        ind = tuple(range(n))
    elif family == "clique":
        edges = list(itertools.combinations(range(n), 2))
        ind = (0,)
    elif family == "r_disconnected_cliques":
        r = _require(param, "r")
        if r < 1 or n % r:
            raise ParameterError(f"r={r} must divide n={n}")
        size = n // r
        for c in range(r):
            edges.extend(itertools.combinations(range(c * size, (c + 1) * size), 2))
        ind = tuple(c * size for c in range(r))
    elif family == "d_regular":
        d = _require(param, "d")
        if d < 0 or d >= n or (n * d) % 2:
            raise ParameterError(f"no {d}-regular graph on {n} nodes")
        g = nx.random_regular_graph(d, n, seed=seed)
        edges = [_norm_edge(i, j) for i, j in g.edges()]
        ind = greedy_independent_set(n, edges)
    elif family == "k_ary_tree":
        k = _require(param, "k")
        if k < 2:
            raise ParameterError("k_ary_tree needs k >= 2")
        h = _tree_height(k, n)
        depth = np.zeros(n, dtype=int)
        for child in range(1, n):
            parent = (child - 1) // k
            edges.append((parent, child))
            depth[child] = depth[parent] + 1
        # the depth class containing the leaves is a maximum independent set
        ind = tuple(np.flatnonzero(depth % 2 == h % 2).tolist())
    elif family == "star":
        edges = [(0, j) for j in range(1, n)]
        ind = tuple(range(1, n)) if n > 1 else (0,)
    elif family == "cycle":
        if n < 3:
            raise ParameterError("cycle needs n >= 3")
        edges = [_norm_edge(i, (i + 1) % n) for i in range(n)]
        ind = tuple(range(0, n - 1 if n % 2 else n, 2))
    else:
        raise ParameterError(f"unknown family {family!r}")
    return RelationGraph(n, frozenset(edges), ind, family=family, param=param)


def _require(param, name):
    if param is None:
        raise ParameterError(f"family parameter {name} is required")
    return int(param)


def pair_arrays(n: int) -> tuple[np.ndarray, np.ndarray]:
    """All unordered pairs ``i < j`` in lexicographic order."""
    return np.triu_indices(n, 1)


def _mask_to_int(mask: np.ndarray) -> int:
    return int.from_bytes(np.packbits(mask, bitorder="little").tobytes(), "little")


def _int_to_mask(bits: int, length: int) -> np.ndarray:
    raw = bits.to_bytes((length + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:length].astype(bool)


@dataclass(frozen=True)
class EdgeCoverSets:
    """Per-basis-item candidate pair sets, stored as bitmasks over all pairs.

    Bit ``t`` of ``masks[k]`` refers to the ``t``-th pair of
    :func:`pair_arrays`; ``k`` is the position of the item in the
    independent set.
    """

    n: int
    independent_set: tuple
    masks: tuple = field(repr=False)
    max_degree: int = 0

    @property
    def alpha(self) -> int:
        return len(self.independent_set)

    @property
    def sizes(self) -> dict[int, int]:
        """``n_k`` keyed by basis item."""
        return {k: m.bit_count() for k, m in zip(self.independent_set, self.masks)}

    def mask(self, item: int) -> int:
        try:
            return self.masks[self.independent_set.index(item)]
        except ValueError:
            raise DomainError(f"item {item} is not in the independent set") from None

    def members(self, item: int) -> frozenset:
        """The pair set ``M_k`` of basis item ``item``."""
        rows, cols = pair_arrays(self.n)
        sel = _int_to_mask(self.mask(item), len(rows))
        return frozenset(zip(rows[sel].tolist(), cols[sel].tolist()))

    @property
    def per_node(self) -> dict[int, frozenset]:
        return {k: self.members(k) for k in self.independent_set}


def edge_cover_sets(graph: RelationGraph) -> EdgeCoverSets:
    """Pairs whose closed neighbourhood reaches each basis item.

    ``(i, j)`` belongs to ``M_k`` iff ``k`` equals, or is adjacent to, ``i``
    or ``j``.
    """
    rows, cols = pair_arrays(graph.n)
    reach = graph.closed_basis_neighborhood
    masks = tuple(_mask_to_int(reach[rows, k] | reach[cols, k]) for k in range(graph.alpha))
    return EdgeCoverSets(graph.n, graph.independent_set, masks, graph.max_degree)


def overlap_stats(cover: EdgeCoverSets, items) -> tuple[int, int]:
    """``(c_I, d_I)``: sizes of the union and intersection of ``M_k`` over ``items``."""
    items = list(items)
    if not items:
        raise DomainError("subset must be nonempty")
    masks = [cover.mask(k) for k in items]
    union = inter = masks[0]
    for m in masks[1:]:
        union |= m
        inter &= m
    return union.bit_count(), inter.bit_count()


def save_graph(graph: RelationGraph, path) -> None:
    lines = [f"n {graph.n}", "independent " + " ".join(str(k + 1) for k in graph.independent_set)]
    lines += [f"{i + 1} {j + 1}" for i, j in sorted(graph.edges)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_graph(path) -> RelationGraph:
    n = None
    ind = None
    edges = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, *rest = line.split()
        try:
            if head == "n":
                n = int(rest[0])
            elif head == "independent":
                ind = [int(t) - 1 for t in rest]
            else:
                if len(rest) != 1:
                    raise ValueError
                edges.append((int(head) - 1, int(rest[0]) - 1))
        except (ValueError, IndexError):
            raise ParseError(f"{path}:{lineno}: cannot parse {raw!r}") from None
    if n is None or ind is None:
        raise ParseError(f"{path}: missing 'n' or 'independent' header")
    return RelationGraph(n, frozenset(edges), tuple(ind))
