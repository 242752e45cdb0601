"""Exact recovery from known preference probabilities.

Each observed pair ``(i, j)`` gives a homogeneous linear equation in the
basis scores ``v`` (multiplicative form, ``theta = B v``)::

    sum_k (B[i, k] - P(i, j) / P(j, i) * B[j, k]) * v[k] = 0

The scores are identifiable up to scale iff the stacked system has a
one-dimensional nullspace. A covering matching between basis items and
observed equations (Hall's condition) is the combinatorial side of this.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguityError,
    DegenerateError,
    NoSolutionError,
    OutOfScopeError,
    ParameterError,
    SizeError,
)
from .graphs import EdgeCoverSets

__all__ = [
    "EquationSystem",
    "MatchingResult",
    "build_equations",
    "graph_supports",
    "hopcroft_karp",
    "hall_check",
    "solve_noiseless",
    "default_q_max",
    "error_probability_bound",
    "closed_form_threshold",
    "THRESHOLD_FAMILIES",
]

SUPPORT_RTOL = 1e-12
NULLITY_GAP = 1e6


@dataclass(frozen=True, eq=False)
class EquationSystem:
    """One coefficient row per observed pair, plus its support set.

    ``scale[t]`` is the magnitude of the terms that were subtracted to form
    row ``t``; entries below ``SUPPORT_RTOL * scale[t]`` count as zero.
    """

    gamma: np.ndarray
    supports: tuple
    pairs: np.ndarray
    B: np.ndarray
    scale: np.ndarray = field(repr=False)

    @property
    def alpha(self) -> int:
        return self.gamma.shape[1]


def build_equations(B, P, pairs) -> EquationSystem:
    """Coefficient rows ``B[i] - P[i, j] / P[j, i] * B[j]`` for each pair.

    ``P`` is the full ``n x n`` matrix of true preference probabilities.
    """
    B = np.asarray(B, dtype=float)
    P = np.asarray(P, dtype=float)
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    i, j = pairs[:, 0], pairs[:, 1]
    pij = P[i, j]
    pji = P[j, i]
    if np.any((pij <= 0) | (pij >= 1) | (pji <= 0) | (pji >= 1)):
        raise DegenerateError("preference probabilities must lie strictly inside (0, 1)")
    ratio = (pij / pji)[:, None]
    left = B[i]
    right = ratio * B[j]
    gamma = left - right
    scale = np.maximum(np.abs(left).max(axis=1, initial=0.0), np.abs(right).max(axis=1, initial=0.0))
    nz = np.abs(gamma) > SUPPORT_RTOL * scale[:, None]
    supports = tuple(frozenset(np.flatnonzero(row).tolist()) for row in nz)
    return EquationSystem(gamma, supports, pairs, B, scale)


def graph_supports(cover: EdgeCoverSets, pairs) -> tuple:
    """Supports read from the relation graph: basis positions k with the pair in ``M_k``."""
    n = cover.n
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    # lexicographic index of (lo, hi) among all i < j pairs
    index = lo * n - lo * (lo + 1) // 2 + (hi - lo - 1)
    return tuple(
        frozenset(k for k, m in enumerate(cover.masks) if m >> int(t) & 1) for t in index
    )


@dataclass(frozen=True)
class MatchingResult:
    """Outcome of the Hall check.

    ``matching`` maps basis positions to equation indices. When not
    covered, ``witness`` is a set S of basis positions whose neighbourhood
    ``witness_neighbors`` is strictly smaller than S.
    """

    covered: bool
    matching: dict
    witness: frozenset = frozenset()
    witness_neighbors: frozenset = frozenset()

    @property
    def size(self) -> int:
        return len(self.matching)


def hopcroft_karp(adj: list, n_right: int) -> tuple[list, list]:
    """Maximum matching of a bipartite graph given left-side adjacency lists.

    Returns ``(match_left, match_right)`` with -1 for unmatched vertices.
    """
    n_left = len(adj)
    match_l = [-1] * n_left
    match_r = [-1] * n_right
    inf = n_left + 1
    dist = [0] * n_left

    def bfs() -> bool:
        queue = deque()
        for u in range(n_left):
            if match_l[u] == -1:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = inf
        found = False
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                w = match_r[v]
                if w == -1:
                    found = True
                elif dist[w] == inf:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return found

    def dfs(u) -> bool:
        # recursion depth is bounded by the number of basis items
        for v in adj[u]:
            w = match_r[v]
            if w == -1 or (dist[w] == dist[u] + 1 and dfs(w)):
                match_l[u] = v
                match_r[v] = u
                return True
        dist[u] = inf
        return False

    while bfs():
        for u in range(n_left):
            if match_l[u] == -1:
                dfs(u)
    return match_l, match_r


def hall_check(supports, alpha: int, anchor: int | None = None) -> MatchingResult:
    """Does some matching cover every basis position with a distinct equation?

    ``supports[t]`` is the set of basis positions appearing in equation
    ``t``. With ``anchor`` set, an extra equation supported on ``{anchor}``
    is added, standing for the scale normalisation ``v[anchor] = 1``; its
    index in the matching is ``len(supports)``.
    """
    supports = [frozenset(s) for s in supports]
    if anchor is not None:
        supports.append(frozenset([anchor]))
    adj = [[] for _ in range(alpha)]
    for t, s in enumerate(supports):
        for k in sorted(s):
            if not 0 <= k < alpha:
                raise ValueError(f"support index {k} outside [0, {alpha})")
            adj[k].append(t)
    match_l, match_r = hopcroft_karp(adj, len(supports))
    matching = {k: t for k, t in enumerate(match_l) if t != -1}
    if len(matching) == alpha:
        return MatchingResult(True, matching)
    # Koenig certificate: basis vertices reachable from unmatched ones by
    # alternating paths (any edge left->right, matched edge right->left)
    seen_l = {k for k in range(alpha) if match_l[k] == -1}
    seen_r = set()
    queue = deque(seen_l)
    while queue:
        k = queue.popleft()
        for t in adj[k]:
            if t in seen_r:
                continue
            seen_r.add(t)
            w = match_r[t]
            if w != -1 and w not in seen_l:
                seen_l.add(w)
                queue.append(w)
    return MatchingResult(False, matching, frozenset(seen_l), frozenset(seen_r))


def _nullity(sv: np.ndarray, alpha: int, zero: float) -> int:
    """Classify the nullspace dimension as 0, 1 or 2 (meaning two or more)."""
    s = np.zeros(alpha)
    s[: min(alpha, sv.size)] = sv[:alpha]
    last = s[-1]
    if alpha == 1:
        return 1 if last <= zero else 0
    second = s[-2]
    if second <= zero:
        return 2
    if last == 0 or second / last >= NULLITY_GAP:
        return 1
    return 0


def solve_noiseless(eqs: EquationSystem, anchor: int = 0) -> np.ndarray:
    """Scores of all items from an exact equation system, up to positive scale.

    The nullspace vector is scaled so basis score ``anchor`` equals one,
    extended to all items through ``B``, and finally rescaled to unit norm
    with a positive sum.
    """
    alpha = eqs.alpha
    gamma = eqs.gamma
    if gamma.shape[0]:
        _, sv, vt = np.linalg.svd(gamma, full_matrices=True)
    else:
        sv, vt = np.zeros(0), np.eye(alpha)
    zero = 1e-9 * float(eqs.scale.max(initial=0.0)) if eqs.scale.size else 0.0
    nullity = _nullity(sv, alpha, zero)
    if nullity == 0:
        raise NoSolutionError("equations admit only the zero solution")
    if nullity >= 2:
        hall = hall_check(eqs.supports, alpha, anchor=anchor)
        raise AmbiguityError(
            "equations leave two or more degrees of freedom", matching=hall, nullity=nullity
        )
    v = vt[-1]
    if abs(v[anchor]) > 1e-12:
        v = v / v[anchor]
    theta = eqs.B @ v
    if theta.sum() < 0:
        theta = -theta
    return theta / np.linalg.norm(theta)


def default_q_max(cover: EdgeCoverSets) -> int:
    """``min(alpha, max_degree + 1, 3)``, at least 1."""
    return max(1, min(cover.alpha, cover.max_degree + 1, 3))


def error_probability_bound(
    cover: EdgeCoverSets, p: float, q_max: int | None = None, max_alpha: int = 20
) -> float:
    """Union bound on the probability that Hall's condition fails.

    Sums ``C(d_I, q-1) p^(q-1) (1-p)^(c_I-(q-1))`` over basis subsets I of
    size ``q <= q_max``. Subsets whose intersection is too small for any
    superset to contribute are pruned. Terms are accumulated per size in
    lexicographic subset order.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} is not a probability")
    alpha = cover.alpha
    if q_max is None:
        q_max = default_q_max(cover)
    q_max = min(q_max, alpha)
    if alpha > max_alpha and q_max > 3:
        raise SizeError(f"enumerating subsets up to size {q_max} of {alpha} items is too large")
    masks = cover.masks
    terms = [[] for _ in range(q_max + 1)]

    def term(q, c, d):
        if d < q - 1:
            return 0.0
        return math.comb(d, q - 1) * p ** (q - 1) * (1.0 - p) ** (c - (q - 1))

    def extend(last, q, union, inter):
        c, d = union.bit_count(), inter.bit_count()
        terms[q].append(term(q, c, d))
        # a superset of size q+1 needs an intersection of at least q pairs
        if q == q_max or d < q:
            return
        for k in range(last + 1, alpha):
            extend(k, q + 1, union | masks[k], inter & masks[k])

    for k in range(alpha):
        extend(k, 1, masks[k], masks[k])
    return float(sum(math.fsum(t) for t in terms[1:]))


THRESHOLD_FAMILIES = ("disconnected", "clique", "r_disconnected_cliques", "star", "cycle")


def closed_form_threshold(family: str, n: int, param: int | None, delta: float) -> float:
    """Smallest sampling rate p for which the family's bound is at most delta.

    The value may exceed 1, meaning no sampling rate meets the target.
    """
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta={delta} must lie in (0, 1)")
    if family == "disconnected" or family == "star":
        if n < 2:
            raise ParameterError("need n >= 2")
        return math.log(n**2 / delta) / (n - 1)
    if family == "clique":
        if n < 2:
            raise ParameterError("need n >= 2")
        return math.log(1.0 / delta) / math.comb(n, 2)
    if family == "r_disconnected_cliques":
        if param is None or param < 1 or n % param:
            raise ParameterError(f"r={param} must divide n={n}")
        r = int(param)
        d = n // r
        denom = math.comb(d, 2) + r - 1
        if denom == 0:
            raise ParameterError("a single one-item clique has no pairs")
        return math.log(r**2 / delta) / denom
    if family == "cycle":
        if n % 2 or n < 6:
            raise ParameterError("cycle threshold needs an even n >= 6")
        return math.log(n / delta) / (n - 4)
    if family in ("k_ary_tree", "d_regular"):
        raise OutOfScopeError(f"no closed-form sampling threshold is available for {family}")
    raise ParameterError(f"unknown family {family!r}")
