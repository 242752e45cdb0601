"""Scores, pairwise preference probabilities, and the two-stage sampler.

Two model forms are supported:

* ``"exponential"``: ``P(i, j) = exp(t_i) / (exp(t_i) + exp(t_j))``
* ``"multiplicative"``: ``P(i, j) = t_i / (t_i + t_j)`` with positive scores
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DegenerateError, DomainError, InputError
from .features import FeatureSet
from .graphs import pair_arrays

__all__ = [
    "FORMS",
    "FbtlModel",
    "ComparisonSample",
    "scores_from_features",
    "preference",
    "preference_matrix",
    "sample_pairs",
    "sample_pairs_exact",
    "sample_comparisons",
]

FORMS = ("exponential", "multiplicative")


def _check_form(form):
    if form not in FORMS:
        raise ValueError(f"unknown model form {form!r}")


@dataclass(frozen=True, eq=False)
class FbtlModel:
    theta: np.ndarray
    form: str = "exponential"
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        _check_form(self.form)
        theta = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "theta", theta)
        if self.form == "multiplicative" and np.any(theta <= 0):
            raise DomainError("multiplicative form needs strictly positive scores")
        if self.b is None:
            object.__setattr__(self, "b", float(np.abs(theta).max(initial=0.0)))
        if self.a is None:
            object.__setattr__(self, "a", float(np.abs(theta).min(initial=0.0)))

    @property
    def n(self) -> int:
        return self.theta.size

    @classmethod
    def from_features(cls, features: FeatureSet, w, form="exponential", normalize=True) -> "FbtlModel":
        """Model with scores ``<w, u_i>``; ``a`` and ``b`` are read off the scores."""
        theta = scores_from_features(w, features, normalize=normalize)
        basis = theta[list(features.independent_set)]
        return cls(theta, form, a=float(np.abs(basis).min()), b=float(np.abs(theta).max()))

    def prob(self, i: int, j: int) -> float:
        return preference(self.theta[i], self.theta[j], self.form)

    def matrix(self) -> np.ndarray:
        return preference_matrix(self.theta, self.form)

    def pair_probs(self, pairs) -> np.ndarray:
        pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
        return _pref(self.theta[pairs[:, 0]], self.theta[pairs[:, 1]], self.form)


def scores_from_features(w, features: FeatureSet, normalize: bool = False) -> np.ndarray:
    """``theta_i = <w, u_i>``, optionally scaled to unit Euclidean norm."""
    w = np.asarray(w, dtype=float)
    if w.shape != (features.d,):
        raise DomainError(f"w has shape {w.shape}, features have dimension {features.d}")
    theta = features.U @ w
    if normalize:
        norm = np.linalg.norm(theta)
        if norm > 0:
            theta = theta / norm
    return theta


def _pref(ti, tj, form):
    # the smaller probability is computed directly (full relative precision)
    # and the larger as its complement; for s <= 1/2, fl(fl(1 - s) + s) == 1,
    # so P(i, j) + P(j, i) == 1 holds exactly in floating point
    ti = np.asarray(ti, dtype=float)
    tj = np.asarray(tj, dtype=float)
    hi = np.maximum(ti, tj)
    lo = np.minimum(ti, tj)
    if form == "exponential":
        p_lo = expit(lo - hi)
    else:
        if np.any(lo <= 0):
            raise DomainError("multiplicative form needs strictly positive scores")
        p_lo = lo / (hi + lo)
    return np.where(ti >= tj, 1.0 - p_lo, p_lo)


def preference(theta_i: float, theta_j: float, form: str = "exponential") -> float:
    """Probability that item i is preferred to item j."""
    _check_form(form)
    return float(_pref(theta_i, theta_j, form))


def preference_matrix(theta, form: str = "exponential") -> np.ndarray:
    """Full ``n x n`` preference matrix; the diagonal is 0.5."""
    _check_form(form)
    theta = np.asarray(theta, dtype=float)
    return _pref(theta[:, None], theta[None, :], form)


def sample_pairs(n: int, p: float, seed=None) -> np.ndarray:
    """Erdos-Renyi pair sample: each of the C(n, 2) pairs kept with probability p.

    Returns an ``m x 2`` integer array with ``i < j`` in lexicographic order.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p={p} is not a probability")
    rows, cols = pair_arrays(n)
    rng = np.random.default_rng(seed)
    keep = rng.random(rows.size) < p
    return np.column_stack([rows[keep], cols[keep]]).astype(int)


def sample_pairs_exact(n: int, m: int, seed=None) -> np.ndarray:
    """``m`` distinct pairs drawn uniformly without replacement."""
    rows, cols = pair_arrays(n)
    if not 0 <= m <= rows.size:
        raise DomainError(f"cannot draw {m} pairs out of {rows.size}")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(rows.size, size=m, replace=False))
    return np.column_stack([rows[idx], cols[idx]]).astype(int)


@dataclass(frozen=True, eq=False)
class ComparisonSample:
    """Observed pairs with empirical preferences.

    ``pairs`` rows are ``(i, j)`` with ``i < j``; ``p_hat[t]`` is the
    (clamped) fraction of times ``i`` beat ``j``. ``wins``/``trials`` are
    ``None`` for samples built from exact probabilities.
    """

    pairs: np.ndarray
    p_hat: np.ndarray
    wins: np.ndarray | None = None
    trials: np.ndarray | None = None

    @property
    def m(self) -> int:
        return len(self.pairs)

    @property
    def K(self):
        """Trials per pair if uniform, else ``None`` (also ``None`` for exact samples)."""
        if self.trials is None or self.trials.size == 0:
            return None
        k = self.trials[0]
        return int(k) if np.all(self.trials == k) else None

    @property
    def y_hat(self) -> np.ndarray:
        """Empirical log-odds ``log(p_hat / (1 - p_hat))`` per stored pair."""
        return np.log(self.p_hat) - np.log1p(-self.p_hat)

    def log_odds(self, i: int, j: int) -> float:
        for t, (a, b) in enumerate(self.pairs):
            if (a, b) == (i, j):
                return float(self.y_hat[t])
            if (a, b) == (j, i):
                return -float(self.y_hat[t])
        raise KeyError((i, j))

    @classmethod
    def from_counts(cls, pairs, wins, trials) -> "ComparisonSample":
        """Build from first-item win counts; pairs are reoriented to ``i < j``."""
        pairs = np.asarray(pairs, dtype=int).reshape(-1, 2).copy()
        wins = np.asarray(wins, dtype=int).copy()
        trials = np.broadcast_to(np.asarray(trials, dtype=int), wins.shape).copy()
        if np.any(trials < 1) or np.any(wins < 0) or np.any(wins > trials):
            raise InputError("win counts must satisfy 0 <= wins <= trials, trials >= 1")
        if np.any(pairs[:, 0] == pairs[:, 1]):
            raise InputError("a pair compares an item with itself")
        swap = pairs[:, 0] > pairs[:, 1]
        pairs[swap] = pairs[swap][:, ::-1]
        wins[swap] = trials[swap] - wins[swap]
        lo = 1.0 / (2.0 * trials)
        p_hat = np.clip(wins / trials, lo, 1.0 - lo)
        return cls(pairs, p_hat, wins, trials)

    @classmethod
    def from_probabilities(cls, pairs, probs) -> "ComparisonSample":
        """Noiseless sample holding the exact preference of each pair."""
        pairs = np.asarray(pairs, dtype=int).reshape(-1, 2).copy()
        probs = np.asarray(probs, dtype=float).copy()
        if np.any((probs <= 0) | (probs >= 1)):
            raise DegenerateError("exact probabilities must lie strictly inside (0, 1)")
        swap = pairs[:, 0] > pairs[:, 1]
        pairs[swap] = pairs[swap][:, ::-1]
        probs[swap] = 1.0 - probs[swap]
        return cls(pairs, probs)


def sample_comparisons(pairs, model: FbtlModel, K: int, seed=None) -> ComparisonSample:
    """Compare every pair ``K`` times; wins are Binomial(K, P(i, j))."""
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    if K < 1:
        raise InputError("K must be at least 1")
    if len(pairs) == 0:
        raise InputError("no pairs to compare")
    rng = np.random.default_rng(seed)
    wins = rng.binomial(K, model.pair_probs(pairs))
    return ComparisonSample.from_counts(pairs, wins, K)
