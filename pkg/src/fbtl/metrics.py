"""Error metrics, sample complexity search, and the recovery bound evaluators."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateError, DomainError, InputError
from .features import basis_condition
from .model import preference_matrix

__all__ = [
    "MetricSuite",
    "l2_error",
    "raw_l2_error",
    "pd_error",
    "evaluate",
    "sample_complexity",
    "default_m_grid",
    "trial_seed",
    "thm5_rhs",
    "thm6_lower",
]


@dataclass(frozen=True)
class MetricSuite:
    l2_norm_error: float
    pd_error: float
    aligned: bool
    raw_l2_error: float


def raw_l2_error(theta_hat, theta) -> float:
    theta = np.asarray(theta, dtype=float)
    norm = np.linalg.norm(theta)
    if norm == 0:
        raise DegenerateError("true score vector is zero")
    return float(np.linalg.norm(np.asarray(theta_hat, dtype=float) - theta) / norm)


def l2_error(theta_hat, theta, center: bool = False) -> float:
    """Normalized l2 error after sign alignment.

    With ``center=True`` the common shift is removed first, i.e. the error
    is ``|P(theta_hat - theta)| / |theta|`` with ``P`` the centering
    projection. The sign of ``theta_hat`` is chosen to minimise the error.
    """
    theta = np.asarray(theta, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    if theta.shape != theta_hat.shape:
        raise DomainError(f"shape mismatch {theta_hat.shape} vs {theta.shape}")
    norm = np.linalg.norm(theta)
    if norm == 0:
        raise DegenerateError("true score vector is zero")
    best = math.inf
    for sign in (1.0, -1.0):
        diff = sign * theta_hat - theta
        if center:
            diff = diff - diff.mean()
        best = min(best, float(np.linalg.norm(diff)))
    return best / norm


def _as_pref(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return preference_matrix(x, "exponential")
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DomainError(f"expected a score vector or square matrix, got shape {x.shape}")
    return x


def pd_error(estimate, truth) -> float:
    """Fraction of pairs ranked in opposite directions, normalised by n^2.

    Either argument may be a score vector (mapped through the exponential
    form) or a full preference matrix. A preference of exactly 0.5 never
    counts as a disagreement. NaN entries of ``truth`` (unknown pairs) are
    skipped.
    """
    P_hat = _as_pref(estimate)
    P_star = _as_pref(truth)
    if P_hat.shape != P_star.shape:
        raise DomainError(f"shape mismatch {P_hat.shape} vs {P_star.shape}")
    n = P_hat.shape[0]
    iu = np.triu_indices(n, 1)
    a, b = P_hat[iu], P_star[iu]
    with np.errstate(invalid="ignore"):
        bad = ((a > 0.5) & (b < 0.5)) | ((a < 0.5) & (b > 0.5))
    return float(np.count_nonzero(bad)) / n**2


def evaluate(theta_hat, theta, center: bool = False) -> MetricSuite:
    return MetricSuite(
        l2_norm_error=l2_error(theta_hat, theta, center=center),
        pd_error=pd_error(theta_hat, theta),
        aligned=True,
        raw_l2_error=raw_l2_error(theta_hat, theta),
    )


def trial_seed(base: int, *keys: int) -> np.random.SeedSequence:
    """Independent, reproducible seed for one trial of one schedule point."""
    return np.random.SeedSequence([int(base), *map(int, keys)])


def default_m_grid(alpha: int, n: int, ratio: float = 1.5) -> list[int]:
    """Geometric grid of pair counts from alpha up to C(n, 2)."""
    top = math.comb(n, 2)
    m = max(1, alpha)
    grid = []
    while m < top:
        grid.append(m)
        m = max(m + 1, int(math.ceil(m * ratio)))
    grid.append(top)
    return grid


def sample_complexity(
    scenario: Callable[[int, np.random.SeedSequence], float],
    eps: float,
    trials: int = 50,
    m_grid: Sequence[int] | None = None,
    base_seed: int = 0,
    workers: int | None = None,
) -> int | None:
    """Smallest m on the grid whose mean error over ``trials`` runs is below eps.

    ``scenario(m, seed)`` runs one simulation with ``m`` observed pairs and
    returns its normalized l2 error. Seeds depend only on ``(base_seed,
    m, trial)``, so different eps values see identical simulations.
    Returns ``None`` when no grid point reaches eps.
    """
    if not m_grid:
        raise InputError("m_grid is empty")
    if eps <= 0:
        raise DomainError("eps must be positive")
    if math.isinf(eps):
        return int(m_grid[0])
    from .parallel import map_ordered

    for m in m_grid:
        seeds = [trial_seed(base_seed, m, t) for t in range(trials)]
        errors = map_ordered(lambda s, m=m: scenario(m, s), seeds, workers)
        if float(np.mean(errors)) < eps:
            return int(m)
    return None


def thm5_rhs(a: float, B, L, m: int, alpha: int) -> float:
    """Upper bound on the normalized l2 error of fBTL-LS.

    ``(2/a) sqrt(kappa(B^T B)) sqrt(m/alpha) sqrt(lambda_n) / lambda_1`` with
    ``lambda_1, lambda_n`` the smallest positive and the largest eigenvalue
    of ``B^T L B``.
    """
    B = np.asarray(B, dtype=float)
    L = np.asarray(L, dtype=float)
    lo, hi = basis_condition(B)
    eig = np.linalg.eigvalsh(B.T @ L @ B)
    top = eig[-1]
    if top <= 0:
        raise DegenerateError("B^T L B has no positive eigenvalue; the error is unbounded")
    lam1 = eig[eig > 1e-10 * top][0]
    return float((2.0 / a) * math.sqrt(hi / lo) * math.sqrt(m / alpha) * math.sqrt(top) / lam1)


def thm6_lower(B, b: float, zeta: float, K: float) -> float:
    """Minimax lower bound on the expected normalized l2 error."""
    B = np.asarray(B, dtype=float)
    if min(b, zeta, K) <= 0:
        raise DomainError("b, zeta and K must be positive")
    if np.linalg.matrix_rank(B) < B.shape[1]:
        raise DegenerateError("B must have full column rank")
    lo, hi = basis_condition(B)
    return math.sqrt(lo) / (16.0 * b * hi * math.sqrt(448.0 * zeta * K * math.exp(2.0 * (b + 1.0))))
