"""Score estimators: fBTL-LS and the feature-blind OLS and Rank Centrality baselines."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import InputError, NoInformationError
from .features import FeatureSet
from .model import ComparisonSample

__all__ = [
    "ESTIMATORS",
    "IncidenceMatrix",
    "EstimateReport",
    "incidence",
    "fbtl_ls",
    "ols",
    "rank_centrality",
    "run_estimator",
]

ESTIMATORS = ("fbtl_ls", "ols", "rank_centrality")
PINV_RCOND = 1e-10


@dataclass(frozen=True, eq=False)
class IncidenceMatrix:
    """Node-edge incidence: column t has +1 at ``heads[t]`` and -1 at ``tails[t]``."""

    Q: np.ndarray
    heads: np.ndarray
    tails: np.ndarray

    @property
    def laplacian(self) -> np.ndarray:
        return self.Q @ self.Q.T


@dataclass(frozen=True, eq=False)
class EstimateReport:
    theta_hat: np.ndarray
    estimator: str
    diagnostics: dict = field(default_factory=dict)


def incidence(pairs, n: int) -> IncidenceMatrix:
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    heads = np.minimum(pairs[:, 0], pairs[:, 1])
    tails = np.maximum(pairs[:, 0], pairs[:, 1])
    m = len(pairs)
    Q = np.zeros((n, m))
    cols = np.arange(m)
    Q[heads, cols] = 1.0
    Q[tails, cols] = -1.0
    return IncidenceMatrix(Q, heads, tails)


def _check_sample(sample: ComparisonSample):
    if sample is None or sample.m == 0:
        raise InputError("comparison sample is empty")


def _eig_range(M: np.ndarray) -> tuple[float, float]:
    """Smallest positive and largest eigenvalue of a PSD matrix (0, 0 if zero)."""
    eig = np.linalg.eigvalsh(M)
    top = float(eig[-1]) if eig.size else 0.0
    if top <= 0:
        return 0.0, 0.0
    pos = eig[eig > 1e-10 * top]
    return float(pos[0]), top


def fbtl_ls(features: FeatureSet, sample: ComparisonSample) -> EstimateReport:
    """Least squares on the log-odds through the coefficient matrix.

    Solves ``min_x |(B^T Q)^T x - y_hat|`` with the minimum-norm solution
    and returns ``theta_hat = B x``, so the output always lies in the
    column space of ``B``.
    """
    _check_sample(sample)
    start = time.perf_counter()
    inc = incidence(sample.pairs, features.n)
    Qt = features.B.T @ inc.Q  # alpha x m
    y = sample.y_hat
    v, _, rank, _ = np.linalg.lstsq(Qt.T, y, rcond=PINV_RCOND)
    if rank == 0:
        raise NoInformationError("the observed pairs carry no information about the basis scores")
    theta = features.B @ v
    lam1, lamn = _eig_range(Qt @ Qt.T)
    diag = {
        "residual": float(np.linalg.norm(Qt.T @ v - y)),
        "rank": int(rank),
        "lambda_1": lam1,
        "lambda_n": lamn,
        "v_hat": v,
        "seconds": time.perf_counter() - start,
    }
    return EstimateReport(theta, "fbtl_ls", diag)


def ols(sample: ComparisonSample, n: int, normalize: bool = False) -> EstimateReport:
    """Least squares on the comparison graph alone.

    The minimum-norm solution has zero mean on every connected component of
    the comparison graph; items never compared get 0.
    """
    _check_sample(sample)
    start = time.perf_counter()
    inc = incidence(sample.pairs, n)
    y = sample.y_hat
    theta, _, rank, _ = np.linalg.lstsq(inc.Q.T, y, rcond=PINV_RCOND)
    labels = _components(sample.pairs, n)
    for c in np.unique(labels):
        sel = labels == c
        theta[sel] -= theta[sel].mean()
    if normalize:
        norm = np.linalg.norm(theta)
        if norm > 0:
            theta = theta / norm
    lam1, lamn = _eig_range(inc.laplacian)
    diag = {
        "residual": float(np.linalg.norm(inc.Q.T @ theta - y)),
        "rank": int(rank),
        "components": int(labels.max() + 1),
        "lambda_1": lam1,
        "lambda_n": lamn,
        "seconds": time.perf_counter() - start,
    }
    return EstimateReport(theta, "ols", diag)


def _components(pairs, n) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    adj = sp.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    return labels


def _stationary(T: sp.csr_matrix, tol: float, max_iter: int) -> tuple[np.ndarray, int, bool]:
    size = T.shape[0]
    pi = np.full(size, 1.0 / size)
    Tt = T.T.tocsr()
    for it in range(1, max_iter + 1):
        nxt = Tt @ pi
        nxt /= nxt.sum()
        if np.abs(nxt - pi).sum() < tol:
            return nxt, it, True
        pi = nxt
    return pi, max_iter, False


def rank_centrality(
    sample: ComparisonSample, n: int, tol: float = 1e-10, max_iter: int = 100_000, normalize: bool = False
) -> EstimateReport:
    """Stationary distribution of the comparison random walk.

    From item i the walk moves to a compared item j with probability
    ``p_hat(j beats i) / d_max`` and stays put otherwise. Scores are
    ``log(pi)`` centred on each connected component of the comparison graph.
    """
    _check_sample(sample)
    start = time.perf_counter()
    pairs = sample.pairs
    i, j = pairs[:, 0], pairs[:, 1]
    deg = np.bincount(np.concatenate([i, j]), minlength=n)
    d_max = deg.max()
    # i -> j moves with P(j beats i) = 1 - p_hat(i beats j)
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    vals = np.concatenate([1.0 - sample.p_hat, sample.p_hat]) / d_max
    off = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    stay = 1.0 - np.asarray(off.sum(axis=1)).ravel()
    T = (off + sp.diags(stay)).tocsr()

    labels = _components(pairs, n)
    n_comp = int(labels.max() + 1)
    theta = np.zeros(n)
    iterations = 0
    converged = True
    for c in range(n_comp):
        idx = np.flatnonzero(labels == c)
        if idx.size == 1:
            continue
        sub = T[idx][:, idx]
        pi, its, ok = _stationary(sub, tol, max_iter)
        iterations = max(iterations, its)
        converged &= ok
        scores = np.log(pi)
        theta[idx] = scores - scores.mean()
    if normalize:
        norm = np.linalg.norm(theta)
        if norm > 0:
            theta = theta / norm
    diag = {
        "components": n_comp,
        "disconnected": n_comp > 1,
        "iterations": iterations,
        "converged": bool(converged),
        "seconds": time.perf_counter() - start,
    }
    return EstimateReport(theta, "rank_centrality", diag)


def run_estimator(name: str, features: FeatureSet, sample: ComparisonSample) -> EstimateReport:
    if name == "fbtl_ls":
        return fbtl_ls(features, sample)
    if name == "ols":
        return ols(sample, features.n)
    if name == "rank_centrality":
        return rank_centrality(sample, features.n)
    raise ValueError(f"unknown estimator {name!r}")
