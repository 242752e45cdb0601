"""Item features and the coefficient matrix that expresses them in a basis.

``B`` has one row per item and one column per basis item, so that
``U == B @ U[independent_set]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BasisError, DegenerateError, SpanError
from .graphs import RelationGraph

__all__ = [
    "FeatureSet",
    "synth_features",
    "compute_coefficients",
    "basis_condition",
    "select_basis",
]

DEFAULT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class FeatureSet:
    U: np.ndarray
    independent_set: tuple
    B: np.ndarray

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def d(self) -> int:
        return self.U.shape[1]

    @property
    def alpha(self) -> int:
        return len(self.independent_set)

    def residual(self) -> float:
        """Max-norm reconstruction residual ``|U - B U_I|``."""
        basis = self.U[list(self.independent_set)]
        return float(np.abs(self.U - self.B @ basis).max(initial=0.0))

    @classmethod
    def from_features(cls, U, independent_set, tol: float = DEFAULT_TOL) -> "FeatureSet":
        U = np.asarray(U, dtype=float)
        ind = tuple(int(k) for k in independent_set)
        return cls(U, ind, compute_coefficients(U, ind, tol))


def synth_features(graph: RelationGraph, coeff_mode: str = "gaussian", seed=None) -> FeatureSet:
    """Random features following the graph's dependency structure.

    Basis items are embedded as canonical vectors of R^alpha. Every other
    item is a random combination of the basis items in its closed
    neighbourhood: standard normal weights for ``"gaussian"``, a flat
    Dirichlet draw (nonnegative, summing to one) for ``"uniform_simplex"``.
    """
    if coeff_mode not in ("gaussian", "uniform_simplex"):
        raise ValueError(f"unknown coeff_mode {coeff_mode!r}")
    rng = np.random.default_rng(seed)
    n, alpha = graph.n, graph.alpha
    reach = graph.closed_basis_neighborhood
    B = np.zeros((n, alpha))
    basis_pos = {k: j for j, k in enumerate(graph.independent_set)}
    for i in range(n):
        if i in basis_pos:
            B[i, basis_pos[i]] = 1.0
            continue
        support = np.flatnonzero(reach[i])
        if support.size == 0:
            # item outside every basis neighbourhood (non-maximal set): spread over all
            support = np.arange(alpha)
        if coeff_mode == "gaussian":
            B[i, support] = rng.standard_normal(support.size)
        else:
            B[i, support] = rng.dirichlet(np.ones(support.size))
    return FeatureSet(B.copy(), graph.independent_set, B)


def compute_coefficients(U, independent_set, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Coefficients of every item in the basis formed by ``U[independent_set]``.

    Raises BasisError when the basis rows have numerical rank below their
    count and SpanError when some item cannot be reconstructed within
    ``tol`` (relative to the largest feature magnitude).
    """
    U = np.asarray(U, dtype=float)
    ind = list(independent_set)
    basis = U[ind]
    sv = np.linalg.svd(basis, compute_uv=False)
    if sv.size == 0 or sv[-1] <= tol * max(sv[0], 1.0) or len(ind) > U.shape[1]:
        raise BasisError(f"basis rows are rank deficient (singular values {sv})")
    coef, *_ = np.linalg.lstsq(basis.T, U.T, rcond=None)
    B = coef.T
    B[ind] = np.eye(len(ind))
    resid = np.abs(U - B @ basis).max(axis=1)
    scale = max(1.0, float(np.abs(U).max(initial=0.0)))
    bad = np.flatnonzero(resid > tol * scale)
    if bad.size:
        raise SpanError(
            f"items {bad.tolist()} are outside the span of the basis "
            f"(max residual {resid.max():.3g})"
        )
    return B


def basis_condition(B) -> tuple[float, float]:
    """Smallest nonzero and largest eigenvalue of ``B^T B``."""
    B = np.asarray(B, dtype=float)
    if B.size == 0 or not np.any(B):
        raise DegenerateError("coefficient matrix is all zero")
    eig = np.linalg.eigvalsh(B.T @ B)
    top = eig[-1]
    nonzero = eig[eig > 1e-12 * top]
    return float(nonzero[0]), float(top)


def select_basis(U, tol: float = DEFAULT_TOL) -> tuple[int, ...]:
    """Pick ``rank(U)`` linearly independent items by pivoted QR on ``U^T``.

    Returned indices are sorted ascending.
    """
    from scipy.linalg import qr

    U = np.asarray(U, dtype=float)
    _, R, piv = qr(U.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0:
        return ()
    rank = int(np.sum(diag > tol * diag[0]))
    return tuple(sorted(int(p) for p in piv[:rank]))
