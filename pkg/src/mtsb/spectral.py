"""Sample lag cross-covariances and their quartic aggregation matrices.

Every aggregate here has the form

    M = sum_{l=1..l0} sum_{i,j} S_ij(l) S_ij(l)^T,
    S_ij(l) = (T - l)^{-1} sum_t x_{t,.i} x_{t+l,.j}^T,

with ``x_{t,.i}`` the i-th column (column orientation) or the i-th row
(row orientation) of the t-th observation matrix.  Two exact evaluation
routes are implemented:

``"cross"``
    Build the full (pq x pq) lag cross-moment with one matrix product over
    time and contract it blockwise.  Cost O(T (pq)^2).
``"gram"``
    Use sum_{i,j} S_ij S_ij^T = n^{-2} sum_{t,s} <X_{t+l}, X_{s+l}> X_t X_s^T,
    which needs only a T x T Gram matrix.  Cost O(T^2 pq).

``method="auto"`` picks the cheaper one.
"""

from __future__ import annotations

import numpy as np

from .core import check_orthonormal, check_series, symmetrize
from .exceptions import DimensionError, LagError

ORIENTATIONS = ("column", "row")


def _oriented(X, orientation):
    if orientation == "column":
        return X
    if orientation == "row":
        return X.transpose(0, 2, 1)
    raise ValueError(f"orientation must be 'column' or 'row', got {orientation!r}")


def _check_lag(l, T):
    if not 1 <= l <= T - 1:
        raise LagError(f"lag {l} outside 1..{T - 1}")


def lag_cross_cov(series, i, j, l, orientation="column"):
    """Sample lag-``l`` cross-covariance between columns (or rows) ``i`` and ``j``.

    Indices are 0-based.  No mean is subtracted.
    """
    X = _oriented(check_series(series), orientation)
    T = X.shape[0]
    _check_lag(l, T)
    n = T - l
    return X[:n, :, i].T @ X[l:, :, j] / n


def _lag_term_cross(X, l):
    T, d, c = X.shape
    n = T - l
    A = X[:n].reshape(n, d * c)
    B = X[l:].reshape(n, d * c)
    S = (A.T @ B) / n  # S[(a,i),(b,j)] = S_ij(l)[a, b]
    K = S.reshape(d, c * d * c)
    return K @ K.T


def _lag_term_gram(X, l):
    T, d, c = X.shape
    n = T - l
    A = X[:n]
    B = X[l:].reshape(n, d * c)
    W = B @ B.T
    Y = np.tensordot(W, A, axes=(1, 0))  # Y_t = sum_s W_ts X_s
    A2 = A.transpose(1, 0, 2).reshape(d, n * c)
    Y2 = Y.transpose(1, 0, 2).reshape(d, n * c)
    return (A2 @ Y2.T) / n**2


def _choose_method(T, d, c):
    return "gram" if T < d * c else "cross"


def aggregate(X, l0, orientation="column", method="auto", lags=None):
    """Aggregate ``sum_l sum_ij S_ij(l) S_ij(l)^T`` for a raw (T, p, q) array.

    ``lags`` overrides the default ``1..l0`` range (used for partial sums).
    """
    X = _oriented(check_series(X), orientation)
    T, d, c = X.shape
    if lags is None:
        if int(l0) != l0 or l0 < 1:
            raise LagError(f"l0 must be a positive integer, got {l0!r}")
        lags = range(1, int(l0) + 1)
    if method == "auto":
        method = _choose_method(T, d, c)
    term = {"cross": _lag_term_cross, "gram": _lag_term_gram}[method]
    M = np.zeros((d, d))
    for l in lags:
        _check_lag(l, T)
        M += term(X, l)
    return symmetrize(M)


def aggregate_M0(series, l0, orientation="column", method="auto"):
    """Unprojected aggregate: p x p for column orientation, q x q for row."""
    return aggregate(series, l0, orientation, method)


def project_series(series, proj, orientation="column"):
    """``X_t @ proj`` (column orientation) or ``X_t^T @ proj`` (row orientation)."""
    X = check_series(series)
    proj = np.asarray(proj, dtype=float)
    if proj.ndim != 2:
        raise DimensionError("projection must be a 2-D matrix")
    X = _oriented(X, orientation)
    if proj.shape[0] != X.shape[2]:
        raise DimensionError(
            f"projection has {proj.shape[0]} rows, expected {X.shape[2]} "
            f"for {orientation} orientation"
        )
    return X @ proj


def aggregate_M_projected(series, proj, l0, orientation="column", method="auto"):
    """Aggregate of the projected series.

    Column orientation: ``Z_t = X_t C0`` gives the p x p matrix used to refine
    the row loadings.  Row orientation: ``W_t = X_t^T R0`` gives the q x q
    matrix used to refine the column loadings.  In both cases the inner
    double sum runs over the columns of the projection.
    """
    Z = project_series(series, proj, orientation)
    if Z.shape[2] == 0:
        return np.zeros((Z.shape[1], Z.shape[1]))
    return aggregate(Z, l0, "column", method)


def residual_series(series, R, C):
    """``(I - R R^T) X_t (I - C C^T)`` for every t, as a :class:`MatrixSeries`
    when given one, otherwise as an array."""
    X = check_series(series, min_T=1)
    R = check_orthonormal(R, name="R")
    C = check_orthonormal(C, name="C")
    if R.shape[0] != X.shape[1] or C.shape[0] != X.shape[2]:
        raise DimensionError("loading dimensions do not match the series")
    # apply the projectors without forming them: X - R(R'X) then - (.)C C'
    Y = X - np.einsum("pk,tkq->tpq", R, np.einsum("pk,tpq->tkq", R, X))
    Y = Y - (Y @ C) @ C.T
    if hasattr(series, "with_data"):
        return series.with_data(Y)
    return Y


def aggregate_Mstar0(residuals, l0, orientation="column", method="auto"):
    """Same form as :func:`aggregate_M0`, evaluated on residual matrices."""
    return aggregate(residuals, l0, orientation, method)


def aggregate_Mstar_projected(residuals, proj, l0, orientation="column", method="auto"):
    """Aggregate of residuals projected on the initial weak loadings.

    Column orientation uses ``U_t = Y_t Lambda0`` (p x p result), row
    orientation ``H_t = Y_t^T Gamma0`` (q x q result).
    """
    return aggregate_M_projected(residuals, proj, l0, orientation, method)
