"""scikit-learn style wrappers around the functional API.

Inputs are 3-D arrays of shape ``(T, p, q)`` (or :class:`MatrixSeries`), so
the 2-D ``check_array`` helpers do not apply; validation goes through
:func:`mtsb.core.check_series` instead.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, BiclusterMixin, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from .bicluster import KMeansConfig, bicluster_pipeline
from .core import FactorNumbers, LoadingSet, check_series
from .estimate import estimate_cluster_loadings, estimate_factor_numbers, estimate_global_loadings
from .evaluate import reconstruct
from .exceptions import DimensionError


def _factor_numbers(value):
    if value is None or isinstance(value, FactorNumbers):
        return value
    return FactorNumbers(*value)


class _SeriesEstimator(BaseEstimator):
    def _validate_series(self, X, reset):
        X = check_series(X, min_T=2 if reset else 1)
        if reset:
            self.n_rows_in_, self.n_cols_in_ = X.shape[1:]
        elif X.shape[1:] != (self.n_rows_in_, self.n_cols_in_):
            raise DimensionError(
                f"X has matrices of shape {X.shape[1:]}, expected "
                f"({self.n_rows_in_}, {self.n_cols_in_}) as seen in fit"
            )
        return X


class MatrixFactorModel(TransformerMixin, _SeriesEstimator):
    """Two-level matrix factor model with global and cluster-specific loadings.

    Parameters
    ----------
    l0 : int, default=1
        Number of lags aggregated in every autocovariance-based estimate.
    factor_numbers : tuple (k0, k, r0, r), optional
        Known factor counts; estimated by the eigenvalue-ratio rule if None.
    J0_row, J0_col : int, optional
        Truncation points for the ratio sequences.

    Attributes
    ----------
    factor_numbers_ : FactorNumbers
    loadings_ : LoadingSet
    row_loadings_, col_loadings_ : ndarray
        Global loadings ``R`` (p, k0) and ``C`` (q, r0).
    row_cluster_loadings_, col_cluster_loadings_ : ndarray
        Cluster-specific loadings ``Gamma`` (p, k) and ``Lambda`` (q, r).
    """

    def __init__(self, l0=1, factor_numbers=None, J0_row=None, J0_col=None):
        self.l0 = l0
        self.factor_numbers = factor_numbers
        self.J0_row = J0_row
        self.J0_col = J0_col

    def fit(self, X, y=None):
        X = self._validate_series(X, reset=True)
        fn = _factor_numbers(self.factor_numbers)
        if fn is None:
            fn = estimate_factor_numbers(X, self.l0, self.J0_row, self.J0_col)
        fn.check_dims(*X.shape[1:])
        R, C = estimate_global_loadings(X, fn.k0, fn.r0, self.l0)
        G, L = estimate_cluster_loadings(X, R, C, fn.k, fn.r, self.l0)
        self.factor_numbers_ = fn
        self.loadings_ = LoadingSet(R, C, G, L)
        self.row_loadings_, self.col_loadings_ = R, C
        self.row_cluster_loadings_, self.col_cluster_loadings_ = G, L
        return self

    def transform(self, X):
        """Global factor scores ``R' X_t C``, shape (T, k0, r0)."""
        check_is_fitted(self, "loadings_")
        X = self._validate_series(X, reset=False)
        return np.einsum("pk,tpq,qr->tkr", self.row_loadings_, X, self.col_loadings_)

    def reconstruct(self, X):
        """Projection of every ``X_t`` onto the estimated global and
        cluster-specific spaces."""
        check_is_fitted(self, "loadings_")
        X = self._validate_series(X, reset=False)
        return reconstruct(X, self.loadings_)


class MatrixBiclustering(BiclusterMixin, _SeriesEstimator):
    """Bicluster the rows and columns of a matrix time series.

    Parameters
    ----------
    l0 : int, default=1
    factor_numbers : tuple (k0, k, r0, r), optional
    J0_row, J0_col : int, optional
    n_row_clusters, n_col_clusters : int, optional
        Override the estimated cluster counts.
    n_init : int, default=20
        K-means restarts.
    max_iter : int, default=100
    tol : float, default=1e-8
    random_state : int, RandomState or None, default=None
        None means seed 0, so repeated fits agree.

    Attributes
    ----------
    row_labels_, column_labels_ : ndarray of int
        0-based cluster labels.
    rows_, columns_ : ndarray of bool
        Checkerboard bicluster indicators, one row per (row cluster,
        column cluster) pair.
    result_ : BiclusterResult
        Full diagnostics, with 1-based memberships.
    loadings_ : LoadingSet
    factor_numbers_ : FactorNumbers
    """

    def __init__(
        self,
        l0=1,
        factor_numbers=None,
        J0_row=None,
        J0_col=None,
        n_row_clusters=None,
        n_col_clusters=None,
        n_init=20,
        max_iter=100,
        tol=1e-8,
        random_state=None,
    ):
        self.l0 = l0
        self.factor_numbers = factor_numbers
        self.J0_row = J0_row
        self.J0_col = J0_col
        self.n_row_clusters = n_row_clusters
        self.n_col_clusters = n_col_clusters
        self.n_init = n_init
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def _seed(self):
        rs = self.random_state
        if rs is None:
            return 0
        if isinstance(rs, numbers.Integral):
            return int(rs)
        return int(check_random_state(rs).randint(np.iinfo(np.int32).max))

    def fit(self, X, y=None):
        X = self._validate_series(X, reset=True)
        cfg = KMeansConfig(restarts=self.n_init, max_iter=self.max_iter, tol=self.tol, seed=self._seed())
        result, loadings, fn = bicluster_pipeline(
            X,
            l0=self.l0,
            factor_numbers=_factor_numbers(self.factor_numbers),
            kmeans_cfg=cfg,
            J0_row=self.J0_row,
            J0_col=self.J0_col,
            n_row_clusters=self.n_row_clusters,
            n_col_clusters=self.n_col_clusters,
        )
        self.result_ = result
        self.loadings_ = loadings
        self.factor_numbers_ = fn
        self.row_labels_ = result.row_membership - 1
        self.column_labels_ = result.col_membership - 1
        n_r = int(self.row_labels_.max()) + 1
        n_c = int(self.column_labels_.max()) + 1
        self.rows_ = np.vstack([self.row_labels_ == a for a in range(n_r) for _ in range(n_c)])
        self.columns_ = np.vstack([self.column_labels_ == b for _ in range(n_r) for b in range(n_c)])
        return self

    def fit_predict(self, X, y=None):
        """Fit and return ``(row_labels_, column_labels_)``."""
        self.fit(X)
        return self.row_labels_, self.column_labels_
