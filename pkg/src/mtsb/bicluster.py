"""Cluster counting, similarity matrices, K-means and the full biclustering chain."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import BiclusterResult, FactorNumbers, LoadingSet, check_series
from .exceptions import ConfigError, DimensionError, StageError
from .estimate import (
    estimate_cluster_loadings,
    estimate_factor_numbers,
    estimate_global_loadings,
)
from .spectral import aggregate_M0

NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class KMeansConfig:
    n_clusters: int = 2
    restarts: int = 20
    max_iter: int = 100
    tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ConfigError("n_clusters must be >= 1")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")


def abs_gram_eigenvalues(L):
    """Descending eigenvalues of ``|L L^T|`` (entrywise absolute value)."""
    L = np.asarray(L, dtype=float)
    return np.linalg.eigvalsh(np.abs(L @ L.T))[::-1]


def cluster_count_upper_bound(L, T):
    """Number of eigenvalues of ``|L L^T|`` above ``1 - 1/log(T)``."""
    if T <= 2:
        raise ConfigError(f"T must exceed 2 for the log threshold, got {T}")
    threshold = 1.0 - 1.0 / math.log(T)
    return int(np.sum(abs_gram_eigenvalues(L) > threshold))


def similarity_matrix(L):
    """Absolute cosine similarity between the rows of ``L``.

    Rows with norm below 1e-12 get zero similarity to every other row (their
    diagonal entry stays 1) and trigger a warning.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2:
        raise DimensionError("loading matrix must be 2-D")
    norms = np.linalg.norm(L, axis=1)
    bad = norms < NORM_FLOOR
    if bad.any():
        warnings.warn(f"{int(bad.sum())} loading rows have near-zero norm", RuntimeWarning, stacklevel=2)
    U = np.zeros_like(L)
    U[~bad] = L[~bad] / norms[~bad, None]
    S = np.clip(np.abs(U @ U.T), 0.0, 1.0)
    S = 0.5 * (S + S.T)
    np.fill_diagonal(S, 1.0)
    return S


def degenerate_rows(L):
    return np.linalg.norm(np.asarray(L, dtype=float), axis=1) < NORM_FLOOR


def _kmeanspp(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers[c] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[c]) ** 2, axis=1))
    return centers


def _sq_dists(X, centers):
    d = (X**2).sum(1)[:, None] - 2 * X @ centers.T + (centers**2).sum(1)[None, :]
    return np.maximum(d, 0.0)


def lloyd(X, centers, max_iter=100, tol=1e-8):
    """Lloyd iterations from given centers.

    Returns ``(labels, centers, objective_trace)``; the trace lists the
    within-cluster sum of squares after each assignment step.
    """
    X = np.asarray(X, dtype=float)
    centers = np.array(centers, dtype=float, copy=True)
    k = centers.shape[0]
    trace = []
    labels = None
    for _ in range(max_iter):
        d = _sq_dists(X, centers)
        labels = np.argmin(d, axis=1)
        obj = float(d[np.arange(X.shape[0]), labels].sum())
        trace.append(obj)
        new = centers.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new[c] = X[members].mean(axis=0)
            else:
                # empty cluster: move it to the point farthest from its center
                far = np.argmax(d[np.arange(X.shape[0]), labels])
                new[c] = X[far]
        centers = new
        if len(trace) > 1 and trace[-2] - trace[-1] <= tol * max(trace[-2], 1e-300):
            break
    # objective for the final centers, never above the last assignment objective
    d = _sq_dists(X, centers)
    labels = np.argmin(d, axis=1)
    trace.append(float(d[np.arange(X.shape[0]), labels].sum()))
    return labels, centers, trace


def canonical_labels(labels):
    """Relabel so clusters are numbered 1, 2, ... by order of first appearance."""
    labels = np.asarray(labels)
    mapping = {}
    out = np.empty(labels.shape, dtype=int)
    for i, lab in enumerate(labels):
        if lab not in mapping:
            mapping[lab] = len(mapping) + 1
        out[i] = mapping[lab]
    return out


def kmeans(X, cfg: KMeansConfig):
    """Best-of-restarts K-means with k-means++ seeding.

    Returns ``(labels, objective, traces)``; labels are 1-based and canonical.
    """
    X = np.asarray(X, dtype=float)
    if cfg.n_clusters > X.shape[0]:
        raise DimensionError(f"n_clusters={cfg.n_clusters} exceeds the {X.shape[0]} points")
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    best = None
    traces = []
    for idx, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        labels, _, trace = lloyd(X, _kmeanspp(X, cfg.n_clusters, rng), cfg.max_iter, cfg.tol)
        traces.append(trace)
        key = (trace[-1], idx)
        if best is None or key < best[0]:
            best = (key, labels)
    return canonical_labels(best[1]), best[0][0], traces


def kmeans_rows(M, cfg: KMeansConfig):
    """K-means on the rows of ``M`` (treated as points in Euclidean space)."""
    return kmeans(M, cfg)[0]


def _cluster_similarity(S, degenerate, n_clusters, cfg):
    d = S.shape[0]
    good = ~degenerate
    n_good = int(good.sum())
    if n_good == 0:
        return np.ones(d, dtype=int)
    k = min(n_clusters, n_good)
    sub = S[np.ix_(good, good)]
    labels = np.empty(d, dtype=int)
    labels[good] = kmeans_rows(sub, KMeansConfig(k, cfg.restarts, cfg.max_iter, cfg.tol, cfg.seed))
    if degenerate.any():
        warnings.warn(
            f"assigning {int(degenerate.sum())} degenerate rows to the largest cluster",
            RuntimeWarning,
            stacklevel=3,
        )
        largest = np.bincount(labels[good]).argmax()
        labels[degenerate] = largest
        labels = canonical_labels(labels)
    return labels


def bicluster_from_loadings(Gamma, Lam, T, kmeans_cfg=None, n_row_clusters=None, n_col_clusters=None):
    """Cluster counts, similarities and memberships from weak loadings.

    ``n_row_clusters``/``n_col_clusters`` override the estimated counts that
    are otherwise passed to K-means.
    """
    cfg = kmeans_cfg or KMeansConfig()
    row_eigs = abs_gram_eigenvalues(Gamma)
    col_eigs = abs_gram_eigenvalues(Lam)
    m_hat = cluster_count_upper_bound(Gamma, T)
    n_hat = cluster_count_upper_bound(Lam, T)
    D = similarity_matrix(Gamma)
    K = similarity_matrix(Lam)
    m_use = n_row_clusters if n_row_clusters is not None else max(m_hat, 1)
    n_use = n_col_clusters if n_col_clusters is not None else max(n_hat, 1)
    rows = _cluster_similarity(D, degenerate_rows(Gamma), m_use, cfg)
    cols = _cluster_similarity(K, degenerate_rows(Lam), n_use, cfg)
    return BiclusterResult(
        m_hat=m_hat,
        n_hat=n_hat,
        row_membership=rows,
        col_membership=cols,
        D=D,
        K=K,
        row_gram_eigenvalues=row_eigs,
        col_gram_eigenvalues=col_eigs,
        n_row_clusters=int(rows.max()),
        n_col_clusters=int(cols.max()),
    )


def run_stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def bicluster_pipeline(
    series,
    l0=1,
    factor_numbers=None,
    kmeans_cfg=None,
    J0_row=None,
    J0_col=None,
    n_row_clusters=None,
    n_col_clusters=None,
):
    """Full chain: factor numbers, global loadings, cluster-specific loadings,
    cluster counts and K-means.

    Returns
    -------
    result : BiclusterResult
    loadings : LoadingSet
    factor_numbers : FactorNumbers
        The estimated numbers, or the supplied ones.
    """
    X = check_series(series)
    T = X.shape[0]
    M01 = M02 = None
    if factor_numbers is None:
        M01 = run_stage("aggregate", aggregate_M0, X, l0, "column")
        M02 = run_stage("aggregate", aggregate_M0, X, l0, "row")
        factor_numbers = run_stage(
            "factor_numbers", estimate_factor_numbers, X, l0, J0_row, J0_col, M01, M02
        )
    elif not isinstance(factor_numbers, FactorNumbers):
        factor_numbers = FactorNumbers(*factor_numbers)
    fn = factor_numbers
    run_stage("factor_numbers", fn.check_dims, X.shape[1], X.shape[2])
    R, C = run_stage("global_loadings", estimate_global_loadings, X, fn.k0, fn.r0, l0, 1, M01, M02)
    Gamma, Lam = run_stage("cluster_loadings", estimate_cluster_loadings, X, R, C, fn.k, fn.r, l0)
    result = run_stage(
        "kmeans",
        bicluster_from_loadings,
        Gamma,
        Lam,
        T,
        kmeans_cfg,
        n_row_clusters,
        n_col_clusters,
    )
    return result, LoadingSet(R, C, Gamma, Lam), fn


def misclustering_rate(found, truth):
    """Fraction of items misassigned under the best one-to-one label matching."""
    found = np.asarray(found)
    truth = np.asarray(truth)
    if found.shape != truth.shape or found.ndim != 1:
        raise DimensionError("membership vectors must be 1-D and of equal length")
    if found.size == 0:
        raise DimensionError("membership vectors must be nonempty")
    fl, fi = np.unique(found, return_inverse=True)
    tl, ti = np.unique(truth, return_inverse=True)
    confusion = np.zeros((fl.size, tl.size), dtype=int)
    np.add.at(confusion, (fi, ti), 1)
    rows, cols = linear_sum_assignment(confusion, maximize=True)
    return 1.0 - confusion[rows, cols].sum() / found.size


def cluster_accuracy(found, truth):
    return 1.0 - misclustering_rate(found, truth)
