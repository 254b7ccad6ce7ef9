"""Factor-number estimation and projection estimation of loading spaces."""

from __future__ import annotations

import math
import warnings

import numpy as np

from .core import FactorNumbers, RatioDiagnostics, check_series, sym_eig_top
from .exceptions import DimensionError, InsufficientDataError, OrderError
from .spectral import (
    aggregate_M0,
    aggregate_M_projected,
    aggregate_Mstar0,
    aggregate_Mstar_projected,
    residual_series,
)

TAIL_GUARD = 1e-12


def eigen_ratios(eigenvalues, J0):
    """Consecutive eigenvalue ratios ``lam_j / lam_{j+1}`` for ``j < J0``.

    The sequence stops before the first ``j`` whose denominator falls below
    ``1e-12 * lam_1``; that ``j`` is recorded as ``rank_cutoff``.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.ndim != 1:
        raise ValueError("eigenvalues must be 1-D")
    if np.any(np.diff(lam) > 0):
        raise OrderError("eigenvalues must be sorted in descending order")
    J0 = int(J0)
    if not 2 <= J0 <= lam.size:
        raise DimensionError(f"J0={J0} must lie in 2..{lam.size}")
    floor = TAIL_GUARD * lam[0]
    ratios = []
    cutoff = None
    for j in range(J0 - 1):
        if not lam[j + 1] > floor:
            cutoff = j + 1
            break
        ratios.append(lam[j] / lam[j + 1])
    return RatioDiagnostics(eigenvalues=lam, ratios=np.array(ratios), rank_cutoff=cutoff)


def _local_maxima(r):
    n = len(r)
    out = []
    for j in range(n):
        left = r[j - 1] if j > 0 else -np.inf
        right = r[j + 1] if j < n - 1 else -np.inf
        if r[j] >= left and r[j] >= right:
            out.append(j)
    return out


def _top_two(r, candidates):
    # sort by value descending, then by index ascending
    return sorted(candidates, key=lambda j: (-r[j], j))[:2]


def two_largest_local_maxima(diag):
    """1-based positions of the two largest local maxima of the ratio sequence.

    A position is a local maximum when its ratio is at least as large as each
    existing neighbour.  Ties go to the smaller index.  With fewer than two
    local maxima the two largest ratios overall are used instead.  Returned in
    order of decreasing ratio.
    """
    r = np.asarray(diag.ratios if isinstance(diag, RatioDiagnostics) else diag, dtype=float)
    if r.size < 2:
        raise InsufficientDataError(f"need at least two ratios, got {r.size}")
    peaks = _local_maxima(r)
    picked = _top_two(r, peaks) if len(peaks) >= 2 else _top_two(r, range(r.size))
    return tuple(j + 1 for j in picked)


def _direction_counts(M, J0, label):
    d = M.shape[0]
    lam = np.clip(np.linalg.eigvalsh(M)[::-1], 0.0, None)
    diag = eigen_ratios(lam, J0)
    cutoff = diag.rank_cutoff
    if cutoff is not None:
        # exact rank deficiency: the numerical rank is an infinite ratio, the only peak
        chosen = (cutoff, cutoff)
        peaks = (cutoff,)
    else:
        chosen = two_largest_local_maxima(diag)
        peaks = tuple(j + 1 for j in _local_maxima(diag.ratios))
    diag = RatioDiagnostics(
        eigenvalues=lam,
        ratios=diag.ratios,
        local_max_indices=peaks,
        chosen=chosen,
        rank_cutoff=cutoff,
    )
    strong = min(chosen)
    weak = max(chosen) - strong
    if weak == 0:
        warnings.warn(
            f"{label}: both selected ratio peaks coincide at {strong}; setting weak count to 1",
            RuntimeWarning,
            stacklevel=3,
        )
        weak = 1
    if strong + weak > d:
        weak = d - strong
    return strong, weak, diag


def default_J0(d):
    return max(2, min(d, math.ceil(d / 2)))


def estimate_factor_numbers(series, l0=1, J0_row=None, J0_col=None, M01=None, M02=None):
    """One-pass eigenvalue-ratio estimates of ``(k0, k, r0, r)``.

    The strong count is the smaller of the two selected ratio peaks and the
    strong-plus-weak count the larger.  ``M01``/``M02`` may be passed to reuse
    already computed aggregates.

    Parameters
    ----------
    series : MatrixSeries or array of shape (T, p, q)
    l0 : int
        Number of lags aggregated.
    J0_row, J0_col : int, optional
        Truncation points; default ``ceil(p/2)`` and ``ceil(q/2)``.
    """
    X = check_series(series)
    _, p, q = X.shape
    J0_row = default_J0(p) if J0_row is None else min(int(J0_row), p)
    J0_col = default_J0(q) if J0_col is None else min(int(J0_col), q)
    if M01 is None:
        M01 = aggregate_M0(X, l0, "column")
    if M02 is None:
        M02 = aggregate_M0(X, l0, "row")
    k0, k, rdiag = _direction_counts(M01, J0_row, "rows")
    r0, r, cdiag = _direction_counts(M02, J0_col, "columns")
    return FactorNumbers(k0, k, r0, r, row_diagnostics=rdiag, col_diagnostics=cdiag)


def initial_global_loadings(series, k0, r0, l0=1, M01=None, M02=None):
    """Leading eigenvectors of the unprojected aggregates (the first step of
    the global procedure; also the ACCE-style baseline)."""
    X = check_series(series)
    if M01 is None:
        M01 = aggregate_M0(X, l0, "column")
    if M02 is None:
        M02 = aggregate_M0(X, l0, "row")
    _, R0 = sym_eig_top(M01, k0)
    _, C0 = sym_eig_top(M02, r0)
    return R0, C0


def estimate_global_loadings(series, k0, r0, l0=1, n_refine=1, M01=None, M02=None):
    """Global row/column loadings by projection refinement.

    Start from the leading eigenvectors of the unprojected aggregates, project
    the data on the opposite-side estimate and take leading eigenvectors of
    the projected aggregates.  ``n_refine`` repeats the projection step (the
    default single pass is the standard procedure).

    Returns
    -------
    R_hat : ndarray of shape (p, k0)
    C_hat : ndarray of shape (q, r0)
    """
    X = check_series(series)
    _, p, q = X.shape
    if not (1 <= k0 <= p and 1 <= r0 <= q):
        raise DimensionError(f"(k0, r0)=({k0}, {r0}) out of range for p={p}, q={q}")
    if n_refine < 1:
        raise ValueError("n_refine must be >= 1")
    R, C = initial_global_loadings(X, k0, r0, l0, M01, M02)
    for _ in range(n_refine):
        M1 = aggregate_M_projected(X, C, l0, "column")
        M2 = aggregate_M_projected(X, R, l0, "row")
        _, R = sym_eig_top(M1, k0)
        _, C = sym_eig_top(M2, r0)
    return R, C


def estimate_cluster_loadings(series, R_hat, C_hat, k, r, l0=1):
    """Cluster-specific loadings from the residuals after removing the
    global spaces.

    The returned spaces target ``(I - R R^T) Gamma`` and ``(I - C C^T) Lambda``
    rather than ``Gamma`` and ``Lambda`` themselves.
    """
    X = check_series(series)
    _, p, q = X.shape
    R_hat = np.asarray(R_hat, dtype=float)
    C_hat = np.asarray(C_hat, dtype=float)
    if not (1 <= k <= p - R_hat.shape[1] and 1 <= r <= q - C_hat.shape[1]):
        raise DimensionError(
            f"(k, r)=({k}, {r}) out of range given p={p}, q={q} and the global counts"
        )
    Y = residual_series(X, R_hat, C_hat)
    _, G0 = sym_eig_top(aggregate_Mstar0(Y, l0, "column"), k)
    _, L0 = sym_eig_top(aggregate_Mstar0(Y, l0, "row"), r)
    _, Gamma = sym_eig_top(aggregate_Mstar_projected(Y, L0, l0, "column"), k)
    _, Lam = sym_eig_top(aggregate_Mstar_projected(Y, G0, l0, "row"), r)
    return Gamma, Lam
