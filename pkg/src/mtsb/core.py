"""Shared data types, input validation and small linear-algebra helpers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import (
    DimensionError,
    OrthonormalityError,
    RankError,
    SymmetryError,
)

ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class MatrixSeries:
    """A length-T sequence of p x q observation matrices.

    Parameters
    ----------
    data : array-like of shape (T, p, q)
    row_labels, col_labels : sequence of str, optional
    """

    data: np.ndarray
    row_labels: Optional[Sequence[str]] = None
    col_labels: Optional[Sequence[str]] = None

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=float)
        if arr.ndim != 3:
            raise DimensionError(f"expected a (T, p, q) array, got shape {arr.shape}")
        T, p, q = arr.shape
        if T < 2 or p < 1 or q < 1:
            raise DimensionError(f"need T >= 2, p >= 1, q >= 1; got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("series contains NaN or Inf")
        object.__setattr__(self, "data", arr)
        if self.row_labels is not None:
            labels = [str(x) for x in self.row_labels]
            if len(labels) != p:
                raise DimensionError(f"{len(labels)} row labels for p={p}")
            object.__setattr__(self, "row_labels", labels)
        if self.col_labels is not None:
            labels = [str(x) for x in self.col_labels]
            if len(labels) != q:
                raise DimensionError(f"{len(labels)} column labels for q={q}")
            object.__setattr__(self, "col_labels", labels)

    @property
    def shape(self):
        return self.data.shape

    @property
    def T(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    @property
    def q(self) -> int:
        return self.data.shape[2]

    def with_data(self, data) -> "MatrixSeries":
        return MatrixSeries(data, self.row_labels, self.col_labels)

    def head(self, n: int) -> "MatrixSeries":
        """First ``n`` time points."""
        return self.with_data(self.data[:n])


def check_series(X, min_T: int = 2) -> np.ndarray:
    """Return ``X`` as a finite float (T, p, q) array.

    Accepts a :class:`MatrixSeries` or anything ``np.asarray`` understands.
    """
    if isinstance(X, MatrixSeries):
        arr = X.data
    else:
        arr = np.asarray(X, dtype=float)
        if arr.ndim != 3:
            raise DimensionError(f"expected a (T, p, q) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("series contains NaN or Inf")
    if arr.shape[0] < min_T:
        raise DimensionError(f"need at least {min_T} time points, got {arr.shape[0]}")
    return arr


def check_orthonormal(V, tol: float = ORTHO_TOL, name: str = "loading") -> np.ndarray:
    """Validate that ``V`` has orthonormal columns; return it as a 2-D array."""
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {V.shape}")
    d, k = V.shape
    if k > d:
        raise DimensionError(f"{name} has {k} columns but only {d} rows")
    if k == 0:
        return V
    err = np.max(np.abs(V.T @ V - np.eye(k)))
    if not err < tol:
        raise OrthonormalityError(f"{name} columns not orthonormal (max deviation {err:.3g})")
    return V


@dataclass(frozen=True)
class LoadingSet:
    """Estimated orthonormal loading matrices.

    ``R`` (p x k0) and ``C`` (q x r0) span the global row/column spaces,
    ``Gamma`` (p x k) and ``Lambda`` (q x r) the cluster-specific ones.
    Baselines carry empty (zero-column) weak loadings.
    """

    R: np.ndarray
    C: np.ndarray
    Gamma: np.ndarray
    Lambda: np.ndarray

    def __post_init__(self):
        R = check_orthonormal(self.R, name="R")
        C = check_orthonormal(self.C, name="C")
        G = check_orthonormal(self.Gamma, name="Gamma")
        L = check_orthonormal(self.Lambda, name="Lambda")
        if G.shape[0] != R.shape[0] or L.shape[0] != C.shape[0]:
            raise DimensionError("row/column loading dimensions disagree")
        for name, val in zip(("R", "C", "Gamma", "Lambda"), (R, C, G, L)):
            object.__setattr__(self, name, val)

    @property
    def p(self) -> int:
        return self.R.shape[0]

    @property
    def q(self) -> int:
        return self.C.shape[0]

    @classmethod
    def strong_only(cls, R, C) -> "LoadingSet":
        R = np.asarray(R, dtype=float)
        C = np.asarray(C, dtype=float)
        return cls(R, C, np.zeros((R.shape[0], 0)), np.zeros((C.shape[0], 0)))


@dataclass(frozen=True)
class RatioDiagnostics:
    """Eigenvalue-ratio sequence with the chosen local maxima.

    Indices in ``local_max_indices`` and ``chosen`` are 1-based, so an index
    can be read directly as a factor count.  ``rank_cutoff`` is the 1-based
    position where the tail eigenvalue guard truncated the sequence, if it did.
    """

    eigenvalues: np.ndarray
    ratios: np.ndarray
    local_max_indices: tuple = ()
    chosen: tuple = ()
    rank_cutoff: Optional[int] = None


@dataclass(frozen=True)
class FactorNumbers:
    k0: int
    k: int
    r0: int
    r: int
    row_diagnostics: Optional[RatioDiagnostics] = field(default=None, compare=False)
    col_diagnostics: Optional[RatioDiagnostics] = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("k0", "k", "r0", "r"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def row_ratios(self):
        return None if self.row_diagnostics is None else self.row_diagnostics.ratios

    @property
    def col_ratios(self):
        return None if self.col_diagnostics is None else self.col_diagnostics.ratios

    def as_tuple(self):
        return (self.k0, self.k, self.r0, self.r)

    def check_dims(self, p: int, q: int):
        if self.k0 + self.k > p:
            raise DimensionError(f"k0 + k = {self.k0 + self.k} exceeds p = {p}")
        if self.r0 + self.r > q:
            raise DimensionError(f"r0 + r = {self.r0 + self.r} exceeds q = {q}")


@dataclass(frozen=True)
class BiclusterResult:
    """Row/column cluster memberships (labels 1..m_hat, 1..n_hat)."""

    m_hat: int
    n_hat: int
    row_membership: np.ndarray
    col_membership: np.ndarray
    D: np.ndarray
    K: np.ndarray
    row_gram_eigenvalues: Optional[np.ndarray] = None
    col_gram_eigenvalues: Optional[np.ndarray] = None
    n_row_clusters: Optional[int] = None
    n_col_clusters: Optional[int] = None


def symmetrize(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def sym_eig_top(M, k: int, tol: float = 1e-8):
    """Leading ``k`` eigenpairs of a symmetric matrix.

    Eigenvalues come back in descending order.  Each eigenvector is sign-fixed
    so that its entry of largest absolute value is positive (ties go to the
    first such entry), which makes repeated runs bit-reproducible.

    Raises
    ------
    SymmetryError
        If ``M`` is asymmetric beyond ``tol * max|M|``.
    DimensionError
        If ``k`` is not in ``1..d``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    d = M.shape[0]
    if not 1 <= k <= d:
        raise DimensionError(f"k={k} must lie in 1..{d}")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if np.max(np.abs(M - M.T)) > tol * max(scale, np.finfo(float).tiny):
        raise SymmetryError("matrix is not symmetric")
    w, V = np.linalg.eigh(symmetrize(M))
    w = w[::-1][:k]
    V = V[:, ::-1][:, :k]
    return w, fix_signs(V)


def fix_signs(V) -> np.ndarray:
    V = np.array(V, dtype=float, copy=True)
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def residual_projector(V) -> np.ndarray:
    """``I - V V^T`` for a column-orthonormal ``V``."""
    V = check_orthonormal(V)
    d = V.shape[0]
    return np.eye(d) - V @ V.T


def orthonormal_basis(S, rank_tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis for the column space of a full-column-rank matrix."""
    S = np.asarray(S, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    if S.shape[1] == 0 or S.shape[1] > S.shape[0]:
        raise RankError(f"matrix of shape {S.shape} cannot have full column rank")
    sv = np.linalg.svd(S, compute_uv=False)
    if not sv[-1] > rank_tol * sv[0]:
        raise RankError("matrix is rank deficient")
    Q, _ = np.linalg.qr(S)
    return Q


def space_distance(S1, S2) -> float:
    """Distance in [0, 1] between the column spaces of ``S1`` and ``S2``.

    ``sqrt(1 - tr(P1 P2) / min(k1, k2))`` with ``P_i`` the orthogonal projector
    onto the span of ``S_i``.  It is 0 when one space contains the other and 1
    when they are orthogonal.
    """
    O1 = orthonormal_basis(S1)
    O2 = orthonormal_basis(S2)
    if O1.shape[0] != O2.shape[0]:
        raise DimensionError("inputs must have the same number of rows")
    k = min(O1.shape[1], O2.shape[1])
    # tr(O1 O1' O2 O2') = ||O1' O2||_F^2
    overlap = np.sum((O1.T @ O2) ** 2) / k
    return float(np.sqrt(np.clip(1.0 - overlap, 0.0, 1.0)))
