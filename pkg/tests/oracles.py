"""Slow, obviously-correct reference implementations used only by tests."""

import itertools

import numpy as np


def naive_lag_cov(X, i, j, l, orientation="column"):
    """(T-l)^-1 sum_t x_{t,i} x_{t+l,j}^T over columns (or rows) i, j."""
    T = X.shape[0]
    if orientation == "column":
        vec = lambda t, a: X[t][:, a]  # noqa: E731
        d = X.shape[1]
    else:
        vec = lambda t, a: X[t][a, :]  # noqa: E731
        d = X.shape[2]
    S = np.zeros((d, d))
    for t in range(T - l):
        S += np.outer(vec(t, i), vec(t + l, j))
    return S / (T - l)


def naive_aggregate(X, l0, orientation="column", lags=None):
    """sum_l sum_{i,j} S_ij(l) S_ij(l)^T by explicit loops."""
    c = X.shape[2] if orientation == "column" else X.shape[1]
    d = X.shape[1] if orientation == "column" else X.shape[2]
    M = np.zeros((d, d))
    for l in lags if lags is not None else range(1, l0 + 1):
        for i in range(c):
            for j in range(c):
                S = naive_lag_cov(X, i, j, l, orientation)
                M += S @ S.T
    return M


def naive_all_aggregates(X, l0, C0, R0, Gamma0=None, Lam0=None, R=None, C=None):
    """All eight aggregates from loops, given projection bases."""
    out = {
        "M01": naive_aggregate(X, l0, "column"),
        "M02": naive_aggregate(X, l0, "row"),
        "M1": naive_aggregate(np.stack([x @ C0 for x in X]), l0, "column"),
        "M2": naive_aggregate(np.stack([x.T @ R0 for x in X]), l0, "column"),
    }
    if R is not None:
        Pr = np.eye(X.shape[1]) - R @ R.T
        Pc = np.eye(X.shape[2]) - C @ C.T
        Y = np.stack([Pr @ x @ Pc for x in X])
        out["Mstar01"] = naive_aggregate(Y, l0, "column")
        out["Mstar02"] = naive_aggregate(Y, l0, "row")
        out["Mstar1"] = naive_aggregate(np.stack([y @ Lam0 for y in Y]), l0, "column")
        out["Mstar2"] = naive_aggregate(np.stack([y.T @ Gamma0 for y in Y]), l0, "column")
    return out


def charpoly_eigenvalues(M):
    """Eigenvalues from the characteristic polynomial (Faddeev-LeVerrier
    coefficients, then polynomial roots); fine for d <= 4."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    coeffs = [1.0]
    Mk = np.zeros_like(M)
    I = np.eye(n)
    for k in range(1, n + 1):
        Mk = M @ Mk + coeffs[-1] * I
        coeffs.append(-np.trace(M @ Mk) / k)
    roots = np.roots(coeffs)
    return np.sort(roots.real)[::-1]


def kmeans_exhaustive(X, k):
    """Global minimum of the within-cluster sum of squares over all
    assignments of the rows of X to at most k labels."""
    X = np.asarray(X, dtype=float)
    best = np.inf
    best_labels = None
    for labels in itertools.product(range(k), repeat=X.shape[0]):
        labels = np.array(labels)
        obj = 0.0
        for c in range(k):
            pts = X[labels == c]
            if len(pts):
                obj += np.sum((pts - pts.mean(axis=0)) ** 2)
        if obj < best - 1e-12:
            best, best_labels = obj, labels
    return best, best_labels


def misclustering_exhaustive(found, truth):
    """1 - best agreement over all injective maps of found labels."""
    found = list(found)
    truth = list(truth)
    fl = sorted(set(found))
    tl = sorted(set(truth))
    targets = tl + [None] * max(0, len(fl) - len(tl))
    best = 0
    for perm in itertools.permutations(targets, len(fl)):
        mapping = dict(zip(fl, perm))
        agree = sum(1 for a, b in zip(found, truth) if mapping[a] == b)
        best = max(best, agree)
    return 1.0 - best / len(found)


def projector_distance(S1, S2):
    """sqrt(1 - tr(P1 P2)/min(k1, k2)) with explicit projectors."""
    P1 = S1 @ np.linalg.pinv(S1)
    P2 = S2 @ np.linalg.pinv(S2)
    k = min(S1.shape[1], S2.shape[1])
    return float(np.sqrt(max(0.0, 1.0 - np.trace(P1 @ P2) / k)))


def random_orthonormal(rng, d, k):
    Q, _ = np.linalg.qr(rng.standard_normal((d, k)))
    return Q
