"""Synthetic matrix time series with global and cluster-specific factors.

X_t = R G_t C' + Gamma F_t Lambda' + E_t, with

* loading entries i.i.d. U(-1, 1), ``Gamma``/``Lambda`` block diagonal;
* each entry of G_t a stationary AR(1), each entry of F_t an MA(1), with
  coefficients from U((-0.95, -0.4) u (0.4, 0.95)) and standard deviations
  from U(1, 2);
* each noise entry an independent MA(1) with N(0, 0.25) innovations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Tuple

import numpy as np

from .core import MatrixSeries
from .exceptions import ConfigError, StabilityError

DEFAULT_COEFF_RANGE = ((-0.95, -0.4), (0.4, 0.95))


@dataclass(frozen=True)
class ScenarioSpec:
    """Full description of one synthetic data-generating process.

    ``row_blocks``/``col_blocks`` are the cluster sizes (p_1..p_m, q_1..q_n),
    ``row_weak``/``col_weak`` the per-cluster weak factor counts.
    ``weak_scale`` multiplies the cluster-specific component (0 removes it) and
    ``orthogonal_strong`` makes the global loadings orthogonal to the
    cluster-specific ones; both are test hooks.
    """

    T: int
    row_blocks: Tuple[int, ...]
    col_blocks: Tuple[int, ...]
    k0: int
    r0: int
    row_weak: Tuple[int, ...]
    col_weak: Tuple[int, ...]
    ar_coeff_range: Tuple[Tuple[float, float], ...] = DEFAULT_COEFF_RANGE
    factor_sd_range: Tuple[float, float] = (1.0, 2.0)
    noise_innovation_variance: float = 0.25
    seed: int = 0
    weak_scale: float = 1.0
    orthogonal_strong: bool = False

    def __post_init__(self):
        for name in ("row_blocks", "col_blocks", "row_weak", "col_weak"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        object.__setattr__(
            self, "ar_coeff_range", tuple(tuple(map(float, iv)) for iv in self.ar_coeff_range)
        )
        object.__setattr__(self, "factor_sd_range", tuple(map(float, self.factor_sd_range)))
        self.validate()

    def validate(self):
        if self.T < 2:
            raise ConfigError("T must be at least 2")
        if not self.row_blocks or not self.col_blocks:
            raise ConfigError("need at least one row and one column cluster")
        if len(self.row_weak) != len(self.row_blocks):
            raise ConfigError("row_weak must have one entry per row cluster")
        if len(self.col_weak) != len(self.col_blocks):
            raise ConfigError("col_weak must have one entry per column cluster")
        counts = (self.k0, self.r0) + self.row_blocks + self.col_blocks + self.row_weak + self.col_weak
        if min(counts) < 1:
            raise ConfigError("all sizes and factor counts must be >= 1")
        for pi, ki in zip(self.row_blocks, self.row_weak):
            if ki > pi:
                raise ConfigError(f"row block of size {pi} cannot carry {ki} weak factors")
        for qj, rj in zip(self.col_blocks, self.col_weak):
            if rj > qj:
                raise ConfigError(f"column block of size {qj} cannot carry {rj} weak factors")
        if self.k0 + self.k > self.p or self.r0 + self.r > self.q:
            raise ConfigError("total factor counts exceed the matrix dimensions")
        for lo, hi in self.ar_coeff_range:
            if not lo < hi:
                raise ConfigError(f"empty coefficient interval ({lo}, {hi})")
            if max(abs(lo), abs(hi)) >= 1:
                raise ConfigError("coefficient intervals must stay inside (-1, 1)")
        lo, hi = self.factor_sd_range
        if not 0 < lo <= hi:
            raise ConfigError("factor_sd_range must be a positive interval")
        if self.noise_innovation_variance < 0:
            raise ConfigError("noise_innovation_variance must be nonnegative")

    @property
    def m(self):
        return len(self.row_blocks)

    @property
    def n(self):
        return len(self.col_blocks)

    @property
    def p(self):
        return sum(self.row_blocks)

    @property
    def q(self):
        return sum(self.col_blocks)

    @property
    def k(self):
        return sum(self.row_weak)

    @property
    def r(self):
        return sum(self.col_weak)

    def factor_numbers(self):
        return (self.k0, self.k, self.r0, self.r)

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


PRESETS = {"I": (400, 3, 3), "II": (500, 5, 4)}


def make_scenario_preset(name, p1, q1, seed=0, **overrides):
    """Scenario I (T=400, m=n=3) or II (T=500, m=5, n=4) with k0=k_i=3,
    r0=r_j=2 and equal block sizes ``p1``/``q1``."""
    key = str(name).upper()
    if key not in PRESETS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(PRESETS)}")
    T, m, n = PRESETS[key]
    k0, r0 = 3, 2
    if p1 < k0 + 1 or q1 < r0 + 1:
        raise ConfigError(f"block sizes ({p1}, {q1}) too small; need p1 >= {k0 + 1}, q1 >= {r0 + 1}")
    spec = dict(
        T=T,
        row_blocks=(p1,) * m,
        col_blocks=(q1,) * n,
        k0=k0,
        r0=r0,
        row_weak=(k0,) * m,
        col_weak=(r0,) * n,
        seed=seed,
    )
    spec.update(overrides)
    return ScenarioSpec(**spec)


@dataclass(frozen=True)
class GroundTruth:
    R: np.ndarray
    C: np.ndarray
    Gamma: np.ndarray
    Lambda: np.ndarray
    G: np.ndarray
    F: np.ndarray
    E0: np.ndarray
    row_truth: np.ndarray
    col_truth: np.ndarray
    coefficients: dict = field(default_factory=dict, compare=False)

    def common(self):
        return np.einsum("pk,tkr,qr->tpq", self.R, self.G, self.C)

    def weak(self):
        return np.einsum("pk,tkr,qr->tpq", self.Gamma, self.F, self.Lambda)

    def signal(self):
        return self.common() + self.weak()


def _draw_coeffs(rng, intervals, size):
    lengths = np.array([hi - lo for lo, hi in intervals])
    which = rng.choice(len(intervals), size=size, p=lengths / lengths.sum())
    u = rng.uniform(size=size)
    lo = np.array([iv[0] for iv in intervals])[which]
    return lo + u * lengths[which]


def _ar1_paths(coeffs, sds, T, rng):
    coeffs = np.asarray(coeffs, dtype=float)
    sds = np.asarray(sds, dtype=float)
    if np.any(np.abs(coeffs) >= 1):
        raise StabilityError("AR(1) coefficient must satisfy |coeff| < 1")
    if np.any(sds <= 0):
        raise ValueError("sd must be positive")
    z = rng.standard_normal((T,) + coeffs.shape)
    innov_sd = sds * np.sqrt(1.0 - coeffs**2)
    x = np.empty_like(z)
    x[0] = sds * z[0]  # stationary start
    for t in range(1, T):
        x[t] = coeffs * x[t - 1] + innov_sd * z[t]
    return x


def _ma1_paths(coeffs, sds, T, rng, innovation_sd=None):
    coeffs = np.asarray(coeffs, dtype=float)
    if innovation_sd is None:
        sds = np.asarray(sds, dtype=float)
        if np.any(sds <= 0):
            raise ValueError("sd must be positive")
        innovation_sd = sds / np.sqrt(1.0 + coeffs**2)
    e = innovation_sd * rng.standard_normal((T + 1,) + coeffs.shape)
    return e[1:] + coeffs * e[:-1]


def ar1_path(coeff, sd, T, rng):
    """Stationary AR(1) path of length ``T`` with marginal sd ``sd``."""
    return _ar1_paths(np.array([coeff]), np.array([sd]), T, rng)[:, 0]


def ma1_path(coeff, sd, T, rng):
    """MA(1) path ``e_t + coeff * e_{t-1}`` scaled to marginal sd ``sd``."""
    return _ma1_paths(np.array([coeff]), np.array([sd]), T, rng)[:, 0]


def _block_diag_uniform(rng, sizes, counts):
    d, k = sum(sizes), sum(counts)
    out = np.zeros((d, k))
    i = j = 0
    for s, c in zip(sizes, counts):
        out[i : i + s, j : j + c] = rng.uniform(-1.0, 1.0, size=(s, c))
        i += s
        j += c
    return out


def _membership(sizes):
    return np.repeat(np.arange(1, len(sizes) + 1), sizes)


def _remove_span(A, B):
    """Component of ``A`` orthogonal to the column space of ``B``."""
    Q, _ = np.linalg.qr(B)
    return A - Q @ (Q.T @ A)


def generate(spec: ScenarioSpec):
    """Draw one data set from ``spec``.

    Returns
    -------
    series : MatrixSeries
    truth : GroundTruth
        Satisfies ``X_t = R G_t C' + Gamma F_t Lambda' + E0_t`` exactly.
    """
    rng = np.random.default_rng(spec.seed)
    T, p, q = spec.T, spec.p, spec.q
    k0, r0, k, r = spec.k0, spec.r0, spec.k, spec.r

    R = rng.uniform(-1.0, 1.0, size=(p, k0))
    C = rng.uniform(-1.0, 1.0, size=(q, r0))
    Gamma = _block_diag_uniform(rng, spec.row_blocks, spec.row_weak)
    Lam = _block_diag_uniform(rng, spec.col_blocks, spec.col_weak)
    if spec.orthogonal_strong:
        R = _remove_span(R, Gamma)
        C = _remove_span(C, Lam)

    lo, hi = spec.factor_sd_range
    g_coef = _draw_coeffs(rng, spec.ar_coeff_range, (k0, r0))
    g_sd = rng.uniform(lo, hi, size=(k0, r0))
    f_coef = _draw_coeffs(rng, spec.ar_coeff_range, (k, r))
    f_sd = rng.uniform(lo, hi, size=(k, r))
    e_coef = _draw_coeffs(rng, spec.ar_coeff_range, (p, q))

    G = _ar1_paths(g_coef, g_sd, T, rng)
    F = _ma1_paths(f_coef, f_sd, T, rng) * spec.weak_scale
    E0 = _ma1_paths(e_coef, None, T, rng, innovation_sd=np.sqrt(spec.noise_innovation_variance))

    truth = GroundTruth(
        R=R,
        C=C,
        Gamma=Gamma,
        Lambda=Lam,
        G=G,
        F=F,
        E0=E0,
        row_truth=_membership(spec.row_blocks),
        col_truth=_membership(spec.col_blocks),
        coefficients=dict(g_coef=g_coef, g_sd=g_sd, f_coef=f_coef, f_sd=f_sd, e_coef=e_coef),
    )
    X = truth.signal() + E0
    return MatrixSeries(X), truth


def spec_field_names():
    return [f.name for f in fields(ScenarioSpec)]
