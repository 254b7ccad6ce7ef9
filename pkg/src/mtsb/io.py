"""Data ingestion, preprocessing, config files and CSV emission."""

from __future__ import annotations

import csv
import gzip
import io
import warnings
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .core import MatrixSeries, check_series
from .exceptions import ConfigError, IngestError

MAX_REPORTED_KEYS = 20


def _open_text(path, mode="r"):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", newline="")
    return open(path, mode, newline="")


def save_tensor_csv(series, path):
    """Write a series in long format ``t,row,col,value`` (t is 1-based)."""
    X = check_series(series)
    T, p, q = X.shape
    rows = getattr(series, "row_labels", None) or [f"r{i + 1}" for i in range(p)]
    cols = getattr(series, "col_labels", None) or [f"c{j + 1}" for j in range(q)]
    with _open_text(path, "w") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "row", "col", "value"])
        for t in range(T):
            for i in range(p):
                for j in range(q):
                    w.writerow([t + 1, rows[i], cols[j], repr(float(X[t, i, j]))])


def load_tensor_csv(path):
    """Read a long-format ``t,row,col,value`` file into a :class:`MatrixSeries`.

    Rows and columns are ordered by first appearance of their labels, time by
    the integer ``t``.  Missing or duplicated cells raise :class:`IngestError`.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"no such file: {path}")
    cells = {}
    row_order, col_order, times = {}, {}, set()
    dupes = []
    try:
        with _open_text(path) as fh:
            reader = csv.DictReader(fh)
            missing = {"t", "row", "col", "value"} - set(reader.fieldnames or [])
            if missing:
                raise IngestError(f"missing columns: {sorted(missing)}")
            for lineno, rec in enumerate(reader, start=2):
                try:
                    t = int(rec["t"])
                    val = float(rec["value"])
                except (TypeError, ValueError) as exc:
                    raise IngestError(f"line {lineno}: cannot parse {rec}") from exc
                if not np.isfinite(val):
                    raise IngestError(f"line {lineno}: non-finite value")
                r, c = rec["row"], rec["col"]
                row_order.setdefault(r, len(row_order))
                col_order.setdefault(c, len(col_order))
                times.add(t)
                key = (t, r, c)
                if key in cells:
                    dupes.append(key)
                cells[key] = val
    except (OSError, csv.Error, UnicodeDecodeError) as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    if dupes:
        raise IngestError(f"duplicate cells: {dupes[:MAX_REPORTED_KEYS]}")
    if not cells:
        raise IngestError("file contains no data rows")
    tlist = sorted(times)
    if tlist != list(range(tlist[0], tlist[0] + len(tlist))):
        raise IngestError("time index is not contiguous")
    rows, cols = list(row_order), list(col_order)
    holes = [
        (t, r, c)
        for t in tlist
        for r in rows
        for c in cols
        if (t, r, c) not in cells
    ]
    if holes:
        raise IngestError(
            f"{len(holes)} missing cells, e.g. {holes[:MAX_REPORTED_KEYS]}"
        )
    X = np.empty((len(tlist), len(rows), len(cols)))
    t0 = tlist[0]
    for (t, r, c), v in cells.items():
        X[t - t0, row_order[r], col_order[c]] = v
    return MatrixSeries(X, rows, cols)


def preprocess(series, demean=False, standardize=False):
    """Per-cell temporal demeaning and/or scaling to unit sample sd.

    Cells whose sd is below 1e-12 are left unscaled (with a warning).
    """
    X = check_series(series).copy()
    if demean:
        X -= X.mean(axis=0, keepdims=True)
    if standardize:
        if X.shape[0] < 3:
            raise ConfigError("standardizing needs at least 3 time points")
        sd = X.std(axis=0, ddof=1, keepdims=True)
        flat = sd < 1e-12
        if flat.any():
            warnings.warn(f"{int(flat.sum())} constant cells left unscaled", RuntimeWarning, stacklevel=2)
        X /= np.where(flat, 1.0, sd)
    if isinstance(series, MatrixSeries):
        return series.with_data(X)
    return MatrixSeries(X)


def write_matrix_csv(path, M, row_names=None, col_names=None):
    M = np.atleast_2d(np.asarray(M))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = [""] + (list(col_names) if col_names is not None else [str(j + 1) for j in range(M.shape[1])])
        w.writerow(header)
        for i, row in enumerate(M):
            name = row_names[i] if row_names is not None else str(i + 1)
            w.writerow([name] + [repr(float(v)) for v in row])


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in r[1:]] for r in rows[1:]])


def write_membership_csv(path, labels, membership):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "cluster"])
        for lab, c in zip(labels, membership):
            w.writerow([lab, int(c)])


def read_membership_csv(path):
    """Returns ``(labels, membership)``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [r["label"] for r in rows], np.array([int(r["cluster"]) for r in rows], dtype=int)


def write_vector_csv(path, name, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", name])
        for i, v in enumerate(values, start=1):
            w.writerow([i, repr(float(v))])


def _as_bool(val):
    if isinstance(val, bool):
        return val
    s = str(val).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {val!r}")


def _opt_int(val):
    if val is None or str(val).strip().lower() in ("", "none"):
        return None
    return int(val)


@dataclass
class RunConfig:
    """Settings shared by the analysis subcommands.

    ``l0`` defaults to 5, the lag count used for the macroeconomic panel.
    """

    l0: int = 5
    J0_row: Optional[int] = None
    J0_col: Optional[int] = None
    demean: bool = False
    standardize: bool = False
    kmeans_restarts: int = 20
    kmeans_max_iter: int = 100
    kmeans_tol: float = 1e-8
    seed: int = 0
    outdir: str = "."

    _CONVERT = {
        "l0": int,
        "J0_row": _opt_int,
        "J0_col": _opt_int,
        "demean": _as_bool,
        "standardize": _as_bool,
        "kmeans_restarts": int,
        "kmeans_max_iter": int,
        "kmeans_tol": float,
        "seed": int,
        "outdir": str,
    }

    def __post_init__(self):
        if self.l0 < 1:
            raise ConfigError(f"l0 must be >= 1, got {self.l0}")
        if self.kmeans_restarts < 1:
            raise ConfigError("kmeans_restarts must be >= 1")

    @classmethod
    def from_mapping(cls, values):
        """Build from string key/values; unknown keys are ignored."""
        kwargs = {}
        names = {f.name for f in fields(cls)}
        for key, val in values.items():
            if key in names and val is not None:
                try:
                    kwargs[key] = cls._CONVERT[key](val)
                except ValueError as exc:
                    raise ConfigError(f"bad value for {key}: {val!r}") from exc
        return cls(**kwargs)


def parse_config_text(text):
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def read_config(path):
    try:
        return parse_config_text(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _int_tuple(val):
    return tuple(int(v) for v in str(val).replace(" ", "").split(",") if v)


def scenario_from_config(cfg):
    """Build a :class:`~mtsb.simulate.ScenarioSpec` from config key/values.

    Either give ``scenario`` (I or II) with ``p1``/``q1`` plus optional
    overrides, or the full field set (``row_blocks``, ``col_blocks``, ...).
    """
    from .simulate import ScenarioSpec, make_scenario_preset

    cfg = dict(cfg)
    conv = {
        "T": int,
        "k0": int,
        "r0": int,
        "seed": int,
        "noise_innovation_variance": float,
        "weak_scale": float,
        "row_blocks": _int_tuple,
        "col_blocks": _int_tuple,
        "row_weak": _int_tuple,
        "col_weak": _int_tuple,
        "orthogonal_strong": _as_bool,
        "factor_sd_range": lambda v: tuple(float(x) for x in str(v).split(",")),
        "ar_coeff_range": _coeff_ranges,
    }
    kwargs = {}
    for key, val in cfg.items():
        if key in conv:
            try:
                kwargs[key] = conv[key](val) if isinstance(val, str) else val
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {val!r}") from exc
    if "scenario" in cfg:
        try:
            p1, q1 = int(cfg["p1"]), int(cfg["q1"])
        except KeyError as exc:
            raise ConfigError("preset scenarios need p1 and q1") from exc
        return make_scenario_preset(cfg["scenario"], p1, q1, **kwargs)
    try:
        return ScenarioSpec(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"incomplete scenario config: {exc}") from exc


def _coeff_ranges(val):
    # "-0.95:-0.4,0.4:0.95"
    out = []
    for part in str(val).split(","):
        lo, hi = part.split(":")
        out.append((float(lo), float(hi)))
    return tuple(out)
