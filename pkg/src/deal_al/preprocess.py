"""Tabular preprocessing: encoding, imputation, scaling, PCA, class grouping.

The statistics-bearing steps (imputation means, standardization, PCA basis,
dimension choice) are bundled in :class:`FoldPipeline` so they can be fitted
on a training fold and replayed unchanged on its test fold. The label-free
steps (categorical encoding, class grouping) are applied to the whole table.
"""

from __future__ import annotations

import csv
import json
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.stats import norm

COLUMN_KINDS = ("continuous", "categorical", "label", "ignore")
MIN_COMPONENTS = 2


class InputError(ValueError):
    """Malformed input table or sidecar; the message names the offending cell."""


class DegenerateColumnError(ValueError):
    """A column carries no information (single outcome, all missing, ...)."""


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in COLUMN_KINDS:
            raise InputError(f"column {self.name!r}: unknown kind {self.kind!r}")


@dataclass
class RawTable:
    """Cells as strings, ``None`` for missing."""

    columns: list[ColumnSpec]
    rows: list[list[str | None]]
    name: str = "dataset"

    def __post_init__(self):
        labels = [c for c in self.columns if c.kind == "label"]
        if len(labels) != 1:
            raise InputError(f"expected exactly one label column, found {len(labels)}")
        if not any(c.kind in ("continuous", "categorical") for c in self.columns):
            raise InputError("table has no feature columns")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                raise InputError(
                    f"row {i + 1}: expected {len(self.columns)} cells, got {len(row)}"
                )
        j = self.column_index(labels[0].name)
        values = [row[j] for row in self.rows]
        for i, v in enumerate(values):
            if v is None:
                raise InputError(f"row {i + 1}, column {labels[0].name!r}: missing label")
        if len(set(values)) < 2:
            raise InputError("label column has fewer than two distinct values")

    @property
    def label_column(self) -> str:
        return next(c.name for c in self.columns if c.kind == "label")

    def column_index(self, name: str) -> int:
        for j, c in enumerate(self.columns):
            if c.name == name:
                return j
        raise KeyError(name)

    def column(self, name: str) -> list[str | None]:
        j = self.column_index(name)
        return [row[j] for row in self.rows]


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    name: str
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X must be (n, d) with one label per row")
        if not np.all(np.isin(self.y, (-1, 1))):
            raise ValueError("labels must be -1 or +1")


# ---------------------------------------------------------------------------
# Loading


def read_meta(path: str | Path) -> dict[str, Any]:
    try:
        meta = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(meta, dict):
        raise InputError(f"{path}: sidecar must be a JSON object")
    if "label" not in meta:
        raise InputError(f"{path}: sidecar does not declare a label column")
    return meta


def load_table(csv_path: str | Path, meta: Mapping[str, Any]) -> RawTable:
    """Read a headed CSV using the column kinds declared in ``meta``.

    Recognised sidecar keys: ``label`` (required), ``columns`` (name -> kind),
    ``default_kind`` (for undeclared columns, default ``continuous``),
    ``missing`` (token or list of tokens, default the empty cell) and
    ``name``.
    """
    csv_path = Path(csv_path)
    missing = meta.get("missing", "")
    missing = {missing} if isinstance(missing, str) else set(missing)
    kinds = dict(meta.get("columns", {}))
    default_kind = meta.get("default_kind", "continuous")
    label = meta["label"]

    with csv_path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{csv_path}: empty file") from None
        body = [r for r in reader if r]

    header = [h.strip() for h in header]
    if label not in header:
        raise InputError(f"{csv_path}: label column {label!r} not in header")
    unknown = set(kinds) - set(header)
    if unknown:
        raise InputError(f"{csv_path}: sidecar names unknown columns {sorted(unknown)}")

    columns = []
    for h in header:
        kind = "label" if h == label else kinds.get(h, default_kind)
        columns.append(ColumnSpec(h, kind))
    rows = []
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise InputError(
                f"{csv_path}: row {i + 2} has {len(r)} cells, header has {len(header)}"
            )
        rows.append([None if v.strip() in missing else v.strip() for v in r])
    name = meta.get("name") or csv_path.name.split(".")[0]
    return RawTable(columns, rows, name)


# ---------------------------------------------------------------------------
# Column transforms


def _outcome_key(v):
    # missing sorts first, so it is never the dropped reference outcome
    return (0, "") if v is None else (1, v)


def encode_categorical(values: Sequence[str | None]) -> tuple[np.ndarray, list[str | None]]:
    """Indicator encoding with the lexicographically last outcome as reference.

    Missing cells count as an outcome of their own. Returns the ``(n, c - 1)``
    indicator matrix and the outcomes its columns stand for.
    """
    outcomes = sorted(set(values), key=_outcome_key)
    if len(outcomes) < 2:
        raise DegenerateColumnError("categorical column has a single outcome")
    kept = outcomes[:-1]
    pos = {o: j for j, o in enumerate(kept)}
    out = np.zeros((len(values), len(kept)))
    for i, v in enumerate(values):
        j = pos.get(v)
        if j is not None:
            out[i, j] = 1.0
    return out, kept


def impute_continuous(col) -> np.ndarray:
    """Replace NaNs by the mean of the observed entries."""
    col = np.asarray(col, dtype=float)
    observed = ~np.isnan(col)
    if not observed.any():
        raise DegenerateColumnError("continuous column has no observed values")
    return np.where(observed, col, col[observed].mean())


def standardize(X) -> tuple[np.ndarray, dict[str, Any]]:
    """Center and scale columns to unit sample variance (divisor n - 1).

    Constant columns are dropped with a warning; ``stats["kept"]`` lists the
    surviving column indices.
    """
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
    kept = np.flatnonzero(std > 0)
    dropped = np.flatnonzero(~(std > 0))
    if dropped.size:
        warnings.warn(f"dropping {dropped.size} constant column(s): {dropped.tolist()}",
                      stacklevel=2)
    Z = (X[:, kept] - mean[kept]) / std[kept]
    stats = {"mean": mean[kept], "std": std[kept], "kept": kept, "dropped": dropped}
    return Z, stats


def binarize_classes(labels: Sequence[str], grouping: Mapping[str, Any] | str | None = "auto"):
    """Map original class labels to {-1, +1}.

    Parameters
    ----------
    labels : sequence of str
    grouping : "auto", None or mapping
        A mapping ``{"positive": [...], "negative": [...]}`` assigns classes
        explicitly (``negative`` defaults to every other class). With
        ``"auto"``/``None`` two classes are ordered lexicographically (first
        becomes -1); more classes are split greedily into two groups of similar
        size, largest class first, and the group holding the lexicographically
        smallest class becomes -1.

    Returns
    -------
    y : ndarray of int
    info : dict with the two groups and the imbalance |n+ - n-| / n
    """
    labels = [str(v) for v in labels]
    counts = Counter(labels)
    classes = sorted(counts)
    if len(classes) < 2:
        raise ValueError("need at least two classes")

    if grouping is None or grouping == "auto":
        if len(classes) == 2:
            neg, pos = [classes[0]], [classes[1]]
        else:
            groups: tuple[list[str], list[str]] = ([], [])
            sizes = [0, 0]
            for c in sorted(classes, key=lambda c: (-counts[c], c)):
                g = 0 if sizes[0] <= sizes[1] else 1
                groups[g].append(c)
                sizes[g] += counts[c]
            a, b = sorted(groups[0]), sorted(groups[1])
            neg, pos = (a, b) if min(a) < min(b) else (b, a)
    else:
        if not isinstance(grouping, Mapping) or "positive" not in grouping:
            raise ValueError("explicit grouping must be a mapping with a 'positive' list")
        pos = sorted(str(c) for c in grouping["positive"])
        if grouping.get("negative") is not None:
            neg = sorted(str(c) for c in grouping["negative"])
        else:
            neg = sorted(c for c in classes if c not in pos)
        named = set(pos) | set(neg)
        unknown = named - set(classes)
        if unknown:
            raise ValueError(f"grouping references unknown classes {sorted(unknown)}")
        if set(pos) & set(neg):
            raise ValueError(f"classes on both sides: {sorted(set(pos) & set(neg))}")
        unmapped = set(classes) - named
        if unmapped:
            raise ValueError(f"classes not assigned to a side: {sorted(unmapped)}")
        if not pos or not neg:
            raise ValueError("grouping leaves one side empty")

    pos_set = set(pos)
    y = np.array([1 if v in pos_set else -1 for v in labels], dtype=int)
    n_pos = int((y == 1).sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("grouping leaves one side empty")
    info = {
        "positive": list(pos),
        "negative": list(neg),
        "n_positive": n_pos,
        "n_negative": n_neg,
        "imbalance": abs(n_pos - n_neg) / len(y),
    }
    return y, info


# ---------------------------------------------------------------------------
# PCA and dimension selection


@dataclass
class PcaResult:
    mean: np.ndarray
    basis: np.ndarray  # (p, d), orthonormal columns
    eigenvalues: np.ndarray  # all p, descending
    projected: np.ndarray

    def project(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) @ self.basis

    def reconstruct(self, Z) -> np.ndarray:
        return np.asarray(Z) @ self.basis.T + self.mean


def numerical_rank(eigenvalues, n_samples: int) -> int:
    ev = np.asarray(eigenvalues, dtype=float)
    if ev.size == 0 or ev.max() <= 0:
        return 0
    tol = ev.max() * max(n_samples, ev.size) * np.finfo(float).eps
    return int((ev > tol).sum())


def covariance_eigen(X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean, eigenvalues (descending) and eigenvectors of the sample covariance.

    Each eigenvector is signed so that its largest-magnitude entry is positive.
    """
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    C = np.cov(X, rowvar=False, ddof=1).reshape(X.shape[1], X.shape[1])
    w, V = np.linalg.eigh(C)
    order = np.argsort(w)[::-1]
    w = np.clip(w[order], 0.0, None)
    V = V[:, order]
    lead = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[lead, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return mean, w, V * signs


def pca(X, d: int) -> PcaResult:
    X = np.asarray(X, dtype=float)
    mean, w, V = covariance_eigen(X)
    rank = numerical_rank(w, X.shape[0])
    if not 1 <= d <= rank:
        raise ValueError(f"requested {d} components but the data has rank {rank}")
    basis = V[:, :d]
    return PcaResult(mean, basis, w, (X - mean) @ basis)


def profile_log_likelihood(eigenvalues) -> np.ndarray:
    """Two-group profile log-likelihood of the scree plot at each split.

    Entry ``q - 1`` treats the first ``q`` eigenvalues and the remaining ones as
    samples from two normals with separate means and a common variance,
    estimated with divisor ``p - 2``. A zero pooled variance gives +inf.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    p = lam.size
    out = np.empty(p - 1)
    for q in range(1, p):
        g1, g2 = lam[:q], lam[q:]
        ss = ((g1 - g1.mean()) ** 2).sum() + ((g2 - g2.mean()) ** 2).sum()
        var = ss / (p - 2) if p > 2 else 0.0
        if var <= 0:
            out[q - 1] = np.inf
            continue
        sd = np.sqrt(var)
        out[q - 1] = (norm.logpdf(g1, g1.mean(), sd).sum()
                      + norm.logpdf(g2, g2.mean(), sd).sum())
    return out


def select_dimension(eigenvalues) -> int:
    """Scree elbow by maximum profile likelihood, never below two."""
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.ndim != 1 or lam.size < 2:
        raise ValueError("need at least two eigenvalues")
    if np.any(lam < 0) or np.any(np.diff(lam) > 0):
        raise ValueError("eigenvalues must be nonnegative and descending")
    if lam.size == 2:
        return MIN_COMPONENTS
    ll = profile_log_likelihood(lam)
    # argmax returns the first maximiser, so exact ties go to the smaller split
    return max(int(np.argmax(ll)) + 1, MIN_COMPONENTS)


# ---------------------------------------------------------------------------
# Fitted pipeline


@dataclass
class FoldPipeline:
    impute_means: np.ndarray
    kept: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    pca_mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    dim: int

    @classmethod
    def fit(cls, X, dim: int | None = None) -> "FoldPipeline":
        """Fit imputation, scaling and PCA on ``X`` (NaN marks missing)."""
        X = np.asarray(X, dtype=float)
        observed = ~np.isnan(X)
        if not observed.any(axis=0).all():
            bad = np.flatnonzero(~observed.any(axis=0)).tolist()
            raise DegenerateColumnError(f"columns {bad} have no observed values")
        means = np.array([X[observed[:, j], j].mean() for j in range(X.shape[1])])
        filled = np.where(observed, X, means)
        Z, stats = standardize(filled)
        if Z.shape[1] < MIN_COMPONENTS:
            raise DegenerateColumnError(
                f"only {Z.shape[1]} non-constant feature(s); need at least {MIN_COMPONENTS}"
            )
        pca_mean, w, V = covariance_eigen(Z)
        rank = numerical_rank(w, Z.shape[0])
        if rank < MIN_COMPONENTS:
            raise DegenerateColumnError(f"feature matrix has rank {rank}")
        if dim is None:
            dim = min(select_dimension(w), rank)
        elif not MIN_COMPONENTS <= dim <= rank:
            raise ValueError(f"requested {dim} components, data rank is {rank}")
        return cls(means, stats["kept"], stats["mean"], stats["std"], pca_mean,
                   V[:, :dim], w, int(dim))

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        filled = np.where(np.isnan(X), self.impute_means, X)
        Z = (filled[:, self.kept] - self.mean) / self.std
        return (Z - self.pca_mean) @ self.basis

    def to_dict(self) -> dict[str, Any]:
        return {
            "impute_means": self.impute_means.tolist(),
            "kept_columns": self.kept.tolist(),
            "standardize_mean": self.mean.tolist(),
            "standardize_std": self.std.tolist(),
            "pca_mean": self.pca_mean.tolist(),
            "pca_basis": self.basis.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "dim": self.dim,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FoldPipeline":
        p = len(d["kept_columns"])
        return cls(
            np.asarray(d["impute_means"], dtype=float),
            np.asarray(d["kept_columns"], dtype=int),
            np.asarray(d["standardize_mean"], dtype=float),
            np.asarray(d["standardize_std"], dtype=float),
            np.asarray(d["pca_mean"], dtype=float),
            np.asarray(d["pca_basis"], dtype=float).reshape(p, int(d["dim"])),
            np.asarray(d["eigenvalues"], dtype=float),
            int(d["dim"]),
        )


# ---------------------------------------------------------------------------
# Whole-table drivers


def encode_table(raw: RawTable) -> tuple[np.ndarray, list[str], dict[str, Any]]:
    """Numeric feature matrix (NaN = missing continuous cell) and its recipe."""
    blocks, names = [], []
    recipe: dict[str, Any] = {"categorical": {}, "continuous": [], "dropped_columns": []}
    for j, col in enumerate(raw.columns):
        if col.kind not in ("continuous", "categorical"):
            continue
        values = [row[j] for row in raw.rows]
        if col.kind == "categorical":
            try:
                block, kept = encode_categorical(values)
            except DegenerateColumnError:
                warnings.warn(f"dropping categorical column {col.name!r}: single outcome",
                              stacklevel=2)
                recipe["dropped_columns"].append(col.name)
                continue
            blocks.append(block)
            names.extend(f"{col.name}={'<missing>' if o is None else o}" for o in kept)
            recipe["categorical"][col.name] = [o for o in kept]
        else:
            parsed = np.empty(len(values))
            for i, v in enumerate(values):
                if v is None:
                    parsed[i] = np.nan
                    continue
                try:
                    parsed[i] = float(v)
                except ValueError:
                    raise InputError(
                        f"row {i + 1}, column {col.name!r}: cannot parse {v!r} as a number"
                    ) from None
                if not np.isfinite(parsed[i]):
                    raise InputError(f"row {i + 1}, column {col.name!r}: non-finite value")
            if np.isnan(parsed).all():
                warnings.warn(f"dropping continuous column {col.name!r}: all missing",
                              stacklevel=2)
                recipe["dropped_columns"].append(col.name)
                continue
            blocks.append(parsed[:, None])
            names.append(col.name)
            recipe["continuous"].append(col.name)
    if not blocks:
        raise InputError("no usable feature columns")
    return np.hstack(blocks), names, recipe


def encode_dataset(raw: RawTable, grouping=None) -> Dataset:
    """Encoded (not yet scaled or projected) dataset with binary labels."""
    X, names, recipe = encode_table(raw)
    y, info = binarize_classes(raw.column(raw.label_column), grouping)
    prov = {"stage": "encoded", "features": names, "encoding": recipe, "classes": info}
    return Dataset(X, y, raw.name, prov)


def preprocess_table(raw: RawTable, grouping=None) -> Dataset:
    """Full pipeline fitted on the whole table: the portable dataset form."""
    enc = encode_dataset(raw, grouping)
    pipe = FoldPipeline.fit(enc.X)
    prov = dict(enc.provenance, stage="projected", pipeline=pipe.to_dict())
    return Dataset(pipe.transform(enc.X), enc.y, raw.name, prov)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_dataset(ds: Dataset, out_dir: str | Path) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_path = out_dir / f"{ds.name}.dataset.csv"
    prov_path = out_dir / f"{ds.name}.provenance.json"
    with data_path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"pc{j + 1}" for j in range(ds.X.shape[1])] + ["label"])
        for row, label in zip(ds.X, ds.y):
            w.writerow([_fmt(v) for v in row] + [int(label)])
    prov_path.write_text(json.dumps(ds.provenance, indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")
    return data_path, prov_path


def dataset_meta(csv_path: str | Path) -> dict[str, Any]:
    """Sidecar describing a file written by :func:`write_dataset`."""
    name = Path(csv_path).name
    if name.endswith(".dataset.csv"):
        name = name[: -len(".dataset.csv")]
    return {"label": "label", "default_kind": "continuous", "name": name}


def read_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    raw = load_table(path, dataset_meta(path))
    X, _, _ = encode_table(raw)
    y = np.array([int(v) for v in raw.column("label")])
    prov_path = path.with_name(f"{raw.name}.provenance.json")
    prov = json.loads(prov_path.read_text(encoding="utf-8")) if prov_path.exists() else {}
    return Dataset(X, y, raw.name, prov)
