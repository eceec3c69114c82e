"""Dataset ingestion, normalization, splitting and synthetic generators."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass(frozen=True)
class NormalizationSpec:
    mode: str  # minmax | zscore | none
    low: np.ndarray | None = None  # per-feature min (minmax) or mean (zscore)
    scale: np.ndarray | None = None  # per-feature range or std
    constant: tuple = ()  # indices of constant features

    def apply(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.mode == "none":
            return X.copy()
        out = (X - self.low) / np.where(self.scale > 0, self.scale, 1.0)
        if self.constant:
            cols = list(self.constant)
            out[..., cols] = 0.5 if self.mode == "minmax" else 0.0
        return out

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "low": None if self.low is None else self.low.tolist(),
            "scale": None if self.scale is None else self.scale.tolist(),
            "constant": list(self.constant),
        }


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple = ()
    task: str = "classification"
    normalization: NormalizationSpec | None = None
    # original categorical column -> (start, stop) span of its one-hot columns
    categorical_map: dict = field(default_factory=dict)
    grid_shape: tuple | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim != 2:
            raise DataError(f"features must be a 2-D matrix, got shape {X.shape}")
        y = np.asarray(self.targets)
        if y.shape[0] != X.shape[0]:
            raise DataError(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)
        if not self.feature_names:
            object.__setattr__(self, "feature_names",
                               tuple(f"x{j}" for j in range(X.shape[1])))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        if self.task != "classification":
            return 0
        return int(self.targets.max()) + 1 if self.n else 0

    def subset(self, rows) -> "Dataset":
        return replace(self, features=self.features[rows], targets=self.targets[rows])


def _parse_float(cell: str, col: str, line: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise DataError(f"non-numeric value {cell!r} in column {col!r} (line {line})") from None


def load_csv(path, target: str, categorical=(), task: str = "classification") -> Dataset:
    """Read a headed CSV; categorical columns become one-hot spans in declared order.

    Category levels are sorted so the column layout does not depend on row
    order. Classification targets are mapped to 0..k-1 in sorted label order.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path} is empty")
    header, body = rows[0], [r for r in rows[1:] if r]
    if not body:
        raise DataError(f"{path} has a header but no data rows")
    missing = [c for c in (target, *categorical) if c not in header]
    if missing:
        raise DataError(f"column(s) {missing} not found in {path}")
    for k, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"line {k} has {len(row)} cells, header has {len(header)}")

    cols = {name: [row[j] for row in body] for j, name in enumerate(header)}
    blocks, names, cat_map = [], [], {}
    for name in header:
        if name == target:
            continue
        if name in categorical:
            continue
        blocks.append(np.array([_parse_float(v, name, k + 2)
                                for k, v in enumerate(cols[name])])[:, None])
        names.append(name)
    for name in categorical:
        levels = sorted(set(cols[name]))
        start = sum(b.shape[1] for b in blocks)
        onehot = np.zeros((len(body), len(levels)))
        index = {lvl: j for j, lvl in enumerate(levels)}
        for i, v in enumerate(cols[name]):
            onehot[i, index[v]] = 1.0
        blocks.append(onehot)
        names.extend(f"{name}={lvl}" for lvl in levels)
        cat_map[name] = (start, start + len(levels))

    X = np.hstack(blocks) if blocks else np.zeros((len(body), 0))
    raw_y = cols[target]
    if task == "classification":
        labels = sorted(set(raw_y))
        try:
            labels = sorted(labels, key=float)
        except ValueError:
            pass
        lookup = {lbl: i for i, lbl in enumerate(labels)}
        y = np.array([lookup[v] for v in raw_y], dtype=np.int64)
    else:
        y = np.array([_parse_float(v, target, k + 2) for k, v in enumerate(raw_y)])
    return Dataset(X, y, tuple(names), task, categorical_map=cat_map)


def write_csv(dataset: Dataset, path, target: str = "target") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*dataset.feature_names, target])
        for row, y in zip(dataset.features, dataset.targets):
            w.writerow([repr(float(v)) for v in row] + [str(y.item())])


def fit_normalization(X, mode: str = "minmax") -> NormalizationSpec:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise DataError("cannot normalize an empty dataset")
    if mode == "none":
        return NormalizationSpec("none")
    if mode == "minmax":
        low = X.min(axis=0)
        scale = X.max(axis=0) - low
    elif mode == "zscore":
        low = X.mean(axis=0)
        scale = X.std(axis=0)
    else:
        raise DataError(f"unknown normalization mode {mode!r}")
    constant = tuple(int(j) for j in np.flatnonzero(scale == 0))
    return NormalizationSpec(mode, low, scale, constant)


def normalize(dataset: Dataset, mode: str = "minmax", spec: NormalizationSpec | None = None):
    """Return (normalized dataset, spec). Pass ``spec`` to reuse training statistics."""
    spec = spec or fit_normalization(dataset.features, mode)
    return replace(dataset, features=spec.apply(dataset.features), normalization=spec), spec


def train_test_split(dataset: Dataset, test_fraction: float = 0.25, seed: int = 0):
    if not 0 < test_fraction < 1:
        raise DataError("test_fraction must lie strictly between 0 and 1")
    n = dataset.n
    n_test = int(round(n * test_fraction))
    if n_test == 0 or n_test == n:
        raise DataError(f"test_fraction {test_fraction} leaves an empty part for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    test_rows, train_rows = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    return dataset.subset(train_rows), dataset.subset(test_rows)


def synth_2d(kind: str = "moons", n: int = 200, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Two balanced classes in the plane: 'moons' or 'blobs'."""
    if n < 2:
        raise DataError("need at least two points")
    rng = np.random.default_rng(seed)
    n0 = (n + 1) // 2
    n1 = n - n0
    if kind == "moons":
        t0 = np.linspace(0, np.pi, n0)
        t1 = np.linspace(0, np.pi, n1)
        a = np.column_stack([np.cos(t0), np.sin(t0)])
        b = np.column_stack([1 - np.cos(t1), 0.5 - np.sin(t1)])
    elif kind == "blobs":
        def disk(m, center):
            r = 0.5 * np.sqrt(rng.uniform(size=m))
            th = rng.uniform(0, 2 * np.pi, size=m)
            return np.asarray(center) + np.column_stack([r * np.cos(th), r * np.sin(th)])
        a = disk(n0, (-1.0, -1.0))
        b = disk(n1, (1.0, 1.0))
    else:
        raise DataError(f"unknown synthetic kind {kind!r}")
    X = np.vstack([a, b])
    if noise > 0:
        X = X + rng.normal(scale=noise, size=X.shape)
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    perm = rng.permutation(n)
    return Dataset(X[perm], y[perm], ("x", "y"), "classification")


def synth_categorical(n: int = 600, seed: int = 0) -> Dataset:
    """COMPAS-like tabular data: two numeric columns plus three one-hot categoricals."""
    rng = np.random.default_rng(seed)
    age = rng.integers(18, 70, size=n).astype(np.float64)
    priors = rng.poisson(2.0, size=n).astype(np.float64)
    levels = {"sex": 2, "race": 4, "charge": 3}
    blocks, names, cat_map = [age[:, None], priors[:, None]], ["age", "priors"], {}
    codes = {}
    col = 2
    for name, k in levels.items():
        c = rng.integers(0, k, size=n)
        codes[name] = c
        oh = np.zeros((n, k))
        oh[np.arange(n), c] = 1.0
        blocks.append(oh)
        names.extend(f"{name}={j}" for j in range(k))
        cat_map[name] = (col, col + k)
        col += k
    logit = -0.04 * (age - 40) + 0.45 * (priors - 2) + 0.6 * (codes["charge"] == 2) - 0.2
    y = (rng.uniform(size=n) < 1 / (1 + np.exp(-logit))).astype(np.int64)
    return Dataset(np.hstack(blocks), y, tuple(names), "classification", categorical_map=cat_map)


def load_digits8() -> Dataset:
    """The bundled 8x8 handwritten digits (scikit-learn copy), pixels scaled to [0, 1]."""
    from sklearn.datasets import load_digits

    bunch = load_digits()
    X = bunch.data / 16.0
    names = tuple(f"px{r}_{c}" for r in range(8) for c in range(8))
    return Dataset(X, bunch.target.astype(np.int64), names, "classification", grid_shape=(8, 8))


def _read_idx(path, expected_magic: int):
    buf = Path(path).read_bytes()
    if len(buf) < 8:
        raise DataError(f"{path}: too short for an IDX header")
    (magic,) = struct.unpack(">I", buf[:4])
    if magic != expected_magic:
        raise DataError(f"{path}: IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = buf[3]
    header = 4 + 4 * ndim
    if len(buf) < header:
        raise DataError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", buf[4:header])
    count = int(np.prod(dims))
    if len(buf) - header != count:
        raise DataError(f"{path}: expected {count} data bytes, found {len(buf) - header}")
    return np.frombuffer(buf, dtype=np.uint8, offset=header).reshape(dims)


def load_idx(images_path, labels_path) -> Dataset:
    images = _read_idx(images_path, IDX_IMAGE_MAGIC)
    labels = _read_idx(labels_path, IDX_LABEL_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise DataError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    n, rows, cols = images.shape
    X = images.reshape(n, rows * cols).astype(np.float64) / 255.0
    names = tuple(f"px{r}_{c}" for r in range(rows) for c in range(cols))
    return Dataset(X, labels.astype(np.int64), names, "classification", grid_shape=(rows, cols))


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    Path(images_path).write_bytes(
        struct.pack(">I", IDX_IMAGE_MAGIC) + struct.pack(">3I", *images.shape) + images.tobytes())
    Path(labels_path).write_bytes(
        struct.pack(">I", IDX_LABEL_MAGIC) + struct.pack(">I", labels.shape[0]) + labels.tobytes())
