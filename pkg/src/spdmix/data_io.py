"""Dataset model, SPDB binary format, series CSV, and synthetic generators.

SPDB file layout (little-endian, independent of host byte order):

    offset  size  field
    0       4     magic ``b"SPDB"``
    4       2     version (u16), currently 1
    6       4     matrix dimension n (u32)
    10      4     matrix count (u32)
    14      4     flags (u32): bit 0 = correlation matrices,
                  bit 1 = regression task
    18      -     count * n * n float64 values, row-major

Labels live in a sidecar CSV ``<stem>.labels.csv`` with header ``id,label``
(UTF-8, LF line endings). Regression labels are floats, classification
labels are integer class ids; soft classification labels (as produced by
mixing) are stored as ``;``-joined simplex weights in the same column.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import qr

from .linalg import SpdMatrix, matmul, matrix_exp, matrix_log

__all__ = [
    "LabeledDataset",
    "SpdbFormatError",
    "gen_labeled_dataset",
    "gen_random_spd",
    "gen_synthetic_series",
    "read_matrices",
    "read_series_csv",
    "write_matrices",
    "write_series_csv",
]

MAGIC = b"SPDB"
VERSION = 1
FLAG_CORRELATION = 1
FLAG_REGRESSION = 2
_HEADER = struct.Struct("<4sHIII")

TASK_CLASSIFICATION = "classification"
TASK_REGRESSION = "regression"


class SpdbFormatError(ValueError):
    """The bytes on disk do not form a valid SPDB file."""


@dataclass
class LabeledDataset:
    """Aligned matrices and labels for one prediction task.

    ``labels`` is a float array for regression, an int array of class ids for
    classification, or a (count, n_classes) float array of simplex rows for
    soft-labeled (already mixed) classification data. Soft-labeled datasets
    cannot feed class-conditional strategies.
    """

    matrices: np.ndarray
    labels: np.ndarray
    task: str
    is_correlation: bool = False
    ids: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.matrices = np.asarray(self.matrices, dtype=np.float64)
        if self.matrices.ndim != 3 or self.matrices.shape[1] != self.matrices.shape[2]:
            raise ValueError(
                f"matrices must have shape (count, n, n), got {self.matrices.shape}"
            )
        if self.task not in (TASK_CLASSIFICATION, TASK_REGRESSION):
            raise ValueError(f"unknown task {self.task!r}")
        self.labels = np.asarray(self.labels)
        if len(self.labels) != len(self.matrices):
            raise ValueError(
                f"{len(self.matrices)} matrices but {len(self.labels)} labels"
            )
        if self.task == TASK_REGRESSION:
            self.labels = self.labels.astype(np.float64)
            if self.labels.ndim != 1:
                raise ValueError("regression labels must be scalars")
            if len(self.labels) and not np.isfinite(self.labels).all():
                raise ValueError("regression labels must be finite")
        elif self.labels.ndim == 1:
            self.labels = self.labels.astype(np.int64)
            if len(self.labels) and self.labels.min() < 0:
                raise ValueError("class ids must be non-negative")
        if not self.ids:
            self.ids = [f"s{k:06d}" for k in range(len(self.matrices))]
        elif len(self.ids) != len(self.matrices):
            raise ValueError("ids and matrices must have equal length")

    def __len__(self) -> int:
        return len(self.matrices)

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def has_soft_labels(self) -> bool:
        return self.labels.ndim == 2

    @property
    def n_classes(self) -> int:
        if self.task != TASK_CLASSIFICATION:
            raise ValueError("n_classes is only defined for classification")
        if self.has_soft_labels:
            return self.labels.shape[1]
        return int(self.labels.max()) + 1 if len(self.labels) else 0


def _labels_path(path: Path) -> Path:
    return path.with_name(path.stem + ".labels.csv")


def _format_label(value) -> str:
    if np.ndim(value) == 1:
        return ";".join(repr(float(v)) for v in np.asarray(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_matrices(path, dataset: LabeledDataset) -> None:
    """Write a dataset as an SPDB file plus its labels sidecar CSV."""
    path = Path(path)
    count = len(dataset)
    n = dataset.dim if count else 0
    flags = (FLAG_CORRELATION if dataset.is_correlation else 0) | (
        FLAG_REGRESSION if dataset.task == TASK_REGRESSION else 0
    )
    payload = np.ascontiguousarray(dataset.matrices, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, count, flags))
        fh.write(payload)
    with open(_labels_path(path), "w", encoding="utf-8", newline="") as fh:
        fh.write("id,label\n")
        for sample_id, label in zip(dataset.ids, dataset.labels):
            fh.write(f"{sample_id},{_format_label(label)}\n")


def _parse_labels(rows: list[tuple[str, str]], task: str) -> np.ndarray:
    if any(";" in text for _, text in rows):
        parsed = [[float(v) for v in text.split(";")] for _, text in rows]
        widths = {len(p) for p in parsed}
        if len(widths) > 1:
            raise SpdbFormatError("soft labels have inconsistent widths")
        return np.asarray(parsed, dtype=np.float64)
    values = [float(text) for _, text in rows]
    if task == TASK_CLASSIFICATION:
        return np.asarray([int(v) for v in values], dtype=np.int64)
    return np.asarray(values, dtype=np.float64)


def read_matrices(path) -> LabeledDataset:
    """Read an SPDB file and its labels sidecar back into a dataset.

    The roundtrip with :func:`write_matrices` is bitwise exact. Corrupt files
    fail with a distinct :class:`SpdbFormatError` (bad magic, version
    mismatch, truncated payload, or label-count mismatch), never garbage data.
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise SpdbFormatError(f"truncated header: {len(raw)} bytes in {path}")
    magic, version, n, count, flags = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SpdbFormatError(f"bad magic {magic!r} in {path}")
    if version != VERSION:
        raise SpdbFormatError(f"version mismatch: file has {version}, expected {VERSION}")
    expected = count * n * n * 8
    got = len(raw) - _HEADER.size
    if got != expected:
        raise SpdbFormatError(
            f"truncated payload: expected {expected} bytes for count={count}, "
            f"n={n}, found {got}"
        )
    matrices = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(
        np.float64
    )
    matrices = matrices.reshape(count, n, n)
    task = TASK_REGRESSION if flags & FLAG_REGRESSION else TASK_CLASSIFICATION

    labels_file = _labels_path(path)
    if not labels_file.exists():
        raise SpdbFormatError(f"missing labels sidecar {labels_file}")
    with open(labels_file, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "label"]:
            raise SpdbFormatError(f"labels CSV has header {header}, expected id,label")
        rows = [(row[0], row[1]) for row in reader if row]
    if len(rows) != count:
        raise SpdbFormatError(
            f"label-count mismatch: {count} matrices but {len(rows)} label rows"
        )
    return LabeledDataset(
        matrices=matrices,
        labels=_parse_labels(rows, task),
        task=task,
        is_correlation=bool(flags & FLAG_CORRELATION),
        ids=[sample_id for sample_id, _ in rows],
    )


def write_series_csv(path, series: np.ndarray, layout: str = "vars-as-rows") -> None:
    """Write one (n_vars, n_steps) series as CSV in the requested orientation."""
    arr = np.asarray(series, dtype=np.float64)
    if layout == "vars-as-rows":
        table = arr
    elif layout == "vars-as-cols":
        table = arr.T
    else:
        raise ValueError(f"unknown series layout {layout!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for row in table:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_series_csv(path, layout: str = "vars-as-rows") -> np.ndarray:
    """Read a series CSV; an optional non-numeric first row is a name header."""
    if layout not in ("vars-as-rows", "vars-as-cols"):
        raise ValueError(f"unknown series layout {layout!r}")
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"empty series file {path}")
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]
    table = np.asarray([[float(v) for v in row] for row in rows])
    return table if layout == "vars-as-rows" else table.T


def _sym_gauss(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = rng.standard_normal((n, n))
    return scale * (g + g.T) / (2.0 * np.sqrt(n))


def gen_random_spd(n: int, condition_target: float, rng: np.random.Generator) -> SpdMatrix:
    """Random SPD matrix with condition number within a factor 2 of target.

    Uses a QR-orthogonalized Gaussian basis and log-uniform eigenvalues in
    ``[1/sqrt(kappa), sqrt(kappa)]`` with the extremes pinned, so the target
    is hit exactly up to rounding.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if condition_target < 1.0:
        raise ValueError(f"condition target must be >= 1, got {condition_target}")
    q, _ = qr(rng.standard_normal((n, n)))
    if condition_target == 1.0 or n == 1:
        w = np.ones(n)
    else:
        span = np.log(condition_target)
        exponents = rng.uniform(0.0, span, size=n)
        exponents[0] = 0.0
        exponents[-1] = span
        w = np.exp(np.sort(exponents) - span / 2.0)
    arr = matmul(q * w, q, transpose_b=True)
    arr = (arr + arr.T) / 2.0
    return SpdMatrix._trusted(arr, float(w.min()), float(w.max()))


def gen_synthetic_series(
    n: int,
    t: int,
    latent_rank: int,
    noise: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Series whose rows are linear mixtures of ``latent_rank`` latent signals.

    With ``noise > 0`` and ``t >= n + 1`` the sample correlation matrix is SPD
    with high probability; with ``noise = 0`` its rank is capped by the
    latent rank.
    """
    if not 1 <= latent_rank <= n:
        raise ValueError(f"latent rank must lie in [1, {n}], got {latent_rank}")
    if noise < 0.0:
        raise ValueError(f"noise must be non-negative, got {noise}")
    mixing = rng.standard_normal((n, latent_rank))
    latent = rng.standard_normal((latent_rank, t))
    series = mixing @ latent
    if noise > 0.0:
        series = series + noise * rng.standard_normal((n, t))
    return series


def gen_labeled_dataset(
    n: int,
    count: int,
    task: str,
    structure: str,
    rng: np.random.Generator,
    *,
    noise: float = 0.0,
    n_classes: int = 2,
    separation: float = 3.0,
) -> LabeledDataset:
    """Synthetic labeled SPD dataset.

    ``structure="log-linear"`` (regression): matrices ``exp(B + y H)`` for
    fixed random symmetric ``B, H`` and labels uniform on [0, 1], so the
    log-matrices are exactly linear in the label; ``noise`` adds a per-sample
    symmetric perturbation inside the exponential.

    ``structure="clustered"`` (classification): per-class centers built from
    random SPD matrices pushed ``separation`` apart in log-space, with
    ``noise``-scaled log-space jitter per sample.
    """
    if count < 2:
        raise ValueError(f"need at least 2 samples, got {count}")
    if structure == "log-linear":
        if task != TASK_REGRESSION:
            raise ValueError("log-linear structure generates regression labels")
        base = _sym_gauss(n, rng, scale=0.5)
        slope = _sym_gauss(n, rng, scale=1.0)
        labels = rng.uniform(0.0, 1.0, size=count)
        mats = np.empty((count, n, n))
        for k, y in enumerate(labels):
            h = base + y * slope
            if noise > 0.0:
                h = h + _sym_gauss(n, rng, scale=noise)
            mats[k] = matrix_exp(h).array
        return LabeledDataset(matrices=mats, labels=labels, task=task)
    if structure == "clustered":
        if task != TASK_CLASSIFICATION:
            raise ValueError("clustered structure generates classification labels")
        if n_classes < 2:
            raise ValueError(f"need at least 2 classes, got {n_classes}")
        centers = []
        for c in range(n_classes):
            base = gen_random_spd(n, 10.0, rng)
            centers.append(matrix_log(base) + c * separation * np.eye(n))
        labels = np.arange(count) % n_classes
        mats = np.empty((count, n, n))
        for k, c in enumerate(labels):
            h = centers[c]
            if noise > 0.0:
                h = h + _sym_gauss(n, rng, scale=noise)
            mats[k] = matrix_exp(h).array
        return LabeledDataset(matrices=mats, labels=labels, task=task)
    raise ValueError(f"unknown structure {structure!r}")
