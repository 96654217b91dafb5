"""Augmentation strategies over labeled SPD datasets.

Seven strategies are provided. The geodesic strategy interpolates along
log-Euclidean geodesics (three eigendecompositions per mix, or one with a
precomputed :class:`EigenCache`); the remaining six are baselines: linear
interpolation, per-edge discrete swapping, node/edge dropping, per-edge
generator sampling, and label-distance pairing.

Every strategy takes an explicit ``numpy.random.Generator``;
:func:`augment_batch` derives one stream per output index from
``(seed, index)`` so results do not depend on execution order or worker
count.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import metrics
from .data_io import TASK_CLASSIFICATION, TASK_REGRESSION, LabeledDataset
from .linalg import (
    NonPositiveEigenvalueError,
    eig_sym,
    matmul,
    matrix_exp,
)

__all__ = [
    "EigenCache",
    "EigenCacheEntry",
    "EdgeGenerator",
    "MixConfig",
    "MixedSample",
    "ProbeResult",
    "Provenance",
    "STRATEGIES",
    "augment_batch",
    "c_mixup_pair",
    "d_mixup",
    "drop_edge",
    "drop_node",
    "g_mixup_fit",
    "g_mixup_sample",
    "incorrect_label_probe",
    "r_mixup",
    "r_mixup_cached",
    "sample_beta",
    "v_mixup",
]

STRATEGIES = (
    "rmixup",
    "vmixup",
    "dmixup",
    "dropnode",
    "dropedge",
    "gmixup",
    "cmixup",
)

_PAIRWISE = {"rmixup", "vmixup", "dmixup", "gmixup", "cmixup"}


@dataclass(frozen=True)
class MixConfig:
    """Configuration for a batch of augmented samples.

    ``alpha`` is the Beta shape for the mix ratio, ``keep_prob`` the keep
    probability for the drop strategies, ``cmix_bandwidth`` the label-kernel
    width for label-distance pairing (``None`` defaults to the label standard
    deviation), and ``use_eigencache`` switches the geodesic strategy to the
    single-decomposition fast path.
    """

    strategy: str
    alpha: float = 1.0
    keep_prob: float = 0.9
    cmix_bandwidth: float | None = None
    seed: int = 0
    use_eigencache: bool = False

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}"
            )
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 < self.keep_prob < 1.0:
            raise ValueError(f"keep_prob must lie in (0, 1), got {self.keep_prob}")
        if self.cmix_bandwidth is not None and not self.cmix_bandwidth > 0.0:
            raise ValueError(f"cmix_bandwidth must be positive, got {self.cmix_bandwidth}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class Provenance:
    """Where a mixed sample came from: sources, ratio or mask, strategy."""

    strategy: str
    source_i: str
    source_j: str | None = None
    lam: float | None = None
    mask_summary: str | None = None


@dataclass(frozen=True)
class MixedSample:
    """One augmented sample: symmetric matrix, mixed label, provenance.

    ``spd_guaranteed`` records whether the strategy guarantees an SPD output
    for SPD inputs; drop and discrete strategies can and do produce
    geometrically defective matrices, which are emitted unvalidated.
    """

    matrix: np.ndarray
    label: float | np.ndarray
    provenance: Provenance
    spd_guaranteed: bool


def sample_beta(alpha: float, rng: np.random.Generator) -> float:
    """Draw a mix ratio from Beta(alpha, alpha); deterministic given the stream."""
    if not alpha > 0.0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return float(rng.beta(alpha, alpha))


def _mix_labels(y_i, y_j, lam: float):
    y_i = np.asarray(y_i, dtype=np.float64)
    y_j = np.asarray(y_j, dtype=np.float64)
    mixed = (1.0 - lam) * y_i + lam * y_j
    return float(mixed) if mixed.ndim == 0 else mixed


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def r_mixup(s_i, s_j, y_i, y_j, lam: float, sources=("i", "j")) -> MixedSample:
    """Geodesic mix ``exp((1-lam) log S_i + lam log S_j)`` with linear labels.

    The output is SPD by construction; no clamping happens downstream of
    mixing. Costs three eigendecompositions on this direct path.
    """
    mixed = metrics.geodesic(s_i, s_j, lam, metrics.MetricKind.LOG_EUCLIDEAN)
    return MixedSample(
        matrix=mixed.array,
        label=_mix_labels(y_i, y_j, lam),
        provenance=Provenance("rmixup", sources[0], sources[1], lam=lam),
        spd_guaranteed=True,
    )


@dataclass(frozen=True)
class EigenCacheEntry:
    """Per-sample precompute: orthogonal basis and log-eigenvalues."""

    orthogonal: np.ndarray
    log_eigenvalues: np.ndarray

    def log_matrix(self) -> np.ndarray:
        out = matmul(
            self.orthogonal * self.log_eigenvalues, self.orthogonal, transpose_b=True
        )
        return (out + out.T) / 2.0


class EigenCache:
    """Read-only store of per-sample eigendecompositions.

    Built once in a precompute phase (one decomposition per sample); mixing
    against cache entries then needs a single decomposition per mixed sample
    instead of three.
    """

    def __init__(self, entries: dict[str, EigenCacheEntry]):
        self._entries = dict(entries)

    @classmethod
    def build(cls, dataset: LabeledDataset) -> "EigenCache":
        entries = {}
        for sample_id, mat in zip(dataset.ids, dataset.matrices):
            dec = eig_sym(mat)
            if dec.eigenvalues[0] <= 0.0:
                raise NonPositiveEigenvalueError(
                    f"sample {sample_id} is not SPD (min eigenvalue "
                    f"{dec.eigenvalues[0]:.6e}); clamp before caching"
                )
            entries[sample_id] = EigenCacheEntry(
                orthogonal=dec.orthogonal,
                log_eigenvalues=np.log(dec.eigenvalues),
            )
        return cls(entries)

    def entry(self, sample_id: str) -> EigenCacheEntry:
        return self._entries[sample_id]

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, sample_id: str) -> bool:
        return sample_id in self._entries


def r_mixup_cached(
    entry_i: EigenCacheEntry,
    entry_j: EigenCacheEntry,
    y_i,
    y_j,
    lam: float,
    sources=("i", "j"),
) -> MixedSample:
    """Geodesic mix from cached decompositions: one eigendecomposition total."""
    if entry_i.orthogonal.shape != entry_j.orthogonal.shape:
        raise ValueError(
            f"stale cache: entry dimensions {entry_i.orthogonal.shape} vs "
            f"{entry_j.orthogonal.shape}"
        )
    log_mix = (1.0 - lam) * entry_i.log_matrix() + lam * entry_j.log_matrix()
    mixed = matrix_exp(log_mix)
    return MixedSample(
        matrix=mixed.array,
        label=_mix_labels(y_i, y_j, lam),
        provenance=Provenance("rmixup", sources[0], sources[1], lam=lam),
        spd_guaranteed=True,
    )


def v_mixup(s_i, s_j, y_i, y_j, lam: float, sources=("i", "j")) -> MixedSample:
    """Linear mix ``(1-lam) S_i + lam S_j``; SPD inputs give an SPD output
    (convex cone), but the determinant can inflate past both endpoints."""
    a = np.asarray(s_i, dtype=np.float64)
    b = np.asarray(s_j, dtype=np.float64)
    _check_same_shape(a, b)
    return MixedSample(
        matrix=(1.0 - lam) * a + lam * b,
        label=_mix_labels(y_i, y_j, lam),
        provenance=Provenance("vmixup", sources[0], sources[1], lam=lam),
        spd_guaranteed=True,
    )


def d_mixup(
    s_i, s_j, y_i, y_j, lam: float, rng: np.random.Generator, sources=("i", "j")
) -> MixedSample:
    """Discrete per-edge mix: each edge comes from S_j with probability lam.

    The swap mask is drawn on the upper triangle (diagonal included) and
    mirrored so the output stays symmetric. SPD is NOT guaranteed.
    """
    a = np.asarray(s_i, dtype=np.float64)
    b = np.asarray(s_j, dtype=np.float64)
    _check_same_shape(a, b)
    n = a.shape[0]
    upper = np.triu_indices(n)
    take_j = rng.random(len(upper[0])) < lam
    mask = np.zeros((n, n), dtype=bool)
    mask[upper] = take_j
    mask |= mask.T
    swapped = int(take_j.sum())
    return MixedSample(
        matrix=np.where(mask, b, a),
        label=_mix_labels(y_i, y_j, lam),
        provenance=Provenance(
            "dmixup",
            sources[0],
            sources[1],
            lam=lam,
            mask_summary=f"swapped={swapped}/{len(take_j)}",
        ),
        spd_guaranteed=False,
    )


def drop_node(
    s, y, keep_prob: float, rng: np.random.Generator, source: str = "i"
) -> MixedSample:
    """Zero all edges (rows and columns, diagonal included) of dropped nodes.

    Each node survives independently with probability ``keep_prob``; the
    label is unchanged. The output is positive semidefinite for SPD input
    (a principal submatrix padded with zeros) but never strictly SPD once a
    node drops.
    """
    if not 0.0 < keep_prob < 1.0:
        raise ValueError(f"keep_prob must lie in (0, 1), got {keep_prob}")
    a = np.asarray(s, dtype=np.float64)
    keep = rng.random(a.shape[0]) < keep_prob
    scale = keep.astype(np.float64)
    return MixedSample(
        matrix=a * np.outer(scale, scale),
        label=y,
        provenance=Provenance(
            "dropnode",
            source,
            mask_summary=f"kept={int(keep.sum())}/{a.shape[0]}",
        ),
        spd_guaranteed=False,
    )


def drop_edge(
    s, y, keep_prob: float, rng: np.random.Generator, source: str = "i"
) -> MixedSample:
    """Zero each off-diagonal edge independently with probability ``1 - keep_prob``.

    The mask is drawn on the strict upper triangle and mirrored; the diagonal
    is always kept. The label is unchanged and SPD is not guaranteed.
    """
    if not 0.0 < keep_prob < 1.0:
        raise ValueError(f"keep_prob must lie in (0, 1), got {keep_prob}")
    a = np.asarray(s, dtype=np.float64)
    n = a.shape[0]
    upper = np.triu_indices(n, k=1)
    keep = rng.random(len(upper[0])) < keep_prob
    mask = np.zeros((n, n), dtype=bool)
    mask[upper] = keep
    mask |= mask.T
    np.fill_diagonal(mask, True)
    return MixedSample(
        matrix=a * mask,
        label=y,
        provenance=Provenance(
            "dropedge",
            source,
            mask_summary=f"kept={int(keep.sum())}/{len(keep)}",
        ),
        spd_guaranteed=False,
    )


@dataclass(frozen=True)
class EdgeGenerator:
    """Per-edge conditional-normal generators fitted on a dataset.

    Classification: per-class, per-edge mean and standard deviation.
    Regression: per-edge mean/std plus the edge-label correlation, so each
    edge can be conditioned on an arbitrary label value.
    """

    task: str
    is_correlation: bool
    dim: int
    class_means: dict[int, np.ndarray] | None = None
    class_stds: dict[int, np.ndarray] | None = None
    edge_mean: np.ndarray | None = None
    edge_std: np.ndarray | None = None
    label_mean: float | None = None
    label_std: float | None = None
    edge_label_corr: np.ndarray | None = None


def g_mixup_fit(dataset: LabeledDataset) -> EdgeGenerator:
    """Estimate per-edge generators from a labeled dataset.

    A classification class with a single sample gets zero variance and a
    warning; a regression dataset with zero label variance is rejected.
    """
    if len(dataset) == 0:
        raise ValueError("cannot fit edge generators on an empty dataset")
    mats = dataset.matrices
    if dataset.task == TASK_CLASSIFICATION:
        if dataset.has_soft_labels:
            raise ValueError("edge generators need hard class ids, not soft labels")
        means: dict[int, np.ndarray] = {}
        stds: dict[int, np.ndarray] = {}
        for c in np.unique(dataset.labels):
            members = mats[dataset.labels == c]
            means[int(c)] = members.mean(axis=0)
            if len(members) < 2:
                warnings.warn(
                    f"class {int(c)} has a single sample; its edge variance "
                    f"is set to zero",
                    UserWarning,
                    stacklevel=2,
                )
                stds[int(c)] = np.zeros_like(members[0])
            else:
                stds[int(c)] = members.std(axis=0)
        return EdgeGenerator(
            task=dataset.task,
            is_correlation=dataset.is_correlation,
            dim=dataset.dim,
            class_means=means,
            class_stds=stds,
        )
    y = dataset.labels
    label_std = float(y.std())
    if label_std == 0.0:
        raise ValueError("regression labels have zero variance; cannot condition on y")
    mean = mats.mean(axis=0)
    std = mats.std(axis=0)
    centered = mats - mean
    y_centered = (y - y.mean()).reshape(-1, 1, 1)
    cov_edge_label = (centered * y_centered).mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(std > 0.0, cov_edge_label / (std * label_std), 0.0)
    corr = np.clip(corr, -1.0, 1.0)
    return EdgeGenerator(
        task=dataset.task,
        is_correlation=dataset.is_correlation,
        dim=dataset.dim,
        edge_mean=mean,
        edge_std=std,
        label_mean=float(y.mean()),
        label_std=label_std,
        edge_label_corr=corr,
    )


def g_mixup_sample(
    gen: EdgeGenerator,
    y_i,
    y_j,
    lam: float,
    rng: np.random.Generator,
    n_classes: int | None = None,
    sources=("i", "j"),
) -> MixedSample:
    """Draw one synthetic sample from the lam-blend of two edge generators.

    Classification blends the two class conditionals
    ``N((1-lam) mu_i + lam mu_j, (1-lam)^2 sd_i^2 + lam^2 sd_j^2)`` (so a
    zero-variance generator yields exactly the mixed means); regression
    conditions every edge on the mixed label. The diagonal is forced to 1 for
    correlation-matrix datasets. Edges are drawn on the upper triangle and
    mirrored.
    """
    n = gen.dim
    if gen.task == TASK_CLASSIFICATION:
        c_i, c_j = int(y_i), int(y_j)
        if gen.class_means is None or c_i not in gen.class_means or c_j not in gen.class_means:
            raise ValueError(f"generator has no fitted class for ({y_i}, {y_j})")
        mean = (1.0 - lam) * gen.class_means[c_i] + lam * gen.class_means[c_j]
        var = (1.0 - lam) ** 2 * gen.class_stds[c_i] ** 2 + lam**2 * gen.class_stds[c_j] ** 2
        classes = n_classes if n_classes is not None else max(gen.class_means) + 1
        label_i = np.zeros(classes)
        label_i[c_i] = 1.0
        label_j = np.zeros(classes)
        label_j[c_j] = 1.0
        label = _mix_labels(label_i, label_j, lam)
    else:
        if gen.edge_mean is None:
            raise ValueError("generator was not fitted for regression")
        y_mix = _mix_labels(float(y_i), float(y_j), lam)
        shift = (gen.edge_std / gen.label_std) * gen.edge_label_corr * (y_mix - gen.label_mean)
        mean = gen.edge_mean + shift
        var = (1.0 - gen.edge_label_corr**2) * gen.edge_std**2
        label = y_mix
    upper = np.triu_indices(n)
    spread = np.sqrt(np.maximum(var[upper], 0.0))
    draws = mean[upper] + spread * rng.standard_normal(len(upper[0]))
    mat = np.zeros((n, n))
    mat[upper] = draws
    mat = mat + np.triu(mat, k=1).T
    if gen.is_correlation:
        np.fill_diagonal(mat, 1.0)
    return MixedSample(
        matrix=mat,
        label=label,
        provenance=Provenance("gmixup", sources[0], sources[1], lam=lam),
        spd_guaranteed=False,
    )


def c_mixup_pair(
    dataset: LabeledDataset,
    anchor_index: int,
    bandwidth: float,
    rng: np.random.Generator,
) -> int:
    """Pick a partner for the anchor, weighted by label closeness.

    Regression partners are drawn with probability proportional to
    ``exp(-(y_a - y_j)^2 / (2 bandwidth^2))``; classification degenerates to
    uniform sampling within the anchor's class. A singleton class falls back
    to the anchor itself with a warning.
    """
    if len(dataset) < 2:
        raise ValueError("need at least 2 samples to pick a partner")
    if not bandwidth > 0.0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    candidates = np.array([k for k in range(len(dataset)) if k != anchor_index])
    if dataset.task == TASK_CLASSIFICATION:
        if dataset.has_soft_labels:
            raise ValueError("label-distance pairing needs hard class ids")
        same = candidates[dataset.labels[candidates] == dataset.labels[anchor_index]]
        if len(same) == 0:
            warnings.warn(
                f"anchor {anchor_index} is the only sample of its class; "
                f"pairing it with itself",
                UserWarning,
                stacklevel=2,
            )
            return anchor_index
        return int(rng.choice(same))
    y = dataset.labels.astype(np.float64)
    logits = -((y[anchor_index] - y[candidates]) ** 2) / (2.0 * bandwidth**2)
    logits -= logits.max()
    weights = np.exp(logits)
    weights /= weights.sum()
    return int(rng.choice(candidates, p=weights))


def _partner_uniform(anchor: int, size: int, rng: np.random.Generator) -> int:
    j = int(rng.integers(size - 1))
    return j + 1 if j >= anchor else j


def _one_hot(c: int, n_classes: int) -> np.ndarray:
    out = np.zeros(n_classes)
    out[int(c)] = 1.0
    return out


def augment_batch(
    dataset: LabeledDataset,
    config: MixConfig,
    count: int,
    *,
    workers: int = 1,
) -> list[MixedSample]:
    """Generate ``count`` augmented samples under one configuration.

    Output ``k`` is computed from the stream seeded by ``(config.seed, k)``,
    so the batch is a pure function of (dataset, config) regardless of worker
    count or scheduling. Pair selection is anchor-then-partner, uniform
    without replacement, except the label-distance strategy.
    """
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count}")
    if len(dataset) == 0 or (config.strategy in _PAIRWISE and len(dataset) < 2):
        if count > 0:
            raise ValueError(
                f"dataset too small for strategy {config.strategy!r}"
            )
        return []
    is_classification = dataset.task == TASK_CLASSIFICATION
    if is_classification and dataset.has_soft_labels and config.strategy in (
        "gmixup",
        "cmixup",
    ):
        raise ValueError(
            f"{config.strategy} needs hard class labels, got soft labels"
        )
    n_classes = dataset.n_classes if is_classification and not dataset.has_soft_labels else 0

    generator = g_mixup_fit(dataset) if config.strategy == "gmixup" else None
    cache = (
        EigenCache.build(dataset)
        if config.strategy == "rmixup" and config.use_eigencache
        else None
    )
    bandwidth = config.cmix_bandwidth
    if config.strategy == "cmixup" and bandwidth is None:
        if dataset.task == TASK_REGRESSION:
            spread = float(dataset.labels.std())
            if spread == 0.0:
                raise ValueError(
                    "cmixup bandwidth default is the label standard deviation, "
                    "which is zero for this dataset; pass cmix_bandwidth"
                )
            bandwidth = spread
        else:
            bandwidth = 1.0

    def label_of(k: int):
        if is_classification and not dataset.has_soft_labels:
            return _one_hot(dataset.labels[k], n_classes)
        return dataset.labels[k]

    def make(k: int) -> MixedSample:
        rng = np.random.default_rng([int(config.seed), k])
        anchor = int(rng.integers(len(dataset)))
        src_a = dataset.ids[anchor]
        if config.strategy == "dropnode":
            return drop_node(
                dataset.matrices[anchor], label_of(anchor), config.keep_prob, rng, src_a
            )
        if config.strategy == "dropedge":
            return drop_edge(
                dataset.matrices[anchor], label_of(anchor), config.keep_prob, rng, src_a
            )
        if config.strategy == "cmixup":
            partner = c_mixup_pair(dataset, anchor, bandwidth, rng)
        else:
            partner = _partner_uniform(anchor, len(dataset), rng)
        lam = sample_beta(config.alpha, rng)
        sources = (src_a, dataset.ids[partner])
        if config.strategy == "gmixup":
            return g_mixup_sample(
                generator,
                dataset.labels[anchor],
                dataset.labels[partner],
                lam,
                rng,
                n_classes=n_classes or None,
                sources=sources,
            )
        y_a, y_p = label_of(anchor), label_of(partner)
        mat_a, mat_p = dataset.matrices[anchor], dataset.matrices[partner]
        if config.strategy == "rmixup":
            if cache is not None:
                return r_mixup_cached(
                    cache.entry(sources[0]), cache.entry(sources[1]), y_a, y_p, lam, sources
                )
            return r_mixup(mat_a, mat_p, y_a, y_p, lam, sources)
        if config.strategy == "dmixup":
            return d_mixup(mat_a, mat_p, y_a, y_p, lam, rng, sources)
        return v_mixup(mat_a, mat_p, y_a, y_p, lam, sources)

    if workers > 1 and count > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(make, range(count)))
    return [make(k) for k in range(count)]


@dataclass(frozen=True)
class ProbeResult:
    """Mean and spread of interpolation error for the two mixing rules."""

    mean_dv: float
    mean_dr: float
    std_dv: float
    std_dr: float

    @property
    def relative_gap(self) -> float:
        return (self.mean_dv - self.mean_dr) / self.mean_dv if self.mean_dv else 0.0


def incorrect_label_probe(
    dataset: LabeledDataset, trials: int, rng: np.random.Generator
) -> ProbeResult:
    """Measure how far each mixing rule lands from a real middle sample.

    Per trial, three samples with strictly increasing labels are drawn
    (resampling ties); the outer two are mixed with the exact ratio that
    reproduces the middle label, and the entrywise L1 distance from each mix
    to the real middle sample is accumulated. Linear mixing systematically
    overshoots on datasets whose matrices vary geodesically with the label.
    """
    if dataset.task != TASK_REGRESSION:
        raise ValueError("the label probe requires a regression dataset")
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    labels = dataset.labels
    if len(np.unique(labels)) < 3:
        raise ValueError("need at least 3 distinct labels for the probe")
    d_v = np.empty(trials)
    d_r = np.empty(trials)
    for t in range(trials):
        while True:
            picks = rng.choice(len(dataset), size=3, replace=False)
            y = labels[picks]
            if len(np.unique(y)) == 3:
                break
        order = np.argsort(y)
        i1, i2, i3 = picks[order]
        y1, y2, y3 = labels[i1], labels[i2], labels[i3]
        w = (y2 - y3) / (y1 - y3)
        x1, x2, x3 = dataset.matrices[i1], dataset.matrices[i2], dataset.matrices[i3]
        x_v = w * x1 + (1.0 - w) * x3
        x_r = r_mixup(x1, x3, y1, y3, 1.0 - w).matrix
        d_v[t] = np.abs(x_v - x2).sum()
        d_r[t] = np.abs(x_r - x2).sum()
    return ProbeResult(
        mean_dv=float(d_v.mean()),
        mean_dr=float(d_r.mean()),
        std_dv=float(d_v.std()),
        std_dr=float(d_r.std()),
    )
