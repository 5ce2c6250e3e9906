"""Variance profiles for heteroscedastic random designs.

A variance profile is an n x p matrix of entrywise variances gamma_ij^2: the
design matrix it describes has independent centered entries X_ij with
Var(X_ij) = gamma_ij^2.  Profiles are stored as variances (not standard
deviations); the entrywise square root is taken on demand when sampling.

Mixture-model profiles (K classes, each class contributing a block of
identical rows) keep their class structure alongside the materialized matrix
so that downstream solvers can use O(K)-sized fast paths.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class ProfileError(ValueError):
    """Invalid profile construction or normalization request."""


class IdxFormatError(ValueError):
    """Malformed IDX byte stream."""


def _locked(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ClassStructure:
    """Per-class variance vectors s_k (length p) and row counts n_0k."""

    class_vectors: tuple[np.ndarray, ...]
    class_counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.class_vectors) != len(self.class_counts):
            raise ProfileError("class_vectors and class_counts length mismatch")
        if not self.class_vectors:
            raise ProfileError("empty class list")
        p = self.class_vectors[0].shape[0]
        for v in self.class_vectors:
            if v.ndim != 1 or v.shape[0] != p:
                raise ProfileError("class vectors must all share length p")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise ProfileError("class variances must be finite and >= 0")
        if any(c < 1 for c in self.class_counts):
            raise ProfileError("class counts must be >= 1")
        object.__setattr__(self, "class_vectors", tuple(_locked(v) for v in self.class_vectors))
        object.__setattr__(self, "class_counts", tuple(int(c) for c in self.class_counts))

    @property
    def num_classes(self) -> int:
        return len(self.class_vectors)

    def materialize(self) -> np.ndarray:
        """Stack each class vector n_0k times; deterministic and repeatable."""
        return np.repeat(np.stack(self.class_vectors), self.class_counts, axis=0)


@dataclass(frozen=True)
class VarianceProfile:
    """An n x p matrix of nonnegative entrywise variances, optionally classed."""

    entries: np.ndarray
    structure: ClassStructure | None = None

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 2:
            raise ProfileError("profile entries must be a 2-d matrix")
        if not np.all(np.isfinite(e)) or np.any(e < 0):
            raise ProfileError("profile entries must be finite and >= 0")
        object.__setattr__(self, "entries", _locked(e))
        if self.structure is not None:
            if not np.array_equal(self.structure.materialize(), self.entries):
                raise ProfileError("structure does not materialize to the stored entries")

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    def row_means(self) -> np.ndarray:
        return self.entries.mean(axis=1)

    def column_sums(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    def sqrt_entries(self) -> np.ndarray:
        """Entrywise standard deviations, used when sampling designs."""
        return np.sqrt(self.entries)

    def is_row_stochastic(self, target: float = 1.0, rtol: float = 1e-8) -> bool:
        return bool(np.all(np.abs(self.row_means() - target) <= rtol * abs(target)))


@dataclass(frozen=True)
class Dimensions:
    """Problem sizes; every derived quantity is recomputed, never cached."""

    n: int
    m: int
    p: int
    n_test: int

    def __post_init__(self):
        for name in ("n", "m", "p", "n_test"):
            if getattr(self, name) < 1:
                raise ProfileError(f"dimension {name} must be >= 1")

    @property
    def N(self) -> int:
        return self.n + self.m + 2 * self.p

    @property
    def phi_p(self) -> float:
        return self.n / self.p

    @property
    def phi_m(self) -> float:
        return self.n / self.m

    @property
    def c_tilde(self) -> float:
        return self.n_test / self.n

    @property
    def c_n(self) -> float:
        return math.sqrt(self.N / self.n)

    @property
    def c_p(self) -> float:
        return math.sqrt(self.N / self.p)

    @property
    def c_m(self) -> float:
        return math.sqrt(self.N / self.m)


# =====================
# Construction
# =====================

def build_mixture_profile(
    class_vectors: Sequence[np.ndarray], class_counts: Sequence[int]
) -> VarianceProfile:
    """Stack K class variance vectors into a (sum n_0k) x p block profile.

    Row block k repeats s_k^T n_0k times.  The class structure is retained on
    the returned profile.
    """
    structure = ClassStructure(
        tuple(np.asarray(v, dtype=np.float64) for v in class_vectors),
        tuple(int(c) for c in class_counts),
    )
    return VarianceProfile(structure.materialize(), structure)


def normalize_row_stochastic(profile: VarianceProfile, target: float = 1.0) -> VarianceProfile:
    """Rescale each row so its mean variance equals ``target``.

    Row i is multiplied by target * p / sum_j gamma_ij^2; a row of all zeros
    admits no valid scaling and is rejected.
    """
    if target <= 0:
        raise ProfileError("normalization target must be > 0")
    sums = profile.entries.sum(axis=1)
    if np.any(sums <= 0):
        bad = int(np.argmin(sums))
        raise ProfileError(f"row {bad} has zero total variance; cannot normalize")
    scale = target * profile.cols / sums
    if profile.structure is not None:
        # rows within a class share a scale, so rescale the class vectors
        vecs = []
        i = 0
        for v, c in zip(profile.structure.class_vectors, profile.structure.class_counts):
            vecs.append(v * scale[i])
            i += c
        structure = ClassStructure(tuple(vecs), profile.structure.class_counts)
        return VarianceProfile(structure.materialize(), structure)
    return VarianceProfile(profile.entries * scale[:, None])


def constant_profile(rows: int, cols: int, variance: float = 1.0) -> VarianceProfile:
    """All entries equal; the one-class mixture with vector variance * ones(p)."""
    vec = np.full(cols, float(variance))
    return build_mixture_profile([vec], [rows])


def synthetic_class_vectors(num_classes: int, p: int, seed: int = 0) -> list[np.ndarray]:
    """Deterministic heterogeneous class variance vectors for experiments.

    Each class is a smooth positive bump pattern over the p coordinates with a
    class-dependent location, width and amplitude, roughly mimicking per-class
    pixel-variance images.  Intended to be normalized afterwards.
    """
    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, 1.0, p)
    vectors = []
    for k in range(num_classes):
        centers = rng.uniform(0.1, 0.9, size=3)
        widths = rng.uniform(0.04, 0.15, size=3)
        amps = rng.uniform(0.5, 2.0, size=3) * (1.0 + 0.3 * k)
        v = np.full(p, 1e-3)
        for c, w, a in zip(centers, widths, amps):
            v = v + a * np.exp(-0.5 * ((grid - c) / w) ** 2)
        vectors.append(v)
    return vectors


# =====================
# IDX ingestion
# =====================

def _read_exact(data: bytes, offset: int, count: int, what: str) -> bytes:
    if offset + count > len(data):
        raise IdxFormatError(f"truncated IDX payload while reading {what}")
    return data[offset : offset + count]


def parse_idx_images(data: bytes) -> np.ndarray:
    """Decode a big-endian IDX image file into a (count, rows, cols) uint8 tensor."""
    if hasattr(data, "read"):
        data = data.read()
    (magic,) = struct.unpack(">i", _read_exact(data, 0, 4, "magic"))
    if magic != IDX_IMAGES_MAGIC:
        raise IdxFormatError(f"bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
    count, rows, cols = struct.unpack(">iii", _read_exact(data, 4, 12, "dimensions"))
    if count < 0 or rows < 0 or cols < 0:
        raise IdxFormatError("negative dimension field")
    total = count * rows * cols
    if total > len(data):
        raise IdxFormatError("dimension fields overflow the payload")
    payload = _read_exact(data, 16, total, "pixel data")
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols).copy()


def parse_idx_labels(data: bytes) -> np.ndarray:
    """Decode a big-endian IDX label file into a (count,) uint8 vector."""
    if hasattr(data, "read"):
        data = data.read()
    (magic,) = struct.unpack(">i", _read_exact(data, 0, 4, "magic"))
    if magic != IDX_LABELS_MAGIC:
        raise IdxFormatError(f"bad label magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
    (count,) = struct.unpack(">i", _read_exact(data, 4, 4, "count"))
    if count < 0:
        raise IdxFormatError("negative count field")
    payload = _read_exact(data, 8, count, "label data")
    return np.frombuffer(payload, dtype=np.uint8).copy()


def load_idx_pair(image_bytes: bytes, label_bytes: bytes) -> tuple[np.ndarray, np.ndarray]:
    """Parse paired image/label files and check that their counts agree."""
    images = parse_idx_images(image_bytes)
    labels = parse_idx_labels(label_bytes)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"image count {images.shape[0]} does not match label count {labels.shape[0]}"
        )
    return images, labels


def class_variance_vectors(
    images: np.ndarray,
    labels: np.ndarray,
    rescale: float = 1.0,
    num_classes: int | None = None,
) -> list[np.ndarray]:
    """Per-pixel population variance of the images within each class.

    Images are flattened to p = height*width.  Classes with fewer than two
    images yield zero vectors and a warning (the ingestion path stays usable
    on sparse label sets).
    """
    images = np.asarray(images)
    labels = np.asarray(labels)
    if images.shape[0] != labels.shape[0]:
        raise ProfileError("images and labels must have matching counts")
    flat = images.reshape(images.shape[0], -1).astype(np.float64)
    K = int(num_classes) if num_classes is not None else int(labels.max()) + 1 if labels.size else 0
    if labels.size and (labels.min() < 0 or labels.max() >= K):
        raise ProfileError(f"label out of range 0..{K - 1}")
    p = flat.shape[1]
    vectors = []
    underfilled = []
    for k in range(K):
        members = flat[labels == k]
        if members.shape[0] < 2:
            underfilled.append(k)
            vectors.append(np.zeros(p))
            continue
        vectors.append(members.var(axis=0) * rescale)  # population (divide-by-count) variance
    if underfilled:
        warnings.warn(
            f"classes {underfilled} have fewer than 2 images; emitting zero variance vectors",
            RuntimeWarning,
            stacklevel=2,
        )
    return vectors


# =====================
# CSV persistence
# =====================

def write_profile_csv(profile: VarianceProfile, path) -> None:
    """Write `# rows=<n> cols=<p>` then one comma-separated row per line.

    Entries are printed with ``repr`` so a read-back is bit-exact.
    """
    with open(path, "w") as fh:
        fh.write(f"# rows={profile.rows} cols={profile.cols}\n")
        for row in profile.entries:
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


def read_profile_csv(path) -> VarianceProfile:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# rows="):
            raise ProfileError(f"missing profile header in {path}")
        try:
            parts = dict(tok.split("=") for tok in header[2:].split())
            n, p = int(parts["rows"]), int(parts["cols"])
        except (KeyError, ValueError) as exc:
            raise ProfileError(f"unparseable profile header: {header!r}") from exc
        rows = []
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
    entries = np.asarray(rows, dtype=np.float64)
    if entries.shape != (n, p):
        raise ProfileError(f"profile body {entries.shape} does not match header ({n}, {p})")
    return VarianceProfile(entries)
