"""Splits, class rebalancing, and image augmentation for patch datasets."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from collections import Counter

import numpy as np

from .errors import DegenerateClass, EmptySet, InvalidConfig, WindowOutOfBounds
from .raster import MODEL_BANDS, NUM_CLASSES, CrownRecord, Patch, RasterImage, extract_patch


@dataclass(frozen=True)
class LabeledSet:
    """Patches that all carry a class label."""

    patches: tuple[Patch, ...]

    def __post_init__(self):
        for p in self.patches:
            if p.label is None:
                raise InvalidConfig("labeled set contains an unlabeled patch")

    def __len__(self):
        return len(self.patches)

    @property
    def class_counts(self) -> dict[int, int]:
        return dict(Counter(p.label for p in self.patches))

    def labels(self) -> np.ndarray:
        return np.array([p.label for p in self.patches], dtype=np.int64)

    def to_images(self):
        """Stack tensors into (n, 8, s, s) float64 plus a label vector."""
        x = np.stack([p.tensor for p in self.patches])
        return x, self.labels()

    def to_vectors(self, with_coords: bool = False):
        """Flatten tensors into (n, 8*s*s [+2]) float64 plus a label vector."""
        rows = [_vectorize(p, with_coords) for p in self.patches]
        return np.stack(rows), self.labels()


@dataclass(frozen=True)
class UnlabeledSet:
    """Patches without labels."""

    patches: tuple[Patch, ...]

    def __post_init__(self):
        for p in self.patches:
            if p.label is not None:
                raise InvalidConfig("unlabeled set contains a labeled patch")

    def __len__(self):
        return len(self.patches)

    def to_images(self) -> np.ndarray:
        return np.stack([p.tensor for p in self.patches])

    def to_vectors(self, with_coords: bool = False) -> np.ndarray:
        return np.stack([_vectorize(p, with_coords) for p in self.patches])


def _vectorize(patch: Patch, with_coords: bool) -> np.ndarray:
    flat = patch.tensor.ravel()
    if not with_coords:
        return flat.astype(np.float64)
    if patch.coords is None:
        raise InvalidConfig("patch has no coordinates but with_coords was requested")
    return np.concatenate([flat, np.asarray(patch.coords, dtype=np.float64)])


def stratified_split_indices(labels: np.ndarray, train_fraction: float, seed: int):
    """Per-class 80/20-style split over positions into ``labels``.

    Each class contributes floor(count * fraction) training items; leftover
    slots up to floor(n * fraction) go to the classes with the largest
    fractional remainders (ties favor the lower class id). Shuffling within
    each class is seeded.
    """
    if not 0 < train_fraction < 1:
        raise InvalidConfig(f"train_fraction must be in (0, 1), got {train_fraction}")
    labels = np.asarray(labels)
    n = len(labels)
    if n == 0:
        raise EmptySet("cannot split an empty set")
    class_ids = sorted(set(int(v) for v in labels))
    for c in class_ids:
        if int((labels == c).sum()) < 2:
            raise DegenerateClass(f"class {c} has fewer than 2 members")

    rng = np.random.default_rng(seed)
    # small epsilon guards against float dust in count * fraction
    target_total = int(np.floor(n * train_fraction + 1e-9))
    takes = {}
    remainders = []
    for c in class_ids:
        exact = int((labels == c).sum()) * train_fraction
        takes[c] = int(np.floor(exact + 1e-9))
        remainders.append((-(exact - takes[c]), c))
    leftover = target_total - sum(takes.values())
    for _, c in sorted(remainders):
        if leftover <= 0:
            break
        takes[c] += 1
        leftover -= 1

    train_idx, test_idx = [], []
    for c in class_ids:
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(len(members))]
        train_idx.extend(members[: takes[c]])
        test_idx.extend(members[takes[c]:])
    return np.array(sorted(train_idx)), np.array(sorted(test_idx))


def stratified_split(labeled: LabeledSet, train_fraction: float, seed: int):
    """Split a labeled set into (train, test), stratified by class."""
    train_idx, test_idx = stratified_split_indices(labeled.labels(), train_fraction, seed)
    train = LabeledSet(tuple(labeled.patches[i] for i in train_idx))
    test = LabeledSet(tuple(labeled.patches[i] for i in test_idx))
    return train, test


def random_oversample(train: LabeledSet, seed: int) -> LabeledSet:
    """Sample minority classes with replacement up to the majority count."""
    if len(train) == 0:
        raise EmptySet("cannot oversample an empty set")
    rng = np.random.default_rng(seed)
    counts = train.class_counts
    majority = max(counts.values())
    out = list(train.patches)
    for c in sorted(counts):
        members = [p for p in train.patches if p.label == c]
        missing = majority - len(members)
        if missing > 0:
            picks = rng.integers(0, len(members), size=missing)
            out.extend(members[i] for i in picks)
    return LabeledSet(tuple(out))


def duplication_factor(total: int, class_count: int) -> int:
    """round(total / class_count), half up, in exact integer arithmetic."""
    return (2 * total + class_count) // (2 * class_count)


def duplicate_upsample(train: LabeledSet) -> LabeledSet:
    """Replicate each item of class t round(N / n_t) times, deterministically."""
    if len(train) == 0:
        raise EmptySet("cannot upsample an empty set")
    total = len(train)
    counts = train.class_counts
    factors = {c: duplication_factor(total, n) for c, n in counts.items()}
    out = []
    for p in train.patches:
        out.extend([p] * factors[p.label])
    return LabeledSet(tuple(out))


# --- augmentation ------------------------------------------------------------


@dataclass(frozen=True)
class AugmentPolicy:
    """Which image transforms run at batch time, and how hard they kick.

    Every enabled transform fires independently with ``probability``.
    Optical and grid distortion are accepted for config compatibility but
    are no-ops; ``blur`` is a 3x3 box filter per band.
    """

    flip_horizontal: bool = True
    contrast: bool = True
    gamma: bool = True
    brightness: bool = True
    rotate90: bool = True
    transpose: bool = True
    shift: bool = True
    scale: bool = True
    blur: bool = True
    optical_distortion: bool = False
    grid_distortion: bool = False
    probability: float = 0.5
    contrast_range: float = 0.2
    gamma_range: float = 0.2
    brightness_range: float = 0.1
    shift_range: float = 0.1
    scale_low: float = 0.9
    scale_high: float = 1.1
    rotation_degrees: float = 45.0
    shear_degrees: float = 10.0

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise InvalidConfig(f"probability must be in [0, 1], got {self.probability}")

    @classmethod
    def disabled(cls) -> "AugmentPolicy":
        return cls(
            flip_horizontal=False, contrast=False, gamma=False, brightness=False,
            rotate90=False, transpose=False, shift=False, scale=False, blur=False,
        )

    @classmethod
    def flips_only(cls) -> "AugmentPolicy":
        return replace(cls.disabled(), flip_horizontal=True, transpose=True)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentPolicy":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown augment policy keys: {sorted(unknown)}")
        return cls(**d)


def _box_blur(tensor: np.ndarray) -> np.ndarray:
    padded = np.pad(tensor, ((0, 0), (1, 1), (1, 1)), mode="edge")
    out = np.zeros_like(tensor)
    for dr in range(3):
        for dc in range(3):
            out += padded[:, dr:dr + tensor.shape[1], dc:dc + tensor.shape[2]]
    return out / 9.0


def _bilinear_sample(tensor: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Sample every band of (C, H, W) ``tensor`` at float (rows, cols), edge-clamped."""
    _, h, w = tensor.shape
    rows = np.clip(rows, 0.0, h - 1.0)
    cols = np.clip(cols, 0.0, w - 1.0)
    r0 = np.floor(rows).astype(np.int64)
    c0 = np.floor(cols).astype(np.int64)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = rows - r0
    fc = cols - c0
    top = tensor[:, r0, c0] * (1 - fc) + tensor[:, r0, c1] * fc
    bottom = tensor[:, r1, c0] * (1 - fc) + tensor[:, r1, c1] * fc
    return top * (1 - fr) + bottom * fr


def _affine_sample(tensor, out_size, angle_deg=0.0, shear_deg=0.0,
                   tx=0.0, ty=0.0, scale_factor=1.0):
    """Resample ``tensor`` through an inverse affine map about its center.

    The output grid is ``out_size`` square, centered on the input center.
    Rotation and shear are in degrees; (tx, ty) shift the sampling window
    in pixels; ``scale_factor`` > 1 zooms in.
    """
    _, h, w = tensor.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ii, jj = np.meshgrid(np.arange(out_size), np.arange(out_size), indexing="ij")
    dy = (ii - (out_size - 1) / 2.0) / scale_factor
    dx = (jj - (out_size - 1) / 2.0) / scale_factor
    theta = np.deg2rad(angle_deg)
    lam = np.tan(np.deg2rad(shear_deg))
    # inverse map: shear along x, then rotate
    dx = dx + lam * dy
    src_r = cy + np.sin(theta) * dx + np.cos(theta) * dy + ty
    src_c = cx + np.cos(theta) * dx - np.sin(theta) * dy + tx
    return _bilinear_sample(tensor, src_r, src_c)


def augment(patch: Patch, policy: AugmentPolicy, rng: np.random.Generator) -> Patch:
    """Apply the enabled transforms, each with its probability, and clamp to [0, 1].

    The patch must already be normalized; label and coords pass through.
    """
    t = patch.tensor
    p = policy.probability
    if policy.flip_horizontal and rng.random() < p:
        t = t[:, :, ::-1]
    if policy.contrast and rng.random() < p:
        factor = 1.0 + rng.uniform(-policy.contrast_range, policy.contrast_range)
        mean = t.mean(axis=(1, 2), keepdims=True)
        t = (t - mean) * factor + mean
    if policy.gamma and rng.random() < p:
        g = 1.0 + rng.uniform(-policy.gamma_range, policy.gamma_range)
        t = np.clip(t, 0.0, 1.0) ** g
    if policy.brightness and rng.random() < p:
        t = t + rng.uniform(-policy.brightness_range, policy.brightness_range)
    if policy.rotate90 and rng.random() < p:
        t = np.rot90(t, k=1, axes=(1, 2))
    if policy.transpose and rng.random() < p:
        t = np.swapaxes(t, 1, 2)
    if policy.shift and rng.random() < p:
        limit = policy.shift_range * patch.size
        t = _affine_sample(t, patch.size,
                           tx=rng.uniform(-limit, limit), ty=rng.uniform(-limit, limit))
    if policy.scale and rng.random() < p:
        t = _affine_sample(t, patch.size,
                           scale_factor=rng.uniform(policy.scale_low, policy.scale_high))
    if policy.blur and rng.random() < p:
        t = _box_blur(np.ascontiguousarray(t))
    t = np.clip(np.ascontiguousarray(t), 0.0, 1.0)
    return patch.with_tensor(t)


def affine_center_crop(tensor: np.ndarray, out_size: int, angle_deg: float = 0.0,
                       shear_deg: float = 0.0, tx: float = 0.0, ty: float = 0.0) -> np.ndarray:
    """Rotate/shear/translate a double-size tensor and center-crop to ``out_size``.

    With an input side of 2*out_size the cropped window never reads beyond
    the source for |angle| <= 45 degrees at unit scale, so no dark corners
    appear.
    """
    return _affine_sample(tensor, out_size, angle_deg=angle_deg, shear_deg=shear_deg,
                          tx=tx, ty=ty)


def crop_augment_vgg(raster: RasterImage, crown: CrownRecord, s: int,
                     policy: AugmentPolicy, rng: np.random.Generator) -> Patch:
    """Extract a 2s patch, random-rotate/shear/translate, center-crop to s.

    Raises :class:`WindowOutOfBounds` when the 2s window does not fit.
    """
    big = extract_patch(raster, crown, 2 * s)
    angle = rng.uniform(-policy.rotation_degrees, policy.rotation_degrees)
    shear = rng.uniform(-policy.shear_degrees, policy.shear_degrees)
    limit = policy.shift_range * s
    tx = rng.uniform(-limit, limit)
    ty = rng.uniform(-limit, limit)
    cropped = affine_center_crop(big.tensor, s, angle_deg=angle, shear_deg=shear,
                                 tx=tx, ty=ty)
    return Patch(size=s, tensor=cropped, coords=big.coords, label=big.label)


def center_crop(tensor: np.ndarray, out_size: int) -> np.ndarray:
    """Plain center crop, used for test-time patches in the crop-augment scheme."""
    _, h, w = tensor.shape
    r0 = (h - out_size) // 2
    c0 = (w - out_size) // 2
    return tensor[:, r0:r0 + out_size, c0:c0 + out_size].copy()


def extract_patches(raster: RasterImage, crowns, s: int, log=None):
    """Extract patches for every crown, skipping those too near the edge.

    Returns (patches, skipped_count); the skip count is logged when a
    logger is given.
    """
    patches, skipped = [], 0
    for crown in crowns:
        try:
            patches.append(extract_patch(raster, crown, s))
        except WindowOutOfBounds:
            skipped += 1
    if log is not None and skipped:
        log.info("skipped %d edge crowns at s=%d", skipped, s)
    return patches, skipped
