"""Dataset container I/O, image preprocessing/augmentation, and a synthetic
labeled image generator for desk-scale experiments.

Container file layout (little-endian):
  magic "BSEC" | version u32 | N u64 | H u32 | W u32 | C u32 | dtype tag u8
  (1 = float32) | image payload (N*H*W*C scalars, row-major) | N bytes
  multi-class labels | N bytes binary labels | u32 metadata length | UTF-8
  metadata.  Readers reject unknown magic or version.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InputError, LabelError
from .metrics import binarize_labels

MAGIC = b"BSEC"
VERSION = 1
DTYPE_F32 = 1


@dataclass
class DatasetContainer:
    images: np.ndarray  # [N, H, W, C] float32 in [0, 1]
    labels_multi: np.ndarray  # [N] ints in [0, 5)
    labels_binary: np.ndarray  # [N] ints in {0, 1}
    metadata: str = ""

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float32)
        self.labels_multi = np.asarray(self.labels_multi, dtype=np.uint8)
        self.labels_binary = np.asarray(self.labels_binary, dtype=np.uint8)
        validate_container(self)

    def __len__(self):
        return self.images.shape[0]


def validate_container(ds):
    if ds.images.ndim != 4:
        raise InputError(f"images must be [N,H,W,C], got shape {ds.images.shape}")
    n = ds.images.shape[0]
    if ds.labels_multi.shape != (n,) or ds.labels_binary.shape != (n,):
        raise InputError("label arrays do not match image count")
    if n and (ds.labels_multi.max(initial=0) >= 5):
        raise LabelError("multi-class label out of range [0, 5)")
    if n and np.any(ds.labels_binary != binarize_labels(ds.labels_multi)):
        raise LabelError("binary labels inconsistent with binarized multi-class labels")
    if n and (ds.images.min() < 0 or ds.images.max() > 1):
        raise InputError("image values must lie in [0, 1]")


def save_container(ds: DatasetContainer, path):
    n, h, w, c = ds.images.shape
    meta = ds.metadata.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQIIIB", VERSION, n, h, w, c, DTYPE_F32))
        fh.write(np.ascontiguousarray(ds.images, dtype="<f4").tobytes())
        fh.write(ds.labels_multi.astype(np.uint8).tobytes())
        fh.write(ds.labels_binary.astype(np.uint8).tobytes())
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)


def _read_exact(fh, count, what):
    data = fh.read(count)
    if len(data) != count:
        raise FormatError(
            f"truncated container: expected {count} bytes for {what} at offset {fh.tell() - len(data)}"
        )
    return data


def load_container(path) -> DatasetContainer:
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r} at offset 0")
        header = _read_exact(fh, struct.calcsize("<IQIIIB"), "header")
        version, n, h, w, c, dtag = struct.unpack("<IQIIIB", header)
        if version != VERSION:
            raise FormatError(f"unsupported container version {version} at offset 4")
        if dtag != DTYPE_F32:
            raise FormatError(f"unknown dtype tag {dtag} at offset 24")
        count = n * h * w * c
        images = np.frombuffer(_read_exact(fh, count * 4, "image payload"), dtype="<f4")
        images = images.reshape(n, h, w, c).copy()
        lm = np.frombuffer(_read_exact(fh, n, "multi-class labels"), dtype=np.uint8).copy()
        lb = np.frombuffer(_read_exact(fh, n, "binary labels"), dtype=np.uint8).copy()
        (mlen,) = struct.unpack("<I", _read_exact(fh, 4, "metadata length"))
        meta = _read_exact(fh, mlen, "metadata").decode("utf-8")
    if n and lm.max() >= 5:
        raise FormatError("multi-class label out of range [0, 5) in payload")
    if n and np.any(lb != binarize_labels(lm)):
        raise FormatError("binary labels inconsistent with multi-class labels in payload")
    return DatasetContainer(images=images, labels_multi=lm, labels_binary=lb, metadata=meta)


def tile_image(image, tile=598):
    """Non-overlapping row-major tiles; partial edge tiles are discarded."""
    image = np.asarray(image)
    h, w = image.shape[:2]
    if h < tile or w < tile:
        raise InputError(f"image {h}x{w} smaller than tile size {tile}")
    out = []
    for i in range(h // tile):
        for j in range(w // tile):
            out.append(image[i * tile : (i + 1) * tile, j * tile : (j + 1) * tile])
    return out


def resize_bilinear(image, target):
    """Bilinear resize with half-pixel sample centers (align_corners=False)."""
    image = np.asarray(image, dtype=np.float64)
    squeeze = image.ndim == 2
    if squeeze:
        image = image[:, :, None]
    th, tw = target
    if th < 1 or tw < 1:
        raise InputError(f"target size must be positive, got {target}")
    h, w = image.shape[:2]
    if (th, tw) == (h, w):
        out = image.astype(np.float32)
        return out[:, :, 0] if squeeze else out

    def axis_coords(src, dst):
        x = (np.arange(dst) + 0.5) * (src / dst) - 0.5
        x = np.clip(x, 0, src - 1)
        lo = np.floor(x).astype(int)
        hi = np.minimum(lo + 1, src - 1)
        frac = x - lo
        return lo, hi, frac

    ylo, yhi, yf = axis_coords(h, th)
    xlo, xhi, xf = axis_coords(w, tw)
    top = image[ylo][:, xlo] * (1 - xf)[None, :, None] + image[ylo][:, xhi] * xf[None, :, None]
    bot = image[yhi][:, xlo] * (1 - xf)[None, :, None] + image[yhi][:, xhi] * xf[None, :, None]
    out = top * (1 - yf)[:, None, None] + bot * yf[:, None, None]
    out = out.astype(np.float32)
    return out[:, :, 0] if squeeze else out


@dataclass(frozen=True)
class AugmentSpec:
    crop_count: int = 3
    crop_size: tuple = (598, 598)
    enable_flips: bool = True
    enable_rot90: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.crop_count < 0:
            raise InputError("crop_count must be >= 0")


def augment(image, spec: AugmentSpec, rng=None):
    """crop_count random crops, each independently flipped (p=0.5) and
    rotated by a random multiple of 90 degrees."""
    image = np.asarray(image)
    ch, cw = spec.crop_size
    h, w = image.shape[:2]
    if ch > h or cw > w:
        raise InputError(f"crop size {spec.crop_size} exceeds image {h}x{w}")
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    out = []
    for _ in range(spec.crop_count):
        top = int(rng.integers(0, h - ch + 1))
        left = int(rng.integers(0, w - cw + 1))
        crop = image[top : top + ch, left : left + cw].copy()
        if spec.enable_flips and rng.random() < 0.5:
            crop = crop[:, ::-1].copy()
        if spec.enable_rot90:
            crop = np.rot90(crop, k=int(rng.integers(0, 4))).copy()
        out.append(crop)
    return out


def _draw_disk(img, cy, cx, radius, value):
    h, w = img.shape[:2]
    yy, xx = np.ogrid[:h, :w]
    img[(yy - cy) ** 2 + (xx - cx) ** 2 <= radius**2] = value


def _draw_cross(img, cy, cx, arm, thickness, value):
    img[cy - thickness : cy + thickness + 1, cx - arm : cx + arm + 1] = value
    img[cy - arm : cy + arm + 1, cx - thickness : cx + thickness + 1] = value


def synth_dataset(n_per_class, n_classes=5, image_size=32, seed=0, noise=0.1,
                  channels=1, metadata=""):
    """Synthetic labeled images: each class renders a distinct geometric
    template (blank, small disk, large disk, small cross, large cross) plus
    seeded additive noise, clipped to [0, 1]."""
    if not 2 <= n_classes <= 5:
        raise InputError("n_classes must be in [2, 5]")
    if image_size < 16:
        raise InputError("image_size must be >= 16 to fit the patterns")
    s = image_size
    c = s // 2
    templates = []
    for k in range(n_classes):
        img = np.full((s, s), 0.1, dtype=np.float64)
        if k == 1:
            _draw_disk(img, c, c, s // 8, 0.9)
        elif k == 2:
            _draw_disk(img, c, c, s // 3, 0.9)
        elif k == 3:
            _draw_cross(img, c, c, s // 8, max(1, s // 16), 0.9)
        elif k == 4:
            _draw_cross(img, c, c, s // 3, max(1, s // 16), 0.9)
        templates.append(img)
    rng = np.random.default_rng(seed)
    n = n_per_class * n_classes
    images = np.empty((n, s, s, channels), dtype=np.float32)
    labels = np.empty(n, dtype=np.uint8)
    i = 0
    for k in range(n_classes):
        for _ in range(n_per_class):
            img = templates[k][:, :, None].repeat(channels, axis=2)
            if noise > 0:
                img = img + rng.normal(0, noise, size=img.shape)
            images[i] = np.clip(img, 0, 1)
            labels[i] = k
            i += 1
    meta = metadata or f"synthetic seed={seed} noise={noise}"
    return DatasetContainer(images=images, labels_multi=labels,
                           labels_binary=binarize_labels(labels), metadata=meta)


@dataclass
class DatasetView:
    """Index-based view into a container; shares image storage."""

    dataset: DatasetContainer
    indices: np.ndarray

    @property
    def images(self):
        return self.dataset.images[self.indices]

    @property
    def labels_multi(self):
        return self.dataset.labels_multi[self.indices].astype(np.int64)

    @property
    def labels_binary(self):
        return self.dataset.labels_binary[self.indices].astype(np.int64)

    def __len__(self):
        return len(self.indices)


def split(dataset: DatasetContainer, fractions=(0.6, 0.1, 0.2, 0.1), seed=0):
    """Stratified train/val/stacking/test split as four disjoint views
    covering the dataset."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 4:
        raise InputError("fractions must have four parts: train/val/stacking/test")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise InputError(f"fractions must sum to 1, got {sum(fractions)}")
    rng = np.random.default_rng(seed)
    parts = [[], [], [], []]
    labels = dataset.labels_multi
    for k in np.unique(labels):
        idx = np.nonzero(labels == k)[0]
        idx = rng.permutation(idx)
        n = len(idx)
        # largest-remainder allocation so counts sum to n exactly
        raw = [f * n for f in fractions]
        base = [int(np.floor(r)) for r in raw]
        rem = n - sum(base)
        order = np.argsort([b - r for b, r in zip(base, raw)], kind="stable")
        for j in order[:rem]:
            base[j] += 1
        lo = 0
        for p, cnt in enumerate(base):
            parts[p].append(idx[lo : lo + cnt])
            lo += cnt
    views = []
    for p, frac in enumerate(fractions):
        idx = np.sort(np.concatenate(parts[p])) if parts[p] else np.array([], dtype=np.int64)
        if frac > 0 and len(dataset) >= len(fractions) * 4 and len(idx) == 0:
            raise InputError(f"split part {p} is empty despite fraction {frac}")
        views.append(DatasetView(dataset=dataset, indices=idx.astype(np.int64)))
    return tuple(views)
