"""Dataset ingestion: CIFAR-10 binary files and a synthetic stand-in.

The synthetic generator draws colored blobs whose hue encodes the class.
Adjacent classes sit close on the hue wheel and the pixel noise is heavy,
so small CNNs reach solid but imperfect accuracy with soft, non-saturated
probability vectors. That keeps the benchmark honest: bounded-perturbation
attacks have boundaries within reach, and prediction-shift detector scores
vary continuously on clean images instead of collapsing to zero.
"""

from dataclasses import dataclass

import numpy as np

RECORD_BYTES = 3073  # 1 label byte + 3 channel planes of 1024 bytes
IMAGE_SHAPE = (3, 32, 32)


class DatasetError(ValueError):
    """Malformed dataset file."""


@dataclass(frozen=True)
class DatasetRecord:
    """True class label plus a 32x32 RGB image with integer [0, 255] values."""

    label: int
    image: np.ndarray

    def __post_init__(self):
        if not 0 <= self.label:
            raise ValueError(f"negative label {self.label}")
        if self.image.shape != IMAGE_SHAPE:
            raise ValueError(f"image shape {self.image.shape} != {IMAGE_SHAPE}")


def _freeze(arr):
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


def load_cifar_binary(path):
    """Parse a CIFAR-10 binary batch into records.

    Each record is one label byte (0-9) followed by three 1024-byte
    row-major channel planes (R, G, B).
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) % RECORD_BYTES:
        raise DatasetError(
            f"'{path}': length {len(data)} is not a multiple of {RECORD_BYTES} "
            f"(truncated record)"
        )
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, RECORD_BYTES)
    labels = raw[:, 0]
    bad = np.nonzero(labels > 9)[0]
    if bad.size:
        raise DatasetError(f"'{path}': record {bad[0]} has label byte {labels[bad[0]]} > 9")
    images = raw[:, 1:].reshape(-1, *IMAGE_SHAPE).astype(np.float64)
    return [
        DatasetRecord(label=int(lab), image=_freeze(img))
        for lab, img in zip(labels, images)
    ]


# Hue-wheel class colors centered on mid gray. The amplitude keeps adjacent
# classes within roughly twice the attack budget of each other per channel,
# and blob position carries no class information, so the learned features
# stay color-like rather than positional.
COLOR_AMPLITUDE = 60.0
_CHANNEL_PHASES = (0.0, -2.0 * np.pi / 3.0, 2.0 * np.pi / 3.0)
BASE_MEAN = 110.0
BASE_SIGMA = 14.0


def class_colors(classes):
    """(classes, 3) RGB colors evenly spaced on the hue wheel."""
    angles = 2.0 * np.pi * np.arange(classes) / classes
    return np.stack(
        [128.0 + COLOR_AMPLITUDE * np.cos(angles + p) for p in _CHANNEL_PHASES],
        axis=1,
    )


def generate_synthetic(seed, count, classes=10):
    """Deterministic colored-blob dataset; labels cycle round-robin."""
    if classes < 2:
        raise ValueError("need at least 2 classes")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5B10B]))
    colors = class_colors(classes)
    yy, xx = np.meshgrid(np.arange(32.0), np.arange(32.0), indexing="ij")
    records = []
    for i in range(int(count)):
        label = i % classes
        cy = rng.uniform(9.0, 23.0)
        cx = rng.uniform(9.0, 23.0)
        sigma = rng.uniform(3.5, 5.5)
        gain = rng.uniform(0.7, 1.3)
        base = rng.normal(BASE_MEAN, BASE_SIGMA, IMAGE_SHAPE)
        bump = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma**2))
        img = base + gain * bump[None] * (colors[label][:, None, None] - BASE_MEAN)
        img = np.floor(np.clip(img, 0.0, 255.0) + 0.5)
        records.append(DatasetRecord(label=label, image=_freeze(img)))
    return records


def split_records(records, seed):
    """60/20/20 split: classifier training, detector calibration, attack."""
    n = len(records)
    perm = np.random.default_rng(np.random.SeedSequence([int(seed), 0x59117])).permutation(n)
    a, b = int(0.6 * n), int(0.8 * n)
    pick = lambda idx: [records[i] for i in idx]
    return pick(perm[:a]), pick(perm[a:b]), pick(perm[b:])
