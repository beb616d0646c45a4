"""Quantization tables for the JPEG-style defense.

The base tables are the standard Annex-K luminance and chrominance matrices;
quality scaling follows the common libjpeg rule.
"""

import numpy as np

LUMINANCE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)

CHROMINANCE = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ],
    dtype=np.float64,
)

LUMINANCE.flags.writeable = False
CHROMINANCE.flags.writeable = False


def quality_scale(quality):
    """libjpeg scaling factor: 5000/q below 50, else 200 - 2q."""
    q = int(quality)
    if not 1 <= q <= 100:
        raise ValueError(f"quality must be in [1, 100], got {quality}")
    return 5000.0 / q if q < 50 else 200.0 - 2.0 * q


def quantization_table(quality, chroma=False):
    """Quality-scaled 8x8 table, entries clamped to [1, 255]."""
    base = CHROMINANCE if chroma else LUMINANCE
    s = quality_scale(quality)
    return np.clip(np.floor((base * s + 50.0) / 100.0), 1.0, 255.0)


def channel_tables(quality, channels=3):
    """One table per image channel: luminance first, chrominance after."""
    return [quantization_table(quality, chroma=(c > 0)) for c in range(channels)]
