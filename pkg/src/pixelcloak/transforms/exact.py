"""Exact transform forward paths.

``apply_exact`` is the defender's integer-domain pipeline: integers in,
integers in [0, 255] out. ``apply_2d`` covers the geometric kinds used by
the attackers; those produce float images since they feed loss terms, not
classifiers behind a defense.
"""

import numpy as np

from .geometry import resize_coords, sample_bilinear, warp_coords
from .jpeg_tables import channel_tables
from .specs import TransformSpec


def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def _dct_matrix():
    # Orthonormal type-II DCT, built independently of the autodiff engine so
    # exact-vs-surrogate comparisons exercise two separate code paths.
    n = np.arange(8.0)
    k = n[:, None]
    m = np.cos(np.pi * (2.0 * n[None, :] + 1.0) * k / 16.0)
    m[0, :] *= np.sqrt(1.0 / 8.0)
    m[1:, :] *= np.sqrt(2.0 / 8.0)
    return m


_DCT = _dct_matrix()


def requantize_exact(image, bits):
    """Quantize to 2**bits uniform levels spanning [0, 255], integer output."""
    a = (2.0**bits - 1.0) / 255.0
    levels = _round_half_up(image * a) / a
    return _round_half_up(levels)


def median_exact(image, k):
    """Median filter with reflect padding; k=2 covers pixel + right/down."""
    pb, pa = ((k - 1) // 2, (k - 1) // 2) if k != 2 else (0, 1)
    padded = np.pad(image, ((0, 0), (pb, pa), (pb, pa)), mode="reflect")
    c, h, w = image.shape
    win = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(1, 2))
    flat = win.reshape(c, h, w, k * k)
    mid = (k * k - 1) // 2  # lower middle when the window has even cardinality
    return np.partition(flat, mid, axis=-1)[..., mid]


def jpeg_exact(image, quality):
    """Blockwise DCT quantization round trip; no color conversion or coding."""
    c, h, w = image.shape
    if h % 8 or w % 8:
        raise ValueError(f"jpeg needs dimensions divisible by 8, got {h}x{w}")
    tables = channel_tables(quality, channels=c)
    out = np.empty_like(image, dtype=np.float64)
    blocks = image.reshape(c, h // 8, 8, w // 8, 8)
    for ch in range(c):
        t = tables[ch][None, :, None, :]  # broadcast over block indices
        coef = np.einsum("ka,lb,iajb->ikjl", _DCT, _DCT, blocks[ch], optimize=True)
        deq = _round_half_up(coef / t) * t
        rec = np.einsum("ka,lb,ikjl->iajb", _DCT, _DCT, deq, optimize=True)
        out[ch] = rec.reshape(h, w)
    return _round_half_up(np.clip(out, 0.0, 255.0))


def apply_exact(spec: TransformSpec, image):
    """Defense transform on the exact integer path."""
    spec.validate(size=image.shape[-1])
    img = np.asarray(image, dtype=np.float64)
    if spec.kind == "identity":
        return img.copy()
    if spec.kind == "requantize":
        return requantize_exact(img, spec.param)
    if spec.kind == "median":
        return median_exact(img, spec.param)
    if spec.kind == "jpeg":
        return jpeg_exact(img, spec.param)
    raise ValueError(f"'{spec.kind}' is not a defense kind")


def apply_2d(spec: TransformSpec, image, noise=None):
    """Geometric / photometric transform used by EOT and resize-pad attacks.

    gauss-noise requires the noise array to be passed in (the caller owns
    the random stream); all other kinds are deterministic.
    """
    img = np.asarray(image, dtype=np.float64)
    spec.validate(size=img.shape[-1])
    if spec.kind in ("scale", "translate", "rotate"):
        cy, cx = warp_coords(spec, img.shape[1], img.shape[2])
        return sample_bilinear(img, cy, cx)
    if spec.kind == "brighten":
        return np.clip(img + float(spec.param), 0.0, 255.0)
    if spec.kind == "darken":
        return np.clip(img - float(spec.param), 0.0, 255.0)
    if spec.kind == "gauss-noise":
        if noise is None:
            raise ValueError("gauss-noise needs its noise array")
        return np.clip(img + noise, 0.0, 255.0)
    if spec.kind == "resize-pad":
        r, oy, ox = (int(v) for v in spec.param)
        cy, cx = resize_coords(img.shape[-1], r)
        small = sample_bilinear(img, cy, cx)
        out = np.zeros_like(img)
        out[:, oy : oy + r, ox : ox + r] = small
        return out
    if spec.kind == "identity":
        return img.copy()
    raise ValueError(f"'{spec.kind}' is not a 2D kind")
