"""RGB to CIE L*a*b* conversion (D65 white point, sRGB companding)."""

import numpy as np

from ..autodiff.ops import REGISTRY


def rgb_to_lab(image):
    """Convert a (3, H, W) array of [0, 255] intensities to L*a*b*."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ValueError(f"expected (3, H, W), got {arr.shape}")
    return REGISTRY["rgb_to_lab"].forward({}, arr)
