"""Source-coordinate grids for the geometric transforms.

Every geometric transform is an inverse warp: for each output pixel we
compute the fractional source location to sample bilinearly. Rotation and
scaling are about the image centre; points mapping outside the source
rectangle contribute zero.
"""

import numpy as np

from ..autodiff.ops import bilinear_grid


def _output_grid(h, w):
    yy, xx = np.meshgrid(
        np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij"
    )
    return yy, xx


def warp_coords(spec, h, w):
    """(source_y, source_x) arrays for scale/translate/rotate."""
    yy, xx = _output_grid(h, w)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    if spec.kind == "scale":
        s = float(spec.param)
        return cy + (yy - cy) / s, cx + (xx - cx) / s
    if spec.kind == "translate":
        dx, dy = spec.param
        return yy - float(dy), xx - float(dx)
    if spec.kind == "rotate":
        theta = np.deg2rad(float(spec.param))
        u, v = yy - cy, xx - cx
        cos_t, sin_t = np.cos(theta), np.sin(theta)
        return cy + cos_t * u + sin_t * v, cx - sin_t * u + cos_t * v
    raise ValueError(f"'{spec.kind}' is not a warp kind")


def resize_coords(src_size, target):
    """Half-pixel-centre coordinates for resizing src_size -> target.

    Coordinates are clamped to the source rectangle (edge replication), the
    usual resize convention, so every corner weight stays valid.
    """
    scale = src_size / target
    pts = (np.arange(target, dtype=np.float64) + 0.5) * scale - 0.5
    pts = np.clip(pts, 0.0, src_size - 1.0)
    return np.meshgrid(pts, pts, indexing="ij")


def sample_bilinear(image, coords_y, coords_x):
    """Numpy bilinear sampling of a (C, H, W) array; zero outside the frame."""
    attrs = bilinear_grid(image.shape[1], image.shape[2], coords_y, coords_x)
    gathered = image[:, attrs["iy"], attrs["ix"]]
    return (gathered * attrs["w"][None]).sum(axis=1)
