"""Differentiable transform surrogates as expression fragments.

``build_differentiable`` returns a function that grafts the transform onto
an existing image node. Defense kinds replace hard rounding with the cubic
surrogate round(x) + (x - round(x))**3, whose derivative 3(x - round(x))**2
is nonzero almost everywhere; geometric kinds are natively differentiable
through bilinear sampling.
"""

import numpy as np

from ..autodiff import graph as g
from .geometry import resize_coords, warp_coords
from .jpeg_tables import channel_tables
from .specs import TransformSpec


def _requantize_node(node, bits):
    a = (2.0**bits - 1.0) / 255.0
    scaled = g.multiply(node, g.constant(a))
    return g.multiply(g.cubic_round(scaled), g.constant(1.0 / a))


def _jpeg_node(node, quality):
    c, h, w = node.shape
    if h % 8 or w % 8:
        raise ValueError(f"jpeg needs dimensions divisible by 8, got {h}x{w}")
    tables = channel_tables(quality, channels=c)
    tiled = np.stack([np.tile(t, (h // 8, w // 8)) for t in tables])
    coef = g.dct8(node)
    quant = g.cubic_round(g.multiply(coef, g.constant(1.0 / tiled)))
    deq = g.multiply(quant, g.constant(tiled))
    rec = g.clamp(g.idct8(deq), 0.0, 255.0)
    return g.cubic_round(rec)


def build_differentiable(spec: TransformSpec):
    """Surrogate fragment for a defense kind: image node -> image node."""
    spec.validate()
    kind, param = spec.kind, spec.param
    if kind == "identity":
        return lambda node: node
    if kind == "requantize":
        return lambda node: _requantize_node(node, param)
    if kind == "median":
        return lambda node: g.median_filter(node, param)
    if kind == "jpeg":
        return lambda node: _jpeg_node(node, param)
    raise ValueError(f"'{kind}' has no defense surrogate")


def transform_node(spec: TransformSpec, node, noise=None):
    """Graft any transform (defense or 2D) onto an image node.

    The caller passes the sampled noise array for gauss-noise so the same
    draw can be applied to several branches of one loss expression.
    """
    kind = spec.kind
    if spec.is_defense:
        return build_differentiable(spec)(node)
    spec.validate(size=node.shape[-1])
    if kind in ("scale", "translate", "rotate"):
        cy, cx = warp_coords(spec, node.shape[1], node.shape[2])
        return g.grid_sample(node, cy, cx)
    if kind == "brighten":
        return g.clamp(g.add(node, g.constant(float(spec.param))), 0.0, 255.0)
    if kind == "darken":
        return g.clamp(g.subtract(node, g.constant(float(spec.param))), 0.0, 255.0)
    if kind == "gauss-noise":
        if noise is None:
            raise ValueError("gauss-noise needs its noise array")
        return g.clamp(g.add(node, g.constant(noise)), 0.0, 255.0)
    if kind == "resize-pad":
        r, oy, ox = (int(v) for v in spec.param)
        h, w = node.shape[1], node.shape[2]
        cy, cx = resize_coords(w, r)
        small = g.grid_sample(node, cy, cx)
        return g.pad2d(small, (oy, h - r - oy, ox, w - r - ox))
    raise ValueError(f"unknown transform kind '{kind}'")
