"""Defense transforms, their differentiable surrogates, and 2D transforms."""

from .color import rgb_to_lab
from .differentiable import build_differentiable, transform_node
from .exact import apply_2d, apply_exact
from .specs import (
    IDENTITY,
    JPEG_QUALITIES,
    MEDIAN_KERNELS,
    NOISE_VARIANCE,
    REQUANTIZE_BITS,
    TransformSet,
    TransformSpec,
    defense_set,
    eot_set,
    identity_set,
    mid_strength_specs,
    resize_range,
    sample_transform,
    spec_from_label,
)

__all__ = [
    "IDENTITY",
    "JPEG_QUALITIES",
    "MEDIAN_KERNELS",
    "NOISE_VARIANCE",
    "REQUANTIZE_BITS",
    "TransformSet",
    "TransformSpec",
    "apply_2d",
    "apply_exact",
    "build_differentiable",
    "defense_set",
    "eot_set",
    "identity_set",
    "mid_strength_specs",
    "resize_range",
    "rgb_to_lab",
    "sample_transform",
    "spec_from_label",
    "transform_node",
]
