"""pixelcloak: adversarial privacy-protection toolkit.

Gradient-sign attack family with randomized classifier/defense selection,
defense transforms with differentiable surrogates, a feature-squeezing
detector, and a deterministic evaluation harness.
"""

__version__ = "0.1.0"
