"""Transform descriptions and random sampling over transform sets.

A TransformSpec fully determines one application of a transform (kind plus
its parameter), so applying a spec is deterministic; all randomness lives in
``sample_transform``, which draws from an explicit numpy Generator.
"""

from dataclasses import dataclass

import numpy as np

DEFENSE_KINDS = ("identity", "requantize", "median", "jpeg")
GEOMETRIC_KINDS = (
    "scale",
    "translate",
    "rotate",
    "brighten",
    "darken",
    "gauss-noise",
    "resize-pad",
)

REQUANTIZE_BITS = (1, 2, 3, 4, 5, 6, 7)
MEDIAN_KERNELS = (2, 3, 5)
JPEG_QUALITIES = (25, 50, 75, 100)

SCALE_RANGE = (0.8, 1.2)
TRANSLATE_FRACTION = 0.2  # of image width, each axis
ROTATE_RANGE = (-60.0, 60.0)  # degrees
BRIGHTNESS_RANGE = (0.0, 13.0)
NOISE_VARIANCE = 25.0
RESIZE_FRACTION = 0.875  # lower bound of the resize target, as a fraction


@dataclass(frozen=True)
class TransformSpec:
    """One concrete transform: a kind and its parameter.

    Parameters by kind: identity -> None; requantize -> bits; median ->
    kernel; jpeg -> quality; scale -> factor; translate -> (dx, dy) pixels;
    rotate -> degrees; brighten/darken -> amount; gauss-noise -> variance;
    resize-pad -> (r, row_offset, col_offset).
    """

    kind: str
    param: object = None

    def validate(self, size=32):
        k, p = self.kind, self.param
        if k == "identity":
            if p is not None:
                raise ValueError("identity takes no parameter")
        elif k == "requantize":
            if p not in REQUANTIZE_BITS:
                raise ValueError(f"requantize bits must be in {REQUANTIZE_BITS}, got {p}")
        elif k == "median":
            if p not in MEDIAN_KERNELS:
                raise ValueError(f"median kernel must be in {MEDIAN_KERNELS}, got {p}")
        elif k == "jpeg":
            if p not in JPEG_QUALITIES:
                raise ValueError(f"jpeg quality must be in {JPEG_QUALITIES}, got {p}")
        elif k == "scale":
            if not SCALE_RANGE[0] <= float(p) <= SCALE_RANGE[1]:
                raise ValueError(f"scale factor {p} outside {SCALE_RANGE}")
        elif k == "translate":
            dx, dy = p
            lim = TRANSLATE_FRACTION * size
            if abs(float(dx)) > lim or abs(float(dy)) > lim:
                raise ValueError(f"translation {p} outside +-{lim} pixels")
        elif k == "rotate":
            if not ROTATE_RANGE[0] <= float(p) <= ROTATE_RANGE[1]:
                raise ValueError(f"rotation {p} outside {ROTATE_RANGE} degrees")
        elif k in ("brighten", "darken"):
            if not BRIGHTNESS_RANGE[0] <= float(p) <= BRIGHTNESS_RANGE[1]:
                raise ValueError(f"{k} amount {p} outside {BRIGHTNESS_RANGE}")
        elif k == "gauss-noise":
            if float(p) <= 0:
                raise ValueError("noise variance must be positive")
        elif k == "resize-pad":
            r, oy, ox = (int(v) for v in p)
            lo = resize_range(size)[0]
            if not lo <= r < size:
                raise ValueError(f"resize target {r} outside [{lo}, {size})")
            if not (0 <= oy <= size - r and 0 <= ox <= size - r):
                raise ValueError(f"pad offsets {p[1:]} do not fit a {r}x{r} image")
        else:
            raise ValueError(f"unknown transform kind '{k}'")
        return self

    @property
    def is_defense(self):
        return self.kind in DEFENSE_KINDS

    def label(self):
        if self.kind == "identity":
            return "identity"
        if self.kind in ("translate", "resize-pad"):
            return f"{self.kind}:{','.join(str(v) for v in self.param)}"
        return f"{self.kind}:{self.param}"


IDENTITY = TransformSpec("identity")


def spec_from_label(label, size=32):
    """Inverse of TransformSpec.label(): parse "kind" or "kind:param"."""
    kind, _, raw = str(label).partition(":")
    if raw == "":
        spec = TransformSpec(kind)
    else:
        def as_number(text):
            text = text.strip()
            try:
                return int(text)
            except ValueError:
                return float(text)

        values = tuple(as_number(part) for part in raw.split(","))
        spec = TransformSpec(kind, values[0] if len(values) == 1 else values)
    spec.validate(size=size)
    return spec


def resize_range(size):
    """Resize-pad target range [lo, size): about 87.5% of the side upward."""
    lo = int(np.ceil(RESIZE_FRACTION * size))
    return lo, size


@dataclass(frozen=True)
class TransformSet:
    """Ordered collection of (kind, parameter domain) entries.

    A domain is a tuple of discrete parameters, or a (lo, hi) continuous
    range for the geometric kinds. Sampling is uniform over kinds first,
    then uniform within the chosen kind's domain.
    """

    entries: tuple

    def __post_init__(self):
        if not self.entries:
            raise ValueError("transform set must be nonempty")

    @property
    def kinds(self):
        return tuple(kind for kind, _ in self.entries)

    @property
    def includes_identity(self):
        return "identity" in self.kinds


def defense_set(include_identity=True):
    """The defense pool: identity plus requantize/median/jpeg families."""
    entries = []
    if include_identity:
        entries.append(("identity", (None,)))
    entries.append(("requantize", REQUANTIZE_BITS))
    entries.append(("median", MEDIAN_KERNELS))
    entries.append(("jpeg", JPEG_QUALITIES))
    return TransformSet(tuple(entries))


def identity_set():
    return TransformSet((("identity", (None,)),))


def eot_set(size=32):
    """2D transform pool: scale, translate, rotate, lighting, noise."""
    lim = TRANSLATE_FRACTION * size
    return TransformSet(
        (
            ("scale", SCALE_RANGE),
            ("translate", (-lim, lim)),
            ("rotate", ROTATE_RANGE),
            ("brighten", BRIGHTNESS_RANGE),
            ("darken", BRIGHTNESS_RANGE),
            ("gauss-noise", (NOISE_VARIANCE,)),
        )
    )


def mid_strength_specs():
    """Representative parameter per defense kind, used by the detector."""
    return (
        TransformSpec("requantize", 4),
        TransformSpec("median", 3),
        TransformSpec("jpeg", 50),
    )


def sample_transform(tset, rng):
    """Draw one TransformSpec: uniform kind, then uniform parameter.

    Draw order (fixed for reproducibility): one integer for the kind, then
    for discrete domains one integer over the parameters, for continuous
    ranges one uniform (two for translate: dx then dy).
    """
    kind, domain = tset.entries[int(rng.integers(len(tset.entries)))]
    if kind == "identity":
        return IDENTITY
    if kind in ("requantize", "median", "jpeg", "gauss-noise"):
        param = domain[int(rng.integers(len(domain)))]
        return TransformSpec(kind, param)
    if kind == "translate":
        lo, hi = domain
        dx = float(rng.uniform(lo, hi))
        dy = float(rng.uniform(lo, hi))
        return TransformSpec(kind, (dx, dy))
    lo, hi = domain
    return TransformSpec(kind, float(rng.uniform(lo, hi)))
