"""Prediction-shift detector over squeezing defenses.

An image is scored by how much a classifier's probability vector moves
when a defense transform is applied first: score = ||M(x) - M(phi(x))||_1,
which lives in [0, 2]. Clean images barely move; adversarial perturbations
crafted without the defense in the loop tend to be erased by it, so their
predictions shift a lot. The threshold is calibrated to a target false
positive rate on clean images. One detector is calibrated per defense
kind at its mid-strength parameter, and an attack's detectability is the
fraction of its images flagged by at least one of them.
"""

from dataclasses import dataclass

import numpy as np

from .models.network import predict
from .transforms.exact import apply_exact
from .transforms.specs import TransformSpec, mid_strength_specs


def defended_predict(model, spec, image):
    """Class probabilities after applying the defense transform."""
    return predict(model, apply_exact(spec, image))


def detection_score(model, spec, image):
    """L1 distance between plain and defended probability vectors, in [0, 2]."""
    return float(np.abs(predict(model, image) - defended_predict(model, spec, image)).sum())


def calibrate_threshold(scores, fpr_target=0.05):
    """Threshold flagging ~fpr_target of the given clean-image scores.

    Uses the (1 - fpr_target) linear-interpolation quantile, so on the
    calibration set itself the fraction of scores strictly above the
    threshold is at most fpr_target (plus one order statistic).
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("need at least one calibration score")
    if not 0.0 < fpr_target < 1.0:
        raise ValueError(f"fpr_target must be in (0, 1), got {fpr_target}")
    return float(np.quantile(scores, 1.0 - fpr_target, method="linear"))


@dataclass(frozen=True)
class Detector:
    """A defense transform with its calibrated decision threshold."""

    model: object
    spec: TransformSpec
    threshold: float
    fpr_target: float = 0.05

    def __post_init__(self):
        if self.threshold < 0.0:
            raise ValueError(f"threshold must be >= 0, got {self.threshold}")
        if not 0.0 < self.fpr_target < 1.0:
            raise ValueError(f"fpr_target must be in (0, 1), got {self.fpr_target}")

    def score(self, image):
        return detection_score(self.model, self.spec, image)

    def flags(self, image):
        return self.score(image) > self.threshold


def calibrate_detectors(model, records, fpr_target=0.05, specs=None):
    """Calibrate one detector per defense spec on clean records.

    `records` may be DatasetRecord objects or plain image arrays. Returns
    a list of Detector objects, one per spec (default: the mid-strength
    parameter of each defense kind).
    """
    if specs is None:
        specs = mid_strength_specs()
    images = [getattr(r, "image", r) for r in records]
    if not images:
        raise ValueError("need at least one calibration record")
    detectors = []
    for spec in specs:
        scores = [detection_score(model, spec, img) for img in images]
        detectors.append(Detector(model, spec, calibrate_threshold(scores, fpr_target), fpr_target))
    return detectors


def is_detected(detectors, image):
    """True when at least one detector flags the image."""
    return any(d.flags(image) for d in detectors)


def detectability(detectors, images):
    """Percentage of images flagged by at least one detector."""
    images = list(images)
    if not images:
        raise ValueError("need at least one image")
    hits = sum(is_detected(detectors, img) for img in images)
    return 100.0 * hits / len(images)
