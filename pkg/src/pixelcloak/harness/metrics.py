"""Evaluation metrics: misleading rates and distortion."""

import numpy as np

PSNR_CAP = 99.0


def top_k_classes(probabilities, k):
    """Indices of the k largest probabilities, ties to the lowest index."""
    p = np.asarray(probabilities, dtype=np.float64)
    if not 1 <= k <= p.shape[-1]:
        raise ValueError(f"k must be in [1, {p.shape[-1]}], got {k}")
    order = np.lexsort((np.arange(p.shape[-1]), -p))
    return order[:k]


def misleading_rate(predictions, labels, k=1):
    """Percentage of images whose true class is absent from the top k.

    `predictions` holds one probability vector per image. Clean accurate
    predictions give a rate near zero; a successful attack pushes the true
    class out of the top k, driving the rate toward 100.
    """
    predictions = list(predictions)
    labels = list(labels)
    if len(predictions) != len(labels):
        raise ValueError(f"{len(predictions)} predictions vs {len(labels)} labels")
    if not predictions:
        raise ValueError("need at least one prediction")
    misses = sum(
        int(label) not in top_k_classes(p, k) for p, label in zip(predictions, labels)
    )
    return 100.0 * misses / len(labels)


def psnr(original, modified):
    """Peak signal-to-noise ratio in dB over the 255 dynamic range.

    Identical images report the cap (99 dB) rather than infinity.
    """
    a = np.asarray(original, dtype=np.float64)
    b = np.asarray(modified, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(255.0**2 / mse))
