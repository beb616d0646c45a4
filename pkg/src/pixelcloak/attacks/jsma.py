"""Saliency-map attack: push single pixels toward a target class.

Each iteration scores every pixel by how much raising it helps the target
class while hurting the others, then increases the two best-scoring
pixels by one intensity level. The pixel budget counts modifications, so
each iteration spends two of it.
"""

import numpy as np

from ..autodiff import graph as g
from ..models.architectures import INPUT_SHAPE
from ..models.network import logits_node, predict
from .config import AdversarialResult


def jsma_saliency(target_grad, others_grad_sum):
    """Score each pixel for a positive (increase) perturbation.

    A pixel scores zero unless raising it increases the target probability
    and decreases the combined probability of every other class; otherwise
    the score is the product of the target gradient and the magnitude of
    the others' gradient sum.
    """
    tg = np.asarray(target_grad, dtype=np.float64)
    og = np.asarray(others_grad_sum, dtype=np.float64)
    if tg.shape != og.shape:
        raise ValueError(f"shape mismatch: {tg.shape} vs {og.shape}")
    return np.where((tg < 0) | (og > 0), 0.0, tg * np.abs(og))


def _gradient_pair(model, image, target):
    """Gradients of p_target and of sum(p) - p_target wrt the image."""
    leaf = g.leaf("image", INPUT_SHAPE)
    probs = g.softmax(logits_node(model, leaf))
    target_node = g.index(probs, target)
    others_node = g.subtract(g.reduce_sum(probs), target_node)
    bindings = {"image": image}
    tg = g.gradient(target_node, bindings, ["image"])["image"].array
    og = g.gradient(others_node, bindings, ["image"])["image"].array
    return tg, og


def run_jsma(model, image, target, pixel_budget=400):
    """Drive `model` toward `target` by unit increments on salient pixels.

    Stops when the prediction reaches the target, when fewer than two
    modifications remain in the budget, or when no pixel has a positive
    saliency score. Returns an integer-valued image.
    """
    x = np.asarray(image, dtype=np.float64).copy()
    if x.shape != INPUT_SHAPE:
        raise ValueError(f"image shape {x.shape} != {INPUT_SHAPE}")
    target = int(target)
    if target == int(predict(model, x).argmax()):
        raise ValueError("target class equals the predicted class")
    if pixel_budget < 0:
        raise ValueError("pixel_budget must be nonnegative")

    x = np.floor(x + 0.5)
    spent = 0
    trace = []
    while spent + 2 <= pixel_budget:
        probs = predict(model, x)
        predicted = int(probs.argmax())
        if predicted == target:
            break
        tg, og = _gradient_pair(model, x, target)
        scores = jsma_saliency(tg, og)
        scores[x >= 255.0] = 0.0
        if not np.any(scores > 0.0):
            break
        flat = scores.reshape(-1)
        order = np.lexsort((np.arange(flat.size), -flat))
        for pos in order[:2]:
            c, rem = divmod(int(pos), x.shape[1] * x.shape[2])
            h, w = divmod(rem, x.shape[2])
            x[c, h, w] = min(255.0, x[c, h, w] + 1.0)
            trace.append((c, h, w))
        spent += 2

    linf = float(np.abs(x - np.floor(np.asarray(image, dtype=np.float64) + 0.5)).max())
    return AdversarialResult(image=x, target_class=target, trace=tuple(trace), linf=linf)
