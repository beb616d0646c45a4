"""Minimal-perturbation attack via iterative linearization.

Each iteration linearizes the classifier around the current iterate,
finds the class whose decision boundary is nearest under that linear
model, and steps just across it. The accumulated perturbation is scaled
by (1 + eta) to make sure the crossing sticks.
"""

import numpy as np

from ..autodiff import graph as g
from ..models.architectures import INPUT_SHAPE
from ..models.network import logits_node, predict
from .config import AdversarialResult


def deepfool_step(logits, grads, source):
    """One linearized step away from `source`.

    `logits` is the (D,) logit vector at the current iterate and `grads`
    the (D, *image) per-class logit gradients. Returns (l, delta): the
    nearest boundary class under the linear model (ties to the lowest
    class index) and the perturbation that reaches it. Classes whose
    boundary normal vanishes are skipped; if every other class vanishes,
    returns (None, zeros).
    """
    logits = np.asarray(logits, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    d = logits.shape[0]
    source = int(source)
    best = None
    for j in range(d):
        if j == source:
            continue
        w = grads[j] - grads[source]
        norm = float(np.sqrt(np.sum(w * w)))
        if norm == 0.0:
            continue
        f = abs(float(logits[j] - logits[source]))
        ratio = f / norm
        if best is None or ratio < best[0]:
            best = (ratio, j, f, w, norm)
    if best is None:
        return None, np.zeros_like(grads[0])
    _, l, f, w, norm = best
    return l, (f / (norm * norm)) * w


def _logit_gradients(model, image):
    leaf = g.leaf("image", INPUT_SHAPE)
    lg = logits_node(model, leaf)
    bindings = {"image": image}
    rows = []
    logits = None
    for j in range(model.arch.classes):
        grads, values = g.gradient(
            g.index(lg, j), bindings, ["image"], extra=[lg]
        )
        rows.append(grads["image"].array)
        logits = values[0].array
    return logits, np.stack(rows)


def run_deepfool(model, image, eta=0.02, source_class=None,
                 max_iterations=50, clamp=True):
    """Find a small perturbation that changes the predicted class.

    The source class defaults to the model's prediction on the input; if
    a `source_class` is given and the model already disagrees with it,
    the image is returned unchanged after zero iterations. The returned
    image is float-valued (rounding would undo a sub-unit perturbation);
    `clamp` keeps it inside [0, 255].
    """
    x0 = np.asarray(image, dtype=np.float64).copy()
    if x0.shape != INPUT_SHAPE:
        raise ValueError(f"image shape {x0.shape} != {INPUT_SHAPE}")
    k0 = int(predict(model, x0).argmax()) if source_class is None else int(source_class)

    r_total = np.zeros_like(x0)
    trace = []
    x = x0
    while len(trace) < max_iterations:
        if int(predict(model, x).argmax()) != k0:
            break
        logits, grads = _logit_gradients(model, x)
        l, delta = deepfool_step(logits, grads, k0)
        if l is None:
            break
        r_total = r_total + delta
        x = x0 + (1.0 + eta) * r_total
        trace.append(l)

    final = x0 + (1.0 + eta) * r_total
    if clamp:
        final = np.clip(final, 0.0, 255.0)
    linf = float(np.abs(final - x0).max())
    return AdversarialResult(
        image=final, target_class=None, trace=tuple(trace), linf=linf
    )
