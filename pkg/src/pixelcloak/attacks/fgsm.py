"""The gradient-sign attack family.

All eight variants share one loop: compute the gradient of a cross-entropy
loss at the current iterate, move every pixel by delta against (targeted)
or along (untargeted) the gradient sign, and clip back into the epsilon
neighborhood of the original image intersected with [0, 255]. They differ
in which classifiers contribute gradients and what sits between the image
and the classifier:

* u-/r-/l-/p-fgsm: one classifier, no transform; they differ only in how
  the loss class is picked (source class, random target, least-likely
  target, cumulative-probability target).
* e-fgsm: sums the losses of all K classifiers every iteration.
* di-fgsm: applies resize-pad with a coin flip per iteration (ensemble
  capable).
* eot: samples one 2D transform per iteration and adds a Lab-space
  distance term that keeps the adversarial image perceptually close.
* rp-fgsm: draws one classifier and one defense transform per iteration
  and differentiates through the transform's surrogate; with
  classifier_mode="ensemble" it consults all classifiers each iteration
  instead (the random/ensemble comparison is the selection ablation).

Per-image draw order (one stream from image_rng, documented so traces are
auditable): first the target draw if the variant needs one; then per
iteration, rp-fgsm draws classifier index, then transform kind, then the
kind's parameter(s), then any noise array; di-fgsm draws the coin, then
resize target r, then row offset, then column offset; eot draws transform
kind, parameter(s), then any noise array.
"""

import numpy as np

from ..autodiff import graph as g
from ..autodiff.ops import round_half_up
from ..models.architectures import INPUT_SHAPE
from ..models.network import logits_node, predict
from ..transforms.color import rgb_to_lab
from ..transforms.differentiable import transform_node
from ..transforms.exact import apply_2d
from ..transforms.specs import (
    IDENTITY,
    NOISE_VARIANCE,
    TransformSpec,
    defense_set,
    eot_set,
    resize_range,
    sample_transform,
)
from .config import AdversarialResult, AttackConfig, image_rng
from .target import select_target_class


def clip_to_neighborhood(original, candidate, epsilon):
    """min{255, x + eps, max{0, x - eps, candidate}} elementwise."""
    original = np.asarray(original, dtype=np.float64)
    candidate = np.asarray(candidate, dtype=np.float64)
    if original.shape != candidate.shape:
        raise ValueError(f"shape mismatch: {original.shape} vs {candidate.shape}")
    lower = np.maximum(0.0, np.maximum(original - epsilon, candidate))
    return np.minimum(255.0, np.minimum(original + epsilon, lower))


def perturbation_step(grad, delta, mode):
    """delta * sign(grad), negated for targeted mode; sign(0) = 0."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    step = delta * np.sign(grad)
    return -step if mode == "targeted" else step


def _pick_target(config, probs0, preds0, rng):
    if config.target_override is not None:
        return int(config.target_override)
    d = probs0[0].shape[0]
    if config.variant == "l-fgsm":
        # least likely class of the attacked classifier; ties to lowest index
        return int(np.lexsort((np.arange(d), probs0[0]))[0])
    if config.variant == "r-fgsm":
        others = [c for c in range(d) if c != preds0[0]]
        return others[int(rng.integers(len(others)))]
    return select_target_class(probs0, config.gamma, rng)


def _build_loss(models, classes, spec, noise, lab_ref, lam):
    image = g.leaf("image", INPUT_SHAPE)
    x = transform_node(spec, image, noise=noise)
    loss = None
    probs = []
    for model, cls in zip(models, classes):
        lg = logits_node(model, x)
        term = g.softmax_cross_entropy(lg, int(cls))
        probs.append(g.softmax(lg))
        loss = term if loss is None else g.add(loss, term)
    if lab_ref is not None:
        diff = g.subtract(g.rgb_to_lab(x), g.constant(lab_ref))
        dist = g.power(g.reduce_sum(g.power(diff, 2.0)), 0.5)
        loss = g.add(loss, g.multiply(g.constant(lam), dist))
    return loss, probs


def _draw_iteration(config, transforms, size, rng):
    """Pick (model indices, transform spec, noise array) for one iteration."""
    variant = config.variant
    if variant == "rp-fgsm":
        if config.classifier_mode == "random":
            indices = (int(rng.integers(config.k)),)
        else:
            indices = tuple(range(config.k))
        spec = sample_transform(transforms, rng)
    elif variant == "di-fgsm":
        indices = tuple(range(config.k))
        if rng.random() < config.di_probability:
            lo, hi = resize_range(size)
            r = int(rng.integers(lo, hi))
            oy = int(rng.integers(0, size - r + 1))
            ox = int(rng.integers(0, size - r + 1))
            spec = TransformSpec("resize-pad", (r, oy, ox))
        else:
            spec = IDENTITY
    elif variant == "eot":
        indices = (0,)
        spec = sample_transform(transforms, rng)
    elif variant == "e-fgsm":
        indices = tuple(range(config.k))
        spec = IDENTITY
    else:
        indices = (0,)
        spec = IDENTITY
    noise = None
    if spec.kind == "gauss-noise":
        noise = rng.normal(0.0, np.sqrt(float(spec.param)), INPUT_SHAPE)
    return indices, spec, noise


def run_fgsm_attack(config: AttackConfig, image, image_index=0):
    """Run one attack on one image; deterministic in (config, seed, index)."""
    x0 = np.asarray(image, dtype=np.float64).copy()
    if x0.shape != INPUT_SHAPE:
        raise ValueError(f"image shape {x0.shape} != {INPUT_SHAPE}")
    rng = image_rng(config.master_seed, image_index)
    size = x0.shape[-1]

    transforms = config.transforms
    if transforms is None and config.variant == "rp-fgsm":
        transforms = defense_set()
    if transforms is None and config.variant == "eot":
        transforms = eot_set(size)

    probs0 = [predict(m, x0) for m in config.models]
    preds0 = [int(p.argmax()) for p in probs0]

    target = None
    if config.mode == "targeted":
        target = _pick_target(config, probs0, preds0, rng)

    lam = config.eot_lambda if config.mode == "targeted" else -config.eot_lambda
    n_iter = config.iteration_count()
    x = x0.copy()
    trace = []
    cache = {}
    for _ in range(n_iter):
        indices, spec, noise = _draw_iteration(config, transforms, size, rng)
        models = [config.models[i] for i in indices]
        if config.mode == "targeted":
            classes = [target] * len(indices)
        else:
            classes = [preds0[i] for i in indices]

        lab_ref = None
        if config.variant == "eot":
            lab_ref = rgb_to_lab(apply_2d(spec, x0, noise=noise))

        cacheable = spec.is_defense and lab_ref is None
        key = (indices, spec.kind, spec.param, tuple(classes))
        if cacheable and key in cache:
            loss, probs = cache[key]
        else:
            loss, probs = _build_loss(models, classes, spec, noise, lab_ref, lam)
            if cacheable:
                cache[key] = (loss, probs)

        grads, prob_vals = g.gradient(loss, {"image": x}, ["image"], extra=probs)
        if len(prob_vals) == 1:
            predicted = int(prob_vals[0].array.argmax())
        else:
            predicted = int(np.mean([p.array for p in prob_vals], axis=0).argmax())

        step = perturbation_step(grads["image"].array, config.delta, config.mode)
        x = clip_to_neighborhood(x0, x + step, config.epsilon)

        classifier = indices[0] if len(indices) == 1 else -1
        trace.append((classifier, spec.label(), predicted))

    final = clip_to_neighborhood(x0, round_half_up(x), config.epsilon)
    linf = float(np.abs(final - x0).max())
    return AdversarialResult(
        image=final, target_class=target, trace=tuple(trace), linf=linf
    )
