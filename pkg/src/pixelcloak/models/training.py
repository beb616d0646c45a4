"""Classifier training: plain minibatch SGD with momentum.

Deterministic given the seed: initialization, shuffling and the 90/10
internal held-out split all come from one seeded generator, and every
numeric step is float64 numpy.
"""

import numpy as np

from ..autodiff import graph as g
from .architectures import INPUT_SHAPE, Architecture
from .network import ModelParams, build_logits, predict_batch

DEFAULT_HYPER = {
    "epochs": 8,
    "learning_rate": 0.02,
    "momentum": 0.9,
    "batch_size": 64,
    "seed": 0,
}


def _unpack(record):
    if hasattr(record, "image") and hasattr(record, "label"):
        return record.image, record.label
    image, label = record
    return image, label


def _init_params(arch: Architecture, rng):
    """He-style scaled Gaussian weights, zero biases."""
    params = {}
    for name, shape in arch.param_shapes():
        if name.endswith("_b"):
            params[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:])) if len(shape) == 4 else shape[0]
            params[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)
    return params


def train_classifier(arch: Architecture, train_set, hyper=None):
    """Train from scratch; returns ModelParams with held-out accuracy metadata."""
    h = dict(DEFAULT_HYPER)
    if hyper:
        h.update(hyper)
    records = [_unpack(r) for r in train_set]
    if not records:
        raise ValueError("training set is empty")

    images = np.stack([np.asarray(img, dtype=np.float64) for img, _ in records])
    labels = np.asarray([int(lab) for _, lab in records], dtype=np.int64)
    if images.shape[1:] != INPUT_SHAPE:
        raise ValueError(f"images must be {INPUT_SHAPE}, got {images.shape[1:]}")
    if labels.min() < 0 or labels.max() >= arch.classes:
        bad = labels[(labels < 0) | (labels >= arch.classes)][0]
        raise ValueError(f"label {bad} outside [0, {arch.classes})")

    rng = np.random.default_rng(h["seed"])
    params = _init_params(arch, rng)
    velocity = {name: np.zeros_like(p) for name, p in params.items()}
    names = list(params)

    n = len(records)
    n_heldout = max(1, n // 10) if n >= 10 else 0
    perm = rng.permutation(n)
    held_idx, train_idx = perm[:n_heldout], perm[n_heldout:]
    if len(train_idx) == 0:
        train_idx, held_idx = perm, perm[:0]

    bs = int(h["batch_size"])
    lr, mu = float(h["learning_rate"]), float(h["momentum"])
    for _ in range(int(h["epochs"])):
        order = rng.permutation(len(train_idx))
        for start in range(0, len(order), bs):
            idx = train_idx[order[start : start + bs]]
            xb, yb = images[idx], labels[idx]
            batch = g.leaf("batch", xb.shape)
            leaves = {name: g.leaf(name, params[name].shape) for name in names}
            loss = g.softmax_cross_entropy(
                build_logits(arch, batch, leaves.__getitem__), yb
            )
            bindings = {"batch": xb, **params}
            grads = g.gradient(loss, bindings, names)
            for name in names:
                velocity[name] = mu * velocity[name] - lr * grads[name].array
                params[name] = params[name] + velocity[name]

    model = ModelParams(arch=arch, params=params)
    accuracy = None
    if len(held_idx):
        correct = 0
        for start in range(0, len(held_idx), 256):
            idx = held_idx[start : start + 256]
            probs = predict_batch(model, images[idx])
            correct += int((probs.argmax(axis=1) == labels[idx]).sum())
        accuracy = correct / len(held_idx)
    model.metadata.update(
        {"seed": int(h["seed"]), "epochs": int(h["epochs"]), "accuracy": accuracy}
    )
    return model
