"""Model forward graphs, prediction, and input gradients.

Models consume raw [0, 255] intensities; the division by 255 happens inside
the first layer so that attack budgets stay in 8-bit units. Parameter
constants are built once per model and shared across every graph that uses
the model, so prediction, attack and detector paths all read the same
arrays.
"""

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import graph as g
from ..transforms.differentiable import transform_node
from .architectures import INPUT_SHAPE, Architecture


@dataclass
class ModelParams:
    """Trained weights plus training metadata."""

    arch: Architecture
    params: dict
    metadata: dict = field(default_factory=dict)
    _consts: dict = field(default_factory=dict, repr=False)
    _graphs: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        expected = dict(self.arch.param_shapes())
        if set(expected) != set(self.params):
            raise ValueError(
                f"parameter names {sorted(self.params)} != expected {sorted(expected)}"
            )
        for name, arr in self.params.items():
            arr = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
            if arr.shape != expected[name]:
                raise ValueError(
                    f"parameter '{name}': shape {arr.shape} != {expected[name]}"
                )
            arr.flags.writeable = False
            self.params[name] = arr

    def const_node(self, name):
        if name not in self._consts:
            self._consts[name] = g.constant(self.params[name])
        return self._consts[name]


def build_logits(arch: Architecture, input_node, param_node):
    """Compose the forward graph from input node to logits node.

    ``param_node`` maps a parameter name to its graph node, letting callers
    choose constants (inference, attacks) or leaves (training).
    """
    x = g.multiply(input_node, g.constant(1.0 / 255.0))
    batched = len(input_node.shape) == 4
    for i, layer in enumerate(arch.layers):
        kind = layer[0]
        if kind == "conv":
            _, k, out = layer
            w = param_node(f"conv{i}_w")
            b = param_node(f"conv{i}_b")
            x = g.conv2d(x, w, pad=(k - 1) // 2)
            x = g.add(x, g.reshape(b, (out, 1, 1)))
        elif kind == "relu":
            x = g.relu(x)
        elif kind == "maxpool2":
            x = g.maxpool2(x)
        elif kind == "flatten":
            if batched:
                n = x.shape[0]
                x = g.reshape(x, (n, int(np.prod(x.shape[1:]))))
            else:
                x = g.reshape(x, (int(np.prod(x.shape)),))
        elif kind == "dense":
            x = g.matmul(x, param_node(f"dense{i}_w"))
            x = g.add(x, param_node(f"dense{i}_b"))
    return x


def logits_node(model: ModelParams, input_node):
    """Logits graph with the model's parameters baked in as constants."""
    return build_logits(model.arch, input_node, model.const_node)


def _predict_graph(model: ModelParams):
    if "predict" not in model._graphs:
        image = g.leaf("image", INPUT_SHAPE)
        model._graphs["predict"] = g.softmax(logits_node(model, image))
    return model._graphs["predict"]


def predict(model: ModelParams, image):
    """Class probabilities for one raw [0, 255] image."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.shape != INPUT_SHAPE:
        raise ValueError(f"image shape {arr.shape} != {INPUT_SHAPE}")
    return g.evaluate(_predict_graph(model), {"image": arr}).array


def predict_batch(model: ModelParams, images):
    """Probabilities for a (N, 3, 32, 32) stack of images."""
    arr = np.asarray(images, dtype=np.float64)
    key = ("predict_batch", arr.shape[0])
    if key not in model._graphs:
        image = g.leaf("batch", arr.shape)
        model._graphs[key] = g.softmax(logits_node(model, image))
    return g.evaluate(model._graphs[key], {"batch": arr}).array


def input_gradient(model: ModelParams, image, class_index, transform=None, noise=None):
    """Gradient of the cross-entropy loss at ``class_index`` w.r.t. the image.

    With ``transform`` set, the loss is taken after routing the image
    through the transform's differentiable surrogate.
    """
    arr = np.asarray(image, dtype=np.float64)
    image_node = g.leaf("image", INPUT_SHAPE)
    x = image_node
    if transform is not None:
        x = transform_node(transform, x, noise=noise)
    loss = g.softmax_cross_entropy(logits_node(model, x), int(class_index))
    return g.gradient(loss, {"image": arr}, ["image"])["image"].array
