"""Fixed zoo of small convolutional classifiers.

Four architectures with deliberately different shapes: cnn-a, cnn-b and
cnn-c are the attacker-facing ("seen") models, cnn-d plays the held-back
("unseen") model whose gradients are never consulted. Diversity across the
zoo is what makes transferability measurable.
"""

from dataclasses import dataclass

INPUT_SHAPE = (3, 32, 32)


@dataclass(frozen=True)
class Architecture:
    """Layer list over {conv, relu, maxpool2, flatten, dense} plus class count."""

    name: str
    layers: tuple
    classes: int

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError("need at least 2 classes")
        last_dense = None
        for layer in self.layers:
            if layer[0] == "dense":
                last_dense = layer
        if last_dense is None or last_dense[1] != self.classes:
            raise ValueError("final dense layer must have one unit per class")

    def param_shapes(self):
        """Canonical (name, shape) list: layer order, weight before bias."""
        shapes = []
        c, h, w = INPUT_SHAPE
        features = None
        for i, layer in enumerate(self.layers):
            kind = layer[0]
            if kind == "conv":
                _, k, out = layer
                shapes.append((f"conv{i}_w", (out, c, k, k)))
                shapes.append((f"conv{i}_b", (out,)))
                c = out  # same padding keeps h, w
            elif kind == "maxpool2":
                h, w = h // 2, w // 2
            elif kind == "flatten":
                features = c * h * w
            elif kind == "dense":
                _, units = layer
                if features is None:
                    raise ValueError("dense before flatten")
                shapes.append((f"dense{i}_w", (features, units)))
                shapes.append((f"dense{i}_b", (units,)))
                features = units
            elif kind != "relu":
                raise ValueError(f"unknown layer kind '{kind}'")
        return shapes


def zoo(classes=10):
    """All four architectures, keyed by name."""
    archs = [
        Architecture(
            "cnn-a",
            (
                ("conv", 3, 16),
                ("relu",),
                ("maxpool2",),
                ("conv", 3, 32),
                ("relu",),
                ("maxpool2",),
                ("flatten",),
                ("dense", classes),
            ),
            classes,
        ),
        Architecture(
            "cnn-b",
            (
                ("conv", 3, 32),
                ("relu",),
                ("maxpool2",),
                ("conv", 3, 64),
                ("relu",),
                ("maxpool2",),
                ("flatten",),
                ("dense", classes),
            ),
            classes,
        ),
        Architecture(
            "cnn-c",
            (
                ("conv", 5, 24),
                ("relu",),
                ("maxpool2",),
                ("flatten",),
                ("dense", 96),
                ("relu",),
                ("dense", classes),
            ),
            classes,
        ),
        Architecture(
            "cnn-d",
            (
                ("conv", 3, 16),
                ("relu",),
                ("maxpool2",),
                ("conv", 3, 24),
                ("relu",),
                ("maxpool2",),
                ("conv", 3, 32),
                ("relu",),
                ("flatten",),
                ("dense", classes),
            ),
            classes,
        ),
    ]
    return {a.name: a for a in archs}


def get_architecture(name, classes=10):
    z = zoo(classes)
    if name not in z:
        raise ValueError(f"unknown architecture '{name}' (have {sorted(z)})")
    return z[name]
