"""Expression DAG with reverse-mode differentiation.

Expressions are built once from immutable ``Node`` objects and then evaluated
or differentiated any number of times against different leaf bindings. Shape
checking happens at construction time, so a malformed graph fails where it is
built, naming the offending operation.

``evaluate`` and ``gradient`` are pure functions of (expression, bindings):
no node stores activation state, which makes shared sub-expressions and
concurrent evaluation safe.
"""

import numpy as np

from .ops import REGISTRY, OpError, bilinear_grid
from .tensor import Tensor, as_array


class GraphError(ValueError):
    """Construction- or evaluation-time failure, tagged with the node."""


class Node:
    """One operation in the DAG. Immutable; identity-hashed."""

    __slots__ = ("op", "inputs", "attrs", "shape", "_topo")

    def __init__(self, op, inputs, attrs, shape):
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "inputs", tuple(inputs))
        object.__setattr__(self, "attrs", attrs)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "_topo", None)

    def __setattr__(self, name, value):
        if name == "_topo" and getattr(self, "_topo") is None:
            object.__setattr__(self, name, value)
            return
        raise AttributeError("Node is immutable")

    def __repr__(self):
        return f"Node({self.op}, shape={self.shape})"

    def topo_order(self):
        """Inputs-before-outputs ordering of this node's subgraph (cached)."""
        if self._topo is not None:
            return self._topo
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for inp in node.inputs:
                stack.append((inp, False))
        self._topo = tuple(order)
        return self._topo


def _make(op_name, inputs, attrs):
    op = REGISTRY[op_name]
    try:
        shape = op.infer(attrs, *[n.shape for n in inputs])
    except OpError as exc:
        raise GraphError(f"{op_name}: {exc}") from None
    return Node(op_name, inputs, attrs, shape)


# ------------------------------------------------------------------- builders


def leaf(name, shape):
    """A named input bound at evaluation time."""
    return Node("leaf", (), {"name": name}, tuple(int(d) for d in shape))


def constant(values):
    # copy (C-contiguous, rank-preserving) so later caller mutations can't
    # leak into the graph
    arr = as_array(values).copy()
    arr.flags.writeable = False
    return Node("const", (), {"value": arr}, arr.shape)


def add(a, b):
    return _make("add", (a, b), {})


def subtract(a, b):
    return _make("subtract", (a, b), {})


def multiply(a, b):
    return _make("multiply", (a, b), {})


def matmul(a, b):
    return _make("matmul", (a, b), {})


def conv2d(x, w, pad=0):
    return _make("conv2d", (x, w), {"pad": int(pad)})


def relu(x):
    return _make("relu", (x,), {})


def maxpool2(x):
    return _make("maxpool2", (x,), {})


def softmax(x):
    return _make("softmax", (x,), {})


def softmax_cross_entropy(logits, targets):
    if isinstance(targets, (int, np.integer)):
        attrs = {"targets": int(targets)}
    else:
        t = np.asarray(targets, dtype=np.int64)
        t.flags.writeable = False
        attrs = {"targets": t}
    return _make("softmax_cross_entropy", (logits,), attrs)


def reshape(x, shape):
    return _make("reshape", (x,), {"shape": tuple(int(d) for d in shape)})


def transpose(x, axes):
    return _make("transpose", (x,), {"axes": tuple(int(a) for a in axes)})


def power(x, exponent):
    return _make("power", (x,), {"exponent": float(exponent)})


def reduce_sum(x):
    return _make("reduce_sum", (x,), {})


def reduce_mean(x):
    return _make("reduce_mean", (x,), {})


def index(x, i):
    """Pick one element of a vector as a scalar node."""
    return _make("index", (x,), {"index": int(i)})


def clamp(x, lo, hi):
    return _make("clamp", (x,), {"lo": float(lo), "hi": float(hi)})


def cubic_round(x):
    """round(x) + (x - round(x))**3: rounding with a nonvanishing derivative."""
    return _make("cubic_round", (x,), {})


def dct8(x):
    return _make("dct8", (x,), {})


def idct8(x):
    return _make("idct8", (x,), {})


def median_filter(x, k):
    return _make("median_filter", (x,), {"k": int(k)})


def pad2d(x, pads):
    t, b, l, r = (int(p) for p in pads)
    if min(t, b, l, r) < 0:
        raise GraphError("pad2d: negative padding")
    return _make("pad2d", (x,), {"pads": (t, b, l, r)})


def grid_sample(x, coords_y, coords_x):
    """Bilinear sampling of a (C, H, W) node at fractional source coordinates."""
    if len(x.shape) != 3:
        raise GraphError(f"grid_sample: expects (C, H, W), got {x.shape}")
    attrs = bilinear_grid(x.shape[1], x.shape[2], coords_y, coords_x)
    for v in attrs.values():
        v.flags.writeable = False
    return _make("grid_sample", (x,), attrs)


def rgb_to_lab(x):
    return _make("rgb_to_lab", (x,), {})


# ----------------------------------------------------------------- execution


def _forward_node(node, bindings, values):
    if node.op == "leaf":
        name = node.attrs["name"]
        if name not in bindings:
            raise GraphError(f"leaf '{name}' is unbound")
        arr = as_array(bindings[name])
        if arr.shape != node.shape:
            raise GraphError(
                f"leaf '{name}': bound shape {arr.shape} != declared {node.shape}"
            )
        values[node] = arr
    elif node.op == "const":
        values[node] = node.attrs["value"]
    else:
        op = REGISTRY[node.op]
        args = [values[inp] for inp in node.inputs]
        values[node] = op.forward(node.attrs, *args)


def _run_forward(root, bindings):
    values = {}
    for node in root.topo_order():
        _forward_node(node, bindings, values)
    return values


def evaluate(expr, bindings):
    """Forward value of the expression under the given leaf bindings."""
    values = _run_forward(expr, bindings)
    return Tensor(values[expr])


def gradient(expr, bindings, wrt, extra=()):
    """Reverse-mode derivatives of a scalar expression.

    Returns a dict mapping each leaf name in ``wrt`` to a Tensor of that
    leaf's shape. When ``extra`` nodes are given, returns
    (gradients, [their forward Tensors]) so callers can reuse the forward
    pass instead of evaluating twice; extra nodes may extend beyond the
    expression as long as their leaves are bound, and shared subgraphs
    are computed once.
    """
    order = expr.topo_order()
    values = _run_forward(expr, bindings)
    if expr.shape != ():
        raise GraphError(f"gradient needs a scalar output, got shape {expr.shape}")

    wrt = set(wrt)
    leaf_shapes = {}
    for node in order:
        if node.op == "leaf":
            leaf_shapes[node.attrs["name"]] = node.shape
    missing = wrt - set(leaf_shapes)
    if missing:
        raise GraphError(f"leaves not in expression: {sorted(missing)}")

    grads = {expr: np.asarray(1.0)}
    leaf_grads = {}
    for node in reversed(order):
        g = grads.pop(node, None)
        if g is None:
            continue
        if node.op == "leaf":
            name = node.attrs["name"]
            if name in wrt:
                if name in leaf_grads:
                    leaf_grads[name] = leaf_grads[name] + g
                else:
                    leaf_grads[name] = g
            continue
        if node.op == "const":
            continue
        op = REGISTRY[node.op]
        args = [values[inp] for inp in node.inputs]
        input_grads = op.backward(node.attrs, args, values[node], g)
        for inp, gi in zip(node.inputs, input_grads):
            if gi is None:
                continue
            if inp in grads:
                grads[inp] = grads[inp] + gi
            else:
                grads[inp] = gi

    result = {}
    for name in wrt:
        if name in leaf_grads:
            result[name] = Tensor(leaf_grads[name])
        else:
            result[name] = Tensor(np.zeros(leaf_shapes[name]))
    if extra:
        for node in extra:
            if node in values:
                continue
            for sub in node.topo_order():
                if sub not in values:
                    _forward_node(sub, bindings, values)
        return result, [Tensor(values[node]) for node in extra]
    return result


def dct8_roundtrip(block):
    """idct8(dct8(block)); orthonormality makes this the identity."""
    arr = as_array(block)
    if arr.shape != (8, 8):
        raise GraphError(f"dct8_roundtrip expects an 8x8 block, got {arr.shape}")
    x = leaf("block", (8, 8))
    return evaluate(idct8(dct8(x)), {"block": arr})
