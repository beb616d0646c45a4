"""Primitive operations: shape inference, forward evaluation, and VJPs.

Each primitive is registered as an ``Op`` with three functions:

* ``infer(attrs, *input_shapes)`` validates input shapes and returns the
  output shape, raising ``OpError`` on inconsistency;
* ``forward(attrs, *arrays)`` computes the output ndarray;
* ``backward(attrs, arrays, out, grad)`` returns one gradient ndarray per
  input (or None for inputs that receive no gradient).

All arithmetic is float64. Conventions that matter for reproducibility:
rounding is floor(x + 0.5) everywhere, sign(0) = 0, and argmax-style ties
resolve to the first occurrence in row-major order.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class OpError(ValueError):
    """Raised when an operation's inputs are inconsistent with the op."""


def round_half_up(x):
    """Round to nearest integer with halves going up: floor(x + 0.5)."""
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


class Op:
    __slots__ = ("name", "infer", "forward", "backward")

    def __init__(self, name, infer, forward, backward):
        self.name = name
        self.infer = infer
        self.forward = forward
        self.backward = backward


REGISTRY = {}


def _register(name, infer, forward, backward):
    REGISTRY[name] = Op(name, infer, forward, backward)


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to the original operand shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------- elementwise


def _infer_broadcast(attrs, sa, sb):
    try:
        return np.broadcast_shapes(sa, sb)
    except ValueError:
        raise OpError(f"shapes {sa} and {sb} do not broadcast") from None


_register(
    "add",
    _infer_broadcast,
    lambda attrs, a, b: a + b,
    lambda attrs, ins, out, g: (
        _unbroadcast(g, ins[0].shape),
        _unbroadcast(g, ins[1].shape),
    ),
)

_register(
    "subtract",
    _infer_broadcast,
    lambda attrs, a, b: a - b,
    lambda attrs, ins, out, g: (
        _unbroadcast(g, ins[0].shape),
        _unbroadcast(-g, ins[1].shape),
    ),
)

_register(
    "multiply",
    _infer_broadcast,
    lambda attrs, a, b: a * b,
    lambda attrs, ins, out, g: (
        _unbroadcast(g * ins[1], ins[0].shape),
        _unbroadcast(g * ins[0], ins[1].shape),
    ),
)


def _infer_relu(attrs, s):
    return s


_register(
    "relu",
    _infer_relu,
    lambda attrs, x: np.maximum(x, 0.0),
    lambda attrs, ins, out, g: (g * (ins[0] > 0.0),),
)


def _power_forward(attrs, x):
    return np.power(x, attrs["exponent"])


def _power_backward(attrs, ins, out, g):
    p = attrs["exponent"]
    x = ins[0]
    if p == 1.0:
        return (g,)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = p * np.power(x, p - 1.0)
    # x == 0 with p < 1 gives an infinite slope; treat it as 0 so that e.g.
    # the L2 norm of a zero vector backpropagates a zero direction.
    d = np.where(np.isfinite(d), d, 0.0)
    return (g * d,)


_register("power", lambda attrs, s: s, _power_forward, _power_backward)


def _clamp_forward(attrs, x):
    return np.clip(x, attrs["lo"], attrs["hi"])


def _clamp_backward(attrs, ins, out, g):
    x = ins[0]
    inside = (x >= attrs["lo"]) & (x <= attrs["hi"])
    return (g * inside,)


_register("clamp", lambda attrs, s: s, _clamp_forward, _clamp_backward)


def _cubic_round_forward(attrs, x):
    r = round_half_up(x)
    f = x - r
    return r + f * f * f


def _cubic_round_backward(attrs, ins, out, g):
    f = ins[0] - round_half_up(ins[0])
    return (g * 3.0 * f * f,)


_register("cubic_round", lambda attrs, s: s, _cubic_round_forward, _cubic_round_backward)


# ------------------------------------------------------------- shape plumbing


def _infer_reshape(attrs, s):
    target = tuple(attrs["shape"])
    if int(np.prod(s, dtype=np.int64)) != int(np.prod(target, dtype=np.int64)):
        raise OpError(f"cannot reshape {s} to {target}")
    return target


_register(
    "reshape",
    _infer_reshape,
    lambda attrs, x: x.reshape(tuple(attrs["shape"])),
    lambda attrs, ins, out, g: (g.reshape(ins[0].shape),),
)


def _infer_transpose(attrs, s):
    axes = tuple(attrs["axes"])
    if sorted(axes) != list(range(len(s))):
        raise OpError(f"axes {axes} invalid for rank {len(s)}")
    return tuple(s[a] for a in axes)


_register(
    "transpose",
    _infer_transpose,
    lambda attrs, x: np.transpose(x, tuple(attrs["axes"])),
    lambda attrs, ins, out, g: (
        np.transpose(g, tuple(np.argsort(attrs["axes"]))),
    ),
)


def _infer_pad2d(attrs, s):
    if len(s) != 3:
        raise OpError(f"pad2d expects (C, H, W), got {s}")
    t, b, l, r = attrs["pads"]
    return (s[0], s[1] + t + b, s[2] + l + r)


def _pad2d_forward(attrs, x):
    t, b, l, r = attrs["pads"]
    return np.pad(x, ((0, 0), (t, b), (l, r)))


def _pad2d_backward(attrs, ins, out, g):
    t, b, l, r = attrs["pads"]
    h, w = ins[0].shape[1], ins[0].shape[2]
    return (g[:, t : t + h, l : l + w],)


_register("pad2d", _infer_pad2d, _pad2d_forward, _pad2d_backward)


# ------------------------------------------------------------------ reductions


def _reduce_sum_backward(attrs, ins, out, g):
    return (np.broadcast_to(g, ins[0].shape).copy(),)


_register(
    "reduce_sum",
    lambda attrs, s: (),
    lambda attrs, x: np.asarray(x.sum(), dtype=np.float64),
    _reduce_sum_backward,
)

_register(
    "reduce_mean",
    lambda attrs, s: (),
    lambda attrs, x: np.asarray(x.mean(), dtype=np.float64),
    lambda attrs, ins, out, g: (
        np.broadcast_to(g / ins[0].size, ins[0].shape).copy(),
    ),
)


def _infer_index(attrs, s):
    if len(s) != 1:
        raise OpError(f"index expects a vector, got {s}")
    i = attrs["index"]
    if not 0 <= i < s[0]:
        raise OpError(f"index {i} out of range for length {s[0]}")
    return ()


def _index_backward(attrs, ins, out, g):
    gx = np.zeros_like(ins[0])
    gx[attrs["index"]] = g
    return (gx,)


_register(
    "index",
    _infer_index,
    lambda attrs, x: np.asarray(x[attrs["index"]], dtype=np.float64),
    _index_backward,
)


# -------------------------------------------------------------------- matmul


def _infer_matmul(attrs, sa, sb):
    if len(sa) not in (1, 2) or len(sb) not in (1, 2):
        raise OpError(f"matmul supports rank 1 or 2 operands, got {sa} @ {sb}")
    ka = sa[-1]
    kb = sb[0] if len(sb) >= 1 else None
    if ka != kb:
        raise OpError(f"inner dimensions disagree: {sa} @ {sb}")
    if len(sa) == 1 and len(sb) == 1:
        return ()
    if len(sa) == 1:
        return (sb[1],)
    if len(sb) == 1:
        return (sa[0],)
    return (sa[0], sb[1])


def _matmul_backward(attrs, ins, out, g):
    a, b = ins
    if a.ndim == 1 and b.ndim == 1:
        return (g * b, g * a)
    if a.ndim == 1:  # (k,) @ (k,n) -> (n,)
        return (b @ g, np.outer(a, g))
    if b.ndim == 1:  # (m,k) @ (k,) -> (m,)
        return (np.outer(g, b), a.T @ g)
    return (g @ b.T, a.T @ g)


_register(
    "matmul",
    _infer_matmul,
    lambda attrs, a, b: a @ b,
    _matmul_backward,
)


# ------------------------------------------------------------------- softmax


def _infer_softmax(attrs, s):
    if len(s) == 0:
        raise OpError("softmax needs at least one axis")
    return s


def _softmax(x):
    m = x.max(axis=-1, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=-1, keepdims=True)


def _softmax_backward(attrs, ins, out, g):
    s = out
    dot = (g * s).sum(axis=-1, keepdims=True)
    return (s * (g - dot),)


_register("softmax", _infer_softmax, lambda attrs, x: _softmax(x), _softmax_backward)


def _infer_softmax_ce(attrs, s):
    targets = attrs["targets"]
    if len(s) == 1:
        if not np.isscalar(targets) and not isinstance(targets, (int, np.integer)):
            raise OpError("vector logits need a scalar target")
        if not 0 <= int(targets) < s[0]:
            raise OpError(f"target {targets} out of range for {s[0]} classes")
    elif len(s) == 2:
        t = np.asarray(targets)
        if t.shape != (s[0],):
            raise OpError(f"need {s[0]} targets, got shape {t.shape}")
        if t.min() < 0 or t.max() >= s[1]:
            raise OpError("target out of range")
    else:
        raise OpError(f"softmax_cross_entropy expects (D,) or (N, D), got {s}")
    return ()


def _softmax_ce_forward(attrs, x):
    if x.ndim == 1:
        t = int(attrs["targets"])
        m = x.max()
        lse = m + np.log(np.exp(x - m).sum())
        return np.asarray(lse - x[t], dtype=np.float64)
    t = np.asarray(attrs["targets"], dtype=np.int64)
    m = x.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(x - m).sum(axis=1))
    picked = x[np.arange(x.shape[0]), t]
    return np.asarray((lse - picked).mean(), dtype=np.float64)


def _softmax_ce_backward(attrs, ins, out, g):
    x = ins[0]
    p = _softmax(x)
    if x.ndim == 1:
        p[int(attrs["targets"])] -= 1.0
        return (p * g,)
    t = np.asarray(attrs["targets"], dtype=np.int64)
    p[np.arange(x.shape[0]), t] -= 1.0
    return (p * (g / x.shape[0]),)


_register(
    "softmax_cross_entropy", _infer_softmax_ce, _softmax_ce_forward, _softmax_ce_backward
)


# ------------------------------------------------------------------ conv/pool


def _infer_conv2d(attrs, sx, sw):
    if len(sw) != 4:
        raise OpError(f"conv2d weight must be (O, C, kh, kw), got {sw}")
    if len(sx) not in (3, 4):
        raise OpError(f"conv2d input must be (C, H, W) or (N, C, H, W), got {sx}")
    c, h, w = sx[-3], sx[-2], sx[-1]
    o, cw, kh, kw = sw
    if c != cw:
        raise OpError(f"channel mismatch: input {c}, weight {cw}")
    p = attrs["pad"]
    ho, wo = h + 2 * p - kh + 1, w + 2 * p - kw + 1
    if ho < 1 or wo < 1:
        raise OpError("kernel larger than padded input")
    if len(sx) == 3:
        return (o, ho, wo)
    return (sx[0], o, ho, wo)


def _conv_cols(x4, kh, kw, pad):
    """im2col: (N, C, H, W) -> (N, Ho, Wo, C*kh*kw) patch matrix."""
    xp = np.pad(x4, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))  # (N, C, Ho, Wo, kh, kw)
    win = win.transpose(0, 2, 3, 1, 4, 5)  # (N, Ho, Wo, C, kh, kw)
    n, ho, wo = win.shape[:3]
    return np.ascontiguousarray(win).reshape(n, ho, wo, -1)


def _conv2d_forward(attrs, x, w):
    single = x.ndim == 3
    x4 = x[None] if single else x
    o, c, kh, kw = w.shape
    cols = _conv_cols(x4, kh, kw, attrs["pad"])
    out = cols @ w.reshape(o, -1).T  # (N, Ho, Wo, O)
    out = out.transpose(0, 3, 1, 2)
    return out[0] if single else out


def _conv2d_backward(attrs, ins, out, g):
    x, w = ins
    single = x.ndim == 3
    x4 = x[None] if single else x
    g4 = g[None] if single else g
    o, c, kh, kw = w.shape
    pad = attrs["pad"]
    n, _, ho, wo = g4.shape

    cols = _conv_cols(x4, kh, kw, pad)  # (N, Ho, Wo, C*kh*kw)
    gmat = g4.transpose(0, 2, 3, 1).reshape(-1, o)  # (N*Ho*Wo, O)
    gw = (gmat.T @ cols.reshape(-1, c * kh * kw)).reshape(o, c, kh, kw)

    gcols = (gmat @ w.reshape(o, -1)).reshape(n, ho, wo, c, kh, kw)
    gcols = gcols.transpose(0, 3, 1, 2, 4, 5)  # (N, C, Ho, Wo, kh, kw)
    gxp = np.zeros((n, c, x4.shape[2] + 2 * pad, x4.shape[3] + 2 * pad))
    for a in range(kh):
        for b in range(kw):
            gxp[:, :, a : a + ho, b : b + wo] += gcols[:, :, :, :, a, b]
    h, wdim = x4.shape[2], x4.shape[3]
    gx = gxp[:, :, pad : pad + h, pad : pad + wdim]
    return (gx[0] if single else gx, gw)


_register("conv2d", _infer_conv2d, _conv2d_forward, _conv2d_backward)


def _infer_maxpool2(attrs, s):
    if len(s) not in (3, 4):
        raise OpError(f"maxpool2 input must be (C, H, W) or (N, C, H, W), got {s}")
    h, w = s[-2], s[-1]
    if h % 2 or w % 2:
        raise OpError(f"maxpool2 needs even spatial dims, got {h}x{w}")
    return s[:-2] + (h // 2, w // 2)


def _pool_windows(x):
    """View (..., H, W) as (..., H/2, W/2, 4) with row-major window order."""
    *lead, h, w = x.shape
    xr = x.reshape(*lead, h // 2, 2, w // 2, 2)
    xr = np.moveaxis(xr, -3, -2)  # (..., H/2, W/2, 2, 2)
    return np.ascontiguousarray(xr).reshape(*lead, h // 2, w // 2, 4)


def _maxpool2_forward(attrs, x):
    win = _pool_windows(x)
    return win.max(axis=-1)


def _maxpool2_backward(attrs, ins, out, g):
    x = ins[0]
    win = _pool_windows(x)
    idx = win.argmax(axis=-1)  # first max in row-major window order
    gwin = np.zeros_like(win)
    np.put_along_axis(gwin, idx[..., None], g[..., None], axis=-1)
    *lead, h2, w2, _ = gwin.shape
    gwin = gwin.reshape(*lead, h2, w2, 2, 2)
    gwin = np.moveaxis(gwin, -2, -3)  # back to (..., H/2, 2, W/2, 2)
    return (gwin.reshape(x.shape),)


_register("maxpool2", _infer_maxpool2, _maxpool2_forward, _maxpool2_backward)


# ------------------------------------------------------------------ 8x8 DCT

# Orthonormal type-II DCT basis: D[k, n] = s_k * cos(pi * (2n+1) * k / 16),
# s_0 = sqrt(1/8), s_k = sqrt(2/8). D is orthogonal, so the inverse is D.T.
_DCT_N = 8
_DCT_BASIS = np.zeros((_DCT_N, _DCT_N))
for _k in range(_DCT_N):
    _s = np.sqrt((1.0 if _k == 0 else 2.0) / _DCT_N)
    for _n in range(_DCT_N):
        _DCT_BASIS[_k, _n] = _s * np.cos(np.pi * (2 * _n + 1) * _k / (2 * _DCT_N))
_DCT_BASIS.flags.writeable = False


def _infer_dct8(attrs, s):
    if len(s) < 2 or s[-1] % 8 or s[-2] % 8:
        raise OpError(f"dct8 needs trailing dims divisible by 8, got {s}")
    return s


def _blockwise_2d(x, m):
    """Apply y_block = m @ x_block @ m.T to each 8x8 tile of the last two axes."""
    *lead, h, w = x.shape
    xb = x.reshape(*lead, h // 8, 8, w // 8, 8)
    yb = np.einsum("ka,lb,...iajb->...ikjl", m, m, xb, optimize=True)
    return yb.reshape(x.shape)


_register(
    "dct8",
    _infer_dct8,
    lambda attrs, x: _blockwise_2d(x, _DCT_BASIS),
    lambda attrs, ins, out, g: (_blockwise_2d(g, _DCT_BASIS.T),),
)

_register(
    "idct8",
    _infer_dct8,
    lambda attrs, x: _blockwise_2d(x, _DCT_BASIS.T),
    lambda attrs, ins, out, g: (_blockwise_2d(g, _DCT_BASIS),),
)


# -------------------------------------------------------------- median filter


def _median_pads(k):
    # k=2 anchors the window on the pixel plus its right/down neighbours;
    # odd kernels centre it.
    return (0, 1) if k == 2 else ((k - 1) // 2, (k - 1) // 2)


def _infer_median(attrs, s):
    k = attrs["k"]
    if k not in (2, 3, 5):
        raise OpError(f"median kernel must be 2, 3 or 5, got {k}")
    if len(s) != 3:
        raise OpError(f"median_filter expects (C, H, W), got {s}")
    pb, pa = _median_pads(k)
    if s[1] <= max(pb, pa) or s[2] <= max(pb, pa):
        raise OpError("image too small for reflect padding")
    return s


def _median_windows(x, k):
    pb, pa = _median_pads(k)
    xp = np.pad(x, ((0, 0), (pb, pa), (pb, pa)), mode="reflect")
    win = sliding_window_view(xp, (k, k), axis=(1, 2))  # (C, H, W, k, k)
    c, h, w = x.shape
    return win.reshape(c, h, w, k * k)


def _median_forward(attrs, x):
    k = attrs["k"]
    flat = _median_windows(x, k)
    mid = (k * k - 1) // 2  # lower middle for even window cardinality
    return np.partition(flat, mid, axis=-1)[..., mid]


def _median_backward(attrs, ins, out, g):
    x = ins[0]
    k = attrs["k"]
    c, h, w = x.shape
    flat = _median_windows(x, k)
    first = np.argmax(flat == out[..., None], axis=-1)  # first row-major match
    di, dj = first // k, first % k

    pb, pa = _median_pads(k)
    src_r = np.pad(np.arange(h), (pb, pa), mode="reflect")
    src_c = np.pad(np.arange(w), (pb, pa), mode="reflect")
    rows = src_r[np.arange(h)[None, :, None] + di]
    cols = src_c[np.arange(w)[None, None, :] + dj]
    chan = np.broadcast_to(np.arange(c)[:, None, None], (c, h, w))

    gx = np.zeros_like(x)
    np.add.at(gx, (chan, rows, cols), g)
    return (gx,)


_register("median_filter", _infer_median, _median_forward, _median_backward)


# ------------------------------------------------------------ bilinear sample


def _infer_grid_sample(attrs, s):
    if len(s) != 3:
        raise OpError(f"grid_sample expects (C, H, W), got {s}")
    iy = attrs["iy"]
    return (s[0],) + iy.shape[1:]


def _grid_sample_forward(attrs, x):
    iy, ix, w = attrs["iy"], attrs["ix"], attrs["w"]
    gathered = x[:, iy, ix]  # (C, 4, Ho, Wo)
    return (gathered * w[None]).sum(axis=1)


def _grid_sample_backward(attrs, ins, out, g):
    iy, ix, w = attrs["iy"], attrs["ix"], attrs["w"]
    x = ins[0]
    c = x.shape[0]
    gx = np.zeros_like(x)
    chan = np.arange(c)[:, None, None, None]
    vals = w[None] * g[:, None, :, :]  # (C, 4, Ho, Wo)
    np.add.at(
        gx,
        (np.broadcast_to(chan, vals.shape), np.broadcast_to(iy[None], vals.shape),
         np.broadcast_to(ix[None], vals.shape)),
        vals,
    )
    return (gx,)


_register("grid_sample", _infer_grid_sample, _grid_sample_forward, _grid_sample_backward)


def bilinear_grid(src_h, src_w, coords_y, coords_x):
    """Build grid_sample attrs for sampling at fractional source coordinates.

    coords_y/coords_x give, for every output pixel, the source-space point to
    sample with bilinear interpolation. Points outside the source rectangle
    contribute zero (their corner weights are zeroed).
    """
    y0 = np.floor(coords_y)
    x0 = np.floor(coords_x)
    fy = coords_y - y0
    fx = coords_x - x0

    corners_y = np.stack([y0, y0, y0 + 1, y0 + 1]).astype(np.int64)
    corners_x = np.stack([x0, x0 + 1, x0, x0 + 1]).astype(np.int64)
    weights = np.stack(
        [(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx]
    )

    valid = (
        (corners_y >= 0)
        & (corners_y < src_h)
        & (corners_x >= 0)
        & (corners_x < src_w)
    )
    weights = np.where(valid, weights, 0.0)
    corners_y = np.clip(corners_y, 0, src_h - 1)
    corners_x = np.clip(corners_x, 0, src_w - 1)
    return {"iy": corners_y, "ix": corners_x, "w": weights}


# ------------------------------------------------------------------ Lab color

# sRGB to XYZ (D65). Row sums reproduce the white point exactly, so pure
# white maps to L=100, a=b=0.
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE = _SRGB_TO_XYZ.sum(axis=1)  # (0.95047, 1.00000, 1.08883)
_LAB_DELTA = 6.0 / 29.0


def _infer_rgb_to_lab(attrs, s):
    if len(s) != 3 or s[0] != 3:
        raise OpError(f"rgb_to_lab expects (3, H, W), got {s}")
    return s


def _srgb_linearize(c):
    # The power branch is only selected for c > 0.04045; clamp its base so the
    # unselected branch stays finite when c dips below -0.055.
    base = (np.maximum(c, 0.0) + 0.055) / 1.055
    return np.where(c <= 0.04045, c / 12.92, base**2.4)


def _lab_f(t):
    return np.where(t > _LAB_DELTA**3, np.cbrt(t), t / (3 * _LAB_DELTA**2) + 4.0 / 29.0)


def _rgb_to_lab_forward(attrs, x):
    c = x / 255.0
    lin = _srgb_linearize(c)
    xyz = np.einsum("rc,chw->rhw", _SRGB_TO_XYZ, lin)
    t = xyz / _WHITE[:, None, None]
    f = _lab_f(t)
    lum = 116.0 * f[1] - 16.0
    a = 500.0 * (f[0] - f[1])
    b = 200.0 * (f[1] - f[2])
    return np.stack([lum, a, b])


def _rgb_to_lab_backward(attrs, ins, out, g):
    x = ins[0]
    c = x / 255.0
    lin = _srgb_linearize(c)
    xyz = np.einsum("rc,chw->rhw", _SRGB_TO_XYZ, lin)
    t = xyz / _WHITE[:, None, None]

    g_l, g_a, g_b = g[0], g[1], g[2]
    gf = np.stack(
        [
            500.0 * g_a,
            116.0 * g_l - 500.0 * g_a + 200.0 * g_b,
            -200.0 * g_b,
        ]
    )
    with np.errstate(divide="ignore"):
        df = np.where(
            t > _LAB_DELTA**3,
            np.cbrt(t) ** -2 / 3.0,
            1.0 / (3 * _LAB_DELTA**2),
        )
    gt = gf * df
    gxyz = gt / _WHITE[:, None, None]
    glin = np.einsum("rc,rhw->chw", _SRGB_TO_XYZ, gxyz)
    base = (np.maximum(c, 0.0) + 0.055) / 1.055
    dlin = np.where(c <= 0.04045, 1.0 / 12.92, 2.4 / 1.055 * base**1.4)
    return (glin * dlin / 255.0,)


_register("rgb_to_lab", _infer_rgb_to_lab, _rgb_to_lab_forward, _rgb_to_lab_backward)
