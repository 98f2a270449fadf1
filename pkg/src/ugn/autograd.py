"""Dense tensors with tape-based reverse-mode differentiation.

Every differentiable operation computes its forward result with numpy and,
when a :class:`Tape` is active on the current thread, records a closure that
maps the output gradient to input gradients. Outside a tape the operations
are plain forward computations, which is what inference uses.

Example
-------
>>> x = Tensor([1.0, -1.0], requires_grad=True)
>>> with Tape() as tape:
...     y = relu(x).sum()
>>> tape.backward(y)
>>> x.grad
array([1., 0.])
"""

from __future__ import annotations

import threading
from typing import Callable, Optional, Sequence

import numpy as np

DEFAULT_DTYPE = np.float64

_state = threading.local()


class ShapeError(ValueError):
    """Raised when operand extents are incompatible."""


class TapeError(RuntimeError):
    """Raised on misuse of a tape (non-scalar output, double backward)."""


def _active_tape() -> Optional["Tape"]:
    stack = getattr(_state, "stack", None)
    return stack[-1] if stack else None


class Tensor:
    """Dense real array that can take part in gradient recording.

    Parameters
    ----------
    data : array_like
        Values; copied into a contiguous array of ``dtype``.
    requires_grad : bool
        Whether gradients should be accumulated into :attr:`grad`.
    dtype : numpy dtype, optional
        Defaults to float64. float32 is accepted for faster training.
    """

    __slots__ = ("data", "requires_grad", "_grad", "_produced")
    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if dtype is None:
            dtype = arr.dtype if arr.dtype in (np.float32, np.float64) else DEFAULT_DTYPE
        self.data = np.ascontiguousarray(arr, dtype=dtype)
        self.requires_grad = bool(requires_grad)
        self._grad = None
        self._produced = False

    # -- gradient buffer -------------------------------------------------
    @property
    def grad(self) -> Optional[np.ndarray]:
        if not self.requires_grad:
            return None
        if self._grad is None:
            self._grad = np.zeros_like(self.data)
        return self._grad

    @grad.setter
    def grad(self, value) -> None:
        if value is None:
            self._grad = None
            return
        value = np.asarray(value, dtype=self.data.dtype)
        if value.shape != self.data.shape:
            raise ShapeError(f"grad shape {value.shape} != data shape {self.data.shape}")
        self._grad = value

    def zero_grad(self) -> None:
        if self.requires_grad:
            self._grad = np.zeros_like(self.data)

    # -- conveniences ----------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return not self._produced

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), dtype=self.data.dtype)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({np.array2string(self.data, precision=4)}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return index(self, idx)

    def sum(self, axis=None):
        return tensor_sum(self, axis=axis)

    def mean(self, axis=None):
        return tensor_mean(self, axis=axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


class _Node:
    __slots__ = ("name", "inputs", "output", "backward_fn", "visits")

    def __init__(self, name, inputs, output, backward_fn):
        self.name = name
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn
        self.visits = 0


class Tape:
    """Ordered record of the differentiable operations of one forward pass.

    Use as a context manager; operations executed inside the ``with`` block
    are recorded. A tape supports exactly one :meth:`backward` call.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self.used = False

    def __enter__(self) -> "Tape":
        stack = getattr(_state, "stack", None)
        if stack is None:
            stack = _state.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _state.stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, name, inputs, output, backward_fn) -> None:
        self.nodes.append(_Node(name, inputs, output, backward_fn))

    def backward(self, output: Tensor) -> None:
        backward(output, self)


def _record(name: str, inputs: Sequence[Tensor], out: Tensor, backward_fn: Callable) -> Tensor:
    tape = _active_tape()
    out._produced = True
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(name, tuple(inputs), out, backward_fn)
    return out


def backward(output: Tensor, tape: Tape) -> None:
    """Populate ``grad`` of every ``requires_grad`` leaf reachable on ``tape``.

    Leaf gradients accumulate (call :meth:`Tensor.zero_grad` between steps).
    The tape is spent afterwards; a second call raises :class:`TapeError`.
    """
    if output.data.size != 1:
        raise TapeError(f"backward needs a scalar output, got shape {output.shape}")
    if tape.used:
        raise TapeError("backward already called on this tape")
    tape.used = True

    grads: dict[int, np.ndarray] = {id(output): np.ones_like(output.data)}
    for node in reversed(tape.nodes):
        g_out = grads.pop(id(node.output), None)
        if g_out is None:
            continue
        node.visits += 1
        in_grads = node.backward_fn(g_out)
        for inp, g in zip(node.inputs, in_grads):
            if g is None or not inp.requires_grad:
                continue
            if inp.is_leaf:
                inp.grad = inp.grad + g
            else:
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g
    if output.is_leaf and output.requires_grad:
        output.grad = output.grad + 1.0


# ---------------------------------------------------------------------------
# elementwise and structural ops


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _pair(a, b):
    if isinstance(a, Tensor):
        b = as_tensor(b, dtype=a.dtype)
    elif isinstance(b, Tensor):
        a = as_tensor(a, dtype=b.dtype)
    else:
        a, b = as_tensor(a), as_tensor(b)
    return a, b


def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = Tensor(a.data + b.data)
    sa, sb = a.shape, b.shape
    return _record("add", (a, b), out, lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = Tensor(a.data - b.data)
    sa, sb = a.shape, b.shape
    return _record("sub", (a, b), out, lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = Tensor(a.data * b.data)

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _record("mul", (a, b), out, bw)


def square(x: Tensor) -> Tensor:
    out = Tensor(x.data * x.data)
    return _record("square", (x,), out, lambda g: (2.0 * g * x.data,))


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return _record("tanh", (x,), Tensor(y), lambda g: (g * (1.0 - y * y),))


def relu(x: Tensor) -> Tensor:
    """Elementwise ``max(0, x)``; the subgradient at 0 is 0."""
    x = as_tensor(x)
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0.0).astype(x.dtype, copy=False))
    return _record("relu", (x,), out, lambda g: (g * mask,))


def tensor_sum(x: Tensor, axis=None) -> Tensor:
    out = Tensor(np.asarray(x.data.sum(axis=axis)))
    shape = x.shape

    def bw(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _record("sum", (x,), out, bw)


def tensor_mean(x: Tensor, axis=None) -> Tensor:
    count = x.size if axis is None else x.shape[axis]
    return mul(tensor_sum(x, axis=axis), 1.0 / count)


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    out = Tensor(x.data.reshape(shape))
    return _record("reshape", (x,), out, lambda g: (g.reshape(old),))


def transpose(x: Tensor, axes=None) -> Tensor:
    out = Tensor(np.transpose(x.data, axes))
    inv = None if axes is None else np.argsort(axes)
    return _record("transpose", (x,), out, lambda g: (np.transpose(g, inv),))


def index(x: Tensor, idx) -> Tensor:
    """Basic or integer-array indexing; repeated indices accumulate gradient."""
    out = Tensor(np.array(x.data[idx]))

    def bw(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        return (full,)

    return _record("index", (x,), out, bw)


def take_rows(x: Tensor, rows) -> Tensor:
    rows = np.asarray(rows, dtype=np.intp)
    return index(x, rows)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    splits = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return _record("concat", tuple(tensors), out, bw)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product. ``a`` may carry a leading batch axis; ``b`` is 2-D."""
    a, b = _pair(a, b)
    if b.ndim != 2 or a.ndim not in (1, 2, 3) or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")
    out = Tensor(a.data @ b.data)

    def bw(g):
        ga = g @ b.data.T
        if a.ndim == 1:
            gb = np.outer(a.data, g)
        else:
            a2 = a.data.reshape(-1, a.shape[-1])
            gb = a2.T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return _record("matmul", (a, b), out, bw)


def outer(a: Tensor, b: Tensor) -> Tensor:
    """Batched outer product: ``out[..., i, j] = a[..., i] * b[..., j]``."""
    a, b = _pair(a, b)
    if a.shape[:-1] != b.shape[:-1]:
        raise ShapeError(f"outer: batch shapes differ, {a.shape} vs {b.shape}")
    out = Tensor(a.data[..., :, None] * b.data[..., None, :])

    def bw(g):
        return (g * b.data[..., None, :]).sum(-1), (g * a.data[..., :, None]).sum(-2)

    return _record("outer", (a, b), out, bw)


# ---------------------------------------------------------------------------
# convolution and pooling


def _windows(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    # (..., h', w', kh, kw) strided view
    v = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(-2, -1))
    return v[..., ::stride, ::stride, :, :]


def conv2d(x: Tensor, kernels: Tensor, bias: Optional[Tensor] = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation (no kernel flip).

    ``x`` is ``(c_in, h, w)`` or batched ``(b, c_in, h, w)``; ``kernels`` is
    ``(c_out, c_in, kh, kw)``; ``bias`` is ``(c_out,)``.
    """
    x = as_tensor(x)
    kernels = as_tensor(kernels, dtype=x.dtype)
    if stride < 1 or padding < 0:
        raise ValueError(f"conv2d: need stride >= 1 and padding >= 0, got {stride}, {padding}")
    unbatched = x.ndim == 3
    xd = x.data[None] if unbatched else x.data
    if xd.ndim != 4 or kernels.ndim != 4:
        raise ShapeError(f"conv2d: bad ranks, input {x.shape}, kernels {kernels.shape}")
    n, c_in, h, w = xd.shape
    c_out, kc, kh, kw = kernels.shape
    if kc != c_in:
        raise ShapeError(f"conv2d: input channels {c_in} != kernel channels {kc}")
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ShapeError(
            f"conv2d: kernel {kh}x{kw} larger than padded input {h + 2 * padding}x{w + 2 * padding}")
    xp = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else xd
    win = _windows(xp, kh, kw, stride)  # n, c_in, ho, wo, kh, kw
    ho, wo = win.shape[2], win.shape[3]
    k2 = kernels.data.reshape(c_out, -1)
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c_in * kh * kw)
    y = (cols @ k2.T).reshape(n, ho, wo, c_out).transpose(0, 3, 1, 2)
    if bias is not None:
        bias = as_tensor(bias, dtype=x.dtype)
        y = y + bias.data[None, :, None, None]
    out = Tensor(y[0] if unbatched else y)

    def bw(g):
        g4 = g[None] if unbatched else g
        gcols = g4.transpose(0, 2, 3, 1).reshape(n * ho * wo, c_out)
        gk = (gcols.T @ cols).reshape(kernels.shape)
        gx_cols = (gcols @ k2).reshape(n, ho, wo, c_in, kh, kw)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += \
                    gx_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        gx = gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp
        if unbatched:
            gx = gx[0]
        grads = [gx, gk]
        if bias is not None:
            grads.append(g4.sum(axis=(0, 2, 3)))
        return tuple(grads)

    inputs = (x, kernels) if bias is None else (x, kernels, bias)
    return _record("conv2d", inputs, out, bw)


def maxpool2d(x: Tensor, window: int, stride: Optional[int] = None) -> Tensor:
    """Per-window maximum over the last two axes.

    Gradient goes to the first maximal cell of each window in row-major order.
    """
    x = as_tensor(x)
    stride = window if stride is None else stride
    if window < 1 or stride < 1:
        raise ValueError("maxpool2d: window and stride must be positive")
    h, w = x.shape[-2:]
    if h < window or w < window:
        raise ShapeError(f"maxpool2d: window {window} exceeds input extent {h}x{w}")
    win = _windows(x.data, window, window, stride)
    lead = win.shape[:-2]
    flat = win.reshape(*lead, window * window)
    arg = flat.argmax(axis=-1)
    out = Tensor(np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0])

    def bw(g):
        ho, wo = lead[-2], lead[-1]
        rows = (np.arange(ho) * stride)[:, None] + arg // window
        cols = (np.arange(wo) * stride)[None, :] + arg % window
        flat_idx = rows * w + cols
        gx = np.zeros(x.shape[:-2] + (h * w,), dtype=x.dtype)
        batch = int(np.prod(x.shape[:-2], dtype=np.int64))
        gx2 = gx.reshape(batch, h * w)
        np.add.at(gx2, (np.arange(batch)[:, None], flat_idx.reshape(batch, -1)), g.reshape(batch, -1))
        return (gx.reshape(x.shape),)

    return _record("maxpool2d", (x,), out, bw)


# ---------------------------------------------------------------------------
# normalisation and losses


def _softmax_np(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax(x: Tensor) -> Tensor:
    """Row-wise softmax over the last axis."""
    s = _softmax_np(x.data)

    def bw(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return _record("softmax", (x,), Tensor(s), bw)


def softmax_cross_entropy(logits: Tensor, targets, mask=None) -> Tensor:
    """Summed categorical cross-entropy over the masked rows.

    ``targets`` is one-hot ``(n, c)``; ``mask`` selects supervised rows and
    defaults to all rows.
    """
    logits = as_tensor(logits)
    t = np.asarray(targets.data if isinstance(targets, Tensor) else targets, dtype=logits.dtype)
    if t.shape != logits.shape:
        raise ShapeError(f"targets shape {t.shape} != logits shape {logits.shape}")
    m = np.ones(logits.shape[0], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not m.any():
        raise ValueError("no supervised rows")
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    log_s = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    loss = -(t[m] * log_s[m]).sum()
    out = Tensor(np.asarray(loss, dtype=logits.dtype))

    def bw(g):
        grad = np.exp(log_s) - t
        grad[~m] = 0.0
        return (g * grad,)

    return _record("softmax_cross_entropy", (logits,), out, bw)


# ---------------------------------------------------------------------------
# gradient oracle


def finite_diff_grad(f: Callable[[Tensor], Tensor], x, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``."""
    if h <= 0:
        raise ValueError("step h must be positive")
    base = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = _scalar(f(Tensor(base.copy())))
        flat[i] = orig - h
        f_minus = _scalar(f(Tensor(base.copy())))
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def _scalar(v) -> float:
    if isinstance(v, Tensor):
        return float(v.data.reshape(-1)[0])
    return float(v)


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> float:
    """``max |a - n| / max(|a|, |n|, floor)`` over all entries."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float((np.abs(a - n) / denom).max()) if a.size else 0.0
