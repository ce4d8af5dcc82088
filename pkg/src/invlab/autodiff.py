"""Small reverse-mode autodiff engine over dense float64 numpy arrays.

Only the operations needed to differentiate a policy rollout through the
inventory simulators are provided. Operations accept plain numpy arrays,
Python scalars or :class:`Array` instances; a node is recorded on the active
:class:`Tape` only when at least one operand requires a gradient, otherwise
the plain numpy result is returned. This lets the simulators and the policy
run unchanged for fast evaluation and for training.

Kink conventions: ``maximum``/``minimum`` route the gradient to the selected
operand and to the first operand on ties; ``relu`` has derivative 0 at 0;
``elu`` has derivative 1 at 0.
"""
from __future__ import annotations

import threading
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Array",
    "Tape",
    "ShapeError",
    "value",
    "is_traced",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "maximum",
    "minimum",
    "elementwise",
    "matmul",
    "dense",
    "causal_dilated_conv1d",
    "causal_conv_channels_last",
    "activation",
    "elu",
    "elu_grad",
    "relu",
    "softplus",
    "reduce",
    "sum",
    "mean",
    "getitem",
    "concat",
    "transpose",
    "reshape",
    "custom",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class Array:
    """A float64 array that can take part in a recorded computation."""

    __slots__ = ("value", "requires_grad", "grad", "name", "__weakref__")
    __array_priority__ = 100.0

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def dims(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Array(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    def __len__(self) -> int:
        return len(self.value)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    @property
    def T(self):
        return transpose(self)


class _Sparse:
    """Gradient contribution confined to ``parent[index]``."""

    __slots__ = ("index", "grad")

    def __init__(self, index, grad):
        self.index = index
        self.grad = grad


class _Node:
    __slots__ = ("out", "parents", "backward")

    def __init__(self, out: Array, parents: tuple, backward: Callable):
        self.out = out
        self.parents = parents
        self.backward = backward


_local = threading.local()


def _tape_stack() -> list:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


class Tape:
    """Append-only record of traced operations.

    Use as a context manager; every traced op executed inside the block is
    appended in execution order, so parents always precede children.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if not stack or stack[-1] is not self:
            raise RuntimeError("tape stack corrupted")
        stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self, loss: Array, wrt: Sequence[Array] | None = None) -> list[np.ndarray]:
        """Propagate adjoints from scalar ``loss`` back to the leaves.

        Returns the gradient for each array in ``wrt`` (zeros for leaves the
        loss does not depend on) and stores it on ``leaf.grad``.
        """
        if not isinstance(loss, Array):
            raise TypeError("loss must be an Array produced on this tape")
        if loss.value.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        adj: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
        owned: set[int] = {id(loss)}
        leaves: dict[int, Array] = {}

        def accumulate(parent: Array, g) -> None:
            pid = id(parent)
            if isinstance(g, _Sparse):
                buf = adj.get(pid)
                if buf is None:
                    buf = np.zeros_like(parent.value)
                    adj[pid] = buf
                    owned.add(pid)
                elif pid not in owned:
                    buf = buf.copy()
                    adj[pid] = buf
                    owned.add(pid)
                if _needs_add_at(g.index):
                    np.add.at(buf, g.index, g.grad)
                else:
                    buf[g.index] += g.grad
                return
            if g.shape != parent.value.shape:
                g = _unbroadcast(g, parent.value.shape)
            buf = adj.get(pid)
            if buf is None:
                adj[pid] = g
                owned.discard(pid)
            elif pid in owned:
                buf += g
            else:
                adj[pid] = buf + g
                owned.add(pid)

        produced = {id(node.out) for node in self.nodes}
        for node in reversed(self.nodes):
            oid = id(node.out)
            g = adj.pop(oid, None)
            if g is None:
                continue
            owned.discard(oid)
            grads = node.backward(g)
            for parent, pg in zip(node.parents, grads):
                if pg is None or not isinstance(parent, Array) or not parent.requires_grad:
                    continue
                accumulate(parent, pg)
                if id(parent) not in produced:
                    leaves[id(parent)] = parent

        if wrt is None:
            wrt = list(leaves.values())
        result = []
        for leaf in wrt:
            g = adj.get(id(leaf))
            g = np.zeros_like(leaf.value) if g is None else np.array(g, dtype=np.float64, copy=True)
            leaf.grad = g
            result.append(g)
        return result


def _needs_add_at(index) -> bool:
    # fancy integer indices may repeat; basic slices/ints never do
    if isinstance(index, tuple):
        return any(isinstance(i, (list, np.ndarray)) for i in index)
    return isinstance(index, (list, np.ndarray))


def _active_tape() -> Tape | None:
    stack = _tape_stack()
    return stack[-1] if stack else None


def value(x):
    """Plain numpy value of ``x``."""
    return x.value if isinstance(x, Array) else x


def is_traced(x) -> bool:
    return isinstance(x, Array) and x.requires_grad


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _record(out_value: np.ndarray, parents: tuple, backward: Callable):
    """Wrap ``out_value`` and record it if any parent is traced on an active tape."""
    tape = _active_tape()
    if tape is None or not any(is_traced(p) for p in parents):
        return out_value
    out = Array(out_value, requires_grad=True)
    tape.nodes.append(_Node(out, parents, backward))
    return out


def custom(out_value: np.ndarray, parents: tuple, backward: Callable):
    """Record a fused operation with a hand-written vector-Jacobian product.

    ``backward(g)`` must return one gradient (or ``None``) per parent.
    """
    return _record(np.asarray(out_value, dtype=np.float64), parents, backward)


def _broadcast_check(a: np.ndarray, b: np.ndarray) -> None:
    try:
        np.broadcast_shapes(np.shape(a), np.shape(b))
    except ValueError as exc:
        raise ShapeError(f"cannot combine shapes {np.shape(a)} and {np.shape(b)}") from exc


# ---------------------------------------------------------------- elementwise


def add(a, b):
    av, bv = value(a), value(b)
    _broadcast_check(av, bv)
    return _record(np.add(av, bv), (a, b), lambda g: (g, g))


def sub(a, b):
    av, bv = value(a), value(b)
    _broadcast_check(av, bv)
    return _record(np.subtract(av, bv), (a, b), lambda g: (g, -g))


def mul(a, b):
    av, bv = value(a), value(b)
    _broadcast_check(av, bv)
    return _record(np.multiply(av, bv), (a, b), lambda g: (g * bv, g * av))


def div(a, b):
    av, bv = value(a), value(b)
    _broadcast_check(av, bv)
    out = np.divide(av, bv)
    return _record(out, (a, b), lambda g: (g / bv, -g * out / bv))


def neg(a):
    return _record(np.negative(value(a)), (a,), lambda g: (-g,))


def maximum(a, b):
    av, bv = value(a), value(b)
    _broadcast_check(av, bv)
    first = np.greater_equal(av, bv)
    return _record(
        np.where(first, av, bv), (a, b), lambda g: (g * first, g * ~first)
    )


def minimum(a, b):
    av, bv = value(a), value(b)
    _broadcast_check(av, bv)
    first = np.less_equal(av, bv)
    return _record(
        np.where(first, av, bv), (a, b), lambda g: (g * first, g * ~first)
    )


_ELEMENTWISE = {"add": add, "sub": sub, "mul": mul, "max": maximum, "min": minimum}


def elementwise(op: str, a, b):
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    return fn(a, b)


# ---------------------------------------------------------------- activations


def _elu_parts(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """ELU value and derivative; the derivative is ``exp(min(x, 0))`` everywhere."""
    x = np.asarray(x, dtype=np.float64)
    slope = np.minimum(x, 0.0, out=np.empty_like(x))
    np.exp(slope, out=slope)
    out = slope - 1.0
    out += np.maximum(x, 0.0)
    return out, slope


def _elu_np(x: np.ndarray) -> np.ndarray:
    return _elu_parts(x)[0]


def elu(x):
    out, slope = _elu_parts(value(x))
    return _record(out, (x,), lambda g: (g * slope,))


def elu_grad(x):
    """Derivative of ELU evaluated at ``x``, itself differentiable."""
    xv = value(x)
    ex = np.exp(np.minimum(xv, 0.0))
    out = np.where(xv >= 0, 1.0, ex)
    return _record(out, (x,), lambda g: (np.where(xv >= 0, 0.0, g * ex),))


def relu(x):
    xv = value(x)
    mask = xv > 0
    return _record(np.where(mask, xv, 0.0), (x,), lambda g: (g * mask,))


def softplus(x):
    xv = value(x)
    out = np.logaddexp(0.0, xv)
    return _record(out, (x,), lambda g: (g / (1.0 + np.exp(-xv)),))


_ACTIVATIONS = {"elu": elu, "relu": relu, "softplus": softplus}


def activation(op: str, x):
    try:
        fn = _ACTIVATIONS[op]
    except KeyError:
        raise ValueError(f"unknown activation {op!r}") from None
    return fn(x)


# ---------------------------------------------------------------- reductions


def _norm_axes(axes, ndim):
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, int):
        axes = (axes,)
    out = []
    for ax in axes:
        if not -ndim <= ax < ndim:
            raise ShapeError(f"axis {ax} out of range for {ndim}-d array")
        out.append(ax % ndim)
    return tuple(sorted(set(out)))


def sum(x, axes=None, keepdims: bool = False):  # noqa: A001 - mirrors numpy
    xv = value(x)
    ax = _norm_axes(axes, xv.ndim)
    out = np.sum(xv, axis=ax, keepdims=keepdims)
    shape = xv.shape

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, ax)
        return (np.broadcast_to(g, shape),)

    return _record(np.asarray(out, dtype=np.float64), (x,), backward)


def mean(x, axes=None, keepdims: bool = False):
    xv = value(x)
    ax = _norm_axes(axes, xv.ndim)
    count = int(np.prod([xv.shape[i] for i in ax])) if ax else 1
    out = np.sum(xv, axis=ax, keepdims=keepdims) / max(count, 1)
    shape = xv.shape

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, ax)
        return (np.broadcast_to(g / max(count, 1), shape),)

    return _record(np.asarray(out, dtype=np.float64), (x,), backward)


def reduce(op: str, x, axes=None):
    if op == "sum":
        return sum(x, axes)
    if op == "mean":
        return mean(x, axes)
    raise ValueError(f"unknown reduction {op!r}")


# ---------------------------------------------------------------- linear algebra


def matmul(a, b):
    """``a[..., m, k] @ b[k, n]``."""
    av, bv = value(a), value(b)
    if av.ndim < 2 or bv.ndim != 2:
        raise ShapeError(f"matmul expects a[..., m, k] and b[k, n], got {av.shape}, {bv.shape}")
    if av.shape[-1] != bv.shape[0]:
        raise ShapeError(f"inner dimensions differ: {av.shape} @ {bv.shape}")
    out = av @ bv

    def backward(g):
        ga = g @ bv.T if is_traced(a) else None
        gb = None
        if is_traced(b):
            k, n = bv.shape
            gb = av.reshape(-1, k).T @ g.reshape(-1, n)
        return (ga, gb)

    return _record(out, (a, b), backward)


def dense(x, w, b, act: str | None = None):
    """Fused ``act(x @ w + b)`` for 2-d ``x``."""
    xv, wv, bv = value(x), value(w), value(b)
    if xv.ndim != 2 or wv.ndim != 2 or xv.shape[1] != wv.shape[0]:
        raise ShapeError(f"dense expects x[B, k] @ w[k, n], got {xv.shape}, {wv.shape}")
    z = xv @ wv
    z += bv
    if act is None:
        out = z
    elif act == "elu":
        out, slope = _elu_parts(z)
    elif act == "relu":
        out = np.maximum(z, 0.0)
    else:
        raise ValueError(f"unsupported dense activation {act!r}")

    def backward(g):
        if act == "elu":
            g = g * slope
        elif act == "relu":
            g = g * (z > 0)
        gx = g @ wv.T if is_traced(x) else None
        gw = xv.T @ g if is_traced(w) else None
        gb = g.sum(axis=0) if is_traced(b) else None
        return (gx, gw, gb)

    return _record(out, (x, w, b), backward)


def causal_dilated_conv1d(x, kernel, bias, dilation: int):
    """Causal dilated 1-d convolution.

    ``out[b, o, t] = bias[o] + sum_{c, k} kernel[o, c, k] * x[b, c, t - k*dilation]``
    with positions before 0 read as zero. Tap ``k = 0`` sees the current step.
    """
    xv, wv, bv = value(x), value(kernel), value(bias)
    if xv.ndim != 3 or wv.ndim != 3:
        raise ShapeError(f"conv expects x[B, Cin, T] and kernel[Cout, Cin, K], got {xv.shape}, {wv.shape}")
    B, cin, T = xv.shape
    cout, kcin, K = wv.shape
    if kcin != cin:
        raise ShapeError(f"kernel expects {kcin} input channels, input has {cin}")
    if bv.shape != (cout,):
        raise ShapeError(f"bias shape {bv.shape} != ({cout},)")
    if K < 1 or dilation < 1:
        raise ValueError("kernel width and dilation must be >= 1")
    out = np.empty((B, cout, T))
    out[...] = bv[None, :, None]
    for k in range(K):
        s = k * dilation
        if s >= T:
            break
        out[:, :, s:] += np.einsum("oc,bct->bot", wv[:, :, k], xv[:, :, : T - s], optimize=True)

    def backward(g):
        gx = gw = gb = None
        if is_traced(x):
            gx = np.zeros_like(xv)
            for k in range(K):
                s = k * dilation
                if s >= T:
                    break
                gx[:, :, : T - s] += np.einsum("oc,bot->bct", wv[:, :, k], g[:, :, s:], optimize=True)
        if is_traced(kernel):
            gw = np.zeros_like(wv)
            for k in range(K):
                s = k * dilation
                if s >= T:
                    break
                gw[:, :, k] = np.einsum("bot,bct->oc", g[:, :, s:], xv[:, :, : T - s], optimize=True)
        if is_traced(bias):
            gb = g.sum(axis=(0, 2))
        return (gx, gw, gb)

    return _record(out, (x, kernel, bias), backward)


def causal_conv_channels_last(x, kernel, bias, dilation: int):
    """Same convolution as :func:`causal_dilated_conv1d` on ``x[B, T, Cin]``.

    Implemented as one matrix product over an unrolled (im2col) copy of the
    input; returns ``[B, T, Cout]``.
    """
    xv, wv, bv = value(x), value(kernel), value(bias)
    if xv.ndim != 3 or wv.ndim != 3:
        raise ShapeError(f"conv expects x[B, T, Cin] and kernel[Cout, Cin, K], got {xv.shape}, {wv.shape}")
    B, T, cin = xv.shape
    cout, kcin, K = wv.shape
    if kcin != cin:
        raise ShapeError(f"kernel expects {kcin} input channels, input has {cin}")
    if bv.shape != (cout,):
        raise ShapeError(f"bias shape {bv.shape} != ({cout},)")
    if K < 1 or dilation < 1:
        raise ValueError("kernel width and dilation must be >= 1")
    cols = np.zeros((B, T, K, cin))
    for k in range(K):
        s = k * dilation
        if s < T:
            cols[:, s:, k, :] = xv[:, : T - s, :]
    wmat = np.ascontiguousarray(wv.transpose(2, 1, 0)).reshape(K * cin, cout)
    flat = cols.reshape(B * T, K * cin)
    out = (flat @ wmat).reshape(B, T, cout)
    out += bv

    def backward(g):
        g2 = g.reshape(B * T, cout)
        gx = gw = gb = None
        if is_traced(x):
            gcols = (g2 @ wmat.T).reshape(B, T, K, cin)
            gx = np.zeros_like(xv)
            for k in range(K):
                s = k * dilation
                if s < T:
                    gx[:, : T - s, :] += gcols[:, s:, k, :]
        if is_traced(kernel):
            gw = (flat.T @ g2).reshape(K, cin, cout).transpose(2, 1, 0)
        if is_traced(bias):
            gb = g2.sum(axis=0)
        return (gx, gw, gb)

    return _record(out, (x, kernel, bias), backward)


# ---------------------------------------------------------------- structure


def getitem(x, index):
    xv = value(x)
    out = xv[index]
    return _record(np.asarray(out, dtype=np.float64), (x,), lambda g: (_Sparse(index, g),))


def concat(items: Iterable, axis: int = -1):
    items = list(items)
    vals = [np.asarray(value(i), dtype=np.float64) for i in items]
    try:
        out = np.concatenate(vals, axis=axis)
    except ValueError as exc:
        raise ShapeError(str(exc)) from exc
    ax = axis % out.ndim
    bounds = np.cumsum([0] + [v.shape[ax] for v in vals])

    def backward(g):
        res = []
        for i in range(len(vals)):
            sl = [slice(None)] * g.ndim
            sl[ax] = slice(bounds[i], bounds[i + 1])
            res.append(g[tuple(sl)])
        return tuple(res)

    return _record(out, tuple(items), backward)


def transpose(x, axes: Sequence[int] | None = None):
    xv = value(x)
    if axes is None:
        axes = tuple(reversed(range(xv.ndim)))
    inv = np.argsort(axes)
    return _record(np.ascontiguousarray(np.transpose(xv, axes)), (x,), lambda g: (np.transpose(g, inv),))


def reshape(x, shape):
    xv = value(x)
    return _record(xv.reshape(shape), (x,), lambda g: (g.reshape(xv.shape),))
