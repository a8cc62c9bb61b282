"""Reverse-mode automatic differentiation over dense float64 arrays.

A computation is a DAG of :class:`Node` objects. Forward values are computed
eagerly as nodes are created; :func:`backward` walks the recorded graph in
reverse topological order and accumulates gradients. Every op validates its
operand shapes and rejects non-finite results.

There is no internal randomness anywhere in this module: dropout is applied
by multiplying with an explicitly supplied mask, so identical inputs always
produce bit-identical values.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import ContractError, NonFiniteError, ShapeMismatchError
from . import kernels

Array = np.ndarray


def as_tensor(values, context: str = "tensor") -> Array:
    """Coerce to a float64 array, rejecting NaN/Inf."""
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{context}: input contains NaN or Inf")
    return arr


class Node:
    """One vertex of the computation graph.

    ``value`` is always a float64 ndarray (0-d for scalars). ``grad`` is
    populated by :func:`backward` and has the same shape as ``value``.
    """

    __slots__ = ("op", "value", "inputs", "grad", "name", "_vjp")

    def __init__(self, op: str, value: Array, inputs: Sequence["Node"] = (),
                 vjp: Callable[[Array], tuple] | None = None,
                 name: str | None = None):
        if not np.all(np.isfinite(value)):
            raise NonFiniteError(f"op '{op}' produced a non-finite value")
        self.op = op
        self.value = value
        self.inputs = tuple(inputs)
        self.grad: Array | None = None
        self.name = name
        self._vjp = vjp

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"<Node {self.op} shape={self.value.shape}{label}>"

    # Thin operator sugar over the module-level ops.
    def __add__(self, other: "Node") -> "Node":
        return add(self, other)

    def __sub__(self, other: "Node") -> "Node":
        return add(self, negate(other))

    def __mul__(self, other: "Node") -> "Node":
        return mul(self, other)

    def __truediv__(self, other: "Node") -> "Node":
        return div(self, other)

    def __matmul__(self, other: "Node") -> "Node":
        return matmul(self, other)

    def __neg__(self) -> "Node":
        return negate(self)

    def __getitem__(self, key) -> "Node":
        return take(self, key)


def parameter(values, name: str | None = None) -> Node:
    """A trainable leaf. ``backward`` reports gradients for these."""
    return Node("parameter", as_tensor(values, name or "parameter"), name=name)


def constant(values, name: str | None = None) -> Node:
    """A non-trainable leaf (inputs, labels, fixed coefficients)."""
    return Node("constant", as_tensor(values, name or "constant"), name=name)


def _shape_error(op: str, *shapes) -> ShapeMismatchError:
    described = " vs ".join(str(s) for s in shapes)
    return ShapeMismatchError(f"op '{op}': incompatible shapes {described}")


def _unbroadcast(grad: Array, shape: tuple) -> Array:
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a: Node, b: Node) -> Node:
    try:
        value = a.value + b.value
    except ValueError:
        raise _shape_error("add", a.shape, b.shape) from None
    return Node("add", value, (a, b),
                lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def add_n(nodes: Sequence[Node]) -> Node:
    """Sum of any number of same-shaped nodes."""
    nodes = tuple(nodes)
    if not nodes:
        raise ContractError("add_n: needs at least one input")
    shape = nodes[0].shape
    if any(n.shape != shape for n in nodes):
        raise _shape_error("add", *(n.shape for n in nodes))
    value = nodes[0].value.copy()
    for n in nodes[1:]:
        value += n.value
    return Node("add", value, nodes, lambda g: tuple(g for _ in nodes))


def mul(a: Node, b: Node) -> Node:
    try:
        value = a.value * b.value
    except ValueError:
        raise _shape_error("elementwise_mul", a.shape, b.shape) from None
    return Node("elementwise_mul", value, (a, b),
                lambda g: (_unbroadcast(g * b.value, a.shape),
                           _unbroadcast(g * a.value, b.shape)))


def div(a: Node, b: Node) -> Node:
    try:
        value = a.value / b.value
    except ValueError:
        raise _shape_error("div", a.shape, b.shape) from None
    bsq = b.value * b.value
    return Node("div", value, (a, b),
                lambda g: (_unbroadcast(g / b.value, a.shape),
                           _unbroadcast(-g * a.value / bsq, b.shape)))


def scale(a: Node, factor: float) -> Node:
    """Multiply by a fixed scalar coefficient."""
    return mul(a, constant(float(factor)))


def matmul(a: Node, b: Node) -> Node:
    av, bv = a.value, b.value
    if av.ndim == 0 or bv.ndim == 0 or av.ndim > 2 or bv.ndim > 2:
        raise _shape_error("matmul", a.shape, b.shape)
    if av.shape[-1] != bv.shape[0]:
        raise _shape_error("matmul", a.shape, b.shape)
    value = av @ bv

    if av.ndim == 2 and bv.ndim == 2:
        vjp = lambda g: (g @ bv.T, av.T @ g)
    elif av.ndim == 2 and bv.ndim == 1:
        vjp = lambda g: (np.outer(g, bv), av.T @ g)
    elif av.ndim == 1 and bv.ndim == 2:
        vjp = lambda g: (bv @ g, np.outer(av, g))
    else:  # vector dot product
        vjp = lambda g: (g * bv, g * av)
    return Node("matmul", value, (a, b), vjp)


def concat(nodes: Sequence[Node], axis: int = 0) -> Node:
    nodes = tuple(nodes)
    if not nodes:
        raise ContractError("concat: needs at least one input")
    try:
        value = np.concatenate([n.value for n in nodes], axis=axis)
    except ValueError:
        raise _shape_error("concat", *(n.shape for n in nodes)) from None
    sizes = [n.value.shape[axis] for n in nodes]
    offsets = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, offsets, axis=axis))

    return Node("concat", value, nodes, vjp)


def stack_rows(nodes: Sequence[Node]) -> Node:
    """Stack equal-length vectors into a matrix, one row per input."""
    nodes = tuple(nodes)
    if not nodes or any(n.value.ndim != 1 for n in nodes):
        raise _shape_error("stack_rows", *(n.shape for n in nodes))
    width = nodes[0].shape[0]
    if any(n.shape[0] != width for n in nodes):
        raise _shape_error("stack_rows", *(n.shape for n in nodes))
    value = np.stack([n.value for n in nodes])
    return Node("stack_rows", value, nodes,
                lambda g: tuple(g[i] for i in range(len(nodes))))


def tanh(a: Node) -> Node:
    value = np.tanh(a.value)
    return Node("tanh", value, (a,), lambda g: (g * (1.0 - value * value),))


def sigmoid(a: Node) -> Node:
    with np.errstate(over="ignore"):
        value = 1.0 / (1.0 + np.exp(-a.value))
    return Node("sigmoid", value, (a,), lambda g: (g * value * (1.0 - value),))


def softmax(a: Node, axis: int = -1) -> Node:
    av = a.value
    shifted = av - av.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    value = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * value).sum(axis=axis, keepdims=True)
        return (value * (g - inner),)

    return Node("softmax", value, (a,), vjp)


def reduce_sum(a: Node, axis: int | None = None) -> Node:
    av = a.value
    if axis is None:
        value = av.sum()
        vjp = lambda g: (np.broadcast_to(g, av.shape).copy(),)
    else:
        value = av.sum(axis=axis)
        vjp = lambda g: (np.broadcast_to(np.expand_dims(g, axis), av.shape).copy(),)
    return Node("sum", value, (a,), vjp)


def reduce_mean(a: Node, axis: int | None = None) -> Node:
    av = a.value
    n = av.size if axis is None else av.shape[axis]
    if axis is None:
        value = av.mean()
        vjp = lambda g: (np.broadcast_to(g / n, av.shape).copy(),)
    else:
        value = av.mean(axis=axis)
        vjp = lambda g: (np.broadcast_to(np.expand_dims(g / n, axis), av.shape).copy(),)
    return Node("mean", value, (a,), vjp)


def square(a: Node) -> Node:
    return Node("square", a.value * a.value, (a,), lambda g: (2.0 * a.value * g,))


def log(a: Node) -> Node:
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.log(a.value)
    return Node("log", value, (a,), lambda g: (g / a.value,))


def negate(a: Node) -> Node:
    return Node("negate", -a.value, (a,), lambda g: (-g,))


def take(a: Node, key) -> Node:
    """Basic (non-fancy) indexing: ints, slices, and tuples thereof."""
    value = a.value[key]
    if isinstance(value, np.ndarray):
        value = value.copy()
    else:
        value = np.asarray(value)

    def vjp(g):
        out = np.zeros_like(a.value)
        out[key] += g
        return (out,)

    return Node("slice", value, (a,), vjp)


def gather_rows(table: Node, ids) -> Node:
    """Select rows of a matrix by integer index (embedding lookup)."""
    ids = np.asarray(ids, dtype=np.intp)
    if table.value.ndim != 2 or ids.ndim != 1:
        raise _shape_error("gather_rows", table.shape, ids.shape)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ContractError(
            f"gather_rows: index out of range for table with {table.shape[0]} rows")
    value = table.value[ids]

    def vjp(g):
        out = np.zeros_like(table.value)
        np.add.at(out, ids, g)
        return (out,)

    return Node("gather_rows", value, (table,), vjp)


def apply_mask(a: Node, mask) -> Node:
    """Multiply by an externally supplied (dropout) mask array."""
    mask = as_tensor(mask, "dropout mask")
    if mask.shape != a.shape:
        raise _shape_error("dropout_mask_apply", a.shape, mask.shape)
    return Node("dropout_mask_apply", a.value * mask, (a,),
                lambda g: (g * mask,))


def min_reduce(a: Node) -> Node:
    """Minimum over all entries; gradient flows to the first attaining index."""
    flat_idx = int(np.argmin(a.value))
    value = np.asarray(a.value.reshape(-1)[flat_idx])

    def vjp(g):
        out = np.zeros_like(a.value)
        out.reshape(-1)[flat_idx] = g
        return (out,)

    return Node("min_reduce", value, (a,), vjp)


def max_reduce(a: Node) -> Node:
    """Maximum over all entries; gradient flows to the first attaining index."""
    flat_idx = int(np.argmax(a.value))
    value = np.asarray(a.value.reshape(-1)[flat_idx])

    def vjp(g):
        out = np.zeros_like(a.value)
        out.reshape(-1)[flat_idx] = g
        return (out,)

    return Node("max_reduce", value, (a,), vjp)


def cross_entropy_rows(logits: Node, target_ids) -> Node:
    """Summed negative log-likelihood of the targets under row-wise softmax.

    The log-softmax is fused for numerical stability. ``target_ids`` is one
    integer per row of ``logits``; an empty target list yields 0.
    """
    ids = np.asarray(target_ids, dtype=np.intp)
    lv = logits.value
    if lv.ndim != 2 or ids.ndim != 1 or ids.shape[0] != lv.shape[0]:
        raise _shape_error("cross_entropy_rows", logits.shape, ids.shape)
    if ids.size and (ids.min() < 0 or ids.max() >= lv.shape[1]):
        raise ContractError(
            f"cross_entropy_rows: target id out of range [0, {lv.shape[1]})")
    if ids.size == 0:
        return Node("cross_entropy_rows", np.asarray(0.0), (logits,),
                    lambda g: (np.zeros_like(lv),))
    m = lv.max(axis=1, keepdims=True)
    shifted = lv - m
    lse = np.log(np.exp(shifted).sum(axis=1)) + m[:, 0]
    rows = np.arange(lv.shape[0])
    value = np.asarray((lse - lv[rows, ids]).sum())

    def vjp(g):
        p = np.exp(shifted)
        p /= p.sum(axis=1, keepdims=True)
        p[rows, ids] -= 1.0
        return (g * p,)

    return Node("cross_entropy_rows", value, (logits,), vjp)


def lstm_sequence(x: Node, w: Node, u: Node, b: Node, reverse: bool = False) -> Node:
    """Fused gated recurrence over the rows of ``x``.

    Returns the (T, H) matrix of hidden states. With ``reverse=True`` the
    scan runs right-to-left and row t holds the state after consuming rows
    T-1..t, so outputs stay aligned with input positions. Equivalent to
    iterating :func:`recurrent step <jointlabel.model.recurrent_step>` built
    from primitive ops, but runs on the selected kernel backend.
    """
    xv, wv, uv, bv = x.value, w.value, u.value, b.value
    if xv.ndim != 2 or wv.ndim != 2 or uv.ndim != 2 or bv.ndim != 1:
        raise _shape_error("lstm_seq", x.shape, w.shape, u.shape, b.shape)
    hidden = uv.shape[0]
    if (wv.shape[1] != 4 * hidden or uv.shape[1] != 4 * hidden
            or bv.shape[0] != 4 * hidden or xv.shape[1] != wv.shape[0]
            or xv.shape[0] < 1):
        raise _shape_error("lstm_seq", x.shape, w.shape, u.shape, b.shape)

    xin = np.ascontiguousarray(xv[::-1]) if reverse else xv
    h, cache = kernels.lstm_forward(xin, wv, uv, bv)
    value = np.ascontiguousarray(h[::-1]) if reverse else h

    def vjp(g):
        gh = np.ascontiguousarray(g[::-1]) if reverse else np.ascontiguousarray(g)
        dx, dw, du, db = kernels.lstm_backward(gh, xin, wv, uv, bv, cache)
        if reverse:
            dx = np.ascontiguousarray(dx[::-1])
        return dx, dw, du, db

    return Node("lstm_seq", value, (x, w, u, b), vjp)


def topo_order(root: Node) -> list[Node]:
    """All nodes reachable from ``root``, inputs before consumers."""
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for child in node.inputs:
            if id(child) not in seen:
                stack.append((child, False))
    return order


def backward(loss: Node) -> dict[Node, Array]:
    """Backpropagate from a scalar loss.

    Fills ``node.grad`` for every node reachable from ``loss`` and returns
    the gradient map restricted to parameter nodes. Nodes feeding the loss
    through several paths accumulate (sum) their gradients.
    """
    if loss.value.shape != ():
        raise ContractError(
            f"backward: loss must be scalar, got shape {loss.value.shape}")
    order = topo_order(loss)
    for node in order:
        node.grad = None
    loss.grad = np.asarray(1.0)
    for node in reversed(order):
        if node.grad is None or node._vjp is None:
            continue
        grads = node._vjp(node.grad)
        for child, g in zip(node.inputs, grads):
            if g is None:
                continue
            if child.grad is None:
                child.grad = np.array(g, dtype=np.float64, copy=True)
            else:
                child.grad += g
    return {node: node.grad for node in order
            if node.op == "parameter" and node.grad is not None}
