"""A small reverse-mode autodiff engine over float64 numpy arrays.

Every op returns a new :class:`Tensor` that remembers its parents and a backward rule.
``backward`` sweeps the recorded graph in reverse topological order. Sparse message
passing is expressed with edge lists and the segment ops (never dense N x N attention).
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def backward(self) -> None:
        backward(self)

    # operator sugar; all delegate to the module-level ops
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return mul(self, _lift(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, _lift(other))


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name: str = "") -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], rule) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = rule
    return out


def _need(op: str, cond: bool, *tensors: Tensor) -> None:
    if not cond:
        shapes = " and ".join(str(t.shape) for t in tensors)
        raise ShapeError(f"{op}: incompatible shapes {shapes}")


# -- reverse sweep --------------------------------------------------------------------------


def topological_order(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf that requires grad."""
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg


def grad(loss: Tensor, params: Iterable[Tensor]) -> list[np.ndarray]:
    """Gradients of `loss` w.r.t. `params`, zero for parameters the loss does not touch."""
    params = list(params)
    for p in params:
        p.grad = None
    backward(loss)
    return [np.zeros_like(p.data) if p.grad is None else p.grad for p in params]


# -- elementwise and linear algebra ---------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    """a + b; `b` may also be a bias row (shape (n,) or (1, n)) added to every row of 2-D `a`."""
    if a.shape == b.shape:
        return _make(a.data + b.data, (a, b), lambda g: (g, g))
    is_bias_row = (
        a.data.ndim == 2 and b.data.size == a.shape[1] and (b.data.ndim == 1 or b.shape == (1, a.shape[1]))
    )
    if is_bias_row:
        bshape = b.shape
        return _make(a.data + b.data.reshape(1, -1), (a, b), lambda g: (g, g.sum(axis=0).reshape(bshape)))
    _need("add", False, a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _need("sub", a.shape == b.shape, a, b)
    return _make(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _need("mul", a.shape == b.shape, a, b)
    return _make(a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(a: Tensor, c: float) -> Tensor:
    return _make(a.data * c, (a,), lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _need("matmul", a.data.ndim == 2 and b.data.ndim == 2 and a.shape[1] == b.shape[0], a, b)
    return _make(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat: no inputs")
    ref = tensors[0].data
    for t in tensors[1:]:
        other = [s for i, s in enumerate(t.shape) if i != axis % ref.ndim]
        mine = [s for i, s in enumerate(ref.shape) if i != axis % ref.ndim]
        _need("concat", t.data.ndim == ref.ndim and other == mine, tensors[0], t)
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors),
                 lambda g: np.split(g, cuts, axis=axis))


def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def transpose(a: Tensor) -> Tensor:
    _need("transpose", a.data.ndim == 2, a)
    return _make(a.data.T, (a,), lambda g: (g.T,))


def leaky_relu(a: Tensor, slope: float = 0.01) -> Tensor:
    pos = a.data > 0
    return _make(np.where(pos, a.data, slope * a.data), (a,), lambda g: (np.where(pos, g, slope * g),))


def relu(a: Tensor) -> Tensor:
    pos = a.data > 0
    return _make(np.where(pos, a.data, 0.0), (a,), lambda g: (np.where(pos, g, 0.0),))


def elu(a: Tensor, alpha: float = 1.0) -> Tensor:
    pos = a.data > 0
    neg = alpha * np.expm1(np.minimum(a.data, 0.0))
    out = np.where(pos, a.data, neg)
    return _make(out, (a,), lambda g: (np.where(pos, g, g * (neg + alpha)),))


def sigmoid(a: Tensor) -> Tensor:
    s = _sigmoid(a.data)
    return _make(s, (a,), lambda g: (g * s * (1.0 - s),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def softplus(a: Tensor) -> Tensor:
    """log(1 + exp(a)), evaluated without overflow."""
    x = a.data
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return _make(out, (a,), lambda g: (g * _sigmoid(x),))


def exp(a: Tensor) -> Tensor:
    e = np.exp(a.data)
    return _make(e, (a,), lambda g: (g * e,))


def log(a: Tensor) -> Tensor:
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)
    return _make(s, (a,), lambda g: (s * (g - (g * s).sum(axis=axis, keepdims=True)),))


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    z = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    s = np.exp(out)
    return _make(out, (a,), lambda g: (g - s * g.sum(axis=axis, keepdims=True),))


def sum(a: Tensor, axis: int | None = None) -> Tensor:  # noqa: A001
    shape = a.shape
    if axis is None:
        return _make(np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))
    return _make(a.data.sum(axis=axis), (a,),
                 lambda g: (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),))


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    n = a.data.size if axis is None else a.shape[axis]
    return scale(sum(a, axis), 1.0 / n)


# -- indexing and segment ops ---------------------------------------------------------------


def gather_rows(a: Tensor, index) -> Tensor:
    index = np.asarray(index, dtype=np.int64)
    n = a.shape[0]
    if index.size and (index.min() < 0 or index.max() >= n):
        raise ShapeError(f"gather_rows: index out of range for {a.shape}")

    def rule(g):
        out = np.zeros_like(a.data)
        np.add.at(out, index, g)
        return (out,)

    return _make(a.data[index], (a,), rule)


def _check_segments(op: str, segment_ids: np.ndarray, length: int, num_segments: int) -> None:
    if segment_ids.ndim != 1 or len(segment_ids) != length:
        raise ShapeError(f"{op}: {len(segment_ids)} segment ids for {length} entries")
    if length:
        if segment_ids[0] < 0 or segment_ids[-1] >= num_segments:
            raise ShapeError(f"{op}: segment id out of range [0, {num_segments})")
        if np.any(segment_ids[1:] < segment_ids[:-1]):
            raise ShapeError(f"{op}: segment ids must be sorted")


def segment_softmax(values: Tensor, segment_ids, num_segments: int | None = None) -> Tensor:
    """Softmax of a 1-D tensor within each run of equal (sorted) segment ids."""
    seg = np.asarray(segment_ids, dtype=np.int64)
    if num_segments is None:
        num_segments = int(seg[-1]) + 1 if len(seg) else 0
    _need("segment_softmax", values.data.ndim == 1, values)
    _check_segments("segment_softmax", seg, len(values.data), num_segments)
    x = values.data
    if len(x) == 0:
        return _make(x.copy(), (values,), lambda g: (g,))
    seg_max = np.full(num_segments, -np.inf)
    np.maximum.at(seg_max, seg, x)
    e = np.exp(x - seg_max[seg])
    denom = np.bincount(seg, weights=e, minlength=num_segments)
    y = e / denom[seg]

    def rule(g):
        dot = np.bincount(seg, weights=g * y, minlength=num_segments)
        return (y * (g - dot[seg]),)

    return _make(y, (values,), rule)


def segment_weighted_sum(messages: Tensor, weights: Tensor, segment_ids, num_segments: int) -> Tensor:
    """out[s] = sum over entries e with segment s of weights[e] * messages[e]."""
    seg = np.asarray(segment_ids, dtype=np.int64)
    m, w = messages.data, weights.data
    _need("segment_weighted_sum", m.ndim == 2 and w.ndim == 1 and len(w) == m.shape[0], messages, weights)
    _check_segments("segment_weighted_sum", seg, len(w), num_segments)
    out = np.zeros((num_segments, m.shape[1]))
    np.add.at(out, seg, w[:, None] * m)

    def rule(g):
        ge = g[seg]
        return (w[:, None] * ge, (m * ge).sum(axis=1))

    return _make(out, (messages, weights), rule)


def scatter_rows(a: Tensor, index, num_rows: int) -> Tensor:
    """Place the rows of `a` at `index` in a zero matrix of `num_rows` rows (index rows are distinct)."""
    index = np.asarray(index, dtype=np.int64)
    _need("scatter_rows", a.data.ndim == 2 and len(index) == a.shape[0], a)
    out = np.zeros((num_rows, a.shape[1]))
    out[index] = a.data
    return _make(out, (a,), lambda g: (g[index],))
