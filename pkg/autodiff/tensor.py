"""Reverse-mode differentiable tensors over 64-bit numpy arrays.

Every primitive builds an output ``Tensor`` that remembers its parents and a
closure accumulating gradients into them. ``Tensor.backward`` walks the graph
in reverse topological order.
"""

from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import LAYER_NORM_EPS

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible for a primitive."""


class Tensor:
    """Dense float64 array with an optional gradient buffer."""

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        _parents: Tuple["Tensor", ...] = (),
        _op: str = "",
    ):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents = _parents
        self._op = _op
        self._backward: Callable[[np.ndarray], None] = lambda g: None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def accumulate(self, grad: np.ndarray):
        """Add ``grad`` into this tensor's buffer when it tracks gradients."""
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64)
        else:
            self.grad = self.grad + grad

    def backward(self, grad: Optional[ArrayLike] = None):
        """Back-propagate from this tensor (a scalar unless ``grad`` is given)."""
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without grad needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=np.float64)

        order: List[Tensor] = []
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
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        grads = {id(self): grad}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                node.accumulate(g)
                continue
            # interior nodes hand their gradient to parents through _backward
            node._pending = grads
            node._backward(g)
            del node._pending

    def _send(self, parent: "Tensor", grad: np.ndarray):
        if not parent.requires_grad:
            return
        if not parent._parents:
            parent.accumulate(grad)
            return
        pending = self._pending
        key = id(parent)
        pending[key] = grad if key not in pending else pending[key] + grad

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op or 'leaf'}, requires_grad={self.requires_grad})"


class Parameter(Tensor):
    """Named trainable tensor; frozen parameters accumulate no gradient."""

    def __init__(self, data: ArrayLike, name: str, frozen: bool = False):
        super().__init__(data, requires_grad=not frozen)
        self.name = name

    @property
    def frozen(self) -> bool:
        return not self.requires_grad

    @frozen.setter
    def frozen(self, value: bool):
        self.requires_grad = not value
        if value:
            self.grad = None

    @property
    def tensor(self) -> Tensor:
        return self

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape}, frozen={self.frozen})"


def as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data: np.ndarray, parents: Iterable[Tensor], op: str) -> Tensor:
    parents = tuple(parents)
    return Tensor(data, requires_grad=any(p.requires_grad for p in parents), _parents=parents, _op=op)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ===== Primitives =====

def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: cannot broadcast {a.shape} with {b.shape}") from None
    out = _result(data, (a, b), "add")

    def backward(g):
        out._send(a, _unbroadcast(g, a.shape))
        out._send(b, _unbroadcast(g, b.shape))

    out._backward = backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: cannot broadcast {a.shape} with {b.shape}") from None
    out = _result(data, (a, b), "mul")

    def backward(g):
        out._send(a, _unbroadcast(g * b.data, a.shape))
        out._send(b, _unbroadcast(g * a.data, b.shape))

    out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the last two axes (``b`` may be a shared 2-D weight)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 1 or b.data.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: left operand {a.shape} incompatible with right operand {b.shape}")
    out = _result(np.matmul(a.data, b.data), (a, b), "matmul")

    def backward(g):
        if a.requires_grad:
            out._send(a, _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        if b.requires_grad:
            left = a.data if a.data.ndim > 1 else a.data[None, :]
            grad_out = g if g.ndim > 1 else g[None, :]
            out._send(b, _unbroadcast(np.matmul(np.swapaxes(left, -1, -2), grad_out), b.shape))

    out._backward = backward
    return out


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    out = _result(np.swapaxes(a.data, -1, -2), (a,), "transpose")
    out._backward = lambda g: out._send(a, np.swapaxes(g, -1, -2))
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = ", ".join(str(t.shape) for t in tensors)
        raise ShapeError(f"concat along axis {axis}: incompatible shapes {shapes}") from None
    out = _result(data, tensors, "concat")
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g):
        for t, start, stop in zip(tensors, bounds[:-1], bounds[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(start, stop)
            out._send(t, g[tuple(index)])

    out._backward = backward
    return out


def concat_seq(tokens: Tensor, extra: Tensor, lengths: Optional[Sequence[int]] = None) -> Tensor:
    """Insert ``extra`` (B, 1, d) into ``tokens`` (B, T, d) along the sequence axis.

    Without ``lengths`` the extra vector is appended after position T-1. With
    ``lengths`` it is placed right after each row's last real token, pushing
    padding one slot to the right.
    """
    tokens, extra = as_tensor(tokens), as_tensor(extra)
    if tokens.data.ndim != 3 or extra.data.ndim != 3 or extra.shape[1] != 1:
        raise ShapeError(f"concat_seq: tokens {tokens.shape} and extra {extra.shape} must be (B,T,d) and (B,1,d)")
    if tokens.shape[0] != extra.shape[0] or tokens.shape[2] != extra.shape[2]:
        raise ShapeError(f"concat_seq: tokens {tokens.shape} and extra {extra.shape} disagree on batch or width")
    batch, steps, _ = tokens.shape
    if lengths is None:
        lengths = [steps] * batch
    lengths = np.asarray(lengths, dtype=np.int64)

    rows = np.arange(batch)
    slots = np.arange(steps + 1)[None, :]
    # source index into the token axis for every output slot (-1 marks the extra vector)
    source = np.where(slots < lengths[:, None], slots, slots - 1)
    source = np.where(slots == lengths[:, None], -1, source)
    gathered = tokens.data[rows[:, None], np.clip(source, 0, steps - 1)]
    data = np.where((source == -1)[..., None], extra.data, gathered)
    out = _result(data, (tokens, extra), "concat_seq")

    def backward(g):
        if tokens.requires_grad:
            gt = np.zeros_like(tokens.data)
            mask = source >= 0
            np.add.at(gt, (np.broadcast_to(rows[:, None], source.shape)[mask], source[mask]), g[mask])
            out._send(tokens, gt)
        if extra.requires_grad:
            out._send(extra, g[rows, lengths][:, None, :])

    out._backward = backward
    return out


def gather_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Embedding lookup: rows of ``table`` (V, d) selected by integer ``ids``."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"gather_rows: ids outside table of {table.shape[0]} rows")
    out = _result(table.data[ids], (table,), "gather_rows")

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        out._send(table, gt)

    out._backward = backward
    return out


def take_position(x: Tensor, index: int) -> Tensor:
    """Select sequence position ``index`` from (B, T, d), giving (B, d)."""
    if x.data.ndim != 3 or not -x.shape[1] <= index < x.shape[1]:
        raise ShapeError(f"take_position: index {index} invalid for shape {x.shape}")
    out = _result(x.data[:, index, :], (x,), "take_position")

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[:, index, :] = g
        out._send(x, gx)

    out._backward = backward
    return out


def layer_norm(
    x: Tensor,
    gamma: Optional[Tensor] = None,
    beta: Optional[Tensor] = None,
    eps: float = LAYER_NORM_EPS,
) -> Tensor:
    """Normalise over the last axis, then apply the optional affine map."""
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    inv_std = 1.0 / np.sqrt((centered ** 2).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    parents = [x]
    data = xhat
    if gamma is not None:
        if gamma.shape != (x.shape[-1],):
            raise ShapeError(f"layer_norm: gamma {gamma.shape} does not match width {x.shape[-1]}")
        data = data * gamma.data
        parents.append(gamma)
    if beta is not None:
        if beta.shape != (x.shape[-1],):
            raise ShapeError(f"layer_norm: beta {beta.shape} does not match width {x.shape[-1]}")
        data = data + beta.data
        parents.append(beta)
    out = _result(data, parents, "layer_norm")
    width = x.shape[-1]

    def backward(g):
        dxhat = g * gamma.data if gamma is not None else g
        if x.requires_grad:
            dx = inv_std / width * (
                width * dxhat
                - dxhat.sum(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
            )
            out._send(x, dx)
        if gamma is not None:
            out._send(gamma, (g * xhat).reshape(-1, width).sum(axis=0))
        if beta is not None:
            out._send(beta, g.reshape(-1, width).sum(axis=0))

    out._backward = backward
    return out


def dropout(x: Tensor, prob: float, train: bool, seed: Optional[Sequence[int]] = None) -> Tensor:
    """Inverted dropout; the mask is drawn from a generator seeded by ``seed``."""
    if not train or prob == 0.0:
        return x
    if not 0.0 <= prob < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {prob}")
    rng = np.random.default_rng(list(seed) if seed is not None else None)
    keep = (rng.random(x.shape) >= prob) / (1.0 - prob)
    out = _result(x.data * keep, (x,), "dropout")
    out._backward = lambda g: out._send(x, g * keep)
    return out


def softmax(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=-1, keepdims=True)
    out = _result(probs, (x,), "softmax")
    out._backward = lambda g: out._send(x, probs * (g - (g * probs).sum(axis=-1, keepdims=True)))
    return out


def log_softmax(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    data = shifted - logz
    probs = np.exp(data)
    out = _result(data, (x,), "log_softmax")
    out._backward = lambda g: out._send(x, g - probs * g.sum(axis=-1, keepdims=True))
    return out


def cross_entropy(logits: Tensor, targets: Sequence[int]) -> Tensor:
    """Mean negative log-likelihood of ``targets`` under row-wise softmax of (N, C) logits."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.data.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape} and targets {targets.shape} disagree")
    logp = log_softmax(logits)
    rows = np.arange(logits.shape[0])
    out = _result(-logp.data[rows, targets].mean(), (logp,), "nll")

    def backward(g):
        grad = np.zeros_like(logp.data)
        grad[rows, targets] = -g / logits.shape[0]
        out._send(logp, grad)

    out._backward = backward
    return out


def mean(x: Tensor) -> Tensor:
    out = _result(x.data.mean(), (x,), "mean")
    out._backward = lambda g: out._send(x, np.full_like(x.data, g / x.data.size))
    return out


def sum_all(x: Tensor) -> Tensor:
    out = _result(x.data.sum(), (x,), "sum")
    out._backward = lambda g: out._send(x, np.full_like(x.data, g))
    return out


def gelu(x: Tensor) -> Tensor:
    """Tanh approximation of GELU as used in BERT implementations."""
    c = np.sqrt(2.0 / np.pi)
    inner = c * (x.data + 0.044715 * x.data ** 3)
    t = np.tanh(inner)
    out = _result(0.5 * x.data * (1.0 + t), (x,), "gelu")

    def backward(g):
        dinner = c * (1.0 + 3 * 0.044715 * x.data ** 2)
        out._send(x, g * (0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t ** 2) * dinner))

    out._backward = backward
    return out


def scaled_dot_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    heads: int,
    key_mask: Optional[np.ndarray] = None,
) -> Tensor:
    """Multi-head softmax(QK^T / sqrt(d_h)) V over (B, T, d) projections.

    ``key_mask`` is a boolean (B, T) array, True on real tokens; padded keys
    receive zero attention weight.
    """
    if not (q.shape == k.shape == v.shape) or q.data.ndim != 3:
        raise ShapeError(f"scaled_dot_attention: q {q.shape}, k {k.shape}, v {v.shape} must share a (B,T,d) shape")
    batch, steps, width = q.shape
    if width % heads:
        raise ShapeError(f"scaled_dot_attention: width {width} not divisible by {heads} heads")
    dh = width // heads
    scale = 1.0 / np.sqrt(dh)

    def split(a):
        return a.reshape(batch, steps, heads, dh).transpose(0, 2, 1, 3)

    def merge(a):
        return a.transpose(0, 2, 1, 3).reshape(batch, steps, width)

    Q, K, V = split(q.data), split(k.data), split(v.data)
    scores = np.matmul(Q, np.swapaxes(K, -1, -2)) * scale
    if key_mask is not None:
        scores = np.where(np.asarray(key_mask, dtype=bool)[:, None, None, :], scores, -np.inf)
    scores = scores - scores.max(axis=-1, keepdims=True)
    weights = np.exp(scores)
    weights = weights / weights.sum(axis=-1, keepdims=True)
    out = _result(merge(np.matmul(weights, V)), (q, k, v), "attention")

    def backward(g):
        G = split(g)
        dV = np.matmul(np.swapaxes(weights, -1, -2), G)
        dW = np.matmul(G, np.swapaxes(V, -1, -2))
        dS = weights * (dW - (dW * weights).sum(axis=-1, keepdims=True)) * scale
        out._send(q, merge(np.matmul(dS, K)))
        out._send(k, merge(np.matmul(np.swapaxes(dS, -1, -2), Q)))
        out._send(v, merge(dV))

    out._backward = backward
    return out


def feed_forward(x: Tensor, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor) -> Tensor:
    """Position-wise GELU MLP: (gelu(x W1 + b1)) W2 + b2."""
    hidden = gelu(add(matmul(x, w1), b1))
    return add(matmul(hidden, w2), b2)
