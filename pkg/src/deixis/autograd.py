"""Minimal reverse-mode automatic differentiation over numpy float64.

Just the operations the scoring network needs: vector/matrix products,
concatenation, GELU/ReLU, softmax and log-sum-exp, table row lookup, and
dropout.  Values are float64 throughout so analytic gradients can be
compared against central finite differences at tight tolerances.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    """A node in the computation graph."""

    __slots__ = ("value", "grad", "_parents", "_backward", "name")

    def __init__(self, value, parents=(), backward=None, name=""):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __repr__(self):
        return f"Tensor({self.name or self.value.shape}, value={self.value!r})"


def const(value, name="") -> Tensor:
    return Tensor(value, name=name)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.value)
    t.grad += g


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.value + b.value, parents=(a, b))

    def backward(g):
        _accum(a, g)
        _accum(b, g)

    out._backward = backward
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.value - b.value, parents=(a, b))

    def backward(g):
        _accum(a, g)
        _accum(b, -g)

    out._backward = backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of same-shape tensors."""
    out = Tensor(a.value * b.value, parents=(a, b))

    def backward(g):
        _accum(a, g * b.value)
        _accum(b, g * a.value)

    out._backward = backward
    return out


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.value * c, parents=(a,))
    out._backward = lambda g: _accum(a, g * c)
    return out


def add_scalar(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.value + c, parents=(a,))
    out._backward = lambda g: _accum(a, g)
    return out


def matvec(W: Tensor, x: Tensor) -> Tensor:
    out = Tensor(W.value @ x.value, parents=(W, x))

    def backward(g):
        _accum(W, np.outer(g, x.value))
        _accum(x, W.value.T @ g)

    out._backward = backward
    return out


def dot(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.value @ b.value, parents=(a, b))

    def backward(g):
        _accum(a, g * b.value)
        _accum(b, g * a.value)

    out._backward = backward
    return out


def concat(parts: list[Tensor]) -> Tensor:
    out = Tensor(np.concatenate([p.value for p in parts]), parents=tuple(parts))
    sizes = [p.value.shape[0] for p in parts]

    def backward(g):
        off = 0
        for p, n in zip(parts, sizes):
            _accum(p, g[off : off + n])
            off += n

    out._backward = backward
    return out


def stack(scalars: list[Tensor]) -> Tensor:
    out = Tensor(
        np.array([s.value for s in scalars]), parents=tuple(scalars)
    )

    def backward(g):
        for i, s in enumerate(scalars):
            _accum(s, g[i])

    out._backward = backward
    return out


def entry(v: Tensor, i: int) -> Tensor:
    out = Tensor(v.value[i], parents=(v,))

    def backward(g):
        gv = np.zeros_like(v.value)
        gv[i] = g
        _accum(v, gv)

    out._backward = backward
    return out


def row(table: Tensor, i: int) -> Tensor:
    out = Tensor(table.value[i], parents=(table,))

    def backward(g):
        gt = np.zeros_like(table.value)
        gt[i] = g
        _accum(table, gt)

    out._backward = backward
    return out


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.value, 0.0), parents=(x,))
    out._backward = lambda g: _accum(x, g * (x.value > 0.0))
    return out


def gelu(x: Tensor) -> Tensor:
    """Exact GELU: x * Phi(x); smooth, so finite differences track it."""
    cdf = 0.5 * (1.0 + erf(x.value / _SQRT2))
    out = Tensor(x.value * cdf, parents=(x,))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.value * x.value)
    out._backward = lambda g: _accum(x, g * (cdf + x.value * pdf))
    return out


def softmax(v: Tensor) -> Tensor:
    shifted = v.value - v.value.max()
    e = np.exp(shifted)
    s = e / e.sum()
    out = Tensor(s, parents=(v,))

    def backward(g):
        _accum(v, s * (g - float(s @ g)))

    out._backward = backward
    return out


def logsumexp(v: Tensor) -> Tensor:
    m = v.value.max()
    lse = m + np.log(np.exp(v.value - m).sum())
    out = Tensor(lse, parents=(v,))
    soft = np.exp(v.value - lse)
    out._backward = lambda g: _accum(v, g * soft)
    return out


def gather(v: Tensor, idxs: list[int]) -> Tensor:
    idx = np.asarray(idxs, dtype=int)
    out = Tensor(v.value[idx], parents=(v,))

    def backward(g):
        gv = np.zeros_like(v.value)
        np.add.at(gv, idx, g)
        _accum(v, gv)

    out._backward = backward
    return out


def weighted_rows(rows_const: np.ndarray, weights: Tensor) -> Tensor:
    """Weighted sum of constant rows: (k, d) x (k,) -> (d,)."""
    out = Tensor(rows_const.T @ weights.value, parents=(weights,))
    out._backward = lambda g: _accum(weights, rows_const @ g)
    return out


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; pass rate 0 (or skip the call) at inference."""
    if rate <= 0.0:
        return x
    mask = (rng.random(x.value.shape) >= rate) / (1.0 - rate)
    out = Tensor(x.value * mask, parents=(x,))
    out._backward = lambda g: _accum(x, g * mask)
    return out


def sum_tensors(ts: list[Tensor]) -> Tensor:
    total = ts[0]
    for t in ts[1:]:
        total = add(total, t)
    return total


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(node) into .grad over the whole graph."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack_ = [(loss, False)]
    while stack_:
        node, processed = stack_.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack_.append((p, False))

    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
