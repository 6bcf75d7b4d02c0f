"""Minimal reverse-mode automatic differentiation over numpy arrays.

Just enough operator coverage for a recurrent encoder-decoder: elementwise
arithmetic, matmul, gate nonlinearities, gather/slice/concat/stack and a
fused softmax cross-entropy. Graphs are recorded per operation and walked
once, iteratively, by :meth:`Tensor.backward`.

Decoding and plain loss evaluation should run under :func:`no_grad` so no
graph is recorded.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np

from .errors import NumericError

# Grad recording is per-thread: a decode running under no_grad() on one
# server thread must not switch off graph recording for an update running
# concurrently on another.
_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording inside the block (current thread only)."""
    previous = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = previous


def check_finite(array: np.ndarray, context: str) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise NumericError(f"non-finite values in {context}")
    return array


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the shape of its source."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A numpy array plus an optional gradient and backward closure."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph construction -------------------------------------------------

    def _accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        grad = _unbroadcast(np.asarray(grad, dtype=self.data.dtype), self.data.shape)
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    def backward(self) -> None:
        """Backpropagate from this (scalar) tensor through the recorded graph."""
        if not self.requires_grad:
            raise ValueError("backward() on a tensor that does not require grad")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    # -- operators -----------------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        a, b = self, other

        def backward(g):
            a._accumulate(g)
            b._accumulate(g)

        return _result(a.data + b.data, (a, b), backward)

    __radd__ = __add__

    def __neg__(self):
        a = self

        def backward(g):
            a._accumulate(-g)

        return _result(-a.data, (a,), backward)

    def __sub__(self, other):
        other = self._coerce(other)
        a, b = self, other

        def backward(g):
            a._accumulate(g)
            b._accumulate(-g)

        return _result(a.data - b.data, (a, b), backward)

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        other = self._coerce(other)
        a, b = self, other

        def backward(g):
            a._accumulate(g * b.data)
            b._accumulate(g * a.data)

        return _result(a.data * b.data, (a, b), backward)

    __rmul__ = __mul__

    def __matmul__(self, other):
        other = self._coerce(other)
        a, b = self, other
        out = a.data @ b.data

        def backward(g):
            if a.data.ndim == 2 and b.data.ndim == 2:
                a._accumulate(g @ b.data.T)
                b._accumulate(a.data.T @ g)
            elif a.data.ndim == 2 and b.data.ndim == 1:
                a._accumulate(np.outer(g, b.data))
                b._accumulate(a.data.T @ g)
            elif a.data.ndim == 1 and b.data.ndim == 2:
                a._accumulate(b.data @ g)
                b._accumulate(np.outer(a.data, g))
            else:  # 1D @ 1D
                a._accumulate(g * b.data)
                b._accumulate(g * a.data)

        return _result(out, (a, b), backward)

    def tanh(self):
        a = self
        out = np.tanh(a.data)

        def backward(g):
            a._accumulate(g * (1.0 - out * out))

        return _result(out, (a,), backward)

    def sigmoid(self):
        a = self
        with np.errstate(over="ignore"):  # exp overflow saturates to the correct limit
            out = 1.0 / (1.0 + np.exp(-a.data))

        def backward(g):
            a._accumulate(g * out * (1.0 - out))

        return _result(out, (a,), backward)

    def __getitem__(self, key):
        """Row extraction ``t[i]`` or contiguous slicing ``t[a:b]`` on axis 0."""
        a = self
        if isinstance(key, (int, np.integer)):
            index = int(key)

            def backward(g):
                full = np.zeros_like(a.data)
                full[index] = g
                a._accumulate(full)

            return _result(a.data[index], (a,), backward)
        if isinstance(key, slice):
            if key.step is not None and key.step != 1:
                raise ValueError("only unit-step slices are supported")

            def backward(g):
                full = np.zeros_like(a.data)
                full[key] = g
                a._accumulate(full)

            return _result(a.data[key], (a,), backward)
        raise TypeError(f"unsupported index {key!r}")


def _result(data, parents, backward):
    if grad_enabled() and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, backward=backward)
    return Tensor(data)


def parameter(data, dtype=np.float32) -> Tensor:
    """Wrap an array as a trainable leaf tensor."""
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=True)


def concat(tensors: list[Tensor]) -> Tensor:
    """Concatenate 1-D tensors along their only axis."""
    sizes = [t.data.shape[0] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, a, b in zip(tensors, offsets, offsets[1:]):
            t._accumulate(g[a:b])

    return _result(np.concatenate([t.data for t in tensors]), tuple(tensors), backward)


def stack(tensors: list[Tensor]) -> Tensor:
    """Stack equal-length 1-D tensors into a 2-D tensor (rows)."""

    def backward(g):
        for i, t in enumerate(tensors):
            t._accumulate(g[i])

    return _result(np.stack([t.data for t in tensors]), tuple(tensors), backward)


def rows(matrix: Tensor, indices: list[int]) -> Tensor:
    """Gather rows of a 2-D tensor (embedding lookup)."""
    idx = np.asarray(indices, dtype=np.intp)

    def backward(g):
        full = np.zeros_like(matrix.data)
        np.add.at(full, idx, g)
        matrix._accumulate(full)

    return _result(matrix.data[idx], (matrix,), backward)


def gru_cell(gi: Tensor, h: Tensor, w_hh: Tensor, b_hh: Tensor) -> Tensor:
    """One fused GRU step: ``h' = (1-z)*n + z*h`` with gates [r, z, n].

    ``gi`` is the precomputed input projection (3H,), ``h`` the previous
    state (H,). Fusing the cell into one node keeps the recurrence cheap;
    the backward closure implements the full chain rule by hand and is
    covered by the finite-difference tests.
    """
    hd = h.data.shape[0]
    gh = h.data @ w_hh.data + b_hh.data
    # gates: r, z use gi + gh directly; n uses gi_n + r * gh_n
    with np.errstate(over="ignore"):
        r = 1.0 / (1.0 + np.exp(-(gi.data[:hd] + gh[:hd])))
        z = 1.0 / (1.0 + np.exp(-(gi.data[hd : 2 * hd] + gh[hd : 2 * hd])))
    n = np.tanh(gi.data[2 * hd :] + r * gh[2 * hd :])
    out = n + z * (h.data - n)

    def backward(g):
        dz = g * (h.data - n)
        dn = g * (1.0 - z)
        da_n = dn * (1.0 - n * n)
        dgi_n = da_n
        dr = da_n * gh[2 * hd :]
        dgh_n = da_n * r
        da_r = dr * r * (1.0 - r)
        da_z = dz * z * (1.0 - z)
        dgi = np.concatenate([da_r, da_z, dgi_n])
        dgh = np.concatenate([da_r, da_z, dgh_n])
        gi._accumulate(dgi)
        h._accumulate(g * z + w_hh.data @ dgh)
        w_hh._accumulate(np.outer(h.data, dgh))
        b_hh._accumulate(dgh)

    return _result(out, (gi, h, w_hh, b_hh), backward)


def softmax(x: Tensor) -> Tensor:
    """Softmax over a 1-D tensor."""
    shifted = x.data - x.data.max()
    e = np.exp(shifted)
    out = e / e.sum()

    def backward(g):
        x._accumulate(out * (g - np.dot(g, out)))

    return _result(out, (x,), backward)


def log_softmax_np(x: np.ndarray) -> np.ndarray:
    """Numerically stable log-softmax over the last axis (plain numpy)."""
    m = x.max(axis=-1, keepdims=True)
    z = x - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits: Tensor, targets: list[int]) -> Tensor:
    """Mean negative log-likelihood of ``targets`` under row-wise softmax."""
    idx = np.asarray(targets, dtype=np.intp)
    if logits.data.ndim != 2 or idx.shape[0] != logits.data.shape[0]:
        raise ValueError("logits must be [len(targets), vocab]")
    logp = log_softmax_np(logits.data)
    n = idx.shape[0]
    loss = -logp[np.arange(n), idx].mean()

    def backward(g):
        grad = np.exp(logp)
        grad[np.arange(n), idx] -= 1.0
        logits._accumulate(grad * (g / n))

    return _result(np.asarray(loss, dtype=logits.data.dtype), (logits,), backward)
