"""Reverse-mode automatic differentiation on dense float64 arrays.

A small define-by-run engine: ops executed under a live :class:`Tape` append
their output nodes in creation order, and :func:`backward` replays that list
in reverse, which is already a valid topological order. Replays are therefore
deterministic and gradients bit-reproducible for identical tapes.

Only the op set needed by the sequence models lives here: matrix and
elementwise arithmetic, gated-recurrence nonlinearities, row softmaxes,
slicing/gather ops and reductions. Everything is float64; any NaN or Inf
produced by a forward op, or encountered while accumulating gradients, raises
:class:`NonFiniteError` immediately instead of propagating silently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.special import expit

__all__ = [
    "ShapeError",
    "NonFiniteError",
    "Tensor",
    "Tape",
    "as_tensor",
    "add",
    "sub",
    "neg",
    "mul",
    "matmul",
    "concat",
    "narrow",
    "take_rows",
    "repeat_rows",
    "reshape",
    "sigmoid",
    "logsigmoid",
    "tanh",
    "softmax",
    "log_softmax",
    "log",
    "reduce_sum",
    "reduce_mean",
    "reduce_min",
    "forward_op",
    "backward",
    "grad_check",
    "AdamState",
    "adam_step",
]


class ShapeError(ValueError):
    """Operand shapes do not conform to an op's contract."""


class NonFiniteError(FloatingPointError):
    """A forward value or a gradient contains NaN or Inf."""


class Tensor:
    """A dense float64 array, optionally recorded on a :class:`Tape`.

    Tensors returned by ops inherit the tape of their inputs; tensors built
    directly (or via :func:`as_tensor`) are constants and take no gradient.
    After :func:`backward`, ``grad`` holds d(loss)/d(tensor) for every node
    that participated in the loss.
    """

    __slots__ = ("value", "tape", "grad", "name", "_backward")

    def __init__(self, value, tape=None, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.tape = tape
        self.grad = None
        self.name = name
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.value.shape}{tag})"


class Tape:
    """Ordered record of one forward pass.

    ``leaf`` registers a named input (typically a model parameter) whose
    gradient should be reported by :func:`backward`. Node order is creation
    order; it is never re-sorted, which is what makes replays bit-identical.
    """

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.leaves: dict[str, Tensor] = {}

    def leaf(self, name: str, value) -> Tensor:
        if name in self.leaves:
            raise ValueError(f"duplicate leaf name: {name!r}")
        t = Tensor(value, tape=self, name=name)
        self.leaves[name] = t
        self.nodes.append(t)
        return t


def as_tensor(x) -> Tensor:
    """Wrap ``x`` as a constant Tensor (no-op when already a Tensor)."""
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(value: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(f"{op}: non-finite values in forward result")


def _tape_of(op: str, *tensors: Tensor):
    tape = None
    for t in tensors:
        if t.tape is not None:
            if tape is None:
                tape = t.tape
            elif tape is not t.tape:
                raise ValueError(f"{op}: inputs recorded on different tapes")
    return tape


def _make(value: np.ndarray, op: str, *inputs: Tensor) -> Tensor:
    _check_finite(value, op)
    out = Tensor(value, tape=_tape_of(op, *inputs))
    if out.tape is not None:
        out.tape.nodes.append(out)
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.tape is None:
        return
    t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# arithmetic


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        value = a.value + b.value
    except ValueError:
        raise ShapeError(f"add: cannot broadcast {a.shape} with {b.shape}") from None
    out = _make(value, "add", a, b)
    if out.tape is not None:
        def bw(g):
            _accum(a, _unbroadcast(g, a.value.shape))
            _accum(b, _unbroadcast(g, b.value.shape))
        out._backward = bw
    return out


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        value = a.value - b.value
    except ValueError:
        raise ShapeError(f"sub: cannot broadcast {a.shape} with {b.shape}") from None
    out = _make(value, "sub", a, b)
    if out.tape is not None:
        def bw(g):
            _accum(a, _unbroadcast(g, a.value.shape))
            _accum(b, _unbroadcast(-g, b.value.shape))
        out._backward = bw
    return out


def neg(a) -> Tensor:
    a = as_tensor(a)
    out = _make(-a.value, "neg", a)
    if out.tape is not None:
        out._backward = lambda g: _accum(a, -g)
    return out


def mul(a, b) -> Tensor:
    """Elementwise product with numpy broadcasting."""
    a, b = as_tensor(a), as_tensor(b)
    try:
        value = a.value * b.value
    except ValueError:
        raise ShapeError(f"mul: cannot broadcast {a.shape} with {b.shape}") from None
    out = _make(value, "mul", a, b)
    if out.tape is not None:
        def bw(g):
            _accum(a, _unbroadcast(g * b.value, a.value.shape))
            _accum(b, _unbroadcast(g * a.value, b.value.shape))
        out._backward = bw
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    va, vb = a.value, b.value
    if va.ndim != 2 or vb.ndim != 2 or va.shape[1] != vb.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {va.shape} and {vb.shape}")
    out = _make(va @ vb, "matmul", a, b)
    if out.tape is not None:
        def bw(g):
            _accum(a, g @ vb.T)
            _accum(b, va.T @ g)
        out._backward = bw
    return out


# ---------------------------------------------------------------------------
# structure


def concat(parts, axis: int = 1) -> Tensor:
    ts = [as_tensor(p) for p in parts]
    if not ts:
        raise ShapeError("concat: need at least one input")
    try:
        value = np.concatenate([t.value for t in ts], axis=axis)
    except ValueError:
        shapes = [t.shape for t in ts]
        raise ShapeError(f"concat: incompatible shapes {shapes} along axis {axis}") from None
    out = _make(value, "concat", *ts)
    if out.tape is not None:
        sizes = [t.value.shape[axis] for t in ts]
        offsets = np.cumsum([0] + sizes)

        def bw(g):
            for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
                idx = tuple(
                    slice(lo, hi) if i == (axis % g.ndim) else slice(None)
                    for i in range(g.ndim)
                )
                _accum(t, g[idx])
        out._backward = bw
    return out


def narrow(a, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice of ``length`` entries from ``start`` along ``axis``."""
    a = as_tensor(a)
    va = a.value
    if not 0 <= axis < va.ndim:
        raise ShapeError(f"slice: axis {axis} out of range for shape {va.shape}")
    if start < 0 or length < 0 or start + length > va.shape[axis]:
        raise ShapeError(
            f"slice: window [{start}, {start + length}) exceeds axis {axis} "
            f"of shape {va.shape}"
        )
    idx = tuple(
        slice(start, start + length) if i == axis else slice(None)
        for i in range(va.ndim)
    )
    out = _make(va[idx], "slice", a)
    if out.tape is not None:
        def bw(g):
            z = np.zeros_like(va)
            z[idx] = g
            _accum(a, z)
        out._backward = bw
    return out


def take_rows(a, indices) -> Tensor:
    """Gather rows (axis 0) by integer index; duplicates allowed."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError(f"take_rows: indices must be 1-D, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.value.shape[0]):
        raise ShapeError(
            f"take_rows: index out of range for {a.value.shape[0]} rows"
        )
    out = _make(a.value[idx], "take_rows", a)
    if out.tape is not None:
        def bw(g):
            z = np.zeros_like(a.value)
            np.add.at(z, idx, g)
            _accum(a, z)
        out._backward = bw
    return out


def repeat_rows(a, k: int) -> Tensor:
    """Repeat each row ``k`` times: row i maps to rows i*k..i*k+k-1."""
    a = as_tensor(a)
    if k < 1:
        raise ShapeError(f"repeat_rows: k must be >= 1, got {k}")
    va = a.value
    out = _make(np.repeat(va, k, axis=0), "repeat_rows", a)
    if out.tape is not None:
        def bw(g):
            _accum(a, g.reshape(va.shape[0], k, *va.shape[1:]).sum(axis=1))
        out._backward = bw
    return out


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        value = a.value.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}") from None
    out = _make(value, "reshape", a)
    if out.tape is not None:
        out._backward = lambda g: _accum(a, g.reshape(a.value.shape))
    return out


# ---------------------------------------------------------------------------
# nonlinearities


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    y = expit(a.value)
    out = _make(y, "sigmoid", a)
    if out.tape is not None:
        out._backward = lambda g: _accum(a, g * y * (1.0 - y))
    return out


def logsigmoid(a) -> Tensor:
    """log(sigmoid(x)), computed stably as -log(1 + exp(-x))."""
    a = as_tensor(a)
    y = -np.logaddexp(0.0, -a.value)
    out = _make(y, "logsigmoid", a)
    if out.tape is not None:
        out._backward = lambda g: _accum(a, g * expit(-a.value))
    return out


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.value)
    out = _make(y, "tanh", a)
    if out.tape is not None:
        out._backward = lambda g: _accum(a, g * (1.0 - y * y))
    return out


def softmax(a, axis: int = -1) -> Tensor:
    """Row-stochastic softmax along ``axis`` (max-shifted for stability)."""
    a = as_tensor(a)
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = _make(y, "softmax", a)
    if out.tape is not None:
        def bw(g):
            _accum(a, (g - (g * y).sum(axis=axis, keepdims=True)) * y)
        out._backward = bw
    return out


def log_softmax(a, axis: int = -1) -> Tensor:
    """log(softmax(x)) without intermediate underflow (finite for finite x)."""
    a = as_tensor(a)
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    y = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = _make(y, "log_softmax", a)
    if out.tape is not None:
        def bw(g):
            _accum(a, g - np.exp(y) * g.sum(axis=axis, keepdims=True))
        out._backward = bw
    return out


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.value <= 0.0):
        raise NonFiniteError("log: input must be strictly positive")
    out = _make(np.log(a.value), "log", a)
    if out.tape is not None:
        out._backward = lambda g: _accum(a, g / a.value)
    return out


# ---------------------------------------------------------------------------
# reductions


def reduce_sum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    out = _make(a.value.sum(axis=axis), "sum", a)
    if out.tape is not None:
        def bw(g):
            if axis is None:
                _accum(a, np.broadcast_to(g, a.value.shape).copy())
            else:
                _accum(a, np.broadcast_to(np.expand_dims(g, axis), a.value.shape).copy())
        out._backward = bw
    return out


def reduce_mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    count = a.value.size if axis is None else a.value.shape[axis]
    if count == 0:
        raise ShapeError("mean: cannot reduce over an empty axis")
    out = _make(a.value.mean(axis=axis), "mean", a)
    if out.tape is not None:
        def bw(g):
            if axis is None:
                _accum(a, np.broadcast_to(g / count, a.value.shape).copy())
            else:
                _accum(a, np.broadcast_to(np.expand_dims(g, axis) / count, a.value.shape).copy())
        out._backward = bw
    return out


def reduce_min(a, axis: int) -> Tensor:
    """Minimum along ``axis``; the gradient routes to the first minimizer."""
    a = as_tensor(a)
    va = a.value
    if va.shape[axis] == 0:
        raise ShapeError("min: cannot reduce over an empty axis")
    idx = va.argmin(axis=axis)
    value = np.take_along_axis(va, np.expand_dims(idx, axis), axis=axis).squeeze(axis)
    out = _make(value, "min", a)
    if out.tape is not None:
        def bw(g):
            z = np.zeros_like(va)
            np.put_along_axis(z, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
            _accum(a, z)
        out._backward = bw
    return out


# ---------------------------------------------------------------------------
# op registry / dispatch

OPS: Mapping[str, Callable] = {
    "matmul": matmul,
    "add": add,
    "concat": concat,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "softmax": softmax,
    "log": log,
    "mul": mul,
    "slice": narrow,
}


def forward_op(opkind: str, *inputs, **kwargs) -> Tensor:
    """Dispatch an op by kind name (the recorded-op vocabulary)."""
    try:
        fn = OPS[opkind]
    except KeyError:
        raise ValueError(f"unknown op kind {opkind!r}; known: {sorted(OPS)}") from None
    return fn(*inputs, **kwargs)


# ---------------------------------------------------------------------------
# backward / checking


def backward(tape: Tape, loss: Tensor) -> dict[str, np.ndarray]:
    """Accumulate d(loss)/d(leaf) for every leaf registered on ``tape``.

    The loss must be a scalar recorded on ``tape``. Leaves unreachable from
    the loss get zero gradients. Node visitation order is the exact reverse
    of creation order, so identical tapes produce bit-identical gradients.
    """
    if loss.tape is not tape:
        raise ValueError("backward: loss is not recorded on this tape")
    if loss.value.shape != ():
        raise ShapeError(f"backward: loss must be a scalar, got shape {loss.value.shape}")
    for node in tape.nodes:
        node.grad = None
    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(tape.nodes):
        if node.grad is None or node._backward is None:
            continue
        if not np.all(np.isfinite(node.grad)):
            raise NonFiniteError("backward: non-finite gradient encountered")
        node._backward(node.grad)
    return {
        name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value))
        for name, leaf in tape.leaves.items()
    }


def grad_check(f: Callable[[Tensor], Tensor], x, eps: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    ``f`` must map a Tensor to a scalar Tensor. The error for coordinate i is
    |analytic_i - numeric_i| / max(1, |numeric_i|); the maximum over all
    coordinates is returned.
    """
    x = np.asarray(x, dtype=np.float64)
    tape = Tape()
    out = f(tape.leaf("x", x))
    if out.value.shape != ():
        raise ShapeError(f"grad_check: f must return a scalar, got shape {out.value.shape}")
    if out.tape is tape:
        analytic = backward(tape, out)["x"]
    else:
        # f never touched the leaf (constant function): gradient is zero.
        analytic = np.zeros_like(x)

    numeric = np.empty_like(x)
    for i in np.ndindex(x.shape):
        hi = x.copy()
        hi[i] += eps
        lo = x.copy()
        lo[i] -= eps
        numeric[i] = (f(Tensor(hi)).item() - f(Tensor(lo)).item()) / (2.0 * eps)

    err = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
    return float(err.max()) if err.size else 0.0


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: Mapping[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One in-place Adam update with bias correction over named parameters.

    A zero gradient leaves the parameter unchanged; lr = 0 is a bitwise
    no-op on the parameters (moment estimates still advance).
    """
    if lr < 0:
        raise ValueError(f"adam_step: lr must be >= 0, got {lr}")
    for name, p in params.items():
        if name not in grads:
            raise KeyError(f"adam_step: missing gradient for parameter {name!r}")
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(
                f"adam_step: gradient shape {g.shape} != parameter shape "
                f"{p.shape} for {name!r}"
            )
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"adam_step: non-finite gradient for parameter {name!r}")
    state.step += 1
    bc1 = 1.0 - beta1 ** state.step
    bc2 = 1.0 - beta2 ** state.step
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state
