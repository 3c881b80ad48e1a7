"""Reverse-mode automatic differentiation over dense numpy arrays.

A small tape-based engine: every operation returns a new `Tensor` holding
its forward value and a closure that routes the incoming gradient to the
operation's inputs. Calling `backward()` on a scalar walks the tape in
reverse topological order and accumulates gradients into every tensor
created with `requires_grad=True`.

Values are float64 by default so that finite-difference checks are
reliable; float32 is accepted for faster training at larger scales.
Primitives never produce NaN/Inf from finite inputs: softmax subtracts the
max, sigmoid uses the two-branch form, and `log` rejects non-positive
inputs outright (callers clip first).
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "EmptySourceError",
    "GradReport",
    "constant",
    "parameter",
    "primitive_set",
    "grad_check",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "dot",
    "concat",
    "stack_rows",
    "take_row",
    "pick",
    "sigmoid",
    "tanh",
    "softmax",
    "log",
    "exp",
    "clip",
    "gather_rows",
    "scatter_add",
    "sum_all",
    "mean_all",
    "mean_rows",
    "transpose",
]


class ShapeError(ValueError):
    """Raised when operand shapes are inconsistent with an operation."""


class EmptySourceError(ValueError):
    """Raised when an operation is asked to reduce over an empty source."""


class Tensor:
    """A dense array plus the bookkeeping needed for reverse-mode autodiff."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, parents=(), backward=None, name=None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = parents
        self._backward = backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, seed: float = 1.0) -> None:
        """Propagate gradients from this scalar back through the tape.

        `seed` scales the whole gradient; accumulating several examples
        into shared parameters with seed 1/B averages their gradients.
        """
        if self.data.shape != ():
            raise ShapeError(
                f"backward() requires a scalar root, got shape {self.data.shape}"
            )
        order = _topo_order(self)
        self._accumulate(np.asarray(seed, dtype=self.data.dtype))
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            node._backward(node.grad)
        # Tape nodes are transient; free their gradient buffers but keep
        # gradients on leaves (parameters) for the optimizer.
        for node in order:
            if not node.requires_grad or node._parents:
                node.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{tag})"


def _topo_order(root: Tensor) -> list:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def constant(data, dtype=np.float64, name=None) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=False, name=name)


def parameter(data, dtype=np.float64, name=None) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=True, name=name)


def _needs_grad(*tensors: Tensor) -> bool:
    return any(t.requires_grad or t._parents for t in tensors)


def _make(data, parents, backward, track: bool) -> Tensor:
    if not track:
        return Tensor(data)
    return Tensor(data, requires_grad=False, parents=parents, backward=backward)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `g` down to `shape`, undoing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeError(
            f"{op}: shapes {a.data.shape} and {b.data.shape} are not compatible"
        ) from None


# ---------------------------------------------------------------------------
# arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    out = a.data + b.data
    track = _needs_grad(a, b)

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(g, b.data.shape))

    return _make(out, (a, b), backward, track)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")
    out = a.data - b.data
    track = _needs_grad(a, b)

    def backward(g):
        a._accumulate(_unbroadcast(g, a.data.shape))
        b._accumulate(_unbroadcast(-g, b.data.shape))

    return _make(out, (a, b), backward, track)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")
    out = a.data * b.data
    track = _needs_grad(a, b)

    def backward(g):
        a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(out, (a, b), backward, track)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "div")
    out = a.data / b.data
    track = _needs_grad(a, b)

    def backward(g):
        a._accumulate(_unbroadcast(g / b.data, a.data.shape))
        b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(out, (a, b), backward, track)


def neg(a: Tensor) -> Tensor:
    track = _needs_grad(a)

    def backward(g):
        a._accumulate(-g)

    return _make(-a.data, (a,), backward, track)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy `@` semantics for 2D/2D, 2D/1D and 1D/2D."""
    ad, bd = a.data, b.data
    if ad.ndim == 0 or bd.ndim == 0:
        raise ShapeError("matmul: operands must be at least 1-D")
    if ad.shape[-1] != bd.shape[0]:
        raise ShapeError(
            f"matmul: inner dimensions differ, {ad.shape} @ {bd.shape}"
        )
    out = ad @ bd
    track = _needs_grad(a, b)

    def backward(g):
        if ad.ndim == 2 and bd.ndim == 2:
            a._accumulate(g @ bd.T)
            b._accumulate(ad.T @ g)
        elif ad.ndim == 2 and bd.ndim == 1:
            a._accumulate(np.outer(g, bd))
            b._accumulate(ad.T @ g)
        elif ad.ndim == 1 and bd.ndim == 2:
            a._accumulate(bd @ g)
            b._accumulate(np.outer(ad, g))
        else:  # 1-D @ 1-D
            a._accumulate(g * bd)
            b._accumulate(g * ad)

    return _make(out, (a, b), backward, track)


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 1 or b.data.ndim != 1 or a.data.shape != b.data.shape:
        raise ShapeError(f"dot: need equal-length vectors, got {a.shape} and {b.shape}")
    return matmul(a, b)


# ---------------------------------------------------------------------------
# shaping


def concat(tensors: list, axis: int = 0) -> Tensor:
    if not tensors:
        raise EmptySourceError("concat: no tensors given")
    ndim = tensors[0].data.ndim
    for t in tensors:
        if t.data.ndim != ndim:
            raise ShapeError("concat: rank mismatch between operands")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    track = _needs_grad(*tensors)
    sizes = [t.data.shape[axis] for t in tensors]

    def backward(g):
        start = 0
        for t, size in zip(tensors, sizes):
            sl = [slice(None)] * ndim
            sl[axis] = slice(start, start + size)
            t._accumulate(g[tuple(sl)])
            start += size

    return _make(out, tuple(tensors), backward, track)


def stack_rows(tensors: list) -> Tensor:
    """Stack 1-D tensors of equal length into a matrix, one per row."""
    if not tensors:
        raise EmptySourceError("stack_rows: no tensors given")
    for t in tensors:
        if t.data.ndim != 1 or t.data.shape != tensors[0].data.shape:
            raise ShapeError("stack_rows: operands must be equal-length vectors")
    out = np.stack([t.data for t in tensors], axis=0)
    track = _needs_grad(*tensors)

    def backward(g):
        for i, t in enumerate(tensors):
            t._accumulate(g[i])

    return _make(out, tuple(tensors), backward, track)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose: need a matrix, got shape {a.shape}")
    out = a.data.T.copy()
    track = _needs_grad(a)

    def backward(g):
        a._accumulate(g.T)

    return _make(out, (a,), backward, track)


def take_row(a: Tensor, index: int) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"take_row: need a matrix, got shape {a.shape}")
    if not 0 <= index < a.data.shape[0]:
        raise ShapeError(f"take_row: row {index} out of range for shape {a.shape}")
    out = a.data[index].copy()
    track = _needs_grad(a)

    def backward(g):
        full = np.zeros_like(a.data)
        full[index] = g
        a._accumulate(full)

    return _make(out, (a,), backward, track)


def pick(a: Tensor, index: int) -> Tensor:
    """Select one element of a vector as a scalar."""
    if a.data.ndim != 1:
        raise ShapeError(f"pick: need a vector, got shape {a.shape}")
    if not 0 <= index < a.data.shape[0]:
        raise ShapeError(f"pick: index {index} out of range for shape {a.shape}")
    out = a.data[index].copy()
    track = _needs_grad(a)

    def backward(g):
        full = np.zeros_like(a.data)
        full[index] = g
        a._accumulate(full)

    return _make(out, (a,), backward, track)


# ---------------------------------------------------------------------------
# nonlinearities


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                   np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    track = _needs_grad(a)

    def backward(g):
        a._accumulate(g * out * (1.0 - out))

    return _make(out, (a,), backward, track)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    track = _needs_grad(a)

    def backward(g):
        a._accumulate(g * (1.0 - out * out))

    return _make(out, (a,), backward, track)


def softmax(a: Tensor, mask=None) -> Tensor:
    """Softmax over the final axis of a vector, with optional boolean mask.

    Masked-out entries get exactly zero weight and receive zero gradient.
    """
    x = a.data
    if x.ndim != 1:
        raise ShapeError(f"softmax: need a vector, got shape {x.shape}")
    if x.shape[0] == 0:
        raise EmptySourceError("softmax: empty axis")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise ShapeError(f"softmax: mask shape {mask.shape} != {x.shape}")
        if not mask.any():
            raise EmptySourceError("softmax: mask excludes every position")
        shifted = np.where(mask, x, -np.inf)
        shifted = shifted - shifted[mask].max()
        expd = np.where(mask, np.exp(np.where(mask, shifted, 0.0)), 0.0)
    else:
        shifted = x - x.max()
        expd = np.exp(shifted)
    out = expd / expd.sum()
    track = _needs_grad(a)

    def backward(g):
        inner = (g * out).sum()
        a._accumulate(out * (g - inner))

    return _make(out, (a,), backward, track)


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise ValueError("log: input must be strictly positive; clip first")
    out = np.log(a.data)
    track = _needs_grad(a)

    def backward(g):
        a._accumulate(g / a.data)

    return _make(out, (a,), backward, track)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    track = _needs_grad(a)

    def backward(g):
        a._accumulate(g * out)

    return _make(out, (a,), backward, track)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values into [lo, hi]; gradient passes only where not clamped."""
    out = np.clip(a.data, lo, hi)
    inside = (a.data > lo) & (a.data < hi)
    track = _needs_grad(a)

    def backward(g):
        a._accumulate(g * inside)

    return _make(out, (a,), backward, track)


# ---------------------------------------------------------------------------
# indexed ops


def gather_rows(table: Tensor, ids) -> Tensor:
    """Gather rows of a matrix by integer id (embedding lookup)."""
    if table.data.ndim != 2:
        raise ShapeError(f"gather_rows: need a matrix, got shape {table.shape}")
    idx = np.asarray(ids, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeError("gather_rows: ids must be a flat sequence")
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise ShapeError(
            f"gather_rows: id out of range for {table.data.shape[0]} rows"
        )
    out = table.data[idx]
    track = _needs_grad(table)

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, idx, g)
        table._accumulate(full)

    return _make(out, (table,), backward, track)


def scatter_add(values: Tensor, ids, size: int) -> Tensor:
    """Scatter-add vector entries onto integer slots of a zero vector.

    Total mass is conserved: out.sum() == values.sum() exactly up to
    float addition order.
    """
    if values.data.ndim != 1:
        raise ShapeError(f"scatter_add: need a vector, got shape {values.shape}")
    idx = np.asarray(ids, dtype=np.intp)
    if idx.shape != values.data.shape:
        raise ShapeError(
            f"scatter_add: ids shape {idx.shape} != values shape {values.data.shape}"
        )
    if idx.size and (idx.min() < 0 or idx.max() >= size):
        raise ShapeError(f"scatter_add: id out of range for size {size}")
    out = np.zeros(size, dtype=values.data.dtype)
    np.add.at(out, idx, values.data)
    track = _needs_grad(values)

    def backward(g):
        values._accumulate(g[idx])

    return _make(out, (values,), backward, track)


# ---------------------------------------------------------------------------
# reductions


def sum_all(a: Tensor) -> Tensor:
    out = a.data.sum()
    track = _needs_grad(a)

    def backward(g):
        a._accumulate(np.full_like(a.data, g))

    return _make(out, (a,), backward, track)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    if n == 0:
        raise EmptySourceError("mean_all: empty tensor")
    out = a.data.mean()
    track = _needs_grad(a)

    def backward(g):
        a._accumulate(np.full_like(a.data, g / n))

    return _make(out, (a,), backward, track)


def mean_rows(a: Tensor) -> Tensor:
    """Mean over axis 0 of a matrix (column-wise average)."""
    if a.data.ndim != 2:
        raise ShapeError(f"mean_rows: need a matrix, got shape {a.shape}")
    n = a.data.shape[0]
    if n == 0:
        raise EmptySourceError("mean_rows: no rows")
    out = a.data.mean(axis=0)
    track = _needs_grad(a)

    def backward(g):
        a._accumulate(np.tile(g / n, (n, 1)))

    return _make(out, (a,), backward, track)


def primitive_set() -> dict:
    """Catalog of the differentiable primitives this engine provides."""
    return {
        "add": add,
        "sub": sub,
        "mul": mul,
        "div": div,
        "neg": neg,
        "matmul": matmul,
        "dot": dot,
        "concat": concat,
        "stack_rows": stack_rows,
        "transpose": transpose,
        "take_row": take_row,
        "pick": pick,
        "sigmoid": sigmoid,
        "tanh": tanh,
        "softmax": softmax,
        "log": log,
        "exp": exp,
        "clip": clip,
        "gather_rows": gather_rows,
        "scatter_add": scatter_add,
        "sum_all": sum_all,
        "mean_all": mean_all,
        "mean_rows": mean_rows,
    }


# ---------------------------------------------------------------------------
# gradient verification


@dataclass
class GradReport:
    """Outcome of comparing reverse-mode gradients to central differences."""

    max_rel_err: dict
    max_abs_err: dict
    passed: bool

    def worst(self) -> float:
        return max(self.max_rel_err.values(), default=0.0)


def grad_check(fn, inputs, eps: float = 1e-6, tol: float = 1e-4,
               abs_floor: float = 1e-8) -> GradReport:
    """Compare analytic gradients of `fn()` against central differences.

    `fn` must return a scalar Tensor computed from the given input
    tensors; it is re-evaluated with perturbed input values, so it must
    read `inputs[i].data` afresh on every call. A parameter passes when
    every element's relative error is within `tol` or its absolute error
    is within `abs_floor`.
    """
    for t in inputs:
        t.zero_grad()
    out = fn()
    if out.data.shape != ():
        raise ShapeError("grad_check: function output must be scalar")
    out.backward()
    analytic = []
    for t in inputs:
        analytic.append(np.zeros_like(t.data) if t.grad is None else t.grad.copy())
        t.zero_grad()

    max_rel: dict = {}
    max_abs: dict = {}
    passed = True
    for pi, t in enumerate(inputs):
        name = t.name or f"input{pi}"
        flat = t.data.reshape(-1)
        rel_worst = 0.0
        abs_worst = 0.0
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            f_plus = fn().data.item()
            flat[j] = orig - eps
            f_minus = fn().data.item()
            flat[j] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = analytic[pi].reshape(-1)[j]
            abs_err = abs(a - numeric)
            denom = max(abs(a), abs(numeric), 1e-12)
            rel_err = abs_err / denom
            rel_worst = max(rel_worst, rel_err)
            abs_worst = max(abs_worst, abs_err)
            if rel_err > tol and abs_err > abs_floor:
                passed = False
        max_rel[name] = rel_worst
        max_abs[name] = abs_worst
    return GradReport(max_rel_err=max_rel, max_abs_err=max_abs, passed=passed)
