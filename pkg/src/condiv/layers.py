"""GRU cell and additive attention built from the autodiff primitives."""

from dataclasses import dataclass, fields

import numpy as np

from .autodiff import (
    EmptySourceError,
    ShapeError,
    Tensor,
    add,
    matmul,
    mul,
    parameter,
    sigmoid,
    softmax,
    sub,
    tanh,
    transpose,
)

__all__ = ["GruParams", "gru_cell", "AttentionParams", "additive_attention"]


@dataclass
class GruParams:
    """Gate weights for one GRU direction: update z, reset r, candidate n."""

    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_n: Tensor
    u_n: Tensor
    b_n: Tensor

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng, scale: float = 0.08,
             dtype=np.float64) -> "GruParams":
        def w(rows, cols):
            return parameter(rng.uniform(-scale, scale, (rows, cols)), dtype=dtype)

        def b(n):
            return parameter(np.zeros(n), dtype=dtype)

        return cls(
            w_z=w(hidden_dim, input_dim), u_z=w(hidden_dim, hidden_dim), b_z=b(hidden_dim),
            w_r=w(hidden_dim, input_dim), u_r=w(hidden_dim, hidden_dim), b_r=b(hidden_dim),
            w_n=w(hidden_dim, input_dim), u_n=w(hidden_dim, hidden_dim), b_n=b(hidden_dim),
        )

    def tensors(self) -> list[Tensor]:
        return [getattr(self, f.name) for f in fields(self)]

    @property
    def hidden_dim(self) -> int:
        return self.b_z.data.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_z.data.shape[1]


def gru_cell(x: Tensor, h_prev: Tensor, p: GruParams) -> Tensor:
    """One GRU step: h' = (1 - z) * candidate + z * h_prev."""
    if x.data.ndim != 1 or x.data.shape[0] != p.input_dim:
        raise ShapeError(f"gru_cell: input shape {x.shape}, expected ({p.input_dim},)")
    if h_prev.data.ndim != 1 or h_prev.data.shape[0] != p.hidden_dim:
        raise ShapeError(
            f"gru_cell: state shape {h_prev.shape}, expected ({p.hidden_dim},)"
        )
    z = sigmoid(add(add(matmul(p.w_z, x), matmul(p.u_z, h_prev)), p.b_z))
    r = sigmoid(add(add(matmul(p.w_r, x), matmul(p.u_r, h_prev)), p.b_r))
    n = tanh(add(add(matmul(p.w_n, x), matmul(p.u_n, mul(r, h_prev))), p.b_n))
    one = Tensor(np.ones_like(z.data))
    return add(mul(sub(one, z), n), mul(z, h_prev))


@dataclass
class AttentionParams:
    """Additive scoring head: score_i = v . tanh(Wk key_i + Wq query)."""

    key_w: Tensor
    query_w: Tensor
    score_v: Tensor

    @classmethod
    def init(cls, key_dim: int, query_dim: int, attn_dim: int, rng,
             scale: float = 0.08, dtype=np.float64) -> "AttentionParams":
        return cls(
            key_w=parameter(rng.uniform(-scale, scale, (attn_dim, key_dim)), dtype=dtype),
            query_w=parameter(rng.uniform(-scale, scale, (attn_dim, query_dim)), dtype=dtype),
            score_v=parameter(rng.uniform(-scale, scale, attn_dim), dtype=dtype),
        )

    def tensors(self) -> list[Tensor]:
        return [self.key_w, self.query_w, self.score_v]


def additive_attention(keys: Tensor, query: Tensor, p: AttentionParams, mask=None):
    """Attend over the rows of `keys` [n x key_dim] with a single query.

    Returns (weights, context): weights is a simplex vector over the n
    keys (zero at masked positions) and context is the weight-averaged
    key vector. Raises EmptySourceError when there are no keys; callers
    with optional sources must handle that case themselves.
    """
    if keys.data.ndim != 2:
        raise ShapeError(f"additive_attention: keys must be a matrix, got {keys.shape}")
    n = keys.data.shape[0]
    if n == 0:
        raise EmptySourceError("additive_attention: no keys to attend over")
    if keys.data.shape[1] != p.key_w.data.shape[1]:
        raise ShapeError(
            f"additive_attention: key dim {keys.data.shape[1]} != "
            f"head key dim {p.key_w.data.shape[1]}"
        )
    # scores = tanh(keys Wk^T + (Wq q)^T) v, one score per key row
    projected = add(matmul(keys, transpose(p.key_w)), matmul(p.query_w, query))
    scores = matmul(tanh(projected), p.score_v)
    weights = softmax(scores, mask=mask)
    context = matmul(weights, keys)
    return weights, context
