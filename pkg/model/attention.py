"""Scaled dot-product attention, multi-head attention, Ax units and masks."""
import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from core import ops
from core.tensor import Tensor
from utils.errors import ConfigError, DimensionError


@dataclass
class AttentionMask:
    """Allowed key positions per query position.

    ``query_valid`` marks real (non-padding) query rows; a padded query may
    have no allowed key and then attends to nothing.
    """
    allowed: np.ndarray  # bool [n_query x n_key]
    query_valid: Optional[np.ndarray] = None  # bool [n_query]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.allowed.shape

    @classmethod
    def full(cls, n_query: int, n_key: int) -> "AttentionMask":
        return cls(np.ones((n_query, n_key), dtype=bool))

    def merge(self, other: "AttentionMask") -> "AttentionMask":
        return merge_masks(self, other)


def padding_mask(n_query: int, n_key: int, query_length: int, key_length: int) -> AttentionMask:
    """Mask forbidding padded keys and marking padded queries.

    Args:
        n_query: Padded query length.
        n_key: Padded key length.
        query_length: Number of real query rows (a prefix).
        key_length: Number of real key columns (a prefix).
    """
    query_valid = np.arange(n_query) < query_length
    key_valid = np.arange(n_key) < key_length
    return AttentionMask(query_valid[:, None] & key_valid[None, :], query_valid)


def relative_mask(n_query: int, n_key: int, r: int) -> AttentionMask:
    """Band mask allowing key ``k`` for query ``j`` iff ``|j - k| < r``."""
    if r < 1:
        raise ConfigError(f"relative window must be >= 1, got {r}")
    offsets = np.arange(n_query)[:, None] - np.arange(n_key)[None, :]
    return AttentionMask(np.abs(offsets) < r)


def merge_masks(padding: AttentionMask, rel: AttentionMask) -> AttentionMask:
    """Elementwise AND of two masks of equal shape."""
    if padding.shape != rel.shape:
        raise DimensionError(f"cannot merge masks of shapes {padding.shape} and {rel.shape}")
    if padding.query_valid is None:
        query_valid = rel.query_valid
    elif rel.query_valid is None:
        query_valid = padding.query_valid
    else:
        query_valid = padding.query_valid & rel.query_valid
    return AttentionMask(padding.allowed & rel.allowed, query_valid)


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor,
                         mask: Optional[AttentionMask] = None) -> Tuple[Tensor, Tensor]:
    """``softmax(Q K^T / sqrt(d_k)) V`` with masked keys weighted exactly zero.

    Returns:
        (output ``[Tq x d_v]``, weights ``[Tq x Tk]``).
    """
    if q.shape[1] != k.shape[1]:
        raise DimensionError(f"query width {q.shape[1]} does not match key width {k.shape[1]}")
    if k.shape[0] != v.shape[0]:
        raise DimensionError(f"{k.shape[0]} keys but {v.shape[0]} values")
    scores = ops.scale(ops.matmul(q, ops.transpose(k)), 1.0 / math.sqrt(k.shape[1]))
    if mask is None:
        weights = ops.masked_softmax_rows(scores)
    else:
        weights = ops.masked_softmax_rows(scores, mask.allowed, mask.query_valid)
    return ops.matmul(weights, v), weights


@dataclass
class MultiHeadParams:
    """Per-head projections and the shared output projection."""
    w_q: List[Tensor]  # h x [d_model x d_k]
    w_k: List[Tensor]
    w_v: List[Tensor]
    w_o: Tensor  # [h*d_k x d_model]

    @classmethod
    def create(cls, d_model: int, heads: int, d_k: int) -> "MultiHeadParams":
        if heads < 1 or d_k < 1:
            raise ConfigError(f"attention needs heads >= 1 and d_k >= 1, got {heads}, {d_k}")

        def proj():
            return [Tensor(np.zeros((d_model, d_k)), requires_grad=True) for _ in range(heads)]

        return cls(proj(), proj(), proj(), Tensor(np.zeros((heads * d_k, d_model)), requires_grad=True))

    @property
    def heads(self) -> int:
        return len(self.w_q)

    def named_parameters(self, prefix: str) -> Iterator[Tuple[str, Tensor]]:
        for i in range(self.heads):
            yield f"{prefix}.head{i}.w_q", self.w_q[i]
            yield f"{prefix}.head{i}.w_k", self.w_k[i]
            yield f"{prefix}.head{i}.w_v", self.w_v[i]
        yield f"{prefix}.w_o", self.w_o


def multi_head_attention(x_q: Tensor, x_kv: Tensor, p: MultiHeadParams,
                         mask: Optional[AttentionMask] = None,
                         attention_log: Optional[List[np.ndarray]] = None) -> Tensor:
    """Concatenate per-head attention over projected inputs, then project with ``w_o``.

    Args:
        x_q: Query-side sequence ``[Tq x d_model]``.
        x_kv: Key/value-side sequence ``[Tk x d_model]``.
        p: Head projections.
        mask: Optional ``[Tq x Tk]`` mask.
        attention_log: When given, each head's weight matrix is appended to it.
    """
    outputs = []
    for w_q, w_k, w_v in zip(p.w_q, p.w_k, p.w_v):
        head, weights = scaled_dot_attention(
            ops.matmul(x_q, w_q), ops.matmul(x_kv, w_k), ops.matmul(x_kv, w_v), mask
        )
        outputs.append(head)
        if attention_log is not None:
            attention_log.append(weights.numpy())
    merged = outputs[0] if len(outputs) == 1 else ops.concat_cols(outputs)
    return ops.matmul(merged, p.w_o)


def positional_encoding(length: int, d_model: int) -> Tensor:
    """Sinusoidal table: even columns ``sin(pos / 10000^(2i/d))``, odd columns ``cos``."""
    if d_model % 2 != 0:
        raise ConfigError(f"positional encoding needs an even width, got {d_model}")
    position = np.arange(length, dtype=np.float64)[:, None]
    div_term = np.exp(np.arange(0, d_model, 2, dtype=np.float64) * -(math.log(10000.0) / d_model))
    table = np.zeros((length, d_model))
    table[:, 0::2] = np.sin(position * div_term)
    table[:, 1::2] = np.cos(position * div_term)
    return Tensor(table)


@dataclass
class FeedForwardParams:
    """Two-layer position-wise network."""
    w1: Tensor  # [d_model x d_ff]
    b1: Tensor
    w2: Tensor  # [d_ff x d_model]
    b2: Tensor

    @classmethod
    def create(cls, d_model: int, d_ff: int) -> "FeedForwardParams":
        return cls(
            Tensor(np.zeros((d_model, d_ff)), requires_grad=True),
            Tensor(np.zeros(d_ff), requires_grad=True),
            Tensor(np.zeros((d_ff, d_model)), requires_grad=True),
            Tensor(np.zeros(d_model), requires_grad=True),
        )

    def named_parameters(self, prefix: str) -> Iterator[Tuple[str, Tensor]]:
        yield f"{prefix}.w1", self.w1
        yield f"{prefix}.b1", self.b1
        yield f"{prefix}.w2", self.w2
        yield f"{prefix}.b2", self.b2


def feed_forward(x: Tensor, p: FeedForwardParams, dropout: float = 0.0,
                 rng: Optional[np.random.Generator] = None, train_mode: bool = False) -> Tensor:
    hidden = ops.relu(ops.linear(x, p.w1, p.b1))
    hidden = ops.dropout(hidden, dropout, rng, train_mode)
    return ops.linear(hidden, p.w2, p.b2)


@dataclass
class NormParams:
    gain: Tensor
    bias: Tensor

    @classmethod
    def create(cls, d_model: int) -> "NormParams":
        return cls(Tensor(np.ones(d_model), requires_grad=True),
                   Tensor(np.zeros(d_model), requires_grad=True))

    def named_parameters(self, prefix: str) -> Iterator[Tuple[str, Tensor]]:
        yield f"{prefix}.gain", self.gain
        yield f"{prefix}.bias", self.bias


def norm(x: Tensor, p: NormParams, eps: float = 1e-5) -> Tensor:
    return ops.layer_norm(x, p.gain, p.bias, eps)


@dataclass
class AxUnitParams:
    """One encoder block: self-attention and feed-forward, each pre-normed."""
    attention: MultiHeadParams
    ffn: FeedForwardParams
    norm1: NormParams
    norm2: NormParams

    @classmethod
    def create(cls, d_model: int, heads: int, d_k: int, d_ff: int) -> "AxUnitParams":
        return cls(
            MultiHeadParams.create(d_model, heads, d_k),
            FeedForwardParams.create(d_model, d_ff),
            NormParams.create(d_model),
            NormParams.create(d_model),
        )

    def named_parameters(self, prefix: str) -> Iterator[Tuple[str, Tensor]]:
        yield from self.attention.named_parameters(f"{prefix}.attn")
        yield from self.ffn.named_parameters(f"{prefix}.ffn")
        yield from self.norm1.named_parameters(f"{prefix}.norm1")
        yield from self.norm2.named_parameters(f"{prefix}.norm2")


def ax_unit(x: Tensor, p: AxUnitParams, mask: Optional[AttentionMask] = None,
            train_mode: bool = False, dropout: float = 0.0,
            rng: Optional[np.random.Generator] = None, eps: float = 1e-5,
            attention_log: Optional[List[np.ndarray]] = None) -> Tensor:
    """``y = x + MHA(LN(x)); out = y + FFN(LN(y))`` with dropout inside each sublayer."""
    normed = norm(x, p.norm1, eps)
    attended = multi_head_attention(normed, normed, p.attention, mask, attention_log)
    y = ops.add(x, ops.dropout(attended, dropout, rng, train_mode))
    ff = feed_forward(norm(y, p.norm2, eps), p.ffn, dropout, rng, train_mode)
    return ops.add(y, ops.dropout(ff, dropout, rng, train_mode))


def named_parameter_dict(*groups: Iterator[Tuple[str, Tensor]]) -> Dict[str, Tensor]:
    """Flatten ``named_parameters`` iterators into an ordered dict."""
    params: Dict[str, Tensor] = {}
    for group in groups:
        for name, tensor in group:
            tensor.name = name
            params[name] = tensor
    return params
