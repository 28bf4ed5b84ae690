"""Two-stream sign attention network: embedders, streams, fusion and CTC heads."""
import logging
from dataclasses import dataclass, field
from typing import Collection, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from core import ops
from core.tensor import Tensor
from ctc.loss import LogProbLattice, ctc_loss
from utils.config import SanConfig, Variant
from utils.errors import ConfigError, DimensionError, InfeasibleTargetError
from .attention import (AttentionMask, AxUnitParams, FeedForwardParams, MultiHeadParams, NormParams,
                        ax_unit, feed_forward, merge_masks, multi_head_attention, named_parameter_dict,
                        norm, padding_mask, positional_encoding, relative_mask)

logger = logging.getLogger(__name__)

CONTEXT = "context"
HAND = "hand"
COMBINE = "combine"
HEADS = (CONTEXT, HAND, COMBINE)

AttentionLog = Dict[str, List[np.ndarray]]


@dataclass(eq=False)
class SequenceSample:
    """Paired context/hand frame sequences with their gloss-id target.

    Frame arrays may carry padding rows beyond ``context_length`` / ``hand_length``.
    """
    context_frames: np.ndarray  # [T x D_in]
    hand_frames: np.ndarray  # [T' x D_in_hand]
    target: List[int]
    context_length: Optional[int] = None
    hand_length: Optional[int] = None

    def __post_init__(self):
        self.context_frames = np.asarray(self.context_frames, dtype=np.float64)
        self.hand_frames = np.asarray(self.hand_frames, dtype=np.float64)
        self.target = [int(t) for t in self.target]
        if self.context_length is None:
            self.context_length = self.context_frames.shape[0]
        if self.hand_length is None:
            self.hand_length = self.hand_frames.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SequenceSample):
            return NotImplemented
        return (self.target == other.target
                and self.context_length == other.context_length
                and self.hand_length == other.hand_length
                and np.array_equal(self.context_frames, other.context_frames)
                and np.array_equal(self.hand_frames, other.hand_frames))

    def trimmed(self) -> "SequenceSample":
        """Copy without padding rows."""
        return SequenceSample(self.context_frames[: self.context_length].copy(),
                              self.hand_frames[: self.hand_length].copy(),
                              list(self.target))


# Parameter groups

@dataclass
class EmbedderParams:
    """Per-frame ``affine -> ReLU -> affine`` map to ``d_model``."""
    w1: Tensor  # [D_in x d_model]
    b1: Tensor
    w2: Tensor  # [d_model x d_model]
    b2: Tensor

    @classmethod
    def create(cls, d_in: int, d_model: int) -> "EmbedderParams":
        return cls(Tensor(np.zeros((d_in, d_model)), requires_grad=True),
                   Tensor(np.zeros(d_model), requires_grad=True),
                   Tensor(np.zeros((d_model, d_model)), requires_grad=True),
                   Tensor(np.zeros(d_model), requires_grad=True))

    def named_parameters(self, prefix: str) -> Iterator[Tuple[str, Tensor]]:
        yield f"{prefix}.w1", self.w1
        yield f"{prefix}.b1", self.b1
        yield f"{prefix}.w2", self.w2
        yield f"{prefix}.b2", self.b2


@dataclass
class FusionParams:
    """Context-Hand attention layer."""
    attention: MultiHeadParams
    query_norm: NormParams
    attended_norm: NormParams
    ffn_norm: NormParams
    ffn: FeedForwardParams

    @classmethod
    def create(cls, config: SanConfig) -> "FusionParams":
        return cls(MultiHeadParams.create(config.d_model, config.heads, config.head_dim),
                   NormParams.create(config.d_model),
                   NormParams.create(config.d_model),
                   NormParams.create(config.d_model),
                   FeedForwardParams.create(config.d_model, config.d_ff))

    def named_parameters(self, prefix: str) -> Iterator[Tuple[str, Tensor]]:
        yield from self.attention.named_parameters(f"{prefix}.attn")
        yield from self.query_norm.named_parameters(f"{prefix}.query_norm")
        yield from self.attended_norm.named_parameters(f"{prefix}.attended_norm")
        yield from self.ffn_norm.named_parameters(f"{prefix}.ffn_norm")
        yield from self.ffn.named_parameters(f"{prefix}.ffn")


@dataclass
class HeadParams:
    """Linear projection to the extended vocabulary."""
    weight: Tensor  # [d_model x |L'|]
    bias: Tensor

    @classmethod
    def create(cls, d_model: int, num_labels: int) -> "HeadParams":
        return cls(Tensor(np.zeros((d_model, num_labels)), requires_grad=True),
                   Tensor(np.zeros(num_labels), requires_grad=True))

    def named_parameters(self, prefix: str) -> Iterator[Tuple[str, Tensor]]:
        yield f"{prefix}.weight", self.weight
        yield f"{prefix}.bias", self.bias


@dataclass
class SanParams:
    """Every parameter of both streams, the fusion layer and the three heads."""
    context_embed: EmbedderParams
    hand_embed: EmbedderParams
    context_layers: List[AxUnitParams]
    hand_layers: List[AxUnitParams]
    fusion: FusionParams
    heads: Dict[str, HeadParams]
    _named: Dict[str, Tensor] = field(default_factory=dict, repr=False)

    @classmethod
    def create(cls, config: SanConfig) -> "SanParams":
        """Allocate zero weights, unit norm gains; see ``xavier_init`` for initialization."""
        config.validate()

        def layers():
            return [AxUnitParams.create(config.d_model, config.heads, config.head_dim, config.d_ff)
                    for _ in range(config.n_layers)]

        return cls(
            context_embed=EmbedderParams.create(config.d_in, config.d_model),
            hand_embed=EmbedderParams.create(config.d_in_hand, config.d_model),
            context_layers=layers(),
            hand_layers=layers(),
            fusion=FusionParams.create(config),
            heads={name: HeadParams.create(config.d_model, config.num_labels) for name in HEADS},
        )

    def groups(self) -> Dict[str, Dict[str, Tensor]]:
        """Parameters by sub-network."""
        def stack(prefix, layers):
            for i, layer in enumerate(layers):
                yield from layer.named_parameters(f"{prefix}.layer{i}")

        return {
            "context_embed": named_parameter_dict(self.context_embed.named_parameters("context_embed")),
            "hand_embed": named_parameter_dict(self.hand_embed.named_parameters("hand_embed")),
            "context_stream": named_parameter_dict(stack("context_stream", self.context_layers)),
            "hand_stream": named_parameter_dict(stack("hand_stream", self.hand_layers)),
            "fusion": named_parameter_dict(self.fusion.named_parameters("fusion")),
            "heads": named_parameter_dict(*(head.named_parameters(f"head.{name}")
                                            for name, head in self.heads.items())),
        }

    def named_parameters(self) -> Dict[str, Tensor]:
        """All parameters in a fixed order, keyed by dotted name."""
        if not self._named:
            for group in self.groups().values():
                self._named.update(group)
        return self._named

    def active_parameters(self, variant: Variant) -> Dict[str, Tensor]:
        """Parameters that receive gradient under ``variant``."""
        if variant.uses_hand:
            return self.named_parameters()
        groups = self.groups()
        active = {}
        active.update(groups["context_embed"])
        active.update(groups["context_stream"])
        active.update({k: v for k, v in groups["heads"].items() if k.startswith(f"head.{CONTEXT}.")})
        return active

    def zero_grad(self) -> None:
        for tensor in self.named_parameters().values():
            tensor.zero_grad()


# Forward pieces

def embed_frames(frames: Union[np.ndarray, Tensor], stream: str, params: SanParams) -> Tensor:
    """Embed each frame to ``d_model`` and add the sinusoidal position table."""
    if stream == CONTEXT:
        p = params.context_embed
    elif stream == HAND:
        p = params.hand_embed
    else:
        raise ConfigError(f"unknown stream {stream!r}")
    x = frames if isinstance(frames, Tensor) else Tensor(frames)
    if x.data.ndim != 2 or x.shape[1] != p.w1.shape[0]:
        raise DimensionError(f"{stream} frames {x.shape} do not match input width {p.w1.shape[0]}")
    hidden = ops.relu(ops.linear(x, p.w1, p.b1))
    embedded = ops.linear(hidden, p.w2, p.b2)
    return ops.add(embedded, positional_encoding(x.shape[0], p.w2.shape[1]))


def _stream_forward(frames: np.ndarray, length: int, stream: str, layers: Sequence[AxUnitParams],
                    params: SanParams, config: SanConfig, pad_mask: Optional[AttentionMask],
                    train_mode: bool, rng: Optional[np.random.Generator],
                    attention_log: Optional[AttentionLog]) -> Tensor:
    x = embed_frames(frames, stream, params)
    steps = x.shape[0]
    mask = pad_mask if pad_mask is not None else padding_mask(steps, steps, length, length)
    for i, layer in enumerate(layers):
        log = attention_log.setdefault(f"{stream}_layer{i}", []) if attention_log is not None else None
        x = ax_unit(x, layer, mask, train_mode, config.dropout, rng, config.ln_eps, log)
    return x


def context_stream_forward(sample: SequenceSample, params: SanParams, config: SanConfig,
                           pad_mask: Optional[AttentionMask] = None, train_mode: bool = False,
                           rng: Optional[np.random.Generator] = None,
                           attention_log: Optional[AttentionLog] = None) -> Tensor:
    """Self-attention encoder over the full-frame sequence."""
    return _stream_forward(sample.context_frames, sample.context_length, CONTEXT, params.context_layers,
                           params, config, pad_mask, train_mode, rng, attention_log)


def hand_stream_forward(sample: SequenceSample, params: SanParams, config: SanConfig,
                        pad_mask: Optional[AttentionMask] = None, train_mode: bool = False,
                        rng: Optional[np.random.Generator] = None,
                        attention_log: Optional[AttentionLog] = None) -> Tensor:
    """Self-attention encoder over the cropped-hand sequence."""
    return _stream_forward(sample.hand_frames, sample.hand_length, HAND, params.hand_layers,
                           params, config, pad_mask, train_mode, rng, attention_log)


def fusion_mask(sample: SequenceSample, config: SanConfig) -> AttentionMask:
    """Hand-query by context-key mask: padding, merged with the relative window when enabled."""
    n_hand, n_context = sample.hand_frames.shape[0], sample.context_frames.shape[0]
    mask = padding_mask(n_hand, n_context, sample.hand_length, sample.context_length)
    if config.variant.uses_relative_mask and config.window is not None:
        mask = merge_masks(mask, relative_mask(n_hand, n_context, config.window))
    return mask


def context_hand_attention(hand_feats: Tensor, context_feats: Tensor, fusion: FusionParams,
                           mask: Optional[AttentionMask] = None, train_mode: bool = False,
                           dropout: float = 0.0, rng: Optional[np.random.Generator] = None,
                           eps: float = 1e-5, attention_log: Optional[List[np.ndarray]] = None) -> Tensor:
    """Hand queries attend over context keys/values.

    The normed hand query attends over the context, the normed result is added
    to the hand features, then a pre-normed feed-forward block follows.
    """
    query = norm(hand_feats, fusion.query_norm, eps)
    attended = multi_head_attention(query, context_feats, fusion.attention, mask, attention_log)
    y = ops.add(hand_feats, ops.dropout(norm(attended, fusion.attended_norm, eps), dropout, rng, train_mode))
    ff = feed_forward(norm(y, fusion.ffn_norm, eps), fusion.ffn, dropout, rng, train_mode)
    return ops.add(y, ops.dropout(ff, dropout, rng, train_mode))


def output_head(features: Tensor, head: HeadParams, length: int) -> LogProbLattice:
    """Linear projection followed by a row log-softmax."""
    return LogProbLattice(ops.log_softmax_rows(ops.linear(features, head.weight, head.bias)), length)


def san_forward(sample: SequenceSample, params: SanParams, config: SanConfig,
                train_mode: bool = False, rng: Optional[np.random.Generator] = None,
                attention_log: Optional[AttentionLog] = None) -> Dict[str, LogProbLattice]:
    """Run the network and return one lattice per present head.

    The context-only variant returns only the context lattice; the fused
    variants return context, hand and combine lattices.
    """
    context_feats = context_stream_forward(sample, params, config, train_mode=train_mode,
                                           rng=rng, attention_log=attention_log)
    lattices = {CONTEXT: output_head(context_feats, params.heads[CONTEXT], sample.context_length)}
    if not config.variant.uses_hand:
        return lattices

    hand_feats = hand_stream_forward(sample, params, config, train_mode=train_mode,
                                     rng=rng, attention_log=attention_log)
    lattices[HAND] = output_head(hand_feats, params.heads[HAND], sample.hand_length)

    log = attention_log.setdefault("fusion", []) if attention_log is not None else None
    fused = context_hand_attention(hand_feats, context_feats, params.fusion, fusion_mask(sample, config),
                                   train_mode, config.dropout, rng, config.ln_eps, log)
    lattices[COMBINE] = output_head(fused, params.heads[COMBINE], sample.hand_length)
    return lattices


def decoding_head(heads: Collection[str]) -> str:
    """The combine head when present, else the context head."""
    return COMBINE if COMBINE in heads else CONTEXT


def head_losses(lattices: Dict[str, LogProbLattice], target: Sequence[int]) -> Dict[str, Tensor]:
    """CTC loss of every present head.

    Raises:
        InfeasibleTargetError: Tagged with the head that cannot fit the target.
    """
    losses = {}
    for name, lattice in lattices.items():
        try:
            losses[name] = ctc_loss(lattice, target)
        except InfeasibleTargetError as e:
            raise e.with_head(name) from None
    return losses


def total_loss(lattices: Dict[str, LogProbLattice], target: Sequence[int]) -> Tensor:
    """Unweighted sum of the CTC losses of all present heads."""
    return ops.total(list(head_losses(lattices, target).values()))
