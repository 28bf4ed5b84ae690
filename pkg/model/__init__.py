"""Sign attention network: attention building blocks, the two-stream model and checkpoints."""
from .attention import (AttentionMask, MultiHeadParams, AxUnitParams, padding_mask, relative_mask,
                        merge_masks, scaled_dot_attention, multi_head_attention, positional_encoding,
                        ax_unit)
from .san import (SequenceSample, SanParams, HEADS, CONTEXT, HAND, COMBINE, embed_frames,
                  context_stream_forward, hand_stream_forward, context_hand_attention, fusion_mask,
                  san_forward, decoding_head, head_losses, total_loss)
from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint

__all__ = ['AttentionMask', 'MultiHeadParams', 'AxUnitParams', 'padding_mask', 'relative_mask',
           'merge_masks', 'scaled_dot_attention', 'multi_head_attention', 'positional_encoding',
           'ax_unit', 'SequenceSample', 'SanParams', 'HEADS', 'CONTEXT', 'HAND', 'COMBINE',
           'embed_frames', 'context_stream_forward', 'hand_stream_forward', 'context_hand_attention',
           'fusion_mask', 'san_forward', 'decoding_head', 'head_losses', 'total_loss',
           'Checkpoint', 'save_checkpoint', 'load_checkpoint']
