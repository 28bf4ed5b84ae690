"""Synthetic two-stream data: generation, binary storage and batching."""
from .generator import (Dataset, GlossTemplates, generate_dataset, generate_sample, subsample_frames, augment_shift,
                        stream_means, center_streams)
from .dataset_io import write_dataset, read_dataset
from .batching import Batch, make_batches

__all__ = ['Dataset', 'GlossTemplates', 'generate_dataset', 'generate_sample', 'subsample_frames',
           'augment_shift', 'stream_means', 'center_streams', 'write_dataset', 'read_dataset', 'Batch',
           'make_batches']
