"""Tests for the synthetic two-stream generator."""
import dataclasses

import numpy as np
import pytest

from ctc import GlossVocabulary, min_alignment_length
from data import (Dataset, GlossTemplates, augment_shift, center_streams, generate_dataset, stream_means,
                  subsample_frames)
from model import SequenceSample
from utils.errors import ConfigError


def _frame_labels(templates: np.ndarray, frames: np.ndarray) -> np.ndarray:
    distances = ((frames[:, None, :] - templates[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(distances, axis=1) + 1


class TestGenerator:

    def test_deterministic_for_fixed_seeds(self, small_generator_config):
        assert generate_dataset(small_generator_config) == generate_dataset(small_generator_config)

    def test_seed_changes_samples(self, small_generator_config):
        other = dataclasses.replace(small_generator_config, seed=4)
        assert generate_dataset(small_generator_config) != generate_dataset(other)

    def test_targets_and_lengths(self, small_dataset, small_generator_config):
        cfg = small_generator_config
        assert len(small_dataset) == cfg.samples
        assert small_dataset.vocabulary.gloss_count == cfg.vocab_size
        for sample in small_dataset.samples:
            assert cfg.min_glosses <= len(sample.target) <= cfg.max_glosses
            assert all(1 <= g <= cfg.vocab_size for g in sample.target)
            assert all(a != b for a, b in zip(sample.target, sample.target[1:]))
            assert sample.context_length == sample.hand_length
            assert sample.context_frames.shape[1] == cfg.d_in
            assert sample.hand_frames.shape[1] == cfg.d_in_hand
            assert sample.context_length >= min_alignment_length(sample.target)

    def test_noiseless_hand_stream_is_template(self, small_generator_config):
        cfg = dataclasses.replace(small_generator_config, rho=1.0, sigma=0.0)
        templates = GlossTemplates.draw(cfg)
        for sample in generate_dataset(cfg, templates).samples:
            labels = _frame_labels(templates.hand, sample.hand_frames)
            first = sample.hand_frames[0]
            np.testing.assert_allclose(first, templates.hand[sample.target[0] - 1])
            # Runs of identical labels collapse to the target
            runs = [int(labels[0])] + [int(b) for a, b in zip(labels, labels[1:]) if a != b]
            assert runs == sample.target

    def test_hand_stream_is_separable_at_low_noise(self, small_generator_config):
        cfg = dataclasses.replace(small_generator_config, rho=0.9, sigma=0.05, samples=30)
        templates = GlossTemplates.draw(cfg)
        correct = total = 0
        for sample in generate_dataset(cfg, templates).samples:
            labels = _frame_labels(templates.hand, sample.hand_frames)
            runs = [int(labels[0])] + [int(b) for a, b in zip(labels, labels[1:]) if a != b]
            correct += runs == sample.target
            total += 1
        assert correct / total >= 0.9

    def test_templates_shared_across_splits(self, small_generator_config):
        dev = dataclasses.replace(small_generator_config, seed=99, split="dev")
        a, b = GlossTemplates.draw(small_generator_config), GlossTemplates.draw(dev)
        np.testing.assert_array_equal(a.hand, b.hand)
        assert generate_dataset(dev).split == "dev"

    def test_invalid_rho(self, small_generator_config):
        with pytest.raises(ConfigError):
            generate_dataset(dataclasses.replace(small_generator_config, rho=1.5))

    def test_too_aggressive_subsampling(self, small_generator_config):
        cfg = dataclasses.replace(small_generator_config, min_glosses=3, max_glosses=3, max_frames=2)
        with pytest.raises(ConfigError):
            generate_dataset(cfg)


class TestTransforms:

    def test_subsample_uses_uniform_stride(self, rng):
        sample = SequenceSample(np.arange(10.0)[:, None], np.arange(10.0)[:, None] * 2, [1])
        reduced = subsample_frames(sample, 4)
        np.testing.assert_array_equal(reduced.context_frames[:, 0], [0, 2, 5, 7])
        np.testing.assert_array_equal(reduced.hand_frames[:, 0], [0, 4, 10, 14])
        assert subsample_frames(sample, 0) is sample
        assert subsample_frames(sample, 20) is sample

    def test_augment_shift_offsets_real_frames_only(self, rng):
        sample = SequenceSample(np.zeros((4, 2)), np.zeros((4, 3)), [1], context_length=3, hand_length=2)
        shifted = augment_shift(sample, rng, 0.5)
        np.testing.assert_array_equal(shifted.context_frames[3], 0.0)
        np.testing.assert_array_equal(shifted.hand_frames[2:], 0.0)
        # One offset vector for every real frame of a stream
        np.testing.assert_array_equal(shifted.context_frames[0], shifted.context_frames[2])
        assert np.abs(shifted.context_frames[0]).sum() > 0
        assert augment_shift(sample, rng, 0.0) is sample

    def test_center_streams_zeroes_the_mean(self, small_dataset):
        centered = center_streams(small_dataset)
        context_mean, hand_mean = stream_means(centered)
        np.testing.assert_allclose(context_mean, 0.0, atol=1e-12)
        np.testing.assert_allclose(hand_mean, 0.0, atol=1e-12)
        assert centered.vocabulary == small_dataset.vocabulary
        assert [s.target for s in centered.samples] == [s.target for s in small_dataset.samples]

    def test_center_streams_with_given_means_skips_padding(self):
        sample = SequenceSample(np.ones((3, 2)), np.full((3, 1), 4.0), [1], context_length=2, hand_length=3)
        dataset = Dataset([sample], GlossVocabulary.synthetic(1))
        centered = center_streams(dataset, (np.array([1.0, 0.5]), np.array([1.0])))
        np.testing.assert_array_equal(centered.samples[0].context_frames, [[0.0, 0.5], [0.0, 0.5], [1.0, 1.0]])
        np.testing.assert_array_equal(centered.samples[0].hand_frames, [[3.0], [3.0], [3.0]])
        np.testing.assert_array_equal(sample.context_frames, 1.0)

    def test_generator_center_option(self, small_generator_config):
        plain = generate_dataset(small_generator_config)
        centered = generate_dataset(dataclasses.replace(small_generator_config, center=True))
        np.testing.assert_allclose(centered.samples[0].hand_frames,
                                   plain.samples[0].hand_frames - stream_means(plain)[1])
