"""Tests for the binary dataset container."""
import numpy as np
import pytest

from ctc import GlossVocabulary
from data import Dataset, read_dataset, write_dataset
from data.dataset_io import MAGIC
from model import SequenceSample
from utils.errors import FormatError


class TestDatasetIO:

    def test_round_trip(self, tmp_path, small_dataset):
        path = tmp_path / "train.sands"
        write_dataset(small_dataset, path)
        loaded = read_dataset(path)
        assert loaded == small_dataset
        assert loaded.vocabulary.labels == small_dataset.vocabulary.labels

    def test_vocabulary_order_is_preserved(self, tmp_path, rng):
        vocabulary = GlossVocabulary(["WORLD", "HELLO", "AGAIN"])
        sample = SequenceSample(rng.standard_normal((3, 2)), rng.standard_normal((4, 1)), [3, 1])
        path = tmp_path / "dev.sands"
        write_dataset(Dataset([sample], vocabulary, "dev"), path)
        loaded = read_dataset(path)
        assert loaded.vocabulary.labels == ["WORLD", "HELLO", "AGAIN"]
        assert loaded.vocabulary.decode(loaded.samples[0].target) == ["AGAIN", "WORLD"]
        assert loaded.samples[0].hand_length == 4

    def test_padding_is_not_written(self, tmp_path, rng):
        sample = SequenceSample(np.vstack([np.ones((2, 2)), np.full((3, 2), 9.0)]), np.ones((2, 2)), [1],
                                context_length=2)
        path = tmp_path / "test.sands"
        write_dataset(Dataset([sample], GlossVocabulary.synthetic(1), "test"), path)
        loaded = read_dataset(path).samples[0]
        assert loaded.context_frames.shape == (2, 2)
        np.testing.assert_array_equal(loaded.context_frames, 1.0)

    def test_empty_dev_target_allowed(self, tmp_path, rng):
        sample = SequenceSample(rng.standard_normal((2, 2)), rng.standard_normal((2, 2)), [])
        path = tmp_path / "dev.sands"
        write_dataset(Dataset([sample], GlossVocabulary.synthetic(2), "dev"), path)
        assert read_dataset(path).samples[0].target == []

    def test_truncated_file(self, tmp_path, small_dataset):
        path = tmp_path / "train.sands"
        write_dataset(small_dataset, path)
        path.write_bytes(path.read_bytes()[:-40])
        with pytest.raises(FormatError) as exc:
            read_dataset(path)
        assert exc.value.offset is not None

    def test_bad_magic(self, tmp_path, small_dataset):
        path = tmp_path / "train.sands"
        write_dataset(small_dataset, path)
        path.write_bytes(b"NOTSAN" + path.read_bytes()[len(MAGIC):])
        with pytest.raises(FormatError, match="bad magic"):
            read_dataset(path)

    def test_corrupted_payload(self, tmp_path, small_dataset):
        path = tmp_path / "train.sands"
        write_dataset(small_dataset, path)
        data = bytearray(path.read_bytes())
        data[100] ^= 0x01
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError, match="checksum"):
            read_dataset(path)
