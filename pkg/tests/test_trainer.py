"""Tests for the training loop, resume, abort paths and the end-to-end ablation."""
import csv
import dataclasses

import numpy as np
import pytest

from ctc import GlossVocabulary
from data import Batch, Dataset, generate_dataset, write_dataset
from model import COMBINE, CONTEXT, SequenceSample, load_checkpoint, san_forward, total_loss
from training import Trainer, dataset_loss, evaluate_params, train
from training.trainer import BEST_CHECKPOINT, CONFIG_FILE, LAST_CHECKPOINT, METRICS_FILE
from utils import Config, GeneratorConfig, RunStatistics, SanConfig, Variant
from utils.errors import ConfigError, TrainingAbortedError

from conftest import make_params, make_run_config, make_tiny_config


@pytest.fixture
def dev_dataset(small_generator_config):
    return generate_dataset(dataclasses.replace(small_generator_config, samples=4, seed=9, split="dev"))


def _params_equal(a, b):
    for name, tensor in a.named_parameters().items():
        np.testing.assert_array_equal(tensor.data, b.named_parameters()[name].data, err_msg=name)


class TestTrainer:

    def test_loss_decreases(self, tmp_path, small_dataset, dev_dataset):
        trainer = Trainer(make_run_config(epochs=3), small_dataset, dev_dataset, tmp_path)
        before, _ = dataset_loss(trainer.params, trainer.model_config, small_dataset)
        trainer.run()
        after, _ = dataset_loss(trainer.params, trainer.model_config, small_dataset)
        assert after < before

    def test_run_writes_artifacts(self, tmp_path, small_dataset, dev_dataset):
        report = Trainer(make_run_config(epochs=2), small_dataset, dev_dataset, tmp_path).run()
        assert [r.epoch for r in report.epochs] == [1, 2]
        assert report.decoding_head == COMBINE
        assert set(report.epochs[0].dev_wer) == {"context", "hand", "combine"}
        for name in (BEST_CHECKPOINT, LAST_CHECKPOINT, METRICS_FILE, CONFIG_FILE, RunStatistics.DB_FILE):
            assert (tmp_path / name).exists(), name

        with open(tmp_path / METRICS_FILE, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0][:3] == ["epoch", "train_loss", "train_perplexity"]
        assert len(rows) == 3
        assert sum(int(row[-1]) for row in rows[1:]) == 1

        assert load_checkpoint(tmp_path / LAST_CHECKPOINT).meta["epoch"] == "2"
        assert load_checkpoint(tmp_path / BEST_CHECKPOINT).meta["epoch"] == str(report.best_epoch)
        assert [r.epoch for r in RunStatistics(tmp_path).get_history()] == [1, 2]
        assert Config(tmp_path / CONFIG_FILE).train.epochs == 2

    def test_deterministic(self, tmp_path, small_dataset, dev_dataset):
        first = Trainer(make_run_config(epochs=2), small_dataset, dev_dataset, tmp_path / "a")
        second = Trainer(make_run_config(epochs=2), small_dataset, dev_dataset, tmp_path / "b")
        report_a, report_b = first.run(), second.run()
        _params_equal(first.params, second.params)
        assert report_a.epochs == report_b.epochs

    def test_resume_matches_uninterrupted_run(self, tmp_path, small_dataset, dev_dataset):
        straight = Trainer(make_run_config(epochs=3), small_dataset, dev_dataset, tmp_path / "straight")
        straight_report = straight.run()

        Trainer(make_run_config(epochs=1), small_dataset, dev_dataset, tmp_path / "split").run()
        resumed = Trainer(make_run_config(epochs=3), small_dataset, dev_dataset, tmp_path / "split")
        resumed.resume(tmp_path / "split" / LAST_CHECKPOINT)
        assert resumed.start_epoch == 2
        steps_per_epoch = resumed.state.step
        report = resumed.run()

        _params_equal(straight.params, resumed.params)
        assert resumed.state.step == straight.state.step == 3 * steps_per_epoch
        assert [r.epoch for r in report.epochs] == [1, 2, 3]
        assert report.best_epoch == straight_report.best_epoch

    def test_resume_rejects_other_model(self, tmp_path, small_dataset, dev_dataset):
        Trainer(make_run_config(epochs=1), small_dataset, dev_dataset, tmp_path / "a").run()
        config = make_run_config(epochs=2)
        config.model.d_ff = 32
        trainer = Trainer(config, small_dataset, dev_dataset, tmp_path / "b")
        with pytest.raises(ConfigError):
            trainer.resume(tmp_path / "a" / LAST_CHECKPOINT)

    def test_batch_loss_is_mean_over_samples(self, tmp_path, small_dataset, dev_dataset):
        sample = small_dataset.samples[0]
        single = Trainer(make_run_config(), small_dataset, dev_dataset, tmp_path / "single")
        double = Trainer(make_run_config(), small_dataset, dev_dataset, tmp_path / "double")
        loss_one, decode_one = single.train_batch(Batch.stack([sample]), np.random.default_rng(0), 1, 1)
        loss_two, decode_two = double.train_batch(Batch.stack([sample, sample]), np.random.default_rng(0), 1, 1)
        assert loss_two == pytest.approx(loss_one)
        assert decode_two == pytest.approx(2 * decode_one)
        for name, tensor in single.active.items():
            np.testing.assert_allclose(double.active[name].grad, tensor.grad, rtol=1e-9, atol=1e-12,
                                       err_msg=name)

    def test_early_stopping(self, tmp_path, small_dataset, dev_dataset):
        config = make_run_config(epochs=10, patience=2, tolerance=1e9)
        report = Trainer(config, small_dataset, dev_dataset, tmp_path).run()
        # Epoch 1 always improves on an infinite best; two stalled epochs follow
        assert report.stopped_early
        assert len(report.epochs) == 3

    def test_context_variant(self, tmp_path, small_dataset, dev_dataset):
        config = make_run_config(epochs=1)
        config.model.variant = Variant.CONTEXT
        trainer = Trainer(config, small_dataset, dev_dataset, tmp_path)
        hand_before = trainer.params.hand_embed.w1.data.copy()
        report = trainer.run()
        assert report.decoding_head == CONTEXT
        assert set(report.epochs[0].dev_wer) == {CONTEXT}
        np.testing.assert_array_equal(trainer.params.hand_embed.w1.data, hand_before)


class TestBatchedEvaluation:

    def test_loss_alone_equals_loss_in_padded_batch(self, small_dataset):
        config = make_tiny_config(vocab_size=4)
        params = make_params(config)
        samples = sorted(small_dataset.samples, key=lambda s: s.context_length)
        short, long = samples[0], samples[-1]
        assert short.context_length < long.context_length
        padded = Batch.stack([short, long]).sample(0)
        alone = total_loss(san_forward(short, params, config), short.target).item()
        inside = total_loss(san_forward(padded, params, config), padded.target).item()
        assert inside == pytest.approx(alone, abs=1e-9)

    def test_wer_does_not_depend_on_batch_size(self, small_dataset):
        config = make_tiny_config(vocab_size=4)
        params = make_params(config, seed=4)
        one = evaluate_params(params, config, small_dataset, beam_width=3, batch_size=1)
        four = evaluate_params(params, config, small_dataset, beam_width=3, batch_size=4)
        assert one.head_wer == four.head_wer
        by_index = {r.index: r.hypotheses for r in four.samples}
        for result in one.samples:
            assert by_index[result.index] == result.hypotheses


class TestAbort:

    def test_non_finite_forward(self, tmp_path, small_dataset, dev_dataset):
        trainer = Trainer(make_run_config(epochs=1), small_dataset, dev_dataset, tmp_path)
        trainer.params.context_embed.w1.data[:] = np.inf
        with pytest.raises(TrainingAbortedError) as exc:
            trainer.run()
        assert exc.value.epoch == 1 and exc.value.batch == 1

    def test_infeasible_target_names_head(self, tmp_path, rng, dev_dataset):
        short_hand = SequenceSample(rng.standard_normal((6, 4)), rng.standard_normal((1, 3)), [1, 2])
        train_set = Dataset([short_hand], GlossVocabulary.synthetic(4))
        with pytest.raises(TrainingAbortedError) as exc:
            Trainer(make_run_config(epochs=1), train_set, dev_dataset, tmp_path).run()
        assert exc.value.head == "hand"

    def test_vocabulary_mismatch(self, tmp_path, small_dataset, dev_dataset):
        config = make_run_config()
        config.model.vocab_size = 5
        with pytest.raises(ConfigError):
            Trainer(config, small_dataset, dev_dataset, tmp_path)

    def test_frame_width_mismatch(self, tmp_path, small_dataset, dev_dataset):
        config = make_run_config()
        config.model.d_in = 6
        with pytest.raises(ConfigError):
            Trainer(config, small_dataset, dev_dataset, tmp_path)


def _write_pair(tmp_path, rho: float):
    base = GeneratorConfig(vocab_size=10, samples=200, rho=rho, sigma=0.3, seed=0)
    train_path, dev_path = tmp_path / "train.sands", tmp_path / "dev.sands"
    write_dataset(generate_dataset(base), train_path)
    write_dataset(generate_dataset(dataclasses.replace(base, samples=50, seed=1, split="dev")), dev_path)
    return train_path, dev_path


def _toy_run_config(variant: Variant, epochs: int) -> Config:
    config = Config()
    config.model = SanConfig.toy()
    config.model.variant = variant
    config.optim.lr = 1e-3
    config.train.epochs = epochs
    return config


@pytest.mark.slow
def test_fused_model_learns_the_toy_task(tmp_path):
    train_path, dev_path = _write_pair(tmp_path, rho=0.7)
    report = train(_toy_run_config(Variant.RELMASK, 50), train_path, dev_path, tmp_path / "run")
    assert report.best_wer <= 0.05


@pytest.mark.slow
def test_fusion_does_not_lose_to_context_only(tmp_path):
    train_path, dev_path = _write_pair(tmp_path, rho=0.9)
    results = {}
    for variant in Variant:
        report = train(_toy_run_config(variant, 30), train_path, dev_path, tmp_path / variant.value)
        results[variant] = report.best_wer
    assert results[Variant.HAND] <= results[Variant.CONTEXT]
    assert results[Variant.RELMASK] <= results[Variant.CONTEXT]
