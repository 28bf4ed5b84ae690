"""Tests for the vocabulary, CTC loss, its gradient and the enumeration oracle."""
import itertools
import math

import numpy as np
import pytest

from core import Tape, Tensor, backward, grad_check, ops
from ctc import (BLANK_ID, GlossVocabulary, LogProbLattice, collapse, ctc_enumerate_oracle, ctc_loss,
                 ctc_loss_and_grad, ctc_loss_value, min_alignment_length)
from training.verification import ctc_oracle_suite, random_lattice
from utils.errors import ConfigError, ContractError, InfeasibleTargetError, OracleSizeError


class TestVocabulary:

    def test_blank_is_id_zero(self):
        vocab = GlossVocabulary(["HELLO", "WORLD"])
        assert vocab.gloss_of(BLANK_ID) == "<blank>"
        assert vocab.encode(["WORLD", "HELLO"]) == [2, 1]
        assert vocab.decode([1, 2]) == ["HELLO", "WORLD"]
        assert len(vocab) == 3 and vocab.gloss_count == 2

    def test_synthetic_labels(self):
        vocab = GlossVocabulary.synthetic(12)
        assert vocab.labels[0] == "G00" and vocab.labels[-1] == "G11"

    def test_duplicates_and_reserved(self):
        with pytest.raises(ConfigError):
            GlossVocabulary(["A", "A"])
        with pytest.raises(ConfigError):
            GlossVocabulary(["<blank>"])

    def test_unknown_gloss(self):
        with pytest.raises(ConfigError):
            GlossVocabulary(["A"]).id_of("B")


class TestCollapse:

    @pytest.mark.parametrize("path,expected", [
        ([0, 1, 1, 0, 2], [1, 2]),
        ([1, 0, 1], [1, 1]),
        ([1, 1, 1], [1]),
        ([0, 0], []),
        ([], []),
    ])
    def test_collapse(self, path, expected):
        assert collapse(path) == expected

    def test_collapse_is_idempotent_on_outputs(self):
        rng = np.random.default_rng(8)
        checked = 0
        for _ in range(100):
            output = collapse(rng.integers(0, 4, size=int(rng.integers(0, 9))).tolist())
            if any(a == b for a, b in zip(output, output[1:])):
                continue  # a blank-separated repeat merges on a second pass
            assert collapse(output) == output
            checked += 1
        assert checked > 20
        assert collapse(collapse([2, 0, 3, 3, 0, 1])) == [2, 3, 1]

    def test_min_alignment_length(self):
        assert min_alignment_length([1, 2, 3]) == 3
        assert min_alignment_length([1, 1]) == 3
        assert min_alignment_length([]) == 0


class TestLoss:

    def test_single_frame_single_label(self):
        lattice = LogProbLattice.from_array(np.log([[0.25, 0.75]]))
        assert ctc_loss_value(lattice, [1]) == pytest.approx(-math.log(0.75))

    def test_empty_target_is_all_blank_path(self):
        probs = np.array([[0.5, 0.5], [0.2, 0.8]])
        lattice = LogProbLattice.from_array(np.log(probs))
        assert ctc_loss_value(lattice, []) == pytest.approx(-math.log(0.5 * 0.2))

    def test_two_frames_one_label(self):
        # Paths a a, a ε, ε a
        probs = np.array([[0.6, 0.4], [0.6, 0.4]])
        lattice = LogProbLattice.from_array(np.log(probs))
        expected = -math.log(0.4 * 0.4 + 0.4 * 0.6 + 0.6 * 0.4)
        assert ctc_loss_value(lattice, [1]) == pytest.approx(expected)

    def test_infeasible_target(self):
        lattice = LogProbLattice.from_array(np.log(np.full((2, 3), 1 / 3)))
        assert ctc_loss_value(lattice, [1, 1]) == math.inf
        assert ctc_enumerate_oracle(lattice, [1, 1]) == math.inf
        with pytest.raises(InfeasibleTargetError) as exc:
            ctc_loss(lattice, [1, 1])
        assert exc.value.min_length == 3 and exc.value.frames == 2

    def test_target_label_out_of_range(self):
        lattice = LogProbLattice.from_array(np.log(np.full((3, 3), 1 / 3)))
        with pytest.raises(ContractError):
            ctc_loss_value(lattice, [3])
        with pytest.raises(ContractError):
            ctc_loss_value(lattice, [0])

    def test_uniform_lattice_over_count_of_alignments(self):
        steps, labels = 4, 3
        lattice = LogProbLattice.from_array(np.full((steps, labels), -math.log(labels)))
        # Count the alignments of [1, 2] by brute force
        count = sum(1 for p in itertools.product(range(labels), repeat=steps) if collapse(p) == [1, 2])
        assert ctc_loss_value(lattice, [1, 2]) == pytest.approx(-math.log(count / labels ** steps))

    def test_target_probabilities_sum_to_at_most_one(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            steps, labels = int(rng.integers(1, 5)), int(rng.integers(2, 4))
            lattice = random_lattice(rng, steps, labels)
            total = 0.0
            for length in range(steps + 1):
                for target in itertools.product(range(1, labels), repeat=length):
                    total += math.exp(-ctc_loss_value(lattice, list(target)))
            assert total <= 1.0 + 1e-9
            # Every path collapses to exactly one such target
            assert total == pytest.approx(1.0)

    def test_gradient_is_negative_posterior(self, rng):
        lattice = random_lattice(rng, 5, 4)
        _, grad = ctc_loss_and_grad(lattice.frames, [1, 3])
        # Posterior occupancies sum to one per frame
        np.testing.assert_allclose(grad.sum(axis=1), -np.ones(5))
        assert (grad <= 1e-15).all()

    def test_padded_rows_get_zero_gradient(self, rng):
        logits = Tensor(rng.standard_normal((6, 4)), requires_grad=True)
        with Tape() as tape:
            loss = ctc_loss(LogProbLattice(ops.log_softmax_rows(logits), 4), [2, 1])
        backward(tape, loss)
        np.testing.assert_array_equal(logits.grad[4:], 0.0)
        assert np.abs(logits.grad[:4]).sum() > 0

    def test_lattice_length_bounds(self):
        with pytest.raises(ContractError):
            LogProbLattice.from_array(np.zeros((2, 3)), length=3)

    @pytest.mark.parametrize("seed", range(5))
    def test_grad_check_through_log_softmax(self, seed):
        rng = np.random.default_rng(seed)
        target = [1, 2, 2]

        def f(x):
            return ctc_loss(LogProbLattice(ops.log_softmax_rows(x), 6), target)

        assert grad_check(f, Tensor(rng.standard_normal((6, 3)))) < 1e-5


class TestOracle:

    def test_oracle_suite_agrees(self):
        result = ctc_oracle_suite(trials=200, seed=7)
        assert result.passed, result.details
        assert result.trials == 200

    def test_repeated_label_needs_blank(self):
        lattice = LogProbLattice.from_array(np.log(np.full((3, 2), 0.5)))
        # Only a ε a collapses to [1, 1] in three frames
        assert ctc_enumerate_oracle(lattice, [1, 1]) == pytest.approx(-math.log(0.125))
        assert ctc_loss_value(lattice, [1, 1]) == pytest.approx(-math.log(0.125))

    def test_oracle_size_limit(self):
        lattice = LogProbLattice.from_array(np.log(np.full((8, 5), 0.2)))
        with pytest.raises(OracleSizeError):
            ctc_enumerate_oracle(lattice, [1], max_paths=1000)
