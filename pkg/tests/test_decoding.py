"""Tests for greedy, beam-search and exhaustive CTC decoding."""
import math

import numpy as np
import pytest

from ctc import (LogProbLattice, beam_decode, beam_hypothesis, beam_search, ctc_log_likelihood,
                 exhaustive_decode, greedy_decode, max_prefixes)
from training.verification import decoding_suite, random_lattice
from utils.errors import ConfigError, OracleSizeError


def _lattice(probs):
    return LogProbLattice.from_array(np.log(np.asarray(probs, dtype=float)))


class TestGreedy:

    def test_collapses_argmax_path(self):
        lattice = _lattice([[0.1, 0.8, 0.1], [0.1, 0.8, 0.1], [0.7, 0.2, 0.1], [0.1, 0.1, 0.8]])
        assert greedy_decode(lattice) == [1, 2]

    def test_all_blank(self):
        assert greedy_decode(_lattice([[0.9, 0.1], [0.9, 0.1]])) == []

    def test_ties_prefer_smaller_id(self):
        assert greedy_decode(_lattice([[0.2, 0.4, 0.4]])) == [1]

    def test_respects_lattice_length(self):
        frames = np.log(np.array([[0.1, 0.9], [0.9, 0.1], [0.1, 0.9]]))
        assert greedy_decode(LogProbLattice.from_array(frames, length=2)) == [1]


class TestBeamSearch:

    def test_prefix_merging_beats_greedy(self):
        lattice = _lattice([[0.6, 0.4], [0.6, 0.4]])
        assert greedy_decode(lattice) == []
        for width in (2, 3, 10):
            assert beam_decode(lattice, width) == [1]

    def test_merged_score_is_total_probability(self):
        lattice = _lattice([[0.6, 0.4], [0.6, 0.4]])
        hypotheses = dict((tuple(p), s) for p, s in beam_search(lattice, 10))
        assert hypotheses[(1,)] == pytest.approx(math.log(0.64))
        assert hypotheses[()] == pytest.approx(math.log(0.36))

    def test_hypotheses_are_sorted(self, rng):
        scores = [s for _, s in beam_search(random_lattice(rng, 4, 3), 5)]
        assert scores == sorted(scores, reverse=True)

    def test_width_counts_distinct_prefixes(self):
        rng = np.random.default_rng(2)
        for width in (1, 2, 3, 5):
            hypotheses = beam_search(random_lattice(rng, 5, 4), width)
            assert len(hypotheses) == width
            assert len({tuple(p) for p, _ in hypotheses}) == width

    def test_width_one_matches_greedy(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            lattice = random_lattice(rng, int(rng.integers(1, 8)), int(rng.integers(2, 5)))
            assert beam_decode(lattice, 1) == greedy_decode(lattice)

    def test_width_one_follows_greedy_ties(self):
        lattice = _lattice([[0.1, 0.1, 0.8], [0.1, 0.45, 0.45]])
        assert greedy_decode(lattice) == [2, 1]
        assert beam_decode(lattice, 1) == [2, 1]

    def test_probability_never_drops_with_width(self):
        rng = np.random.default_rng(17)
        for trial in range(400):
            lattice = random_lattice(rng, int(rng.integers(2, 6)), int(rng.integers(2, 4)))
            scores = [beam_hypothesis(lattice, width)[1] for width in range(1, 12)]
            for narrow, wide in zip(scores, scores[1:]):
                assert wide >= narrow, f"trial {trial}: {scores}"

    def test_hypothesis_score_is_exact(self, rng):
        lattice = random_lattice(rng, 4, 3)
        decoded, score = beam_hypothesis(lattice, 3)
        assert score == pytest.approx(ctc_log_likelihood(lattice.frames, decoded))

    def test_invalid_width(self):
        with pytest.raises(ConfigError):
            beam_search(_lattice([[0.5, 0.5]]), 0)
        with pytest.raises(ConfigError):
            beam_decode(_lattice([[0.5, 0.5]]), 0)

    def test_empty_lattice(self):
        lattice = LogProbLattice.from_array(np.zeros((3, 2)), length=0)
        assert beam_decode(lattice, 4) == []


class TestExhaustive:

    def test_full_width_beam_matches_exhaustive(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            steps, labels = int(rng.integers(1, 5)), int(rng.integers(2, 4))
            lattice = random_lattice(rng, steps, labels)
            exact, score = exhaustive_decode(lattice)
            best, best_score = beam_search(lattice, max_prefixes(steps, labels))[0]
            assert best == exact
            assert best_score == pytest.approx(score)
            assert beam_decode(lattice, max_prefixes(steps, labels)) == exact

    def test_max_prefixes(self):
        assert max_prefixes(2, 3) == 1 + 2 + 4
        assert max_prefixes(0, 5) == 1

    def test_size_limit(self):
        with pytest.raises(OracleSizeError):
            exhaustive_decode(_lattice(np.full((10, 4), 0.25)), max_paths=100)

    def test_decoding_suite_passes(self):
        result = decoding_suite(trials=40, seed=3)
        assert result.passed, result.details
