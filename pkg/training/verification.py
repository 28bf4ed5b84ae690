"""Self-checks run by ``oracle-check``: CTC oracle equivalence, decoding and gradients."""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Tuple

import numpy as np

from core import ops
from core.gradcheck import grad_check
from core.tensor import Tensor
from ctc.decoding import beam_decode, beam_hypothesis, beam_search, exhaustive_decode, greedy_decode, max_prefixes
from ctc.loss import LogProbLattice, ctc_enumerate_oracle, ctc_loss, ctc_loss_value
from model.san import SanParams, SequenceSample, san_forward, total_loss
from utils.config import SanConfig, Variant
from .optimizer import xavier_init

logger = logging.getLogger(__name__)

ORACLE_TOLERANCE = 1e-6
OP_GRAD_TOLERANCE = 1e-5
MODEL_GRAD_TOLERANCE = 1e-4


@dataclass
class SuiteResult:
    """Outcome of one verification suite."""
    name: str
    trials: int = 0
    failures: int = 0
    max_error: float = 0.0
    details: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def record(self, error: float, tolerance: float, label: str) -> None:
        self.trials += 1
        if math.isnan(error):
            error = math.inf
        self.max_error = max(self.max_error, error)
        if error >= tolerance:
            self.failures += 1
            self.details.append(f"{label}: error {error:.3g} >= {tolerance:g}")

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: {self.trials} checks, {self.failures} failures, max error {self.max_error:.3g}"


def random_lattice(rng: np.random.Generator, steps: int, labels: int) -> LogProbLattice:
    logits = rng.standard_normal((steps, labels)) * 2.0
    logits -= logits.max(axis=1, keepdims=True)
    return LogProbLattice.from_array(logits - np.log(np.exp(logits).sum(axis=1, keepdims=True)))


def ctc_oracle_suite(trials: int = 200, seed: int = 0) -> SuiteResult:
    """Forward-backward loss against brute-force path enumeration.

    Instances have T <= 6, |L'| <= 5 and |target| <= 3; infeasible targets
    must agree as infinities.
    """
    rng = np.random.default_rng(seed)
    result = SuiteResult("ctc-oracle")
    for trial in range(trials):
        steps = int(rng.integers(1, 7))
        labels = int(rng.integers(2, 6))
        target = rng.integers(1, labels, size=int(rng.integers(0, 4))).tolist()
        lattice = random_lattice(rng, steps, labels)
        fast = ctc_loss_value(lattice, target)
        slow = ctc_enumerate_oracle(lattice, target)
        if math.isinf(fast) or math.isinf(slow):
            error = 0.0 if fast == slow else math.inf
        else:
            error = abs(fast - slow)
        result.record(error, ORACLE_TOLERANCE, f"trial {trial} T={steps} L'={labels} target={target}")
    return result


def decoding_suite(trials: int = 100, seed: int = 0, max_width: int = 6) -> SuiteResult:
    """Full-width beam equals exhaustive decoding; width 1 equals greedy.

    Also checks that the decoded probability never drops as the beam widens,
    and the two-frame lattice where greedy decodes nothing but the summed
    probability favours a single gloss.
    """
    rng = np.random.default_rng(seed)
    result = SuiteResult("decoding")
    for trial in range(trials):
        steps = int(rng.integers(1, 6))
        labels = int(rng.integers(2, 4))
        lattice = random_lattice(rng, steps, labels)

        exact, _ = exhaustive_decode(lattice)
        full = beam_search(lattice, max_prefixes(steps, labels))[0][0]
        result.record(0.0 if full == exact else 1.0, 0.5, f"exact trial {trial}: beam {full} vs {exact}")

        narrow = beam_decode(lattice, 1)
        greedy = greedy_decode(lattice)
        result.record(0.0 if narrow == greedy else 1.0, 0.5, f"greedy trial {trial}: beam {narrow} vs {greedy}")

        scores = [beam_hypothesis(lattice, width)[1] for width in range(1, max_width + 1)]
        drop = max((a - b for a, b in zip(scores, scores[1:])), default=0.0)
        result.record(max(drop, 0.0), 1e-12, f"monotone trial {trial}")

    counterexample = LogProbLattice.from_array(np.log([[0.6, 0.4], [0.6, 0.4]]))
    for width in (2, 3, 10):
        decoded = beam_decode(counterexample, width)
        result.record(0.0 if decoded == [1] else 1.0, 0.5, f"counterexample width {width}: {decoded}")
    return result


def _weighted_sum(out: Tensor, weights: np.ndarray) -> Tensor:
    return ops.sum_all(ops.mul(out, Tensor(weights)))


def op_checks(rng: np.random.Generator) -> Dict[str, Tuple[Callable[[Tensor], Tensor], Tensor]]:
    """One (scalar function, point) pair per differentiable op."""
    m, n, k = 3, 4, 5
    other = Tensor(rng.standard_normal((n, k)))
    row = Tensor(rng.standard_normal(n))
    gain = Tensor(rng.uniform(0.5, 1.5, n))
    bias = Tensor(rng.standard_normal(n))
    w_mn, w_mk, w_nm = (rng.standard_normal(s) for s in ((m, n), (m, k), (n, m)))
    allowed = rng.random((m, n)) < 0.6
    allowed[np.arange(m), rng.integers(0, n, m)] = True
    # Keep relu inputs away from the kink
    kinked = rng.standard_normal((m, n))
    kinked = np.where(np.abs(kinked) < 0.1, 0.5, kinked)
    dropout_seed = int(rng.integers(2 ** 31))
    target = rng.integers(1, n, size=2).tolist()

    return {
        "matmul": (lambda x: _weighted_sum(ops.matmul(x, other), w_mk), Tensor(rng.standard_normal((m, n)))),
        "transpose": (lambda x: _weighted_sum(ops.transpose(x), w_nm), Tensor(rng.standard_normal((m, n)))),
        "add": (lambda x: _weighted_sum(ops.add(x, row), w_mn), Tensor(rng.standard_normal((m, n)))),
        "mul": (lambda x: _weighted_sum(ops.mul(x, x), w_mn), Tensor(rng.standard_normal((m, n)))),
        "scale": (lambda x: _weighted_sum(ops.scale(x, 0.37), w_mn), Tensor(rng.standard_normal((m, n)))),
        "relu": (lambda x: _weighted_sum(ops.relu(x), w_mn), Tensor(kinked)),
        "dropout": (lambda x: _weighted_sum(ops.dropout(x, 0.3, np.random.default_rng(dropout_seed), True), w_mn),
                    Tensor(rng.standard_normal((m, n)))),
        "concat_rows": (lambda x: _weighted_sum(ops.concat_rows([x, x]), np.vstack([w_mn, w_mn * 0.5])),
                        Tensor(rng.standard_normal((m, n)))),
        "concat_cols": (lambda x: _weighted_sum(ops.concat_cols([x, x]), np.hstack([w_mn, -w_mn * 0.3])),
                        Tensor(rng.standard_normal((m, n)))),
        "slice_rows": (lambda x: _weighted_sum(ops.slice_rows(x, 1, 3), w_mn[1:3]),
                       Tensor(rng.standard_normal((m, n)))),
        "masked_softmax_rows": (lambda x: _weighted_sum(ops.masked_softmax_rows(x, allowed), w_mn),
                                Tensor(rng.standard_normal((m, n)))),
        "log_softmax_rows": (lambda x: _weighted_sum(ops.log_softmax_rows(x), w_mn),
                             Tensor(rng.standard_normal((m, n)))),
        "layer_norm": (lambda x: _weighted_sum(ops.layer_norm(x, gain, bias), w_mn),
                       Tensor(rng.standard_normal((m, n)))),
        "layer_norm_gain": (lambda g: _weighted_sum(ops.layer_norm(Tensor(w_mn), g, bias), w_mn),
                            Tensor(rng.uniform(0.5, 1.5, n))),
        "ctc_loss": (lambda x: ctc_loss(LogProbLattice(ops.log_softmax_rows(x), m + 1), target),
                     Tensor(rng.standard_normal((m + 1, n)))),
    }


def op_gradient_suite(seeds: int = 10) -> SuiteResult:
    result = SuiteResult("op-gradients")
    for seed in range(seeds):
        for name, (f, x) in op_checks(np.random.default_rng(seed)).items():
            result.record(grad_check(f, x), OP_GRAD_TOLERANCE, f"{name} seed {seed}")
    return result


def tiny_san_config(variant: Variant = Variant.RELMASK) -> SanConfig:
    """d_model=8, two heads, one layer, three glosses."""
    return SanConfig(d_in=4, d_in_hand=4, d_model=8, heads=2, d_k=4, d_ff=8, n_layers=1,
                     dropout=0.0, window=2, variant=variant, vocab_size=3)


# Representative parameters of every sub-network; checking all of them is needlessly slow
CHECKED_PARAMETERS = (
    "context_embed.w1",
    "hand_embed.b1",
    "context_stream.layer0.attn.head0.w_q",
    "hand_stream.layer0.attn.head1.w_k",
    "context_stream.layer0.norm1.gain",
    "fusion.attn.head0.w_v",
    "fusion.attn.w_o",
    "fusion.ffn.w1",
    "fusion.query_norm.bias",
    "head.combine.weight",
    "head.hand.bias",
)


def model_gradient_suite(seeds: int = 10) -> SuiteResult:
    """End-to-end gradient check of the fused model on T=3 samples."""
    config = tiny_san_config()
    result = SuiteResult("model-gradients")
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        params = SanParams.create(config)
        named = params.named_parameters()
        xavier_init(named, seed)
        for name, tensor in named.items():
            if tensor.data.ndim == 1:
                tensor.data = tensor.data + 0.1 * rng.standard_normal(tensor.shape)
        sample = SequenceSample(rng.standard_normal((3, config.d_in)), rng.standard_normal((3, config.d_in_hand)),
                                rng.integers(1, config.vocab_size + 1, size=2).tolist())

        def loss_fn(_: Tensor) -> Tensor:
            return total_loss(san_forward(sample, params, config), sample.target)

        for name in CHECKED_PARAMETERS:
            result.record(grad_check(loss_fn, named[name]), MODEL_GRAD_TOLERANCE, f"{name} seed {seed}")
        params.zero_grad()
    return result


def run_oracle_check(trials: int = 200, seed: int = 0) -> List[SuiteResult]:
    """Run every suite; each result is also logged."""
    results = [
        ctc_oracle_suite(trials, seed),
        decoding_suite(max(1, trials // 2), seed),
        op_gradient_suite(),
        model_gradient_suite(),
    ]
    for result in results:
        log = logger.info if result.passed else logger.error
        log(result.summary())
        for detail in result.details[:5]:
            logger.error("  %s", detail)
    return results
