"""
Sign Attention Network - toy continuous sign recognition

Command-line entry point: data generation, training, evaluation, decoding
and self-checks.
"""
import sys
import os
import argparse
import logging
from pathlib import Path
from typing import List, Optional

# Add project root to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from utils import Config, SanError, Variant, setup_logging

logger = logging.getLogger("san")


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--verbose', action='store_true', help='Log debug messages')

    parser = argparse.ArgumentParser(description="Sign Attention Network - toy continuous sign recognition")
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen-data', parents=[common], help='Generate a synthetic dataset')
    gen.add_argument('--config', type=Path, help='Config file supplying data.* defaults')
    gen.add_argument('--vocab', type=int, help='Gloss vocabulary size')
    gen.add_argument('--samples', type=int, help='Number of samples')
    gen.add_argument('--rho', type=float, help='Share of class signal placed in the hand stream')
    gen.add_argument('--sigma', type=float, help='Frame noise standard deviation')
    gen.add_argument('--seed', type=int, help='Sample seed')
    gen.add_argument('--template-seed', type=int, help='Gloss template seed shared across splits')
    gen.add_argument('--split', choices=['train', 'dev', 'test'], help='Split tag')
    gen.add_argument('--d-in', type=int, help='Context frame width')
    gen.add_argument('--d-in-hand', type=int, help='Hand frame width')
    gen.add_argument('--max-frames', type=int, help='Subsample sequences to at most this many frames')
    gen.add_argument('--center', action='store_true', default=None,
                     help="Subtract each stream's mean frame over the split")
    gen.add_argument('--out', type=Path, required=True, help='Output dataset file')

    tr = commands.add_parser('train', parents=[common], help='Train a model')
    tr.add_argument('--config', type=Path, help='Config file')
    tr.add_argument('--train', type=Path, required=True, help='Training dataset')
    tr.add_argument('--dev', type=Path, required=True, help='Development dataset')
    tr.add_argument('--out', type=Path, required=True, help='Run directory')
    tr.add_argument('--variant', choices=[v.value for v in Variant], help='Model variant')
    tr.add_argument('--seed', type=int, help='Training seed')
    tr.add_argument('--epochs', type=int, help='Maximum number of epochs')
    tr.add_argument('--resume', type=Path, help='Checkpoint to continue from')

    ev = commands.add_parser('eval', parents=[common], help='Evaluate a checkpoint')
    ev.add_argument('--checkpoint', type=Path, required=True)
    ev.add_argument('--data', type=Path, required=True)
    ev.add_argument('--beam', type=int, default=10, help='Beam width (default: 10)')
    ev.add_argument('--report', type=Path, required=True, help='Per-sample CSV report')
    ev.add_argument('--workers', type=int, default=1, help='Decoding threads')
    ev.add_argument('--batch-size', type=int, default=1, help='Samples per padded batch')

    dec = commands.add_parser('decode', parents=[common], help='Decode samples and dump attention')
    dec.add_argument('--checkpoint', type=Path, required=True)
    dec.add_argument('--data', type=Path, required=True)
    dec.add_argument('--dump-attention', type=Path, help='Directory for attention CSVs and heatmaps')
    dec.add_argument('--beam', type=int, default=10, help='Beam width (default: 10)')
    dec.add_argument('--limit', type=int, help='Decode only the first N samples')

    oc = commands.add_parser('oracle-check', parents=[common], help='Run CTC, decoding and gradient checks')
    oc.add_argument('--trials', type=int, default=200, help='Random CTC instances (default: 200)')
    oc.add_argument('--seed', type=int, default=0)

    return parser.parse_args(argv)


class Application:
    """Runs one subcommand."""

    def __init__(self, args: argparse.Namespace):
        self.args = args

    def run(self) -> int:
        handlers = {
            'gen-data': self._gen_data,
            'train': self._train,
            'eval': self._eval,
            'decode': self._decode,
            'oracle-check': self._oracle_check,
        }
        return handlers[self.args.command]()

    def _load_config(self) -> Config:
        return Config(self.args.config) if self.args.config is not None else Config()

    def _gen_data(self) -> int:
        from data import generate_dataset, write_dataset

        config = self._load_config()
        overrides = {
            'data.vocab_size': self.args.vocab,
            'data.samples': self.args.samples,
            'data.rho': self.args.rho,
            'data.sigma': self.args.sigma,
            'data.seed': self.args.seed,
            'data.template_seed': self.args.template_seed,
            'data.split': self.args.split,
            'data.d_in': self.args.d_in,
            'data.d_in_hand': self.args.d_in_hand,
            'data.max_frames': self.args.max_frames,
            'data.center': self.args.center,
        }
        for key, value in overrides.items():
            if value is not None:
                config.set(key, value)
        config.data.validate()

        dataset = generate_dataset(config.data)
        write_dataset(dataset, self.args.out)
        print(f"{self.args.out}: {len(dataset)} {dataset.split} samples, "
              f"{dataset.vocabulary.gloss_count} glosses, {dataset.total_glosses} gloss tokens")
        return 0

    def _train(self) -> int:
        from training import train

        config = self._load_config()
        if self.args.variant is not None:
            config.set('model.variant', self.args.variant)
        if self.args.seed is not None:
            config.set('train.seed', self.args.seed)
        if self.args.epochs is not None:
            config.set('train.epochs', self.args.epochs)
        config.validate()

        report = train(config, self.args.train, self.args.dev, self.args.out, resume=self.args.resume)
        best = report.best
        if best is None:
            print("No epochs trained")
            return 0
        print(f"Best epoch {best.epoch}: {report.decoding_head} dev WER {best.dev_wer[report.decoding_head]:.4f}"
              f" (train perplexity {best.perplexity:.4f}){' [stopped early]' if report.stopped_early else ''}")
        return 0

    def _eval(self) -> int:
        from data import read_dataset
        from model import load_checkpoint
        from training import evaluate

        result = evaluate(load_checkpoint(self.args.checkpoint), read_dataset(self.args.data),
                          beam_width=self.args.beam, workers=self.args.workers,
                          batch_size=self.args.batch_size, report_path=self.args.report)
        for head, value in result.head_wer.items():
            marker = " *" if head == result.decoding_head else ""
            print(f"{head:8s} WER {value:.4f}{marker}")
        if result.perplexity is not None:
            print(f"loss     {result.loss:.4f} perplexity {result.perplexity:.4f}")
        return 0

    def _decode(self) -> int:
        from data import read_dataset
        from model import load_checkpoint
        from training import decode_dataset

        checkpoint = load_checkpoint(self.args.checkpoint)
        results = decode_dataset(checkpoint, read_dataset(self.args.data), beam_width=self.args.beam,
                                 limit=self.args.limit, attention_dir=self.args.dump_attention)
        vocabulary = checkpoint.vocabulary
        for result in results:
            print(f"[{result.index}] ref: {' '.join(vocabulary.decode(result.reference))}")
            for head, ids in result.hypotheses.items():
                print(f"    {head}: {' '.join(vocabulary.decode(ids))}")
        return 0

    def _oracle_check(self) -> int:
        from training import run_oracle_check

        results = run_oracle_check(self.args.trials, self.args.seed)
        for result in results:
            print(result.summary())
        return 0 if all(r.passed for r in results) else 1


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args = parse_args(argv)
    setup_logging(args.verbose)
    try:
        return Application(args).run()
    except SanError as e:
        logger.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
