"""Optimization, training loop, evaluation and self-verification."""
from .optimizer import OptimState, xavier_init, zero_grad, clip_gradients, adam_step, global_grad_norm
from .metrics import edit_distance, wer, corpus_wer, perplexity, WerCounts
from .evaluator import (EvaluationResult, SampleResult, decode_sample, evaluate_params, evaluate,
                        dataset_loss, write_report, decode_dataset)
from .trainer import Trainer, RunReport, train, write_metrics_csv
from .verification import SuiteResult, run_oracle_check

__all__ = ['OptimState', 'xavier_init', 'zero_grad', 'clip_gradients', 'adam_step', 'global_grad_norm',
           'edit_distance', 'wer', 'corpus_wer', 'perplexity', 'WerCounts',
           'EvaluationResult', 'SampleResult', 'decode_sample', 'evaluate_params', 'evaluate',
           'dataset_loss', 'write_report', 'decode_dataset',
           'Trainer', 'RunReport', 'train', 'write_metrics_csv', 'SuiteResult', 'run_oracle_check']
