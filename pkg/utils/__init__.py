"""Utility module for configuration, errors, logging and run persistence."""
from .config import Config, SanConfig, GeneratorConfig, OptimizerConfig, TrainConfig, Variant
from .errors import (SanError, DimensionError, DegenerateRowError, NonFiniteError, ContractError, ConfigError,
                     FormatError, OracleSizeError, InfeasibleTargetError, TrainingAbortedError)
from .logger import setup_logging
from .statistics import EpochRecord, RunStatistics

__all__ = ['Config', 'SanConfig', 'GeneratorConfig', 'OptimizerConfig', 'TrainConfig', 'Variant',
           'SanError', 'DimensionError', 'DegenerateRowError', 'NonFiniteError', 'ContractError', 'ConfigError',
           'FormatError', 'OracleSizeError', 'InfeasibleTargetError', 'TrainingAbortedError',
           'setup_logging', 'EpochRecord', 'RunStatistics']
