"""Sparse interaction regression via iterative hard thresholding with sketched gradients."""
from .atee import AteeParams, TheoryBounds, atee_extract, validate_params
from .config import RunConfig
from .data import DataSet, generate
from .errors import ConfigError, DataError, InthtError, OutputError, SizeError
from .optimizer import intht_run, intht_vr_run
from .tensor import SparseTensor, hard_threshold

__version__ = "0.1.0"

__all__ = [
    "AteeParams", "TheoryBounds", "atee_extract", "validate_params", "RunConfig", "DataSet", "generate",
    "ConfigError", "DataError", "InthtError", "OutputError", "SizeError", "intht_run", "intht_vr_run",
    "SparseTensor", "hard_threshold",
]
