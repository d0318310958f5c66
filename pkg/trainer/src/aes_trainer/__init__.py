"""Encoder fine-tuning jobs that emit ensemble member prediction files."""

from .data import DataError, Vocabulary, load_essays, load_rationales, \
    read_split_manifest
from .export import export_predictions
from .model import Checkpoint, RegressionScorer
from .spec import (
    BATCH_SIZES,
    EPOCH_CHOICES,
    INPUT_SOURCES,
    LEARNING_RATES,
    MODEL_FAMILIES,
    SpecError,
    TrainSpec,
    hyperparameter_grid,
)
from .train import predict_scores, train, validation_qwk

__version__ = "0.1.0"
