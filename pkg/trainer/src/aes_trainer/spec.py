"""Training configuration for the encoder fine-tuning jobs."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

MODEL_FAMILIES = (
    "bert-base",
    "deberta-base",
    "deberta-v3-large",
    "distilbert-base",
    "electra-large",
    "roberta-base",
    "roberta-large",
)

INPUT_SOURCES = ("essay", "rationale-A", "rationale-B")

LEARNING_RATES = (1e-5, 2e-5)
EPOCH_CHOICES = (10, 15)
BATCH_SIZES = (4, 8, 16)


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class TrainSpec:
    """One fine-tuning job.

    Hyperparameters must come from the standard grid unless `off_grid`
    is set, which is intended for smoke tests on untrained compact
    models where the grid's learning rates are too small to move.
    """

    model_family: str
    input_source: str
    learning_rate: float = 2e-5
    epochs: int = 10
    batch_size: int = 16
    max_seq_len: int = 512
    seed: int = 0
    off_grid: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.model_family not in MODEL_FAMILIES:
            raise SpecError(f"unknown model family: {self.model_family!r}")
        if self.input_source not in INPUT_SOURCES:
            raise SpecError(f"unknown input source: {self.input_source!r}")
        if self.max_seq_len < 2 or self.max_seq_len > 512:
            raise SpecError("max_seq_len must be in [2, 512]")
        if self.off_grid:
            return
        if self.learning_rate not in LEARNING_RATES:
            raise SpecError(f"learning rate {self.learning_rate} not in grid")
        if self.epochs not in EPOCH_CHOICES:
            raise SpecError(f"epochs {self.epochs} not in grid")
        if self.batch_size not in BATCH_SIZES:
            raise SpecError(f"batch size {self.batch_size} not in grid")


def hyperparameter_grid(model_family: str, input_source: str,
                        seed: int = 0) -> list[TrainSpec]:
    """All 12 grid combinations for one family and input source."""
    return [
        TrainSpec(model_family, input_source, learning_rate=lr,
                  epochs=epochs, batch_size=batch, seed=seed)
        for lr, epochs, batch in itertools.product(
            LEARNING_RATES, EPOCH_CHOICES, BATCH_SIZES)
    ]
