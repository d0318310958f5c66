"""Fine-tuning loop with best-validation-QWK checkpoint selection."""

from __future__ import annotations

import copy
import random

import numpy as np
import torch
from torch import nn

from .data import DataError, Vocabulary
from .model import POOLING, FAMILY_DIMS, Checkpoint, RegressionScorer
from .spec import TrainSpec

SCORE_MIN, SCORE_MAX = 0.0, 4.0


def clip_scores(values: np.ndarray) -> np.ndarray:
    return np.clip(values, SCORE_MIN, SCORE_MAX)


def validation_qwk(truth, continuous, k: int = 5) -> float:
    """QWK of rounded clipped predictions; degenerate agreement scores -1
    so a constant model never wins checkpoint selection."""
    final = np.floor(clip_scores(np.asarray(continuous)) + 0.5).astype(int)
    truth = np.asarray(truth, dtype=int)
    if np.unique(final).size < 2:
        return -1.0
    observed = np.zeros((k, k))
    np.add.at(observed, (truth, final), 1)
    weights = np.subtract.outer(np.arange(k), np.arange(k)) ** 2 / (k - 1) ** 2
    expected = np.outer(observed.sum(axis=1),
                        observed.sum(axis=0)) / observed.sum()
    denom = float((weights * expected).sum())
    if denom == 0.0:
        return -1.0
    return 1.0 - float((weights * observed).sum()) / denom


def _encode_batch(vocab: Vocabulary, texts, max_len: int) -> torch.Tensor:
    return torch.tensor([vocab.encode(t, max_len) for t in texts],
                        dtype=torch.long)


def _predict(model: RegressionScorer, vocab: Vocabulary, texts,
             max_len: int, batch_size: int = 32) -> np.ndarray:
    model.eval()
    out = []
    with torch.no_grad():
        for start in range(0, len(texts), batch_size):
            batch = _encode_batch(vocab, texts[start:start + batch_size],
                                  max_len)
            out.append(model(batch).numpy())
    return np.concatenate(out)


def train(spec: TrainSpec, texts: dict[int, str], scores: dict[int, int],
          split: dict[int, str]) -> Checkpoint:
    """Fit the regression scorer and keep the epoch with the best
    validation QWK. Inputs longer than spec.max_seq_len are truncated."""
    train_ids = sorted(e for e, s in split.items() if s == "train")
    val_ids = sorted(e for e, s in split.items() if s == "val")
    missing = [e for e in (*train_ids, *val_ids) if e not in texts]
    if missing:
        raise DataError(f"missing input text for essays: {missing[:5]}")
    if not train_ids or not val_ids:
        raise DataError("split must provide train and val essays")

    torch.manual_seed(spec.seed)
    vocab = Vocabulary.build([texts[e] for e in train_ids])
    model = RegressionScorer(len(vocab), spec.model_family, spec.max_seq_len)
    optimizer = torch.optim.AdamW(model.parameters(), lr=spec.learning_rate)
    loss_fn = nn.MSELoss()
    shuffler = random.Random(spec.seed)

    val_texts = [texts[e] for e in val_ids]
    val_truth = [scores[e] for e in val_ids]
    best_qwk = float("-inf")
    best_state = None
    best_epoch = -1
    for epoch in range(spec.epochs):
        model.train()
        order = list(train_ids)
        shuffler.shuffle(order)
        for start in range(0, len(order), spec.batch_size):
            batch_ids = order[start:start + spec.batch_size]
            inputs = _encode_batch(vocab, [texts[e] for e in batch_ids],
                                   spec.max_seq_len)
            targets = torch.tensor([float(scores[e]) for e in batch_ids])
            optimizer.zero_grad()
            loss = loss_fn(model(inputs), targets)
            loss.backward()
            optimizer.step()
        qwk = validation_qwk(val_truth,
                             _predict(model, vocab, val_texts,
                                      spec.max_seq_len))
        if qwk > best_qwk:
            best_qwk = qwk
            best_state = copy.deepcopy(model.state_dict())
            best_epoch = epoch

    return Checkpoint(
        state_dict=best_state,
        vocab=vocab,
        spec=spec,
        val_qwk=best_qwk,
        metadata={
            "pooling": POOLING,
            "dims": FAMILY_DIMS[spec.model_family],
            "best_epoch": best_epoch,
            "vocab_size": len(vocab),
        },
    )


def predict_scores(checkpoint: Checkpoint, texts: dict[int, str],
                   essay_ids) -> dict[int, float]:
    """Clipped continuous scores for the given essays."""
    essay_ids = sorted(essay_ids)
    missing = [e for e in essay_ids if e not in texts]
    if missing:
        raise DataError(f"missing input text for essays: {missing[:5]}")
    model = checkpoint.build_model()
    raw = _predict(model, checkpoint.vocab, [texts[e] for e in essay_ids],
                   checkpoint.spec.max_seq_len)
    clipped = clip_scores(raw)
    return {e: float(v) for e, v in zip(essay_ids, clipped)}
