"""Encoder plus scalar regression head.

All seven families share the BERT encoder topology here, sized per
family and randomly initialized; pretrained weights are not fetched.
The head reads the first-token encoding, which is recorded in the
checkpoint metadata alongside the architecture dimensions.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn
from transformers import BertConfig, BertModel

from .data import PAD, Vocabulary
from .spec import MODEL_FAMILIES, SpecError, TrainSpec

# hidden size, layers, attention heads, intermediate size
FAMILY_DIMS = {
    "bert-base": (64, 2, 2, 128),
    "deberta-base": (64, 2, 2, 128),
    "deberta-v3-large": (96, 3, 3, 192),
    "distilbert-base": (48, 2, 2, 96),
    "electra-large": (96, 3, 3, 192),
    "roberta-base": (64, 2, 2, 128),
    "roberta-large": (96, 3, 3, 192),
}

POOLING = "first_token"


class RegressionScorer(nn.Module):
    def __init__(self, vocab_size: int, family: str, max_seq_len: int):
        super().__init__()
        if family not in MODEL_FAMILIES:
            raise SpecError(f"unknown model family: {family!r}")
        hidden, layers, heads, intermediate = FAMILY_DIMS[family]
        config = BertConfig(
            vocab_size=vocab_size,
            hidden_size=hidden,
            num_hidden_layers=layers,
            num_attention_heads=heads,
            intermediate_size=intermediate,
            max_position_embeddings=max_seq_len,
            pad_token_id=PAD,
        )
        self.encoder = BertModel(config)
        self.head = nn.Linear(hidden, 1)

    def forward(self, input_ids: torch.Tensor) -> torch.Tensor:
        mask = (input_ids != PAD).long()
        hidden = self.encoder(input_ids=input_ids,
                              attention_mask=mask).last_hidden_state
        return self.head(hidden[:, 0, :]).squeeze(-1)


@dataclass
class Checkpoint:
    """Best-validation-QWK model state with enough context to re-score."""

    state_dict: dict
    vocab: Vocabulary
    spec: TrainSpec
    val_qwk: float
    metadata: dict

    def build_model(self) -> RegressionScorer:
        model = RegressionScorer(len(self.vocab), self.spec.model_family,
                                 self.spec.max_seq_len)
        model.load_state_dict(self.state_dict)
        model.eval()
        return model

    def save(self, path) -> None:
        torch.save({
            "state_dict": self.state_dict,
            "vocab": self.vocab.token_to_id,
            "spec": asdict(self.spec),
            "val_qwk": self.val_qwk,
            "metadata": self.metadata,
        }, path)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        blob = torch.load(path, weights_only=False)
        return cls(
            state_dict=blob["state_dict"],
            vocab=Vocabulary(blob["vocab"]),
            spec=TrainSpec(**blob["spec"]),
            val_qwk=blob["val_qwk"],
            metadata=blob["metadata"],
        )
