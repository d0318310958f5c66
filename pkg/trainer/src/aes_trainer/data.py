"""Corpus, rationale, and split-manifest readers plus a word vocabulary.

These readers consume the scoring pipeline's file formats directly so
the trainer stays decoupled from its implementation: the tab-separated
essay corpus, the `essay_id,split` manifest, and rationale CSVs with at
least `essay_id` and `rationale` columns.
"""

from __future__ import annotations

import csv
from pathlib import Path

PAD, UNK, CLS = 0, 1, 2
SPECIAL_TOKENS = ("[PAD]", "[UNK]", "[CLS]")
SPLIT_NAMES = ("train", "val", "test")


class DataError(ValueError):
    pass


def load_essays(path: str | Path, prompt: int = 6) -> tuple[dict[int, str],
                                                            dict[int, int]]:
    """Read essay text and resolution score keyed by essay id."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus not found: {path}")
    texts: dict[int, str] = {}
    scores: dict[int, int] = {}
    with open(path, encoding="utf-8", errors="replace") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        for row in reader:
            if int(row["essay_set"]) != prompt:
                continue
            essay_id = int(row["essay_id"])
            texts[essay_id] = row["essay"]
            scores[essay_id] = int(row["domain1_score"])
    if not texts:
        raise DataError(f"{path}: no essays for prompt {prompt}")
    return texts, scores


def load_rationales(path: str | Path) -> dict[int, str]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"rationale file not found: {path}")
    out: dict[int, str] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"essay_id", "rationale"} <= set(
                reader.fieldnames):
            raise DataError(f"{path}: need essay_id and rationale columns")
        for row in reader:
            out[int(row["essay_id"])] = row["rationale"]
    if not out:
        raise DataError(f"{path}: no rationales")
    return out


def read_split_manifest(path: str | Path) -> dict[int, str]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"split manifest not found: {path}")
    out: dict[int, str] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["essay_id", "split"]:
            raise DataError(f"{path}: expected header essay_id,split")
        for row in reader:
            if row["split"] not in SPLIT_NAMES:
                raise DataError(f"{path}: unknown split {row['split']!r}")
            out[int(row["essay_id"])] = row["split"]
    if not out:
        raise DataError(f"{path}: empty manifest")
    return out


class Vocabulary:
    """Whitespace word vocabulary built from training text only."""

    def __init__(self, token_to_id: dict[str, int]):
        self.token_to_id = token_to_id

    @classmethod
    def build(cls, texts) -> "Vocabulary":
        seen = sorted({tok for text in texts for tok in text.lower().split()})
        mapping = {tok: i for i, tok in enumerate(SPECIAL_TOKENS)}
        for tok in seen:
            mapping[tok] = len(mapping)
        return cls(mapping)

    def __len__(self) -> int:
        return len(self.token_to_id)

    def encode(self, text: str, max_len: int) -> list[int]:
        """[CLS]-prefixed ids, truncated to max_len, padded with [PAD]."""
        ids = [CLS] + [self.token_to_id.get(tok, UNK)
                       for tok in text.lower().split()]
        ids = ids[:max_len]
        return ids + [PAD] * (max_len - len(ids))
