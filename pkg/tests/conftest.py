from __future__ import annotations

import random
from pathlib import Path

import numpy as np
import pytest

from rationale_aes.corpus import EssayRecord

# Prompt-6 resolution score frequencies used to sample synthetic truth.
SCORE_COUNTS = (44, 167, 405, 817, 367)

ASAP_HEADER = "\t".join(
    ["essay_id", "essay_set", "essay", "rater1_domain1", "rater2_domain1",
     "domain1_score"]
)


def synthetic_truth(n: int, rng: random.Random) -> list[int]:
    """Sample integer scores from the corpus score distribution."""
    population = [s for s, c in enumerate(SCORE_COUNTS) for _ in range(c)]
    return [rng.choice(population) for _ in range(n)]


def make_corpus_rows(n: int, seed: int = 0, essay_set: int = 6) -> list[str]:
    """TSV rows whose resolution score follows the corpus distribution."""
    rng = random.Random(seed)
    rows = []
    for i, resolution in enumerate(synthetic_truth(n, rng), start=1):
        low = rng.randint(max(0, resolution - 1), resolution)
        r1, r2 = (low, resolution) if rng.random() < 0.5 else (resolution, low)
        words = " ".join(f"w{rng.randint(0, 30)}" for _ in range(rng.randint(3, 60)))
        rows.append(f"{i}\t{essay_set}\t{words}\t{r1}\t{r2}\t{resolution}")
    return rows


def write_corpus_file(path: Path, n: int, seed: int = 0) -> Path:
    path.write_text(ASAP_HEADER + "\n" + "\n".join(make_corpus_rows(n, seed)) + "\n")
    return path


def make_records(scores: list[int], start_id: int = 1) -> list[EssayRecord]:
    return [
        EssayRecord(
            essay_id=start_id + i,
            prompt_id=6,
            text=f"essay number {start_id + i}",
            rater1_score=s,
            rater2_score=s,
            resolution_score=s,
        )
        for i, s in enumerate(scores)
    ]


def noisy_predictions(truth: dict[int, int], sigma: float,
                      rng: np.random.Generator) -> dict[int, float]:
    """Member predictions: truth plus Gaussian noise, clipped to [0, 4]."""
    ids = sorted(truth)
    noise = rng.normal(0.0, sigma, size=len(ids))
    return {e: float(np.clip(truth[e] + n, 0.0, 4.0)) for e, n in zip(ids, noise)}


@pytest.fixture
def corpus_file(tmp_path):
    return write_corpus_file(tmp_path / "corpus.tsv", 120, seed=7)
