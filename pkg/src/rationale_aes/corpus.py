"""Essay corpus ingestion, resolution scoring, splits, and summary stats.

The input file follows the public ASAP release schema: tab-separated,
header line, with `essay_id`, `essay_set`, `essay`, `rater1_domain1`,
`rater2_domain1`, `domain1_score` columns. Some rows carry non-UTF-8
bytes; these are decoded with replacement characters rather than
rejected.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "CorpusError",
    "EssayRecord",
    "SplitAssignment",
    "ScoreHistogram",
    "load_corpus",
    "split",
    "score_distribution",
    "length_stats",
    "write_split_manifest",
    "read_split_manifest",
    "SPLIT_NAMES",
    "SCORE_RANGE",
]

SPLIT_NAMES = ("train", "val", "test")
SCORE_RANGE = 5  # holistic scores 0..4

_REQUIRED_COLUMNS = (
    "essay_id",
    "essay_set",
    "essay",
    "rater1_domain1",
    "rater2_domain1",
    "domain1_score",
)


class CorpusError(ValueError):
    """Malformed or unusable corpus input; message carries file context."""


@dataclass(frozen=True)
class EssayRecord:
    """One student essay with two rater scores and a resolution score.

    The resolution score is the higher of the two ratings.
    """

    essay_id: int
    prompt_id: int
    text: str
    rater1_score: int
    rater2_score: int
    resolution_score: int

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError(f"essay {self.essay_id}: empty text")
        for name in ("rater1_score", "rater2_score", "resolution_score"):
            v = getattr(self, name)
            if not 0 <= v < SCORE_RANGE:
                raise ValueError(f"essay {self.essay_id}: {name}={v} outside 0-4")
        if self.resolution_score != max(self.rater1_score, self.rater2_score):
            raise ValueError(
                f"essay {self.essay_id}: resolution must be the higher rating"
            )

    @property
    def word_count(self) -> int:
        return len(self.text.split())


@dataclass(frozen=True)
class SplitAssignment:
    """Deterministic essay_id -> split-name partition keyed by a seed."""

    assignment: dict[int, str]
    seed: int

    def ids(self, name: str) -> list[int]:
        if name not in SPLIT_NAMES:
            raise ValueError(f"unknown split {name!r}")
        return sorted(e for e, s in self.assignment.items() if s == name)

    def sizes(self) -> tuple[int, int, int]:
        return tuple(len(self.ids(name)) for name in SPLIT_NAMES)


@dataclass(frozen=True)
class ScoreHistogram:
    counts: tuple[int, ...]

    @property
    def percents(self) -> tuple[float, ...]:
        total = sum(self.counts)
        return tuple(100.0 * c / total for c in self.counts)


def _parse_int(value: str, line_no: int, column: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise CorpusError(
            f"line {line_no}: column {column!r} is not an integer: {value!r}"
        ) from None


def load_corpus(path: str | Path, prompt_filter: int = 6) -> list[EssayRecord]:
    """Load ASAP-schema essays, keep one prompt, compute resolution scores."""
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    with open(path, encoding="utf-8", errors="replace", newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CorpusError(f"{path}: empty file")
    header = lines[0].split("\t")
    col = {name: i for i, name in enumerate(header)}
    missing = [c for c in _REQUIRED_COLUMNS if c not in col]
    if missing:
        raise CorpusError(f"{path}: missing columns {missing}")

    records: list[EssayRecord] = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != len(header):
            raise CorpusError(
                f"line {line_no}: expected {len(header)} columns, got {len(fields)}"
            )
        if _parse_int(fields[col["essay_set"]], line_no, "essay_set") != prompt_filter:
            continue
        r1 = _parse_int(fields[col["rater1_domain1"]], line_no, "rater1_domain1")
        r2 = _parse_int(fields[col["rater2_domain1"]], line_no, "rater2_domain1")
        for name, v in (("rater1_domain1", r1), ("rater2_domain1", r2)):
            if not 0 <= v < SCORE_RANGE:
                raise CorpusError(f"line {line_no}: {name}={v} outside 0-4")
        text = fields[col["essay"]].strip()
        if not text:
            raise CorpusError(f"line {line_no}: empty essay text")
        records.append(
            EssayRecord(
                essay_id=_parse_int(fields[col["essay_id"]], line_no, "essay_id"),
                prompt_id=prompt_filter,
                text=text,
                rater1_score=r1,
                rater2_score=r2,
                resolution_score=max(r1, r2),
            )
        )
    if not records:
        raise CorpusError(f"{path}: no rows with essay_set == {prompt_filter}")
    return records


def split(
    corpus: Sequence[EssayRecord],
    seed: int,
    ratios: tuple[float, float, float] = (0.70, 0.10, 0.20),
) -> SplitAssignment:
    """Seeded uniform shuffle, then contiguous train/val/test slices.

    Val and test sizes are floored; leftover rows go to train, so 1800
    essays at (0.70, 0.10, 0.20) give exactly 1260/180/360.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    n = len(corpus)
    if n < 3:
        raise ValueError("need at least 3 essays to split")
    n_val = int(n * ratios[1])
    n_test = int(n * ratios[2])
    n_train = n - n_val - n_test

    ids = sorted(r.essay_id for r in corpus)
    if len(set(ids)) != n:
        raise ValueError("duplicate essay_id in corpus")
    random.Random(seed).shuffle(ids)
    assignment = {e: "train" for e in ids[:n_train]}
    assignment.update({e: "val" for e in ids[n_train : n_train + n_val]})
    assignment.update({e: "test" for e in ids[n_train + n_val :]})
    return SplitAssignment(assignment=assignment, seed=seed)


def score_distribution(corpus: Iterable[EssayRecord]) -> ScoreHistogram:
    """Resolution-score histogram over the five score levels."""
    counts = [0] * SCORE_RANGE
    n = 0
    for record in corpus:
        counts[record.resolution_score] += 1
        n += 1
    if n == 0:
        raise ValueError("score_distribution: empty corpus")
    return ScoreHistogram(counts=tuple(counts))


def length_stats(corpus: Sequence[EssayRecord]) -> tuple[int, int, float]:
    """(min, max, mean) essay word counts; words are whitespace runs."""
    if not corpus:
        raise ValueError("length_stats: empty corpus")
    lengths = [r.word_count for r in corpus]
    return min(lengths), max(lengths), sum(lengths) / len(lengths)


def write_split_manifest(assignment: SplitAssignment, path: str | Path) -> None:
    """Write the `essay_id,split` manifest, sorted by essay_id."""
    with open(path, "w", newline="") as fh:
        fh.write("essay_id,split\n")
        for essay_id in sorted(assignment.assignment):
            fh.write(f"{essay_id},{assignment.assignment[essay_id]}\n")


def read_split_manifest(path: str | Path) -> dict[int, str]:
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"split manifest not found: {path}")
    out: dict[int, str] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["essay_id", "split"]:
            raise CorpusError(f"{path}: expected header essay_id,split")
        for row in reader:
            name = row["split"]
            if name not in SPLIT_NAMES:
                raise CorpusError(f"{path}: unknown split {name!r}")
            out[int(row["essay_id"])] = name
    if not out:
        raise CorpusError(f"{path}: empty manifest")
    return out
