"""Batch LLM scoring client: provider calls, retries, and a resumable journal.

The journal is newline-delimited JSON with one entry per essay; the
latest entry for an essay wins, so restarts skip completed work and only
re-issue calls for pending or failed essays.
"""

from __future__ import annotations

import json
import math
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Sequence

import requests

from .corpus import EssayRecord
from .prompting import ParseError, PromptConfig, build_prompt, parse_response

__all__ = [
    "RationaleRecord",
    "RationaleStats",
    "BatchJournal",
    "JournalError",
    "ProviderError",
    "HttpChatProvider",
    "run_batch",
    "rationale_stats",
    "write_rationale_csv",
    "read_rationale_csv",
    "TOKEN_LIMIT",
    "TOKENS_PER_WORD",
]

# Fixed word-to-token ratio: the over-limit flag must be deterministic
# without binding this client to any consumer model's tokenizer.
TOKENS_PER_WORD = 1.35
TOKEN_LIMIT = 512

Provider = Callable[[str, float], str]


class ProviderError(RuntimeError):
    """Chat-completion endpoint failed (after retries, when batched)."""


class JournalError(ValueError):
    """Journal file exists but cannot be interpreted."""


@dataclass(frozen=True)
class RationaleRecord:
    """One parsed LLM scoring response with length accounting."""

    essay_id: int
    generator_id: str
    parsed_score: int
    rationale_text: str
    word_count: int
    estimated_tokens: int
    over_limit: bool
    raw_response: str

    @classmethod
    def from_response(cls, essay_id: int, generator_id: str, raw: str) -> "RationaleRecord":
        score, rationale = parse_response(raw)
        words = len(rationale.split())
        tokens = math.ceil(words * TOKENS_PER_WORD)
        return cls(
            essay_id=essay_id,
            generator_id=generator_id,
            parsed_score=score,
            rationale_text=rationale,
            word_count=words,
            estimated_tokens=tokens,
            over_limit=tokens > TOKEN_LIMIT,
            raw_response=raw,
        )


@dataclass(frozen=True)
class RationaleStats:
    min_words: int
    max_words: int
    mean_words: float
    over_limit_count: int


class BatchJournal:
    """Append-only ndjson log of per-essay batch status.

    Entries are `{"essay_id", "status", "attempts"}` with status in
    {pending, done, failed}; done entries embed the record. A single
    writer appends and flushes after every completion.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.entries: dict[int, dict] = {}
        if self.path.exists():
            self._load()
        self._fh = open(self.path, "a", encoding="utf-8")

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                    essay_id = int(entry["essay_id"])
                    status = entry["status"]
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise JournalError(
                        f"{self.path}: corrupt journal at line {line_no}"
                    ) from exc
                if status not in ("pending", "done", "failed"):
                    raise JournalError(
                        f"{self.path}: unknown status {status!r} at line {line_no}"
                    )
                if status == "done" and "record" not in entry:
                    raise JournalError(
                        f"{self.path}: done entry without record at line {line_no}"
                    )
                self.entries[essay_id] = entry

    def record_for(self, essay_id: int) -> RationaleRecord | None:
        entry = self.entries.get(essay_id)
        if entry is None or entry["status"] != "done":
            return None
        return RationaleRecord(**entry["record"])

    def write(self, essay_id: int, status: str, attempts: int,
              record: RationaleRecord | None = None) -> None:
        entry: dict = {"essay_id": essay_id, "status": status, "attempts": attempts}
        if record is not None:
            entry["record"] = asdict(record)
        self.entries[essay_id] = entry
        self._fh.write(json.dumps(entry, sort_keys=True) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


class HttpChatProvider:
    """Minimal JSON chat-completion client.

    POSTs `{model, messages, temperature}` to the configured endpoint and
    returns the assistant text; the API key is read from the named
    environment variable at call time.
    """

    def __init__(self, url: str, model: str, api_key_env: str = "OPENAI_API_KEY",
                 timeout: float = 120.0):
        self.url = url
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout

    def __call__(self, prompt: str, temperature: float) -> str:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        }
        try:
            resp = requests.post(self.url, json=payload, headers=headers,
                                 timeout=self.timeout)
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"chat completion failed: {exc}") from exc


def _score_one(essay: EssayRecord, config: PromptConfig, provider: Provider,
               max_attempts: int, base_delay: float) -> tuple[RationaleRecord | None, int]:
    """Call the provider with retries; returns (record or None, attempts)."""
    prompt = build_prompt(essay.text, config)
    temperature = config.effective_temperature()
    for attempt in range(1, max_attempts + 1):
        try:
            raw = provider(prompt, temperature)
            record = RationaleRecord.from_response(essay.essay_id,
                                                   config.generator_id, raw)
            return record, attempt
        except (ProviderError, ParseError):
            if attempt == max_attempts:
                return None, attempt
            time.sleep(base_delay * 2 ** (attempt - 1) * (1 + random.random()))
    raise AssertionError("unreachable")


def run_batch(
    essays: Sequence[EssayRecord],
    config: PromptConfig,
    provider: Provider,
    journal_path: str | Path,
    max_workers: int = 4,
    max_attempts: int = 5,
    base_delay: float = 1.0,
) -> list[RationaleRecord]:
    """Score every essay, resuming from the journal if present.

    Already-done essays are skipped; failures are retried with
    exponential backoff and then journaled as failed without aborting
    the batch. Output records follow the essay input order regardless of
    completion order.
    """
    journal = BatchJournal(journal_path)
    try:
        results: dict[int, RationaleRecord] = {}
        pending: list[EssayRecord] = []
        for essay in essays:
            record = journal.record_for(essay.essay_id)
            if record is not None:
                results[essay.essay_id] = record
            else:
                pending.append(essay)

        if pending:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                futures = {
                    pool.submit(_score_one, essay, config, provider,
                                max_attempts, base_delay): essay
                    for essay in pending
                }
                for future in as_completed(futures):
                    essay = futures[future]
                    record, attempts = future.result()
                    if record is None:
                        journal.write(essay.essay_id, "failed", attempts)
                    else:
                        journal.write(essay.essay_id, "done", attempts, record)
                        results[essay.essay_id] = record
        return [results[e.essay_id] for e in essays if e.essay_id in results]
    finally:
        journal.close()


def rationale_stats(records: Sequence[RationaleRecord]) -> RationaleStats:
    """Word-count range/mean and the count of over-limit rationales."""
    if not records:
        raise ValueError("rationale_stats: no records")
    words = [r.word_count for r in records]
    return RationaleStats(
        min_words=min(words),
        max_words=max(words),
        mean_words=sum(words) / len(words),
        over_limit_count=sum(r.over_limit for r in records),
    )


def write_rationale_csv(records: Sequence[RationaleRecord], path: str | Path) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(["essay_id", "generator_id", "score", "word_count",
                         "over_limit", "rationale"])
        for r in records:
            writer.writerow([r.essay_id, r.generator_id, r.parsed_score,
                             r.word_count, str(r.over_limit).lower(), r.rationale_text])


def read_rationale_csv(path: str | Path) -> list[dict]:
    import csv

    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
