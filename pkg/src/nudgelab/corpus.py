"""Message corpus file handling.

The corpus ships as configurable data: tab-separated text with one record
per message and columns message_id, category_id, risk_value, text_en,
text_de. A placeholder corpus with the full 26-message / 6-category shape
is packaged under ``data/corpus.tsv``; deployments substitute their own
curated texts.
"""

from __future__ import annotations

import csv
from importlib import resources
from pathlib import Path

from .errors import ValidationFailure

CORPUS_COLUMNS = ("message_id", "category_id", "risk_value", "text_en", "text_de")

CorpusRow = tuple[int, int, float, str, str]


def parse_corpus_file(path: str | Path) -> list[CorpusRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        return _parse(fh, str(path))


def load_default_corpus() -> list[CorpusRow]:
    """The packaged placeholder corpus."""
    ref = resources.files("nudgelab").joinpath("data/corpus.tsv")
    with ref.open("r", encoding="utf-8") as fh:
        return _parse(fh, "packaged corpus")


def _parse(fh, source: str) -> list[CorpusRow]:
    reader = csv.reader(fh, delimiter="\t")
    header = next(reader, None)
    if header != list(CORPUS_COLUMNS):
        raise ValidationFailure(
            f"{source}: corpus header must be {list(CORPUS_COLUMNS)}, got {header!r}"
        )
    rows: list[CorpusRow] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(CORPUS_COLUMNS):
            raise ValidationFailure(
                f"{source}, line {line_no}: expected {len(CORPUS_COLUMNS)} fields, got {len(row)}"
            )
        try:
            rows.append((int(row[0]), int(row[1]), float(row[2]), row[3], row[4]))
        except ValueError as exc:
            raise ValidationFailure(f"{source}, line {line_no}: {exc}") from exc
    return rows
