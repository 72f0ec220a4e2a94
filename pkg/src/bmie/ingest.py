"""Loading and screening the two data applications.

Batting files are monthly per-player CSV records; expression files are
delimited gene-by-sample matrices.  Loading is forgiving for batting rows
(malformed rows are skipped with a warning naming the line) and strict for
expression matrices (a ragged or non-numeric row is an error naming the row),
because a skipped gene silently changes every downstream multiplicity
adjustment.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "DataError",
    "BattingRecord",
    "PlayerSplit",
    "ExpressionMatrix",
    "MIN_AT_BATS",
    "load_batting",
    "select_period",
    "load_expression",
]

# Players with fewer at-bats than this in either period are screened out;
# the variance-stabilized sampling model is unreliable below it.
MIN_AT_BATS = 11

_BATTING_HEADER = ("player_id", "month", "hits", "at_bats", "is_pitcher")
_TRUE_TOKENS = {"1", "true", "t", "yes", "y"}
_FALSE_TOKENS = {"0", "false", "f", "no", "n"}


class DataError(Exception):
    """Input data is unusable in a way the caller must fix."""


@dataclass(frozen=True)
class BattingRecord:
    """One player-month: counting stats plus the pitcher flag."""

    player_id: str
    month: int
    hits: int
    at_bats: int
    is_pitcher: bool


@dataclass(frozen=True)
class PlayerSplit:
    """Per-player totals for the estimation period and the remainder."""

    player_id: str
    hits_first: int
    at_bats_first: int
    hits_rest: int
    at_bats_rest: int


@dataclass(frozen=True)
class ExpressionMatrix:
    """Gene-by-sample values with the first ``group_split`` columns as group 1."""

    genes: tuple
    samples: tuple
    values: np.ndarray
    group_split: int

    @property
    def group1(self) -> np.ndarray:
        return self.values[:, : self.group_split]

    @property
    def group2(self) -> np.ndarray:
        return self.values[:, self.group_split :]


def _parse_bool(token: str, line_no: int) -> bool:
    t = token.strip().lower()
    if t in _TRUE_TOKENS:
        return True
    if t in _FALSE_TOKENS:
        return False
    if t == "":
        warnings.warn(
            f"batting row at line {line_no} has no is_pitcher value; assuming not a pitcher"
        )
        return False
    raise ValueError(f"unrecognized is_pitcher value {token!r}")


def load_batting(path) -> list:
    """Parse a batting CSV, skipping malformed rows with a warning.

    The file needs a ``player_id,month,hits,at_bats,is_pitcher`` header.
    Rows with the wrong column count, non-integer counts, ``hits > at_bats``
    or a month below 1 are skipped; each skip warns with its line number.  A
    missing ``is_pitcher`` value is warned about and treated as ``False``
    rather than skipping the row.
    """
    records = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read batting file {path!r}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"batting file {path!r} is empty") from None
        if tuple(h.strip().lower() for h in header) != _BATTING_HEADER:
            raise DataError(
                f"batting file {path!r} must start with header "
                f"{','.join(_BATTING_HEADER)}, got {','.join(header)!r}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                if len(row) == len(_BATTING_HEADER) - 1:
                    warnings.warn(
                        f"batting row at line {line_no} has no is_pitcher column; "
                        "assuming not a pitcher"
                    )
                    row = list(row) + ["0"]
                if len(row) != len(_BATTING_HEADER):
                    raise ValueError(
                        f"expected {len(_BATTING_HEADER)} columns, got {len(row)}"
                    )
                player_id = row[0].strip()
                if not player_id:
                    raise ValueError("empty player_id")
                month = int(row[1])
                hits = int(row[2])
                at_bats = int(row[3])
                if month < 1:
                    raise ValueError(f"month must be >= 1, got {month}")
                if at_bats < 0 or hits < 0 or hits > at_bats:
                    raise ValueError(
                        f"need 0 <= hits <= at_bats, got hits={hits} at_bats={at_bats}"
                    )
                is_pitcher = _parse_bool(row[4], line_no)
            except ValueError as exc:
                warnings.warn(f"skipping malformed batting row at line {line_no}: {exc}")
                continue
            records.append(
                BattingRecord(
                    player_id=player_id,
                    month=month,
                    hits=hits,
                    at_bats=at_bats,
                    is_pitcher=is_pitcher,
                )
            )
    if not records:
        raise DataError(f"batting file {path!r} contains no usable rows")
    return records


def select_period(records: Sequence[BattingRecord], period_j: int) -> list:
    """Split each player's season at month ``period_j`` and screen players.

    Months ``<= period_j`` form the estimation period and the remaining
    months the validation period.  Pitchers are dropped, as is any player
    with fewer than ``MIN_AT_BATS`` at-bats in either period.  Results come
    back sorted by player id.
    """
    period_j = int(period_j)
    if period_j < 1:
        raise ValueError(f"period_j must be >= 1, got {period_j!r}")
    by_player: dict = {}
    pitchers = set()
    for rec in records:
        by_player.setdefault(rec.player_id, []).append(rec)
        if rec.is_pitcher:
            pitchers.add(rec.player_id)
    splits = []
    for pid in sorted(by_player):
        if pid in pitchers:
            continue
        h1 = n1 = h2 = n2 = 0
        for rec in by_player[pid]:
            if rec.month <= period_j:
                h1 += rec.hits
                n1 += rec.at_bats
            else:
                h2 += rec.hits
                n2 += rec.at_bats
        if n1 < MIN_AT_BATS or n2 < MIN_AT_BATS:
            continue
        splits.append(
            PlayerSplit(
                player_id=pid,
                hits_first=h1,
                at_bats_first=n1,
                hits_rest=h2,
                at_bats_rest=n2,
            )
        )
    return splits


def load_expression(path, group_split: int) -> ExpressionMatrix:
    """Parse a delimited gene-by-sample matrix; strict about shape.

    The first header cell labels the gene column; the rest are sample names.
    Each data row is a gene id followed by one numeric value per sample.  A
    row with the wrong number of values or a non-numeric entry raises
    :class:`DataError` naming the row.  ``group_split`` is the number of
    leading sample columns forming group 1.
    """
    try:
        with open(path, newline="") as fh:
            first = fh.readline()
            if not first.strip():
                raise DataError(f"expression file {path!r} is empty")
            delimiter = "\t" if "\t" in first else ","
            fh.seek(0)
            reader = csv.reader(fh, delimiter=delimiter)
            header = next(reader)
            samples = tuple(c.strip() for c in header[1:])
            if len(samples) < 2:
                raise DataError(
                    f"expression file {path!r} needs at least 2 sample columns"
                )
            genes = []
            rows = []
            for line_no, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                gene = row[0].strip()
                label = gene if gene else f"line {line_no}"
                if len(row) - 1 != len(samples):
                    raise DataError(
                        f"expression row {label!r} (line {line_no}) has "
                        f"{len(row) - 1} values, expected {len(samples)}"
                    )
                try:
                    vals = [float(v) for v in row[1:]]
                except ValueError:
                    raise DataError(
                        f"expression row {label!r} (line {line_no}) has a "
                        "non-numeric value"
                    ) from None
                if not all(math.isfinite(v) for v in vals):
                    raise DataError(
                        f"expression row {label!r} (line {line_no}) has a "
                        "non-finite value"
                    )
                genes.append(gene)
                rows.append(vals)
    except OSError as exc:
        raise DataError(f"cannot read expression file {path!r}: {exc}") from None
    if not genes:
        raise DataError(f"expression file {path!r} contains no gene rows")
    group_split = int(group_split)
    if not 1 <= group_split < len(samples):
        raise DataError(
            f"group_split must lie in [1, {len(samples) - 1}], got {group_split}"
        )
    return ExpressionMatrix(
        genes=tuple(genes),
        samples=samples,
        values=np.asarray(rows, dtype=float),
        group_split=group_split,
    )
