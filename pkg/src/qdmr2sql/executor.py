"""Read-only SQL execution and denotation comparison.

A denotation is the materialized result of a query: a collection of rows
of cells, where a cell is null, a number, or text.  Two denotations are
compared as sets of tuples: row order and duplicates are irrelevant, and
column names are never part of the comparison.  Numbers match under a
relative tolerance so that 5 equals 5.0 and float formatting differences
across aggregate functions do not matter; text matches after trailing
whitespace is trimmed.

By default two empty denotations do NOT compare equal.  An empty result is
most often a spurious query rather than a correct one, so an empty answer
only matches when the caller opts in with ``allow_empty``.
"""

from __future__ import annotations

import sqlite3
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from .errors import ExecutionTimeout, SqlError
from .schema import open_readonly

__all__ = [
    "Cell",
    "Denotation",
    "Database",
    "execute",
    "denotations_equal",
    "answer_denotation",
]

Cell = Union[None, int, float, str]

NUMERIC_TOLERANCE = 1e-6

# How many virtual-machine steps run between deadline checks.
_PROGRESS_GRANULARITY = 1000


def _cell(value) -> Cell:
    if isinstance(value, bytes):
        return value.decode("utf-8", "replace")
    if isinstance(value, bool):
        return int(value)
    return value


@dataclass(frozen=True)
class Denotation:
    """The set of result rows a query evaluates to."""

    rows: Tuple[Tuple[Cell, ...], ...]

    @property
    def arity(self) -> int:
        return len(self.rows[0]) if self.rows else 0

    def __len__(self) -> int:
        return len(self.rows)

    def __bool__(self) -> bool:
        return bool(self.rows)

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence]) -> "Denotation":
        return cls(rows=tuple(tuple(_cell(v) for v in row) for row in rows))


def answer_denotation(answer) -> Denotation:
    """Normalize a supervised answer into a denotation.

    Accepts a scalar (one cell), a flat list of scalars (one column), or a
    list of rows.
    """
    if answer is None or isinstance(answer, (int, float, str, bool)):
        return Denotation.from_rows([[answer]])
    rows = []
    for item in answer:
        if isinstance(item, (list, tuple)):
            rows.append(list(item))
        else:
            rows.append([item])
    return Denotation.from_rows(rows)


class Database:
    """A read-only connection to one SQLite database file."""

    def __init__(self, conn: sqlite3.Connection, path: Optional[str] = None):
        self.conn = conn
        self.path = path

    @classmethod
    def open(cls, path: Union[str, Path]) -> "Database":
        return cls(open_readonly(path), path=str(path))

    def close(self) -> None:
        self.conn.close()

    def __enter__(self) -> "Database":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def execute(self, sql: str, timeout_secs: Optional[float] = None) -> Denotation:
        """Run one statement and materialize every result row.

        The statement is aborted once ``timeout_secs`` of wall-clock time
        have passed; the checks piggyback on the engine's progress hook.
        """
        if timeout_secs is not None:
            deadline = time.monotonic() + timeout_secs
            timed_out = []

            def _check() -> int:
                if time.monotonic() > deadline:
                    timed_out.append(True)
                    return 1
                return 0

            self.conn.set_progress_handler(_check, _PROGRESS_GRANULARITY)
        try:
            cursor = self.conn.execute(sql)
            rows = cursor.fetchall()
        except sqlite3.Error as exc:
            if timeout_secs is not None and timed_out:
                raise ExecutionTimeout(
                    f"query exceeded {timeout_secs:.1f}s"
                ) from exc
            raise SqlError(str(exc)) from exc
        finally:
            if timeout_secs is not None:
                self.conn.set_progress_handler(None, 0)
        return Denotation.from_rows(rows)


def execute(
    database: Database, sql: str, timeout_secs: Optional[float] = None
) -> Denotation:
    """Execute ``sql`` on ``database`` and return its denotation."""
    if not sql or not sql.strip():
        raise SqlError("empty statement")
    return database.execute(sql, timeout_secs)


def _canon(cell: Cell) -> Cell:
    if isinstance(cell, str):
        return cell.rstrip()
    if isinstance(cell, bool):
        return float(cell)
    if isinstance(cell, (int, float)):
        return float(cell)
    return cell


def _numbers_close(x: float, y: float) -> bool:
    return abs(x - y) <= NUMERIC_TOLERANCE * max(1.0, abs(x), abs(y))


def _cells_match(a: Cell, b: Cell) -> bool:
    a, b = _canon(a), _canon(b)
    if a is None or b is None:
        return a is None and b is None
    if isinstance(a, float) and isinstance(b, float):
        return _numbers_close(a, b)
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    return False


def _rows_match(a: Tuple[Cell, ...], b: Tuple[Cell, ...]) -> bool:
    return len(a) == len(b) and all(_cells_match(x, y) for x, y in zip(a, b))


def _row_set(rows: Sequence[Tuple[Cell, ...]]) -> set:
    return {tuple(_canon(c) for c in row) for row in rows}


def denotations_equal(
    a: Denotation, b: Denotation, allow_empty: bool = False
) -> bool:
    """Set equality of two denotations under cell normalization."""
    if not a.rows and not b.rows:
        return allow_empty
    if not a.rows or not b.rows:
        return False
    if {len(r) for r in a.rows} != {len(r) for r in b.rows}:
        return False
    set_a, set_b = _row_set(a.rows), _row_set(b.rows)
    if set_a == set_b:
        return True
    # Exact normalization misses float noise; fall back to tolerant
    # mutual coverage over the deduplicated rows.
    list_a, list_b = list(set_a), list(set_b)
    return all(any(_rows_match(ra, rb) for rb in list_b) for ra in list_a) and all(
        any(_rows_match(ra, rb) for ra in list_a) for rb in list_b
    )
