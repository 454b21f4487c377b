"""Append-only decision log.

One JSON object per line, written through a single appender and fsynced so
a crash can lose at most the record being written.  Replaying the log is
the only way campaign state is ever reconstructed: a torn final line is
discarded with a warning, anything broken before that is real corruption
and refused.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from pathlib import Path

from ..errors import CorruptLogError

logger = logging.getLogger(__name__)

__all__ = ["DecisionLog", "read_log", "scan_log"]


def scan_log(data: bytes) -> tuple[list[dict], int]:
    """Parse raw log bytes; returns (records, length of the committed prefix).

    A record counts as committed only once its trailing newline is on disk,
    so a crash mid-append leaves a torn tail that is discarded with a
    warning.  Records carry a contiguous ``seq`` starting at 0; a malformed
    committed line or a sequence gap raises CorruptLogError.
    """
    records: list[dict] = []
    offset = 0
    lines = data.split(b"\n")
    committed, tail = lines[:-1], lines[-1]
    for i, line in enumerate(committed):
        if not line:
            offset += 1
            continue
        try:
            record = json.loads(line.decode("utf-8"))
            if not isinstance(record, dict) or record.get("seq") != len(records):
                raise ValueError("bad record or sequence gap")
        except (ValueError, UnicodeDecodeError) as exc:
            raise CorruptLogError(f"log corrupted at line {i}: {exc}") from exc
        records.append(record)
        offset += len(line) + 1
    if tail:
        logger.warning("discarding torn final log record (%d bytes)", len(tail))
    return records, offset


def read_log(data: bytes) -> list[dict]:
    return scan_log(data)[0]


class DecisionLog:
    """Single-writer appender over a JSON-lines log file."""

    def __init__(self, path: str | Path, fsync: bool = True):
        self.path = Path(path)
        self._fsync = fsync
        self._lock = threading.Lock()
        records, valid_bytes = scan_log(self.path.read_bytes()) if self.path.exists() else ([], 0)
        self._records = records
        self._seq = len(records)
        self._file = open(self.path, "ab")
        if self.path.stat().st_size > valid_bytes:
            # drop a torn tail so the next append starts on a clean line
            self._file.truncate(valid_bytes)

    def replay(self) -> list[dict]:
        return list(self._records)

    @property
    def next_seq(self) -> int:
        return self._seq

    def append(self, record: dict) -> dict:
        """Assign the next sequence number and durably append the record."""
        with self._lock:
            record = {"seq": self._seq, **record}
            self._file.write((json.dumps(record, ensure_ascii=False) + "\n").encode("utf-8"))
            self._file.flush()
            if self._fsync:
                os.fsync(self._file.fileno())
            self._seq += 1
            self._records.append(record)
            return record

    def close(self) -> None:
        self._file.close()
