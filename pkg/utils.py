# -*- coding: utf-8 -*-
"""
Common utility functions used across the KV-MemNN toolkit.
Includes the corpus-format error type, content fingerprints,
JSON / JSONL / TSV file helpers and output directory creation.
"""

import hashlib
import json
import logging
import os
from typing import Any, Dict, Iterable, List, Sequence

logger = logging.getLogger(__name__) # Use module-specific logger


class CorpusFormatError(ValueError):
    """A corpus file exists but cannot be parsed (bad columns, bad JSON, unknown labels)."""

    def __init__(self, path: str, message: str, line: int = 0):
        location = f"{path}:{line}" if line else path
        super().__init__(f"{location}: {message}")
        self.path = path
        self.line = line


# --- Paths ---
def ensure_dir(path: str) -> str:
    """
    Creates `path` (and parents) if missing.

    Raises:
        OSError: If the directory cannot be created.
    """
    if not os.path.isdir(path):
        os.makedirs(path, exist_ok=True)
        logger.debug(f"Created directory: {path}")
    return path


def require_file(path: str) -> str:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"Required file not found: {path}")
    return path


# --- Fingerprints ---
def sha256_file(path: str) -> str:
    """Hex digest of a file's bytes, read in chunks."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def fingerprint_files(paths: Sequence[str]) -> str:
    """
    Combined short fingerprint over several files (name + content).
    Missing files are skipped with a warning.
    """
    digest = hashlib.sha256()
    for path in paths:
        if not os.path.isfile(path):
            logger.warning(f"Fingerprint skips missing file: {path}")
            continue
        digest.update(os.path.basename(path).encode("utf-8") + b"\x00")
        digest.update(sha256_file(path).encode("ascii"))
    return digest.hexdigest()[:16]


def stable_unit_hash(text: str) -> float:
    """Deterministic hash of `text` mapped to [0, 1); independent of PYTHONHASHSEED."""
    value = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")
    return value / float(1 << 64)


# --- JSON / JSONL / TSV ---
def write_json(path: str, data: Any):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(data, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")


def read_json(path: str) -> Any:
    """
    Raises:
        FileNotFoundError: Missing file.
        CorpusFormatError: Invalid JSON.
    """
    require_file(path)
    with open(path, "r", encoding="utf-8") as handle:
        try:
            return json.load(handle)
        except json.JSONDecodeError as e:
            raise CorpusFormatError(path, f"invalid JSON ({e.msg})", e.lineno) from e


def write_jsonl(path: str, rows: Iterable[Dict[str, Any]]):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_jsonl(path: str) -> List[Dict[str, Any]]:
    require_file(path)
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(path, f"invalid JSON line ({e.msg})", line_no) from e
            if not isinstance(row, dict):
                raise CorpusFormatError(path, "expected a JSON object per line", line_no)
            rows.append(row)
    return rows


def write_tsv(path: str, rows: Iterable[Sequence[str]]):
    """
    Raises:
        ValueError: If a field contains a tab or newline.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for row in rows:
            for value in row:
                if "\t" in value or "\n" in value:
                    raise ValueError(f"TSV field may not contain tabs or newlines: {value!r}")
            handle.write("\t".join(row) + "\n")


def read_tsv(path: str, n_columns: int) -> List[List[str]]:
    """
    Reads a TSV file whose every nonblank line has exactly `n_columns` fields.

    Raises:
        FileNotFoundError: Missing file.
        CorpusFormatError: Wrong column count or empty field.
    """
    require_file(path)
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != n_columns:
                raise CorpusFormatError(path, f"expected {n_columns} tab-separated fields, got {len(fields)}", line_no)
            if any(not f.strip() for f in fields):
                raise CorpusFormatError(path, "empty field", line_no)
            rows.append(fields)
    return rows
