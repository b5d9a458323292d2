"""Small shared helpers: seed derivation, canonical JSON, JSONL I/O."""

import hashlib
import json
import os

from .errors import DataError


def derived_seed(base, *tags) -> int:
    """Mix a base seed with string/int tags into a stable 63-bit seed.

    Uses sha256 so per-group or per-stage streams never collide with each
    other or with the base stream, and stay identical across runs and
    platforms.
    """
    text = "|".join([repr(int(base))] + [repr(t) for t in tags])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def canonical_dumps(obj) -> str:
    """JSON with sorted keys and fixed separators; byte-stable across runs."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_json(path, obj, indent=None):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if indent is None:
            fh.write(canonical_dumps(obj))
            fh.write("\n")
        else:
            json.dump(obj, fh, sort_keys=True, indent=indent, ensure_ascii=False)
            fh.write("\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_jsonl(path, rows):
    """Write an iterable of dicts as canonical JSON lines."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(canonical_dumps(row))
            fh.write("\n")


def read_jsonl(path):
    """Yield (line_number, obj) pairs; malformed lines raise DataError."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{os.fspath(path)}: line {lineno}: invalid JSON ({exc.msg})") from exc
            yield lineno, obj


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
