"""Small file helpers shared by the loaders and the CLI."""

import contextlib
import csv
import io
import os
import tempfile
from pathlib import Path

from .errors import ParseError


def fmt(x):
    """Shortest repr that round-trips a float exactly."""
    x = float(x)
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def read_rows(path):
    """Yield ``(line_number, fields)`` for every non-blank CSV line."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(path, 0, "file not found") from None
    except UnicodeDecodeError as exc:
        raise ParseError(path, 0, f"not valid UTF-8 ({exc.reason})") from None
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not f.strip() for f in row):
            continue
        yield lineno, [f.strip() for f in row]


def parse_float(path, lineno, col, text):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(path, lineno, f"non-numeric value {text!r}", column=col) from None
    return value


def to_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


@contextlib.contextmanager
def staged_writes():
    """Collect ``(path, text)`` pairs and publish them only if the block succeeds.

    Each file is written to a temp file in its target directory, then renamed
    into place, so a failure never leaves a partial report behind.
    """
    pending = []
    yield pending
    staged = []
    try:
        for path, text in pending:
            path = Path(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
    except BaseException:
        for tmp, _ in staged:
            with contextlib.suppress(OSError):
                os.unlink(tmp)
        raise
    for tmp, path in staged:
        os.replace(tmp, path)


def write_text_atomic(path, text):
    with staged_writes() as pending:
        pending.append((path, text))
