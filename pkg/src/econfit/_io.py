"""Small I/O helpers shared by the readers and writers."""
from __future__ import annotations

import csv
import hashlib
import io
import os
from pathlib import Path
from typing import IO, Iterable, Union

Source = Union[str, os.PathLike, bytes, IO[bytes], IO[str]]


def read_text(source: Source) -> str:
    """Return the full UTF-8 text of a path, byte string or file object."""
    if isinstance(source, bytes):
        data = source
    elif isinstance(source, (str, os.PathLike)):
        data = Path(source).read_bytes()
    else:
        data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    return data


def format_float(x: float) -> str:
    # repr is the shortest string that round-trips to the same double
    return repr(float(x))


def write_csv(path: str | os.PathLike, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header))
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def sha256_file(path: str | os.PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
