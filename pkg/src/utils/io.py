"""Atomic writers for the JSON and CSV artifacts produced by the CLI."""

import csv
import json
import os
import tempfile
from typing import Any, Dict, Iterable, Optional, Sequence

from pydantic import BaseModel


def _to_jsonable(payload: Any) -> Any:
    if isinstance(payload, BaseModel):
        return payload.model_dump(mode="json")
    if isinstance(payload, dict):
        return {str(k): _to_jsonable(v) for k, v in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [_to_jsonable(v) for v in payload]
    if hasattr(payload, "item") and callable(payload.item):
        return payload.item()
    return payload


def dumps(payload: Any) -> str:
    return json.dumps(_to_jsonable(payload), sort_keys=True, indent=2) + "\n"


def atomic_write_text(path: str, text: str) -> str:
    """Write ``text`` to ``path`` through a temp file in the same directory and ``os.replace``."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def write_json(path: str, payload: Any) -> str:
    return atomic_write_text(path, dumps(payload))


def write_csv(
    path: str,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config: Optional[Dict[str, Any]] = None,
) -> str:
    """
    Write a CSV file, preceded by a ``# config: {...}`` comment line when a
    config is given.
    """
    lines = []
    if config is not None:
        lines.append("# config: " + json.dumps(_to_jsonable(config), sort_keys=True) + "\n")

    class _Sink:
        def write(self, s: str) -> None:
            lines.append(s)

    writer = csv.writer(_Sink(), lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([_to_jsonable(v) for v in row])
    return atomic_write_text(path, "".join(lines))


def read_csv(path: str) -> Dict[str, Any]:
    """Read a CSV written by ``write_csv``; returns ``{"config": ..., "header": ..., "rows": ...}``."""
    config = None
    with open(path, encoding="utf-8", newline="") as f:
        text = f.read().splitlines()
    if text and text[0].startswith("# config: "):
        config = json.loads(text[0][len("# config: "):])
        text = text[1:]
    reader = csv.reader(text)
    header = next(reader, [])
    return {"config": config, "header": header, "rows": [row for row in reader]}
