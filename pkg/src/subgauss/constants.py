"""Frozen absolute constants.

The file format is one ``name=value  # provenance`` line per constant; blank
lines and lines starting with ``#`` are ignored.  The packaged file is
written by ``python -m subgauss.calibrate`` and never edited by the test
suite, so acceptance runs read constants that were fitted on separate seeds.
"""
from __future__ import annotations

import threading
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import SubGaussError

NAMES = ("hw_c", "jl_C", "sketch_c0", "nsp_C", "lemma_C", "increment_C", "main_C")

_lock = threading.Lock()
_cache: dict = {}
_override: Optional[Path] = None


def default_path() -> Path:
    return Path(str(resources.files("subgauss") / "data" / "constants.txt"))


def parse(text: str) -> dict[str, tuple[float, str]]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        body, _, note = line.partition("#")
        name, eq, value = body.partition("=")
        name = name.strip()
        if not eq or not name:
            raise SubGaussError(f"constants line {lineno}: expected name=value")
        try:
            out[name] = (float(value), note.strip())
        except ValueError:
            raise SubGaussError(f"constants line {lineno}: bad value {value.strip()!r}") from None
    return out


def format_constants(values: dict[str, tuple[float, str]]) -> str:
    return "".join(f"{k}={v!r}  # {note}\n" for k, (v, note) in sorted(values.items()))


def load(path=None) -> dict[str, tuple[float, str]]:
    p = Path(path) if path is not None else (_override or default_path())
    key = str(p.resolve())
    with _lock:
        if key not in _cache:
            _cache[key] = parse(p.read_text())
        return _cache[key]


def get(name: str, path=None) -> float:
    table = load(path)
    if name not in table:
        raise SubGaussError(f"constant {name!r} missing from constants file")
    return table[name][0]


def use_file(path) -> None:
    """Make ``path`` the process-wide default constants file (None resets)."""
    global _override
    _override = None if path is None else Path(path)


def write(path, values: dict[str, tuple[float, str]]) -> None:
    Path(path).write_text(format_constants(values))
    with _lock:
        _cache.pop(str(Path(path).resolve()), None)
