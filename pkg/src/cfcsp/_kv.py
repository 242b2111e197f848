"""Tiny ``key = value`` document parser shared by the config formats."""

from __future__ import annotations

from .errors import ParseError


def parse_key_values(text: str, source: str = "<config>") -> dict[str, tuple[str, int]]:
    """Parse ``key = value`` lines into ``{key: (value, lineno)}``.

    Blank lines and ``#`` comments are skipped. Keys are lower-cased.
    Duplicate keys are rejected.
    """
    out: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(source, lineno, f"expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip().lower()
        if not key:
            raise ParseError(source, lineno, "empty key")
        if key in out:
            raise ParseError(source, lineno, f"duplicate key {key!r}")
        out[key] = (value.strip(), lineno)
    return out


def split_list(value: str) -> list[str]:
    """``"[a, b]"`` or ``"a, b"`` -> ``["a", "b"]``; empty items dropped."""
    value = value.strip()
    if value.startswith("[") and value.endswith("]"):
        value = value[1:-1]
    return [item.strip().strip("'\"") for item in value.split(",") if item.strip()]
