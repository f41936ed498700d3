"""Flat ``key = value`` report and config format.

Reports and config files share one line-oriented format: one ``key = value``
pair per line, ``#`` starts a comment, blank lines are ignored.  Floats are
rendered with ten significant digits so that re-parsing a report reproduces
the numbers that were measured.
"""

from __future__ import annotations

from .errors import ParameterError


def fmt_value(value) -> str:
    """Render a value for a report line (floats at 10 significant digits)."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def render_kv(pairs) -> str:
    """Render an ordered mapping (or pair iterable) as ``key = value`` lines."""
    items = pairs.items() if hasattr(pairs, "items") else pairs
    return "".join(f"{key} = {fmt_value(value)}\n" for key, value in items)


def parse_kv(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines into a string-to-string dict.

    Values keep their textual form; callers convert types themselves.
    """
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ParameterError(f"config line {lineno}: empty key")
        out[key] = value.strip()
    return out
