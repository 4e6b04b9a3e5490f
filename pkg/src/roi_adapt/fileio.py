"""CSV helpers shared by the run artifacts.

All artifact CSVs start with `# key=value` comment lines (config hash,
seeds, notes) so every output is self-describing; readers here skip them.
Floats are written with repr() so artifacts round-trip bit-exactly.
"""

from __future__ import annotations

from pathlib import Path


def format_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: str | Path, columns: tuple, rows: list,
              comments: dict | None = None) -> None:
    lines = []
    for k, v in (comments or {}).items():
        lines.append(f"# {k}={v}")
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(format_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path: str | Path) -> tuple[list[str], list[list[str]], dict]:
    """Returns (columns, raw rows, header comments)."""
    columns: list[str] = []
    rows: list[list[str]] = []
    comments: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                comments[k.strip()] = v.strip()
            continue
        if not columns:
            columns = line.split(",")
            continue
        rows.append(line.split(","))
    return columns, rows, comments
