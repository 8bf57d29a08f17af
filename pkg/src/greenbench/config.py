"""YAML helpers with line/field diagnostics.

World and parameter files share one dialect: a YAML mapping of scalars,
lists and nested mappings. Every accessor reports the dotted field path on
failure so a bad file points straight at the offending key.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError

_MISSING = object()


def parse_text(text: str, source: str | None = None) -> dict:
    """Parse YAML text into a mapping, raising ConfigError with the line number."""
    try:
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(str(exc.problem or exc), line=line, source=source) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(str(exc), source=source) from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", line=1, source=source)
    return data


def read_file(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read file: {exc}", source=str(path)) from exc
    return parse_text(text, source=str(path))


def get_float(data: Mapping, key: str, default: Any = _MISSING, *, field: str = "") -> float:
    path = f"{field}.{key}" if field else key
    if key not in data:
        if default is _MISSING:
            raise ConfigError("missing required key", field=path)
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=path)
    return float(value)


def get_int(data: Mapping, key: str, default: Any = _MISSING, *, field: str = "") -> int:
    path = f"{field}.{key}" if field else key
    if key not in data:
        if default is _MISSING:
            raise ConfigError("missing required key", field=path)
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", field=path)
    return value


def get_bool(data: Mapping, key: str, default: Any = _MISSING, *, field: str = "") -> bool:
    path = f"{field}.{key}" if field else key
    if key not in data:
        if default is _MISSING:
            raise ConfigError("missing required key", field=path)
        return default
    value = data[key]
    if not isinstance(value, bool):
        raise ConfigError(f"expected true/false, got {value!r}", field=path)
    return value


def get_point(value: Any, field: str) -> tuple[float, float]:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise ConfigError(f"expected [x, y], got {value!r}", field=field)
    return float(value[0]), float(value[1])


def get_points(value: Any, field: str, min_len: int = 1) -> list[tuple[float, float]]:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"expected a list of [x, y] points, got {value!r}", field=field)
    points = [get_point(v, f"{field}[{i}]") for i, v in enumerate(value)]
    if len(points) < min_len:
        raise ConfigError(f"expected at least {min_len} points", field=field)
    return points


def get_floats(value: Any, field: str, length: int | None = None) -> list[float]:
    if not isinstance(value, (list, tuple)) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ConfigError(f"expected a list of numbers, got {value!r}", field=field)
    if length is not None and len(value) != length:
        raise ConfigError(f"expected {length} numbers, got {len(value)}", field=field)
    return [float(v) for v in value]
