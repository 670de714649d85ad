"""
Helper functions for the sgglab laboratory.

File helpers for the JSONL/JSON formats shared by every module, plus
small parsing utilities used by the command-line runners.
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Sequence, Tuple, Union

import numpy as np

from .exceptions import ConfigurationError

PathLike = Union[str, Path]


def iter_jsonl(path: PathLike) -> Iterator[Tuple[int, Dict[str, Any]]]:
    """
    Iterate over the records of a JSONL file.

    Args:
        path: JSONL file path

    Yields:
        (line number, decoded record) tuples; blank lines are skipped

    Raises:
        ValueError: If a line is not a JSON object
    """
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{line_no}: invalid JSON ({e.msg})")
            if not isinstance(record, dict):
                raise ValueError(f"{path}:{line_no}: expected a JSON object")
            yield line_no, record


def write_jsonl(path: PathLike, records: Iterable[Dict[str, Any]]) -> int:
    """
    Write records as UTF-8 JSONL with LF line endings.

    Returns:
        Number of records written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(json.dumps(record, separators=(",", ":")))
            f.write("\n")
            count += 1
    return count


def read_json(path: PathLike) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_json(path: PathLike, payload: Any) -> None:
    """Write a JSON document with sorted keys (byte-stable across runs)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(to_jsonable(payload), f, indent=2, sort_keys=True, allow_nan=False)
        f.write("\n")


def to_jsonable(value: Any) -> Any:
    """
    Convert numpy scalars/arrays and tuples into plain JSON types.

    NaN and infinities become None so documents stay strict JSON.
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def round_array(values: np.ndarray, decimals: int) -> List[Any]:
    """Round a float array for text output and return nested lists."""
    return np.round(np.asarray(values, dtype=float), decimals).tolist()


def parse_int_list(text: Union[str, Sequence[int]], name: str = "value") -> List[int]:
    """
    Parse '20,50,100' (or an already parsed sequence) into a list of ints.

    Raises:
        ConfigurationError: On malformed input
    """
    if isinstance(text, str):
        parts = [p.strip() for p in text.split(",") if p.strip()]
    else:
        parts = list(text)
    try:
        values = [int(p) for p in parts]
    except (TypeError, ValueError):
        raise ConfigurationError(f"Invalid {name} list: {text!r}")
    if not values:
        raise ConfigurationError(f"Empty {name} list")
    return values


def parse_caps(text: str) -> Tuple[int, int]:
    """
    Parse an edge-sampling argument 'FG:BG' into two positive caps.

    Raises:
        ConfigurationError: On malformed input or caps below 1
    """
    try:
        fg_text, bg_text = text.split(":")
        caps = (int(fg_text), int(bg_text))
    except (AttributeError, ValueError):
        raise ConfigurationError(f"Edge sampling must look like FG:BG, got {text!r}")
    if min(caps) < 1:
        raise ConfigurationError(f"Edge sampling caps must be >= 1, got {text!r}")
    return caps
