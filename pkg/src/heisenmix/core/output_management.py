"""
Output Management Module

Run directories and result files. Every CSV starts with a `# config:` line holding the
resolved run configuration, and every JSON report carries it under "config", so each
file records how it was produced. Floats are written with 17 significant digits.
"""

import json
import os
import time
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np


CSV_FLOAT = '%.17g'


def get_next_available_output_dir(base: str = "runs") -> str:
    """First of base, base1, base2, ... that does not exist yet"""
    if not os.path.exists(base):
        return base
    for i in range(1, 1000):
        candidate = f"{base}{i}"
        if not os.path.exists(candidate):
            return candidate
    return f"{base}-{int(time.time())}"


def create_output_directory(output_dir: str) -> str:
    os.makedirs(output_dir, exist_ok=True)
    return output_dir


def config_header(config: Dict[str, Any]) -> str:
    return "# config: " + json.dumps(config, sort_keys=True, separators=(',', ':'))


def _format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return CSV_FLOAT % float(value)
    return str(value)


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Sequence[Any]], config: Dict[str, Any]) -> str:
    """Provenance line, header row, then one line per row"""
    lines: List[str] = [config_header(config), ",".join(columns)]
    for row in rows:
        lines.append(",".join(_format_cell(v) for v in row))
    with open(path, 'w', newline='') as f:
        f.write("\n".join(lines) + "\n")
    return path


def write_json(path: str, payload: Dict[str, Any], config: Dict[str, Any]) -> str:
    document = {'config': config}
    document.update(payload)
    with open(path, 'w') as f:
        json.dump(document, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")
    return path


def json_line(payload: Dict[str, Any]) -> str:
    """Single-line JSON for machine-readable messages on stdout"""
    return json.dumps(payload, sort_keys=True, default=_json_default)


def _json_default(value: Any):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def read_csv_config(path: str) -> Dict[str, Any]:
    """Config embedded in the first line of a CSV written by write_csv"""
    with open(path, 'r') as f:
        first = f.readline().strip()
    prefix = "# config: "
    if not first.startswith(prefix):
        return {}
    return json.loads(first[len(prefix):])


def field_rows(field) -> np.ndarray:
    """Node coordinates followed by the value, one row per grid node"""
    return np.column_stack([field.grid.nodes, field.values_on_nodes])


def coordinate_columns(N: int) -> List[str]:
    if N == 1:
        return ['x', 'y', 't']
    return [f"x{i + 1}" for i in range(N)] + [f"y{i + 1}" for i in range(N)] + ['t']
