"""
JSON and CSV emission for every subcommand (schema in docs/reports.md).

JSON documents are wrapped in a versioned envelope; files are written to a
temporary sibling and moved into place, so a failed run never leaves a
half-written report behind.
"""

import csv
import dataclasses
import io
import json
import logging
import math
import os
import tempfile
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

CSV_HEADERS = {
    'schwarz-audit': ('x', 'y', 'd21', 'd12', 'delta', 'status'),
    'strongdiff': ('delta', 'modulus', 'pairs'),
    'verify-theorem1': ('delta', 'modulus', 'pairs'),
    'lipcheck': ('slice', 'k_hat', 'excluded'),
    'tolstov': ('x', 'y', 'gap_a1', 'gap_a2', 'gap_d21', 'gap_d12', 'status'),
}


def jsonable(obj):
    """Plain JSON types; non-finite floats become None, NamedTuples become objects."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple) and hasattr(obj, '_asdict'):
        return {k: jsonable(v) for k, v in obj._asdict().items()}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def envelope(command: str, config, result) -> dict:
    return {
        'schema': SCHEMA_VERSION,
        'command': command,
        'config': jsonable(config),
        'result': jsonable(result),
    }


def render_json(document: dict) -> str:
    """Sorted, indented JSON of a document built by envelope()."""
    return json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + '\n'


def render_csv(command: str, rows) -> str:
    try:
        header = CSV_HEADERS[command]
    except KeyError:
        raise ValueError(f"subcommand '{command}' has no CSV output") from None
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"{command} CSV row has {len(row)} fields, expected {len(header)}")
        writer.writerow(['' if isinstance(v, float) and not math.isfinite(v) else _cell(v) for v in row])
    return buffer.getvalue()


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def check_output_path(path) -> Path:
    """The parent directory must exist and the target must not be a directory."""
    path = Path(path)
    if path.is_dir():
        raise ValueError(f"output path {path} is a directory")
    if not path.parent.is_dir():
        raise ValueError(f"output directory {path.parent} does not exist")
    return path


def write_atomic(path, text: str) -> Path:
    path = check_output_path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix='.tmp')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.info(f"wrote {path}")
    return path


# ---------------- CSV ROWS PER REPORT ----------------

def audit_rows(report) -> list:
    return [(n.x, n.y, n.d21, n.d12, n.delta, n.status) for n in report.nodes]


def slice_rows(report) -> list:
    return [(s.coordinate, s.k_hat, s.excluded) for s in report.slices]


def tolstov_rows(report) -> list:
    return [(p.x, p.y, p.gap_a1, p.gap_a2, p.gap_d21, p.gap_d12, p.status) for p in report.points]
