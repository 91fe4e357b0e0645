"""CSV matrices, JSON configs and JSON reports."""

import csv
import json
import math
import subprocess
from importlib import metadata
from pathlib import Path

import numpy as np

from ._errors import ValidationError

FORMAT_VERSION = 1


def read_matrix_csv(path):
    """Numeric CSV with one header row, as a 2-d float array.

    Empty cells, non-numeric cells, NaN / Inf and ragged rows are rejected
    with the offending line (1-based, header included) and column.
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValidationError(f"{path}: empty file, expected a header row")
        width = len(header)
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ValidationError(f"{path}: line {line_no} has {len(row)} columns, expected {width}")
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise ValidationError(f"{path}: line {line_no}, column {col}: not a number: {cell!r}") from None
                if not math.isfinite(v):
                    raise ValidationError(f"{path}: line {line_no}, column {col}: non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    return np.array(rows, dtype=float).reshape(len(rows), width)


def read_vector_csv(path):
    m = read_matrix_csv(path)
    if m.shape[1] != 1:
        raise ValidationError(f"{path}: expected a single column, got {m.shape[1]}")
    return m[:, 0]


def write_matrix_csv(path, M, header=None, prefix="x"):
    """Write with ``%.17g`` so that reading back is lossless.

    ``path`` may also be an open text stream such as ``sys.stdout``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    header = header or [f"{prefix}{k + 1}" for k in range(M.shape[1])]
    rows = [header] + [["%.17g" % v for v in row] for row in M]
    if hasattr(path, "write"):
        csv.writer(path, lineterminator="\n").writerows(rows)
        return
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def to_jsonable(obj):
    """Recursively convert numpy values; infinities become ``"inf"`` / ``"-inf"``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        items = sorted(obj) if isinstance(obj, (set, frozenset)) else obj
        return [to_jsonable(v) for v in items]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    return obj


def build_id():
    """Short git hash of the source tree when available, else the package version."""
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_report_json(path, report, command=None, config=None, seed=None):
    """Wrap ``report`` with the format version, config echo, seed and build id."""
    doc = {
        "format_version": FORMAT_VERSION,
        "command": command,
        "build": build_id(),
        "seed": seed,
        "config": config,
        "report": report,
    }
    text = json.dumps(to_jsonable(doc), indent=2, allow_nan=False)
    if path is None or str(path) == "-":
        print(text)
    else:
        Path(path).write_text(text + "\n")
    return doc


def read_json(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def parse_config(doc, cls=None):
    """Check ``format_version`` and build ``cls`` (which rejects unknown keys)."""
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    doc = dict(doc)
    version = doc.pop("format_version", None)
    if version != FORMAT_VERSION:
        raise ValidationError(f"config format_version must be {FORMAT_VERSION}, got {version!r}")
    return cls.from_dict(doc) if cls is not None else doc


def serialize_config(config):
    return {"format_version": FORMAT_VERSION, **config.to_dict()}


def load_config(path, cls=None):
    return parse_config(read_json(path), cls)
