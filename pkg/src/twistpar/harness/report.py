"""Report writers: ``report.json`` and ``report.csv``."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .config import ExperimentConfig

__all__ = ["jsonable", "write_report", "RATIO_COLUMNS"]

RATIO_COLUMNS = ("trial_id", "a_dilation", "ratio", "norm_out", "norm_f", "norm_g", "flags")


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars, complex numbers and non-finite floats to JSON-safe values."""
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _cell(v: Any) -> str:
    # repr keeps every bit of a float, so identical runs give identical files
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return repr(complex(v))
    return str(v)


def write_report(
    out_dir: str | Path,
    config: ExperimentConfig,
    summary: Mapping[str, Any],
    rows: Iterable[Mapping[str, Any]],
    columns: Sequence[str],
) -> tuple[Path, Path]:
    """Write the structured report and the per-row CSV into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = list(rows)
    doc = {
        "command": config.command,
        "config": config.data,
        "summary": summary,
        "rows": rows,
    }
    jpath = out / "report.json"
    jpath.write_text(json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n")
    cpath = out / "report.csv"
    with cpath.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c, "")) for c in columns])
    return jpath, cpath
