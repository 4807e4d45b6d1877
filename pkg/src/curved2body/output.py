"""Delimited and JSON emission with round-trip-exact number formatting."""
import datetime
import json
from pathlib import Path

import numpy as np


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_table(path, columns, fmt="csv", digest=None, timestamp=True):
    """Write named columns to CSV (17 significant digits) or JSON.

    The CSV carries comment lines naming the config digest and, unless
    suppressed, the generation time; the first non-comment row names the
    columns (units belong in the column names).
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    arrays = [np.atleast_1d(np.asarray(columns[k])) for k in names]
    n = max(len(a) for a in arrays)
    if fmt == "json":
        payload = {k: [float(v) for v in a] for k, a in zip(names, arrays)}
        if digest:
            payload["_config_digest"] = digest
        path = path.with_suffix(".json")
        path.write_text(json.dumps(payload, indent=1))
        return path
    path = path.with_suffix(".csv")
    lines = []
    if digest:
        lines.append(f"# config-digest: {digest}")
    if timestamp:
        lines.append(f"# generated: {datetime.datetime.now().isoformat()}")
    lines.append(",".join(names))
    for i in range(n):
        lines.append(",".join(_fmt(a[i]) if i < len(a) else "" for a in arrays))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_report(path, payload, digest=None):
    path = Path(path).with_suffix(".json")
    path.parent.mkdir(parents=True, exist_ok=True)
    if digest:
        payload = {"config_digest": digest, **payload}
    path.write_text(json.dumps(payload, indent=1, default=_json_default))
    return path


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serializable: {type(obj)}")
