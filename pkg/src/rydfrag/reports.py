"""Result emission: delimited tables and JSON dumps with embedded config.

Every emitted file carries the resolved experiment configuration (a CSV
comment header or a "config" key), and writes are atomic so interrupted
runs never leave partial result files.  Float formatting uses shortest
round-trip repr, which keeps re-runs byte-identical under fixed seeds.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path


def config_json(config: dict) -> str:
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def atomic_write_text(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_value(v) -> str:
    import numpy as np

    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_csv(path: Path, columns: list[str], rows, config: dict) -> Path:
    """Comma-delimited table with a `# config: {...}` comment header."""
    lines = [f"# config: {config_json(config)}", ",".join(columns)]
    for row in rows:
        lines.append(",".join(_format_value(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")
    return Path(path)


def write_json(path: Path, payload: dict, config: dict) -> Path:
    body = {"config": config, **payload}
    atomic_write_text(path, json.dumps(body, indent=2, sort_keys=True) + "\n")
    return Path(path)


def read_csv_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    """Read back a table written by write_csv (comments skipped)."""
    lines = Path(path).read_text().splitlines()
    data = [ln for ln in lines if ln and not ln.startswith("#")]
    header = data[0].split(",")
    return header, [ln.split(",") for ln in data[1:]]
