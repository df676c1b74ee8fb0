"""
Report files for experiment runs

All files are written atomically once computation is finished. CSVs start
with a fixed `# key: value` provenance header; floats are written with repr
so reruns reproduce the bytes.
"""
import csv
import io
import json
import logging
import math
import os
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

import numpy as np

from margin_paths import __version__

logger = logging.getLogger("marginpaths.reports")

HEADER_KEYS = (
    "tool",
    "experiment",
    "dataset",
    "predictor",
    "norm",
    "seed",
    "config_hash",
    "solver_fingerprint",
)


def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return repr(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


class ReportWriter:
    """Writes CSV, JSON and text artifacts into one output directory"""

    def __init__(self, out_dir: Path, provenance: Dict[str, str]):
        """
        Args:
            out_dir: Target directory, created if missing
            provenance: Values for the CSV header keys
        """
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.provenance = {"tool": f"margin-paths {__version__}", **provenance}
        self.written: List[Path] = []

    def _atomic_write(self, path: Path, content: str):
        """Atomic file write"""
        tmp_path = path.with_suffix(path.suffix + ".tmp")
        with open(tmp_path, "w", newline="") as tf:
            tf.write(content)
            tf.flush()
            os.fsync(tf.fileno())
        os.replace(tmp_path, path)
        self.written.append(path)

    def header_lines(self) -> List[str]:
        return [f"# {key}: {self.provenance.get(key, '')}" for key in HEADER_KEYS]

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        path = self.out_dir / name
        buf = io.StringIO()
        buf.write("\n".join(self.header_lines()) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
        try:
            self._atomic_write(path, buf.getvalue())
        except Exception as e:
            logger.exception("Failed to save %s: %s", path, e)
            raise
        return path

    def write_json(self, name: str, payload: Dict) -> Path:
        path = self.out_dir / name
        content = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
        try:
            self._atomic_write(path, content)
        except Exception as e:
            logger.exception("Failed to save %s: %s", path, e)
            raise
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        try:
            self._atomic_write(path, text if text.endswith("\n") else text + "\n")
        except Exception as e:
            logger.exception("Failed to save %s: %s", path, e)
            raise
        return path


def read_csv(path: Path):
    """Split a report CSV into its provenance header and a csv.reader body"""
    lines = Path(path).read_text().splitlines()
    meta = {}
    body = []
    for line in lines:
        if line.startswith("# ") and ": " in line and not body:
            key, value = line[2:].split(": ", 1)
            meta[key] = value
        else:
            body.append(line)
    rows = list(csv.reader(body))
    return meta, rows[0], rows[1:]
