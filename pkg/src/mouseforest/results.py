"""Result tables with provenance and figure-shaped CSV output."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .synth.render import PART_NAMES

FIGURES = {
    "fig3": ("forestSize", "baselineAcc", "discAcc"),
    "fig4": ("m", "baselineAcc", "discAcc"),
    "fig5": ("leafSize", "baselineAcc", "discAcc"),
    "fig6": ("startLevel", "baselineAcc", "discAcc"),
    "fig7": ("iteration", "baselineAcc", "discAcc"),
    "fig11": ("forestSize", "meanJointError"),
    "fig12": ("m", "meanJointError"),
    "fig13": ("joint", "baselineError", "discError"),
    "fig14": ("joint", "meanError"),
    "fig15": ("sigma", "meanError") + tuple(f"joint{j}" for j in range(1, 13)),
    "fig25": ("m", "baselineAcc", "discAcc"),
    "fig26": ("truth",) + PART_NAMES,
}

# ablation kind -> figure
ABLATION_FIGURES = {"forestSize": "fig3", "m": "fig4", "leafSize": "fig5", "startLevel": "fig6", "iterations": "fig7"}


class SchemaError(ValueError):
    pass


def content_hash(*arrays) -> str:
    """Git-style blob hash over the raw bytes of the given arrays."""
    payload = b"".join(np.ascontiguousarray(a).tobytes() for a in arrays)
    h = hashlib.sha1(b"blob %d\0" % len(payload))
    h.update(payload)
    return h.hexdigest()


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode()).hexdigest()


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = list(self.columns)
        for i, row in enumerate(self.rows):
            missing = [c for c in self.columns if c not in row]
            if missing:
                raise SchemaError(f"row {i} lacks columns {missing}")

    def add(self, **row) -> None:
        missing = [c for c in self.columns if c not in row]
        if missing:
            raise SchemaError(f"row lacks columns {missing}")
        self.rows.append(row)

    def column(self, name) -> list:
        return [r[name] for r in self.rows]

    def to_csv(self, columns=None) -> str:
        columns = list(columns or self.columns)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in self.rows:
            w.writerow([_cell(r[c]) for c in columns])
        return buf.getvalue()

    def write(self, directory, name: str) -> tuple[Path, Path]:
        """``name.csv`` (deterministic) and ``name.json`` (rows plus provenance with timestamp)."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = out / f"{name}.csv", out / f"{name}.json"
        csv_path.write_text(self.to_csv())
        prov = dict(self.provenance)
        prov.setdefault("timestamp", datetime.now(timezone.utc).isoformat())
        doc = {"columns": self.columns, "rows": [{c: _jsonable(r[c]) for c in self.columns} for r in self.rows], "provenance": prov}
        json_path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        return csv_path, json_path


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    return v


def emit_figure_data(table: ResultTable, figure_id: str, path) -> Path:
    """Write the table as the CSV for one figure; its columns must match the figure's axes."""
    if figure_id not in FIGURES:
        raise SchemaError(f"unknown figure id {figure_id!r}")
    want = FIGURES[figure_id]
    if tuple(table.columns) != want:
        raise SchemaError(f"{figure_id} expects columns {list(want)}, table has {table.columns}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(table.to_csv(want))
    return path
