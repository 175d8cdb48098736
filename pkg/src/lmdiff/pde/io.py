"""CSV snapshots with a JSON sidecar."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .diagnostics import lp_norm
from .solver import SCHEME_VERSION, DensityField, GridSpec, PdeRun

FLOAT_FORMAT = "%.17g"


def write_fields_csv(path, fields: Sequence[DensityField]) -> Path:
    """One row ``t, x, a, n`` per grid node and snapshot."""
    path = Path(path)
    rows = []
    for fld in fields:
        g = fld.grid
        xx, aa = np.meshgrid(g.x, g.a)
        rows.append(np.column_stack([np.full(xx.size, fld.t), xx.ravel(), aa.ravel(), fld.n.ravel()]))
    data = np.vstack(rows) if rows else np.empty((0, 4))
    np.savetxt(path, data, delimiter=",", fmt=FLOAT_FORMAT, header="t,x,a,n", comments="")
    return path


def read_fields_csv(path, grid: GridSpec) -> list[np.ndarray]:
    """Density arrays, one per snapshot, in the order written."""
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    if header != ["t", "x", "a", "n"]:
        raise ValueError(f"unexpected header {header}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    per = grid.na * grid.nx
    return [data[k : k + per, 3].reshape(grid.na, grid.nx) for k in range(0, data.shape[0], per)]


def sidecar(run: PdeRun) -> dict:
    """Atom, mass and norm curves plus grid metadata."""
    return {
        "scheme": SCHEME_VERSION,
        "grid": run.grid.metadata(),
        "dt_used": run.dt,
        "steps": run.steps,
        "substeps": run.substeps,
        "snapshots": [
            {"t": f.t, "p": f.p, "q": f.q, "l1": lp_norm(f, 1), "l2": lp_norm(f, 2), "mass": f.total_mass}
            for f in run.fields
        ],
        "curves": {
            "t": run.curve_t.tolist(),
            "p": run.curve_p.tolist(),
            "q": run.curve_q.tolist(),
            "mass": run.curve_mass.tolist(),
            "l2": run.curve_l2.tolist(),
        },
    }


def write_run(directory, run: PdeRun, stem: str = "field") -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.json`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = write_fields_csv(directory / f"{stem}.csv", run.fields)
    json_path = directory / f"{stem}.json"
    json_path.write_text(json.dumps(sidecar(run), indent=2, sort_keys=True) + "\n")
    return csv_path, json_path
