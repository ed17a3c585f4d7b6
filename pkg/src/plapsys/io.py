"""Delimited-value files and text reports with a provenance header.

Every emitted file starts with ``#`` comment lines recording the package
version and the SHA-256 digest of the resolved run configuration.  Numbers
are written with ``repr`` so output is exact and byte-stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .mesh import Mesh


@dataclass(frozen=True)
class Provenance:
    version: str
    config_hash: str

    def header(self) -> str:
        return f"# artifact: plapsys {self.version}\n# config_sha256: {self.config_hash}\n"


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_table(path: str | Path, columns: Mapping[str, Sequence], prov: Provenance) -> Path:
    """Comma-separated table; the first non-comment line names the columns."""
    names = list(columns)
    cols = [list(columns[n]) for n in names]
    if len({len(c) for c in cols}) > 1:
        raise ValueError("columns differ in length")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(names)]
    lines += [",".join(_cell(c[i]) for c in cols) for i in range(len(cols[0]) if cols else 0)]
    path.write_text(prov.header() + "\n".join(lines) + "\n")
    return path


def _coord_columns(mesh: Mesh) -> dict:
    cols = {"node": range(mesh.n_nodes), "x": mesh.points[:, 0]}
    if mesh.dim == 2:
        cols["y"] = mesh.points[:, 1]
    return cols


def write_fields(path: str | Path, mesh: Mesh, fields: Mapping[str, np.ndarray], prov: Provenance) -> Path:
    """Nodal fields as ``node, x[, y], name...`` rows."""
    cols = _coord_columns(mesh)
    for name, values in fields.items():
        values = np.asarray(values)
        if values.shape != (mesh.n_nodes,):
            raise ValueError(f"field {name!r} has {values.shape} values, mesh has {mesh.n_nodes} nodes")
        cols[name] = values
    return write_table(path, cols, prov)


def write_mesh(directory: str | Path, stem: str, mesh: Mesh, prov: Provenance) -> tuple[Path, Path]:
    """Nodes (with boundary flag) and connectivity as two tables."""
    directory = Path(directory)
    nodes = _coord_columns(mesh)
    nodes["boundary"] = mesh.boundary.astype(int)
    cells = {"cell": range(len(mesh.cells))}
    for j in range(mesh.cells.shape[1]):
        cells[f"n{j}"] = mesh.cells[:, j]
    return (
        write_table(directory / f"{stem}_nodes.csv", nodes, prov),
        write_table(directory / f"{stem}_cells.csv", cells, prov),
    )


def read_table(path: str | Path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    """Inverse of :func:`write_table`.

    Returns the header entries (``key: value`` comment lines) and the
    columns, as floats where every entry parses and as strings otherwise.
    """
    meta, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(":")
            if value:
                meta[key.strip()] = value.strip()
        elif line:
            body.append(line.split(","))
    if not body:
        raise ValueError(f"{path}: no column header")
    names, rows = body[0], body[1:]
    raw = np.array(rows, dtype=str).reshape(len(rows), len(names))
    cols = {}
    for j, n in enumerate(names):
        try:
            cols[n] = raw[:, j].astype(float)
        except ValueError:
            cols[n] = raw[:, j]
    return meta, cols


def read_field(path: str | Path, name: str) -> np.ndarray:
    _, cols = read_table(path)
    if name not in cols:
        raise KeyError(f"{path}: no column {name!r}")
    return cols[name]


def write_report(path: str | Path, text: str, prov: Provenance) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(prov.header() + text)
    return path
