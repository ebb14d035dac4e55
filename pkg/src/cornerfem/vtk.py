"""Legacy ASCII VTK output (unstructured grid of triangles)."""
from __future__ import annotations

from pathlib import Path

import numpy as np

VTK_TRIANGLE = 5


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_vtk(path, mesh, point_data: dict | None = None, title: str = "cornerfem") -> None:
    """Write ``mesh`` and optional scalar point data.

    Floats are printed with 17 significant digits, so reading the file back
    reproduces every value bit for bit.
    """
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {mesh.n_vertices} double")
    lines += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.vertices]
    nt = mesh.n_triangles
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += [str(VTK_TRIANGLE)] * nt
    if point_data:
        lines.append(f"POINT_DATA {mesh.n_vertices}")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (mesh.n_vertices,):
                raise ValueError(f"point data {name!r} has shape {values.shape}")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines += [_fmt(v) for v in values]
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk_point_data(path) -> dict[str, np.ndarray]:
    """Scalar point data of a file written by :func:`write_vtk`."""
    tokens = Path(path).read_text().split("\n")
    out = {}
    i = 0
    n = None
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("POINT_DATA"):
            n = int(line.split()[1])
        elif line.startswith("SCALARS") and n is not None:
            name = line.split()[1]
            i += 2  # skip LOOKUP_TABLE
            out[name] = np.array([float(v) for v in tokens[i:i + n]])
            i += n
            continue
        i += 1
    return out


def read_vtk_points(path) -> np.ndarray:
    lines = Path(path).read_text().split("\n")
    for i, line in enumerate(lines):
        if line.startswith("POINTS"):
            n = int(line.split()[1])
            return np.array([[float(v) for v in row.split()[:2]] for row in lines[i + 1:i + 1 + n]])
    raise ValueError("no POINTS section")
