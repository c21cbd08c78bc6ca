"""Legacy ASCII VTK unstructured-grid export and a matching minimal reader."""

from __future__ import annotations

import os
import re

import numpy as np

from ..errors import IOFailure, ValidationError
from .mesh import Mesh

VTK_TETRA = 10
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


def _fmt(values) -> str:
    return "\n".join(repr(float(v)) for v in values)


def export_vtk(mesh: Mesh, path, fields: dict | None = None, cell_fields: dict | None = None) -> str:
    """Write ``mesh`` and nodal ``fields`` as a legacy VTK text file.

    The tissue tags always go out as an integer cell array named ``tissue``.
    Returns the path written. Floats are written with ``repr`` so they
    round-trip exactly.
    """
    fields = dict(fields or {})
    cell_fields = dict(cell_fields or {})
    for name, vals in fields.items():
        if not _NAME.match(name):
            raise ValidationError(f"field name {name!r} is not a valid VTK identifier")
        if len(vals) != mesh.n_nodes:
            raise ValidationError(f"field {name!r} has {len(vals)} values for {mesh.n_nodes} nodes")
    for name, vals in cell_fields.items():
        if len(vals) != mesh.n_elements:
            raise ValidationError(f"cell field {name!r} has {len(vals)} values for {mesh.n_elements} cells")

    n, e = mesh.n_nodes, mesh.n_elements
    out = ["# vtk DataFile Version 3.0", "rtmsim tetrahedral mesh", "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {n} double"]
    out += [" ".join(repr(float(c)) for c in p) for p in mesh.nodes]
    out.append(f"CELLS {e} {5 * e}")
    out += ["4 " + " ".join(str(int(i)) for i in t) for t in mesh.tets]
    out.append(f"CELL_TYPES {e}")
    out += [str(VTK_TETRA)] * e
    out += [f"CELL_DATA {e}", "SCALARS tissue int 1", "LOOKUP_TABLE default"]
    out += [str(int(t)) for t in mesh.tissue]
    for name, vals in cell_fields.items():
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default", _fmt(vals)]
    if fields:
        out.append(f"POINT_DATA {n}")
        for name, vals in fields.items():
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default", _fmt(vals)]
    text = "\n".join(out) + "\n"
    path = os.fspath(path)
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_vtk(path) -> dict:
    """Parse a legacy ASCII unstructured grid of tetrahedra.

    Returns ``{"points", "cells", "cell_data", "point_data"}``. Only the subset
    of the format that :func:`export_vtk` emits (SCALARS arrays) is handled.
    """
    try:
        with open(path, encoding="ascii") as fh:
            tokens = fh.read().split("\n")
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    if not tokens[0].startswith("# vtk DataFile Version"):
        raise ValidationError("missing legacy VTK header")
    if tokens[2].strip() != "ASCII":
        raise ValidationError("only ASCII files are supported")
    words = " ".join(tokens[3:]).split()
    pos = 0

    def take(k):
        nonlocal pos
        chunk = words[pos:pos + k]
        pos += k
        return chunk

    res = {"points": None, "cells": None, "cell_data": {}, "point_data": {}}
    section, count = None, 0
    while pos < len(words):
        key = take(1)[0]
        if key == "DATASET":
            if take(1)[0] != "UNSTRUCTURED_GRID":
                raise ValidationError("not an unstructured grid")
        elif key == "POINTS":
            n, _ = take(2)
            res["points"] = np.array(take(3 * int(n)), dtype=float).reshape(-1, 3)
        elif key == "CELLS":
            e, size = (int(v) for v in take(2))
            raw = np.array(take(size), dtype=np.int64).reshape(e, -1)
            if (raw[:, 0] != 4).any():
                raise ValidationError("only tetrahedral cells are supported")
            res["cells"] = raw[:, 1:]
        elif key == "CELL_TYPES":
            e = int(take(1)[0])
            types = np.array(take(e), dtype=int)
            if (types != VTK_TETRA).any():
                raise ValidationError("unexpected cell type")
        elif key in ("CELL_DATA", "POINT_DATA"):
            section, count = key, int(take(1)[0])
        elif key == "SCALARS":
            name, dtype = take(2)
            if words[pos] not in ("LOOKUP_TABLE",):
                take(1)  # component count
            take(2)  # LOOKUP_TABLE default
            arr = np.array(take(count), dtype=np.int64 if dtype == "int" else float)
            target = "cell_data" if section == "CELL_DATA" else "point_data"
            res[target][name] = arr
        else:
            raise ValidationError(f"unsupported VTK keyword {key!r}")
    return res
