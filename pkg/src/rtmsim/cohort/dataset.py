"""Thermometric datasets and their CSV form."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from ..errors import IOFailure, SchemaMismatch, ValidationError
from ..radiometry.measure import LABELS, N_POINTS, PROVENANCES, ThermoRecord

SCHEMA_VERSION = 1
FEATURES = tuple(f"t_mw_{i}" for i in range(N_POINTS)) + tuple(f"t_ir_{i}" for i in range(N_POINTS))
HEADER = ("id", "label", "provenance") + FEATURES


@dataclass(frozen=True)
class Dataset:
    records: tuple
    provenance: str = "model"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        ids = [r.patient_id for r in self.records]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})[:3]
            raise ValidationError(f"duplicate patient ids {dup}")

    def __len__(self):
        return len(self.records)

    @property
    def ids(self) -> list:
        return [r.patient_id for r in self.records]

    def X(self) -> np.ndarray:
        return np.array([r.features for r in self.records], dtype=float).reshape(len(self), len(FEATURES))

    def y(self) -> np.ndarray:
        return np.array([r.y for r in self.records], dtype=np.int64)

    def counts(self) -> dict:
        y = self.y()
        return {"healthy": int((y == 0).sum()), "cancer": int((y == 1).sum())}

    def subset(self, indices, provenance: str | None = None) -> "Dataset":
        return Dataset(tuple(self.records[i] for i in indices), provenance or self.provenance)

    def __add__(self, other: "Dataset") -> "Dataset":
        prov = self.provenance if self.provenance == other.provenance else "mixed"
        return Dataset(self.records + other.records, prov)


def _format(v: float) -> str:
    return repr(float(v))


def dataset_to_csv(ds: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in ds.records:
        w.writerow([r.patient_id, r.label, r.provenance, *(_format(v) for v in r.features)])
    return buf.getvalue()


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the same directory and rename into place."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def save_csv(ds: Dataset, path) -> None:
    atomic_write_text(path, dataset_to_csv(ds))


def load_csv(path, provenance: str | None = None) -> Dataset:
    """Read and validate a dataset CSV.

    Raises :class:`SchemaMismatch` when the header differs from the canonical
    one and :class:`ValidationError` (with the 1-based data row) on bad rows.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise SchemaMismatch("empty file: missing header")
    header = tuple(rows[0])
    missing = [c for c in HEADER if c not in header]
    if missing:
        raise SchemaMismatch(f"missing column {missing[0]!r}" + (f" (and {len(missing) - 1} more)" if len(missing) > 1 else ""))
    extra = [c for c in header if c not in HEADER]
    if extra:
        raise SchemaMismatch(f"unexpected column {extra[0]!r}")
    if header != HEADER:
        raise SchemaMismatch("columns are not in the canonical order")
    records = []
    for n, row in enumerate(rows[1:], start=1):
        if len(row) != len(HEADER):
            raise ValidationError(f"row {n}: expected {len(HEADER)} fields, got {len(row)}")
        pid, label, prov = row[:3]
        if label not in LABELS:
            raise ValidationError(f"row {n}: label {label!r} not in {LABELS}")
        if prov not in PROVENANCES:
            raise ValidationError(f"row {n}: provenance {prov!r} not in {PROVENANCES}")
        try:
            vals = [float(v) for v in row[3:]]
        except ValueError as exc:
            raise ValidationError(f"row {n}: {exc}") from None
        rec = ThermoRecord(vals[:N_POINTS], vals[N_POINTS:], label, prov, pid)
        try:
            rec.validate()
        except ValidationError as exc:
            raise ValidationError(f"row {n}: {exc}") from None
        records.append(rec)
    if provenance is None:
        provs = {r.provenance for r in records}
        provenance = provs.pop() if len(provs) == 1 else ("mixed" if provs else "model")
    try:
        return Dataset(tuple(records), provenance)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None
