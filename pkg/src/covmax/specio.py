"""JSON documents for generator specs, study configs and reports; CSV matrices."""

from __future__ import annotations

import csv
import json
import math
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

from .core import CovmaxError
from .processes import (
    GaussianSpec,
    IIDSpec,
    InnovationDist,
    LinearProcess,
    NonstationaryLinearSpec,
    StationaryLinearSpec,
    ar1_coeffs,
    column_scaled,
    long_memory_coeffs,
)


class SchemaError(CovmaxError):
    def __init__(self, schema: str, path: str, message: str):
        self.path = path
        super().__init__(f"{schema}: {path}: {message}")


class MatrixFileError(CovmaxError):
    pass


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("covmax").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc: Any, name: str) -> None:
    """Raise :class:`SchemaError` naming the JSON path of the first violation."""
    validator = jsonschema.Draft202012Validator(load_schema(name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise SchemaError(name, e.json_path, e.message)


def innovations_from_dict(d: Optional[dict]) -> InnovationDist:
    d = d or {}
    return InnovationDist(d.get("dist", "normal"), d.get("df"))


def spec_from_dict(doc: dict):
    """Build a generator spec object from its JSON document."""
    validate(doc, "generator")
    kind = doc["type"]
    innov = innovations_from_dict(doc.get("innovations"))
    if kind == "iid":
        return IIDSpec(innov)
    if kind == "stationary_linear":
        if "coeffs" in doc:
            a = np.asarray(doc["coeffs"], dtype=np.float64)
        elif "long_memory" in doc:
            lm = doc["long_memory"]
            a = long_memory_coeffs(lm.get("beta", 0.75), lm["J"], lm.get("variant", "power_law"))
        elif "ar1" in doc:
            a = ar1_coeffs(doc["ar1"]["phi"], doc["ar1"]["J"])
        else:
            raise SchemaError("generator", "$", "stationary_linear needs coeffs, long_memory or ar1")
        return StationaryLinearSpec(a, innov)
    if kind == "nonstationary_linear":
        return NonstationaryLinearSpec(np.asarray(doc["f"], dtype=np.float64), innov)
    if "cov" in doc:
        return GaussianSpec(np.asarray(doc["cov"], dtype=np.float64))
    if "autocov" in doc:
        return GaussianSpec.from_autocov(doc["autocov"])
    raise SchemaError("generator", "$", "gaussian needs cov or autocov")


def build_process(doc: dict, m: Optional[int] = None) -> LinearProcess:
    """Linear process for a generator document, with any column scaling applied."""
    spec = spec_from_dict(doc)
    if m is None:
        m = doc.get("m")
    if isinstance(spec, (NonstationaryLinearSpec, GaussianSpec)):
        proc = spec.process(m)
    else:
        if m is None:
            raise CovmaxError("dimension m is required for this generator")
        proc = spec.process(m)
    scales = doc.get("column_scales")
    if scales:
        factors = np.ones(proc.m)
        for entry in scales:
            col = entry["column"]
            if not 0 <= col < proc.m:
                raise SchemaError("generator", "$.column_scales", f"column {col} out of range")
            factors[col] = entry["factor"]
        proc = column_scaled(proc, factors)
    return proc


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    """JSON text; floats round-trip exactly and non-finite values become null."""
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CovmaxError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}")


def read_matrix_csv(path) -> np.ndarray:
    """Read a rectangular numeric CSV; a non-numeric first row is taken as a header."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise MatrixFileError(f"{path}: file is empty")

    def parse(r):
        return [float(c) for c in r]

    start = 0
    try:
        parse(rows[0])
    except ValueError:
        start = 1
    width = len(rows[start]) if start < len(rows) else 0
    data = []
    for k, r in enumerate(rows[start:], start=start + 1):
        if len(r) != width:
            raise MatrixFileError(f"{path}: row {k} has {len(r)} columns, expected {width}")
        vals = []
        for c, cell in enumerate(r, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise MatrixFileError(f"{path}: row {k}, column {c}: cannot parse {cell!r}")
            if not math.isfinite(v):
                raise MatrixFileError(f"{path}: row {k}, column {c}: non-finite value {cell!r}")
            vals.append(v)
        data.append(vals)
    if not data:
        raise MatrixFileError(f"{path}: no data rows")
    return np.array(data, dtype=np.float64)


def write_matrix_csv(path, A, header: Optional[list[str]] = None) -> None:
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in A:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
