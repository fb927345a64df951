"""CSV and JSON interchange: survival tables, group files, model artifacts.

Every JSON artifact carries the same envelope (tool name and version, the
resolved configuration, the seed, sha256 digests of the inputs) plus a
``digest`` over its canonical serialisation.  The ``created_at`` timestamp is
left out of that digest so two runs with the same inputs and seed hash the
same.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import ParseError, SchemaError
from .penalty import GroupStructure, PenaltySpec
from .survival_core import BaselineHazardTable, SurvivalDataset

TOOL = "exclusive-cox"
UNDIGESTED = ("created_at", "digest")


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class RawTable:
    """Header and string cells of a CSV, kept verbatim for pass-through."""

    header: list
    rows: list


def read_raw_csv(path) -> RawTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("file is empty", row=1) from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(row)}", row=lineno)
            rows.append([c.strip() for c in row])
    return RawTable(header, rows)


def _check_survival_header(header):
    if header[:2] != ["time", "status"]:
        raise SchemaError(f"data header must start with 'time,status', got {','.join(header[:2])!r}")
    variables = header[2:]
    if not variables:
        raise SchemaError("data has no covariate columns")
    seen = set()
    for v in variables:
        if not v:
            raise SchemaError("empty covariate name in header")
        if v in seen:
            raise SchemaError(f"duplicate column {v!r}")
        seen.add(v)
    return variables


def _parse_float(cell, row, column):
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"cannot parse {cell!r} as a number", row=row, column=column) from None


def table_to_dataset(table: RawTable) -> SurvivalDataset:
    """Convert a ``time,status,<vars>`` table; status must be 0 or 1."""
    variables = _check_survival_header(table.header)
    n, p = len(table.rows), len(variables)
    time = np.empty(n)
    status = np.empty(n, dtype=bool)
    X = np.empty((n, p))
    for i, row in enumerate(table.rows):
        line = i + 2
        time[i] = _parse_float(row[0], line, "time")
        s = _parse_float(row[1], line, "status")
        if s not in (0.0, 1.0):
            raise SchemaError(f"status must be 0 or 1, found {row[1]!r} at row {line}")
        status[i] = s == 1.0
        for j, cell in enumerate(row[2:]):
            X[i, j] = _parse_float(cell, line, variables[j])
    return SurvivalDataset(time, status, X, tuple(variables))


def read_survival_csv(path) -> SurvivalDataset:
    return table_to_dataset(read_raw_csv(path))


def _fmt(x):
    return repr(float(x))


def write_survival_csv(data: SurvivalDataset, path):
    rows = ([_fmt(t), "1" if e else "0", *map(_fmt, x)]
            for t, e, x in zip(data.time, data.event, data.X))
    write_csv(path, ["time", "status", *data.feature_names], rows)


def write_groups_csv(groups: GroupStructure, variables, path):
    names = groups.names or tuple(str(g) for g in range(groups.n_groups))
    write_csv(path, ["variable", "group"],
              ([v, names[g]] for v, g in zip(variables, groups.group_of)))


def write_csv(path, header, rows):
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


class atomic_writer:
    """Text file written to a sibling temp file and renamed on success."""

    def __init__(self, path):
        self.path = Path(path)

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, self.tmp = tempfile.mkstemp(dir=self.path.parent, prefix=f".{self.path.name}.")
        self.fh = os.fdopen(fd, "w", newline="", encoding="utf-8")
        return self.fh

    def __exit__(self, exc_type, exc, tb):
        self.fh.close()
        if exc_type is None:
            os.replace(self.tmp, self.path)
        else:
            os.unlink(self.tmp)
        return False


# ---------------------------------------------------------------------------
# JSON artifacts


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def input_record(path):
    return {"file": Path(path).name, "sha256": file_digest(path)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def canonical(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def payload_digest(doc) -> str:
    body = {k: v for k, v in doc.items() if k not in UNDIGESTED}
    return hashlib.sha256(canonical(body).encode("utf-8")).hexdigest()


def make_artifact(kind, config, seed, inputs, body):
    doc = {"tool": TOOL, "version": __version__, "kind": kind,
           "config": config, "seed": seed, "inputs": inputs}
    doc.update(body)
    doc = _jsonable(doc)
    doc["digest"] = payload_digest(doc)
    doc["created_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return doc


def write_artifact(doc, path, schema=None):
    """Validate (when a schema is given) and write ``doc`` as indented JSON."""
    if schema is not None:
        validate(doc, schema)
    with atomic_writer(path) as fh:
        json.dump(doc, fh, sort_keys=True, indent=2, allow_nan=False)
        fh.write("\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", row=exc.lineno) from None


def validate(doc, schema):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"{where}: {exc.message}") from None


_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}
_ENVELOPE = {
    "tool": {"const": TOOL},
    "version": {"type": "string"},
    "kind": {"type": "string"},
    "config": {"type": "object"},
    "seed": {"type": ["integer", "null"]},
    "inputs": {"type": "object",
               "additionalProperties": {
                   "type": "object", "required": ["file", "sha256"],
                   "properties": {"file": {"type": "string"},
                                  "sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"}}}},
    "digest": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
    "created_at": {"type": "string"},
}


def _schema(kind, required, properties):
    props = dict(_ENVELOPE)
    props.update(properties)
    props["kind"] = {"const": kind}
    return {"type": "object", "required": list(_ENVELOPE) + required, "properties": props}


_PENALTY = {
    "type": "object", "required": ["family", "lambda", "alpha", "group_factors"],
    "properties": {
        "family": {"enum": ["exclusive", "lasso", "ridge", "elastic", "group", "ipf"]},
        "lambda": {"type": "number", "minimum": 0},
        "alpha": {"type": "number", "minimum": 0, "maximum": 1},
        "group_factors": {"type": ["array", "null"], "items": _NUM},
    },
}

MODEL_SCHEMA = _schema("model", [
    "penalty", "variables", "coefficients", "groups", "converged", "sweeps_used",
    "final_change", "objective_trace", "baseline_hazard"], {
    "penalty": _PENALTY,
    "variables": {"type": "array", "items": {"type": "string"}},
    "coefficients": {"type": "object", "additionalProperties": _NUM},
    "groups": {"type": "object", "additionalProperties": {"type": "string"}},
    "converged": {"type": "boolean"},
    "sweeps_used": {"type": "integer", "minimum": 0},
    "final_change": _NUM_OR_NULL,
    "objective_trace": {"type": "array", "items": _NUM_OR_NULL},
    "baseline_hazard": {
        "type": "object", "required": ["times", "cumulative_hazard"],
        "properties": {"times": {"type": "array", "items": _NUM},
                       "cumulative_hazard": {"type": "array", "items": _NUM}}},
})

CV_SCHEMA = _schema("cv", ["family", "lambdas", "mean_cv_loglik", "se_cv_loglik",
                           "best_lambda", "k", "repeats"], {
    "family": {"type": "string"},
    "lambdas": {"type": "array", "items": _NUM, "minItems": 1},
    "mean_cv_loglik": {"type": "array", "items": _NUM_OR_NULL},
    "se_cv_loglik": {"type": "array", "items": _NUM_OR_NULL},
    "best_lambda": _NUM,
    "k": {"type": "integer", "minimum": 2},
    "repeats": {"type": "integer", "minimum": 1},
})

TRUTH_SCHEMA = _schema("truth", ["scenario", "true_beta", "true_support", "groups"], {
    "scenario": {"type": "object"},
    "true_beta": {"type": "object", "additionalProperties": _NUM},
    "true_support": {"type": "array", "items": {"type": "string"}},
    "groups": {"type": "object", "additionalProperties": {"type": "string"}},
})

SCHEMAS = {"model": MODEL_SCHEMA, "cv": CV_SCHEMA, "truth": TRUTH_SCHEMA}


def group_names(groups: GroupStructure):
    return groups.names or tuple(str(g) for g in range(groups.n_groups))


def model_body(model, variables):
    names = group_names(model.groups)
    return {
        "penalty": model.spec.to_dict(),
        "variables": list(variables),
        "coefficients": {v: float(b) for v, b in zip(variables, model.beta)},
        "groups": {v: names[g] for v, g in zip(variables, model.groups.group_of)},
        "converged": model.converged,
        "sweeps_used": model.sweeps_used,
        "final_change": model.final_change,
        "objective_trace": model.objective_trace,
        "baseline_hazard": model.baseline.to_dict(),
    }


@dataclass(frozen=True, eq=False)
class LoadedModel:
    """The parts of a saved model needed for prediction."""

    beta: np.ndarray
    baseline: BaselineHazardTable
    variables: tuple
    spec: PenaltySpec


def load_model(path) -> LoadedModel:
    doc = read_json(path)
    validate(doc, MODEL_SCHEMA)
    variables = tuple(doc["variables"])
    missing = [v for v in variables if v not in doc["coefficients"]]
    if missing:
        raise SchemaError(f"model has no coefficient for {missing[0]!r}")
    beta = np.array([doc["coefficients"][v] for v in variables], dtype=float)
    pen = doc["penalty"]
    spec = PenaltySpec(pen["family"], pen["lambda"], pen["alpha"], pen["group_factors"])
    return LoadedModel(beta, BaselineHazardTable.from_dict(doc["baseline_hazard"]),
                       variables, spec)
