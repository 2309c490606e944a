"""Series CSV ingestion, model JSON persistence and document schemas."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np
from numpy.typing import ArrayLike

from .model import GStmarModel, ModelError, ModelOrder, Regime

MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["order", "regimes", "alphas", "constraints", "meta"],
    "additionalProperties": False,
    "properties": {
        "order": {
            "type": "object",
            "required": ["p", "m1", "m2"],
            "additionalProperties": False,
            "properties": {
                "p": {"type": "integer", "minimum": 1},
                "m1": {"type": "integer", "minimum": 0},
                "m2": {"type": "integer", "minimum": 0},
            },
        },
        "regimes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["phi0", "phi", "sigma2"],
                "additionalProperties": False,
                "properties": {
                    "phi0": {"type": "number"},
                    "phi": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                    "sigma2": {"type": "number", "exclusiveMinimum": 0},
                    "nu": {"type": "number", "exclusiveMinimum": 2},
                },
            },
        },
        "alphas": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "constraints": {
            "type": "object",
            "required": ["shared_ar"],
            "properties": {"shared_ar": {"type": "boolean"}},
        },
        "meta": {
            "type": "object",
            "properties": {
                "created": {"type": ["string", "null"]},
                "seed": {"type": ["integer", "null"]},
                "data_hash": {"type": ["string", "null"]},
            },
        },
    },
}

FIT_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["order", "loglik", "mode", "n_params", "n_obs", "aic", "hqic", "bic",
                 "acf_resid", "acf_sq_resid", "acf_band", "skewness", "excess_kurtosis",
                 "jarque_bera", "jarque_bera_pvalue", "large_dof_flags", "normality_caveat"],
    "properties": {
        "order": {"type": "string"},
        "loglik": {"type": "number"},
        "mode": {"enum": ["exact", "conditional"]},
        "n_params": {"type": "integer", "minimum": 1},
        "n_obs": {"type": "integer", "minimum": 2},
        "aic": {"type": "number"},
        "hqic": {"type": "number"},
        "bic": {"type": "number"},
        "acf_resid": {"type": "array", "items": {"type": "number"}},
        "acf_sq_resid": {"type": "array", "items": {"type": ["number", "null"]}},
        "acf_band": {"type": "number"},
        "skewness": {"type": "number"},
        "excess_kurtosis": {"type": "number"},
        "jarque_bera": {"type": "number"},
        "jarque_bera_pvalue": {"type": "number"},
        "large_dof_flags": {"type": "array", "items": {"type": "boolean"}},
        "max_ar_modulus": {"type": "number"},
        "normality_caveat": {"type": "string"},
        "std_errors": {"type": ["array", "null"], "items": {"type": "number"}},
        "hessian_ok": {"type": ["boolean", "null"]},
    },
}


class IngestError(ValueError):
    """Malformed or inconsistent series file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


# --- model documents -------------------------------------------------------------

def data_hash(values: ArrayLike) -> str:
    arr = np.ascontiguousarray(np.asarray(values, dtype="<f8"))
    return "sha256:" + hashlib.sha256(arr.tobytes()).hexdigest()


def model_to_dict(model: GStmarModel) -> dict:
    regimes = []
    for reg in model.regimes:
        d = {"phi0": reg.phi0, "phi": reg.phi.tolist(), "sigma2": reg.sigma2}
        if reg.is_t:
            d["nu"] = reg.nu
        regimes.append(d)
    meta = {"created": None, "seed": None, "data_hash": None}
    meta.update(model.meta)
    return {
        "order": {"p": model.p, "m1": model.order.m1, "m2": model.order.m2},
        "regimes": regimes,
        "alphas": model.alphas.tolist(),
        "constraints": {"shared_ar": model.shared_ar},
        "meta": meta,
    }


def model_from_dict(doc: dict) -> GStmarModel:
    """Validate against MODEL_SCHEMA, then build the model (ModelError on constraint violations)."""
    try:
        jsonschema.validate(doc, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise ModelError(f"model document invalid at '{path}': {exc.message}") from None
    o = doc["order"]
    order = ModelOrder(o["p"], o["m1"], o["m2"])
    regimes = tuple(Regime(r["phi0"], r["phi"], r["sigma2"], r.get("nu")) for r in doc["regimes"])
    return GStmarModel(order, regimes, np.asarray(doc["alphas"], dtype=float),
                       bool(doc["constraints"]["shared_ar"]), dict(doc["meta"]))


def save_model(model: GStmarModel, path: str | Path) -> None:
    doc = model_to_dict(model)
    if doc["meta"].get("created") is None:
        doc["meta"]["created"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_model(path: str | Path) -> GStmarModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None
    return model_from_dict(doc)


# --- series files ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SeriesFile:
    values: np.ndarray
    months: list[str] | None  # "YYYY-MM" labels, None for undated files
    source: str = ""

    def __len__(self) -> int:
        return self.values.size


def _month_index(text: str, line: int) -> int:
    s = text.strip()
    try:
        if len(s) == 7:
            d = datetime.strptime(s, "%Y-%m").date()
        else:
            d = date.fromisoformat(s)
    except ValueError:
        raise IngestError(f"cannot parse date {text!r} (expected YYYY-MM or YYYY-MM-DD)", line) from None
    return d.year * 12 + d.month - 1


def _label(idx: int) -> str:
    return f"{idx // 12:04d}-{idx % 12 + 1:02d}"


def _number(text: str, line: int, what: str) -> float:
    s = text.strip()
    if s in ("", ".", "NA", "NaN", "nan"):
        raise IngestError(f"missing {what}", line)
    try:
        v = float(s)
    except ValueError:
        raise IngestError(f"cannot parse {what} {text!r}", line) from None
    if not np.isfinite(v):
        raise IngestError(f"non-finite {what}", line)
    return v


def _read_rows(path: Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    with open(path, newline="") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if r and any(c.strip() for c in r)]
    if not rows:
        raise IngestError(f"{path}: file is empty")
    header = [c.strip().lower() for c in rows[0][1]]
    return header, rows[1:]


def _dated(rows, n_values: int, path) -> tuple[list[int], np.ndarray]:
    months, vals = [], []
    for line, r in rows:
        if len(r) < 1 + n_values:
            raise IngestError(f"expected {1 + n_values} columns, got {len(r)}", line)
        m = _month_index(r[0], line)
        if months and m <= months[-1]:
            raise IngestError(f"dates must be strictly increasing ({_label(m)} after {_label(months[-1])})", line)
        if months and m != months[-1] + 1:
            raise IngestError(f"gap in monthly series: {_label(months[-1] + 1)} is missing", line)
        months.append(m)
        vals.append([_number(r[1 + j], line, f"value for {_label(m)}") for j in range(n_values)])
    if not months:
        raise IngestError(f"{path}: no data rows")
    return months, np.array(vals)


def read_series_csv(path: str | Path) -> SeriesFile:
    """Read ``date,value``, ``date,a,b`` (spread a - b) or an undated file with a ``value`` column."""
    path = Path(path)
    header, rows = _read_rows(path)
    if header and header[0] in ("date", "month", "observation_date"):
        n = len(header) - 1
        if n not in (1, 2):
            raise IngestError("dated files need one value column or two (a, b) columns", 1)
        months, vals = _dated(rows, n, path)
        values = vals[:, 0] if n == 1 else vals[:, 0] - vals[:, 1]
        return SeriesFile(values, [_label(m) for m in months], str(path))
    if "value" not in header:
        raise IngestError("header must start with 'date' or contain a 'value' column", 1)
    col = header.index("value")
    path_col = header.index("path") if "path" in header else None
    first_path = None
    values = []
    for line, r in rows:
        if path_col is not None:
            first_path = r[path_col] if first_path is None else first_path
            if r[path_col] != first_path:
                continue
        if len(r) <= col:
            raise IngestError(f"expected at least {col + 1} columns, got {len(r)}", line)
        values.append(_number(r[col], line, "value"))
    if not values:
        raise IngestError(f"{path}: no data rows")
    return SeriesFile(np.array(values), None, str(path))


def _clip_months(months: list[int], start: str | None, end: str | None):
    lo = _month_index(start, 0) if start else months[0]
    hi = _month_index(end, 0) if end else months[-1]
    return lo, hi


def ingest_spread(file_a: str | Path, file_b: str | Path | None = None,
                  start: str | None = None, end: str | None = None) -> SeriesFile:
    """Monthly spread a - b from two ``date,value`` files (first column any date name)
    or from one combined ``date,a,b`` file, optionally clipped to [start, end]."""
    if file_b is None:
        header, rows = _read_rows(Path(file_a))
        months, vals = _dated(rows, 2, file_a)
        a = dict(zip(months, vals[:, 0]))
        b = dict(zip(months, vals[:, 1]))
    else:
        parsed = []
        for f in (file_a, file_b):
            _, rows = _read_rows(Path(f))
            months, vals = _dated(rows, 1, f)
            parsed.append(dict(zip(months, vals[:, 0])))
        a, b = parsed
    common = sorted(set(a) & set(b))
    if not common:
        raise IngestError("the two series do not overlap")
    lo, hi = _clip_months(common, start, end)
    for m in range(lo, hi + 1):
        if m not in a or m not in b:
            which = "first" if m not in a else "second"
            raise IngestError(f"month {_label(m)} is missing from the {which} series")
    months = list(range(lo, hi + 1))
    values = np.array([a[m] - b[m] for m in months])
    return SeriesFile(values, [_label(m) for m in months], f"{file_a} - {file_b}" if file_b else str(file_a))


def write_series_csv(series: SeriesFile, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if series.months is not None:
            w.writerow(["date", "value"])
            w.writerows((m, repr(float(v))) for m, v in zip(series.months, series.values))
        else:
            w.writerow(["t", "value"])
            w.writerows((t + 1, repr(float(v))) for t, v in enumerate(series.values))
