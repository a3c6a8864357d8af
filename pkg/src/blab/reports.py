"""Run-directory writer: JSON reports, CSV series, aligned text, manifest.

Every JSON artifact carries a ``schema`` tag naming one of the schemas in
``SCHEMAS`` and is checked against it before it is written.  Report bodies
contain no timestamps; the single wall-clock field lives in manifest.json.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import threading

import jsonschema
import numpy as np

_num = {"type": "number"}
_int = {"type": "integer"}
_flags = {"type": "object", "additionalProperties": {"type": "boolean"}}
_pairs = {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}}


def _obj(required: dict, **extra) -> dict:
    return {"type": "object", "required": sorted(required), "properties": required, **extra}


_section = _obj({
    "kind": {"enum": ["toeplitz", "hankel-gram", "hankel-explicit"]},
    "N": _int,
    "rows": _int,
    "alpha": _num,
    "symbol_provenance": {"type": "string"},
    "entries": _pairs,  # row-major [re, im]
})

_estimate = _obj({
    "kind": {"enum": ["hankel", "toeplitz"]},
    "lower": {"type": "number", "minimum": 0},
    "lower_outer": {"type": "number", "minimum": 0},
    "upper": {"type": "number", "minimum": 0},
    "lower_witness": {"type": "array", "items": _num},
    "upper_witness": _int,
    # (|z|, arg z, value, companion); the companion is null for Toeplitz probes
    "lower_scan": {"type": "array", "items": {"type": "array", "items": {"type": ["number", "null"]}, "minItems": 4, "maxItems": 4}},
    "upper_scan": _pairs,
    "flags": _flags,
})

_certificate = _obj({
    "kind": {"enum": ["hankel", "toeplitz"]},
    "family_kind": {"type": "string"},
    "M": _int,
    "N": _int,
    "weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
    "J": {"type": "number", "minimum": 0},
    "lower": _num,
    "upper": _num,
    "gap": _num,
    "lower_le_J": {"type": "boolean"},
    "boundary_vanishing": _obj({"passes": {"type": "boolean"}, "max_abs": _num}),
    "compactness_probe": _pairs,
})

_flag_map = {"type": "object", "additionalProperties": {"type": "boolean"}}

SCHEMAS = {
    "basis-check": _obj({
        "schema": {"const": "basis-check"},
        "config": {"type": "string"},
        "checks": {"type": "array", "items": _obj({
            "check": {"type": "string"}, "residual": _num, "tolerance": _num, "passes": {"type": "boolean"},
        })},
        "passes": {"type": "boolean"},
    }),
    "sections": _obj({
        "schema": {"const": "sections"},
        "config": {"type": "string"},
        "sections": {"type": "array", "items": _section},
        "norms": {"type": "object", "additionalProperties": _num},
        "flags": _flag_map,
    }),
    "essnorm": _obj({
        "schema": {"const": "essnorm"},
        "config": {"type": "string"},
        "estimates": {"type": "array", "items": _estimate},
        "flags": _flag_map,
    }),
    "sot": _obj({
        "schema": {"const": "sot"},
        "config": {"type": "string"},
        "schedule": _pairs,
        "reports": {"type": "array", "items": _obj({
            "operator_kind": {"enum": ["H", "H*", "T", "T*"]},
            "rows": {"type": "array", "items": _obj({
                "n": _int, "vector": {"type": "string"}, "residual": {"type": "number", "minimum": 0},
            })},
        })},
        "flags": _flag_map,
    }),
    "realize": _obj({
        "schema": {"const": "realize"},
        "config": {"type": "string"},
        "searches": {"type": "array", "minItems": 2, "items": _obj({
            "start": {"type": "string"},
            "weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
            "objective": _num,
            "bundle_gap": _num,
            "converged": {"type": "boolean"},
        })},
        "vertex_objectives": {"type": "array", "items": _num},
        "interpolants": {"type": "array", "items": _obj({"s": _num, "J": _num, "weights": {"type": "array"}})},
        "certificates": {"type": "array", "items": _certificate},
        "sweep": {"type": "array", "items": _obj({"N": _int, "M": _int, "J": _num, "lower": _num, "gap": _num})},
        "flags": _flag_map,
    }),
    "manifest": _obj({
        "command": {"type": "string"},
        "created": {"type": "string"},
        "exit_code": _int,
        "artifacts": {"type": "array", "items": _obj({
            "path": {"type": "string"}, "sha256": {"type": "string"}, "bytes": _int,
        })},
    }),
}


def jsonable(obj):
    """Recursively turn numpy scalars, arrays, tuples and complex numbers into JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x} in report")
        return x
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(obj.real), jsonable(obj.imag)]
    return obj


def validate(payload: dict, schema: str) -> None:
    jsonschema.validate(payload, SCHEMAS[schema])


def dumps(payload) -> str:
    return json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n"


def csv_text(header: list, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def aligned(header: list, rows, fmt: str = "{:.6g}") -> str:
    cells = [list(header)] + [[fmt.format(x) if isinstance(x, (float, np.floating)) else str(x) for x in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells) + "\n"


class RunWriter:
    """Single writer for a run directory; the manifest is written last."""

    def __init__(self, out_dir: str, command: str):
        self.out_dir = out_dir
        self.command = command
        self.artifacts = []
        self._lock = threading.Lock()
        os.makedirs(out_dir, exist_ok=True)

    def _write(self, name: str, text: str) -> str:
        data = text.encode("utf-8")
        path = os.path.join(self.out_dir, name)
        with self._lock:
            with open(path, "wb") as fh:
                fh.write(data)
            self.artifacts.append({"path": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})
        return path

    def json(self, name: str, payload: dict, schema: str) -> str:
        payload = jsonable(payload)
        validate(payload, schema)
        return self._write(name, dumps(payload))

    def csv(self, name: str, header: list, rows) -> str:
        return self._write(name, csv_text(header, rows))

    def text(self, name: str, text: str) -> str:
        return self._write(name, text)

    def finish(self, exit_code: int) -> str:
        manifest = {
            "command": self.command,
            "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "exit_code": int(exit_code),
            "artifacts": sorted(self.artifacts, key=lambda a: a["path"]),
        }
        validate(manifest, "manifest")
        path = os.path.join(self.out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps(manifest))
        return path
