"""JSON report and CSV series emission, plus the matrix JSON format."""

from __future__ import annotations

import csv
import io
import json
import sys
from typing import Any, Iterable

import numpy as np

from .errors import InputError

SCHEMA = 1


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def make_report(command: str, quantity: str, params: dict, result: dict, **extra) -> dict:
    rep = {"schema": SCHEMA, "command": command, "quantity": quantity,
           "params": params, "result": result}
    rep.update(extra)
    return to_jsonable(rep)


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False, allow_nan=True) + "\n"


def write_text(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def csv_text(header: list[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# -- matrix JSON -----------------------------------------------------------------


def matrix_from_json(obj: Any) -> np.ndarray:
    """{"n": n, "entries": [[...], ...]} or a bare nested list."""
    if isinstance(obj, dict):
        if "entries" not in obj:
            raise InputError('matrix JSON needs an "entries" field')
        M = np.array(obj["entries"], dtype=float)
        n = obj.get("n")
        if n is not None and M.shape != (n, n):
            raise InputError(f"entries do not form a {n}x{n} matrix")
    else:
        M = np.array(obj, dtype=float)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InputError("matrix must be square")
    return M


def matrix_to_json(M) -> dict:
    M = np.asarray(M)
    return {"n": int(M.shape[0]), "entries": M.tolist()}


def load_json(path: str | None) -> Any:
    try:
        if path in (None, "-"):
            return json.load(sys.stdin)
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in {path or 'stdin'}: {exc}") from None
    except OSError as exc:
        raise InputError(str(exc)) from None


def parse_json_arg(text: str, what: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        raise InputError(f"{what} is not valid JSON: {text!r}") from None


def parse_complex_list(text: str, what: str = "s") -> list[complex]:
    """JSON list whose entries are numbers, [re, im] pairs or {"re", "im"}."""
    val = parse_json_arg(text, what)
    if not isinstance(val, list):
        val = [val]
    out = []
    for z in val:
        if isinstance(z, (int, float)):
            out.append(complex(z))
        elif isinstance(z, list) and len(z) == 2:
            out.append(complex(z[0], z[1]))
        elif isinstance(z, dict) and "re" in z:
            out.append(complex(z["re"], z.get("im", 0.0)))
        else:
            raise InputError(f"cannot read {what} entry {z!r}")
    return out
