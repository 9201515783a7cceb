"""Binary field dumps with a one-line header and a JSON sidecar.

Layout: an ASCII header line, then the raw little-endian samples of each
component in flat-index order (direction 0 varies fastest). The sidecar
``<file>.json`` carries the grid, the run metadata and a SHA-256 of the file.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DumpError
from .lattice import GridSpec

__all__ = ["MAGIC", "FieldDump", "write_dump", "read_dump", "dtype_for"]

MAGIC = "TURBOGEN-DUMP/1"
_DTYPES = {"c16": "<c16", "c8": "<c8", "f8": "<f8", "f4": "<f4"}


def dtype_for(precision: str, complex_: bool) -> str:
    if precision not in ("single", "double"):
        raise DumpError(f"unknown precision {precision!r}")
    if complex_:
        return "c16" if precision == "double" else "c8"
    return "f8" if precision == "double" else "f4"


@dataclass
class FieldDump:
    kind: str
    data: np.ndarray  # (components, *extent)
    grid: GridSpec
    meta: dict


def _header(kind: str, dtype: str, components: int, extent) -> bytes:
    shape = "x".join(str(n) for n in extent)
    return f"{MAGIC} kind={kind} dtype={dtype} components={components} shape={shape} order=flat-dim0-fastest\n".encode()


def write_dump(path, kind: str, data: np.ndarray, grid: GridSpec, precision: str = "double", meta: dict | None = None) -> Path:
    """Write ``data`` (shape ``extent`` or ``(components, *extent)``)."""
    path = Path(path)
    arr = np.asarray(data)
    if arr.shape == grid.extent:
        arr = arr[None]
    if arr.shape[1:] != grid.extent:
        raise DumpError(f"{kind}: array shape {arr.shape} does not match grid {grid.extent}")
    code = dtype_for(precision, np.iscomplexobj(arr))
    body = b"".join(np.asarray(c, dtype=_DTYPES[code]).tobytes(order="F") for c in arr)
    blob = _header(kind, code, arr.shape[0], grid.extent) + body
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(blob)
    side = {
        "kind": kind,
        "dtype": code,
        "components": arr.shape[0],
        "n_alpha": list(grid.n_alpha),
        "domain_length": list(grid.domain_length),
        "sha256": hashlib.sha256(blob).hexdigest(),
        "meta": meta or {},
    }
    path.with_name(path.name + ".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
    return path


def read_dump(path, grid: GridSpec | None = None, kind: str | None = None) -> FieldDump:
    """Read and check a dump. With ``grid`` the stored grid must match it."""
    path = Path(path)
    side_path = path.with_name(path.name + ".json")
    if not path.is_file():
        raise DumpError(f"missing field file: {path}")
    if not side_path.is_file():
        raise DumpError(f"missing metadata sidecar: {side_path}")
    blob = path.read_bytes()
    try:
        side = json.loads(side_path.read_text())
    except json.JSONDecodeError as exc:
        raise DumpError(f"{side_path}: unreadable sidecar ({exc})") from exc
    if hashlib.sha256(blob).hexdigest() != side.get("sha256"):
        raise DumpError(f"{path}: checksum mismatch, file is corrupt or was modified")
    nl = blob.find(b"\n")
    fields = blob[:nl].decode("ascii", "replace").split() if nl > 0 else []
    if not fields or fields[0] != MAGIC:
        raise DumpError(f"{path}: not a turbogen dump")
    head = dict(f.split("=", 1) for f in fields[1:])
    stored = GridSpec(side["n_alpha"], tuple(side["domain_length"]))
    if grid is not None and (stored.n_alpha != grid.n_alpha or not np.allclose(stored.domain_length, grid.domain_length)):
        raise DumpError(f"{path}: grid {stored.n_alpha} does not match configured grid {grid.n_alpha}")
    if kind is not None and head["kind"] != kind:
        raise DumpError(f"{path}: holds {head['kind']!r}, expected {kind!r}")
    ncomp = int(head["components"])
    dt = np.dtype(_DTYPES[head["dtype"]])
    body = blob[nl + 1 :]
    if len(body) != ncomp * stored.size * dt.itemsize:
        raise DumpError(f"{path}: truncated payload ({len(body)} bytes)")
    flat = np.frombuffer(body, dtype=dt).reshape(ncomp, stored.size)
    data = np.stack([stored.to_array(c) for c in flat]).astype(dt.newbyteorder("="))
    return FieldDump(head["kind"], data, stored, side.get("meta", {}))
