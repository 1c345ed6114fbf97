"""MVOL volume format and case directories.

An ``.mvol`` file is, byte for byte:

1. the ASCII magic line ``MVOL1\\n``;
2. one JSON header line
   ``{"dims":[nx,ny,nz],"spacing":[sx,sy,sz],"origin":[ox,oy,oz],"unit":"Gy|HU|unitless","dtype":"f32le"}``
   terminated by ``\\n``;
3. ``nx*ny*nz`` little-endian float32 values in x-fastest order.

Masks use ``"dtype":"u8"`` with values 0/1.  Writing is deterministic
(fixed key order and Python float repr), so write(read(f)) reproduces f
bit-exactly.

A case directory holds ``ct.mvol``, ``dose.mvol``, ``masks/<name>.mvol``
and ``case.json`` listing structure names and roles.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .volume import CaseBundle, Grid3, GridGeometry, StructureMask

MAGIC = b"MVOL1\n"


def _header_bytes(geometry: GridGeometry, unit: str, dtype: str) -> bytes:
    header = {
        "dims": list(geometry.dims),
        "spacing": list(geometry.spacing),
        "origin": list(geometry.origin),
        "unit": unit,
        "dtype": dtype,
    }
    return json.dumps(header, separators=(",", ":")).encode("ascii") + b"\n"


def write_grid(path, grid: Grid3) -> None:
    """Write a scalar grid as f32le MVOL."""
    payload = np.ascontiguousarray(
        np.asarray(grid.values, dtype="<f4").ravel(order="F")
    ).tobytes()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(_header_bytes(grid.geometry, grid.unit, "f32le"))
        f.write(payload)


def write_mask(path, mask: StructureMask) -> None:
    """Write a mask as u8 MVOL (values 0/1)."""
    payload = mask.bits.astype(np.uint8).ravel(order="F").tobytes()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(_header_bytes(mask.geometry, "unitless", "u8"))
        f.write(payload)


def _read_raw(path):
    with open(path, "rb") as f:
        magic = f.readline()
        if magic != MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        header_line = f.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: bad header JSON: {e}") from e
        blob = f.read()
    try:
        geom = GridGeometry(tuple(header["dims"]), tuple(header["spacing"]), tuple(header["origin"]))
        unit = header["unit"]
        dtype = header["dtype"]
    except (KeyError, TypeError) as e:
        raise DataError(f"{path}: incomplete header: {e}") from e
    if dtype == "f32le":
        arr = np.frombuffer(blob, dtype="<f4")
    elif dtype == "u8":
        arr = np.frombuffer(blob, dtype=np.uint8)
    else:
        raise DataError(f"{path}: unknown dtype {dtype!r}")
    if arr.size != geom.voxel_count:
        raise DataError(f"{path}: expected {geom.voxel_count} values, found {arr.size}")
    return geom, unit, dtype, arr.reshape(geom.dims, order="F")


def read_grid(path) -> Grid3:
    geom, unit, dtype, arr = _read_raw(path)
    if dtype != "f32le":
        raise DataError(f"{path}: expected f32le grid, found {dtype}")
    return Grid3(geom, arr.astype(np.float64), unit)


def read_mask(path, name: str, role: str = "OAR") -> StructureMask:
    geom, _unit, dtype, arr = _read_raw(path)
    if dtype != "u8":
        raise DataError(f"{path}: expected u8 mask, found {dtype}")
    return StructureMask(geom, arr > 0, name, role)


# ---------------------------------------------------------------------------
# Case directories
# ---------------------------------------------------------------------------

def save_case(case_dir, bundle: CaseBundle) -> None:
    case_dir = Path(case_dir)
    (case_dir / "masks").mkdir(parents=True, exist_ok=True)
    write_grid(case_dir / "ct.mvol", bundle.ct)
    write_grid(case_dir / "dose.mvol", bundle.dose)
    for s in bundle.structures:
        write_mask(case_dir / "masks" / f"{s.name}.mvol", s)
    meta = {
        "case_id": bundle.case_id,
        "structures": [{"name": s.name, "role": s.role} for s in bundle.structures],
    }
    with open(case_dir / "case.json", "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def load_case(case_dir) -> CaseBundle:
    case_dir = Path(case_dir)
    meta_path = case_dir / "case.json"
    if not meta_path.exists():
        raise DataError(f"{case_dir}: not a case directory (missing case.json)")
    with open(meta_path) as f:
        meta = json.load(f)
    ct = read_grid(case_dir / "ct.mvol")
    dose = read_grid(case_dir / "dose.mvol")
    structures = [
        read_mask(case_dir / "masks" / f"{entry['name']}.mvol", entry["name"], entry["role"])
        for entry in meta["structures"]
    ]
    return CaseBundle(ct=ct, dose=dose, structures=structures, case_id=meta["case_id"])
