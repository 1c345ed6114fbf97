"""3D grid and mask data model: geometry, resampling, cropping.

Conventions used throughout the package:

- Voxel (i, j, k) is centered at ``origin + (i + 0.5, j + 0.5, k + 0.5) * spacing``
  (millimeters).  All resampling happens in physical coordinates between
  voxel centers.
- Arrays are indexed ``[ix, iy, iz]`` with shape ``(nx, ny, nz)``.  The flat
  serialization order is x-fastest, i.e. ``values.ravel(order="F")``.
- Samples that fall outside the source extent clamp to the nearest voxel
  (no zero fill, so no fabricated gradients at crop borders).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsError, GeometryError

VALID_UNITS = ("Gy", "HU", "unitless")


@dataclass(frozen=True)
class GridGeometry:
    """Axis-aligned regular grid: dims (voxels), spacing and origin (mm)."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        if len(dims) != 3 or len(spacing) != 3 or len(origin) != 3:
            raise GeometryError("dims, spacing, origin must be length-3")
        if any(d < 1 for d in dims):
            raise GeometryError(f"dims must be >= 1, got {dims}")
        if any(not np.isfinite(s) or s <= 0 for s in spacing):
            raise GeometryError(f"spacing must be positive, got {spacing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @property
    def voxel_count(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def axis_centers(self, axis: int) -> np.ndarray:
        """Physical center coordinates of all voxels along one axis."""
        n = self.dims[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.spacing[axis]

    def extent_mm(self) -> tuple[float, float, float]:
        return tuple(d * s for d, s in zip(self.dims, self.spacing))


def voxel_volume_cc(geometry: GridGeometry) -> float:
    """Volume of one voxel in cm^3 (spacings are mm)."""
    sx, sy, sz = geometry.spacing
    return sx * sy * sz / 1000.0


@dataclass
class Grid3:
    """A scalar field on a grid with a unit tag (HU, Gy, or unitless)."""

    geometry: GridGeometry
    values: np.ndarray
    unit: str = "unitless"

    def __post_init__(self):
        if self.unit not in VALID_UNITS:
            raise GeometryError(f"unknown unit {self.unit!r}, expected one of {VALID_UNITS}")
        values = np.asarray(self.values)
        if values.shape != self.geometry.dims:
            if values.size != self.geometry.voxel_count:
                raise GeometryError(
                    f"values size {values.size} != voxel count {self.geometry.voxel_count}"
                )
            values = values.reshape(self.geometry.dims, order="F")
        self.values = values

    def copy(self) -> "Grid3":
        return Grid3(self.geometry, self.values.copy(), self.unit)

    def with_values(self, values: np.ndarray, unit: str | None = None) -> "Grid3":
        return Grid3(self.geometry, values, self.unit if unit is None else unit)


@dataclass
class StructureMask:
    """Binary region of interest sharing the geometry of the grid it masks."""

    geometry: GridGeometry
    bits: np.ndarray
    name: str
    role: str = "OAR"  # "PTV" or "OAR"

    def __post_init__(self):
        if self.role not in ("PTV", "OAR"):
            raise GeometryError(f"role must be PTV or OAR, got {self.role!r}")
        bits = np.asarray(self.bits)
        if bits.shape != self.geometry.dims:
            if bits.size != self.geometry.voxel_count:
                raise GeometryError(
                    f"mask size {bits.size} != voxel count {self.geometry.voxel_count}"
                )
            bits = bits.reshape(self.geometry.dims, order="F")
        self.bits = bits.astype(bool, copy=False)

    @property
    def voxel_count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def copy(self) -> "StructureMask":
        return StructureMask(self.geometry, self.bits.copy(), self.name, self.role)


@dataclass
class CaseBundle:
    """Per-case record: CT, reference dose, and structure masks."""

    ct: Grid3
    dose: Grid3
    structures: list[StructureMask] = field(default_factory=list)
    case_id: str = "case"

    def __post_init__(self):
        ptv_count = sum(1 for s in self.structures if s.role == "PTV")
        if self.structures and ptv_count != 1:
            raise GeometryError(f"case must have exactly one PTV structure, found {ptv_count}")

    @property
    def ptv(self) -> StructureMask:
        for s in self.structures:
            if s.role == "PTV":
                return s
        raise GeometryError("case has no PTV structure")

    def structure(self, name: str) -> StructureMask:
        for s in self.structures:
            if s.name == name:
                return s
        raise KeyError(name)

    def structure_names(self) -> list[str]:
        return [s.name for s in self.structures]


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------

def _fractional_indices(src: GridGeometry, target: GridGeometry, axis: int) -> np.ndarray:
    """Fractional source indices of target voxel centers, clamped to the grid."""
    centers = target.axis_centers(axis)
    f = (centers - src.origin[axis]) / src.spacing[axis] - 0.5
    return np.clip(f, 0.0, src.dims[axis] - 1)


def _lerp_axis(arr: np.ndarray, f: np.ndarray, axis: int) -> np.ndarray:
    """Linear interpolation along one axis at fractional indices f."""
    n = arr.shape[axis]
    if n == 1:
        idx = np.zeros(len(f), dtype=np.intp)
        return np.take(arr, idx, axis=axis)
    i0 = np.clip(np.floor(f).astype(np.intp), 0, n - 2)
    w = f - i0
    shape = [1, 1, 1]
    shape[axis] = len(f)
    w = w.reshape(shape)
    v0 = np.take(arr, i0, axis=axis)
    v1 = np.take(arr, i0 + 1, axis=axis)
    # v0 + w*(v1-v0) keeps constant fields bit-exact
    return v0 + w * (v1 - v0)


def trilinear_resample(src: Grid3, target: GridGeometry) -> Grid3:
    """Resample a grid onto a new geometry by trilinear interpolation.

    Out-of-extent samples clamp to the nearest voxel.  An identity target
    returns a bitwise-equal copy.
    """
    if target == src.geometry:
        return Grid3(target, src.values.copy(), src.unit)
    out = np.asarray(src.values, dtype=np.float64)
    for axis in range(3):
        f = _fractional_indices(src.geometry, target, axis)
        out = _lerp_axis(out, f, axis)
    return Grid3(target, out, src.unit)


def resample_mask(src: StructureMask, target: GridGeometry) -> StructureMask:
    """Resample a mask onto a new geometry by nearest neighbor (ties round up)."""
    if target == src.geometry:
        return StructureMask(target, src.bits.copy(), src.name, src.role)
    out = src.bits
    for axis in range(3):
        f = _fractional_indices(src.geometry, target, axis)
        idx = np.clip(np.floor(f + 0.5).astype(np.intp), 0, src.geometry.dims[axis] - 1)
        out = np.take(out, idx, axis=axis)
    return StructureMask(target, out, src.name, src.role)


def crop_region(grid: Grid3, lower: tuple[int, int, int], size: tuple[int, int, int]) -> Grid3:
    """Copy a sub-box; origin shifts by lower * spacing.  No silent clamping."""
    lo = tuple(int(v) for v in lower)
    sz = tuple(int(v) for v in size)
    dims = grid.geometry.dims
    if any(s < 1 for s in sz):
        raise BoundsError(f"crop size must be >= 1, got {sz}")
    if any(l < 0 or l + s > d for l, s, d in zip(lo, sz, dims)):
        raise BoundsError(f"crop lower={lo} size={sz} outside dims={dims}")
    geom = GridGeometry(
        dims=sz,
        spacing=grid.geometry.spacing,
        origin=tuple(
            o + l * s for o, l, s in zip(grid.geometry.origin, lo, grid.geometry.spacing)
        ),
    )
    sl = tuple(slice(l, l + s) for l, s in zip(lo, sz))
    return Grid3(geom, grid.values[sl].copy(), grid.unit)


def crop_mask(mask: StructureMask, lower: tuple[int, int, int], size: tuple[int, int, int]) -> StructureMask:
    """crop_region for masks."""
    as_grid = Grid3(mask.geometry, mask.bits.astype(np.float64), "unitless")
    cropped = crop_region(as_grid, lower, size)
    return StructureMask(cropped.geometry, cropped.values > 0.5, mask.name, mask.role)


def mask_bounding_box(bits: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """(lower, upper) inclusive voxel index bounds of the true region, or None."""
    if not bits.any():
        return None
    idx = np.nonzero(bits)
    lo = np.array([int(a.min()) for a in idx])
    hi = np.array([int(a.max()) for a in idx])
    return lo, hi


def geometry_equal(a: GridGeometry, b: GridGeometry) -> bool:
    return a == b


def require_same_geometry(*items) -> GridGeometry:
    """Assert all grids/masks share one geometry; return it."""
    geoms = [it.geometry for it in items]
    first = geoms[0]
    for g in geoms[1:]:
        if g != first:
            raise GeometryError(f"geometry mismatch: {g} vs {first}")
    return first
