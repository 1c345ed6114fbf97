"""Deterministic synthetic thorax phantoms.

Each case has a PTV ellipsoid, five OARs (cord and esophagus as vertical
tubes, heart as a sphere, lungs as mirrored half-ellipsoids), a noisy
tissue-HU CT, and a reference dose built from an exponential falloff of
the distance to the PTV surface plus a constant scatter floor, finally
normalized so the PTV mean dose equals the prescription.

Randomness comes exclusively from numpy's PCG64 generator seeded per case,
so the same seed reproduces a bit-identical bundle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import distance_transform_edt

from .errors import DataError
from .mvol import save_case
from .preprocess import normalize_ptv_mean
from .volume import CaseBundle, Grid3, GridGeometry, StructureMask

DEFAULT_EXTENT_MM = 256.0


@dataclass(frozen=True)
class PhantomSpec:
    seed: int = 0
    dims: tuple[int, int, int] = (32, 32, 32)
    spacing: tuple[float, float, float] | None = None  # default: 256 mm extent
    prescription: float = 60.0
    falloff_mm: float = 20.0
    scatter_fraction: float = 0.02
    noise_hu: float = 20.0

    def geometry(self) -> GridGeometry:
        spacing = self.spacing
        if spacing is None:
            spacing = tuple(DEFAULT_EXTENT_MM / d for d in self.dims)
        return GridGeometry(self.dims, spacing)


def _coords(geom: GridGeometry):
    """Voxel-center coordinates normalized to [0, 1] per axis."""
    ext = geom.extent_mm()
    axes = [(geom.axis_centers(a) - geom.origin[a]) / ext[a] for a in range(3)]
    return np.meshgrid(*axes, indexing="ij")


def _ellipsoid(xyz, center, radii) -> np.ndarray:
    x, y, z = xyz
    return (
        ((x - center[0]) / radii[0]) ** 2
        + ((y - center[1]) / radii[1]) ** 2
        + ((z - center[2]) / radii[2]) ** 2
    ) <= 1.0


def _vertical_tube(xyz, cx, cy, radius) -> np.ndarray:
    x, y, _ = xyz
    return ((x - cx) / radius) ** 2 + ((y - cy) / radius) ** 2 <= 1.0


def _build_masks(geom: GridGeometry, rng: np.random.Generator):
    xyz = _coords(geom)
    j = lambda scale: rng.uniform(-scale, scale)
    # a tube must catch at least one voxel-center column at coarse grids
    min_tube_r = 0.75 / min(geom.dims)

    ptv_center = (0.31 + j(0.04), 0.48 + j(0.04), 0.50 + j(0.05))
    ptv_radii = tuple(r * (1.0 + j(0.15)) for r in (0.13, 0.13, 0.15))
    ptv = _ellipsoid(xyz, ptv_center, ptv_radii)

    cord = _vertical_tube(xyz, 0.50 + j(0.02), 0.75 + j(0.02), max(0.035, min_tube_r))
    eso = _vertical_tube(xyz, 0.50 + j(0.02), 0.64 + j(0.02), max(0.03, min_tube_r))
    heart = _ellipsoid(xyz, (0.45 + j(0.03), 0.42 + j(0.03), 0.36 + j(0.03)),
                       (0.14, 0.14, 0.14))

    lcx = 0.34 + j(0.02)
    lung_left = _ellipsoid(xyz, (lcx, 0.48 + j(0.02), 0.52 + j(0.02)),
                           (0.20, 0.20, 0.30)) & (xyz[0] <= lcx)
    rcx = 0.66 + j(0.02)
    lung_right = _ellipsoid(xyz, (rcx, 0.48 + j(0.02), 0.52 + j(0.02)),
                            (0.20, 0.20, 0.30)) & (xyz[0] >= rcx)
    # the heart displaces lung; the tumor (PTV) may sit inside a lung
    lung_left &= ~heart
    lung_right &= ~heart

    masks = [
        StructureMask(geom, ptv, "ptv", "PTV"),
        StructureMask(geom, eso, "esophagus", "OAR"),
        StructureMask(geom, cord, "cord", "OAR"),
        StructureMask(geom, heart, "heart", "OAR"),
        StructureMask(geom, lung_left, "lung_left", "OAR"),
        StructureMask(geom, lung_right, "lung_right", "OAR"),
    ]
    return masks


def generate_phantom(spec: PhantomSpec) -> CaseBundle:
    """Rasterize one seeded phantom case.  Retries with fresh jitter when the
    PTV touches the cord or a structure rasterizes empty (max 10 attempts)."""
    geom = spec.geometry()
    rng = np.random.default_rng(spec.seed)

    masks = None
    for _attempt in range(10):
        candidate = _build_masks(geom, rng)
        ptv = candidate[0]
        cord = next(m for m in candidate if m.name == "cord")
        if any(m.voxel_count == 0 for m in candidate):
            continue
        if np.any(ptv.bits & cord.bits):
            continue
        masks = candidate
        break
    if masks is None:
        raise DataError(f"phantom seed {spec.seed}: no feasible geometry in 10 attempts")

    by_name = {m.name: m for m in masks}
    hu = np.full(geom.dims, 40.0)
    hu[by_name["lung_left"].bits] = -700.0
    hu[by_name["lung_right"].bits] = -700.0
    hu[by_name["ptv"].bits] = 60.0
    hu += rng.normal(0.0, spec.noise_hu, size=geom.dims)
    ct = Grid3(geom, hu, "HU")

    dist = distance_transform_edt(~by_name["ptv"].bits, sampling=geom.spacing)
    rx = spec.prescription
    dose_values = rx * np.exp(-dist / spec.falloff_mm) + spec.scatter_fraction * rx
    dose = Grid3(geom, dose_values, "Gy")
    dose, _ = normalize_ptv_mean(dose, by_name["ptv"], rx)

    return CaseBundle(ct=ct, dose=dose, structures=masks,
                      case_id=f"phantom_{spec.seed:04d}")


def default_split(n: int) -> tuple[int, int, int]:
    """Train/val/test counts in 24:5:7 proportion (exact at n=36)."""
    train = int(round(n * 24 / 36))
    val = int(round(n * 5 / 36))
    val = max(0, min(val, n - train))
    return train, val, n - train - val


def generate_dataset(
    n: int,
    base_seed: int,
    out_dir,
    dims: tuple[int, int, int] = (32, 32, 32),
    spacing: tuple[float, float, float] | None = None,
    split: tuple[int, int, int] | None = None,
) -> dict:
    """Write n seeded cases in MVOL case-dir format plus a split manifest.

    Cases use seeds base_seed .. base_seed+n-1, assigned to train/val/test
    in seed order.  Returns the manifest dict (also written to
    out_dir/manifest.json)."""
    if n < 1:
        raise DataError("n must be >= 1")
    if split is None:
        split = default_split(n)
    if sum(split) != n or any(v < 0 for v in split):
        raise DataError(f"split {split} must be nonnegative and sum to n={n}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = ["train"] * split[0] + ["val"] * split[1] + ["test"] * split[2]

    cases = []
    for i in range(n):
        seed = base_seed + i
        bundle = generate_phantom(PhantomSpec(seed=seed, dims=dims, spacing=spacing))
        case_dir = out_dir / bundle.case_id
        save_case(case_dir, bundle)
        cases.append({
            "case_id": bundle.case_id,
            "dir": bundle.case_id,
            "seed": seed,
            "split": labels[i],
        })

    manifest = {
        "base_seed": base_seed,
        "dims": list(dims),
        "split_counts": {"train": split[0], "val": split[1], "test": split[2]},
        "cases": cases,
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest
