"""Input pipeline: CT normalization, one-hot encoding, dose normalization,
mask-guided crop and resample to network resolution.

The crop window is centered on the union bounding box of all structure
masks and shifted inward at volume borders; if a structure cannot fit the
window the case is rejected rather than silently truncated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, CropInfeasibleError, NormalizationError, UnitError
from .volume import (
    CaseBundle,
    Grid3,
    GridGeometry,
    StructureMask,
    crop_mask,
    crop_region,
    mask_bounding_box,
    require_same_geometry,
    resample_mask,
    trilinear_resample,
)

# Canonical channel order for network input; PTV is appended as an extra channel.
CANONICAL_OARS = ("esophagus", "cord", "heart", "lung_left", "lung_right")


@dataclass(frozen=True)
class PreprocessConfig:
    hu_clip: tuple[float, float] = (-1024.0, 3071.0)
    crop_size: tuple[int, int, int] = (300, 300, 128)
    net_dims: tuple[int, int, int] = (128, 128, 128)
    prescription: float = 60.0

    def __post_init__(self):
        low, high = self.hu_clip
        if not low < high:
            raise ConfigError(f"hu_clip low must be < high, got {self.hu_clip}")
        if any(int(v) < 1 for v in self.crop_size) or any(int(v) < 1 for v in self.net_dims):
            raise ConfigError("crop_size and net_dims must be positive")

    @classmethod
    def desk_scale(cls, dims: int = 32, prescription: float = 60.0) -> "PreprocessConfig":
        """Small-volume defaults: reduced network resolution, default crop
        window (which clamps to the volume when the volume is smaller)."""
        return cls(net_dims=(dims, dims, dims), prescription=prescription)


def clip_rescale_ct(ct: Grid3, cfg: PreprocessConfig = PreprocessConfig()) -> Grid3:
    """Clamp HU to the configured window and rescale linearly to [0, 1]."""
    if ct.unit != "HU":
        raise UnitError(f"clip_rescale_ct expects HU input, got {ct.unit!r}")
    low, high = cfg.hu_clip
    out = (np.clip(ct.values, low, high) - low) / (high - low)
    return Grid3(ct.geometry, out, "unitless")


def one_hot_structures(
    structures: list[StructureMask],
    canonical_order: tuple[str, ...] = CANONICAL_OARS,
) -> tuple[np.ndarray, list[str]]:
    """Stack per-structure binary channels: canonical OARs, then PTV.

    Missing structures produce all-zero channels.  Channels are independent,
    so overlapping structures set 1 in each of their channels.
    """
    if structures:
        require_same_geometry(*structures)
    names = [s.name for s in structures]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate structure names: {names}")
    by_name = {s.name: s for s in structures}
    dims = structures[0].geometry.dims if structures else (1, 1, 1)

    channels = []
    channel_names = []
    for name in canonical_order:
        s = by_name.get(name)
        channels.append(s.bits if s is not None else np.zeros(dims, dtype=bool))
        channel_names.append(name)
    ptv = [s for s in structures if s.role == "PTV"]
    channels.append(ptv[0].bits if ptv else np.zeros(dims, dtype=bool))
    channel_names.append("ptv")
    return np.stack(channels, axis=0), channel_names


def normalize_ptv_mean(
    dose: Grid3, ptv: StructureMask, prescription: float = 60.0
) -> tuple[Grid3, float]:
    """Rescale the whole dose grid so the mean dose inside the PTV equals
    the prescription.  Returns (scaled dose, scale factor)."""
    require_same_geometry(dose, ptv)
    if ptv.voxel_count == 0:
        raise NormalizationError("PTV mask is empty")
    mean = float(np.mean(dose.values[ptv.bits]))
    if not mean > 0:
        raise NormalizationError(f"PTV mean dose must be > 0, got {mean}")
    scale = prescription / mean
    return dose.with_values(dose.values * scale), scale


def _crop_window(bundle: CaseBundle, crop_size) -> tuple[tuple[int, int, int], tuple[int, int, int]]:
    """Window (lower, size) containing the union bounding box of all masks."""
    dims = bundle.ct.geometry.dims
    size = tuple(min(int(c), d) for c, d in zip(crop_size, dims))

    union = np.zeros(dims, dtype=bool)
    for s in bundle.structures:
        union |= s.bits
    bbox = mask_bounding_box(union)
    if bbox is None:
        # nothing to guide the crop: center the window in the volume
        lower = tuple((d - w) // 2 for d, w in zip(dims, size))
        return lower, size
    lo, hi = bbox

    offenders = []
    for s in bundle.structures:
        sb = mask_bounding_box(s.bits)
        if sb is not None and any(h - l + 1 > w for l, h, w in zip(sb[0], sb[1], size)):
            offenders.append(s.name)
    if any(h - l + 1 > w for l, h, w in zip(lo, hi, size)):
        which = ", ".join(offenders) if offenders else "union of structures"
        raise CropInfeasibleError(
            f"crop window {size} cannot contain structure bounding box ({which})"
        )

    lower = tuple(
        int(np.clip((l + h + 1 - w) // 2, 0, d - w))
        for l, h, w, d in zip(lo, hi, size, dims)
    )
    return lower, size


def prepare_case(raw: CaseBundle, cfg: PreprocessConfig = PreprocessConfig()) -> CaseBundle:
    """Full pipeline: dose onto CT grid, CT clip/rescale, mask-guided crop,
    resample everything to cfg.net_dims, normalize PTV mean dose."""
    require_same_geometry(raw.ct, *raw.structures)
    dose = raw.dose
    if dose.geometry != raw.ct.geometry:
        dose = trilinear_resample(dose, raw.ct.geometry)

    ct = clip_rescale_ct(raw.ct, cfg) if raw.ct.unit == "HU" else raw.ct

    lower, size = _crop_window(raw, cfg.crop_size)
    ct = crop_region(ct, lower, size)
    dose = crop_region(dose, lower, size)
    structures = [crop_mask(s, lower, size) for s in raw.structures]

    crop_geom = ct.geometry
    net = tuple(int(v) for v in cfg.net_dims)
    target = GridGeometry(
        dims=net,
        spacing=tuple(e / n for e, n in zip(crop_geom.extent_mm(), net)),
        origin=crop_geom.origin,
    )
    ct = trilinear_resample(ct, target)
    dose = trilinear_resample(dose, target)
    structures = [resample_mask(s, target) for s in structures]

    ptv = [s for s in structures if s.role == "PTV"]
    if not ptv:
        raise NormalizationError("case has no PTV structure")
    dose, _scale = normalize_ptv_mean(dose, ptv[0], cfg.prescription)

    return CaseBundle(ct=ct, dose=dose, structures=structures, case_id=raw.case_id)
