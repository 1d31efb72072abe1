"""Synthetic longitudinal lesion phantoms and weighted patch cropping.

A phantom is a baseline/follow-up pair of scans: old lesions appear in
both, new lesions only in the follow-up, so the noise-free difference map
is positive exactly on the new-lesion voxels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .volume import BinaryMask, VoxelGrid


class LesionPlacementError(Exception):
    pass


class PatchTooLargeError(Exception):
    pass


MAX_CROP_SHIFT = 10  # voxels, per axis


@dataclass(frozen=True)
class PhantomConfig:
    dims: tuple[int, int, int] = (48, 48, 48)
    spacing: tuple[float, float, float] = (0.5, 0.75, 0.75)
    n_old_lesions: int = 2
    n_new_lesions: int = 2
    lesion_radius_range: tuple[float, float] = (2.5, 5.0)  # mm
    lesion_intensity: float = 1.0
    noise_sigma: float = 0.0
    background_level: float = 0.1
    blob_lesions: bool = False  # union of overlapping ellipsoids per lesion

    def __post_init__(self):
        lo, hi = self.lesion_radius_range
        if not (0 < lo <= hi):
            raise ValueError(f"bad radius range {self.lesion_radius_range}")
        if self.n_old_lesions < 0 or self.n_new_lesions < 0:
            raise ValueError("lesion counts must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims), "spacing": list(self.spacing),
            "n_old_lesions": self.n_old_lesions,
            "n_new_lesions": self.n_new_lesions,
            "lesion_radius_range": list(self.lesion_radius_range),
            "lesion_intensity": self.lesion_intensity,
            "noise_sigma": self.noise_sigma,
            "background_level": self.background_level,
            "blob_lesions": self.blob_lesions,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomConfig":
        d = dict(d)
        for key in ("dims", "spacing", "lesion_radius_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class LongitudinalCase:
    baseline: VoxelGrid
    followup: VoxelGrid
    new_lesion_mask: BinaryMask
    case_id: str = ""

    def __post_init__(self):
        if not (self.baseline.dims == self.followup.dims == self.new_lesion_mask.dims):
            raise ValueError("baseline/followup/mask dims must agree")


def _lesion_field(dims, spacing, center, semi_axes, intensity):
    """Smooth ellipsoidal bump: full intensity out to 90% of the radius,
    cosine ramp to zero at the boundary. Strictly positive iff r < 1."""
    nx, ny, nz = dims
    x = np.arange(nx) * spacing[0]
    y = np.arange(ny) * spacing[1]
    z = np.arange(nz) * spacing[2]
    zz, yy, xx = np.meshgrid(z, y, x, indexing="ij")
    cx, cy, cz = center  # mm
    r = np.sqrt(((xx - cx) / semi_axes[0]) ** 2
                + ((yy - cy) / semi_axes[1]) ** 2
                + ((zz - cz) / semi_axes[2]) ** 2)
    t = np.clip((r - 0.9) / 0.1, 0.0, 1.0)
    falloff = 0.5 * (1.0 + np.cos(np.pi * t))
    falloff[r >= 1.0] = 0.0
    return intensity * falloff  # (z, y, x)


def _place_lesion(rng, cfg, forbidden):
    """Sample a lesion that fits in the volume; optionally avoid a region.

    forbidden is a boolean (z,y,x) array the new lesion's support (dilated
    by one voxel) must not touch, or None."""
    dims = cfg.dims
    spacing = cfg.spacing
    lo, hi = cfg.lesion_radius_range
    for _ in range(200):
        semi = rng.uniform(lo, hi, size=3)
        extent = [(dims[a] - 1) * spacing[a] for a in range(3)]
        if any(extent[a] < 2 * semi[a] for a in range(3)):
            continue  # volume too small for this radius draw
        center = np.array([rng.uniform(semi[a], extent[a] - semi[a]) for a in range(3)])
        bump = _lesion_field(dims, spacing, center, semi, cfg.lesion_intensity)
        support = bump > 0
        if not support.any():
            continue
        if forbidden is not None:
            grown = _dilate(support)
            if (grown & forbidden).any():
                continue
        if cfg.blob_lesions:
            # asymmetric blob: merge a second, offset ellipsoid
            off = rng.uniform(-0.5, 0.5, size=3) * semi
            semi2 = semi * rng.uniform(0.5, 0.9, size=3)
            bump2 = _lesion_field(dims, spacing, center + off, semi2,
                                  cfg.lesion_intensity)
            bump = np.maximum(bump, bump2)
            support = bump > 0
            if forbidden is not None and (_dilate(support) & forbidden).any():
                continue
        return bump, support
    raise LesionPlacementError(
        f"could not place a lesion of radius [{lo}, {hi}] mm in dims {dims}"
    )


def _dilate(support):
    # full 26-neighbourhood so separated lesions stay distinct components
    # even under diagonal connectivity
    return ndimage.binary_dilation(support, structure=np.ones((3, 3, 3), dtype=bool))


def gen_phantom(cfg: PhantomConfig, seed: int) -> LongitudinalCase:
    """Deterministic phantom: old lesions in both scans, new lesions only in
    the follow-up. New lesions are kept mutually disjoint (one voxel gap)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    nx, ny, nz = cfg.dims
    base = np.full((nz, ny, nx), cfg.background_level, dtype=np.float64)
    for _ in range(cfg.n_old_lesions):
        bump, _ = _place_lesion(rng, cfg, forbidden=None)
        base += bump
    new_signal = np.zeros_like(base)
    new_mask = np.zeros_like(base, dtype=bool)
    for _ in range(cfg.n_new_lesions):
        bump, support = _place_lesion(rng, cfg, forbidden=new_mask)
        new_signal += bump
        new_mask |= support
    noise_b = cfg.noise_sigma * rng.standard_normal(base.shape)
    noise_f = cfg.noise_sigma * rng.standard_normal(base.shape)
    baseline = base + noise_b
    followup = base + new_signal + noise_f
    return LongitudinalCase(
        baseline=VoxelGrid(cfg.dims, cfg.spacing, baseline.ravel()),
        followup=VoxelGrid(cfg.dims, cfg.spacing, followup.ravel()),
        new_lesion_mask=BinaryMask(cfg.dims, cfg.spacing,
                                   new_mask.astype(np.float64).ravel()),
        case_id=f"case_{seed:06d}",
    )


def difference_map(case: LongitudinalCase) -> VoxelGrid:
    """Voxelwise follow-up minus baseline."""
    return VoxelGrid(case.baseline.dims, case.baseline.spacing,
                     case.followup.data - case.baseline.data)


def weighted_crop(case: LongitudinalCase, patch_dims, seed: int) -> LongitudinalCase:
    """Crop a patch centred near a random foreground voxel.

    A foreground voxel is chosen uniformly, the centre is shifted by an
    independent uniform integer in [-10, 10] per axis, and the patch is
    clamped into bounds. Without foreground the origin is uniform."""
    patch_dims = tuple(int(d) for d in patch_dims)
    dims = case.baseline.dims
    if any(p > d for p, d in zip(patch_dims, dims)):
        raise PatchTooLargeError(f"patch {patch_dims} exceeds volume {dims}")
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    fg = np.flatnonzero(case.new_lesion_mask.data)
    origin = []
    if fg.size:
        flat = int(fg[rng.integers(fg.size)])
        nx, ny = dims[0], dims[1]
        center = (flat % nx, (flat // nx) % ny, flat // (nx * ny))
        for a in range(3):
            shift = int(rng.integers(-MAX_CROP_SHIFT, MAX_CROP_SHIFT + 1))
            o = center[a] + shift - patch_dims[a] // 2
            origin.append(int(np.clip(o, 0, dims[a] - patch_dims[a])))
    else:
        for a in range(3):
            origin.append(int(rng.integers(0, dims[a] - patch_dims[a] + 1)))

    def crop(grid, cls):
        vol = grid.volume()
        ox, oy, oz = origin
        px, py, pz = patch_dims
        sub = vol[oz:oz + pz, oy:oy + py, ox:ox + px]
        return cls(patch_dims, grid.spacing, sub.ravel())

    return LongitudinalCase(
        baseline=crop(case.baseline, VoxelGrid),
        followup=crop(case.followup, VoxelGrid),
        new_lesion_mask=crop(case.new_lesion_mask, BinaryMask),
        case_id=case.case_id,
    )


def case_seed(base_seed: int, index: int) -> int:
    """Stable per-case seed derived from a suite seed."""
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


def make_suite(cfg: PhantomConfig, n_cases: int, seed: int,
               offset: int = 0) -> list[LongitudinalCase]:
    """Generate n_cases phantoms with per-case derived seeds."""
    return [gen_phantom(cfg, case_seed(seed, offset + i)) for i in range(n_cases)]
