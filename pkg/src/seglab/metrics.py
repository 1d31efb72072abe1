"""Evaluation metrics: overlap, surface distances, and lesion detection.

Distances are computed in mm on spacing-scaled coordinates. Fast paths
(KD-tree, scipy labelling) are paired with brute-force oracles used by the
test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .volume import BinaryMask, ProbGrid, binarize

CSV_COLUMNS = [
    "case_id", "dc", "jc", "hd", "asd",
    "voxel_pr", "voxel_rc", "voxel_f1",
    "lesion_pr", "lesion_rc", "lesion_f1",
]


class ShapeMismatchError(Exception):
    pass


class EmptySurfaceError(Exception):
    pass


@dataclass(frozen=True)
class SurfacePointSet:
    """Integer (x, y, z) coordinates of boundary voxels plus mm spacing."""

    points: np.ndarray  # (n, 3) int
    spacing: tuple[float, float, float]

    def __len__(self):
        return len(self.points)

    def scaled(self) -> np.ndarray:
        """Points in mm."""
        return self.points * np.asarray(self.spacing, dtype=np.float64)


@dataclass(frozen=True)
class LabelGrid:
    """Connected-component labels, 1..n_components, background 0."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    labels: np.ndarray = field(repr=False)  # flat, x-fastest
    n_components: int = 0


@dataclass(frozen=True)
class MetricReport:
    """One evaluation row. hd/asd are None when either surface is empty."""

    dc: float
    jc: float
    hd: float | None
    asd: float | None
    voxel_pr: float
    voxel_rc: float
    voxel_f1: float
    lesion_pr: float
    lesion_rc: float
    lesion_f1: float
    case_id: str = ""

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "dc": self.dc, "jc": self.jc, "hd": self.hd, "asd": self.asd,
            "voxel_pr": self.voxel_pr, "voxel_rc": self.voxel_rc,
            "voxel_f1": self.voxel_f1,
            "lesion_pr": self.lesion_pr, "lesion_rc": self.lesion_rc,
            "lesion_f1": self.lesion_f1,
        }

    def to_csv_row(self) -> str:
        vals = self.to_dict()
        out = [str(vals["case_id"])]
        for col in CSV_COLUMNS[1:]:
            v = vals[col]
            out.append("" if v is None else repr(float(v)))
        return ",".join(out)


def _check_pair(a: BinaryMask, b: BinaryMask):
    if a.dims != b.dims:
        raise ShapeMismatchError(f"dims differ: {a.dims} vs {b.dims}")


def overlap_metrics(gt: BinaryMask, pred: BinaryMask):
    """Return (dc, jc, voxel_pr, voxel_rc, voxel_f1).

    Both masks empty counts as perfect agreement (all ones); exactly one
    empty scores zero."""
    _check_pair(gt, pred)
    g = gt.data
    p = pred.data
    tp = float(np.dot(g, p))
    fp = float(p.sum() - tp)
    fn = float(g.sum() - tp)
    if g.sum() == 0 and p.sum() == 0:
        return 1.0, 1.0, 1.0, 1.0, 1.0
    dc = 2.0 * tp / (2.0 * tp + fp + fn) if tp + fp + fn > 0 else 0.0
    jc = tp / (tp + fp + fn) if tp + fp + fn > 0 else 0.0
    pr = tp / (tp + fp) if tp + fp > 0 else 0.0
    rc = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2.0 * pr * rc / (pr + rc) if pr + rc > 0 else 0.0
    return dc, jc, pr, rc, f1


def surface_extract(mask: BinaryMask) -> SurfacePointSet:
    """Foreground voxels with at least one 6-connected background or
    out-of-bounds neighbour."""
    vol = mask.volume().astype(bool)
    padded = np.pad(vol, 1)
    interior = np.ones_like(vol)
    for axis in range(3):
        for shift in (-1, 1):
            interior &= np.roll(padded, shift, axis=axis)[1:-1, 1:-1, 1:-1]
    surface = vol & ~interior
    zyx = np.argwhere(surface)
    points = zyx[:, ::-1].astype(np.int64)  # (x, y, z)
    return SurfacePointSet(points=points, spacing=mask.spacing)


def _scaled_or_raise(a: SurfacePointSet, b: SurfacePointSet):
    if len(a) == 0 or len(b) == 0:
        raise EmptySurfaceError("surface distance undefined for empty surfaces")
    return a.scaled(), b.scaled()


def hausdorff(a: SurfacePointSet, b: SurfacePointSet) -> float:
    """Symmetric (100th percentile) Hausdorff distance in mm."""
    pa, pb = _scaled_or_raise(a, b)
    da = cKDTree(pb).query(pa)[0]
    db = cKDTree(pa).query(pb)[0]
    return float(max(da.max(), db.max()))


def asd(a: SurfacePointSet, b: SurfacePointSet) -> float:
    """Average symmetric surface distance in mm."""
    pa, pb = _scaled_or_raise(a, b)
    da = cKDTree(pb).query(pa)[0]
    db = cKDTree(pa).query(pb)[0]
    return float((da.sum() + db.sum()) / (len(pa) + len(pb)))


def hausdorff_bruteforce(a: SurfacePointSet, b: SurfacePointSet) -> float:
    """O(|a|*|b|) scan over all point pairs; oracle for hausdorff()."""
    pa, pb = _scaled_or_raise(a, b)
    da = [np.sqrt(((pb - x) ** 2).sum(axis=1)).min() for x in pa]
    db = [np.sqrt(((pa - y) ** 2).sum(axis=1)).min() for y in pb]
    return float(max(max(da), max(db)))


def asd_bruteforce(a: SurfacePointSet, b: SurfacePointSet) -> float:
    """O(|a|*|b|) double loop; oracle for asd()."""
    pa, pb = _scaled_or_raise(a, b)
    da = [np.sqrt(((pb - x) ** 2).sum(axis=1)).min() for x in pa]
    db = [np.sqrt(((pa - y) ** 2).sum(axis=1)).min() for y in pb]
    return float((sum(da) + sum(db)) / (len(pa) + len(pb)))


def connected_components(mask: BinaryMask, connectivity: int = 26) -> LabelGrid:
    """Label foreground components; ids ordered by minimum flat index."""
    if connectivity not in (6, 26):
        raise ValueError(f"connectivity must be 6 or 26, got {connectivity}")
    structure = ndimage.generate_binary_structure(3, 1 if connectivity == 6 else 3)
    vol = mask.volume().astype(bool)
    raw, n = ndimage.label(vol, structure=structure)
    flat = raw.ravel()  # C order of (z,y,x) == x-fastest flat order
    if n == 0:
        return LabelGrid(mask.dims, mask.spacing, np.zeros_like(flat), 0)
    # renumber so component k has the k-th smallest first-voxel index
    first = np.full(n + 1, flat.size, dtype=np.int64)
    idx = np.flatnonzero(flat)
    np.minimum.at(first, flat[idx], idx)
    order = np.argsort(first[1:], kind="stable")
    remap = np.zeros(n + 1, dtype=flat.dtype)
    remap[order + 1] = np.arange(1, n + 1)
    return LabelGrid(mask.dims, mask.spacing, remap[flat], int(n))


def lesion_detection_metrics(gt: BinaryMask, pred: BinaryMask,
                             min_overlap: float = 0.1,
                             connectivity: int = 26):
    """Component-level (lesion_pr, lesion_rc, lesion_f1).

    A ground-truth component is detected when predicted foreground covers at
    least min_overlap of its voxels; a predicted component touching no
    ground-truth foreground is a false positive."""
    _check_pair(gt, pred)
    if not (0.0 < min_overlap <= 1.0):
        raise ValueError(f"min_overlap must be in (0,1], got {min_overlap}")
    gl = connected_components(gt, connectivity)
    pl = connected_components(pred, connectivity)
    if gl.n_components == 0 and pl.n_components == 0:
        return 1.0, 1.0, 1.0
    g = gl.labels
    p = pl.labels
    tp_gt = 0
    for k in range(1, gl.n_components + 1):
        comp = g == k
        if (p[comp] > 0).sum() >= min_overlap * comp.sum():
            tp_gt += 1
    fp = 0
    for k in range(1, pl.n_components + 1):
        comp = p == k
        if not (g[comp] > 0).any():
            fp += 1
    tp_pred = pl.n_components - fp
    pr = tp_pred / pl.n_components if pl.n_components else 0.0
    rc = tp_gt / gl.n_components if gl.n_components else 0.0
    f1 = 2.0 * pr * rc / (pr + rc) if pr + rc > 0 else 0.0
    return pr, rc, f1


def full_report(gt: BinaryMask, pred_prob: ProbGrid, threshold: float = 0.5,
                min_overlap: float = 0.1, case_id: str = "") -> MetricReport:
    """Binarize the prediction and compute every metric for one case."""
    if gt.dims != pred_prob.dims:
        raise ShapeMismatchError(f"dims differ: {gt.dims} vs {pred_prob.dims}")
    pred = binarize(pred_prob, threshold)
    dc, jc, pr, rc, f1 = overlap_metrics(gt, pred)
    sa = surface_extract(gt)
    sb = surface_extract(pred)
    if len(sa) and len(sb):
        hd_v = hausdorff(sa, sb)
        asd_v = asd(sa, sb)
    else:
        hd_v = asd_v = None
    lpr, lrc, lf1 = lesion_detection_metrics(gt, pred, min_overlap)
    return MetricReport(dc=dc, jc=jc, hd=hd_v, asd=asd_v,
                        voxel_pr=pr, voxel_rc=rc, voxel_f1=f1,
                        lesion_pr=lpr, lesion_rc=lrc, lesion_f1=lf1,
                        case_id=case_id)
