import numpy as np
import pytest

from seglab.metrics import (
    EmptySurfaceError,
    ShapeMismatchError,
    asd,
    asd_bruteforce,
    connected_components,
    full_report,
    hausdorff,
    hausdorff_bruteforce,
    lesion_detection_metrics,
    overlap_metrics,
    surface_extract,
    SurfacePointSet,
)
from seglab.volume import binarize, new_mask, new_prob

from oracles import flood_fill_components, partition_signature


def random_mask(seed, dims=(12, 12, 12), density=0.2, spacing=(1, 1, 1)):
    rng = np.random.default_rng(seed)
    n = dims[0] * dims[1] * dims[2]
    data = (rng.random(n) < density).astype(np.float64)
    if data.sum() == 0:
        data[0] = 1.0
    return new_mask(dims, spacing, data)


class TestOverlap:
    def test_identical_masks(self):
        m = random_mask(0)
        assert overlap_metrics(m, m) == (1.0, 1.0, 1.0, 1.0, 1.0)

    def test_disjoint_masks(self):
        dims = (4, 1, 1)
        a = new_mask(dims, (1, 1, 1), [1, 1, 0, 0])
        b = new_mask(dims, (1, 1, 1), [0, 0, 1, 1])
        assert overlap_metrics(a, b) == (0.0, 0.0, 0.0, 0.0, 0.0)

    def test_both_empty_scores_one(self):
        m = new_mask((2, 2, 2), (1, 1, 1), np.zeros(8))
        assert overlap_metrics(m, m) == (1.0, 1.0, 1.0, 1.0, 1.0)

    def test_one_empty_scores_zero(self):
        dims = (2, 2, 2)
        empty = new_mask(dims, (1, 1, 1), np.zeros(8))
        full = new_mask(dims, (1, 1, 1), np.ones(8))
        assert overlap_metrics(full, empty) == (0.0, 0.0, 0.0, 0.0, 0.0)

    def test_jc_dc_identity(self):
        for seed in range(20):
            gt = random_mask(seed)
            pred = random_mask(seed + 100)
            dc, jc, _, _, f1 = overlap_metrics(gt, pred)
            assert jc == pytest.approx(dc / (2 - dc), abs=1e-12)
            assert f1 == pytest.approx(dc, abs=1e-12)

    def test_half_dice_third_jaccard(self):
        a = new_mask((3, 1, 1), (1, 1, 1), [1, 1, 0])
        b = new_mask((3, 1, 1), (1, 1, 1), [1, 0, 1])
        dc, jc, *_ = overlap_metrics(a, b)
        assert dc == pytest.approx(0.5)
        assert jc == pytest.approx(1 / 3)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            overlap_metrics(random_mask(0, (4, 4, 4)), random_mask(0, (5, 5, 5)))


class TestSurface:
    def test_single_voxel(self):
        data = np.zeros(27)
        data[13] = 1
        s = surface_extract(new_mask((3, 3, 3), (1, 1, 1), data))
        assert len(s) == 1
        assert tuple(s.points[0]) == (1, 1, 1)

    def test_solid_cube_3(self):
        s = surface_extract(new_mask((3, 3, 3), (1, 1, 1), np.ones(27)))
        assert len(s) == 26
        assert (1, 1, 1) not in {tuple(p) for p in s.points}

    def test_solid_cube_5(self):
        # 125 total minus 27 interior voxels
        s = surface_extract(new_mask((5, 5, 5), (1, 1, 1), np.ones(125)))
        assert len(s) == 98

    def test_empty_mask(self):
        s = surface_extract(new_mask((3, 3, 3), (1, 1, 1), np.zeros(27)))
        assert len(s) == 0

    def test_every_surface_point_touches_background(self):
        m = random_mask(7, dims=(8, 8, 8), density=0.4)
        vol = m.volume().astype(bool)
        padded = np.pad(vol, 1)
        for x, y, z in surface_extract(m).points:
            assert vol[z, y, x]
            neigh = [padded[z + 1 + dz, y + 1 + dy, x + 1 + dx]
                     for dz, dy, dx in
                     [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0),
                      (0, 0, 1), (0, 0, -1)]]
            assert not all(neigh)


class TestDistances:
    def test_zero_on_equal_sets(self):
        m = random_mask(1)
        s = surface_extract(m)
        assert hausdorff(s, s) == 0.0
        assert asd(s, s) == 0.0

    def test_three_four_five(self):
        a = SurfacePointSet(np.array([[0, 0, 0]]), (1, 1, 1))
        b = SurfacePointSet(np.array([[3, 4, 0]]), (1, 1, 1))
        assert hausdorff(a, b) == pytest.approx(5.0)

    def test_asd_singletons(self):
        a = SurfacePointSet(np.array([[0, 0, 0]]), (1, 1, 1))
        b = SurfacePointSet(np.array([[2, 0, 0]]), (1, 1, 1))
        assert asd(a, b) == pytest.approx(2.0)

    def test_empty_surface_raises(self):
        a = SurfacePointSet(np.zeros((0, 3), dtype=int), (1, 1, 1))
        b = SurfacePointSet(np.array([[0, 0, 0]]), (1, 1, 1))
        with pytest.raises(EmptySurfaceError):
            hausdorff(a, b)
        with pytest.raises(EmptySurfaceError):
            asd(a, b)

    def test_matches_bruteforce(self):
        for seed in range(25):
            sa = surface_extract(random_mask(seed, spacing=(0.5, 0.75, 0.75)))
            sb = surface_extract(random_mask(seed + 500, spacing=(0.5, 0.75, 0.75)))
            assert hausdorff(sa, sb) == pytest.approx(
                hausdorff_bruteforce(sa, sb), abs=1e-9)
            assert asd(sa, sb) == pytest.approx(asd_bruteforce(sa, sb), abs=1e-9)

    def test_symmetry_and_ordering(self):
        for seed in range(10):
            sa = surface_extract(random_mask(seed))
            sb = surface_extract(random_mask(seed + 50))
            hd = hausdorff(sa, sb)
            assert hd == pytest.approx(hausdorff(sb, sa))
            av = asd(sa, sb)
            assert av == pytest.approx(asd(sb, sa))
            assert hd >= av

    def test_spacing_scales_distances(self):
        gt = random_mask(3)
        pred = random_mask(4)
        k = 2.5
        gt_k = new_mask(gt.dims, tuple(k * s for s in gt.spacing), gt.data)
        pred_k = new_mask(pred.dims, tuple(k * s for s in pred.spacing), pred.data)
        hd = hausdorff(surface_extract(gt), surface_extract(pred))
        hd_k = hausdorff(surface_extract(gt_k), surface_extract(pred_k))
        assert hd_k == pytest.approx(k * hd, rel=1e-12)
        av = asd(surface_extract(gt), surface_extract(pred))
        av_k = asd(surface_extract(gt_k), surface_extract(pred_k))
        assert av_k == pytest.approx(k * av, rel=1e-12)


class TestComponents:
    def test_two_isolated_voxels(self):
        data = np.zeros(27)
        data[0] = data[26] = 1
        lg = connected_components(new_mask((3, 3, 3), (1, 1, 1), data), 26)
        assert lg.n_components == 2

    def test_empty(self):
        lg = connected_components(new_mask((3, 3, 3), (1, 1, 1), np.zeros(27)), 6)
        assert lg.n_components == 0

    def test_diagonal_connectivity_difference(self):
        # two voxels sharing only a corner: one component at 26, two at 6
        data = np.zeros(8)
        data[0] = data[7] = 1  # (0,0,0) and (1,1,1)
        m = new_mask((2, 2, 2), (1, 1, 1), data)
        assert connected_components(m, 26).n_components == 1
        assert connected_components(m, 6).n_components == 2

    def test_ids_ordered_by_min_flat_index(self):
        data = np.zeros(27)
        data[26] = 1  # last voxel
        data[2] = 1   # early voxel
        lg = connected_components(new_mask((3, 3, 3), (1, 1, 1), data), 6)
        assert lg.labels[2] == 1
        assert lg.labels[26] == 2

    @pytest.mark.parametrize("connectivity", [6, 26])
    def test_matches_flood_fill_oracle(self, connectivity):
        for seed in range(15):
            m = random_mask(seed, dims=(16, 16, 16), density=0.3)
            lg = connected_components(m, connectivity)
            oracle = flood_fill_components(m.volume().astype(bool), connectivity)
            assert lg.n_components == oracle.max()
            assert partition_signature(lg.labels) == partition_signature(oracle.ravel())


class TestLesionDetection:
    def test_identical_three_components(self):
        data = np.zeros(5 * 5 * 5)
        data[0] = data[62] = data[124] = 1
        m = new_mask((5, 5, 5), (1, 1, 1), data)
        assert lesion_detection_metrics(m, m) == (1.0, 1.0, 1.0)

    def test_empty_prediction(self):
        gt = random_mask(0)
        empty = new_mask(gt.dims, gt.spacing, np.zeros(gt.n_voxels))
        pr, rc, f1 = lesion_detection_metrics(gt, empty)
        assert rc == 0.0 and f1 == 0.0

    def test_one_hit_one_spurious(self):
        # 2 GT lesions; prediction covers one fully and adds one stray blob
        dims = (8, 8, 8)
        gt = np.zeros(dims[::-1])
        gt[1, 1, 1] = 1
        gt[6, 6, 6] = 1
        pred = np.zeros(dims[::-1])
        pred[1, 1, 1] = 1   # detects first lesion
        pred[4, 1, 6] = 1   # spurious
        pr, rc, f1 = lesion_detection_metrics(
            new_mask(dims, (1, 1, 1), gt.ravel()),
            new_mask(dims, (1, 1, 1), pred.ravel()))
        assert (pr, rc, f1) == (0.5, 0.5, 0.5)

    def test_min_overlap_gate(self):
        # prediction covers 1 of 10 voxels of the GT lesion
        dims = (10, 1, 1)
        gt = new_mask(dims, (1, 1, 1), np.ones(10))
        pred_data = np.zeros(10)
        pred_data[0] = 1
        pred = new_mask(dims, (1, 1, 1), pred_data)
        assert lesion_detection_metrics(gt, pred, min_overlap=0.1)[1] == 1.0
        assert lesion_detection_metrics(gt, pred, min_overlap=0.2)[1] == 0.0


class TestFullReport:
    def test_perfect_prediction(self):
        rng = np.random.default_rng(11)
        p = new_prob((8, 8, 8), (1, 1, 1), rng.random(512))
        gt = binarize(p, 0.5)
        rep = full_report(gt, p, 0.5)
        assert rep.dc == 1.0
        assert rep.hd == 0.0
        assert rep.asd == 0.0

    def test_empty_prediction_absent_distances(self):
        gt = random_mask(2)
        p = new_prob(gt.dims, gt.spacing, np.zeros(gt.n_voxels))
        rep = full_report(gt, p, 0.5)
        assert rep.dc == 0.0
        assert rep.hd is None
        assert rep.asd is None

    def test_composition_consistency(self):
        gt = random_mask(5)
        rng = np.random.default_rng(6)
        p = new_prob(gt.dims, gt.spacing, rng.random(gt.n_voxels))
        rep = full_report(gt, p, 0.5)
        pred = binarize(p, 0.5)
        dc, jc, pr, rc, f1 = overlap_metrics(gt, pred)
        assert (rep.dc, rep.jc, rep.voxel_pr, rep.voxel_rc, rep.voxel_f1) == \
            (dc, jc, pr, rc, f1)
        assert rep.hd == hausdorff(surface_extract(gt), surface_extract(pred))
        assert rep.asd == asd(surface_extract(gt), surface_extract(pred))
        assert (rep.lesion_pr, rep.lesion_rc, rep.lesion_f1) == \
            lesion_detection_metrics(gt, pred, 0.1)

    def test_csv_row_has_empty_fields_for_absent_distances(self):
        gt = random_mask(2)
        p = new_prob(gt.dims, gt.spacing, np.zeros(gt.n_voxels))
        row = full_report(gt, p, 0.5, case_id="c0").to_csv_row()
        cells = row.split(",")
        assert cells[0] == "c0"
        assert cells[3] == "" and cells[4] == ""
