import math

import numpy as np
import pytest

from sandshape.sandfield import ToolFootprint
from sandshape.vision import (
    ContourNotDetected,
    NoDifference,
    Roi,
    contour_distance,
    detect_contour,
    diff_roi,
    diff_rois,
    entropy,
    match_contours,
    mi_error,
    mutual_information,
    pair_bbox_height,
    resample_to_tool,
)


def rand_img(rng, w, h, lo=0, hi=256):
    return rng.integers(lo, hi, size=(h, w), dtype=np.uint8)


# -- independent oracles -----------------------------------------------------

def mi_oracle(a, b, bins):
    """Brute-force joint probability table, mutual information in nats."""
    joint = {}
    for pa, pb in zip(a.ravel().tolist(), b.ravel().tolist()):
        key = (pa * bins // 256, pb * bins // 256)
        joint[key] = joint.get(key, 0) + 1
    n = a.size
    pa_m, pb_m = {}, {}
    for (ia, ib), c in joint.items():
        pa_m[ia] = pa_m.get(ia, 0) + c
        pb_m[ib] = pb_m.get(ib, 0) + c
    mi = 0.0
    for (ia, ib), c in joint.items():
        p_ab = c / n
        mi += p_ab * math.log(p_ab / ((pa_m[ia] / n) * (pb_m[ib] / n)))
    return mi


def entropy_oracle(a, bins):
    counts = {}
    for p in a.ravel().tolist():
        key = p * bins // 256
        counts[key] = counts.get(key, 0) + 1
    return -sum(c / a.size * math.log(c / a.size) for c in counts.values())


def components_oracle(mask):
    """Flood-fill 8-connected labelling, component pixel sets."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for r in range(h):
        for c in range(w):
            if not mask[r, c] or seen[r, c]:
                continue
            stack, pixels = [(r, c)], []
            seen[r, c] = True
            while stack:
                rr, cc = stack.pop()
                pixels.append((rr, cc))
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        r2, c2 = rr + dr, cc + dc
                        if 0 <= r2 < h and 0 <= c2 < w and mask[r2, c2] and not seen[r2, c2]:
                            seen[r2, c2] = True
                            stack.append((r2, c2))
            comps.append(pixels)
    return comps


# -- resampling ----------------------------------------------------------------

class TestResample:
    def test_paper_dimensions(self):
        img = np.full((480, 640), 77, dtype=np.uint8)
        out = resample_to_tool(img, ToolFootprint(30, 40))
        assert out.shape == (12, 21)
        assert np.all(out == 77.0)

    def test_constant_blocks_exact(self):
        img = np.zeros((40, 60), dtype=np.uint8)
        tool = ToolFootprint(20, 20)
        values = [[10, 20, 30], [40, 50, 60]]
        for bv, row in enumerate(values):
            for bu, val in enumerate(row):
                img[bv * 20 : (bv + 1) * 20, bu * 20 : (bu + 1) * 20] = val
        assert np.array_equal(resample_to_tool(img, tool), np.array(values, dtype=float))

    def test_matches_block_mean_oracle(self):
        rng = np.random.default_rng(3)
        img = rand_img(rng, 64, 50)
        tool = ToolFootprint(7, 9)
        out = resample_to_tool(img, tool)
        assert out.shape == (5, 9)
        for r in range(5):
            for c in range(9):
                block = img[r * 9 : (r + 1) * 9, c * 7 : (c + 1) * 7]
                oracle = sum(int(x) for x in block.ravel()) / block.size
                assert out[r, c] == oracle  # integer sums are exact in float64

    def test_affine_in_luminance_shift(self):
        rng = np.random.default_rng(4)
        img = rand_img(rng, 60, 40, lo=0, hi=200)
        tool = ToolFootprint(10, 10)
        shifted = (img + 50).astype(np.uint8)
        assert np.allclose(resample_to_tool(shifted, tool),
                           resample_to_tool(img, tool) + 50.0, atol=1e-9)


# -- mutual information ---------------------------------------------------------

class TestMutualInformation:
    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a, b = rand_img(rng, 8, 8), rand_img(rng, 8, 8)
            assert mutual_information(a, b) == pytest.approx(mi_oracle(a, b, 32), abs=1e-12)

    def test_symmetry(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            a, b = rand_img(rng, 12, 9), rand_img(rng, 12, 9)
            assert abs(mutual_information(a, b) - mutual_information(b, a)) <= 1e-12

    def test_self_information_is_entropy(self):
        rng = np.random.default_rng(7)
        a = rand_img(rng, 16, 16)
        assert mutual_information(a, a) == entropy(a)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mutual_information(np.zeros((4, 4), np.uint8), np.zeros((4, 5), np.uint8))

    def test_log_base_rescales_but_error_invariant(self):
        rng = np.random.default_rng(20)
        a, b = rand_img(rng, 10, 10), rand_img(rng, 10, 10)
        nats = mutual_information(a, b)
        bits = mutual_information(a, b, base=2)
        assert bits == pytest.approx(nats / math.log(2), rel=1e-12)
        # the normalized error is a ratio of same-base quantities
        assert mi_error(a, b) == pytest.approx(
            1 - bits / entropy(b, base=2), abs=1e-12)


class TestMiError:
    def test_identical_images_zero(self):
        rng = np.random.default_rng(8)
        a = rand_img(rng, 20, 15)
        assert mi_error(a, a) == 0.0

    def test_constant_pair(self):
        a = np.full((10, 10), 40, np.uint8)
        assert mi_error(a.copy(), a.copy()) == 0.0
        b = np.full((10, 10), 90, np.uint8)
        assert mi_error(b, a) == 1.0

    def test_matches_oracle_ratio(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            a, b = rand_img(rng, 10, 10), rand_img(rng, 10, 10)
            expected = 1.0 - mi_oracle(a, b, 32) / entropy_oracle(b, 32)
            assert mi_error(a, b) == pytest.approx(expected, abs=1e-12)

    def test_range(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            a, b = rand_img(rng, 9, 7), rand_img(rng, 9, 7)
            assert 0.0 <= mi_error(a, b) <= 1.0


# -- difference ROI -------------------------------------------------------------

class TestDiffRoi:
    def test_no_difference(self):
        a = np.full((20, 20), 60, np.uint8)
        with pytest.raises(NoDifference):
            diff_roi(a, a.copy())

    def test_single_patch(self):
        a = np.full((30, 40), 60, np.uint8)
        b = a.copy()
        b[10:15, 20:25] = 200
        assert diff_roi(a, b).as_tuple() == (20, 10, 5, 5)

    def test_largest_blob_wins(self):
        a = np.full((40, 60), 60, np.uint8)
        b = a.copy()
        b[2:5, 2:12] = 200          # 30 px blob
        b[20:35, 20:40] = 200       # 300 px blob
        roi = diff_roi(a, b)
        comps = components_oracle(np.abs(a.astype(int) - b.astype(int)) > 10)
        largest = max(comps, key=len)
        rows = [p[0] for p in largest]
        cols = [p[1] for p in largest]
        assert roi.as_tuple() == (min(cols), min(rows),
                                  max(cols) - min(cols) + 1, max(rows) - min(rows) + 1)

    def test_blob_ordering(self):
        a = np.full((40, 60), 60, np.uint8)
        b = a.copy()
        b[2:5, 2:12] = 200
        b[20:35, 20:40] = 200
        rois = diff_rois(a, b)
        assert len(rois) == 2
        assert rois[0].as_tuple() == (20, 20, 20, 15)
        assert rois[1].as_tuple() == (2, 2, 10, 3)


# -- contour detection -----------------------------------------------------------

class TestDetectContour:
    def test_filled_rectangle_points_on_perimeter(self):
        img = np.full((60, 80), 10, np.uint8)
        img[20:40, 30:60] = 120
        pts = detect_contour(img, Roi(10, 10, 65, 45), n=10)
        assert pts.shape == (10, 2)
        for u, v in pts:
            du = min(abs(u - 30), abs(u - 59))
            dv = min(abs(v - 20), abs(v - 39))
            on_u_edge = du <= 1.0 and 19 <= v <= 40
            on_v_edge = dv <= 1.0 and 29 <= u <= 60
            assert on_u_edge or on_v_edge, (u, v)

    def test_empty_roi(self):
        img = np.full((30, 30), 10, np.uint8)
        with pytest.raises(ContourNotDetected):
            detect_contour(img, Roi(5, 5, 20, 20))

    def test_straight_edge_near_collinear(self):
        img = np.full((50, 70), 10, np.uint8)
        img[:, :35] = 120  # sand on the left half
        pts = detect_contour(img, Roi(10, 10, 50, 30), n=10)
        assert pts.shape == (10, 2)
        assert np.all(np.abs(pts[:, 0] - 34.0) <= 1.0)

    def test_solid_window_has_no_outer_contour(self):
        img = np.full((50, 70), 120, np.uint8)
        with pytest.raises(ContourNotDetected):
            detect_contour(img, Roi(10, 10, 30, 20))

    def test_exact_point_count_varied_n(self):
        img = np.full((40, 40), 10, np.uint8)
        img[10:30, 10:30] = 120
        for n in (3, 10, 17):
            assert detect_contour(img, Roi(0, 0, 40, 40), n=n).shape == (n, 2)


# -- contour matching -------------------------------------------------------------

def enumerate_family(candidate):
    n = len(candidate)
    for direction in (candidate, candidate[::-1]):
        for shift in range(n):
            yield np.roll(direction, -shift, axis=0)


class TestMatchContours:
    def test_recovers_cyclic_shift(self):
        rng = np.random.default_rng(11)
        ref = rng.uniform(0, 100, size=(10, 2))
        cand = np.roll(ref, 4, axis=0)
        matched, cost = match_contours(ref, cand)
        assert np.allclose(matched, ref)
        assert cost == pytest.approx(0.0, abs=1e-12)

    def test_recovers_reversal(self):
        rng = np.random.default_rng(12)
        ref = rng.uniform(0, 100, size=(8, 2))
        matched, cost = match_contours(ref, ref[::-1])
        assert np.allclose(matched, ref)
        assert cost == pytest.approx(0.0, abs=1e-12)

    def test_minimal_over_exhaustive_family(self):
        rng = np.random.default_rng(13)
        for _ in range(25):
            ref = rng.uniform(0, 50, size=(7, 2))
            cand = rng.uniform(0, 50, size=(7, 2))
            matched, cost = match_contours(ref, cand)
            best = min(np.hypot(*(p - ref).T).sum() for p in enumerate_family(cand))
            assert cost == pytest.approx(best, rel=1e-12)
            identity = np.hypot(*(cand - ref).T).sum()
            assert cost <= identity + 1e-12

    def test_result_is_permutation(self):
        rng = np.random.default_rng(14)
        ref = rng.uniform(0, 50, size=(9, 2))
        cand = rng.uniform(0, 50, size=(9, 2))
        matched, _ = match_contours(ref, cand)
        a = sorted(map(tuple, np.round(matched, 9)))
        b = sorted(map(tuple, np.round(cand, 9)))
        assert a == b


class TestContourMetrics:
    def test_distance_identical(self):
        c = np.arange(20, dtype=float).reshape(10, 2)
        assert contour_distance(c, c) == 0.0

    def test_distance_translation_pythagoras(self):
        c = np.arange(20, dtype=float).reshape(10, 2)
        assert contour_distance(c, c + np.array([3.0, 4.0])) == pytest.approx(5.0)

    def test_distance_matches_hand_sum(self):
        rng = np.random.default_rng(15)
        a = rng.uniform(0, 30, (6, 2))
        b = rng.uniform(0, 30, (6, 2))
        oracle = sum(math.hypot(b[i, 0] - a[i, 0], b[i, 1] - a[i, 1]) for i in range(6)) / 6
        assert contour_distance(a, b) == pytest.approx(oracle, rel=1e-12)

    def test_bbox_height_one_row(self):
        a = np.array([[1.0, 7.0], [5.0, 7.0]])
        assert pair_bbox_height(a, a) == 0.0

    def test_bbox_height_span(self):
        a = np.array([[0.0, 20.0], [1.0, 50.0]])
        b = np.array([[2.0, 120.0], [3.0, 60.0]])
        assert pair_bbox_height(a, b) == 100.0

    def test_bbox_height_minmax_oracle(self):
        rng = np.random.default_rng(16)
        a = rng.uniform(0, 200, (5, 2))
        b = rng.uniform(0, 200, (5, 2))
        vs = list(a[:, 1]) + list(b[:, 1])
        assert pair_bbox_height(a, b) == pytest.approx(max(vs) - min(vs), rel=1e-12)
