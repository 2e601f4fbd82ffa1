"""Image-space measurement: mutual information, ROIs, contours, resampling.

Conventions: a grayscale image is a uint8 array of shape (h, w) indexed
``img[v, u]``; a contour is an (N, 2) float array of (u, v) points; a Roi
is a pixel rectangle. The similarity error between current and desired
images is one minus their mutual information normalized by the desired
image's entropy, so it is 0 exactly when the images coincide and stays in
[0, 1].
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .geometry import Rect
from .sandfield import ToolFootprint

Roi = Rect


class NoDifference(Exception):
    """Current and desired images do not differ above the blob threshold."""


class ContourNotDetected(Exception):
    """No sand region found inside the region of interest."""


def _check_same_shape(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"image dimensions differ: {a.shape} vs {b.shape}")


def resample_to_tool(img: np.ndarray, tool: ToolFootprint) -> np.ndarray:
    """Block-mean downsample to tool resolution; partial trailing blocks drop.

    A 640x480 image with a 30x40 tool becomes 21x12 cells, each the mean
    luminance of its 30x40 block.
    """
    h, w = img.shape
    bw, bh = tool.w_tcp, tool.h_tcp
    if bw > w or bh > h:
        raise ValueError("tool footprint larger than image")
    n_cols, n_rows = w // bw, h // bh
    crop = img[: n_rows * bh, : n_cols * bw].astype(np.float64)
    return crop.reshape(n_rows, bh, n_cols, bw).mean(axis=(1, 3))


def luminance_codes(img: np.ndarray, bins: int) -> np.ndarray:
    """Map 8-bit luminances to histogram bin indices 0..bins-1."""
    return (img.astype(np.int64) * bins) // 256


def joint_histogram(a: np.ndarray, b: np.ndarray, bins: int = 32) -> np.ndarray:
    """Joint luminance count table (bins x bins) of two equal-size images."""
    _check_same_shape(a, b)
    return _kernels.joint_hist(luminance_codes(a, bins), luminance_codes(b, bins), bins)


def _entropy_of_counts(counts: np.ndarray, base: float | None) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    h = float(-(p * np.log(p)).sum())
    return h if base is None else h / math.log(base)


def entropy(img: np.ndarray, bins: int = 32, base: float | None = None) -> float:
    """Marginal luminance entropy; nats by default, or in the given base."""
    counts = np.bincount(luminance_codes(img, bins).ravel(), minlength=bins)
    return _entropy_of_counts(counts, base)


def mutual_information(a: np.ndarray, b: np.ndarray, bins: int = 32, base: float | None = None) -> float:
    """Mutual information of the joint luminance histogram.

    Computed as H(a) + H(b) - H(a, b) with all three entropies taken from
    the same joint table, which keeps MI(a, a) bit-equal to H(a). Natural
    log by default; ``base`` rescales (the normalized error is invariant
    to it).
    """
    joint = joint_histogram(a, b, bins)
    h_a = _entropy_of_counts(joint.sum(axis=1), base)
    h_b = _entropy_of_counts(joint.sum(axis=0), base)
    h_ab = _entropy_of_counts(joint.ravel(), base)
    return max(h_a + h_b - h_ab, 0.0)


def mi_error(current: np.ndarray, desired: np.ndarray, bins: int = 32) -> float:
    """Normalized dissimilarity in [0, 1]; 0 iff the images carry full MI.

    The raw mutual information is divided by the desired image's entropy so
    that a perfect match scores 0 (the ratio makes the log base
    irrelevant). A constant desired image has zero entropy; in that
    degenerate case the error is 0 for an exact pixel match and 1
    otherwise.
    """
    _check_same_shape(current, desired)
    h_desired = entropy(desired, bins)
    if h_desired == 0.0:
        return 0.0 if np.array_equal(current, desired) else 1.0
    e = 1.0 - mutual_information(current, desired, bins) / h_desired
    return min(max(e, 0.0), 1.0)


def _largest_component(mask: np.ndarray) -> np.ndarray:
    """Boolean mask of the largest 8-connected true region.

    Ties go to the component that appears first in raster order, which is
    backend independent.
    """
    labels, n = _kernels.label_components(mask)
    if n == 0:
        raise ValueError("no components")
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    sizes[0] = 0
    best = sizes.max()
    candidates = np.flatnonzero(sizes == best)
    if len(candidates) > 1:
        first = np.argmax(np.isin(labels.ravel(), candidates))
        winner = labels.ravel()[first]
    else:
        winner = candidates[0]
    return labels == winner


def diff_rois(current: np.ndarray, desired: np.ndarray, blob_threshold: int = 10) -> list[Roi]:
    """Bounding boxes of the difference-image blobs, largest first.

    Ties are ordered by first raster appearance, which is backend
    independent.
    """
    _check_same_shape(current, desired)
    diff = np.abs(current.astype(np.int16) - desired.astype(np.int16))
    mask = diff > blob_threshold
    if not mask.any():
        raise NoDifference("images differ nowhere above the blob threshold")
    labels, n = _kernels.label_components(mask)
    sizes = np.bincount(labels.ravel(), minlength=n + 1)
    sizes[0] = 0
    first_seen = np.full(n + 1, labels.size, dtype=np.int64)
    flat = labels.ravel()
    nonzero = np.flatnonzero(flat)
    np.minimum.at(first_seen, flat[nonzero], nonzero)
    order = sorted(range(1, n + 1), key=lambda lbl: (-sizes[lbl], first_seen[lbl]))
    rois = []
    for lbl in order:
        blob = labels == lbl
        rows = np.flatnonzero(blob.any(axis=1))
        cols = np.flatnonzero(blob.any(axis=0))
        rois.append(Roi(int(cols[0]), int(rows[0]),
                        int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1)))
    return rois


def diff_roi(current: np.ndarray, desired: np.ndarray, blob_threshold: int = 10) -> Roi:
    """Bounding box of the largest blob of the thresholded difference image."""
    return diff_rois(current, desired, blob_threshold)[0]


def detect_contour(
    img: np.ndarray,
    roi: Roi,
    n: int = 10,
    sand_threshold: float = 35.0,
) -> np.ndarray:
    """Sample n points along the outer contour of the largest sand region.

    The image is binarized at ``sand_threshold`` inside the ROI and the
    border of the largest region is traced. Only the physical part of the
    border is kept: pixels with a below-threshold neighbour somewhere in
    the full image. Runs of border pixels that merely follow the ROI clip
    (solid sand continuing beyond the window) are not part of the shape's
    outer contour and would bias the matching, so they are dropped. The
    remaining walk is resampled uniformly by arc length into exactly n
    points, starting at the contour pixel with the lowest u (ties: lowest
    v). Points are in full-image (u, v) coordinates.
    """
    h, w = img.shape
    window = Rect(0, 0, w, h).intersect(roi)
    if window is None:
        raise ContourNotDetected("ROI outside image")
    sub = img[window.v_min : window.v_max, window.u_min : window.u_max]
    mask = sub >= sand_threshold
    if not mask.any():
        raise ContourNotDetected("no sand inside ROI")
    comp = _largest_component(mask)
    flat_start = int(np.argmax(comp))
    start_r, start_c = divmod(flat_start, comp.shape[1])
    border = _kernels.trace_border(comp, start_r, start_c)

    rows = border[:, 0] + window.v_min
    cols = border[:, 1] + window.u_min
    real = _touches_background(img, rows, cols, sand_threshold)
    if not real.any():
        raise ContourNotDetected("sand fills the ROI: no outer contour inside")
    pts = np.stack([cols.astype(np.float64), rows.astype(np.float64)], axis=1)
    return _resample_walk(pts, real, n)


def _touches_background(img, rows, cols, threshold) -> np.ndarray:
    """Which border pixels have a below-threshold 8-neighbour in the image."""
    h, w = img.shape
    out = np.zeros(len(rows), dtype=bool)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            r = rows + dr
            c = cols + dc
            ok = (r >= 0) & (r < h) & (c >= 0) & (c < w)
            out[ok] |= img[r[ok], c[ok]] < threshold
    return out


def _resample_walk(pts: np.ndarray, keep: np.ndarray, n: int) -> np.ndarray:
    """Arc-length uniform sampling over the kept runs of a closed walk."""
    m = len(pts)
    # rotate so the walk starts at the kept point with smallest (u, v)
    kept_idx = np.flatnonzero(keep)
    order = kept_idx[np.lexsort((pts[kept_idx, 1], pts[kept_idx, 0]))]
    shift = order[0]
    pts = np.roll(pts, -shift, axis=0)
    keep = np.roll(keep, -shift)

    # adjacent kept pairs of the cyclic walk, including the closing edge;
    # dropped pixels contribute no arc length, so sampling never crosses a
    # synthetic gap
    segs_a, segs_b, lens = [], [], []
    for i in range(m):
        j = (i + 1) % m
        if not (keep[i] and keep[j]):
            continue
        step = np.hypot(pts[j, 0] - pts[i, 0], pts[j, 1] - pts[i, 1])
        segs_a.append(i)
        segs_b.append(j)
        lens.append(step)
    if not segs_a:
        return np.repeat(pts[:1], n, axis=0)
    lens = np.array(lens)
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    total = cum[-1]
    targets = np.arange(n) * (total / n)
    idx = np.searchsorted(cum, targets, side="right") - 1
    idx = np.clip(idx, 0, len(lens) - 1)
    a = pts[np.array(segs_a)[idx]]
    b = pts[np.array(segs_b)[idx]]
    frac = ((targets - cum[idx]) / lens[idx])[:, None]
    return a + (b - a) * frac


def match_contours(reference: np.ndarray, candidate: np.ndarray) -> tuple[np.ndarray, float]:
    """Reorder candidate to minimize the summed matched-pair distance.

    The search family is the 2N order-preserving alignments (N cyclic
    shifts, forward and reversed). Returns the best reordering and its
    summed Euclidean distance to the reference.
    """
    ref = np.asarray(reference, dtype=np.float64)
    cand = np.asarray(candidate, dtype=np.float64)
    if ref.shape != cand.shape:
        raise ValueError("contours differ in point count")
    n = len(ref)
    best_cost = np.inf
    best = cand
    for direction in (cand, cand[::-1]):
        for shift in range(n):
            rolled = np.roll(direction, -shift, axis=0)
            cost = float(np.hypot(*(rolled - ref).T).sum())
            if cost < best_cost:
                best_cost = cost
                best = rolled
    return best, best_cost


def contour_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Mean Euclidean distance over matched point pairs."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("contours differ in point count")
    return float(np.hypot(*(b - a).T).mean())


def pair_bbox_height(a: np.ndarray, b: np.ndarray) -> float:
    """Height along v of the smallest box enclosing both contours."""
    v = np.concatenate([np.asarray(a)[:, 1], np.asarray(b)[:, 1]])
    return float(v.max() - v.min())
