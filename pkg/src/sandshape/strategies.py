"""Mapping visual state to actions: tap targeting, the local push pipeline,
the three pushing strategies, automatic action-type choice and termination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import vision
from .geometry import Rect
from .sandfield import ToolFootprint
from .vision import ContourNotDetected, Roi


class NothingToTap(Exception):
    """Resampled current and desired images are identical."""


class NoPushNeeded(Exception):
    """Current and near contours coincide."""


class ShapeReached(Exception):
    """Both push- and tap-controlled feature errors are zero."""


@dataclass
class Push:
    """Planar tool translation between two image points."""

    start: tuple[float, float]
    end: tuple[float, float]


@dataclass
class Tap:
    """Vertical tool translation; parameterized by its image target."""

    target: tuple[float, float]


Action = Push | Tap


@dataclass
class DatasetStats:
    """Human-action statistics steering the local pipeline.

    ``mu_d`` caps how far a single push may move the contour; ``mu_dv``
    caps the ROI height. Defaults are the values measured on the human
    pushing dataset; desk-scale scenarios override them.
    """

    mu_d: float = 42.0
    sigma_d: float = 10.0
    mu_dv: float = 100.0
    sigma_dv: float = 22.0

    def __post_init__(self):
        if min(self.mu_d, self.sigma_d, self.mu_dv, self.sigma_dv) < 0:
            raise ValueError("dataset statistics must be non-negative")


@dataclass
class LocalTarget:
    """Clipped ROI with the current contour and the near desired contour."""

    roi: Roi
    current: np.ndarray
    near: np.ndarray


@dataclass
class TerminationPolicy:
    mode: str = "relaxed"  # "strict" | "relaxed"
    epsilon: float = 0.005
    max_iterations: int = 50
    target_error: float = 0.0  # 0 disables the accuracy stop

    def __post_init__(self):
        if self.mode not in ("strict", "relaxed"):
            raise ValueError(f"unknown termination mode {self.mode!r}")
        if self.epsilon < 0 or self.max_iterations < 1:
            raise ValueError("invalid termination policy")


@dataclass
class TerminationVerdict:
    stop: bool
    reason: str | None = None
    at: int | None = None  # 1-based index into the error sequence


def select_tap(
    current: np.ndarray,
    desired: np.ndarray,
    tool: ToolFootprint,
    rng: np.random.Generator,
) -> Tap:
    """Tap where the resampled image difference is highest.

    The argmax cell scales back to image coordinates through the tool size
    (cell (2, 3) with a 30x40 tool taps pixel (60, 120), the cell's
    top-left corner). Ties are broken by a uniform draw.
    """
    if current.shape != desired.shape:
        raise ValueError("resampled image dimensions differ")
    diff = np.abs(np.asarray(current, dtype=np.float64) - np.asarray(desired, dtype=np.float64))
    peak = diff.max()
    if peak == 0.0:
        raise NothingToTap("resampled images are identical")
    flat = np.flatnonzero(diff.ravel() == peak)
    choice = flat[0] if len(flat) == 1 else flat[int(rng.integers(len(flat)))]
    v_cell, u_cell = divmod(int(choice), diff.shape[1])
    return Tap(target=(float(u_cell * tool.w_tcp), float(v_cell * tool.h_tcp)))


def interpolate_near(current: np.ndarray, desired: np.ndarray, mu_d: float) -> np.ndarray:
    """Pull the desired contour toward the current one, capped at mu_d.

    Returns the desired contour unchanged when the mean matched distance is
    within mu_d; otherwise scales the displacement so a single human-sized
    push can reach the result.
    """
    d = vision.contour_distance(current, desired)
    if d <= mu_d:
        return desired
    return current + (mu_d / d) * (desired - current)


def local_target(
    current_img: np.ndarray,
    desired_img: np.ndarray,
    stats: DatasetStats,
    n: int,
    rng: np.random.Generator,
    *,
    sand_threshold: float = 35.0,
    blob_threshold: int = 10,
    retries: int = 5,
) -> LocalTarget:
    """Pick a clipped sub-ROI and build the near desired contour inside it.

    Follows the local pipeline: difference-image ROI, height clipping to
    mu_dv, uniform random choice among the clipped candidates, contour
    detection and matching on both images, then the capped interpolation.
    Sub-ROIs where a contour cannot be detected are redrawn up to
    ``retries`` times; if a difference blob yields nothing detectable the
    next-largest blob is tried, so an undetectable remnant cannot deadlock
    the loop.
    """
    rois = vision.diff_rois(current_img, desired_img, blob_threshold)
    clip_h = int(round(stats.mu_dv))
    last_err: Exception | None = None
    for roi in rois[:3]:
        if roi.height > clip_h:
            offsets = roi.height - clip_h + 1  # candidate sub-ROIs at 1-px steps
            candidates = [Roi(roi.u_min, roi.v_min + off, roi.width, clip_h) for off in range(offsets)]
        else:
            candidates = [roi]
        attempts = retries if len(candidates) > 1 else 1
        for _ in range(attempts):
            sub = candidates[0] if len(candidates) == 1 else candidates[int(rng.integers(len(candidates)))]
            try:
                cur = vision.detect_contour(current_img, sub, n, sand_threshold)
                des = vision.detect_contour(desired_img, sub, n, sand_threshold)
            except ContourNotDetected as err:
                last_err = err
                continue
            matched, _ = vision.match_contours(cur, des)
            return LocalTarget(roi=sub, current=cur, near=interpolate_near(cur, matched, stats.mu_d))
    raise ContourNotDetected(f"no contour in any candidate ROI: {last_err}")


def push_maximum(target: LocalTarget, rng: np.random.Generator) -> Push:
    """Push along the matched pair whose contours are farthest apart."""
    dists = np.hypot(*(target.near - target.current).T)
    peak = dists.max()
    if peak == 0.0:
        raise NoPushNeeded("contours coincide")
    ties = np.flatnonzero(dists == peak)
    j = ties[0] if len(ties) == 1 else ties[int(rng.integers(len(ties)))]
    return Push(start=tuple(target.current[j]), end=tuple(target.near[j]))


def push_average(target: LocalTarget) -> Push:
    """Push from the current contour centroid to the near contour centroid."""
    start = target.current.mean(axis=0)
    end = target.near.mean(axis=0)
    if start[0] == end[0] and start[1] == end[1]:
        raise NoPushNeeded("contour centroids coincide")
    return Push(start=tuple(start), end=tuple(end))


def push_learned(target: LocalTarget, model, bounds: tuple[int, int]) -> Push:
    """Predict the push with the trained network, in image coordinates.

    The input is the concatenated current and near contours; the four
    outputs are rounded and clamped to the image bounds.
    """
    x = np.concatenate([target.current.ravel(), target.near.ravel()])
    u_s, v_s, u_e, v_e = model.predict_pixels(x)
    w, h = bounds
    u_s, u_e = np.clip(np.rint([u_s, u_e]), 0, w - 1)
    v_s, v_e = np.clip(np.rint([v_s, v_e]), 0, h - 1)
    if (u_s, v_s) == (u_e, v_e):
        raise NoPushNeeded("predicted push is degenerate")
    return Push(start=(float(u_s), float(v_s)), end=(float(u_e), float(v_e)))


def select_action_auto(
    current_img: np.ndarray,
    desired_img: np.ndarray,
    alpha: float,
    tool: ToolFootprint,
    n: int,
    *,
    sand_threshold: float = 35.0,
    workspace: Rect | None = None,
    normalize_luminance: bool = False,
) -> str:
    """Choose "push" or "tap" by comparing the two feature errors.

    Pushes when the contour error exceeds alpha times the resampled-image
    error. Falls back to tapping when a contour cannot be detected (there
    is nothing for a push to act on).
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    h, w = current_img.shape
    roi = workspace or Rect(0, 0, w, h)
    try:
        cur_c = vision.detect_contour(current_img, roi, n, sand_threshold)
        des_c = vision.detect_contour(desired_img, roi, n, sand_threshold)
        matched, _ = vision.match_contours(cur_c, des_c)
        push_err = float(np.linalg.norm((matched - cur_c).ravel()))
    except ContourNotDetected:
        push_err = None

    cur_rs = vision.resample_to_tool(current_img, tool)
    des_rs = vision.resample_to_tool(desired_img, tool)
    if normalize_luminance:
        cur_rs = cur_rs - cur_rs.mean()
        des_rs = des_rs - des_rs.mean()
    tap_err = float(np.linalg.norm((cur_rs - des_rs).ravel()))

    if push_err is None:
        return "tap"
    if push_err == 0.0 and tap_err == 0.0:
        raise ShapeReached("both feature errors are zero")
    return "push" if push_err > alpha * tap_err else "tap"


def check_termination(errors, policy: TerminationPolicy) -> TerminationVerdict:
    """Apply the error-trend stopping rules to the recorded error sequence.

    Strict mode stops at the first increase; relaxed mode tolerates
    increases up to epsilon. Both stop once the sequence reaches
    ``max_iterations`` entries, or earlier if the accuracy target is met.
    """
    if len(errors) < 1:
        raise ValueError("need at least one recorded error")
    if policy.target_error > 0 and errors[-1] <= policy.target_error:
        return TerminationVerdict(True, "target-accuracy", len(errors))
    threshold = 0.0 if policy.mode == "strict" else policy.epsilon
    for i in range(len(errors) - 1):
        if errors[i + 1] - errors[i] > threshold:
            return TerminationVerdict(True, "error-increase", i + 2)
    if len(errors) >= policy.max_iterations:
        return TerminationVerdict(True, "max-iterations", len(errors))
    return TerminationVerdict(False)
