"""Plastic heightfield simulator: the stand-in for sand, sandbox and camera.

The material is a 2-D grid of non-negative heights, one cell per image
pixel (``heights[v, u]``). Two deformation operations exist, mirroring the
two tool motions: a planar push that plows a swath of material and piles it
ahead of the final tool face, and a vertical tap that levels the tool
footprint and spills the excess onto the surrounding ring. Both conserve
total mass and touch only cells near the action. Rendering maps heights to
luminance monotonically, so taller material is brighter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Rect


class ActionRejected(ValueError):
    """Raised when an action's geometry cannot be applied."""


@dataclass
class ToolFootprint:
    """Contact-surface size of the tool, in pixels of the camera image."""

    w_tcp: int = 30
    h_tcp: int = 40

    def __post_init__(self):
        if self.w_tcp < 1 or self.h_tcp < 1:
            raise ValueError("tool footprint must be at least 1x1")


@dataclass
class RenderConfig:
    """Height-to-luminance mapping of the simulated top-down camera.

    Luminance is a monotone non-decreasing function of cell height:
    background below ``presence_threshold``, otherwise
    ``sand_base_luminance + luminance_gain * min(h, h_max)`` clamped to
    8-bit range. ``noise_sigma > 0`` adds seeded granular noise (off by
    default so rendering stays a pure function of the grid).
    """

    background_luminance: int = 10
    sand_base_luminance: int = 60
    luminance_gain: float = 18.0
    h_max: float = 10.0
    presence_threshold: float = 0.05
    noise_sigma: float = 0.0
    noise_seed: int = 0

    def __post_init__(self):
        if not 0 <= self.background_luminance < self.sand_base_luminance <= 255:
            raise ValueError("need 0 <= background < sand base <= 255")

    @property
    def sand_cutoff(self) -> float:
        """Binarization threshold halfway between background and sand."""
        return (self.background_luminance + self.sand_base_luminance) / 2.0


@dataclass
class SandGrid:
    """Heightfield state: ``heights[v, u]`` with a tool-accessible workspace."""

    heights: np.ndarray
    workspace: Rect = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.heights = np.asarray(self.heights, dtype=np.float64)
        if self.heights.ndim != 2:
            raise ValueError("heights must be 2-D")
        if np.any(self.heights < 0):
            raise ValueError("negative height")
        if self.workspace is None:
            self.workspace = Rect(0, 0, self.width, self.height)

    @classmethod
    def empty(cls, width: int = 640, height: int = 480, workspace: Rect | None = None) -> "SandGrid":
        return cls(np.zeros((height, width)), workspace)

    @property
    def width(self) -> int:
        return self.heights.shape[1]

    @property
    def height(self) -> int:
        return self.heights.shape[0]

    def copy(self) -> "SandGrid":
        return replace(self, heights=self.heights.copy())


def total_mass(grid: SandGrid) -> float:
    """Sum of all cell heights."""
    return float(grid.heights.sum())


def render(grid: SandGrid, cfg: RenderConfig) -> np.ndarray:
    """Project the heightfield to an 8-bit grayscale image (row-major h x w)."""
    h = grid.heights
    lum = cfg.sand_base_luminance + cfg.luminance_gain * np.minimum(h, cfg.h_max)
    lum = np.clip(np.rint(lum), 0, 255)
    img = np.where(h < cfg.presence_threshold, float(cfg.background_luminance), lum)
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng(cfg.noise_seed)
        img = np.clip(img + rng.normal(0.0, cfg.noise_sigma, img.shape), 0, 255)
    return img.astype(np.uint8)


def _clip_segment(start, end, ws: Rect):
    """Liang-Barsky clip of segment start-end to the workspace rectangle."""
    x0, y0 = float(start[0]), float(start[1])
    x1, y1 = float(end[0]), float(end[1])
    dx, dy = x1 - x0, y1 - y0
    t0, t1 = 0.0, 1.0
    # closed bounds on the last row/col of the workspace
    bounds = (
        (-dx, x0 - ws.u_min),
        (dx, (ws.u_max - 1) - x0),
        (-dy, y0 - ws.v_min),
        (dy, (ws.v_max - 1) - y0),
    )
    for p, q in bounds:
        if p == 0:
            if q < 0:
                return None
            continue
        r = q / p
        if p < 0:
            if r > t1:
                return None
            t0 = max(t0, r)
        else:
            if r < t0:
                return None
            t1 = min(t1, r)
    if t0 > t1:
        return None
    return (x0 + t0 * dx, y0 + t0 * dy), (x0 + t1 * dx, y0 + t1 * dy)


def apply_push(grid: SandGrid, start, end, tool: ToolFootprint) -> SandGrid:
    """Plow all material in the swept swath and pile it ahead of the tool.

    The swath is the segment dilated perpendicular to the motion by the
    tool's support in that direction (the tool itself stays axis-aligned;
    its orientation is not controlled). Everything inside is removed and
    deposited uniformly into a band of depth ceil(w_tcp / 2) ahead of the
    final tool face, widened by a small lateral margin. Deposits are
    clipped to the grid; a push ending at the boundary piles up against it.
    Mass is conserved exactly up to float rounding.
    """
    if tuple(map(float, start)) == tuple(map(float, end)):
        raise ActionRejected("zero-length push")
    clipped = _clip_segment(start, end, grid.workspace)
    if clipped is None:
        raise ActionRejected("push segment outside workspace")
    (us, vs), (ue, ve) = clipped
    du, dv = ue - us, ve - vs
    length = math.hypot(du, dv)
    if length == 0.0:
        raise ActionRejected("zero-length push after workspace clipping")
    du, dv = du / length, dv / length
    nu, nv = -dv, du
    # support of the axis-aligned footprint along the normal of the motion
    half_width = (tool.w_tcp * abs(nu) + tool.h_tcp * abs(nv)) / 2.0
    band_depth = math.ceil(tool.w_tcp / 2)
    # all displaced mass stays within the lane width, so a deeper push down
    # the same lane re-plows everything the previous one piled up
    margin = 0.0

    pad = half_width + band_depth + margin + 2.0
    u_lo = max(0, math.floor(min(us, ue) - pad))
    u_hi = min(grid.width - 1, math.ceil(max(us, ue) + pad))
    v_lo = max(0, math.floor(min(vs, ve) - pad))
    v_hi = min(grid.height - 1, math.ceil(max(vs, ve) + pad))

    uu, vv = np.meshgrid(
        np.arange(u_lo, u_hi + 1, dtype=np.float64),
        np.arange(v_lo, v_hi + 1, dtype=np.float64),
    )
    t = (uu - us) * du + (vv - vs) * dv
    p = (uu - us) * nu + (vv - vs) * nv

    swath = (t >= 0.0) & (t <= length) & (np.abs(p) <= half_width)
    band = (t > length) & (t <= length + band_depth) & (np.abs(p) <= half_width + margin)

    out = grid.copy()
    window = out.heights[v_lo : v_hi + 1, u_lo : u_hi + 1]
    swept = float(window[swath].sum())
    if swept == 0.0:
        return out
    if not band.any():
        # push ended flush against the boundary: pile into the last slice
        band = swath & (t > length - band_depth)
    n_band = int(band.sum())
    if n_band == 0:
        return out
    window[swath] = 0.0
    window[band] += swept / n_band
    return out


def apply_tap(
    grid: SandGrid,
    target,
    tool: ToolFootprint,
    tap_level: float = 2.0,
    anchor: str = "corner",
) -> SandGrid:
    """Level the tool footprint and spill the excess onto the ring around it.

    The footprint is anchored at ``target``: its top-left corner by default
    (matching how resampled-cell indices map back to pixels), or its centre
    with ``anchor="center"``. Cells under the footprint are set to
    min(mean footprint height, tap_level); the displaced mass is spread
    uniformly over the one-cell ring just outside the footprint.
    """
    u_t, v_t = int(round(target[0])), int(round(target[1]))
    if anchor == "center":
        u_t -= tool.w_tcp // 2
        v_t -= tool.h_tcp // 2
    elif anchor != "corner":
        raise ValueError(f"unknown tap anchor {anchor!r}")

    fp = Rect(u_t, v_t, tool.w_tcp, tool.h_tcp).intersect(grid.workspace)
    if fp is None:
        raise ActionRejected("tap footprint outside workspace")

    out = grid.copy()
    h = out.heights
    patch = h[fp.v_min : fp.v_max, fp.u_min : fp.u_max]
    mean_h = float(patch.mean())
    if mean_h <= tap_level and np.all(patch == patch.flat[0]):
        return out  # already flat at or below the tap level

    level = min(mean_h, tap_level)
    excess = max(float(patch.sum()) - level * patch.size, 0.0)

    ring = _ring_mask(grid.height, grid.width, fp)
    n_ring = int(ring.sum())
    if n_ring == 0:
        # footprint covers the whole grid: nowhere to spill, keep all mass
        patch[:, :] = mean_h
        return out
    patch[:, :] = level
    if excess > 0.0:
        h[ring] += excess / n_ring
    return out


def _ring_mask(grid_h: int, grid_w: int, fp: Rect) -> np.ndarray:
    mask = np.zeros((grid_h, grid_w), dtype=bool)
    u0, v0 = max(fp.u_min - 1, 0), max(fp.v_min - 1, 0)
    u1, v1 = min(fp.u_max + 1, grid_w), min(fp.v_max + 1, grid_h)
    mask[v0:v1, u0:u1] = True
    mask[fp.v_min : fp.v_max, fp.u_min : fp.u_max] = False
    return mask
