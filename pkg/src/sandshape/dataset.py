"""Mining push state-action triplets from demonstration image sequences.

The pipeline mirrors how the human pushing demonstrations were processed:
locate the tool in each frame, smooth and differentiate its trajectory,
split the sequence into single-motion sets at stops and direction
reversals, detect contours inside the per-set difference ROI, and emit
every frame pair whose tool displacement and contour change are both
large enough. Scripted simulator demos replace human recordings and carry
ground-truth tool positions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import vision
from .geometry import Rect
from .sandfield import RenderConfig, SandGrid, ToolFootprint, apply_push, render
from .strategies import DatasetStats
from .vision import ContourNotDetected, NoDifference

TRIPLET_FORMAT_VERSION = 1


@dataclass
class Frame:
    image: np.ndarray
    tool_pos: tuple[float, float] | None
    index: int


@dataclass
class MarkerConfig:
    """Tool marker rule for recorded frames (bright blob by default)."""

    min_luminance: int = 250


@dataclass
class MotionSet:
    """Consecutive frames covering one clear tool motion."""

    frames: list[Frame]
    velocities: list[tuple[float, float]]


@dataclass
class PushTriplet:
    """One push action with the contours before and after it."""

    p: tuple[float, float, float, float]  # u_s, v_s, u_e, v_e
    x_m: np.ndarray
    x_n: np.ndarray
    demo_id: str = ""
    m: int = 0
    n: int = 0


@dataclass
class Demo:
    demo_id: str
    frames: list[Frame]
    push: tuple[tuple[float, float], tuple[float, float]] | None = None  # ground truth


def detect_tool(image: np.ndarray, cfg: MarkerConfig = MarkerConfig()) -> tuple[float, float] | None:
    """Centroid of the largest marker blob, or None when absent."""
    mask = image >= cfg.min_luminance
    if not mask.any():
        return None
    blob = vision._largest_component(mask)
    rows, cols = np.nonzero(blob)
    return (float(cols.mean()), float(rows.mean()))


def smooth_positions(positions) -> np.ndarray:
    """Centered [1 2 1]/4 filter on interior samples; endpoints untouched."""
    p = np.asarray(positions, dtype=np.float64)
    if len(p) == 0:
        raise ValueError("empty position list")
    out = p.copy()
    if len(p) > 2:
        out[1:-1] = (p[:-2] + 2.0 * p[1:-1] + p[2:]) / 4.0
    return out


def split_motions(frames: list[Frame], positions=None, stop_speed: float = 1.0) -> list[MotionSet]:
    """Break a positioned frame sequence into single-motion sets.

    Velocities are forward differences of the smoothed positions (the last
    frame inherits the preceding velocity). Frames slower than
    ``stop_speed`` are breakpoints and are discarded; a negative scalar
    product between consecutive kept velocities starts a new set.
    """
    if positions is None:
        positions = [f.tool_pos for f in frames]
    if any(p is None for p in positions):
        raise ValueError("all frames must have tool positions")
    if len(frames) < 2:
        return []
    p = smooth_positions(positions)
    vel = np.empty_like(p)
    vel[:-1] = p[1:] - p[:-1]
    vel[-1] = vel[-2]
    speed = np.hypot(vel[:, 0], vel[:, 1])

    sets: list[MotionSet] = []
    cur_frames: list[Frame] = []
    cur_vel: list[tuple[float, float]] = []
    for i, frame in enumerate(frames):
        if speed[i] < stop_speed:
            if cur_frames:
                sets.append(MotionSet(cur_frames, cur_vel))
                cur_frames, cur_vel = [], []
            continue
        if cur_frames and float(np.dot(cur_vel[-1], vel[i])) < 0:
            sets.append(MotionSet(cur_frames, cur_vel))
            cur_frames, cur_vel = [], []
        cur_frames.append(frame)
        cur_vel.append((float(vel[i, 0]), float(vel[i, 1])))
    if cur_frames:
        sets.append(MotionSet(cur_frames, cur_vel))
    return sets


def extract_triplets(
    sets: list[MotionSet],
    tau_u: float = 5.0,
    tau_x: float = 3.0,
    n_points: int = 10,
    *,
    sand_threshold: float = 35.0,
    blob_threshold: int = 10,
    demo_id: str = "",
) -> list[PushTriplet]:
    """Emit every frame pair with large enough tool and contour change.

    Per set, the ROI is the difference box of the first and last frames;
    contours are detected on every frame inside it (frames without a
    detectable contour are discarded, which drops retiring motions). A
    pair (m, n), n > m, becomes a triplet when the tool moved more than
    tau_u pixels and the matched contour changed by more than tau_x.
    """
    if tau_u <= 0 or tau_x <= 0:
        raise ValueError("thresholds must be positive")
    triplets: list[PushTriplet] = []
    for motion in sets:
        if len(motion.frames) < 2:
            continue
        first, last = motion.frames[0], motion.frames[-1]
        try:
            roi = vision.diff_roi(first.image, last.image, blob_threshold)
        except NoDifference:
            continue
        detected: list[tuple[Frame, np.ndarray]] = []
        for frame in motion.frames:
            try:
                contour = vision.detect_contour(frame.image, roi, n_points, sand_threshold)
            except ContourNotDetected:
                continue
            detected.append((frame, contour))
        for a in range(len(detected)):
            frame_m, x_m = detected[a]
            for b in range(a + 1, len(detected)):
                frame_n, x_n = detected[b]
                disp = float(np.hypot(frame_n.tool_pos[0] - frame_m.tool_pos[0],
                                      frame_n.tool_pos[1] - frame_m.tool_pos[1]))
                if disp <= tau_u:
                    continue
                matched, _ = vision.match_contours(x_m, x_n)
                change = float(np.linalg.norm((matched - x_m).ravel()))
                if change <= tau_x:
                    continue
                triplets.append(PushTriplet(
                    p=(frame_m.tool_pos[0], frame_m.tool_pos[1],
                       frame_n.tool_pos[0], frame_n.tool_pos[1]),
                    x_m=x_m, x_n=matched,
                    demo_id=demo_id, m=frame_m.index, n=frame_n.index,
                ))
    return triplets


def compute_stats(triplets) -> DatasetStats:
    """Mean/stdev of matched-pair distance and of enclosing-box height."""
    if not triplets:
        raise ValueError("no triplets")
    d = np.array([vision.contour_distance(t.x_m, t.x_n) for t in triplets])
    dv = np.array([vision.pair_bbox_height(t.x_m, t.x_n) for t in triplets])
    return DatasetStats(
        mu_d=float(d.mean()), sigma_d=float(d.std()),
        mu_dv=float(dv.mean()), sigma_dv=float(dv.std()),
    )


def synthesize_demos(
    count: int,
    rng: np.random.Generator,
    *,
    width: int = 640,
    height: int = 480,
    tool: ToolFootprint = None,
    render_cfg: RenderConfig = None,
    frames_per_demo: int = 12,
    base_height: float = 4.0,
    prep_pushes: int = 2,
) -> list[Demo]:
    """Scripted straight pushes into a slab, rendered at a fixed stride.

    Each demo starts from a randomized sand slab, optionally pre-deformed
    by a few unrecorded pushes so the recorded push also meets curved
    contours. The tool then travels in a straight line into one of the
    slab's edges and the grid is rendered at every step with the
    ground-truth tool position attached. Deterministic under the supplied
    generator.
    """
    tool = tool or ToolFootprint(max(4, width // 21), max(4, height // 12))
    render_cfg = render_cfg or RenderConfig()
    margin_u, margin_v = tool.w_tcp, tool.h_tcp
    workspace = Rect(margin_u, margin_v, width - 2 * margin_u, height - 2 * margin_v)

    demos = []
    for d in range(count):
        slab_w = int(rng.integers(width // 3, width // 2))
        slab_h = int(rng.integers(height // 3, height // 2))
        u0 = int(rng.integers(workspace.u_min + tool.w_tcp, workspace.u_max - slab_w - tool.w_tcp))
        v0 = int(rng.integers(workspace.v_min + tool.h_tcp, workspace.v_max - slab_h - tool.h_tcp))
        heights = np.zeros((height, width))
        heights[v0 : v0 + slab_h, u0 : u0 + slab_w] = base_height
        grid = SandGrid(heights, workspace)

        for _ in range(int(rng.integers(0, prep_pushes + 1))):
            grid = _random_edge_push(grid, rng, tool, u0, v0, slab_w, slab_h)

        side = int(rng.integers(4))  # 0: from left, 1: right, 2: top, 3: bottom
        depth = float(rng.uniform(0.15, 0.45)) * (slab_w if side < 2 else slab_h)
        if side == 0:
            vq = v0 + float(rng.uniform(0.25, 0.75)) * slab_h
            start = (u0 - tool.w_tcp, vq)
            end = (u0 + depth, vq)
        elif side == 1:
            vq = v0 + float(rng.uniform(0.25, 0.75)) * slab_h
            start = (u0 + slab_w + tool.w_tcp, vq)
            end = (u0 + slab_w - depth, vq)
        elif side == 2:
            uq = u0 + float(rng.uniform(0.25, 0.75)) * slab_w
            start = (uq, v0 - tool.h_tcp)
            end = (uq, v0 + depth)
        else:
            uq = u0 + float(rng.uniform(0.25, 0.75)) * slab_w
            start = (uq, v0 + slab_h + tool.h_tcp)
            end = (uq, v0 + slab_h - depth)

        frames = []
        for i in range(frames_per_demo):
            frac = i / (frames_per_demo - 1)
            pos = (start[0] + frac * (end[0] - start[0]), start[1] + frac * (end[1] - start[1]))
            stepped = grid if i == 0 else apply_push(grid, start, pos, tool)
            frames.append(Frame(image=render(stepped, render_cfg), tool_pos=pos, index=i))
        demos.append(Demo(demo_id=f"demo-{d:04d}", frames=frames, push=(start, end)))
    return demos


def _random_edge_push(grid: SandGrid, rng: np.random.Generator, tool: ToolFootprint,
                      u0: int, v0: int, slab_w: int, slab_h: int) -> SandGrid:
    """One unrecorded push into a random edge, used to pre-deform demos."""
    side = int(rng.integers(4))
    depth = float(rng.uniform(0.1, 0.3)) * (slab_w if side < 2 else slab_h)
    if side == 0:
        vq = v0 + float(rng.uniform(0.2, 0.8)) * slab_h
        start, end = (u0 - tool.w_tcp, vq), (u0 + depth, vq)
    elif side == 1:
        vq = v0 + float(rng.uniform(0.2, 0.8)) * slab_h
        start, end = (u0 + slab_w + tool.w_tcp, vq), (u0 + slab_w - depth, vq)
    elif side == 2:
        uq = u0 + float(rng.uniform(0.2, 0.8)) * slab_w
        start, end = (uq, v0 - tool.h_tcp), (uq, v0 + depth)
    else:
        uq = u0 + float(rng.uniform(0.2, 0.8)) * slab_w
        start, end = (uq, v0 + slab_h + tool.h_tcp), (uq, v0 + slab_h - depth)
    return apply_push(grid, start, end, tool)


def mine_demo(demo: Demo, tau_u: float = 5.0, tau_x: float = 3.0, n_points: int = 10,
              marker: MarkerConfig = MarkerConfig(), **kwargs) -> list[PushTriplet]:
    """Full pipeline on one demo: positions, motion sets, triplets."""
    frames = []
    for f in demo.frames:
        pos = f.tool_pos if f.tool_pos is not None else detect_tool(f.image, marker)
        if pos is None:
            continue  # tool not visible: drop the frame
        frames.append(Frame(f.image, pos, f.index))
    sets = split_motions(frames)
    return extract_triplets(sets, tau_u, tau_x, n_points, demo_id=demo.demo_id, **kwargs)


def mine_demos(demos: list[Demo], **kwargs) -> list[PushTriplet]:
    """Mine several demos; output ordered by (demo id, m, n)."""
    out: list[PushTriplet] = []
    for demo in sorted(demos, key=lambda d: d.demo_id):
        out.extend(mine_demo(demo, **kwargs))
    return out


# ---------------------------------------------------------------------------
# file formats: demo directories, triplet records, stats report


def save_demo(demo: Demo, root) -> Path:
    """Write one frame PNG + JSON sidecar per frame under root/demo_id."""
    from PIL import Image

    folder = Path(root) / demo.demo_id
    folder.mkdir(parents=True, exist_ok=True)
    for frame in demo.frames:
        stem = folder / f"frame_{frame.index:04d}"
        Image.fromarray(frame.image, mode="L").save(stem.with_suffix(".png"))
        meta = {"index": frame.index, "tool_pos": list(frame.tool_pos) if frame.tool_pos else None}
        stem.with_suffix(".json").write_text(json.dumps(meta))
    return folder


def load_demo(folder) -> Demo:
    from PIL import Image

    folder = Path(folder)
    frames = []
    for png in sorted(folder.glob("frame_*.png")):
        meta = json.loads(png.with_suffix(".json").read_text())
        img = np.asarray(Image.open(png).convert("L"), dtype=np.uint8)
        pos = tuple(meta["tool_pos"]) if meta.get("tool_pos") else None
        frames.append(Frame(image=img, tool_pos=pos, index=int(meta["index"])))
    return Demo(demo_id=folder.name, frames=frames)


def save_triplets(triplets, path):
    """Line-delimited records: header line, then one JSON object per triplet."""
    with open(path, "w") as fh:
        fh.write(json.dumps({"format": "sandshape-triplets", "version": TRIPLET_FORMAT_VERSION}) + "\n")
        for t in triplets:
            fh.write(json.dumps({
                "p": list(t.p),
                "x_m": t.x_m.ravel().tolist(),
                "x_n": t.x_n.ravel().tolist(),
                "demo_id": t.demo_id, "m": t.m, "n": t.n,
            }) + "\n")


def load_triplets(path) -> list[PushTriplet]:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("format") != "sandshape-triplets" or header.get("version") != TRIPLET_FORMAT_VERSION:
            raise ValueError("unrecognized triplet file")
        out = []
        for line in fh:
            doc = json.loads(line)
            out.append(PushTriplet(
                p=tuple(doc["p"]),
                x_m=np.array(doc["x_m"], dtype=np.float64).reshape(-1, 2),
                x_n=np.array(doc["x_n"], dtype=np.float64).reshape(-1, 2),
                demo_id=doc["demo_id"], m=int(doc["m"]), n=int(doc["n"]),
            ))
    return out


def save_stats(stats: DatasetStats, path):
    doc = {"mu_d": stats.mu_d, "sigma_d": stats.sigma_d, "mu_dv": stats.mu_dv, "sigma_dv": stats.sigma_dv}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
