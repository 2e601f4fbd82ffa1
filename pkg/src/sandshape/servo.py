"""Simulated image-based visual servoing of the tool.

Planar motion uses a constant-norm velocity pointed at the target pixel
(no asymptotic tail); vertical motion uses a constant-magnitude signed
velocity toward the target height. Push and tap actions expand into
waypoint plans that keep the tool away from the material except on the
dedicated contact segments; the deformation itself is applied atomically
when a contact segment completes, so an executed plan changes the grid
exactly as the corresponding sandfield operation would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sandfield import SandGrid, ToolFootprint, apply_push, apply_tap
from .strategies import Push, Tap


class ServoDivergence(RuntimeError):
    """A segment failed to converge within its step budget."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory or []


@dataclass
class CameraModel:
    """Fixed top-down camera: pixel u grows along -x, pixel v along +y."""

    scale: float = 1.0  # pixels per workspace unit
    u0: float = 0.0
    v0: float = 0.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("camera scale must be positive")

    def project(self, x: float, y: float) -> tuple[float, float]:
        return (self.u0 - self.scale * x, self.v0 + self.scale * y)

    def unproject(self, u: float, v: float) -> tuple[float, float]:
        return ((self.u0 - u) / self.scale, (v - self.v0) / self.scale)


@dataclass
class ToolState:
    """Tool position in workspace units plus its camera projection."""

    x: float
    y: float
    z: float

    def pixel(self, camera: CameraModel) -> tuple[float, float]:
        return camera.project(self.x, self.y)

    def in_contact(self, cfg: "ServoConfig") -> bool:
        return abs(self.z - cfg.z_base) <= cfg.eps_z


@dataclass
class ServoConfig:
    v_xy: float = 5.0  # workspace units per step
    v_z: float = 0.5
    eps_px: float = 2.0
    eps_z: float = 0.05
    dt: float = 1.0
    home_pixel: tuple[float, float] = (8.0, 8.0)
    z_raised: float = 3.0
    z_base: float = 0.0
    camera: CameraModel = field(default_factory=CameraModel)
    step_slack: int = 16

    def __post_init__(self):
        if min(self.v_xy, self.v_z, self.eps_px, self.eps_z, self.dt) <= 0:
            raise ValueError("speeds, thresholds and dt must be positive")


@dataclass
class Segment:
    """One waypoint leg: a pixel target, a height target, or both."""

    label: str
    law: str  # "planar" | "vertical" | "both"
    target_pixel: tuple[float, float] | None = None
    target_z: float | None = None
    deform: str | None = None  # None | "push" | "tap"
    deform_args: tuple = ()


@dataclass
class WaypointPlan:
    segments: list[Segment]
    home: tuple[float, float]


def xy_velocity(current_px, target_px, cfg: ServoConfig) -> tuple[float, float]:
    """Constant-norm planar velocity that shrinks the pixel error.

    The direction follows the pixel error mapped through the camera axes
    (u error flips sign because u runs along -x); the magnitude is v_xy
    until the error enters the arrival threshold.
    """
    u, v = current_px
    us, vs = target_px
    err = math.hypot(us - u, vs - v)
    if err <= cfg.eps_px:
        return (0.0, 0.0)
    ex = (-us + u) / err
    ey = (vs - v) / err
    return (cfg.v_xy * ex, cfg.v_xy * ey)


def z_velocity(z: float, z_target: float, cfg: ServoConfig) -> float:
    """Signed constant-magnitude vertical velocity with a dead band."""
    if abs(z_target - z) <= cfg.eps_z:
        return 0.0
    return cfg.v_z * math.copysign(1.0, z_target - z)


def plan_push(action: Push, cfg: ServoConfig, grid: SandGrid, tool: ToolFootprint | None = None) -> WaypointPlan:
    """Waypoints H -> B -> S -> E -> U -> H for a pushing action.

    B sits on the start pixel's row at the workspace edge opposite the
    sand centroid, so the approach cannot cross the material. The contact
    leg S -> E is planar-only with no vertical motion; afterwards the tool
    rises and returns home under both laws.
    """
    (u_s, v_s), (u_e, v_e) = action.start, action.end
    ws = grid.workspace
    total = grid.heights.sum()
    if total > 0:
        centroid_u = float((grid.heights.sum(axis=0) * np.arange(grid.width)).sum() / total)
    else:
        centroid_u = (ws.u_min + ws.u_max) / 2.0
    if centroid_u >= u_s:
        b_u = float(ws.u_min)
    else:
        b_u = float(ws.u_max - 1)
    if abs(b_u - u_s) < 1.0:  # start already at that edge: offset by tool width
        offset = float(tool.w_tcp) if tool is not None else 30.0
        direction = -1.0 if centroid_u >= u_s else 1.0
        b_u = float(min(max(u_s + direction * offset, ws.u_min), ws.u_max - 1))
    b = (b_u, float(v_s))
    return WaypointPlan(
        segments=[
            Segment("B", "planar", target_pixel=b),
            Segment("S", "planar", target_pixel=(u_s, v_s)),
            Segment("E", "planar", target_pixel=(u_e, v_e), deform="push",
                    deform_args=(action.start, action.end)),
            Segment("U", "vertical", target_z=cfg.z_raised),
            Segment("H", "both", target_pixel=cfg.home_pixel, target_z=cfg.z_base),
        ],
        home=cfg.home_pixel,
    )


def plan_tap(action: Tap, cfg: ServoConfig) -> WaypointPlan:
    """Waypoints for a tap: rise, travel above the target, drop, rise, home."""
    t = action.target
    return WaypointPlan(
        segments=[
            Segment("U0", "vertical", target_z=cfg.z_raised),
            Segment("T^", "planar", target_pixel=t),
            Segment("T", "vertical", target_z=cfg.z_base, deform="tap", deform_args=(t,)),
            Segment("U1", "vertical", target_z=cfg.z_raised),
            Segment("H^", "planar", target_pixel=cfg.home_pixel),
            Segment("H", "vertical", target_z=cfg.z_base),
        ],
        home=cfg.home_pixel,
    )


def execute(
    plan: WaypointPlan,
    tool_state: ToolState,
    grid: SandGrid,
    cfg: ServoConfig,
    tool: ToolFootprint,
    tap_level: float = 2.0,
) -> tuple[ToolState, SandGrid, list[dict]]:
    """Integrate the control laws through the plan, deforming on contact.

    Returns the final tool state (back at the home pixel), the updated
    grid, and a per-step trajectory log for replay. Raises
    ServoDivergence if any segment exhausts its step budget.
    """
    cam = cfg.camera
    state = ToolState(tool_state.x, tool_state.y, tool_state.z)
    out_grid = grid
    log: list[dict] = []
    step_count = 0

    for seg in plan.segments:
        budget = _segment_budget(seg, state, cfg)
        for _ in range(budget):
            planar_err = 0.0
            if seg.law in ("planar", "both") and seg.target_pixel is not None:
                px = state.pixel(cam)
                planar_err = math.hypot(seg.target_pixel[0] - px[0], seg.target_pixel[1] - px[1])
            z_err = 0.0
            if seg.law in ("vertical", "both") and seg.target_z is not None:
                z_err = abs(seg.target_z - state.z)
            if planar_err <= cfg.eps_px and z_err <= cfg.eps_z:
                break

            if planar_err > cfg.eps_px:
                step_px = cfg.v_xy * cam.scale * cfg.dt
                if planar_err <= step_px:  # terminal step: land exactly on target
                    state.x, state.y = cam.unproject(*seg.target_pixel)
                else:
                    vx, vy = xy_velocity(px, seg.target_pixel, cfg)
                    state.x += vx * cfg.dt
                    state.y += vy * cfg.dt
            if z_err > cfg.eps_z:
                step_z = cfg.v_z * cfg.dt
                if z_err <= step_z:
                    state.z = seg.target_z
                else:
                    state.z += z_velocity(state.z, seg.target_z, cfg) * cfg.dt
            step_count += 1
            u, v = state.pixel(cam)
            log.append({"step": step_count, "x": state.x, "y": state.y, "z": state.z,
                        "u": u, "v": v, "segment": seg.label})
        else:
            raise ServoDivergence(f"segment {seg.label} exceeded its step budget", log)

        if seg.deform == "push":
            start, end = seg.deform_args
            out_grid = apply_push(out_grid, start, end, tool)
        elif seg.deform == "tap":
            (target,) = seg.deform_args
            out_grid = apply_tap(out_grid, target, tool, tap_level)
    return state, out_grid, log


def _segment_budget(seg: Segment, state: ToolState, cfg: ServoConfig) -> int:
    steps = 2
    if seg.target_pixel is not None:
        px = state.pixel(cfg.camera)
        dist = math.hypot(seg.target_pixel[0] - px[0], seg.target_pixel[1] - px[1])
        steps += math.ceil(dist / (cfg.v_xy * cfg.camera.scale * cfg.dt))
    if seg.target_z is not None:
        steps += math.ceil(abs(seg.target_z - state.z) / (cfg.v_z * cfg.dt))
    return steps + cfg.step_slack
