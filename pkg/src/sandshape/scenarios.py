"""Scenario documents: initial/desired heightfields plus all run configs.

A scenario is fully serializable to JSON. Desired shapes are usually given
as an action script applied to the initial heightfield, which makes them
reachable by construction (no material appears or disappears); explicit
primitive lists, raw height arrays and raw target images are also
supported.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Rect
from .sandfield import RenderConfig, SandGrid, ToolFootprint, apply_push, apply_tap, render
from .servo import CameraModel, ServoConfig
from .strategies import DatasetStats, Push, Tap, TerminationPolicy

SCENARIO_FORMAT = "sandshape-scenario"
SCENARIO_VERSION = 1


@dataclass
class Scenario:
    name: str
    width: int = 320
    height: int = 240
    workspace: Rect = field(default_factory=lambda: Rect(10, 10, 300, 220))
    initial: list[dict] = field(default_factory=list)
    desired: dict = field(default_factory=lambda: {"kind": "script", "actions": []})
    render: RenderConfig = field(default_factory=RenderConfig)
    tool: ToolFootprint = field(default_factory=lambda: ToolFootprint(15, 20))
    servo: ServoConfig = field(default_factory=ServoConfig)
    stats: DatasetStats = field(default_factory=DatasetStats)
    termination: TerminationPolicy = field(default_factory=TerminationPolicy)
    alpha: float = 1.0
    n_points: int = 10
    bins: int = 32
    blob_threshold: int = 10
    tap_level: float = 2.0
    master_seed: int = 0

    def initial_grid(self) -> SandGrid:
        return SandGrid(build_heights(self.width, self.height, self.initial), self.workspace)

    def desired_image(self) -> np.ndarray:
        """Render (or decode) the desired view."""
        kind = self.desired.get("kind")
        if kind == "image":
            pixels = np.array(self.desired["pixels"], dtype=np.uint8)
            if pixels.shape != (self.height, self.width):
                raise ValueError("target image dimensions disagree with scenario")
            return pixels
        return render(self.desired_grid(), self.render)

    def desired_grid(self) -> SandGrid:
        kind = self.desired.get("kind")
        if kind == "script":
            grid = self.initial_grid()
            for doc in self.desired["actions"]:
                action = action_from_dict(doc)
                if isinstance(action, Push):
                    grid = apply_push(grid, action.start, action.end, self.tool)
                else:
                    grid = apply_tap(grid, action.target, self.tool, self.tap_level)
            return grid
        if kind == "primitives":
            return SandGrid(build_heights(self.width, self.height, self.desired["primitives"]), self.workspace)
        if kind == "array":
            return SandGrid(np.array(self.desired["heights"], dtype=np.float64), self.workspace)
        raise ValueError(f"desired shape of kind {kind!r} has no heightfield")


def build_heights(width: int, height: int, primitives: list[dict]) -> np.ndarray:
    """Compose a heightfield from block / pile / ridge primitives."""
    h = np.zeros((height, width))
    uu, vv = np.meshgrid(np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64))
    for prim in primitives:
        kind = prim["type"]
        if kind == "block":
            u0, v0 = int(prim["u"]), int(prim["v"])
            h[v0 : v0 + int(prim["h"]), u0 : u0 + int(prim["w"])] += float(prim["height"])
        elif kind == "pile":
            dist = np.hypot(uu - prim["cu"], vv - prim["cv"])
            h += np.maximum(0.0, 1.0 - dist / prim["radius"]) * prim["peak"]
        elif kind == "ridge":
            du, dv = prim["u1"] - prim["u0"], prim["v1"] - prim["v0"]
            length = max(np.hypot(du, dv), 1e-9)
            t = np.clip(((uu - prim["u0"]) * du + (vv - prim["v0"]) * dv) / length**2, 0.0, 1.0)
            dist = np.hypot(uu - (prim["u0"] + t * du), vv - (prim["v0"] + t * dv))
            h += np.where(dist <= prim["width"] / 2.0, float(prim["height"]), 0.0)
        else:
            raise ValueError(f"unknown primitive {kind!r}")
    return h


def action_to_dict(action) -> dict:
    if isinstance(action, Push):
        return {"type": "push", "start": list(action.start), "end": list(action.end)}
    if isinstance(action, Tap):
        return {"type": "tap", "target": list(action.target)}
    raise TypeError(f"not an action: {action!r}")


def action_from_dict(doc: dict):
    if doc["type"] == "push":
        return Push(start=tuple(doc["start"]), end=tuple(doc["end"]))
    if doc["type"] == "tap":
        return Tap(target=tuple(doc["target"]))
    raise ValueError(f"unknown action type {doc['type']!r}")


def scenario_to_dict(sc: Scenario) -> dict:
    doc = {
        "format": SCENARIO_FORMAT,
        "version": SCENARIO_VERSION,
        "name": sc.name,
        "width": sc.width,
        "height": sc.height,
        "workspace": list(sc.workspace.as_tuple()),
        "initial": sc.initial,
        "desired": sc.desired,
        "render": asdict(sc.render),
        "tool": asdict(sc.tool),
        "servo": {
            "v_xy": sc.servo.v_xy, "v_z": sc.servo.v_z,
            "eps_px": sc.servo.eps_px, "eps_z": sc.servo.eps_z, "dt": sc.servo.dt,
            "home_pixel": list(sc.servo.home_pixel),
            "z_raised": sc.servo.z_raised, "z_base": sc.servo.z_base,
            "camera": asdict(sc.servo.camera), "step_slack": sc.servo.step_slack,
        },
        "stats": asdict(sc.stats),
        "termination": asdict(sc.termination),
        "alpha": sc.alpha,
        "n_points": sc.n_points,
        "bins": sc.bins,
        "blob_threshold": sc.blob_threshold,
        "tap_level": sc.tap_level,
        "master_seed": sc.master_seed,
    }
    return doc


def scenario_from_dict(doc: dict) -> Scenario:
    if doc.get("format") != SCENARIO_FORMAT or doc.get("version") != SCENARIO_VERSION:
        raise ValueError("unrecognized scenario document")
    servo_doc = dict(doc["servo"])
    servo_doc["home_pixel"] = tuple(servo_doc["home_pixel"])
    servo_doc["camera"] = CameraModel(**servo_doc["camera"])
    return Scenario(
        name=doc["name"],
        width=doc["width"],
        height=doc["height"],
        workspace=Rect(*doc["workspace"]),
        initial=doc["initial"],
        desired=doc["desired"],
        render=RenderConfig(**doc["render"]),
        tool=ToolFootprint(**doc["tool"]),
        servo=ServoConfig(**servo_doc),
        stats=DatasetStats(**doc["stats"]),
        termination=TerminationPolicy(**doc["termination"]),
        alpha=doc["alpha"],
        n_points=doc["n_points"],
        bins=doc["bins"],
        blob_threshold=doc["blob_threshold"],
        tap_level=doc["tap_level"],
        master_seed=doc["master_seed"],
    )


def save_scenario(sc: Scenario, path):
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n")


def load_scenario(path) -> Scenario:
    return scenario_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# built-in scenarios (desk scale: 320x240 grid, 15x20 tool)

_DESK_STATS = DatasetStats(mu_d=21.0, sigma_d=5.0, mu_dv=40.0, sigma_dv=11.0)
_SLAB = {"type": "block", "u": 70, "v": 50, "w": 180, "h": 140, "height": 3.0}
_SLAB_EDGE = 250.0  # right edge of the slab
# Luminance saturates at the slab height, the way a real top-down camera
# stops distinguishing material depth: piled-up material reads as sand, not
# as a brighter class, which keeps the similarity error focused on contour
# geometry.
_LETTER_RENDER = RenderConfig(h_max=3.0)


def _notch_lanes(depth_fn, v0: float, v1: float, step: float = 4.0) -> list[dict]:
    """Carving script: one straight push per lane, depth given per row."""
    actions = []
    for vc in np.arange(v0, v1 + 1e-9, step):
        depth = float(depth_fn(vc))
        if depth < 4.0:
            continue
        actions.append({
            "type": "push",
            "start": [_SLAB_EDGE + 12.0, float(vc)],
            "end": [_SLAB_EDGE - depth, float(vc)],
        })
    return actions


def _letter_scenario(name: str, actions: list[dict], seed: int) -> Scenario:
    return Scenario(
        name=name,
        initial=[_SLAB],
        desired={"kind": "script", "actions": actions},
        render=_LETTER_RENDER,
        stats=_DESK_STATS,
        servo=ServoConfig(home_pixel=(14.0, 14.0)),
        termination=TerminationPolicy(mode="relaxed", epsilon=0.005, max_iterations=40),
        # contour work dominates these tasks, so weight the resampled-image
        # error down when choosing the action type automatically
        alpha=0.15,
        master_seed=seed,
    )


def c_shape(seed: int = 3) -> Scenario:
    """Semicircular mouth carved into the right edge: a C opening rightward."""
    radius, depth = 45.0, 28.0

    def profile(v):
        t = (v - 120.0) / radius
        return depth * np.sqrt(max(0.0, 1.0 - t * t))

    return _letter_scenario("c-shape", _notch_lanes(profile, 120 - radius, 120 + radius), seed)


def e_shape(seed: int = 8) -> Scenario:
    """Two round notches leave three arms on the right edge: an E profile."""
    radius, depth = 21.0, 30.0
    actions = []
    for center in (88.0, 152.0):
        def profile(v, c=center):
            t = (v - c) / radius
            return depth * np.sqrt(max(0.0, 1.0 - t * t))

        actions += _notch_lanes(profile, center - radius, center + radius)
    return _letter_scenario("e-shape", actions, seed)


def sigma_shape(seed: int = 7) -> Scenario:
    """Wedge notch, deepest mid-edge: the angled mouth of a sigma."""
    half, depth = 45.0, 30.0

    def profile(v):
        return depth * (1.0 - abs(v - 120.0) / half)

    return _letter_scenario("sigma-shape", _notch_lanes(profile, 120 - half, 120 + half), seed)


def _tap_scenario(name: str, initial: list[dict], taps: list[tuple], seed: int) -> Scenario:
    actions = [{"type": "tap", "target": list(t)} for t in taps]
    return Scenario(
        name=name,
        initial=initial,
        desired={"kind": "script", "actions": actions},
        stats=_DESK_STATS,
        servo=ServoConfig(home_pixel=(14.0, 14.0)),
        termination=TerminationPolicy(mode="relaxed", epsilon=0.005, max_iterations=30),
        tap_level=0.8,
        master_seed=seed,
    )


def _tap_grid_targets(u0, v0, u1, v1, tool=(15, 20)):
    """Tap targets on a tool-sized lattice covering the given rectangle."""
    return [(float(u), float(v)) for v in range(v0, v1, tool[1]) for u in range(u0, u1, tool[0])]


def tap_pile(seed: int = 11) -> Scenario:
    """One central pile to be leveled everywhere."""
    pile = {"type": "pile", "cu": 160.0, "cv": 110.0, "radius": 55.0, "peak": 5.0}
    return _tap_scenario("tap-pile", [pile], _tap_grid_targets(100, 50, 220, 170), seed)


def tap_square(seed: int = 11) -> Scenario:
    """Loose sand everywhere; flatten a square in the upper part."""
    loose = {"type": "block", "u": 40, "v": 30, "w": 240, "h": 180, "height": 1.6}
    return _tap_scenario("tap-square", [loose], _tap_grid_targets(115, 40, 205, 120), seed)


def tap_two_piles(seed: int = 11) -> Scenario:
    """Two side piles to be leveled."""
    piles = [
        {"type": "pile", "cu": 110.0, "cv": 115.0, "radius": 40.0, "peak": 4.5},
        {"type": "pile", "cu": 215.0, "cv": 115.0, "radius": 40.0, "peak": 4.5},
    ]
    taps = _tap_grid_targets(70, 65, 160, 165) + _tap_grid_targets(175, 65, 265, 165)
    return _tap_scenario("tap-two-piles", piles, taps, seed)


BUILTIN = {
    "c-shape": c_shape,
    "e-shape": e_shape,
    "sigma-shape": sigma_shape,
    "tap-pile": tap_pile,
    "tap-square": tap_square,
    "tap-two-piles": tap_two_piles,
}


def get_scenario(name_or_path: str) -> Scenario:
    """Resolve a built-in name or load a scenario file."""
    if name_or_path in BUILTIN:
        return BUILTIN[name_or_path]()
    return load_scenario(name_or_path)
