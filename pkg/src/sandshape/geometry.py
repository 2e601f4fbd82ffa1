"""Shared pixel-space rectangle used for workspaces and regions of interest."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in pixel coordinates.

    ``u_min``/``v_min`` is the top-left corner; the rectangle covers pixels
    ``u_min <= u < u_min + width`` and ``v_min <= v < v_min + height``.
    """

    u_min: int
    v_min: int
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"degenerate rectangle: {self}")

    @property
    def u_max(self) -> int:
        """One past the last column."""
        return self.u_min + self.width

    @property
    def v_max(self) -> int:
        """One past the last row."""
        return self.v_min + self.height

    def contains(self, u: float, v: float) -> bool:
        return self.u_min <= u < self.u_max and self.v_min <= v < self.v_max

    def intersect(self, other: "Rect") -> "Rect | None":
        u0 = max(self.u_min, other.u_min)
        v0 = max(self.v_min, other.v_min)
        u1 = min(self.u_max, other.u_max)
        v1 = min(self.v_max, other.v_max)
        if u1 <= u0 or v1 <= v0:
            return None
        return Rect(u0, v0, u1 - u0, v1 - v0)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.u_min, self.v_min, self.width, self.height)
