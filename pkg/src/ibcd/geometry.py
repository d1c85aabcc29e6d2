"""Rectangles, square masks and the strided mask grids used by both stages.

Coordinates are integer pixels, ``x`` is the column and ``y`` the row. Every
rectangle is closed on both ends, so a rectangle ``[x1, y1, x2, y2]`` spans
``x2 - x1 + 1`` columns.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InvalidConfig, InvalidGeometry


class Rect(NamedTuple):
    x1: int
    y1: int
    x2: int
    y2: int

    @property
    def width(self) -> int:
        return self.x2 - self.x1 + 1

    @property
    def height(self) -> int:
        return self.y2 - self.y1 + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    @classmethod
    def square(cls, x: int, y: int, side: int) -> "Rect":
        return cls(x, y, x + side - 1, y + side - 1)

    def inside(self, width: int, height: int) -> bool:
        return 0 <= self.x1 <= self.x2 < width and 0 <= self.y1 <= self.y2 < height


def check_rect(r: Rect, width: int | None = None, height: int | None = None) -> None:
    if r.x1 > r.x2 or r.y1 > r.y2:
        raise InvalidGeometry(f"degenerate rectangle {tuple(r)}")
    if width is not None and not r.inside(width, height):
        raise InvalidGeometry(f"rectangle {tuple(r)} outside {width}x{height} image")


def rect_intersects(a: Rect, b: Rect) -> bool:
    return a.x1 <= b.x2 and b.x1 <= a.x2 and a.y1 <= b.y2 and b.y1 <= a.y2


def rect_covers(outer: Rect, inner: Rect) -> bool:
    return (outer.x1 <= inner.x1 and outer.y1 <= inner.y1
            and outer.x2 >= inner.x2 and outer.y2 >= inner.y2)


def rect_intersection(a: Rect, b: Rect) -> Rect | None:
    if not rect_intersects(a, b):
        return None
    return Rect(max(a.x1, b.x1), max(a.y1, b.y1), min(a.x2, b.x2), min(a.y2, b.y2))


def mask_tensor(region: Rect, width: int, height: int) -> np.ndarray:
    """Binary occlusion tensor of shape (H, W): 0 inside ``region``, 1 elsewhere."""
    m = np.ones((height, width), dtype=np.uint8)
    m[region.y1:region.y2 + 1, region.x1:region.x2 + 1] = 0
    return m


def grid_anchors(length: int, eta: int, stride: int) -> list[int]:
    """Anchors 0, s, 2s, ... with the last one clamped to ``length - eta``."""
    last = length - eta
    anchors = list(range(0, last + 1, stride))
    if anchors[-1] != last:
        anchors.append(last)
    return anchors


@dataclass(frozen=True)
class MaskSet:
    """All ``eta`` x ``eta`` masks of a strided grid, in row-major order."""

    width: int
    height: int
    eta: int
    stride: int
    masks: tuple[Rect, ...]
    array: np.ndarray = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.masks)

    def __iter__(self):
        return iter(self.masks)

    def __getitem__(self, i):
        return self.masks[i]

    def subset(self, masks) -> "MaskSet":
        masks = tuple(masks)
        arr = np.array(masks, dtype=np.int64).reshape(-1, 4)
        return MaskSet(self.width, self.height, self.eta, self.stride, masks, arr)


def generate_mask_set(width: int, height: int, eta: int, stride: int) -> MaskSet:
    if stride < 1:
        raise InvalidGeometry(f"stride must be >= 1, got {stride}")
    if not 1 <= eta <= min(width, height):
        raise InvalidGeometry(f"mask side {eta} does not fit a {width}x{height} image")
    xs = grid_anchors(width, eta, stride)
    ys = grid_anchors(height, eta, stride)
    masks = tuple(Rect.square(x, y, eta) for y in ys for x in xs)
    arr = np.array(masks, dtype=np.int64).reshape(-1, 4)
    arr.flags.writeable = False
    return MaskSet(width, height, eta, stride, masks, arr)


def max_coverable_patch(eta: int, stride: int) -> int:
    """Largest patch side that some grid mask covers wherever the patch sits."""
    return max(eta - stride + 1, 0)


def mask_side_for_patch(v: int, stride: int) -> int:
    """Smallest mask side whose grid is guaranteed to cover a ``v``-sided patch."""
    return v + stride - 1


@dataclass(frozen=True)
class MaskSchedule:
    sizes: tuple[int, ...]
    stride: int
    reduction_interval: int

    @property
    def eta_max(self) -> int:
        return self.sizes[0]

    @property
    def eta_min(self) -> int:
        return self.sizes[-1]


def initial_mask_side(width: int, height: int, stride: int) -> int:
    """Smallest mask side whose grid covers every admissible patch.

    An admissible patch covers at most a quarter of the image, so its side is
    at most half the shorter image side.
    """
    side = min(width, height) // 2 + stride - 1
    if side > min(width, height):
        raise InvalidConfig(
            f"stride {stride} too large: initial mask side {side} exceeds the image")
    return side
