"""Integer rectilinear geometry: rectangles, cell orientations, and the
canonical slab form used for exact layout comparison.

All coordinates are integer database units (DBU).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

DBU_PER_MICRON = 1000


class GeometryError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Rect:
    llx: int
    lly: int
    urx: int
    ury: int

    def __post_init__(self):
        if not (self.llx < self.urx and self.lly < self.ury):
            raise GeometryError(f"degenerate rectangle {self.as_tuple()}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.llx, self.lly, self.urx, self.ury)

    @property
    def width(self) -> int:
        return self.urx - self.llx

    @property
    def height(self) -> int:
        return self.ury - self.lly

    @property
    def area(self) -> int:
        return self.width * self.height

    def translate(self, dx: int, dy: int) -> Rect:
        return Rect(self.llx + dx, self.lly + dy, self.urx + dx, self.ury + dy)

    def intersection(self, other: Rect) -> Rect | None:
        """Positive-area overlap with `other`, or None."""
        llx = max(self.llx, other.llx)
        lly = max(self.lly, other.lly)
        urx = min(self.urx, other.urx)
        ury = min(self.ury, other.ury)
        if llx < urx and lly < ury:
            return Rect(llx, lly, urx, ury)
        return None

    def touches(self, other: Rect) -> bool:
        """True on overlap or shared edge/corner."""
        return (self.llx <= other.urx and other.llx <= self.urx
                and self.lly <= other.ury and other.lly <= self.ury)

    def to_microns(self, dbu_per_micron: int = DBU_PER_MICRON) -> str:
        f = lambda v: f"{v / dbu_per_micron:.3f}"  # noqa: E731
        return f"{{{f(self.llx)} {f(self.lly)}}} {{{f(self.urx)} {f(self.ury)}}}"


class Orientation(Enum):
    R0 = "R0"
    R180 = "R180"
    MX = "MX"
    MY = "MY"

    @property
    def def_name(self) -> str:
        return _DEF_NAMES[self]

    @property
    def mirrors_x(self) -> bool:
        """True when local x is mirrored (x -> w - x)."""
        return self in (Orientation.MY, Orientation.R180)

    @property
    def mirrors_y(self) -> bool:
        return self in (Orientation.MX, Orientation.R180)


_DEF_NAMES = {
    Orientation.R0: "N",
    Orientation.R180: "S",
    Orientation.MX: "FS",
    Orientation.MY: "FN",
}

_FLIP_H = {
    Orientation.R0: Orientation.MY,
    Orientation.MY: Orientation.R0,
    Orientation.MX: Orientation.R180,
    Orientation.R180: Orientation.MX,
}

_FLIP_V = {
    Orientation.R0: Orientation.MX,
    Orientation.MX: Orientation.R0,
    Orientation.MY: Orientation.R180,
    Orientation.R180: Orientation.MY,
}


def flip_h(o: Orientation) -> Orientation:
    """Mirror a placed cell left-right, as the fixer's flip operations do."""
    return _FLIP_H[o]


def flip_v(o: Orientation) -> Orientation:
    return _FLIP_V[o]


def transform_rect(r: Rect, o: Orientation, master_w: int, master_h: int) -> Rect:
    """Map a master-local rect into the placed-local frame of orientation `o`.

    The placed cell keeps the bounding box [0, master_w] x [0, master_h], so
    the result only needs translating by the instance origin.
    """
    if r.llx < 0 or r.lly < 0 or r.urx > master_w or r.ury > master_h:
        raise GeometryError(
            f"rect {r.as_tuple()} outside master bbox (0, 0, {master_w}, {master_h})")
    llx, lly, urx, ury = r.llx, r.lly, r.urx, r.ury
    if o.mirrors_x:
        llx, urx = master_w - urx, master_w - llx
    if o.mirrors_y:
        lly, ury = master_h - ury, master_h - lly
    return Rect(llx, lly, urx, ury)


def _merge_intervals(intervals: list[tuple[int, int]]) -> list[tuple[int, int]]:
    intervals.sort()
    out: list[list[int]] = []
    for lo, hi in intervals:
        if out and lo <= out[-1][1]:
            if hi > out[-1][1]:
                out[-1][1] = hi
        else:
            out.append([lo, hi])
    return [(lo, hi) for lo, hi in out]


def canonical_rects(rects: Iterable[Rect]) -> tuple[Rect, ...]:
    """Unique maximal-horizontal-slab decomposition of the union of `rects`.

    Bands between consecutive distinct y values carry maximal disjoint
    x-intervals; an interval present in vertically contiguous bands becomes
    one slab. Output is sorted by (lly, llx).
    """
    rects = list(rects)
    if not rects:
        return ()
    ys = sorted({r.lly for r in rects} | {r.ury for r in rects})
    by_bottom = sorted(rects, key=lambda r: r.lly)
    out: list[Rect] = []
    open_slabs: dict[tuple[int, int], int] = {}
    active: list[Rect] = []
    k = 0
    for y0, y1 in zip(ys, ys[1:]):
        while k < len(by_bottom) and by_bottom[k].lly <= y0:
            active.append(by_bottom[k])
            k += 1
        active = [r for r in active if r.ury > y0]
        band = set(_merge_intervals([(r.llx, r.urx) for r in active]))
        for iv in [iv for iv in open_slabs if iv not in band]:
            out.append(Rect(iv[0], open_slabs.pop(iv), iv[1], y0))
        for iv in band:
            open_slabs.setdefault(iv, y0)
    for iv, start in open_slabs.items():
        out.append(Rect(iv[0], start, iv[1], ys[-1]))
    out.sort(key=lambda r: (r.lly, r.llx))
    return tuple(out)


@dataclass(frozen=True)
class LayerGeometry:
    layer: str
    rects: tuple[Rect, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "rects", tuple(self.rects))

    def __bool__(self) -> bool:
        return bool(self.rects)


def canonicalize(g: LayerGeometry) -> LayerGeometry:
    return LayerGeometry(g.layer, canonical_rects(g.rects))


def clip_translate(g: LayerGeometry, window: Rect) -> LayerGeometry:
    """Clip to `window`, shift the window's lower-left to the origin, canonicalize."""
    clipped = []
    for r in g.rects:
        c = r.intersection(window)
        if c is not None:
            clipped.append(c.translate(-window.llx, -window.lly))
    return LayerGeometry(g.layer, canonical_rects(clipped))


def mirror_x_rects(rects: Iterable[Rect], width: int) -> tuple[Rect, ...]:
    """Mirror left-right inside [0, width] and return the canonical form."""
    return canonical_rects(Rect(width - r.urx, r.lly, width - r.llx, r.ury) for r in rects)


def geometry_key(layers: dict[str, LayerGeometry]) -> tuple:
    """Hashable identity of a canonical multi-layer geometry; empty layers ignored."""
    return tuple(sorted(
        (name, tuple(r.as_tuple() for r in g.rects))
        for name, g in layers.items() if g.rects
    ))
