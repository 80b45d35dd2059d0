"""Row-based single-height standard-cell placement.

Rows alternate rail polarity, so each row admits one orientation pair:
even rows {R0, MY}, odd rows {MX, R180}. Occupancy is kept per row as a
list of instances sorted by starting site, which makes neighbor and gap
queries a bisect.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Iterable, Iterator

from .geometry import (
    DBU_PER_MICRON,
    LayerGeometry,
    Orientation,
    Rect,
    canonical_rects,
    mirror_x_rects,
    transform_rect,
)

EVEN_ROW_ORIENTS = frozenset({Orientation.R0, Orientation.MY})
ODD_ROW_ORIENTS = frozenset({Orientation.MX, Orientation.R180})


class PlacementError(ValueError):
    """A rejected mutation or a reference to something not in the placement."""

    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


@dataclass(frozen=True)
class CellMaster:
    name: str
    width_sites: int
    geometry: tuple[LayerGeometry, ...] = ()

    def __post_init__(self):
        if self.width_sites < 1:
            raise ValueError(f"master {self.name}: width_sites must be >= 1")
        object.__setattr__(self, "geometry", tuple(self.geometry))

    def validate(self, site_w: int, row_h: int) -> None:
        w = self.width_sites * site_w
        for g in self.geometry:
            for r in g.rects:
                if r.llx < 0 or r.lly < 0 or r.urx > w or r.ury > row_h:
                    raise ValueError(
                        f"master {self.name}: {g.layer} rect {r.as_tuple()} "
                        f"outside bbox (0, 0, {w}, {row_h})")

    def is_mirror_symmetric(self, site_w: int) -> bool:
        w = self.width_sites * site_w
        return all(
            canonical_rects(g.rects) == mirror_x_rects(g.rects, w)
            for g in self.geometry
        )


@dataclass(frozen=True)
class GridSpec:
    site_w: int
    row_h: int
    num_rows: int
    row_len_sites: int
    origin: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.site_w <= 0 or self.row_h <= 0:
            raise ValueError("site_w and row_h must be positive")
        if self.num_rows < 1 or self.row_len_sites < 1:
            raise ValueError("grid needs at least one row and one site")

    def site_x(self, x_site: int) -> int:
        return self.origin[0] + x_site * self.site_w

    def row_y(self, row: int) -> int:
        return self.origin[1] + row * self.row_h

    @property
    def row_extent(self) -> tuple[int, int]:
        return self.origin[0], self.site_x(self.row_len_sites)

    @property
    def bbox(self) -> Rect:
        return Rect(self.origin[0], self.origin[1],
                    self.site_x(self.row_len_sites), self.row_y(self.num_rows))


@dataclass
class Instance:
    name: str
    master: CellMaster
    x_site: int
    row: int
    orient: Orientation

    @property
    def width_sites(self) -> int:
        return self.master.width_sites

    @property
    def end_site(self) -> int:
        return self.x_site + self.master.width_sites


def legal_orients(row: int, num_rows: int | None = None) -> frozenset[Orientation]:
    if row < 0 or (num_rows is not None and row >= num_rows):
        raise PlacementError("out of bounds", f"row {row} out of range")
    return EVEN_ROW_ORIENTS if row % 2 == 0 else ODD_ROW_ORIENTS


@dataclass(frozen=True)
class Violation:
    kind: str  # "overlap" | "orientation" | "out of bounds"
    instance: str
    detail: str

    def __str__(self):
        return f"{self.kind}: {self.instance}: {self.detail}"


class Placement:
    """Placed instances on a row grid plus a per-row occupancy index.

    The constructor does not validate; use `check_legality` or build with
    `add(..., check=True)`.
    """

    def __init__(self, grid: GridSpec, masters: dict[str, CellMaster] | Iterable[CellMaster],
                 instances: Iterable[Instance] = (), dbu_per_micron: int = DBU_PER_MICRON):
        self.grid = grid
        self.dbu_per_micron = dbu_per_micron
        if not isinstance(masters, dict):
            masters = {m.name: m for m in masters}
        self.masters: dict[str, CellMaster] = dict(masters)
        self._by_name: dict[str, Instance] = {}
        self._rows: dict[int, list[Instance]] = {}
        self._keys: dict[int, list[tuple[int, str]]] = {}
        self._geom_cache: dict[tuple[str, Orientation], tuple[tuple[str, tuple[Rect, ...]], ...]] = {}
        self.context_cache: dict = {}
        for inst in instances:
            self.add(inst, check=False)

    # -- bookkeeping -------------------------------------------------------

    def __len__(self) -> int:
        return len(self._by_name)

    def __iter__(self) -> Iterator[Instance]:
        return iter(self.instances)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    @property
    def instances(self) -> list[Instance]:
        """All instances ordered by (row, x_site, name)."""
        return [i for r in sorted(self._rows) for i in self._rows[r]]

    def get(self, name: str) -> Instance:
        try:
            return self._by_name[name]
        except KeyError:
            raise PlacementError("unknown instance", f"unknown instance {name!r}") from None

    def row_instances(self, row: int) -> list[Instance]:
        return self._rows.get(row, [])

    def _insert(self, inst: Instance) -> None:
        row = self._rows.setdefault(inst.row, [])
        keys = self._keys.setdefault(inst.row, [])
        key = (inst.x_site, inst.name)
        k = bisect.bisect(keys, key)
        keys.insert(k, key)
        row.insert(k, inst)

    def _remove(self, inst: Instance) -> None:
        keys = self._keys[inst.row]
        k = bisect.bisect_left(keys, (inst.x_site, inst.name))
        del keys[k]
        del self._rows[inst.row][k]
        if not keys:
            del self._rows[inst.row]
            del self._keys[inst.row]

    def _problems(self, name: str, master: CellMaster, x_site: int, row: int,
                  orient: Orientation, ignore: str | None = None) -> list[Violation]:
        out = []
        g = self.grid
        if not 0 <= row < g.num_rows:
            out.append(Violation("out of bounds", name, f"row {row} outside [0, {g.num_rows})"))
        elif orient not in legal_orients(row):
            allowed = ", ".join(sorted(o.value for o in legal_orients(row)))
            out.append(Violation("orientation", name,
                                 f"illegal orientation for row: {orient.value} in row {row} "
                                 f"(parity {row % 2} allows {allowed})"))
        end = x_site + master.width_sites
        if x_site < 0 or end > g.row_len_sites:
            out.append(Violation("out of bounds", name,
                                 f"sites [{x_site}, {end}) outside row [0, {g.row_len_sites})"))
        for other in self._rows.get(row, []):
            if other.name in (name, ignore):
                continue
            if other.x_site < end and x_site < other.end_site:
                out.append(Violation("overlap", name, f"overlaps {other.name} in row {row}"))
        return out

    def add(self, inst: Instance, check: bool = True) -> None:
        if inst.name in self._by_name:
            raise PlacementError("duplicate", f"duplicate instance name {inst.name!r}")
        if inst.master.name not in self.masters:
            raise PlacementError("unknown master", f"unknown master {inst.master.name!r}")
        if check:
            problems = self._problems(inst.name, inst.master, inst.x_site, inst.row, inst.orient)
            if problems:
                raise PlacementError(problems[0].kind, str(problems[0]))
        self._by_name[inst.name] = inst
        self._insert(inst)

    def copy(self) -> Placement:
        q = Placement(self.grid, self.masters, dbu_per_micron=self.dbu_per_micron)
        for row, insts in self._rows.items():
            q._rows[row] = [Instance(i.name, i.master, i.x_site, i.row, i.orient) for i in insts]
            q._keys[row] = list(self._keys[row])
            q._by_name.update((i.name, i) for i in q._rows[row])
        # both caches depend only on masters and grid, which are shared
        q._geom_cache = self._geom_cache
        q.context_cache = self.context_cache
        return q

    def state(self) -> tuple:
        """Hashable snapshot of every instance's position and orientation."""
        return tuple((i.name, i.master.name, i.x_site, i.row, i.orient.value)
                     for i in self.instances)

    # -- geometry ------------------------------------------------------------

    def bbox(self, inst: Instance) -> Rect:
        g = self.grid
        x = g.site_x(inst.x_site)
        y = g.row_y(inst.row)
        return Rect(x, y, x + inst.width_sites * g.site_w, y + g.row_h)

    def placed_local_geometry(self, master: CellMaster, orient: Orientation):
        """Master geometry transformed by `orient`, cached per (master, orient)."""
        key = (master.name, orient)
        cached = self._geom_cache.get(key)
        if cached is None:
            w = master.width_sites * self.grid.site_w
            h = self.grid.row_h
            cached = tuple(
                (g.layer, tuple(transform_rect(r, orient, w, h) for r in g.rects))
                for g in master.geometry
            )
            self._geom_cache[key] = cached
        return cached


def check_legality(p: Placement) -> list[Violation]:
    """Every orientation, bounds, and overlap violation; empty iff legal."""
    out: list[Violation] = []
    g = p.grid
    for inst in p.instances:
        if not 0 <= inst.row < g.num_rows:
            out.append(Violation("out of bounds", inst.name, f"row {inst.row} outside [0, {g.num_rows})"))
        elif inst.orient not in legal_orients(inst.row):
            out.append(Violation("orientation", inst.name,
                                 f"{inst.orient.value} not legal in row {inst.row}"))
        if inst.x_site < 0 or inst.end_site > g.row_len_sites:
            out.append(Violation("out of bounds", inst.name,
                                 f"sites [{inst.x_site}, {inst.end_site}) outside row"))
    for row in sorted(p._rows):
        insts = p._rows[row]
        # sorted by start, so an overlap is always with the furthest-reaching predecessor
        reach: Instance | None = None
        for inst in insts:
            if reach is not None and inst.x_site < reach.end_site:
                out.append(Violation("overlap", inst.name, f"overlaps {reach.name} in row {row}"))
            if reach is None or inst.end_site > reach.end_site:
                reach = inst
    return out


def _row_pos(p: Placement, inst: Instance) -> tuple[list[Instance], int]:
    if p._by_name.get(inst.name) is not inst:
        raise PlacementError("unknown instance", f"unknown instance {inst.name!r}")
    k = bisect.bisect_left(p._keys[inst.row], (inst.x_site, inst.name))
    return p._rows[inst.row], k


def neighbor_left(p: Placement, inst: Instance) -> Instance | None:
    row, k = _row_pos(p, inst)
    return row[k - 1] if k > 0 else None


def neighbor_right(p: Placement, inst: Instance) -> Instance | None:
    row, k = _row_pos(p, inst)
    return row[k + 1] if k + 1 < len(row) else None


def gap_left(p: Placement, inst: Instance) -> int:
    """Free sites between `inst` and its left neighbor (or the row start)."""
    left = neighbor_left(p, inst)
    return inst.x_site - (left.end_site if left is not None else 0)


def gap_right(p: Placement, inst: Instance) -> int:
    right = neighbor_right(p, inst)
    end = right.x_site if right is not None else p.grid.row_len_sites
    return end - inst.end_site


def instances_intersecting(p: Placement, box: Rect) -> list[Instance]:
    """Instances whose bbox overlaps or touches `box`, ordered by (row, x_site)."""
    g = p.grid
    r_lo = max(0, (box.lly - g.origin[1]) // g.row_h - 1)
    r_hi = min(g.num_rows - 1, (box.ury - g.origin[1]) // g.row_h)
    out = []
    for row in range(r_lo, r_hi + 1):
        y0 = g.row_y(row)
        if y0 > box.ury or y0 + g.row_h < box.lly:
            continue
        for inst in row_span(p, row, box.llx, box.urx, touching=True):
            out.append(inst)
    return out


def row_span(p: Placement, row: int, x_lo: int, x_hi: int,
             touching: bool = False) -> list[Instance]:
    """Instances in `row` whose x-extent meets [x_lo, x_hi].

    With touching=False only positive-length overlap counts.
    """
    insts = p._rows.get(row)
    if not insts:
        return []
    g = p.grid
    # site index of the first cell that could reach x_lo
    lo_site = (x_lo - g.origin[0]) // g.site_w
    max_w = _max_width(p)
    k = bisect.bisect_left(p._keys[row], (lo_site - max_w,))
    out = []
    for inst in insts[k:]:
        x0 = g.site_x(inst.x_site)
        if x0 > x_hi or (not touching and x0 == x_hi):
            break
        x1 = x0 + inst.width_sites * g.site_w
        if x1 > x_lo or (touching and x1 == x_lo):
            out.append(inst)
    return out


def _max_width(p: Placement) -> int:
    mw = getattr(p, "_max_w", None)
    if mw is None:
        mw = max((m.width_sites for m in p.masters.values()), default=1)
        p._max_w = mw
    return mw


def set_orientation(p: Placement, inst: Instance, o: Orientation) -> None:
    """Reorient in place; raises PlacementError and leaves `p` untouched if illegal."""
    _row_pos(p, inst)
    if o not in legal_orients(inst.row, p.grid.num_rows):
        raise PlacementError("illegal orientation for row",
                             f"illegal orientation for row: {o.value} in row {inst.row}")
    inst.orient = o


def move_x(p: Placement, inst: Instance, new_x_site: int) -> None:
    """Move within the row; raises PlacementError ("out of bounds"/"overlap") if illegal."""
    _row_pos(p, inst)
    end = new_x_site + inst.width_sites
    if new_x_site < 0 or end > p.grid.row_len_sites:
        raise PlacementError("out of bounds",
                             f"out of bounds: {inst.name} to sites [{new_x_site}, {end})")
    for other in p._rows[inst.row]:
        if other is not inst and other.x_site < end and new_x_site < other.end_site:
            raise PlacementError("overlap", f"overlap: {inst.name} would overlap {other.name}")
    p._remove(inst)
    inst.x_site = new_x_site
    p._insert(inst)


def window_geometry(p: Placement, window: Rect) -> dict[str, LayerGeometry]:
    """Canonical union of all placed geometry inside `window`, in window-local
    coordinates. Only non-empty layers appear in the result."""
    by_layer: dict[str, list[Rect]] = {}
    for inst in instances_intersecting(p, window):
        box = p.bbox(inst)
        for layer, rects in p.placed_local_geometry(inst.master, inst.orient):
            for r in rects:
                c = r.translate(box.llx, box.lly).intersection(window)
                if c is not None:
                    by_layer.setdefault(layer, []).append(
                        c.translate(-window.llx, -window.lly))
    return {layer: LayerGeometry(layer, canonical_rects(rs))
            for layer, rs in sorted(by_layer.items())}


def abutment_sites(p: Placement, row: int) -> list[int]:
    """Site indices in `row` where two instances share a vertical edge."""
    insts = p._rows.get(row, [])
    return [a.end_site for a, b in zip(insts, insts[1:]) if a.end_site == b.x_site]


def occupied_sites(p: Placement) -> int:
    return sum(i.width_sites for i in p._by_name.values())


def utilization(p: Placement) -> float:
    g = p.grid
    return occupied_sites(p) / (g.num_rows * g.row_len_sites)
