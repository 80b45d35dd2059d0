"""Forbidden-pattern library and the exact-context matcher.

A pattern is the canonical geometry of a window one row tall, centred on a
site-grid x coordinate. Matching is exact equality of canonical forms
(optionally also against the left-right mirror of the pattern), looked up
through a hash of the canonical geometry so the scan cost does not grow
with library size.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .geometry import (
    LayerGeometry,
    Rect,
    canonical_rects,
    geometry_key,
    mirror_x_rects,
)
from .placement import Placement, abutment_sites, window_geometry


class PatternError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Pattern:
    name: str
    window_w: int
    window_h: int
    geometry: dict[str, LayerGeometry] = field(default_factory=dict)

    def __post_init__(self):
        if self.window_w <= 0 or self.window_w % 2:
            raise PatternError(f"pattern {self.name}: window_w must be positive and even")
        if self.window_h <= 0:
            raise PatternError(f"pattern {self.name}: window_h must be positive")
        canon = {}
        for layer, g in sorted(self.geometry.items()):
            for r in g.rects:
                if r.llx < 0 or r.lly < 0 or r.urx > self.window_w or r.ury > self.window_h:
                    raise PatternError(
                        f"pattern {self.name}: {layer} rect {r.as_tuple()} outside window")
            rects = canonical_rects(g.rects)
            if rects:
                canon[layer] = LayerGeometry(layer, rects)
        object.__setattr__(self, "geometry", canon)

    def __eq__(self, other):
        if not isinstance(other, Pattern):
            return NotImplemented
        return (self.name, self.window_w, self.window_h, self.key) == \
            (other.name, other.window_w, other.window_h, other.key)

    def __hash__(self):
        return hash((self.name, self.window_w, self.window_h, self.key))

    @property
    def key(self) -> tuple:
        return geometry_key(self.geometry)

    @property
    def mirrored_key(self) -> tuple:
        return geometry_key({
            layer: LayerGeometry(layer, mirror_x_rects(g.rects, self.window_w))
            for layer, g in self.geometry.items()
        })


@dataclass
class PatternLibrary:
    patterns: list[Pattern] = field(default_factory=list)
    match_mirrored: bool = True

    def __post_init__(self):
        names = [p.name for p in self.patterns]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise PatternError(f"duplicate pattern name {dup!r}")
        self._index: dict[tuple[int, int], dict[tuple, tuple[str, ...]]] | None = None

    def __len__(self):
        return len(self.patterns)

    def index(self) -> dict[tuple[int, int], dict[tuple, tuple[str, ...]]]:
        """(window_w, window_h) -> geometry key -> sorted pattern names."""
        if self._index is None:
            idx: dict[tuple[int, int], dict[tuple, set[str]]] = {}
            for pat in self.patterns:
                table = idx.setdefault((pat.window_w, pat.window_h), {})
                table.setdefault(pat.key, set()).add(pat.name)
                if self.match_mirrored:
                    table.setdefault(pat.mirrored_key, set()).add(pat.name)
            self._index = {
                dims: {k: tuple(sorted(v)) for k, v in table.items()}
                for dims, table in idx.items()
            }
        return self._index


@dataclass(frozen=True, order=True)
class ErrorMarker:
    # field order doubles as the report sort order: (row, llx, pattern)
    anchor_row: int
    bbox: Rect
    pattern_name: str

    @property
    def sort_key(self):
        return (self.anchor_row, self.bbox.llx, self.pattern_name)

    @property
    def center_x(self) -> int:
        return (self.bbox.llx + self.bbox.urx) // 2


def anchor_window(p: Placement, x: int, row: int, window_w: int) -> Rect | None:
    """Window of width `window_w` centred on x spanning `row`, or None if it
    would leave the row extent."""
    g = p.grid
    half = window_w // 2
    lo, hi = g.row_extent
    if x - half < lo or x + half > hi or not 0 <= row < g.num_rows:
        return None
    y = g.row_y(row)
    return Rect(x - half, y, x + half, y + g.row_h)


def match_at(p: Placement, pat: Pattern, x: int, row: int,
             match_mirrored: bool = True) -> ErrorMarker | None:
    """Check one pattern at one anchor by direct window extraction."""
    if pat.window_h != p.grid.row_h:
        return None
    window = anchor_window(p, x, row, pat.window_w)
    if window is None:
        return None
    key = geometry_key(window_geometry(p, window))
    if key == pat.key or (match_mirrored and key == pat.mirrored_key):
        return ErrorMarker(row, window, pat.name)
    return None


# -- scanning ---------------------------------------------------------------

def anchor_sites(p: Placement, window_w: int) -> range:
    g = p.grid
    half = window_w // 2
    k_lo = -(-half // g.site_w)
    k_hi = (g.row_len_sites * g.site_w - half) // g.site_w
    return range(k_lo, k_hi + 1)


def context_key(p: Placement, key: tuple) -> tuple:
    """Canonical geometry key of a window given its local cell arrangement."""
    cached = p.context_cache.get(key)
    if cached is not None:
        return cached
    window_w, row_h, cells = key
    window = Rect(0, 0, window_w, row_h)
    by_layer: dict[str, list[Rect]] = {}
    for master_name, orient, dx in cells:
        master = p.masters[master_name]
        for layer, rects in p.placed_local_geometry(master, orient):
            for r in rects:
                c = r.translate(dx, 0).intersection(window)
                if c is not None:
                    by_layer.setdefault(layer, []).append(c)
    out = tuple(sorted(
        (layer, tuple(r.as_tuple() for r in canonical_rects(rs)))
        for layer, rs in by_layer.items()
    ))
    p.context_cache[key] = out
    return out


def iter_contexts(p: Placement, row: int, window_w: int, sites: Iterable[int]):
    """Yield (site, window_llx, geometry_key) for each anchor site (ascending) in `row`."""
    g = p.grid
    sw, half, ox = g.site_w, window_w // 2, g.origin[0]
    insts = p.row_instances(row)
    n = len(insts)
    first = 0
    for k in sites:
        lo = ox + k * sw - half
        hi = lo + window_w
        # anchors ascend, so a cell ending at or before lo never matters again
        while first < n and ox + insts[first].end_site * sw <= lo:
            first += 1
        cells = []
        j = first
        while j < n:
            inst = insts[j]
            x0 = ox + inst.x_site * sw
            if x0 >= hi:
                break
            if x0 + inst.master.width_sites * sw > lo:
                cells.append((inst.master.name, inst.orient, x0 - lo))
            j += 1
        yield k, lo, context_key(p, (window_w, g.row_h, tuple(cells)))


def scan_row(p: Placement, row: int, window_w: int, table: dict[tuple, tuple[str, ...]],
             sites: Iterable[int]) -> list[ErrorMarker]:
    """Match every anchor site in `sites` (ascending) of one row against `table`."""
    y0 = p.grid.row_y(row)
    y1 = y0 + p.grid.row_h
    out: list[ErrorMarker] = []
    for _, lo, key in iter_contexts(p, row, window_w, sites):
        names = table.get(key)
        if names:
            box = Rect(lo, y0, lo + window_w, y1)
            out.extend(ErrorMarker(row, box, name) for name in names)
    return out


@lru_cache(maxsize=1 << 16)
def mirror_key(key: tuple, window_w: int) -> tuple:
    """Geometry key of the left-right mirror of a window's content."""
    return tuple(
        (layer, tuple(r.as_tuple() for r in mirror_x_rects(
            (Rect(*t) for t in rects), window_w)))
        for layer, rects in key
    )


def _scan(p: Placement, lib: PatternLibrary, boundaries_only: bool,
          rows: Sequence[int] | None, workers: int) -> list[ErrorMarker]:
    g = p.grid
    rows = range(g.num_rows) if rows is None else rows
    jobs = []
    for (w, h), table in sorted(lib.index().items()):
        if h != g.row_h:
            continue
        valid = anchor_sites(p, w)
        for row in rows:
            if boundaries_only:
                sites = [k for k in abutment_sites(p, row) if k in valid]
            else:
                sites = valid
            jobs.append((row, w, table, sites))
    run = lambda job: scan_row(p, *job)  # noqa: E731
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]
    markers = {m for part in parts for m in part}
    return sorted(markers, key=lambda m: m.sort_key + (m.bbox.urx,))


def scan_full(p: Placement, lib: PatternLibrary, workers: int = 1,
              rows: Sequence[int] | None = None) -> list[ErrorMarker]:
    """Match every pattern at every site-grid anchor of every row."""
    return _scan(p, lib, False, rows, workers)


def scan_boundaries(p: Placement, lib: PatternLibrary, workers: int = 1,
                    rows: Sequence[int] | None = None) -> list[ErrorMarker]:
    """Like scan_full, anchored only where two instances abut."""
    return _scan(p, lib, True, rows, workers)


def scan(p: Placement, lib: PatternLibrary, mode: str = "full", workers: int = 1,
         rows: Sequence[int] | None = None) -> list[ErrorMarker]:
    if mode == "full":
        return scan_full(p, lib, workers, rows)
    if mode == "boundaries":
        return scan_boundaries(p, lib, workers, rows)
    raise ValueError(f"unknown verify mode {mode!r}")
