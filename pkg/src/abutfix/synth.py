"""Synthetic benchmark designs with planted abutment weakpoints.

Masters are random single-row cells on one metal layer with full-width
power rails; placements are legal rows filled to a target utilization; the
pattern library is sampled from real abutment windows of the design, so
every planted weakpoint is present by construction.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import asdict, dataclass, fields

from .geometry import (
    LayerGeometry,
    Orientation,
    Rect,
    canonical_rects,
    flip_h,
    mirror_x_rects,
)
from .patternlib import (
    Pattern,
    PatternLibrary,
    anchor_sites,
    context_key,
    iter_contexts,
    mirror_key,
)
from .placement import (
    CellMaster,
    GridSpec,
    Instance,
    Placement,
    abutment_sites,
    legal_orients,
)


class SynthError(ValueError):
    pass


@dataclass
class SynthConfig:
    seed: int = 0
    n_masters: int = 16
    master_width_range: tuple[int, int] = (3, 10)
    p_symmetric: float = 0.3
    n_cells: int = 1000
    utilization: float = 0.75
    n_patterns: int = 10
    # when set, overrides n_patterns with round(fraction * abutments)
    pattern_fraction: float | None = None
    n_rects_range: tuple[int, int] = (2, 6)
    site_w: int = 152
    row_h: int = 1672
    window_half_sites: int = 2
    layer: str = "M1"

    def __post_init__(self):
        self.master_width_range = tuple(self.master_width_range)
        self.n_rects_range = tuple(self.n_rects_range)
        lo, hi = self.master_width_range
        if not 1 <= lo <= hi:
            raise SynthError(f"bad master_width_range {self.master_width_range}")
        r_lo, r_hi = self.n_rects_range
        if not 2 <= r_lo <= r_hi:
            raise SynthError(f"bad n_rects_range {self.n_rects_range} (need at least 2)")
        if not 0 < self.utilization <= 1:
            raise SynthError("utilization must be in (0, 1]")
        if not 0 <= self.p_symmetric <= 1:
            raise SynthError("p_symmetric must be in [0, 1]")
        if self.n_patterns < 0 or self.n_masters < 1 or self.n_cells < 1:
            raise SynthError("n_patterns >= 0, n_masters >= 1 and n_cells >= 1 required")
        if self.row_h < 20 or self.site_w < 2:
            raise SynthError("row_h >= 20 and site_w >= 2 required")
        if self.window_half_sites < 1:
            raise SynthError("window_half_sites must be >= 1")

    @property
    def window_w(self) -> int:
        return 2 * self.window_half_sites * self.site_w

    def to_dict(self) -> dict:
        d = asdict(self)
        d["master_width_range"] = list(self.master_width_range)
        d["n_rects_range"] = list(self.n_rects_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SynthConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise SynthError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**d)


def _rng(cfg: SynthConfig, stream: str) -> random.Random:
    return random.Random(f"{cfg.seed}:{stream}")


def gen_masters(cfg: SynthConfig) -> list[CellMaster]:
    rng = _rng(cfg, "masters")
    lo, hi = cfg.master_width_range
    widths = [lo + i % (hi - lo + 1) for i in range(cfg.n_masters)]
    rng.shuffle(widths)
    row_h, sw = cfg.row_h, cfg.site_w
    rail_h = max(1, row_h // 10)
    band_lo, band_hi = rail_h + max(1, row_h // 20), row_h - rail_h - max(1, row_h // 20)
    unit = max(1, sw // 4)
    masters = []
    for i, wsites in enumerate(widths):
        w = wsites * sw
        rails = [Rect(0, 0, w, rail_h), Rect(0, row_h - rail_h, w, row_h)]
        shapes = []
        n_rects = rng.randint(*cfg.n_rects_range)
        for j in range(n_rects):
            rw = unit * rng.randint(1, 4)
            rw = min(rw, w)
            if j == 0:
                x0 = rng.randint(0, min(unit, w - rw))  # hugs the left edge
            elif j == 1:
                x0 = w - rw - rng.randint(0, min(unit, w - rw))  # hugs the right edge
            else:
                x0 = rng.randint(0, w - rw)
            y0 = rng.randint(band_lo, band_hi - 2)
            y1 = rng.randint(y0 + 1, band_hi)
            shapes.append(Rect(x0, y0, x0 + rw, y1))
        rects = canonical_rects(rails + shapes)
        if rng.random() < cfg.p_symmetric:
            rects = canonical_rects(rects + mirror_x_rects(rects, w))
        masters.append(CellMaster(f"C{i:02d}W{wsites}", wsites,
                                  (LayerGeometry(cfg.layer, rects),)))
    return masters


def _grow_to(widths: list[int], target: int, available: list[int]) -> bool:
    """Widen cells (in place) to available master widths until sum == target."""
    deficit = target - sum(widths)
    for idx in range(len(widths)):
        if deficit == 0:
            break
        w = widths[idx]
        best = max((a for a in available if w < a <= w + deficit), default=None)
        if best is not None:
            widths[idx] = best
            deficit -= best - w
    return deficit == 0


def gen_placement(masters: list[CellMaster], cfg: SynthConfig) -> Placement:
    rng = _rng(cfg, "placement")
    by_width: dict[int, list[CellMaster]] = {}
    for m in masters:
        by_width.setdefault(m.width_sites, []).append(m)
    chosen = [rng.choice(masters) for _ in range(cfg.n_cells)]
    occupied = sum(m.width_sites for m in chosen)
    max_w = max(m.width_sites for m in masters)
    total = occupied / cfg.utilization
    n_rows = max(1, round(math.sqrt(total * cfg.site_w / cfg.row_h)))
    row_len = max(max_w, math.ceil(occupied / (cfg.utilization * n_rows)))

    # balance rows: each cell goes to the currently emptiest row
    heap = [(0, r) for r in range(n_rows)]
    rows: list[list[CellMaster]] = [[] for _ in range(n_rows)]
    for m in chosen:
        occ, r = heapq.heappop(heap)
        rows[r].append(m)
        heapq.heappush(heap, (occ + m.width_sites, r))
    row_len = max(row_len, max(sum(m.width_sites for m in row) for row in rows))

    if cfg.utilization == 1.0:
        available = sorted(by_width)
        for r, row in enumerate(rows):
            widths = [m.width_sites for m in row]
            if not _grow_to(widths, row_len, available):
                raise SynthError(
                    f"infeasible utilization 1.0: row {r} cannot be filled wall to wall")
            rows[r] = [m if m.width_sites == w else rng.choice(by_width[w])
                       for m, w in zip(row, widths)]

    grid = GridSpec(cfg.site_w, cfg.row_h, n_rows, row_len)
    p = Placement(grid, masters)
    idx = 0
    for r, row in enumerate(rows):
        free = row_len - sum(m.width_sites for m in row)
        slots = [0] * (len(row) + 1)
        for _ in range(free):
            slots[rng.randrange(len(slots))] += 1
        orients = sorted(legal_orients(r), key=lambda o: o.value)
        x = 0
        for k, m in enumerate(row):
            x += slots[k]
            p.add(Instance(f"u{idx}", m, x, r, rng.choice(orients)), check=False)
            x += m.width_sites
            idx += 1
    return p


def _window_class(p: Placement, row: int, site: int, window_w: int,
                  overrides: dict[str, Orientation]) -> tuple:
    """Mirror-normalized content class of the window at `site`, with some
    instances' orientations overridden."""
    g = p.grid
    lo = g.site_x(site) - window_w // 2
    cells = []
    for inst in p.row_instances(row):
        x0 = g.site_x(inst.x_site)
        if x0 < lo + window_w and x0 + inst.width_sites * g.site_w > lo:
            cells.append((inst.master.name, overrides.get(inst.name, inst.orient), x0 - lo))
    key = context_key(p, (window_w, g.row_h, tuple(cells)))
    return min(key, mirror_key(key, window_w))


def _flip_outcomes(p: Placement, row: int, site: int, window_w: int,
                   valid: range) -> list[set[tuple]]:
    """For the abutment at `site`, the classes seen at every boundary touched
    by flipping the left cell, the right cell, or both."""
    insts = p.row_instances(row)
    left = next(i for i in insts if i.end_site == site)
    right = next(i for i in insts if i.x_site == site)
    out = []
    for group in ((left,), (right,), (left, right)):
        overrides = {i.name: flip_h(i.orient) for i in group}
        edges = {e for i in group for e in (i.x_site, i.end_site) if e in valid}
        out.append({_window_class(p, row, e, window_w, overrides) for e in sorted(edges)})
    return out


def count_abutments(p: Placement) -> int:
    return sum(len(abutment_sites(p, r)) for r in range(p.grid.num_rows))


def derive_patterns(p: Placement, cfg: SynthConfig,
                    n_patterns: int | None = None) -> tuple[PatternLibrary, list[tuple[int, int]]]:
    """Sample abutment windows of `p` as forbidden patterns.

    Returns the library and the planted anchors as (x_dbu, row). A window
    is eligible only if every window in the design with the same content
    (up to mirroring) sits on an abutment and some flip of its two cells
    removes it without recreating it at the flipped cells' other edges, so
    no planted weakpoint depends on free space to be fixable. No planted
    context can be produced by flipping cells at another planted one.
    """
    if n_patterns is None:
        n_patterns = cfg.n_patterns
        if cfg.pattern_fraction is not None:
            n_patterns = max(1, round(cfg.pattern_fraction * count_abutments(p)))
    if n_patterns == 0:
        return PatternLibrary([]), []
    rng = _rng(cfg, "patterns")
    g = p.grid
    window_w = cfg.window_w
    valid = anchor_sites(p, window_w)

    classes: dict[tuple, list[tuple[int, int, int, bool]]] = {}
    order: list[tuple] = []
    for row in range(g.num_rows):
        abut = set(abutment_sites(p, row))
        for k, lo, key in iter_contexts(p, row, window_w, valid):
            cls = min(key, mirror_key(key, window_w))
            if cls not in classes:
                classes[cls] = []
                order.append(cls)
            classes[cls].append((row, k, lo, k in abut))

    # class -> classes that any flip at any of its windows can produce
    reach: dict[tuple, set[tuple]] = {}
    for cls in order:
        occurrences = classes[cls]
        if not cls or not all(is_abut for *_, is_abut in occurrences):
            continue
        nbrs: set[tuple] = set()
        for row, k, _, _ in occurrences:
            outcomes = _flip_outcomes(p, row, k, window_w, valid)
            if all(cls in seen for seen in outcomes):
                break  # every flip leaves or relocates this weakpoint
            for seen in outcomes:
                nbrs |= seen
        else:
            nbrs.discard(cls)
            reach[cls] = nbrs

    # no planted context may be one flip away from another planted context,
    # otherwise flipping just trades one weakpoint for the other
    candidates = [c for c in order if c in reach]
    rng.shuffle(candidates)
    picked: list[tuple] = []
    blocked: set[tuple] = set()
    for cls in candidates:
        if len(picked) == n_patterns:
            break
        if cls in blocked or not reach[cls].isdisjoint(picked):
            continue
        picked.append(cls)
        blocked |= reach[cls]
    if len(picked) < n_patterns:
        raise SynthError(
            f"too few abutments: {len(picked)} usable windows for {n_patterns} patterns")
    patterns, planted = [], []
    for i, cls in enumerate(picked):
        row, k, lo, _ = rng.choice(classes[cls])
        window = Rect(lo, g.row_y(row), lo + window_w, g.row_y(row) + g.row_h)
        # content key of this exact window (the class key may be its mirror)
        (_, _, key), = iter_contexts(p, row, window_w, [k])
        geometry = {layer: LayerGeometry(layer, tuple(Rect(*t) for t in rects))
                    for layer, rects in key}
        patterns.append(Pattern(f"P{i:04d}", window_w, g.row_h, geometry))
        planted.append((window.llx + window_w // 2, row))
    order_idx = sorted(range(n_patterns), key=lambda i: (planted[i][1], planted[i][0]))
    patterns = [Pattern(f"P{j:04d}", patterns[i].window_w, patterns[i].window_h,
                        patterns[i].geometry) for j, i in enumerate(order_idx)]
    planted = [planted[i] for i in order_idx]
    return PatternLibrary(patterns), planted


def generate(cfg: SynthConfig) -> tuple[Placement, PatternLibrary, list[tuple[int, int]]]:
    """Masters, placement and planted library for one config."""
    masters = gen_masters(cfg)
    p = gen_placement(masters, cfg)
    lib, planted = derive_patterns(p, cfg)
    return p, lib, planted
