"""Hand-built designs reproducing specific repair situations."""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import LayerGeometry, Orientation, Rect
from .patternlib import Pattern, PatternLibrary, anchor_window
from .placement import CellMaster, GridSpec, Instance, Placement, window_geometry

SITE_W = 152
ROW_H = 1672
RAIL_H = 167


def _rails(w: int) -> list[Rect]:
    return [Rect(0, 0, w, RAIL_H), Rect(0, ROW_H - RAIL_H, w, ROW_H)]


def symmetric_master(name: str = "NOR2_S", width_sites: int = 10) -> CellMaster:
    w = width_sites * SITE_W
    shapes = [Rect(0, 400, 200, 1200), Rect(w - 200, 400, w, 1200),
              Rect(w // 2 - 100, 500, w // 2 + 100, 1100)]
    return CellMaster(name, width_sites, (LayerGeometry("M1", tuple(_rails(w) + shapes)),))


def asymmetric_master(name: str = "AOI_A", width_sites: int = 10) -> CellMaster:
    w = width_sites * SITE_W
    shapes = [Rect(0, 600, 150, 1000), Rect(900, 300, 1100, 1300), Rect(w - 60, 350, w, 700)]
    return CellMaster(name, width_sites, (LayerGeometry("M1", tuple(_rails(w) + shapes)),))


def blocker_master(width_sites: int) -> CellMaster:
    w = width_sites * SITE_W
    return CellMaster(f"FILL{width_sites}", width_sites, (LayerGeometry("M1", tuple(_rails(w))),))


@dataclass
class Case:
    placement: Placement
    library: PatternLibrary
    left: str
    right: str
    boundary_x: int


def walled_symmetric_pair(gap_left: int = 1, window_sites: int = 4) -> Case:
    """U525 (symmetric, MX) abutting U480 (asymmetric) in row 101.

    U525 sits at site 513 so its bbox is {77976 168872 79496 170544} DBU.
    The row ends right after U480, and a blocker leaves `gap_left` free
    sites left of U525. The only pattern is the window on their shared
    edge, so flipping U525 changes nothing while a one-site shift does.
    """
    sym, asym = symmetric_master(), asymmetric_master()
    x_left = 513
    fill_w = x_left - gap_left
    fill = blocker_master(fill_w)
    grid = GridSpec(SITE_W, ROW_H, num_rows=102, row_len_sites=x_left + 20)
    row = 101
    p = Placement(grid, [fill, sym, asym])
    p.add(Instance("blk", fill, 0, row, Orientation.MX))
    p.add(Instance("mult_x_41/U525", sym, x_left, row, Orientation.MX))
    p.add(Instance("mult_x_41/U480", asym, x_left + 10, row, Orientation.MX))
    boundary = grid.site_x(x_left + 10)
    window = anchor_window(p, boundary, row, window_sites * SITE_W)
    pat = Pattern("WP_ABUT", window.width, window.height, window_geometry(p, window))
    return Case(p, PatternLibrary([pat]), "mult_x_41/U525", "mult_x_41/U480", boundary)
