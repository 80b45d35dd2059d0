import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from abutfix.geometry import LayerGeometry, Orientation, Rect, geometry_key
from abutfix.placement import (
    CellMaster,
    GridSpec,
    Instance,
    Placement,
    PlacementError,
    check_legality,
    gap_left,
    gap_right,
    instances_intersecting,
    legal_orients,
    move_x,
    neighbor_left,
    neighbor_right,
    set_orientation,
    window_geometry,
)
from abutfix.synth import SynthConfig, gen_masters, gen_placement

from oracles import brute_gaps, brute_neighbors, design_bitmaps, raster, rect_tuples, window_bitmaps

R0, R180, MX, MY = Orientation.R0, Orientation.R180, Orientation.MX, Orientation.MY


def _master(name, width, rects=()):
    return CellMaster(name, width, (LayerGeometry("M1", tuple(rects)),))


def _grid(rows=4, length=20):
    return GridSpec(site_w=10, row_h=40, num_rows=rows, row_len_sites=length)


def small_design(seed, n_cells=30, util=0.7):
    cfg = SynthConfig(seed=seed, n_cells=n_cells, utilization=util, n_masters=6,
                      master_width_range=(1, 5), site_w=10, row_h=40)
    return gen_placement(gen_masters(cfg), cfg)


@pytest.mark.parametrize("row, expected", [
    (0, {R0, MY}),
    (1, {MX, R180}),
    (2, {R0, MY}),
])
def test_legal_orients(row, expected):
    assert legal_orients(row) == expected


def test_legal_orients_out_of_range():
    with pytest.raises(PlacementError):
        legal_orients(4, num_rows=4)
    with pytest.raises(PlacementError):
        legal_orients(-1)


def test_check_legality_overlap_and_orientation():
    m = _master("A", 3)
    p = Placement(_grid(), [m], [Instance("a", m, 2, 0, R0), Instance("b", m, 2, 0, R0)])
    v = check_legality(p)
    assert [x.kind for x in v] == ["overlap"]

    p = Placement(_grid(), [m], [Instance("a", m, 2, 0, MX)])
    v = check_legality(p)
    assert [x.kind for x in v] == ["orientation"]

    p = Placement(_grid(), [m], [Instance("a", m, 18, 0, R0)])
    assert [x.kind for x in check_legality(p)] == ["out of bounds"]


@pytest.mark.parametrize("seed", range(10))
def test_generated_placements_are_legal(seed):
    assert check_legality(small_design(seed)) == []


def test_gaps_alone_in_row():
    m = _master("A", 3)
    p = Placement(_grid(), [m], [Instance("a", m, 5, 0, R0)])
    a = p.get("a")
    assert gap_left(p, a) == 5
    assert gap_right(p, a) == 12
    assert neighbor_left(p, a) is None and neighbor_right(p, a) is None


def test_gaps_abutting():
    m = _master("A", 3)
    p = Placement(_grid(), [m], [Instance("a", m, 5, 0, R0), Instance("b", m, 8, 0, R0)])
    a, b = p.get("a"), p.get("b")
    assert gap_right(p, a) == 0 and gap_left(p, b) == 0
    assert neighbor_right(p, a) is b and neighbor_left(p, b) is a


def test_unknown_instance():
    m = _master("A", 3)
    p = Placement(_grid(), [m], [Instance("a", m, 5, 0, R0)])
    stranger = Instance("zz", m, 0, 0, R0)
    with pytest.raises(PlacementError):
        gap_left(p, stranger)
    with pytest.raises(PlacementError):
        p.get("zz")


@pytest.mark.parametrize("seed", range(25))
def test_gaps_and_neighbors_match_occupancy_scan(seed):
    p = small_design(seed)
    for inst in p.instances:
        assert (gap_left(p, inst), gap_right(p, inst)) == brute_gaps(p, inst)
        left, right = brute_neighbors(p, inst)
        nl, nr = neighbor_left(p, inst), neighbor_right(p, inst)
        assert (nl.name if nl else None) == left
        assert (nr.name if nr else None) == right


def test_instances_intersecting_boundary_and_inside():
    a, wide = _master("A", 3), _master("W", 8)
    p = Placement(_grid(), [a, wide], [
        Instance("a", a, 2, 0, R0), Instance("b", a, 5, 0, R0), Instance("w", wide, 10, 0, R0)])
    # box sitting exactly on the a|b shared edge (x = 50)
    names = [i.name for i in instances_intersecting(p, Rect(50, 10, 51, 20))]
    assert names[:2] == ["a", "b"]
    names = [i.name for i in instances_intersecting(p, Rect(49, 10, 51, 20))]
    assert names == ["a", "b"]
    # strictly inside the wide cell
    assert [i.name for i in instances_intersecting(p, Rect(130, 5, 150, 30))] == ["w"]
    # empty space in row 2
    assert instances_intersecting(p, Rect(10, 85, 50, 110)) == []


def test_u525_flip_keeps_bbox():
    nor = _master("NOR", 10)
    grid = GridSpec(152, 1672, 110, 600)
    p = Placement(grid, [nor], [Instance("mult_x_41/U525", nor, 513, 101, MX)])
    inst = p.get("mult_x_41/U525")
    before = p.bbox(inst)
    assert before == Rect(77976, 168872, 79496, 170544)
    set_orientation(p, inst, R180)
    assert inst.orient is R180 and p.bbox(inst) == before


def test_u525_shift_one_tile():
    nor = _master("NOR", 10)
    grid = GridSpec(152, 1672, 110, 600)
    p = Placement(grid, [nor], [Instance("mult_x_41/U525", nor, 513, 101, R180)])
    inst = p.get("mult_x_41/U525")
    move_x(p, inst, 512)
    assert p.bbox(inst) == Rect(77824, 168872, 79344, 170544)
    assert p.bbox(inst).to_microns() == "{77.824 168.872} {79.344 170.544}"


def test_rejected_mutations_leave_placement_untouched():
    m = _master("A", 3)
    p = Placement(_grid(), [m], [Instance("a", m, 2, 1, MX), Instance("b", m, 5, 1, MX)])
    before = p.state()
    with pytest.raises(PlacementError) as exc:
        move_x(p, p.get("b"), 4)
    assert exc.value.kind == "overlap"
    with pytest.raises(PlacementError) as exc:
        move_x(p, p.get("a"), -1)
    assert exc.value.kind == "out of bounds"
    with pytest.raises(PlacementError) as exc:
        set_orientation(p, p.get("a"), R0)
    assert exc.value.kind == "illegal orientation for row"
    assert p.state() == before


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.tuples(st.integers(0, 10_000), st.integers(-2, 2)),
                                        min_size=1, max_size=40))
def test_random_mutations_keep_legality(seed, moves):
    p = small_design(seed % 50)
    names = [i.name for i in p.instances]
    for pick, delta in moves:
        inst = p.get(names[pick % len(names)])
        try:
            if delta == 0:
                set_orientation(p, inst, next(o for o in legal_orients(inst.row) if o != inst.orient))
            else:
                move_x(p, inst, inst.x_site + delta)
        except PlacementError:
            pass
        assert check_legality(p) == []


def test_move_there_and_back_restores_state():
    p = small_design(3)
    before = p.state()
    for inst in p.instances:
        try:
            move_x(p, inst, inst.x_site + 1)
        except PlacementError:
            continue
        move_x(p, inst, inst.x_site - 1)
        assert p.state() == before


def test_window_geometry_empty_and_single():
    m = _master("A", 5, [Rect(0, 0, 50, 4), Rect(10, 10, 20, 30)])
    p = Placement(_grid(), [m], [Instance("a", m, 2, 0, R0)])
    assert window_geometry(p, Rect(100, 0, 140, 40)) == {}
    got = window_geometry(p, Rect(30, 0, 60, 40))
    assert got["M1"].rects == (Rect(0, 0, 30, 4), Rect(0, 10, 10, 30))


@pytest.mark.parametrize("seed", range(15))
def test_window_geometry_matches_raster(seed):
    p = small_design(seed)
    layers = design_bitmaps(p)
    g = p.grid
    rng = random.Random(seed)
    for _ in range(20):
        row = rng.randrange(g.num_rows)
        w = 2 * rng.randint(1, 4) * g.site_w
        x = rng.randint(0, g.row_len_sites * g.site_w - w)
        win = Rect(x, row * g.row_h, x + w, (row + 1) * g.row_h)
        got = window_geometry(p, win)
        ref = window_bitmaps(layers, win.llx, win.lly, w, g.row_h)
        for layer in set(got) | set(ref):
            mine = raster(rect_tuples(got[layer].rects), w, g.row_h) if layer in got else \
                np.zeros((g.row_h, w), bool)
            assert np.array_equal(mine, ref.get(layer, np.zeros_like(mine)))


def test_window_geometry_order_invariant():
    p = small_design(7)
    q = Placement(p.grid, p.masters, list(reversed([
        Instance(i.name, i.master, i.x_site, i.row, i.orient) for i in p.instances])))
    g = p.grid
    for row in range(g.num_rows):
        win = Rect(0, row * g.row_h, g.row_len_sites * g.site_w, (row + 1) * g.row_h)
        assert window_geometry(p, win) == window_geometry(q, win)


def test_symmetric_master_flip_is_geometry_noop():
    sym = _master("S", 4, [Rect(0, 0, 40, 4), Rect(5, 10, 15, 30), Rect(25, 10, 35, 30)])
    assert sym.is_mirror_symmetric(10)
    p = Placement(_grid(), [sym], [Instance("s", sym, 3, 0, R0)])
    win = Rect(20, 0, 80, 40)
    before = geometry_key(window_geometry(p, win))
    set_orientation(p, p.get("s"), MY)
    assert geometry_key(window_geometry(p, win)) == before
