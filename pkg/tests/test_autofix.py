import random

import pytest

from abutfix.autofix import (
    CellInfo,
    FixConfig,
    FixError,
    FixOperation,
    OpKind,
    Profile,
    available_ops,
    decide,
    execute,
    fix_loop,
    identify,
    profile,
)
from abutfix.geometry import LayerGeometry, Orientation, Rect
from abutfix.patternlib import ErrorMarker, Pattern, PatternLibrary, anchor_window, scan_full
from abutfix.placement import (
    CellMaster,
    GridSpec,
    Instance,
    Placement,
    PlacementError,
    check_legality,
    window_geometry,
)
from abutfix.scenarios import symmetric_master, walled_symmetric_pair
from abutfix.synth import SynthConfig, generate

R0, MX, MY, R180 = Orientation.R0, Orientation.MX, Orientation.MY, Orientation.R180
FL, FR, FB = OpKind.FLIP_LEFT, OpKind.FLIP_RIGHT, OpKind.FLIP_BOTH
SL, SR = OpKind.SHIFT_LEFT_CELL_LEFT, OpKind.SHIFT_RIGHT_CELL_RIGHT


def _m(name, width):
    return CellMaster(name, width, (LayerGeometry("M1", (Rect(0, 0, width * 10, 4),)),))


def _marker(row, llx, w=20, h=40, name="P"):
    return ErrorMarker(row, Rect(llx, row * h, llx + w, (row + 1) * h), name)


def _profile(gl, gr, two=True):
    box = Rect(0, 0, 10, 40)
    left = CellInfo("a", box, R0)
    right = CellInfo("b", box, R0) if two else None
    return Profile(left, right, gl, gr, _marker(0, 0))


def row_design(cells, length=30, rows=2):
    """cells: (name, width, x_site) in row 0."""
    masters = {w: _m(f"W{w}", w) for _, w, _ in cells}
    p = Placement(GridSpec(10, 40, rows, length), list(masters.values()))
    for name, w, x in cells:
        p.add(Instance(name, masters[w], x, 0, R0))
    return p


# -- identify -------------------------------------------------------------------

def test_identify_shared_edge():
    p = row_design([("a", 3, 2), ("b", 3, 5)])
    left, right = identify(p, _marker(0, 40))
    assert (left.name, right.name) == ("a", "b")


def test_identify_inside_wide_cell_recruits_left_neighbour():
    p = row_design([("d", 2, 0), ("c", 10, 2), ("e", 2, 14)])
    # window [30, 50) lies inside c, nearer its left edge at x=20
    left, right = identify(p, _marker(0, 30))
    assert (left.name, right.name) == ("d", "c")


def test_identify_inside_wide_cell_recruits_right_neighbour():
    p = row_design([("d", 2, 0), ("c", 10, 2), ("e", 2, 12)])
    left, right = identify(p, _marker(0, 90))
    assert (left.name, right.name) == ("c", "e")


def test_identify_tie_prefers_left():
    p = row_design([("d", 2, 0), ("c", 10, 2), ("e", 2, 12)])
    left, right = identify(p, _marker(0, 60))  # centre 70, edges at 20 and 120
    assert (left.name, right.name) == ("d", "c")


def test_identify_lone_cell():
    p = row_design([("c", 10, 5)])
    left, right = identify(p, _marker(0, 70))
    assert left.name == "c" and right is None


def test_identify_nearest_two_of_three():
    p = row_design([("a", 1, 4), ("b", 1, 5), ("c", 1, 6)])
    # centre 55 is inside b; a and c are equally near, the leftmost wins
    left, right = identify(p, _marker(0, 45, w=20))
    assert (left.name, right.name) == ("a", "b")
    left, right = identify(p, _marker(0, 47, w=20))  # centre 57, now c is nearer
    assert (left.name, right.name) == ("b", "c")


def test_identify_orphan():
    p = row_design([("c", 2, 0)])
    with pytest.raises(FixError, match="orphan"):
        identify(p, _marker(0, 200))


# -- profile / available_ops -----------------------------------------------------

def test_profile_walled_pair_and_gaps():
    p = row_design([("a", 3, 0), ("b", 3, 3), ("c", 24, 6)])
    prof = profile(p, identify(p, _marker(0, 20)), _marker(0, 20))
    assert (prof.gap_left_of_left, prof.gap_right_of_right) == (0, 0)
    p = row_design([("a", 3, 3), ("b", 3, 6)])
    prof = profile(p, identify(p, _marker(0, 50)), _marker(0, 50))
    assert prof.gap_left_of_left == 3 and prof.gap_right_of_right == 21


def test_profile_single_cell_uses_it_twice():
    p = row_design([("c", 4, 3)])
    m = _marker(0, 40)
    prof = profile(p, identify(p, m), m)
    assert prof.right is None and (prof.gap_left_of_left, prof.gap_right_of_right) == (3, 23)


def test_profile_u525_attributes():
    case = walled_symmetric_pair()
    (m,) = scan_full(case.placement, case.library)
    prof = profile(case.placement, identify(case.placement, m), m)
    assert prof.left.name == case.left and prof.right.name == case.right
    assert prof.left.bbox == Rect(77976, 168872, 79496, 170544)
    assert prof.left.orient is MX
    assert (prof.gap_left_of_left, prof.gap_right_of_right) == (1, 0)


@pytest.mark.parametrize("gl, gr, two, expected", [
    (0, 0, True, [FL, FR, FB]),
    (2, 0, True, [FL, FR, FB, SL]),
    (0, 1, False, [FL, SR]),
    (1, 1, True, [FL, FR, FB, SL, SR]),
    (0, 0, False, [FL]),
])
def test_available_ops(gl, gr, two, expected):
    assert [op.kind for op in available_ops(_profile(gl, gr, two))] == expected


def test_fix_operation_validation():
    with pytest.raises(ValueError):
        FixOperation(FB, ("a",))
    with pytest.raises(ValueError):
        FixOperation(SL, ("a",), 0)


# -- decide ---------------------------------------------------------------------

def test_decide_singleton():
    rng = random.Random(3)
    assert all(decide(_profile(0, 0, False), rng).kind is FL for _ in range(50))


def test_decide_uniform_chi_square():
    rng = random.Random(12345)
    prof = _profile(2, 0)  # four ops
    n = 100_000
    counts = {}
    for _ in range(n):
        k = decide(prof, rng).kind
        counts[k] = counts.get(k, 0) + 1
    assert set(counts) == {FL, FR, FB, SL}
    expected = n / 4
    sigma = (n * 0.25 * 0.75) ** 0.5
    for c in counts.values():
        assert abs(c - expected) < 3 * sigma
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    assert chi2 < 16.27  # 3 dof, p = 0.001


def test_decide_seeded_sequence_repeats():
    case = walled_symmetric_pair()
    (m,) = scan_full(case.placement, case.library)
    prof = profile(case.placement, identify(case.placement, m), m)
    a, b = random.Random(42), random.Random(42)
    assert [decide(prof, a) for _ in range(20)] == [decide(prof, b) for _ in range(20)]


# -- execute --------------------------------------------------------------------

def test_execute_flip_keeps_bbox():
    case = walled_symmetric_pair()
    p = case.placement
    applied, reason, (ch,) = execute(p, FixOperation(FL, (case.left,)))
    assert applied and reason == ""
    assert (ch.orient_before, ch.orient_after) == (MX, R180)
    assert ch.bbox_before == ch.bbox_after == Rect(77976, 168872, 79496, 170544)


def test_execute_shift_one_tile():
    case = walled_symmetric_pair()
    applied, _, (ch,) = execute(case.placement, FixOperation(SL, (case.left,), 1))
    assert applied
    assert ch.bbox_after.llx == 77824 and ch.bbox_before.llx - ch.bbox_after.llx == 152


def test_execute_stale_shift_is_skipped():
    case = walled_symmetric_pair(gap_left=0)
    before = case.placement.state()
    applied, reason, changes = execute(case.placement, FixOperation(SL, (case.left,), 1))
    assert (applied, reason, changes) == (False, "overlap", ())
    assert case.placement.state() == before


def test_execute_flip_both():
    case = walled_symmetric_pair()
    applied, _, changes = execute(case.placement, FixOperation(FB, (case.left, case.right)))
    assert applied and [c.orient_after for c in changes] == [R180, R180]


def test_execute_unknown_target():
    case = walled_symmetric_pair()
    with pytest.raises(PlacementError):
        execute(case.placement, FixOperation(FL, ("ghost",)))


# -- fix_loop -------------------------------------------------------------------

def test_fix_loop_no_markers():
    case = walled_symmetric_pair()
    p = case.placement
    before = p.state()
    rep = fix_loop(p, PatternLibrary([]))
    assert rep.counts == [0] and rep.status == "clean" and rep.log == []
    assert p.state() == before


def _seed_for(kinds, n_ops=4):
    for seed in range(10_000):
        rng = random.Random(seed)
        if all(rng.randrange(n_ops) == [FL, FR, FB, SL].index(k) for k in kinds):
            return seed
    raise AssertionError("no seed found")


def test_fix_loop_flip_then_shift():
    seed = _seed_for([FL, SL])
    case = walled_symmetric_pair()
    rep = fix_loop(case.placement, case.library, FixConfig(seed=seed))
    assert rep.counts == [1, 1, 0] and rep.status == "clean"
    assert [r.op.kind for r in rep.log] == [FL, SL]
    assert scan_full(case.placement, case.library) == []


def test_fix_loop_rejects_illegal_input():
    case = walled_symmetric_pair()
    case.placement.get(case.left).orient = R0  # bypass the transactional API
    with pytest.raises(FixError):
        fix_loop(case.placement, case.library)


def test_fix_loop_hits_iteration_cap():
    # two symmetric cells, walled on both sides: nothing can change the window
    s1, s2 = symmetric_master("S1", 4), symmetric_master("S2", 4)
    p = Placement(GridSpec(152, 1672, 1, 8), [s1, s2],
                  [Instance("a", s1, 0, 0, R0), Instance("b", s2, 4, 0, R0)])
    window = anchor_window(p, 4 * 152, 0, 608)
    lib = PatternLibrary([Pattern("S", 608, 1672, window_geometry(p, window))])
    rep = fix_loop(p, lib, FixConfig(seed=1, max_iterations=5))
    assert rep.status == "max_iterations_reached"
    assert rep.counts == [1] * 6 and rep.iterations == 5
    assert all(r.applied and r.op.kind in (FL, FR, FB) for r in rep.log)


def test_flip_both_on_symmetric_pair_keeps_marker():
    s1, s2 = symmetric_master("S1", 4), symmetric_master("S2", 4)
    p = Placement(GridSpec(152, 1672, 1, 8), [s1, s2],
                  [Instance("a", s1, 0, 0, R0), Instance("b", s2, 4, 0, R0)])
    window = anchor_window(p, 4 * 152, 0, 608)
    lib = PatternLibrary([Pattern("S", 608, 1672, window_geometry(p, window))])
    before = scan_full(p, lib)
    applied, _, _ = execute(p, FixOperation(FB, ("a", "b")))
    assert applied and scan_full(p, lib) == before


def test_fix_config_validation():
    with pytest.raises(ValueError):
        FixConfig(max_iterations=0)
    with pytest.raises(ValueError):
        FixConfig(verify_mode="sometimes")


def _small_generated(seed):
    return generate(SynthConfig(seed=seed, n_cells=300, utilization=0.75, n_patterns=4))


@pytest.mark.parametrize("seed", range(5))
def test_fix_loop_is_deterministic(seed):
    p, lib, _ = _small_generated(seed)
    q = p.copy()
    a = fix_loop(p, lib, FixConfig(seed=seed))
    b = fix_loop(q, lib, FixConfig(seed=seed, workers=4))
    assert a.counts == b.counts and a.log == b.log
    assert p.state() == q.state()


@pytest.mark.parametrize("seed", range(5))
def test_clean_status_means_clean_scan(seed):
    p, lib, _ = _small_generated(seed)
    rep = fix_loop(p, lib, FixConfig(seed=seed))
    assert len(rep.counts) <= FixConfig().max_iterations + 1
    assert rep.counts[0] == len(scan_full(_small_generated(seed)[0], lib))
    if rep.clean:
        assert scan_full(p, lib) == []


@pytest.mark.parametrize("mode", ["full", "boundaries"])
def test_observer_sees_legal_placement(mode):
    p, lib, _ = _small_generated(11)
    seen = []

    def observe(rec, placement):
        seen.append(rec)
        assert check_legality(placement) == []

    rep = fix_loop(p, lib, FixConfig(seed=3, verify_mode=mode), observer=observe)
    assert seen == rep.log


def test_incremental_rescans_match_full_rescans():
    # replay the logged operations and rescan from scratch after each pass
    p, lib, _ = _small_generated(21)
    start = p.copy()
    rep = fix_loop(p, lib, FixConfig(seed=8))
    for it in range(1, rep.iterations + 1):
        for rec in rep.log:
            if rec.iteration == it and rec.applied:
                execute(start, rec.op)
        assert len(scan_full(start, lib)) == rep.counts[it]
