"""Iterative verify/fix loop for abutment weakpoints.

Each iteration scans the placement, then walks the sorted marker list and
for every marker: identifies the affected cell pair, profiles the free
space around it, picks one available operation uniformly at random, and
applies it to the live placement. The loop stops once a scan is clean or
the iteration cap is hit.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .geometry import Orientation, Rect, flip_h
from .patternlib import ErrorMarker, PatternLibrary, scan
from .placement import (
    Instance,
    Placement,
    PlacementError,
    check_legality,
    gap_left,
    gap_right,
    instances_intersecting,
    move_x,
    neighbor_left,
    neighbor_right,
    set_orientation,
)


class FixError(RuntimeError):
    pass


class OpKind(Enum):
    FLIP_LEFT = "FlipLeft"
    FLIP_RIGHT = "FlipRight"
    FLIP_BOTH = "FlipBoth"
    SHIFT_LEFT_CELL_LEFT = "ShiftLeftCellLeft"
    SHIFT_RIGHT_CELL_RIGHT = "ShiftRightCellRight"

    @property
    def title(self) -> str:
        return _TITLES[self]


_TITLES = {
    OpKind.FLIP_LEFT: "Flip left cell",
    OpKind.FLIP_RIGHT: "Flip right cell",
    OpKind.FLIP_BOTH: "Flip both cells",
    OpKind.SHIFT_LEFT_CELL_LEFT: "Shift the left cell",
    OpKind.SHIFT_RIGHT_CELL_RIGHT: "Shift the right cell",
}


@dataclass(frozen=True)
class FixOperation:
    kind: OpKind
    targets: tuple[str, ...]
    shift_sites: int = 0

    def __post_init__(self):
        expected = 2 if self.kind is OpKind.FLIP_BOTH else 1
        if len(self.targets) != expected:
            raise ValueError(f"{self.kind.value} takes {expected} target(s)")
        if self.kind in (OpKind.SHIFT_LEFT_CELL_LEFT, OpKind.SHIFT_RIGHT_CELL_RIGHT) \
                and self.shift_sites < 1:
            raise ValueError("shift operations need shift_sites >= 1")


@dataclass(frozen=True)
class CellInfo:
    name: str
    bbox: Rect
    orient: Orientation


@dataclass(frozen=True)
class Profile:
    left: CellInfo | None
    right: CellInfo | None
    gap_left_of_left: int
    gap_right_of_right: int
    marker: ErrorMarker

    @property
    def two_cells(self) -> bool:
        return self.left is not None and self.right is not None


@dataclass
class FixConfig:
    seed: int = 0
    max_iterations: int = 10
    verify_mode: str = "full"  # "full" | "boundaries"
    workers: int = 1

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.verify_mode not in ("full", "boundaries"):
            raise ValueError(f"unknown verify mode {self.verify_mode!r}")


@dataclass(frozen=True)
class CellChange:
    name: str
    bbox_before: Rect
    orient_before: Orientation
    bbox_after: Rect
    orient_after: Orientation


@dataclass(frozen=True)
class OpRecord:
    iteration: int
    marker: ErrorMarker
    op: FixOperation | None
    applied: bool
    reason: str
    changes: tuple[CellChange, ...]


@dataclass
class FixReport:
    counts: list[int] = field(default_factory=list)
    log: list[OpRecord] = field(default_factory=list)
    status: str = "running"  # -> "clean" | "max_iterations_reached"

    @property
    def clean(self) -> bool:
        return self.status == "clean"

    @property
    def iterations(self) -> int:
        return max(0, len(self.counts) - 1)


def identify(p: Placement, m: ErrorMarker) -> tuple[Instance, Instance | None]:
    """Pick the cells a marker implicates, returned as (left, right).

    With two or more cells touching the marker, the two closest to its
    centre are used. With one, the search extends past that cell's nearer
    vertical edge (left on a tie) to an abutting neighbour if there is one.
    """
    hits = [i for i in instances_intersecting(p, m.bbox) if i.row == m.anchor_row]
    if not hits:
        raise FixError(f"orphan marker {m.pattern_name} at {m.bbox.as_tuple()}")
    cx2 = m.bbox.llx + m.bbox.urx  # doubled centre keeps everything integral

    def dist2(inst):
        box = p.bbox(inst)
        if 2 * box.llx <= cx2 <= 2 * box.urx:
            return 0
        return min(abs(cx2 - 2 * box.llx), abs(cx2 - 2 * box.urx))

    if len(hits) >= 2:
        a, b = sorted(sorted(hits, key=lambda i: (dist2(i), i.x_site))[:2],
                      key=lambda i: i.x_site)
        return a, b
    (cell,) = hits
    box = p.bbox(cell)
    if cx2 - 2 * box.llx <= 2 * box.urx - cx2:
        other = neighbor_left(p, cell)
        if other is not None and other.end_site == cell.x_site:
            return other, cell
    else:
        other = neighbor_right(p, cell)
        if other is not None and other.x_site == cell.end_site:
            return cell, other
    return cell, None


def _info(p: Placement, inst: Instance | None) -> CellInfo | None:
    if inst is None:
        return None
    return CellInfo(inst.name, p.bbox(inst), inst.orient)


def profile(p: Placement, pair: tuple[Instance, Instance | None], marker: ErrorMarker) -> Profile:
    left, right = pair
    outer_right = right if right is not None else left
    return Profile(_info(p, left), _info(p, right),
                   gap_left(p, left), gap_right(p, outer_right), marker)


def available_ops(prof: Profile, shift_sites: int = 1) -> list[FixOperation]:
    if prof.left is None:
        raise FixError("profile without a cell")
    left = prof.left.name
    right = prof.right.name if prof.right is not None else left
    ops = [FixOperation(OpKind.FLIP_LEFT, (left,))]
    if prof.two_cells:
        ops.append(FixOperation(OpKind.FLIP_RIGHT, (right,)))
        ops.append(FixOperation(OpKind.FLIP_BOTH, (left, right)))
    if prof.gap_left_of_left >= 1:
        ops.append(FixOperation(OpKind.SHIFT_LEFT_CELL_LEFT, (left,), shift_sites))
    if prof.gap_right_of_right >= 1:
        ops.append(FixOperation(OpKind.SHIFT_RIGHT_CELL_RIGHT, (right,), shift_sites))
    return ops


def decide(prof: Profile, rng: random.Random) -> FixOperation:
    """Uniform, memoryless choice among the available operations."""
    ops = available_ops(prof)
    return ops[rng.randrange(len(ops))]


def execute(p: Placement, op: FixOperation) -> tuple[bool, str, tuple[CellChange, ...]]:
    """Apply `op`. Returns (applied, reason, changes); a rejected move is a skip."""
    insts = [p.get(name) for name in op.targets]
    before = [(i.name, p.bbox(i), i.orient) for i in insts]
    try:
        if op.kind in (OpKind.FLIP_LEFT, OpKind.FLIP_RIGHT, OpKind.FLIP_BOTH):
            new = [flip_h(i.orient) for i in insts]
            for inst, o in zip(insts, new):
                set_orientation(p, inst, o)
        elif op.kind is OpKind.SHIFT_LEFT_CELL_LEFT:
            move_x(p, insts[0], insts[0].x_site - op.shift_sites)
        else:
            move_x(p, insts[0], insts[0].x_site + op.shift_sites)
    except PlacementError as exc:
        return False, exc.kind, ()
    changes = tuple(CellChange(name, bb, o, p.bbox(i), i.orient)
                    for (name, bb, o), i in zip(before, insts))
    return True, "", changes


Observer = Callable[[OpRecord, Placement], None]


def fix_loop(p: Placement, lib: PatternLibrary, cfg: FixConfig | None = None,
             observer: Observer | None = None) -> FixReport:
    """Repair `p` in place until a scan is clean or cfg.max_iterations passes run."""
    cfg = cfg or FixConfig()
    violations = check_legality(p)
    if violations:
        raise FixError(f"placement is not legal: {violations[0]}")
    rng = random.Random(cfg.seed)
    report = FixReport()
    iteration = 0
    by_row: dict[int, list[ErrorMarker]] = {}
    dirty: set[int] | None = None  # None: scan every row
    while True:
        # windows never leave their row, so only rows touched by a fix can change
        rows = None if dirty is None else sorted(dirty)
        if rows is None or rows:
            fresh = scan(p, lib, cfg.verify_mode, cfg.workers, rows)
            for row in (range(p.grid.num_rows) if rows is None else rows):
                by_row.pop(row, None)
            for m in fresh:
                by_row.setdefault(m.anchor_row, []).append(m)
        markers = [m for row in sorted(by_row) for m in by_row[row]]
        dirty = set()
        report.counts.append(len(markers))
        if not markers:
            report.status = "clean"
            return report
        if iteration == cfg.max_iterations:
            report.status = "max_iterations_reached"
            return report
        iteration += 1
        mutated = False
        for m in markers:
            try:
                pair = identify(p, m)
            except FixError:
                # an earlier fix this pass may have emptied the window
                if not mutated:
                    raise
                rec = OpRecord(iteration, m, None, False, "stale marker", ())
            else:
                op = decide(profile(p, pair, m), rng)
                applied, reason, changes = execute(p, op)
                mutated = mutated or applied
                if applied:
                    dirty.update(p.get(name).row for name in op.targets)
                rec = OpRecord(iteration, m, op, applied, reason, changes)
            report.log.append(rec)
            if observer is not None:
                observer(rec, p)
