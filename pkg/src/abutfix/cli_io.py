"""Text formats and the command-line driver.

Design file::

    UNITS <dbu_per_micron>
    GRID <site_w> <row_h> <num_rows> <row_len_sites>
    ORIGIN <x> <y>                      # optional, default 0 0
    MASTER <name> <width_sites>
      RECT <layer> <llx> <lly> <urx> <ury>
    END
    INST <name> <master> <x_site> <row> <R0|R180|MX|MY>

Pattern file::

    MATCH_MIRRORED <true|false>         # optional, default true
    PATTERN <name> <window_w> <window_h>
      RECT <layer> <llx> <lly> <urx> <ury>
    END

Marker file: one ``<pattern> <row> <llx> <lly> <urx> <ury>`` line per marker.
All numbers are integer DBU. ``#`` starts a comment.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .autofix import FixConfig, FixError, FixReport, OpRecord, fix_loop
from .geometry import DBU_PER_MICRON, GeometryError, LayerGeometry, Orientation, Rect
from .patternlib import ErrorMarker, Pattern, PatternError, PatternLibrary, scan
from .placement import CellMaster, GridSpec, Instance, Placement, PlacementError
from .synth import SynthConfig, SynthError, generate


class ParseError(ValueError):
    def __init__(self, line: int, column: int, message: str, source: str = "<text>"):
        super().__init__(f"{source}:{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message


class _Lines:
    """Tokenised, comment-stripped lines with column positions."""

    def __init__(self, text: str, source: str):
        self.source = source
        self.items: list[tuple[int, list[tuple[int, str]]]] = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            body = raw.split("#", 1)[0]
            toks = []
            col = 0
            for tok in body.split():
                col = body.index(tok, col)
                toks.append((col + 1, tok))
                col += len(tok)
            if toks:
                self.items.append((lineno, toks))
        self.pos = 0
        self.last_line = len(text.splitlines())

    def __iter__(self):
        return self

    def __next__(self):
        if self.pos >= len(self.items):
            raise StopIteration
        self.pos += 1
        return self.items[self.pos - 1]

    def error(self, line, col, msg):
        return ParseError(line, col, msg, self.source)

    def expect(self, line, toks, n, usage):
        if len(toks) != n:
            col = toks[n][0] if len(toks) > n else toks[-1][0] + len(toks[-1][1])
            raise self.error(line, col, f"expected {usage}")

    def int_at(self, line, tok, positive=False, nonneg=False):
        col, text = tok
        try:
            v = int(text)
        except ValueError:
            raise self.error(line, col, f"expected integer, got {text!r}") from None
        if positive and v <= 0:
            raise self.error(line, col, f"expected positive integer, got {v}")
        if nonneg and v < 0:
            raise self.error(line, col, f"expected non-negative integer, got {v}")
        return v

    def rect(self, line, toks):
        self.expect(line, toks, 6, "RECT <layer> <llx> <lly> <urx> <ury>")
        vals = [self.int_at(line, t) for t in toks[2:]]
        try:
            return toks[1][1], Rect(*vals)
        except GeometryError as exc:
            raise self.error(line, toks[2][0], str(exc)) from None


def _read_rect_block(lines: _Lines, head_line: int, head_col: int, what: str):
    """RECT lines up to END; returns ({layer: [rect]}, [(line, col)] per rect)."""
    layers: dict[str, list[Rect]] = {}
    where: list[tuple[int, int, str, Rect]] = []
    for line, toks in lines:
        kw = toks[0][1]
        if kw == "END":
            lines.expect(line, toks, 1, "END")
            return layers, where
        if kw != "RECT":
            raise lines.error(line, toks[0][0], f"expected RECT or END inside {what}, got {kw!r}")
        layer, r = lines.rect(line, toks)
        layers.setdefault(layer, []).append(r)
        where.append((line, toks[2][0], layer, r))
    raise lines.error(head_line, head_col, f"{what} not closed by END")


# -- design -------------------------------------------------------------------

def parse_design(text: str, source: str = "<design>") -> Placement:
    lines = _Lines(text, source)
    units = None
    grid = None
    origin = (0, 0)
    grid_line = None
    masters: dict[str, CellMaster] = {}
    placement: Placement | None = None
    for line, toks in lines:
        kw_col, kw = toks[0]
        if kw == "UNITS":
            if units is not None:
                raise lines.error(line, kw_col, "duplicate UNITS")
            lines.expect(line, toks, 2, "UNITS <dbu_per_micron>")
            units = lines.int_at(line, toks[1], positive=True)
        elif kw == "GRID":
            if grid is not None:
                raise lines.error(line, kw_col, "duplicate GRID")
            lines.expect(line, toks, 5, "GRID <site_w> <row_h> <num_rows> <row_len_sites>")
            grid = tuple(lines.int_at(line, t, positive=True) for t in toks[1:])
            grid_line = line
        elif kw == "ORIGIN":
            if grid is None or masters or placement is not None:
                raise lines.error(line, kw_col, "ORIGIN must directly follow GRID")
            lines.expect(line, toks, 3, "ORIGIN <x> <y>")
            origin = (lines.int_at(line, toks[1]), lines.int_at(line, toks[2]))
        elif kw == "MASTER":
            if grid is None:
                raise lines.error(line, kw_col, "MASTER before GRID")
            if placement is not None:
                raise lines.error(line, kw_col, "MASTER after INST")
            lines.expect(line, toks, 3, "MASTER <name> <width_sites>")
            name = toks[1][1]
            if name in masters:
                raise lines.error(line, toks[1][0], f"duplicate master {name!r}")
            width = lines.int_at(line, toks[2], positive=True)
            layers, where = _read_rect_block(lines, line, kw_col, f"MASTER {name}")
            w_dbu, h_dbu = width * grid[0], grid[1]
            for rl, rc, layer, r in where:
                if r.llx < 0 or r.lly < 0 or r.urx > w_dbu or r.ury > h_dbu:
                    raise lines.error(rl, rc, f"master {name}: {layer} rect {r.as_tuple()} "
                                              f"outside master bbox (0, 0, {w_dbu}, {h_dbu})")
            masters[name] = CellMaster(name, width, tuple(
                LayerGeometry(layer, tuple(rs)) for layer, rs in layers.items()))
        elif kw == "INST":
            if grid is None:
                raise lines.error(line, kw_col, "INST before GRID")
            if placement is None:
                placement = Placement(GridSpec(*grid, origin=origin), masters,
                                      dbu_per_micron=units or DBU_PER_MICRON)
            lines.expect(line, toks, 6, "INST <name> <master> <x_site> <row> <orientation>")
            name, mname = toks[1][1], toks[2][1]
            if mname not in masters:
                raise lines.error(line, toks[2][0], f"unknown master {mname!r}")
            x_site = lines.int_at(line, toks[3])
            row = lines.int_at(line, toks[4])
            try:
                orient = Orientation(toks[5][1])
            except ValueError:
                raise lines.error(line, toks[5][0], f"unknown orientation {toks[5][1]!r} "
                                                    "(expected R0, R180, MX or MY)") from None
            try:
                placement.add(Instance(name, masters[mname], x_site, row, orient))
            except PlacementError as exc:
                col = {"orientation": toks[5][0], "overlap": toks[3][0],
                       "out of bounds": toks[3][0]}.get(exc.kind, toks[1][0])
                raise lines.error(line, col, str(exc)) from None
        else:
            raise lines.error(line, kw_col, f"unknown statement {kw!r}")
    if units is None:
        raise lines.error(lines.last_line or 1, 1, "missing UNITS")
    if grid is None:
        raise lines.error(lines.last_line or 1, 1, "missing GRID")
    if placement is None:
        try:
            placement = Placement(GridSpec(*grid, origin=origin), masters, dbu_per_micron=units)
        except ValueError as exc:
            raise lines.error(grid_line, 1, str(exc)) from None
    return placement


def serialize_design(p: Placement) -> str:
    g = p.grid
    out = [f"UNITS {p.dbu_per_micron}",
           f"GRID {g.site_w} {g.row_h} {g.num_rows} {g.row_len_sites}"]
    if g.origin != (0, 0):
        out.append(f"ORIGIN {g.origin[0]} {g.origin[1]}")
    for m in p.masters.values():
        out.append(f"MASTER {m.name} {m.width_sites}")
        for lg in m.geometry:
            out.extend(f"RECT {lg.layer} {r.llx} {r.lly} {r.urx} {r.ury}" for r in lg.rects)
        out.append("END")
    for i in p.instances:
        out.append(f"INST {i.name} {i.master.name} {i.x_site} {i.row} {i.orient.value}")
    return "\n".join(out) + "\n"


# -- patterns -----------------------------------------------------------------

def parse_patterns(text: str, source: str = "<patterns>") -> PatternLibrary:
    lines = _Lines(text, source)
    patterns: list[Pattern] = []
    seen: set[str] = set()
    mirrored = True
    for line, toks in lines:
        kw_col, kw = toks[0]
        if kw == "MATCH_MIRRORED":
            if patterns:
                raise lines.error(line, kw_col, "MATCH_MIRRORED must precede patterns")
            lines.expect(line, toks, 2, "MATCH_MIRRORED <true|false>")
            flag = toks[1][1].lower()
            if flag not in ("true", "false"):
                raise lines.error(line, toks[1][0], f"expected true or false, got {toks[1][1]!r}")
            mirrored = flag == "true"
        elif kw == "PATTERN":
            lines.expect(line, toks, 4, "PATTERN <name> <window_w> <window_h>")
            name = toks[1][1]
            if name in seen:
                raise lines.error(line, toks[1][0], f"duplicate pattern {name!r}")
            w = lines.int_at(line, toks[2], positive=True)
            if w % 2:
                raise lines.error(line, toks[2][0], f"window_w must be even, got {w}")
            h = lines.int_at(line, toks[3], positive=True)
            layers, where = _read_rect_block(lines, line, kw_col, f"PATTERN {name}")
            for rl, rc, layer, r in where:
                if r.llx < 0 or r.lly < 0 or r.urx > w or r.ury > h:
                    raise lines.error(rl, rc, f"pattern {name}: {layer} rect {r.as_tuple()} "
                                              f"outside window (0, 0, {w}, {h})")
            try:
                patterns.append(Pattern(name, w, h, {
                    layer: LayerGeometry(layer, tuple(rs)) for layer, rs in layers.items()}))
            except PatternError as exc:
                raise lines.error(line, kw_col, str(exc)) from None
            seen.add(name)
        else:
            raise lines.error(line, kw_col, f"unknown statement {kw!r}")
    return PatternLibrary(patterns, match_mirrored=mirrored)


def serialize_patterns(lib: PatternLibrary) -> str:
    out = []
    if not lib.match_mirrored:
        out.append("MATCH_MIRRORED false")
    for pat in lib.patterns:
        out.append(f"PATTERN {pat.name} {pat.window_w} {pat.window_h}")
        for layer, g in pat.geometry.items():
            out.extend(f"RECT {layer} {r.llx} {r.lly} {r.urx} {r.ury}" for r in g.rects)
        out.append("END")
    return "\n".join(out) + "\n" if out else ""


# -- markers and reports ------------------------------------------------------

def write_markers(markers: list[ErrorMarker]) -> str:
    ordered = sorted(markers, key=lambda m: m.sort_key + (m.bbox.urx,))
    return "".join(f"{m.pattern_name} {m.anchor_row} {m.bbox.llx} {m.bbox.lly} "
                   f"{m.bbox.urx} {m.bbox.ury}\n" for m in ordered)


def parse_markers(text: str, source: str = "<markers>") -> list[ErrorMarker]:
    lines = _Lines(text, source)
    out = []
    for line, toks in lines:
        lines.expect(line, toks, 6, "<pattern> <row> <llx> <lly> <urx> <ury>")
        row = lines.int_at(line, toks[1], nonneg=True)
        vals = [lines.int_at(line, t) for t in toks[2:]]
        try:
            box = Rect(*vals)
        except GeometryError as exc:
            raise lines.error(line, toks[2][0], str(exc)) from None
        out.append(ErrorMarker(row, box, toks[0][1]))
    return out


def write_iteration_report(counts: list[int]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "marker_count"])
    w.writerows(enumerate(counts))
    return buf.getvalue()


def parse_iteration_report(text: str, source: str = "<report>") -> list[int]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["iteration", "marker_count"]:
        raise ParseError(1, 1, "expected header 'iteration,marker_count'", source)
    counts = []
    for lineno, row in enumerate(rows[1:], 2):
        if not row:
            continue
        if len(row) != 2:
            raise ParseError(lineno, 1, "expected 2 columns", source)
        try:
            it, n = int(row[0]), int(row[1])
        except ValueError:
            raise ParseError(lineno, 1, "expected integers", source) from None
        if it != len(counts):
            raise ParseError(lineno, 1, f"expected iteration {len(counts)}, got {it}", source)
        if n < 0:
            raise ParseError(lineno, len(row[0]) + 2, "negative marker count", source)
        counts.append(n)
    return counts


def _cell_block(title: str, name: str, bbox: Rect, orient: Orientation, dbu: int) -> list[str]:
    return [
        f"# Cell Information/Attributes [{title}]",
        f"# Cell:      {name}",
        f"# Bbox:      {bbox.to_microns(dbu)}",
        f"# Orientation: {orient.value} ({orient.def_name})",
        "#-----#",
    ]


def format_op_record(rec: OpRecord, dbu: int = DBU_PER_MICRON) -> str:
    out = ["#-----#"]
    m = rec.marker
    out.append(f"# Iteration: {rec.iteration}")
    out.append(f"# Marker:    {m.pattern_name} row {m.anchor_row} {m.bbox.to_microns(dbu)}")
    if rec.op is None:
        out.append("# Operation: none")
    else:
        out.append(f"# Operation: {rec.op.kind.title} {' '.join(rec.op.targets)}")
    out.append("# Status:    applied" if rec.applied else f"# Status:    skipped ({rec.reason})")
    out.append("#-----#")
    for ch in rec.changes:
        out += _cell_block("Original", ch.name, ch.bbox_before, ch.orient_before, dbu)
        out += _cell_block("Modified", ch.name, ch.bbox_after, ch.orient_after, dbu)
    return "\n".join(out) + "\n"


def write_operation_log(report: FixReport, dbu: int = DBU_PER_MICRON) -> str:
    body = "".join(format_op_record(rec, dbu) + "\n" for rec in report.log)
    summary = (f"# Status: {report.status}\n"
               f"# Marker counts: {' '.join(str(c) for c in report.counts)}\n")
    return body + summary


def format_convergence(counts: list[int]) -> str:
    initial = counts[0] if counts else 0
    lines = [f"{'iteration':>9}  {'markers':>8}  {'resolved':>9}",
             f"{'-' * 9}  {'-' * 8}  {'-' * 9}"]
    for it, n in enumerate(counts):
        pct = 100.0 * (initial - n) / initial if initial else 100.0
        lines.append(f"{it:>9}  {n:>8}  {pct:>8.2f}%")
    return "\n".join(lines) + "\n"


# -- CLI ----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="abutfix", description="Detect and repair cell-abutment weakpoints.")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic design and planted pattern library")
    g.add_argument("--config", required=True, type=Path, help="JSON file of SynthConfig fields")
    g.add_argument("--out-design", required=True, type=Path)
    g.add_argument("--out-patterns", required=True, type=Path)

    v = sub.add_parser("verify", help="pattern-match a design and write error markers")
    v.add_argument("--design", required=True, type=Path)
    v.add_argument("--patterns", required=True, type=Path)
    v.add_argument("--out", required=True, type=Path)
    v.add_argument("--mode", choices=("full", "boundaries"), default="full")
    v.add_argument("--threads", type=int, default=1)

    f = sub.add_parser("fix", help="run the iterative verify/fix loop")
    f.add_argument("--design", required=True, type=Path)
    f.add_argument("--patterns", required=True, type=Path)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--max-iterations", type=int, default=10)
    f.add_argument("--mode", choices=("full", "boundaries"), default="full")
    f.add_argument("--threads", type=int, default=1)
    f.add_argument("--out-design", required=True, type=Path)
    f.add_argument("--out-report", required=True, type=Path)
    f.add_argument("--out-log", required=True, type=Path)

    r = sub.add_parser("report", help="pretty-print a convergence CSV")
    r.add_argument("--in", dest="inp", required=True, type=Path)
    return ap


def _cmd_gen(args) -> int:
    cfg = SynthConfig.from_dict(json.loads(args.config.read_text()))
    p, lib, planted = generate(cfg)
    args.out_design.write_text(serialize_design(p))
    args.out_patterns.write_text(serialize_patterns(lib))
    print(f"{len(p)} instances, {p.grid.num_rows} rows, {len(lib)} patterns planted")
    return 0


def _cmd_verify(args) -> int:
    p = parse_design(args.design.read_text(), str(args.design))
    lib = parse_patterns(args.patterns.read_text(), str(args.patterns))
    markers = scan(p, lib, args.mode, max(1, args.threads))
    args.out.write_text(write_markers(markers))
    print(f"{len(markers)} markers")
    return 0


def _cmd_fix(args) -> int:
    p = parse_design(args.design.read_text(), str(args.design))
    lib = parse_patterns(args.patterns.read_text(), str(args.patterns))
    cfg = FixConfig(seed=args.seed, max_iterations=args.max_iterations,
                    verify_mode=args.mode, workers=max(1, args.threads))
    report = fix_loop(p, lib, cfg)
    args.out_design.write_text(serialize_design(p))
    args.out_report.write_text(write_iteration_report(report.counts))
    args.out_log.write_text(write_operation_log(report, p.dbu_per_micron))
    print(f"{report.status}: markers per iteration {report.counts}")
    return 0 if report.clean else 2


def _cmd_report(args) -> int:
    counts = parse_iteration_report(args.inp.read_text(), str(args.inp))
    sys.stdout.write(format_convergence(counts))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"gen": _cmd_gen, "verify": _cmd_verify, "fix": _cmd_fix,
               "report": _cmd_report}[args.cmd]
    try:
        return handler(args)
    except (ParseError, SynthError, FixError, PatternError, ValueError, OSError) as exc:
        print(f"abutfix {args.cmd}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
