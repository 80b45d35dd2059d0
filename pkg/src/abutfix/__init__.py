"""Detection and automatic repair of standard-cell abutment weakpoints."""

from .autofix import FixConfig, FixReport, fix_loop
from .geometry import Orientation, Rect, flip_h, transform_rect
from .patternlib import ErrorMarker, Pattern, PatternLibrary, scan_boundaries, scan_full
from .placement import CellMaster, GridSpec, Instance, Placement, check_legality
from .synth import SynthConfig, generate

__all__ = [
    "CellMaster", "ErrorMarker", "FixConfig", "FixReport", "GridSpec", "Instance",
    "Orientation", "Pattern", "PatternLibrary", "Placement", "Rect", "SynthConfig",
    "check_legality", "fix_loop", "flip_h", "generate", "scan_boundaries", "scan_full",
    "transform_rect",
]
