"""Figure rendering for S/I/R run outputs (CSV in, PNG out)."""

from simplot.figures import (
    CurveSet,
    FigureSpec,
    build_figure,
    load_spec,
    read_curve_csv,
    render_figure,
    spec_from_run_dirs,
)

__all__ = [
    "CurveSet",
    "FigureSpec",
    "build_figure",
    "load_spec",
    "read_curve_csv",
    "render_figure",
    "spec_from_run_dirs",
]
