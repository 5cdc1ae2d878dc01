"""Render two-panel S/I/R figures from run directories.

The input is a small JSON spec listing curve CSVs (one line style each)
for the left panel and, optionally, one mean-field CSV for the right
panel.  The only files this package ever reads are `t,S,I,R` CSVs and
run manifests; it has no dependency on the simulation code.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

COLORS = {"S": "#1f77b4", "I": "#d62728", "R": "#2ca02c"}
STYLES = {"solid": "-", "dashed": "--"}

# one rc set for every render; fonts ship with matplotlib, so the output
# bytes do not depend on the host's font installation
_RC = {
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "figure.dpi": 100,
    "savefig.dpi": 100,
}


@dataclass
class CurveSet:
    """One left-panel CSV and how to draw it."""

    csv: Path
    style: str = "solid"
    label: str = ""

    def __post_init__(self):
        self.csv = Path(self.csv)
        if self.style not in STYLES:
            raise ValueError(
                f"style: expected one of {sorted(STYLES)}, got {self.style!r}"
            )


@dataclass
class FigureSpec:
    """Everything needed to render one figure deterministically."""

    curves: list[CurveSet]
    out: Path
    ode_csv: Path | None = None
    title: str = ""
    xlabel: str = "t"
    ylabel: str = "population fraction"

    def __post_init__(self):
        if not self.curves:
            raise ValueError("curves: at least one CSV is required")
        self.out = Path(self.out)
        if self.ode_csv is not None:
            self.ode_csv = Path(self.ode_csv)


def load_spec(path: Path | str) -> FigureSpec:
    path = Path(path)
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: top level must be a JSON object")
    known = {"curves", "out", "ode_csv", "title", "xlabel", "ylabel"}
    for key in raw:
        if key not in known:
            raise ValueError(f"{key}: unknown spec key")
    if "curves" not in raw or "out" not in raw:
        raise ValueError("spec needs 'curves' and 'out'")
    curves = [CurveSet(**entry) for entry in raw["curves"]]
    return FigureSpec(
        curves=curves,
        out=raw["out"],
        ode_csv=raw.get("ode_csv"),
        title=raw.get("title", ""),
        xlabel=raw.get("xlabel", "t"),
        ylabel=raw.get("ylabel", "population fraction"),
    )


def read_curve_csv(path: Path) -> dict[str, np.ndarray]:
    """Column arrays of one `t,S,I,R` file; errors always name the file."""
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such CSV")
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        expected = ["t", "S", "I", "R"]
        if header != expected:
            missing = [c for c in expected if c not in header]
            what = f"missing column(s) {missing}" if missing else f"header {header}"
            raise ValueError(f"{path}: {what}, expected exactly {expected}")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ValueError(f"{path}: malformed row ({exc})") from exc
    if data.size == 0:
        raise ValueError(f"{path}: no data rows")
    return {name: data[:, k] for k, name in enumerate(expected)}


def _draw(ax, cols, linestyle, labeled: bool) -> None:
    for name in ("S", "I", "R"):
        ax.plot(
            cols["t"],
            cols[name],
            linestyle,
            color=COLORS[name],
            linewidth=1.5,
            label=name if labeled else None,
        )


def build_figure(spec: FigureSpec):
    """The matplotlib Figure for a spec (two panels, or one without ODE)."""
    panels = 2 if spec.ode_csv is not None else 1
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, panels, figsize=(5.0 * panels, 3.6), squeeze=False)
        left = axes[0, 0]
        for k, curve in enumerate(spec.curves):
            cols = read_curve_csv(curve.csv)
            _draw(left, cols, STYLES[curve.style], labeled=(k == 0))
        left.set_xlabel(spec.xlabel)
        left.set_ylabel(spec.ylabel)
        left.set_ylim(0.0, 1.0)
        left.legend(loc="center right", frameon=False)
        if panels == 2:
            right = axes[0, 1]
            _draw(right, read_curve_csv(spec.ode_csv), "-", labeled=True)
            right.set_xlabel(spec.xlabel)
            right.set_ylim(0.0, 1.0)
            right.legend(loc="center right", frameon=False)
        if spec.title:
            fig.suptitle(spec.title)
        fig.tight_layout()
    return fig


def render_figure(spec: FigureSpec, out: Path | str | None = None) -> Path:
    """Write the figure as PNG; identical specs yield identical bytes."""
    target = Path(out) if out is not None else spec.out
    fig = build_figure(spec)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        # pin the one metadata chunk matplotlib would stamp with its version
        fig.savefig(target, format="png", metadata={"Software": "simplot"})
    finally:
        plt.close(fig)
    return target


def spec_from_run_dirs(
    run_dirs, ode_dir=None, out: Path | str = "figure.png", title: str | None = None
) -> FigureSpec:
    """Build a spec from run directories, echoing parameters in the title.

    The first directory's manifest supplies the parameter echo; each
    curve's label and style come from its own manifest (homogeneous
    solid, concentrated dashed).
    """
    curves = []
    echo = title
    for d in map(Path, run_dirs):
        manifest_path = d / "manifest.json"
        if not manifest_path.exists():
            raise FileNotFoundError(f"{manifest_path}: no manifest (incomplete run?)")
        config = json.loads(manifest_path.read_text()).get("config", {})
        init = config.get("init", "homogeneous")
        curves.append(
            CurveSet(
                csv=d / "fractions.csv",
                style="dashed" if init == "concentrated" else "solid",
                label=init,
            )
        )
        if echo is None:
            echo = (
                f"lambda={config.get('lambda'):g}  "
                f"R0={config.get('R0_radius'):g}  "
                f"gamma={config.get('gamma'):g}"
            )
    return FigureSpec(
        curves=curves,
        out=out,
        ode_csv=None if ode_dir is None else Path(ode_dir) / "fractions.csv",
        title=echo or "",
    )


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="plot-figs", description="render a two-panel S/I/R figure from run CSVs"
    )
    ap.add_argument("--spec", type=Path, required=True, help="figure spec JSON")
    ap.add_argument("--out", type=Path, default=None, help="override the output path")
    args = ap.parse_args(argv)
    try:
        spec = load_spec(args.spec)
        target = render_figure(spec, args.out)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
