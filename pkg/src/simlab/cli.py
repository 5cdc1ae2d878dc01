"""Experiment orchestration: JSON configs, figure presets, run directories.

One flat JSON file describes one run (or one sweep).  Every run directory
receives the sampled curves (fractions.csv or tv.csv/chaos.csv), a flat
key=value report, and a manifest.json echoing the resolved configuration.
The manifest is written last: its presence marks the directory as a
complete run that can be reproduced bit-identically.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from .core import (
    FractionSeries,
    InitialData,
    Placement,
    SimParams,
    beta_from_params,
)
from .diagnostics import epidemic_summary, pair_correlation_index, tv_to_uniform
from .kinetic import (
    KineticGrid,
    beta_discrete,
    concentrated_field,
    run_kinetic,
    uniform_from_fractions,
)
from .ode import integrate_sir, s_infinity
from .particle import point_mass_state, run_particle

ENGINES = ("particle1", "particle2", "ode", "kinetic", "mixing", "chaos-sweep")

# canonical initial infected fraction shared by all figure presets
I0_CANONICAL = math.pi / 100


# ── configuration ───────────────────────────────────────────────────────────


@dataclass
class ExperimentConfig:
    """Flat description of one run or one sweep.

    JSON files carry the same key names except `lambda`, which maps to the
    attribute `lam` (Python keyword clash).  Fields an engine does not use
    may be omitted from the file; required ones are checked per engine and
    reported by key name.
    """

    engine: str
    N: int | None = None
    D: float = 500.0
    lam: float | None = None
    gamma: float | None = None
    mu: float = 0.0
    R0_radius: float | None = None
    dt: float | None = None
    seed: int = 0
    T: float | None = None
    sample_every: float | None = None
    init: str = "homogeneous"
    i0: float = I0_CANONICAL
    r0: float = 0.0
    model: int = 1
    nx: int | None = None
    nv: int | None = None
    bins_x: int | None = None
    bins_v: int | None = None
    N_list: list[int] | None = None
    seed_list: list[int] | None = None
    out_dir: str | None = None


_JSON_TO_ATTR = {"lambda": "lam"}
_ATTR_TO_JSON = {"lam": "lambda"}

_REQUIRED: dict[str, tuple[str, ...]] = {
    "particle1": ("N", "lambda", "gamma", "R0_radius", "dt", "T", "sample_every"),
    "particle2": ("N", "lambda", "gamma", "R0_radius", "dt", "T", "sample_every"),
    "ode": ("lambda", "gamma", "R0_radius", "dt", "T"),
    "kinetic": ("lambda", "gamma", "R0_radius", "dt", "T", "sample_every", "nx", "nv"),
    "mixing": ("N", "dt", "T", "sample_every", "bins_x", "bins_v"),
    "chaos-sweep": (
        "lambda",
        "gamma",
        "R0_radius",
        "dt",
        "T",
        "sample_every",
        "N_list",
        "seed_list",
    ),
}


def config_from_mapping(raw: dict) -> ExperimentConfig:
    """Build and validate a config from a flat JSON-style mapping."""
    if "engine" not in raw:
        raise ValueError("engine: missing")
    engine = raw["engine"]
    if engine not in ENGINES:
        raise ValueError(f"engine: unknown engine {engine!r}, expected one of {ENGINES}")

    known = {f for f in ExperimentConfig.__dataclass_fields__} - {"lam"}
    known |= {"lambda"}
    for key in raw:
        if key not in known:
            raise ValueError(f"{key}: unknown configuration key")

    kwargs = {}
    for key, value in raw.items():
        kwargs[_JSON_TO_ATTR.get(key, key)] = value
    cfg = ExperimentConfig(**kwargs)

    for key in _REQUIRED[engine]:
        if getattr(cfg, _JSON_TO_ATTR.get(key, key)) is None:
            raise ValueError(f"{key}: required by engine {engine!r}")
    if cfg.init not in ("homogeneous", "concentrated"):
        raise ValueError(
            f"init: expected 'homogeneous' or 'concentrated', got {cfg.init!r}"
        )
    if cfg.model not in (1, 2):
        raise ValueError(f"model: must be 1 or 2, got {cfg.model!r}")
    if not 0 <= cfg.i0 <= 1:
        raise ValueError(f"i0: must lie in [0, 1], got {cfg.i0}")
    if cfg.engine == "chaos-sweep":
        if not cfg.N_list:
            raise ValueError("N_list: must be a non-empty list")
        if not cfg.seed_list:
            raise ValueError("seed_list: must be a non-empty list")
    # engines that build SimParams surface its own invariant errors, but the
    # config layer prefixes the field name for anything it can check flatly
    for key in ("D", "dt", "T"):
        val = getattr(cfg, key)
        if val is not None and val <= 0:
            raise ValueError(f"{key}: must be positive, got {val}")
    for key in ("lam", "gamma", "mu"):
        val = getattr(cfg, key)
        if val is not None and val < 0:
            raise ValueError(f"{_ATTR_TO_JSON.get(key, key)}: must be nonnegative, got {val}")
    return cfg


def config_to_mapping(cfg: ExperimentConfig) -> dict:
    """Echo the resolved config with JSON-facing key names, no None fields."""
    out = {}
    for name in ExperimentConfig.__dataclass_fields__:
        value = getattr(cfg, name)
        if value is None:
            continue
        out[_ATTR_TO_JSON.get(name, name)] = value
    return out


def load_config(path: Path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: top level must be a JSON object")
    return config_from_mapping(raw)


# ── figure presets ──────────────────────────────────────────────────────────

# The three canonical parameter sets.  All share beta/gamma = 0.54*pi; the
# preset dt values satisfy the time-step consistency checks and each run
# takes 200 samples.
_PRESETS: dict[str, dict] = {
    "fig1": dict(
        engine="particle1",
        N=50000,
        D=500.0,
        lam=20.0,
        gamma=1.0 / 30.0,
        R0_radius=15.0,
        dt=0.05,
        T=300.0,
        sample_every=1.5,
    ),
    "fig2": dict(
        engine="particle2",
        N=200000,
        D=500.0,
        lam=2.0,
        gamma=1.0 / 3000.0,
        R0_radius=15.0 / math.sqrt(10.0),
        dt=0.5,
        T=30000.0,
        sample_every=150.0,
    ),
    "fig3": dict(
        engine="particle1",
        N=60000,
        D=500.0,
        lam=200.0,
        gamma=1.0 / 300.0,
        R0_radius=1.5,
        dt=0.05,
        T=3000.0,
        sample_every=15.0,
    ),
}

_VARIANTS = ("homog", "conc", "ode")


def preset_config(name: str, variant: str) -> ExperimentConfig:
    """Config for one figure preset leg.

    `homog` and `conc` run the particle engine of the figure; `ode` runs
    the mean-field reduction with beta derived from the same parameters.
    """
    if name not in _PRESETS:
        raise ValueError(f"preset: unknown preset {name!r}")
    if variant not in _VARIANTS:
        raise ValueError(f"variant: expected one of {_VARIANTS}, got {variant!r}")
    base = dict(_PRESETS[name])
    if variant == "ode":
        base["engine"] = "ode"
        base.pop("N")
    elif variant == "conc":
        base["init"] = "concentrated"
    cfg = ExperimentConfig(**base)
    return cfg


# ── output files ────────────────────────────────────────────────────────────


def _fmt(x) -> str:
    # repr of float64 is the shortest exact round-trip form
    return repr(float(x))


def write_fractions_csv(path: Path, series: FractionSeries) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("t,S,I,R\n")
        for t, s, i, r in zip(series.times, series.s, series.i, series.r):
            fh.write(f"{_fmt(t)},{_fmt(s)},{_fmt(i)},{_fmt(r)}\n")


def write_report(path: Path, items) -> None:
    """Flat key=value lines, one per item, in the given order."""
    with open(path, "w", newline="\n") as fh:
        for key, value in items:
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = _fmt(value)
            fh.write(f"{key}={value}\n")


def _series_items(series: FractionSeries) -> list:
    peak = int(np.argmax(series.i))
    return [
        ("peak_i", float(series.i[peak])),
        ("peak_t", float(series.times[peak])),
        ("final_s", float(series.s[-1])),
        ("final_i", float(series.i[-1])),
        ("final_r", float(series.r[-1])),
    ]


def _initial_data(cfg: ExperimentConfig) -> InitialData:
    placement = (
        Placement.CONCENTRATED_DISK if cfg.init == "concentrated" else Placement.HOMOGENEOUS
    )
    return InitialData(s0=1.0 - cfg.i0 - cfg.r0, i0=cfg.i0, r0=cfg.r0, placement=placement)


# ── engine runners ──────────────────────────────────────────────────────────


def _run_particle(cfg: ExperimentConfig, out: Path):
    model = 1 if cfg.engine == "particle1" else 2
    params = SimParams(
        N=cfg.N,
        D=cfg.D,
        lam=cfg.lam,
        gamma=cfg.gamma,
        R0_radius=cfg.R0_radius,
        dt=cfg.dt,
        seed=cfg.seed,
        mu=cfg.mu,
    )
    run = run_particle(model, params, _initial_data(cfg), cfg.T, cfg.sample_every)
    write_fractions_csv(out / "fractions.csv", run.series)
    items = [("engine", cfg.engine), ("beta", params.beta)]
    items += _series_items(run.series)
    items += [
        ("velocity_jumps", run.totals.velocity_jumps),
        ("recoveries", run.totals.recoveries),
        ("infection_attempts", run.totals.infection_attempts),
        ("infections", run.totals.infections),
    ]
    try:
        summary = epidemic_summary(run.series, cfg.gamma)
        items += [
            ("extinct", True),
            ("delta_tilde", summary.delta_tilde),
            ("residual", summary.residual),
        ]
    except ValueError:
        items += [("extinct", False)]
    write_report(out / "report.txt", items)
    return ["fractions.csv", "report.txt"], {"beta": params.beta}


def _run_ode(cfg: ExperimentConfig, out: Path):
    beta = beta_from_params(cfg.lam, cfg.R0_radius, cfg.D)
    s0 = 1.0 - cfg.i0 - cfg.r0
    series = integrate_sir(s0, cfg.i0, cfg.r0, beta, cfg.gamma, cfg.T, cfg.dt, cfg.mu)
    if cfg.sample_every is not None:
        stride = int(round(cfg.sample_every / cfg.dt))
        if stride < 1 or abs(stride * cfg.dt - cfg.sample_every) > 1e-9 * cfg.sample_every:
            raise ValueError(
                f"sample_every: {cfg.sample_every} is not a multiple of dt={cfg.dt}"
            )
        series = FractionSeries(
            series.times[::stride], series.s[::stride], series.i[::stride], series.r[::stride]
        )
    write_fractions_csv(out / "fractions.csv", series)
    items = [("engine", "ode"), ("beta", beta), ("gamma", cfg.gamma)]
    items += _series_items(series)
    if cfg.mu == 0.0 and cfg.r0 == 0.0:
        items.append(("s_infinity_predicted", s_infinity(beta / cfg.gamma, s0, cfg.i0)))
    try:
        summary = epidemic_summary(series, cfg.gamma)
        items += [
            ("extinct", True),
            ("delta_tilde", summary.delta_tilde),
            ("residual", summary.residual),
        ]
    except ValueError:
        items += [("extinct", False)]
    write_report(out / "report.txt", items)
    return ["fractions.csv", "report.txt"], {"beta": beta}


def _run_kinetic(cfg: ExperimentConfig, out: Path):
    grid = KineticGrid(cfg.nx, cfg.nv, cfg.D)
    params = SimParams(
        N=1,  # kinetic fields carry no agent count
        D=cfg.D,
        lam=cfg.lam,
        gamma=cfg.gamma,
        R0_radius=cfg.R0_radius,
        dt=cfg.dt,
        seed=cfg.seed,
        mu=cfg.mu,
    )
    if cfg.init == "concentrated":
        if cfg.r0 != 0.0:
            raise ValueError("r0: concentrated kinetic data requires r0 = 0")
        f0 = concentrated_field(cfg.i0, grid)
    else:
        f0 = uniform_from_fractions(1.0 - cfg.i0 - cfg.r0, cfg.i0, cfg.r0, grid)
    run = run_kinetic(f0, params, grid, cfg.T, cfg.sample_every)
    write_fractions_csv(out / "fractions.csv", run.series)
    b_disc = beta_discrete(cfg.lam, cfg.R0_radius, grid)
    items = [
        ("engine", "kinetic"),
        ("beta", params.beta),
        ("beta_discrete", b_disc),
        ("nx", cfg.nx),
        ("nv", cfg.nv),
    ]
    items += _series_items(run.series)
    write_report(out / "report.txt", items)
    return ["fractions.csv", "report.txt"], {"beta": params.beta, "beta_discrete": b_disc}


def _run_mixing(cfg: ExperimentConfig, out: Path):
    # pure random flight: infection and recovery switched off
    params = SimParams(
        N=cfg.N,
        D=cfg.D,
        lam=0.0,
        gamma=0.0,
        R0_radius=cfg.R0_radius if cfg.R0_radius is not None else cfg.D / 4.0,
        dt=cfg.dt,
        seed=cfg.seed,
    )
    state0 = point_mass_state(params)
    run = run_particle(
        1,
        params,
        InitialData(s0=1.0, i0=0.0),
        cfg.T,
        cfg.sample_every,
        snapshot_every=cfg.sample_every,
        state0=state0,
    )
    report = tv_to_uniform(run.snapshots, (cfg.bins_x, cfg.bins_x, cfg.bins_v), cfg.D)
    with open(out / "tv.csv", "w", newline="\n") as fh:
        fh.write("t,TV\n")
        for t, tv in zip(report.times, report.tv):
            fh.write(f"{_fmt(t)},{_fmt(tv)}\n")
    items = [
        ("engine", "mixing"),
        ("bins", f"{cfg.bins_x}x{cfg.bins_x}x{cfg.bins_v}"),
        ("sampling_floor", report.sampling_floor),
        ("rate", report.rate),
        ("fit_points", report.fit_points),
        ("eventually_decreasing", report.eventually_decreasing()),
        ("tv_first", float(report.tv[0])),
        ("tv_final", float(report.tv[-1])),
    ]
    write_report(out / "report.txt", items)
    return ["tv.csv", "report.txt"], {}


def _sweep_job(args) -> tuple[int, int, float, float]:
    """One (N, seed) chaos measurement; module-level for process pools."""
    base, n_agents, seed = args
    cfg = ExperimentConfig(**base)
    params = SimParams(
        N=n_agents,
        D=cfg.D,
        lam=cfg.lam,
        gamma=cfg.gamma,
        R0_radius=cfg.R0_radius,
        dt=cfg.dt,
        seed=seed,
        mu=cfg.mu,
    )
    run = run_particle(
        cfg.model, params, _initial_data(cfg), cfg.T, cfg.sample_every, track_peak=True
    )
    chaos = pair_correlation_index(run.peak_state, cfg.R0_radius, cfg.D)
    return n_agents, seed, run.peak_time, chaos.chi


def _run_chaos_sweep(cfg: ExperimentConfig, out: Path):
    base = {
        name: getattr(cfg, name)
        for name in ExperimentConfig.__dataclass_fields__
        if name not in ("N_list", "seed_list", "out_dir")
    }
    jobs = [(base, n, s) for n in cfg.N_list for s in cfg.seed_list]
    workers = min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]

    with open(out / "chaos.csv", "w", newline="\n") as fh:
        fh.write("N,seed,peak_t,chi\n")
        for n, seed, peak_t, chi in rows:
            fh.write(f"{n},{seed},{_fmt(peak_t)},{_fmt(chi)}\n")
    items = [("engine", "chaos-sweep"), ("model", cfg.model)]
    for n in cfg.N_list:
        chis = np.array([chi for nn, _, _, chi in rows if nn == n])
        items += [
            (f"chi_mean_N{n}", float(chis.mean())),
            (f"chi_absdev_N{n}", float(np.abs(chis - 1.0).mean())),
        ]
    write_report(out / "report.txt", items)
    return ["chaos.csv", "report.txt"], {}


_RUNNERS = {
    "particle1": _run_particle,
    "particle2": _run_particle,
    "ode": _run_ode,
    "kinetic": _run_kinetic,
    "mixing": _run_mixing,
    "chaos-sweep": _run_chaos_sweep,
}


# ── orchestration ───────────────────────────────────────────────────────────


def _code_version() -> str:
    try:
        return version("simlab")
    except PackageNotFoundError:
        return "unversioned"


def run_experiment(
    cfg: ExperimentConfig, out_dir: Path | str | None = None, overwrite: bool = False
) -> dict:
    """Execute one config and write its run directory.

    Returns the manifest mapping.  Results are written first; the manifest
    comes last so an interrupted run never looks complete.
    """
    out = Path(out_dir if out_dir is not None else cfg.out_dir or f"runs/{cfg.engine}")
    if out.exists() and any(out.iterdir()) and not overwrite:
        raise FileExistsError(
            f"{out}: run output already present (pass --overwrite to replace it)"
        )
    out.mkdir(parents=True, exist_ok=True)

    start = time.monotonic()
    files, extra = _RUNNERS[cfg.engine](cfg, out)
    wall = time.monotonic() - start

    manifest = {
        "config": config_to_mapping(cfg),
        "engine": cfg.engine,
        "seeds": cfg.seed_list if cfg.engine == "chaos-sweep" else [cfg.seed],
        "code_version": _code_version(),
        "wall_time_s": round(wall, 3),
        "outputs": files,
    }
    manifest.update(extra)
    with open(out / "manifest.json", "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


# ── command line ────────────────────────────────────────────────────────────


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--overwrite", action="store_true", help="replace existing output")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="simlab", description="spatial epidemic simulation runs and sweeps"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one JSON config")
    p_run.add_argument("config", type=Path)
    _add_common(p_run)

    p_pre = sub.add_parser("preset", help="run a built-in figure preset")
    p_pre.add_argument("name", choices=sorted(_PRESETS))
    p_pre.add_argument("--variant", required=True, choices=_VARIANTS)
    p_pre.add_argument("--n", type=int, default=None, help="override the agent count")
    p_pre.add_argument("--dt", type=float, default=None, help="override the step size")
    p_pre.add_argument("--t-final", type=float, default=None, help="override the horizon")
    p_pre.add_argument(
        "--sample-every", type=float, default=None, help="override the sample cadence"
    )
    _add_common(p_pre)

    p_sweep = sub.add_parser("sweep", help="execute a chaos-sweep config over (N, seed)")
    p_sweep.add_argument("config", type=Path)
    _add_common(p_sweep)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
        elif args.command == "sweep":
            cfg = load_config(args.config)
            if cfg.engine != "chaos-sweep":
                raise ValueError(
                    f"engine: sweep needs engine 'chaos-sweep', config has {cfg.engine!r}"
                )
        else:
            cfg = preset_config(args.name, args.variant)
            if args.n is not None:
                cfg.N = args.n
            if args.dt is not None:
                cfg.dt = args.dt
            if args.t_final is not None:
                cfg.T = args.t_final
            if args.sample_every is not None:
                cfg.sample_every = args.sample_every
        if args.seed is not None:
            cfg.seed = args.seed

        default_out = None
        if args.command == "preset":
            default_out = Path(f"runs/{args.name}-{args.variant}")
        manifest = run_experiment(cfg, args.out or default_out, args.overwrite)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    out = args.out or (
        Path(f"runs/{args.name}-{args.variant}")
        if args.command == "preset"
        else Path(cfg.out_dir or f"runs/{cfg.engine}")
    )
    print(f"ok: {cfg.engine} -> {out} ({manifest['wall_time_s']}s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
