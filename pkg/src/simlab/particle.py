"""N-agent epidemic processes on the torus with random-flight motion.

Two infection mechanisms over the same free motion (ballistic transport plus
velocity-direction resampling at unit rate):

* Model 1, pairwise contact: unordered pairs attempt infection at total
  intensity lam * (N - 1) / 2; an attempt succeeds when the pair carries
  labels {I, S} and sits within R0_radius, relabeling both I.
* Model 2, crowd contagion: agents fire at total intensity lam; when the
  fired agent is infected, every susceptible agent within R0_radius of it is
  relabeled I at once.

Each step of size dt runs transport, velocity jumps, infection attempts
(sequential, so later attempts see earlier relabelings), then recoveries
applied only to agents that were already I before the infection substep.
Neighborhood queries go through a uniform grid whose cell side divides D
exactly, so minimum-image lookups never straddle a partial cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    TWO_PI,
    FractionSeries,
    InitialData,
    Label,
    ParticleState,
    RngStream,
    SimParams,
    init_particles,
    torus_distance,
)

_S = int(Label.S)
_I = int(Label.I)
_R = int(Label.R)


# ── spatial index ───────────────────────────────────────────────────────────


@dataclass
class SpatialIndex:
    """Uniform bucket grid over the torus for radius queries.

    The cell side is c = D / floor(D / R0) >= R0, so a ball of radius R0
    around any point is covered by the 3 x 3 block of cells around the
    point's own cell.  `order` lists particle indices grouped by cell;
    bucket b owns order[starts[b]:starts[b + 1]].
    """

    D: float
    cell: float
    m: int
    order: np.ndarray
    starts: np.ndarray
    positions: np.ndarray


def _cells_of(positions: np.ndarray, cell: float, m: int) -> np.ndarray:
    cx = np.floor(positions[:, 0] / cell).astype(np.int64) % m
    cy = np.floor(positions[:, 1] / cell).astype(np.int64) % m
    return cx * m + cy


def _build_index(positions: np.ndarray, R0: float, D: float) -> SpatialIndex:
    if not (0 < R0 < D / 2):
        raise ValueError(f"R0_radius must lie in (0, D/2), got {R0}")
    m = int(math.floor(D / R0))
    cell = D / m
    ids = _cells_of(positions, cell, m)
    order = np.argsort(ids, kind="stable")
    counts = np.bincount(ids, minlength=m * m)
    starts = np.concatenate(([0], np.cumsum(counts)))
    return SpatialIndex(D, cell, m, order, starts, positions)


def build_index(state: ParticleState, R0: float, D: float) -> SpatialIndex:
    """Bucket every particle of `state` into the grid for radius-R0 queries."""
    return _build_index(state.positions, R0, D)


def query_ball(index: SpatialIndex, point, R0: float) -> np.ndarray:
    """Indices of all particles at minimum-image distance < R0 from `point`.

    R0 must not exceed the cell side the index was built for, otherwise the
    3 x 3 neighborhood would miss candidates.  Returns indices in ascending
    order; a particle exactly at `point` is included (distance 0).
    """
    if R0 > index.cell:
        raise ValueError(
            f"query radius {R0} exceeds index cell side {index.cell}"
        )
    m = index.m
    point = np.asarray(point, dtype=float)
    cx = int(point[0] // index.cell) % m
    cy = int(point[1] // index.cell) % m
    # dedupe wrapped neighbor cells; for m = 2 offsets +1 and -1 coincide
    cells = np.unique(
        [((cx + di) % m) * m + ((cy + dj) % m) for di in (-1, 0, 1) for dj in (-1, 0, 1)]
    )
    chunks = [index.order[index.starts[c]:index.starts[c + 1]] for c in cells]
    candidates = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
    if candidates.size == 0:
        return candidates
    dist = torus_distance(index.positions[candidates], point, index.D)
    return np.sort(candidates[dist < R0])


# ── step bookkeeping ────────────────────────────────────────────────────────


@dataclass
class StepReport:
    """Event counts of one step (or a sum over steps)."""

    velocity_jumps: int = 0
    recoveries: int = 0
    infection_attempts: int = 0
    infections: int = 0

    def __add__(self, other: "StepReport") -> "StepReport":
        return StepReport(
            self.velocity_jumps + other.velocity_jumps,
            self.recoveries + other.recoveries,
            self.infection_attempts + other.infection_attempts,
            self.infections + other.infections,
        )


@dataclass
class EventStreams:
    """Per-subsystem RNG streams of one run, derived from a single root."""

    motion: RngStream
    recovery: RngStream
    infection: RngStream

    @classmethod
    def from_root(cls, root: RngStream) -> "EventStreams":
        return cls(root.derive("motion"), root.derive("recovery"), root.derive("infection"))


# ── infection mechanics ─────────────────────────────────────────────────────


def apply_pair_attempts(
    positions: np.ndarray,
    labels: np.ndarray,
    ii: np.ndarray,
    jj: np.ndarray,
    R0: float,
    D: float,
) -> int:
    """Run pairwise infection attempts in order, mutating `labels`.

    The distance gate is evaluated vectorized (positions are frozen during
    the substep); label checks run sequentially so an agent infected by an
    earlier attempt can infect in a later one.  Returns the number of
    successful attempts.
    """
    if ii.size == 0:
        return 0
    delta = np.abs(positions[ii] - positions[jj])
    delta = np.minimum(delta, D - delta)
    close = (delta * delta).sum(axis=1) < R0 * R0
    n = 0
    for a, b in zip(ii[close].tolist(), jj[close].tolist()):
        la = labels[a]
        lb = labels[b]
        if (la == _I and lb == _S) or (la == _S and lb == _I):
            labels[a] = _I
            labels[b] = _I
            n += 1
    return n


def apply_crowd_event(
    positions: np.ndarray,
    labels: np.ndarray,
    agent: int,
    R0: float,
    D: float,
    index: SpatialIndex,
) -> int:
    """Fire one crowd-contagion event at `agent`, mutating `labels`.

    A no-op unless the agent is currently infected; otherwise every
    susceptible particle within R0 (minimum image) is relabeled I.  Returns
    the number of fresh infections.
    """
    if labels[agent] != _I:
        return 0
    neighbors = query_ball(index, positions[agent], R0)
    targets = neighbors[labels[neighbors] == _S]
    if targets.size:
        labels[targets] = _I
    return int(targets.size)


# ── steppers ────────────────────────────────────────────────────────────────


def _free_motion(pos, ang, dt, D, motion: RngStream) -> int:
    """Transport then velocity jumps, in place. Returns the jump count."""
    pos[:, 0] += np.cos(ang) * dt
    pos[:, 1] += np.sin(ang) * dt
    np.mod(pos, D, out=pos)
    # np.mod can round a barely-negative coordinate to exactly D
    pos[pos == D] = 0.0
    u = motion.gen.random(ang.shape[0])
    jump = u < -math.expm1(-dt)
    n_jump = int(np.count_nonzero(jump))
    if n_jump:
        ang[jump] = motion.gen.uniform(0.0, TWO_PI, n_jump)
    return n_jump


def _recoveries(labels, pre_infected, dt, gamma, recovery: RngStream) -> int:
    """Recover agents that were I before the infection substep, in place."""
    idx = np.flatnonzero(pre_infected)
    if idx.size == 0:
        return 0
    u = recovery.gen.random(idx.size)
    hit = idx[u < -math.expm1(-gamma * dt)]
    labels[hit] = _R
    return int(hit.size)


def step_model1(
    state: ParticleState, params: SimParams, streams: EventStreams
) -> tuple[ParticleState, StepReport]:
    """One step of the pairwise-contact process.

    Pair attempts are drawn K ~ Poisson(lam * (N - 1) * dt / 2), each an
    unordered pair chosen uniformly at random with replacement across
    attempts.

    Returns:
        The advanced state (a new object) and the step's event counts.
    """
    N, D, dt = params.N, params.D, params.dt
    pos = state.positions.copy()
    ang = state.angles.copy()
    lab = state.labels.copy()

    n_jump = _free_motion(pos, ang, dt, D, streams.motion)
    pre_infected = lab == _I

    rate = params.lam * (N - 1) * dt / 2.0
    K = int(streams.infection.gen.poisson(rate)) if rate > 0 else 0
    n_inf = 0
    if K > 0:
        g = streams.infection.gen
        ii = g.integers(0, N, size=K)
        jj = g.integers(0, N - 1, size=K)
        jj = jj + (jj >= ii)
        n_inf = apply_pair_attempts(pos, lab, ii, jj, params.R0_radius, D)

    n_rec = _recoveries(lab, pre_infected, dt, params.gamma, streams.recovery)
    return (
        ParticleState(state.time + dt, pos, ang, lab),
        StepReport(n_jump, n_rec, K, n_inf),
    )


def step_model2(
    state: ParticleState, params: SimParams, streams: EventStreams
) -> tuple[ParticleState, StepReport]:
    """One step of the crowd-contagion process.

    Fire events are drawn K ~ Poisson(lam * dt); each picks an agent
    uniformly (with replacement) and, if that agent is infected, converts
    every susceptible within R0_radius.  Events within the step see the
    labels left by earlier events.
    """
    N, D, dt = params.N, params.D, params.dt
    pos = state.positions.copy()
    ang = state.angles.copy()
    lab = state.labels.copy()

    n_jump = _free_motion(pos, ang, dt, D, streams.motion)
    pre_infected = lab == _I

    K = int(streams.infection.gen.poisson(params.lam * dt)) if params.lam > 0 else 0
    n_inf = 0
    if K > 0:
        picks = streams.infection.gen.integers(0, N, size=K)
        index = None  # positions are frozen during the substep: build once
        for agent in picks.tolist():
            if lab[agent] == _I:
                if index is None:
                    index = _build_index(pos, params.R0_radius, D)
                n_inf += apply_crowd_event(pos, lab, agent, params.R0_radius, D, index)

    n_rec = _recoveries(lab, pre_infected, dt, params.gamma, streams.recovery)
    return (
        ParticleState(state.time + dt, pos, ang, lab),
        StepReport(n_jump, n_rec, K, n_inf),
    )


# ── run loop ────────────────────────────────────────────────────────────────


@dataclass
class ParticleRun:
    """Output of run_particle: sampled fractions plus optional state dumps."""

    series: FractionSeries
    totals: StepReport
    snapshots: list[ParticleState] = field(default_factory=list)
    peak_state: ParticleState | None = None
    peak_time: float | None = None


def point_mass_state(params: SimParams, position=None, angle: float = 0.0) -> ParticleState:
    """All N agents at a single phase-space point, labeled S (pure flight)."""
    x = np.array(position if position is not None else (params.D / 2, params.D / 2), float)
    positions = np.tile(x, (params.N, 1))
    angles = np.full(params.N, float(angle))
    labels = np.zeros(params.N, dtype=np.int8)
    return ParticleState(0.0, positions, angles, labels)


def run_particle(
    model: int,
    params: SimParams,
    init: InitialData,
    T: float,
    sample_every: float,
    rng: RngStream | None = None,
    snapshot_every: float | None = None,
    track_peak: bool = False,
    state0: ParticleState | None = None,
) -> ParticleRun:
    """Run one realization of model 1 or 2 and sample label fractions.

    The sample grid is t_k = k * n_sub * dt with n_sub = round(sample_every
    / dt), so sample_every must be an integer multiple of dt (to 1e-9
    relative).  Snapshots, when requested, are taken on the sample grid;
    `track_peak` keeps a copy of the sampled state with the highest I count
    (earliest such sample wins ties).

    Args:
        model: 1 (pairwise) or 2 (crowd contagion).
        params: run parameters; params.seed seeds all streams unless `rng`
            is given.
        init: initial fractions/placement; ignored when state0 is passed.
        T: final time; the run covers floor(T / sample_every) full samples.
        sample_every: sampling cadence, >= dt.
        rng: optional root stream (overrides params.seed).
        snapshot_every: cadence of stored state copies, a multiple of
            sample_every.
        track_peak: store the sampled state with maximal I count.
        state0: optional explicit initial state (bypasses init_particles).

    Returns:
        ParticleRun with the FractionSeries (exact integer counts included),
        aggregate event totals, and any requested snapshots.
    """
    if model == 1:
        step = step_model1
    elif model == 2:
        step = step_model2
    else:
        raise ValueError(f"model must be 1 or 2, got {model!r}")

    dt = params.dt
    n_sub = int(round(sample_every / dt))
    if n_sub < 1 or abs(n_sub * dt - sample_every) > 1e-9 * max(1.0, sample_every):
        raise ValueError(
            f"sample_every={sample_every} must be a whole multiple of dt={dt}"
        )
    block = n_sub * dt
    n_samples = int(math.floor(T / block + 1e-9))
    if n_samples < 1:
        raise ValueError(f"T={T} shorter than one sample interval {block}")

    n_snap = 0
    if snapshot_every is not None:
        n_snap = int(round(snapshot_every / block))
        if n_snap < 1 or abs(n_snap * block - snapshot_every) > 1e-9 * snapshot_every:
            raise ValueError(
                f"snapshot_every={snapshot_every} must be a whole multiple "
                f"of sample_every={sample_every}"
            )

    root = rng if rng is not None else RngStream(params.seed)
    streams = EventStreams.from_root(root)
    if state0 is not None:
        state = state0.copy()
    else:
        state = init_particles(params, init, root.derive("init"))

    counts = np.empty((n_samples + 1, 3), dtype=np.int64)
    counts[0] = state.counts()
    totals = StepReport()
    snapshots: list[ParticleState] = [state.copy()] if n_snap else []
    peak_state: ParticleState | None = state.copy() if track_peak else None
    peak_count = counts[0, 1]
    peak_time = 0.0

    for k in range(1, n_samples + 1):
        for _ in range(n_sub):
            state, rep = step(state, params, streams)
            totals = totals + rep
        counts[k] = state.counts()
        if n_snap and k % n_snap == 0:
            snapshots.append(state.copy())
        if track_peak and counts[k, 1] > peak_count:
            peak_count = counts[k, 1]
            peak_state = state.copy()
            peak_time = k * block

    times = np.arange(n_samples + 1) * block
    N = params.N
    series = FractionSeries(
        times, counts[:, 0] / N, counts[:, 1] / N, counts[:, 2] / N, counts=counts
    )
    return ParticleRun(
        series,
        totals,
        snapshots,
        peak_state if track_peak else None,
        peak_time if track_peak else None,
    )
