"""Torus geometry, model parameters, random streams, and initial conditions.

Shared foundation for the particle, kinetic, and ODE layers: a square 2-D
torus of side ``D``, unit-speed velocities parameterized by angle, S/I/R
labels, and deterministic tagged RNG sub-streams so that enabling or
disabling one event type never perturbs the draws of another.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

TWO_PI = 2.0 * math.pi


class Label(IntEnum):
    """Agent infection status. The order S < I < R is fixed for serialization."""

    S = 0
    I = 1
    R = 2


class Placement(str, Enum):
    """How initial labels are laid down over the uniformly placed agents."""

    HOMOGENEOUS = "homogeneous"
    CONCENTRATED_DISK = "concentrated-disk"


# ── torus geometry ──────────────────────────────────────────────────────────


def torus_wrap(p, D: float):
    """Wrap coordinates into the fundamental domain [0, D).

    Args:
        p: scalar or array of coordinates (any shape).
        D: side length of the torus, > 0.

    Returns:
        Array of the same shape with every coordinate in [0, D).
    """
    if D <= 0:
        raise ValueError(f"torus side must be positive, got D={D}")
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("non-finite coordinate passed to torus_wrap")
    out = np.mod(p, D)
    # np.mod(-tiny, D) rounds to exactly D; fold that back to 0
    return np.where(out == D, 0.0, out)


def torus_distance(p, q, D: float):
    """Minimum-image Euclidean distance between points on the torus.

    Accepts single points of shape (2,) or broadcastable arrays of shape
    (..., 2).  The result never exceeds D/sqrt(2).

    Args:
        p, q: points (last axis is the two coordinates).
        D: side length of the torus.

    Returns:
        Scalar or array of distances, shape of the broadcast minus the
        coordinate axis.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    delta = np.abs(p - q)
    delta = np.mod(delta, D)
    delta = np.minimum(delta, D - delta)
    return np.sqrt(np.sum(delta * delta, axis=-1))


def beta_from_params(lam: float, R0_radius: float, D: float) -> float:
    """Contact rate of the homogeneous reduction: beta = lam * pi * R0^2 / D^2."""
    return lam * math.pi * R0_radius * R0_radius / (D * D)


# ── parameters and initial data ─────────────────────────────────────────────


@dataclass(frozen=True)
class SimParams:
    """Physical and numerical parameters shared by every engine.

    Attributes:
        N: number of agents (>= 1).
        D: torus side length.
        lam: infection intensity lambda >= 0.
        gamma: recovery rate >= 0.
        R0_radius: infection radius; must satisfy 0 < R0_radius < D/2 so a
            ball never wraps onto itself under the minimum image.
        dt: step size > 0.
        seed: root seed for all streams of a run.
        mu: loss-of-immunity rate (SIRS); 0 recovers plain SIR.
    """

    N: int
    D: float
    lam: float
    gamma: float
    R0_radius: float
    dt: float
    seed: int
    mu: float = 0.0

    def __post_init__(self):
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 1):
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if self.D <= 0:
            raise ValueError(f"D must be positive, got {self.D}")
        if self.lam < 0 or self.gamma < 0 or self.mu < 0:
            raise ValueError("rates lam, gamma, mu must be nonnegative")
        if not (0 < self.R0_radius < self.D / 2):
            raise ValueError(
                f"R0_radius must lie in (0, D/2)={self.D / 2}, got {self.R0_radius}"
            )
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def beta(self) -> float:
        return beta_from_params(self.lam, self.R0_radius, self.D)


@dataclass(frozen=True)
class InitialData:
    """Initial label fractions and their spatial placement.

    s0 + i0 + r0 must equal 1 (within 1e-12).  The concentrated placement
    labels I every agent inside the disk of area i0 * D^2 centered at the
    domain midpoint and requires r0 = 0.
    """

    s0: float
    i0: float
    r0: float = 0.0
    placement: Placement = Placement.HOMOGENEOUS

    def __post_init__(self):
        if min(self.s0, self.i0, self.r0) < 0:
            raise ValueError("initial fractions must be nonnegative")
        total = self.s0 + self.i0 + self.r0
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"initial fractions must sum to 1, got {total}")
        if self.placement == Placement.CONCENTRATED_DISK and self.r0 != 0.0:
            raise ValueError("concentrated-disk placement requires r0 = 0")


# ── deterministic tagged random streams ─────────────────────────────────────


def _tag_key(tag: str) -> int:
    # crc32 keeps the spawn key stable across platforms and interpreter runs
    return zlib.crc32(tag.encode("utf-8"))


class RngStream:
    """A named, reproducible PCG64 stream derived from one root seed.

    Sub-streams are derived by tag (`derive("motion")`, ...), so each event
    subsystem consumes its own independent sequence: switching one subsystem
    off leaves every other stream's draws untouched.
    """

    def __init__(self, seed: int, tags: tuple[str, ...] = ()):
        self.seed = int(seed)
        self.tags = tuple(tags)
        key = tuple(_tag_key(t) for t in self.tags)
        self.gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=self.seed, spawn_key=key))
        )

    def derive(self, tag: str) -> "RngStream":
        """Child stream with an appended tag; deterministic in (seed, tags)."""
        return RngStream(self.seed, self.tags + (tag,))

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"RngStream(seed={self.seed}, tags={self.tags})"


# ── particles ───────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Particle:
    """One agent: wrapped position, velocity direction, and label.

    The velocity vector is always derived from the angle so its speed is
    exactly 1; it is never stored and cannot drift.
    """

    position: tuple[float, float]
    angle: float
    label: Label

    @property
    def velocity(self) -> tuple[float, float]:
        return (math.cos(self.angle), math.sin(self.angle))


@dataclass
class ParticleState:
    """State of all N agents at one time, stored as flat arrays.

    positions has shape (N, 2) with entries in [0, D); angles has shape (N,);
    labels has shape (N,) holding Label values as int8.
    """

    time: float
    positions: np.ndarray
    angles: np.ndarray
    labels: np.ndarray

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def counts(self) -> np.ndarray:
        """Label counts (nS, nI, nR); always sums to N."""
        return np.bincount(self.labels, minlength=3)[:3]

    def fractions(self) -> tuple[float, float, float]:
        c = self.counts()
        return (c[0] / self.n, c[1] / self.n, c[2] / self.n)

    def copy(self) -> "ParticleState":
        return ParticleState(
            self.time, self.positions.copy(), self.angles.copy(), self.labels.copy()
        )

    def particle(self, idx: int) -> Particle:
        return Particle(
            (float(self.positions[idx, 0]), float(self.positions[idx, 1])),
            float(self.angles[idx]),
            Label(int(self.labels[idx])),
        )

    @classmethod
    def from_particles(cls, particles, time: float = 0.0) -> "ParticleState":
        particles = list(particles)
        pos = np.array([p.position for p in particles], dtype=float).reshape(-1, 2)
        ang = np.array([p.angle for p in particles], dtype=float)
        lab = np.array([int(p.label) for p in particles], dtype=np.int8)
        return cls(time, pos, ang, lab)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def init_particles(params: SimParams, init: InitialData, rng: RngStream) -> ParticleState:
    """Draw the initial agent configuration.

    Positions are i.i.d. uniform on the torus and angles i.i.d. uniform on
    [0, 2*pi) regardless of placement.  Homogeneous placement labels exactly
    round-half-up(N * i0) agents I and round-half-up(N * r0) agents R, chosen
    uniformly without replacement.  Concentrated placement labels I every
    agent inside the disk of radius sqrt(i0 * D^2 / pi) centered at
    (D/2, D/2).

    Args:
        params: simulation parameters (N, D used here).
        init: initial fractions and placement.
        rng: stream consumed in the fixed order positions, angles, labels.

    Returns:
        ParticleState at time 0.
    """
    N, D = params.N, params.D
    g = rng.gen
    positions = g.uniform(0.0, D, size=(N, 2))
    angles = g.uniform(0.0, TWO_PI, size=N)
    labels = np.zeros(N, dtype=np.int8)

    if init.placement == Placement.HOMOGENEOUS:
        n_i = _round_half_up(N * init.i0)
        n_r = _round_half_up(N * init.r0)
        if n_i + n_r > N:
            raise ValueError(
                f"rounded label counts exceed N: {n_i} + {n_r} > {N}"
            )
        chosen = g.permutation(N)[: n_i + n_r]
        labels[chosen[:n_i]] = Label.I
        labels[chosen[n_i:]] = Label.R
    else:
        radius = math.sqrt(init.i0 * D * D / math.pi)
        if radius >= D / 2:
            raise ValueError(
                f"concentrated disk radius {radius:.3g} must be < D/2 = {D / 2}"
            )
        center = np.array([D / 2, D / 2])
        inside = torus_distance(positions, center, D) < radius
        labels[inside] = Label.I

    return ParticleState(0.0, positions, angles, labels)


# ── time series of label fractions ──────────────────────────────────────────


@dataclass
class FractionSeries:
    """Sampled (t, S, I, R) fractions of one run.

    counts carries the exact integer label counts for particle runs (shape
    (n_samples, 3)); it is None for ODE and kinetic runs.
    """

    times: np.ndarray
    s: np.ndarray
    i: np.ndarray
    r: np.ndarray
    counts: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        self.i = np.asarray(self.i, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        n = len(self.times)
        if not (len(self.s) == len(self.i) == len(self.r) == n):
            raise ValueError("fraction arrays must share the times length")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("sample times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def stacked(self) -> np.ndarray:
        """Fractions as one (n_samples, 3) array in S, I, R order."""
        return np.column_stack([self.s, self.i, self.r])
