"""Empirical probes of the limiting behaviour of the particle models.

Three groups of tools:

* pair_correlation_index: a label-correlation index at interaction range.
  chi ~ 1 means labels look independently assigned given the coarse spatial
  profile (the factorization the mean-field limit predicts); chi < 1 means
  neighbouring {I,S} pairs are depleted, chi > 1 means they are enriched.
* tv_to_uniform / fit_decay_rate: total-variation distance of the empirical
  phase-space distribution to uniform, and an exponential-rate fit, for
  checking relaxation of the label-free motion.
* epidemic_summary: peak/terminal numbers of a completed epidemic plus the
  conservation residual |R_end - R_0 - gamma * integral(I)|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import TWO_PI, Label, ParticleState, FractionSeries
from .particle import build_index, query_ball

__all__ = [
    "ChaosReport",
    "MixingReport",
    "EpidemicSummary",
    "pair_correlation_index",
    "tv_to_uniform",
    "fit_decay_rate",
    "epidemic_summary",
]


# ── label-correlation index ─────────────────────────────────────────────────


@dataclass(frozen=True)
class ChaosReport:
    """Observed vs baseline {I,S} close-pair counts at one time.

    observed: exact number of unordered {I,S} pairs closer than the
        interaction radius.
    baseline: expected number if labels were assigned independently given
        the cell-level spatial profile.
    chi: observed / baseline (0 when no close pair is observed).
    """

    time: float
    observed: int
    baseline: float
    chi: float


@lru_cache(maxsize=32)
def _pair_probability(cell: float, R0: float, D: float) -> tuple[float, float, float]:
    """P(two uniform points in cells at a given offset are closer than R0).

    Returns probabilities for the three cell-offset geometry classes
    (same cell, edge neighbours, diagonal neighbours), estimated with a
    fixed low-discrepancy point set of 2^14 nodes per class.  Offsets
    beyond one cell cannot contribute: the cell side is at least R0.
    """
    from scipy.stats import qmc

    u = qmc.Halton(d=4, scramble=False).random(2**14)
    a = u[:, :2] * cell
    out = []
    for off in ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0)):
        b = (u[:, 2:] + off) * cell
        d = a - b
        d -= D * np.round(d / D)
        inside = (d * d).sum(axis=1) < R0 * R0
        out.append(float(inside.mean()))
    return tuple(out)


def pair_correlation_index(state: ParticleState, R0_radius: float, D: float) -> ChaosReport:
    """Label-correlation index chi = O / B at the interaction radius.

    O is the exact count of unordered {I,S} pairs at min-image distance
    below R0_radius.  B is the count expected when labels are shuffled
    uniformly within the coarse spatial profile: the domain is split into
    the same grid of square cells the neighbour index uses (side >= R0),
    and B sums n_I(c1) * n_S(c2) * p(c1, c2) over ordered cell pairs,
    with p the two-uniform-points probability from _pair_probability.
    This keeps genuine density inhomogeneity (e.g. a concentrated patch)
    out of the index; only label placement relative to it is measured.

    Requires at least one I and one S, and a grid of at least 3 cells per
    axis (otherwise neighbour offsets alias and the baseline double
    counts).
    """
    counts = state.counts()
    if counts[Label.I] == 0 or counts[Label.S] == 0:
        raise ValueError("index undefined: need at least one I and one S")
    m = int(math.floor(D / R0_radius))
    if m < 3:
        raise ValueError(f"R0_radius={R0_radius} too large for baseline grid (D/R0 < 3)")

    index = build_index(state, R0_radius, D)
    labels = state.labels
    is_s = labels == Label.S
    observed = 0
    for i in np.nonzero(labels == Label.I)[0]:
        hits = query_ball(index, state.positions[i], R0_radius)
        observed += int(np.count_nonzero(is_s[hits]))

    cell = D / m
    ids = (
        np.floor(state.positions[:, 0] / cell).astype(np.int64) % m * m
        + np.floor(state.positions[:, 1] / cell).astype(np.int64) % m
    )
    n_i = np.bincount(ids[labels == Label.I], minlength=m * m).reshape(m, m).astype(float)
    n_s = np.bincount(ids[is_s], minlength=m * m).reshape(m, m).astype(float)

    p_same, p_edge, p_diag = _pair_probability(cell, R0_radius, D)
    baseline = p_same * float((n_i * n_s).sum())
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        baseline += p_edge * float((n_i * np.roll(n_s, (di, dj), axis=(0, 1))).sum())
    for di, dj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        baseline += p_diag * float((n_i * np.roll(n_s, (di, dj), axis=(0, 1))).sum())

    chi = 0.0 if observed == 0 else observed / baseline
    return ChaosReport(state.time, observed, baseline, chi)


# ── mixing to uniform ───────────────────────────────────────────────────────


@dataclass(frozen=True)
class MixingReport:
    """TV distance to uniform over a fixed (x, v) histogram, over time.

    rate is the least-squares exponential decay rate fitted on the samples
    above 3x the sampling floor sqrt(n_boxes/N)/2; it is nan when fewer
    than 3 samples clear the floor.
    """

    times: np.ndarray
    tv: np.ndarray
    bins: tuple[int, int, int]
    sampling_floor: float
    rate: float
    fit_points: int

    def eventually_decreasing(self) -> bool:
        """True if TV decays monotonically through its resolvable range.

        Checks the samples above 3x the sampling floor: from their maximum
        onward they must be strictly decreasing.  Samples at the floor are
        excluded; there the statistic has converged and jitters by
        sampling noise.
        """
        above = self.tv[self.tv > 3.0 * self.sampling_floor]
        if len(above) < 2:
            return False
        tail = above[int(np.argmax(above)) :]
        return len(tail) >= 2 and bool(np.all(np.diff(tail) < 0))


def _tv_of_state(state: ParticleState, bx: int, bv: int, D: float) -> float:
    ix = np.minimum((state.positions[:, 0] * (bx / D)).astype(np.int64), bx - 1)
    iy = np.minimum((state.positions[:, 1] * (bx / D)).astype(np.int64), bx - 1)
    iv = np.minimum((state.angles * (bv / TWO_PI)).astype(np.int64), bv - 1)
    flat = (ix * bx + iy) * bv + iv
    n_boxes = bx * bx * bv
    hist = np.bincount(flat, minlength=n_boxes)
    p = hist / state.n
    return 0.5 * float(np.abs(p - 1.0 / n_boxes).sum())


def tv_to_uniform(states, bins: tuple[int, int, int], D: float) -> MixingReport:
    """TV distance of each snapshot's (x1, x2, theta) histogram to uniform.

    Args:
        states: iterable of ParticleState (consumed once; a generator is
            fine), all with the same N.
        bins: (bx, bx, bv) box counts; at least 2 per axis, the two
            spatial counts equal.
        D: torus side.

    Returns:
        MixingReport with per-snapshot TV and the fitted decay rate over
        the window where TV exceeds 3x the sampling floor.
    """
    bx1, bx2, bv = bins
    if bx1 != bx2:
        raise ValueError(f"spatial bins must match, got {bx1} x {bx2}")
    if bx1 < 2 or bv < 2:
        raise ValueError("need at least 2 bins per axis")
    times = []
    tvs = []
    n = None
    for state in states:
        if state.n == 0:
            raise ValueError("empty state")
        if n is None:
            n = state.n
        elif state.n != n:
            raise ValueError("snapshots must share N")
        times.append(state.time)
        tvs.append(_tv_of_state(state, bx1, bv, D))
    if n is None:
        raise ValueError("no states supplied")
    times = np.asarray(times)
    tvs = np.asarray(tvs)

    floor = math.sqrt(bx1 * bx1 * bv / n) / 2.0
    mask = tvs > 3.0 * floor
    if mask.sum() >= 3:
        rate = fit_decay_rate(times[mask], tvs[mask])
        fit_points = int(mask.sum())
    else:
        rate = float("nan")
        fit_points = 0
    return MixingReport(times, tvs, (bx1, bx2, bv), floor, rate, fit_points)


def fit_decay_rate(times, values) -> float:
    """Exponential decay rate by least squares on log values.

    Fits log y = c - a t and returns a; exact decay e^{-at} is recovered
    exactly, noisy decay approximately.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("times and values must be 1-D and equal length")
    if len(t) < 3:
        raise ValueError(f"need at least 3 points, got {len(t)}")
    if np.any(y <= 0):
        raise ValueError("values must be positive for a log fit")
    slope = np.polyfit(t, np.log(y), 1)[0]
    return -float(slope)


# ── epidemic summaries ──────────────────────────────────────────────────────


@dataclass(frozen=True)
class EpidemicSummary:
    """Peak and terminal numbers of one completed epidemic run.

    delta_tilde is the time integral of the infected fraction; residual is
    |R_end - R_0 - gamma * delta_tilde|, which vanishes for exact dynamics
    since recovery is the only flow into R.
    """

    peak_i: float
    peak_time: float
    terminal_s: float
    terminal_r: float
    delta_tilde: float
    residual: float


def epidemic_summary(series: FractionSeries, gamma: float) -> EpidemicSummary:
    """Summarize a run whose infected population has died down.

    The run counts as extinct when the final infected count is zero
    (series with integer counts) or the final infected fraction is below
    1e-3 (continuum series); otherwise this raises.
    """
    if series.counts is not None:
        extinct = int(series.counts[-1, Label.I]) == 0
    else:
        extinct = series.i[-1] < 1e-3
    if not extinct:
        raise ValueError(
            f"epidemic not extinct by series end (I = {series.i[-1]:.3e})"
        )
    k = int(np.argmax(series.i))
    delta = float(np.trapezoid(series.i, series.times))
    residual = abs(float(series.r[-1]) - float(series.r[0]) - gamma * delta)
    return EpidemicSummary(
        peak_i=float(series.i[k]),
        peak_time=float(series.times[k]),
        terminal_s=float(series.s[-1]),
        terminal_r=float(series.r[-1]),
        delta_tilde=delta,
        residual=residual,
    )
