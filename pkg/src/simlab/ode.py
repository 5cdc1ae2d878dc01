"""SIR/SIRS mean-field reduction: vector field, RK4 integrator, asymptotics.

The homogeneous limit of the spatial models:

    dS/dt = -beta * I * S + mu * R
    dI/dt =  beta * I * S - gamma * I
    dR/dt =  gamma * I    - mu * R

with beta = lam * pi * R0^2 / D^2.  mu = 0 gives plain SIR, for which the
final size S_inf solves y * exp(-y) = S0 * r * exp(-r) with y = r * S_inf
and r = beta / gamma.
"""

from __future__ import annotations

import math

import numpy as np

from .core import FractionSeries


def sir_rhs(s: float, i: float, r: float, beta: float, gamma: float, mu: float = 0.0):
    """Time derivative of the fractions; components sum to zero identically."""
    infection = beta * i * s
    recovery = gamma * i
    relapse = mu * r
    return (-infection + relapse, infection - recovery, recovery - relapse)


def integrate_sir(
    s0: float,
    i0: float,
    r0: float,
    beta: float,
    gamma: float,
    T: float,
    h: float,
    mu: float = 0.0,
) -> FractionSeries:
    """Integrate the SIR/SIRS system with classical RK4 at fixed step h.

    Samples are stored at every step, t_k = k * h for k = 0..round(T/h).
    The three fractions sum to 1 up to rounding at every step because each
    RK4 increment is built from a zero-sum vector field.

    Args:
        s0, i0, r0: initial fractions, nonnegative, summing to 1.
        beta, gamma, mu: rates, nonnegative.
        T: final time, >= h.
        h: step size, > 0.

    Returns:
        FractionSeries over the uniform step grid.
    """
    if h <= 0:
        raise ValueError(f"step size must be positive, got h={h}")
    if T < h:
        raise ValueError(f"T={T} must be at least one step h={h}")
    if min(s0, i0, r0) < 0 or abs(s0 + i0 + r0 - 1.0) > 1e-12:
        raise ValueError("initial fractions must be nonnegative and sum to 1")
    if min(beta, gamma, mu) < 0:
        raise ValueError("rates must be nonnegative")

    n_steps = int(round(T / h))
    s, i, r = float(s0), float(i0), float(r0)
    out = np.empty((n_steps + 1, 3))
    out[0] = (s, i, r)
    for k in range(n_steps):
        k1 = sir_rhs(s, i, r, beta, gamma, mu)
        k2 = sir_rhs(s + 0.5 * h * k1[0], i + 0.5 * h * k1[1], r + 0.5 * h * k1[2],
                     beta, gamma, mu)
        k3 = sir_rhs(s + 0.5 * h * k2[0], i + 0.5 * h * k2[1], r + 0.5 * h * k2[2],
                     beta, gamma, mu)
        k4 = sir_rhs(s + h * k3[0], i + h * k3[1], r + h * k3[2], beta, gamma, mu)
        s += (h / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        i += (h / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        r += (h / 6.0) * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        out[k + 1] = (s, i, r)

    times = np.arange(n_steps + 1) * h
    return FractionSeries(times, out[:, 0], out[:, 1], out[:, 2])


def s_infinity(r: float, s0: float, i0: float) -> float:
    """Final susceptible fraction of the SIR model (mu = 0, R(0) = 0).

    Solves y * exp(-y) = s0 * r * exp(-r) for the root y in (0, 1] reached
    by the epidemic (the final state sits below the threshold S = 1/r) by
    bisection to interval width 1e-12, then returns S_inf = y / r.

    Args:
        r: basic ratio beta / gamma, > 0.
        s0, i0: initial fractions with s0 + i0 = 1 (R(0) = 0 required).

    Returns:
        S_inf in (0, s0].
    """
    if r <= 0:
        raise ValueError(f"r must be positive, got {r}")
    if min(s0, i0) < 0 or abs(s0 + i0 - 1.0) > 1e-12:
        raise ValueError("s_infinity requires R(0) = 0, i.e. s0 + i0 = 1")
    if i0 == 0.0:
        # no epidemic: S never moves
        return s0

    rhs = s0 * r * math.exp(-r)
    lo, hi = 0.0, 1.0
    # y * exp(-y) is increasing on (0, 1] and rhs < 1/e, so the bracket holds
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if mid * math.exp(-mid) < rhs:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) / r


def delta_integral(series: FractionSeries) -> float:
    """Trapezoid integral of I over the whole series.

    Requires the epidemic to have burnt out: I at the final sample must be
    below 1e-8, otherwise the integral is not a converged surrogate for the
    improper integral and a ValueError is raised.
    """
    if len(series) < 2:
        raise ValueError("delta_integral needs at least two samples")
    if series.i[-1] >= 1e-8:
        raise ValueError(
            f"I has not burnt out by the series end: I(T)={series.i[-1]:.3g} >= 1e-8"
        )
    return float(np.trapezoid(series.i, series.times))
