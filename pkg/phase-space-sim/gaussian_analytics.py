#!/usr/bin/env python3
"""
Closed-form second-moment dynamics of Gaussian states under continuous
phase-space measurement with H = 0, plus the position-only, momentum-only and
free-particle cases. These are the analytic references for trajectory ensembles.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from integrators import rk4_step, step_count

UNCERTAINTY_TOLERANCE = 1e-12
TANH_SATURATION = 350.0


@dataclass(frozen=True)
class GaussianMoments:
    Vx: float
    Vp: float
    Cxp: float
    hbar: Optional[float] = None

    def __post_init__(self):
        if self.Vx < 0 or self.Vp < 0:
            raise ValueError(f"variances must be non-negative, got ({self.Vx}, {self.Vp})")
        if self.hbar is not None and not self.is_physical(self.hbar):
            raise ValueError(
                f"moments ({self.Vx}, {self.Vp}, {self.Cxp}) violate the "
                f"uncertainty bound hbar^2/4 for hbar={self.hbar}"
            )

    def determinant(self) -> float:
        return self.Vx * self.Vp - self.Cxp**2

    def is_physical(self, hbar: float, tol: float = UNCERTAINTY_TOLERANCE) -> bool:
        return self.determinant() >= hbar**2 / 4.0 - tol

    def as_array(self) -> np.ndarray:
        return np.array([self.Vx, self.Vp, self.Cxp], dtype=float)

    @classmethod
    def from_array(cls, values, hbar: Optional[float] = None) -> "GaussianMoments":
        return cls(float(values[0]), float(values[1]), float(values[2]), hbar)

    @property
    def total_variance(self) -> float:
        return self.Vx + self.Vp


def coherent_moments(hbar: float, s: float = 1.0) -> GaussianMoments:
    return GaussianMoments(hbar / (2.0 * s), s * hbar / 2.0, 0.0)


def measurement_rhs(
    m: GaussianMoments, Gamma1: float, Gamma2: float, hbar: float
) -> Tuple[float, float, float]:
    """Moment derivatives for H = 0 with independent position and momentum rates."""
    dvx = Gamma2 * hbar - 4.0 * Gamma1 * m.Vx**2 / hbar - 4.0 * Gamma2 * m.Cxp**2 / hbar
    dvp = Gamma1 * hbar - 4.0 * Gamma2 * m.Vp**2 / hbar - 4.0 * Gamma1 * m.Cxp**2 / hbar
    dc = -4.0 * m.Cxp * (Gamma1 * m.Vx + Gamma2 * m.Vp) / hbar
    return dvx, dvp, dc


def moments_ode_rhs(
    m: GaussianMoments, gamma: float, s: float, hbar: float
) -> Tuple[float, float, float]:
    """
    Joint-measurement moment equations.

    Args:
        m: current moments
        gamma: measurement rate, Gamma1 = gamma s and Gamma2 = gamma / s
        s: squeezing parameter
        hbar: action unit

    Returns:
        (dVx/dt, dVp/dt, dCxp/dt)
    """
    return measurement_rhs(m, gamma * s, gamma / s, hbar)


def _saturated(rate_time: float) -> bool:
    return rate_time > TANH_SATURATION


def moments_closed_form(
    m0: GaussianMoments, gamma: float, s: float, hbar: float, t: float
) -> GaussianMoments:
    """
    Exact solution of moments_ode_rhs from m0.

    Args:
        m0: moments at t = 0
        gamma, s, hbar: as in moments_ode_rhs
        t: elapsed time, t >= 0

    Returns:
        GaussianMoments at time t; the coherent fixed point once 2 gamma t
        exceeds the tanh saturation guard.
    """
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    if t == 0 or gamma == 0:
        return GaussianMoments(m0.Vx, m0.Vp, m0.Cxp)
    if _saturated(2.0 * gamma * t):
        return coherent_moments(hbar, s)

    th = np.tanh(2.0 * gamma * t)
    sech2 = 1.0 / np.cosh(2.0 * gamma * t) ** 2
    vx0, vp0, c0 = m0.Vx, m0.Vp, m0.Cxp
    denominator = (hbar + 2.0 * s * vx0 * th) * (s * hbar + 2.0 * vp0 * th) - (
        4.0 * s * c0**2 * th**2
    )
    vx = (
        hbar
        / (2.0 * s)
        * (
            (2.0 * s * vx0 + hbar * th) * (s * hbar + 2.0 * vp0 * th)
            - 4.0 * s * c0**2 * th
        )
        / denominator
    )
    vp = (
        s
        * hbar
        / 2.0
        * (
            (2.0 * vp0 + s * hbar * th) * (hbar + 2.0 * s * vx0 * th)
            - 4.0 * s * c0**2 * th
        )
        / denominator
    )
    cxp = s * hbar**2 * c0 * sech2 / denominator
    return GaussianMoments(float(vx), float(vp), float(cxp))


def position_only_closed_form(
    m0: GaussianMoments, Gamma1: float, hbar: float, t: float
) -> GaussianMoments:
    """Gamma2 = 0: position variance shrinks, momentum variance heats without bound."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    shrink = hbar + 4.0 * m0.Vx * Gamma1 * t
    return GaussianMoments(
        hbar * m0.Vx / shrink,
        m0.Vp + hbar * Gamma1 * t - 4.0 * m0.Cxp**2 * Gamma1 * t / shrink,
        hbar * m0.Cxp / shrink,
    )


def momentum_only_closed_form(
    m0: GaussianMoments, Gamma2: float, hbar: float, t: float
) -> GaussianMoments:
    """Mirror of position_only_closed_form with the roles of x and p exchanged."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    shrink = hbar + 4.0 * m0.Vp * Gamma2 * t
    return GaussianMoments(
        m0.Vx + hbar * Gamma2 * t - 4.0 * m0.Cxp**2 * Gamma2 * t / shrink,
        hbar * m0.Vp / shrink,
        hbar * m0.Cxp / shrink,
    )


def free_particle_rhs(
    m: GaussianMoments, a: float, Gamma1: float, hbar: float, Gamma2: float = 0.0
) -> Tuple[float, float, float]:
    """Moment equations for H = a p^2 under measurement."""
    dvx, dvp, dc = measurement_rhs(m, Gamma1, Gamma2, hbar)
    return dvx + 4.0 * a * m.Cxp, dvp, dc + 2.0 * a * m.Vp


def free_particle_fixed_point(a: float, Gamma1: float, hbar: float) -> GaussianMoments:
    """Attracting fixed point of free_particle_rhs with Gamma2 = 0."""
    if not a > 0:
        raise ValueError(f"kinetic coefficient a must be positive, got {a}")
    if not Gamma1 > 0:
        raise ValueError(f"Gamma1 must be positive, got {Gamma1}")
    return GaussianMoments(
        np.sqrt(a / (2.0 * Gamma1)) * hbar,
        np.sqrt(Gamma1 / (2.0 * a)) * hbar,
        hbar / 2.0,
    )


MomentRHS = Callable[[GaussianMoments], Tuple[float, float, float]]


def integrate_moments(
    rhs: MomentRHS, m0: GaussianMoments, dt: float, t_final: float
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Fixed-step RK4 integration of a moment flow.

    Returns (times, values) with values[k] = (Vx, Vp, Cxp) at times[k].
    """
    steps = step_count(dt, t_final)

    def flow(_t, y):
        return np.asarray(rhs(GaussianMoments.from_array(y)))

    values = np.empty((steps + 1, 3))
    values[0] = m0.as_array()
    y = values[0]
    for k in range(steps):
        y = rk4_step(flow, k * dt, y, dt)
        values[k + 1] = y
    return dt * np.arange(steps + 1), values
