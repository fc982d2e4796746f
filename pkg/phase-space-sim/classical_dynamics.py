#!/usr/bin/env python3
"""
Classical trajectories of H = a p^2 + b x^2 + c x^4 + d x cos(omega t).

Points are arrays whose last axis is (x, p), so a batch of seeds steps
together through the same RK4 loop.
"""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy.spatial import cKDTree

from integrators import rk4_step, step_count

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e6
CHAOTIC_SPREAD = 0.5


class DivergenceError(ArithmeticError):
    def __init__(self, message: str, time: Optional[float] = None):
        super().__init__(message)
        self.time = time


@dataclass(frozen=True)
class DrivenHamiltonianParams:
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        values = (self.a, self.b, self.c, self.d, self.omega)
        if not all(np.isfinite(v) for v in values):
            raise ValueError(f"Hamiltonian coefficients must be finite, got {values}")
        if self.c < 0:
            logger.warning("quartic coefficient c=%g < 0: potential is not confining", self.c)

    def drive(self, t: float) -> float:
        return self.d * np.cos(self.omega * t)

    @property
    def is_autonomous(self) -> bool:
        return self.d == 0.0

    def potential(self, x, t: float = 0.0):
        return self.b * x**2 + self.c * x**4 + self.drive(t) * x

    def energy(self, x, p, t: float = 0.0):
        return self.a * p**2 + self.potential(x, t)


@dataclass(frozen=True)
class PhasePoint:
    x: float
    p: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.p)):
            raise ValueError(f"phase point must be finite, got ({self.x}, {self.p})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.p], dtype=float)


PointLike = Union[PhasePoint, Sequence[float], np.ndarray]


def _as_points(pt: PointLike) -> np.ndarray:
    if isinstance(pt, PhasePoint):
        return pt.as_array()
    if isinstance(pt, (list, tuple)) and pt and isinstance(pt[0], PhasePoint):
        return np.array([q.as_array() for q in pt])
    return np.asarray(pt, dtype=float)


class ClassicalTrajectory(NamedTuple):
    times: np.ndarray
    x: np.ndarray
    p: np.ndarray

    def point(self, k: int) -> PhasePoint:
        return PhasePoint(float(self.x[k]), float(self.p[k]))


class TwinSeparation(NamedTuple):
    times: np.ndarray
    distance: np.ndarray


def hamilton_rhs(pt: PointLike, params: DrivenHamiltonianParams, t: float) -> np.ndarray:
    """(dx/dt, dp/dt) = (dH/dp, -dH/dx)."""
    y = _as_points(pt)
    x = y[..., 0]
    p = y[..., 1]
    dx = 2.0 * params.a * p
    dp = -(2.0 * params.b * x + 4.0 * params.c * x**3 + params.drive(t))
    return np.stack([dx, dp], axis=-1)


def energy(pt: PointLike, params: DrivenHamiltonianParams, t: float = 0.0):
    y = _as_points(pt)
    return params.energy(y[..., 0], y[..., 1], t)


def _check_divergence(y: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > DIVERGENCE_LIMIT:
        raise DivergenceError(
            f"classical trajectory left |x|, |p| <= {DIVERGENCE_LIMIT:g} at t={t:.6g}", t
        )


def _advance(y: np.ndarray, params, t0: float, dt: float, steps: int) -> np.ndarray:
    def rhs(t, state):
        return hamilton_rhs(state, params, t)

    for k in range(steps):
        y = rk4_step(rhs, t0 + k * dt, y, dt)
        _check_divergence(y, t0 + (k + 1) * dt)
    return y


def integrate_classical(
    pt0: PointLike,
    params: DrivenHamiltonianParams,
    dt: float,
    t_final: float,
    t0: float = 0.0,
    stride: int = 1,
) -> ClassicalTrajectory:
    """
    Fixed-step RK4 trajectory from pt0, sampled every `stride` steps.

    Raises:
        DivergenceError: |x| or |p| exceeded the divergence limit
    """
    steps = step_count(dt, t_final)
    y = _as_points(pt0)
    rows = [y]
    times = [t0]
    for k in range(0, steps, stride):
        chunk = min(stride, steps - k)
        y = _advance(y, params, t0 + k * dt, dt, chunk)
        rows.append(y)
        times.append(t0 + (k + chunk) * dt)
    rows = np.array(rows)
    return ClassicalTrajectory(np.array(times), rows[..., 0], rows[..., 1])


def poincare_map(
    seeds: PointLike,
    params: DrivenHamiltonianParams,
    period: float,
    n_strobes: int,
    dt: float = 1e-3,
) -> np.ndarray:
    """
    Strobe each seed at t = k * period, k = 1..n_strobes.

    Returns an array of shape (n_seeds, n_strobes, 2).
    """
    if not period > 0:
        raise ValueError(f"strobe period must be positive, got {period}")
    steps = step_count(dt, period)
    y = np.atleast_2d(_as_points(seeds))
    strobes = np.empty((y.shape[0], n_strobes, 2))
    for k in range(n_strobes):
        y = _advance(y, params, k * period, dt, steps)
        strobes[:, k] = y
    logger.debug("strobed %d seeds %d times", y.shape[0], n_strobes)
    return strobes


def twin_separation(
    pt0: PointLike,
    params: DrivenHamiltonianParams,
    offset: float,
    dt: float,
    t_final: float,
    stride: int = 100,
) -> "TwinSeparation":
    """Phase-space distance between the runs from pt0 and pt0 + (offset, 0)."""
    start = _as_points(pt0)
    pair = np.stack([start, start + np.array([offset, 0.0])])
    run = integrate_classical(pair, params, dt, t_final, stride=stride)
    sep = np.hypot(run.x[:, 1] - run.x[:, 0], run.p[:, 1] - run.p[:, 0])
    return TwinSeparation(run.times, sep)


def nearest_neighbor_spread(points: np.ndarray) -> float:
    """
    Mean nearest-neighbour distance relative to that of uniform points.

    Close to 1 for points scattered over their bounding box, small for
    points confined to a curve.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = pts.shape[0]
    if n < 3:
        raise ValueError("need at least 3 points to measure spread")
    extent = pts.max(axis=0) - pts.min(axis=0)
    area = float(np.prod(extent))
    if area <= 0:
        return 0.0
    distances, _ = cKDTree(pts).query(pts, k=2)
    return float(np.mean(distances[:, 1]) / (0.5 * np.sqrt(area / n)))


def classify_orbit(points: np.ndarray, threshold: float = CHAOTIC_SPREAD) -> str:
    return "chaotic" if nearest_neighbor_spread(points) > threshold else "regular"


def classify_seeds(strobes: np.ndarray, threshold: float = CHAOTIC_SPREAD) -> List[str]:
    return [classify_orbit(orbit, threshold) for orbit in strobes]
