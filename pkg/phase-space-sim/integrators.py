#!/usr/bin/env python3
"""
Fixed-step fourth-order Runge-Kutta stepping shared by the deterministic solvers
"""

from typing import Callable

import numpy as np

RHS = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(rhs: RHS, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """Advance y(t) to y(t + dt); y may be any array shape rhs accepts."""
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_count(dt: float, t_final: float) -> int:
    """Number of dt steps spanning [0, t_final]; t_final must be a multiple of dt."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_final < 0:
        raise ValueError(f"t_final must be non-negative, got {t_final}")
    steps = int(round(t_final / dt))
    if abs(steps * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ValueError(f"t_final={t_final} is not a whole number of dt={dt} steps")
    return steps
