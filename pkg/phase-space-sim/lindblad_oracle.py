#!/usr/bin/env python3
"""
Unconditional master equation for continuous joint measurement:

    d rho/dt = -(i/h)[H, rho] - (Gamma1/2h)[x,[x,rho]] - (Gamma2/2h)[p,[p,rho]]

which equals -(i/h)[H, rho] - gamma [a,[a^dag, rho]] when Gamma1 = gamma s and
Gamma2 = gamma / s. Integrated with fixed-step RK4 on the dense matrix, optionally
split into substeps sized from a Gershgorin bound on the generator.
"""

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import numpy as np
from scipy import sparse
from scipy.linalg import eigvalsh

from fock_core import (
    DensityMatrix,
    DimensionMismatchError,
    FrameCenter,
    LadderOps,
    PhaseSpaceMoments,
    SimulationError,
)
from integrators import rk4_step, step_count
from sse_integrator import DrivenHamiltonianParams, MeasurementRates, build_hamiltonian

logger = logging.getLogger(__name__)

TRACE_TOLERANCE = 1e-8
POSITIVITY_TOLERANCE = 1e-8


class StepTooLargeError(SimulationError):
    def __init__(self, message: str, time: Optional[float] = None):
        super().__init__(message)
        self.time = time


def _commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


@dataclass
class LindbladGenerator:
    """
    Master-equation right-hand side. Every operator involved is banded in the
    number basis (H is at most nine-diagonal), so products with rho go through
    scipy.sparse and cost O(N^2) rather than O(N^3).
    """

    params: DrivenHamiltonianParams
    rates: MeasurementRates
    ladder: LadderOps

    def __post_init__(self):
        self.x_sq = self.ladder.x @ self.ladder.x
        self.p_sq = self.ladder.p @ self.ladder.p
        self._x = sparse.csr_matrix(self.ladder.x)
        self._p = sparse.csr_matrix(self.ladder.p)
        self._x_sq = sparse.csr_matrix(self.x_sq)
        self._p_sq = sparse.csr_matrix(self.p_sq)
        self._x_eig = eigvalsh(self.ladder.x)
        self._p_eig = eigvalsh(self.ladder.p)
        self._eye = sparse.identity(self.ladder.n_max + 1, dtype=complex, format="csr")
        self._static_frame = None
        self._static_h = None
        self._static_sparse = None

    def _static(self, frame: FrameCenter):
        if frame != self._static_frame:
            undriven = DrivenHamiltonianParams(
                self.params.a, self.params.b, self.params.c, 0.0, self.params.omega
            )
            self._static_h = build_hamiltonian(undriven, 0.0, self.ladder, frame)
            self._static_sparse = sparse.csr_matrix(self._static_h)
            self._static_frame = frame
        return self._static_h, self._static_sparse

    def hamiltonian(self, t: float, frame: FrameCenter) -> np.ndarray:
        static, _ = self._static(frame)
        if self.params.d == 0.0:
            return static
        eye = np.eye(self.ladder.n_max + 1)
        return static + self.params.drive(t) * (self.ladder.x + frame.x0 * eye)

    def _sparse_hamiltonian(self, t: float, frame: FrameCenter):
        _, static = self._static(frame)
        if self.params.d == 0.0:
            return static
        return static + self.params.drive(t) * (self._x + frame.x0 * self._eye)

    def _double_commutator(self, op, op_t, op_sq, rho):
        # rho @ op = (op^T @ rho^T)^T keeps every product sparse-times-dense
        return op_sq @ rho - 2.0 * (op @ (op_t @ rho.T).T) + (op_sq @ rho.T).T

    def rhs_matrix(self, mat: np.ndarray, t: float, frame: FrameCenter) -> np.ndarray:
        if mat.shape != self.x_sq.shape:
            raise DimensionMismatchError(
                f"density matrix {mat.shape} does not match generator {self.x_sq.shape}"
            )
        hbar = self.ladder.hs.hbar
        h = self._sparse_hamiltonian(t, frame)
        # H is Hermitian, so H^T = conj(H)
        out = -1j / hbar * (h @ mat - (h.conj() @ mat.T).T)
        if self.rates.Gamma1 > 0:
            out -= self.rates.Gamma1 / (2.0 * hbar) * self._double_commutator(
                self._x, self._x, self._x_sq, mat
            )
        if self.rates.Gamma2 > 0:
            out -= self.rates.Gamma2 / (2.0 * hbar) * self._double_commutator(
                self._p, self._p.conj(), self._p_sq, mat
            )
        return out

    def stable_substeps(self, dt: float, frame: FrameCenter) -> int:
        """RK4 substeps per dt keeping dt_sub times the spectral radius below 2."""
        hbar = self.ladder.hs.hbar
        static, _ = self._static(frame)
        energies = eigvalsh(static)
        drive = abs(self.params.d) * np.max(np.abs(self._x_eig + frame.x0))
        radius = (energies[-1] - energies[0] + 2.0 * drive) / hbar
        # [x,[x, .]] has eigenvalues (x_i - x_j)^2
        radius += self.rates.Gamma1 / (2.0 * hbar) * (2.0 * np.max(np.abs(self._x_eig))) ** 2
        radius += self.rates.Gamma2 / (2.0 * hbar) * (2.0 * np.max(np.abs(self._p_eig))) ** 2
        return max(1, int(np.ceil(dt * radius / 2.0)))


def lindblad_rhs(rho: DensityMatrix, gen: LindbladGenerator, t: float) -> np.ndarray:
    """Right-hand side of the master equation for rho at time t."""
    return gen.rhs_matrix(rho.mat, t, rho.frame)


def ladder_form_rhs(
    rho: DensityMatrix, H: np.ndarray, gamma: float, ladder: LadderOps
) -> np.ndarray:
    """-(i/h)[H, rho] - gamma [a,[a^dag, rho]]; matches lindblad_rhs below the top level."""
    double = _commutator(ladder.a, _commutator(ladder.adag, rho.mat))
    return -1j / ladder.hs.hbar * _commutator(H, rho.mat) - gamma * double


def moments_from_density(rho: DensityMatrix, ladder: LadderOps) -> PhaseSpaceMoments:
    mat = rho.mat
    x, p = ladder.x, ladder.p
    mx = float(np.real(np.trace(x @ mat)))
    mp = float(np.real(np.trace(p @ mat)))
    vx = float(np.real(np.trace(x @ x @ mat))) - mx**2
    vp = float(np.real(np.trace(p @ p @ mat))) - mp**2
    sym = 0.5 * (x @ p + p @ x)
    cxp = float(np.real(np.trace(sym @ mat))) - mx * mp
    return PhaseSpaceMoments(mx + rho.frame.x0, mp + rho.frame.p0, vx, vp, cxp)


class LindbladSeries(NamedTuple):
    times: np.ndarray
    states: List[DensityMatrix]

    def moments(self, ladder: LadderOps) -> np.ndarray:
        return np.array([tuple(moments_from_density(r, ladder)) for r in self.states])

    def purity(self) -> np.ndarray:
        return np.array([r.purity() for r in self.states])

    def at(self, t: float) -> DensityMatrix:
        return self.states[int(np.argmin(np.abs(self.times - t)))]


def _monitor(mat: np.ndarray, t: float) -> None:
    trace_error = abs(np.trace(mat) - 1.0)
    if not trace_error <= TRACE_TOLERANCE:
        raise StepTooLargeError(f"trace drifted by {trace_error:.3e} at t={t:.6g}", t)
    herm = 0.5 * (mat + mat.conj().T)
    smallest = float(np.linalg.eigvalsh(herm)[0])
    if smallest < -POSITIVITY_TOLERANCE:
        raise StepTooLargeError(
            f"density matrix eigenvalue {smallest:.3e} < 0 at t={t:.6g}", t
        )


def propagate(
    rho0: DensityMatrix,
    gen: LindbladGenerator,
    dt: float,
    t_final: float,
    sample_every: int = 1,
    monitor_every: int = 10,
    recenter_threshold: Optional[float] = None,
    substeps: Optional[int] = 1,
) -> LindbladSeries:
    """
    Integrate from rho0 to t_final, keeping every `sample_every`-th state.

    With recenter_threshold set, the basis follows (<x>, <p>) whenever
    |<a_local>| exceeds it (checked at monitor steps). Each dt is split into
    `substeps` RK4 steps; None sizes them from the generator for every frame.

    Raises:
        StepTooLargeError: trace or positivity monitor tripped
    """
    steps = step_count(dt, t_final)
    rho = rho0
    frame = rho.frame
    mat = rho.mat
    times = [0.0]
    states = [rho0]

    def rhs(t, m):
        return gen.rhs_matrix(m, t, frame)

    def split(current):
        return substeps if substeps is not None else gen.stable_substeps(dt, current)

    n_sub = split(frame)
    if n_sub > 1:
        logger.info("lindblad: %d RK4 substeps per dt=%g", n_sub, dt)
    for k in range(steps):
        h = dt / n_sub
        for j in range(n_sub):
            mat = rk4_step(rhs, k * dt + j * h, mat, h)
        done = k + 1
        t = done * dt
        if done % monitor_every == 0 or done == steps:
            _monitor(mat, t)
            if recenter_threshold is not None:
                centre = np.sum(mat * gen.ladder.a.T)
                if abs(centre) > recenter_threshold:
                    moved = DensityMatrix(mat, frame)
                    m = moments_from_density(moved, gen.ladder)
                    moved = moved.recenter(FrameCenter(m.mean_x, m.mean_p), gen.ladder.hs)
                    frame, mat = moved.frame, moved.mat
                    n_sub = split(frame)
                    logger.debug("lindblad frame moved to (%.4f, %.4f)", frame.x0, frame.p0)
        if done % sample_every == 0 or done == steps:
            times.append(t)
            states.append(DensityMatrix(mat.copy(), frame))
    return LindbladSeries(np.array(times), states)
