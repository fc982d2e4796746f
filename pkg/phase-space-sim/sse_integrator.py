#!/usr/bin/env python3
"""
Conditional (stochastic Schroedinger) evolution under continuous simultaneous
position and momentum measurement.

Each step applies a Strang-split unitary for H(t) = a p^2 + b x^2 + c x^4 +
d x cos(omega t) and then one Euler-Maruyama step of the measurement terms,
renormalizes, and re-centres the moving number basis when the state drifts.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.linalg import eigh, expm
from tqdm import tqdm

from classical_dynamics import DrivenHamiltonianParams
from fock_core import (
    DensityMatrix,
    FrameCenter,
    LadderOps,
    SimulationError,
    StateVector,
    TruncationOverflowError,
    check_tail,
    local_displacement,
    phase_space_moments,
    recenter,
)
from integrators import step_count

logger = logging.getLogger(__name__)

DEFAULT_RECENTER_THRESHOLD = 1.0


@dataclass(frozen=True)
class MeasurementRates:
    """Position rate Gamma1 and momentum rate Gamma2 (both per unit time)."""

    Gamma1: float = 0.0
    Gamma2: float = 0.0

    def __post_init__(self):
        if self.Gamma1 < 0 or self.Gamma2 < 0:
            raise ValueError(
                f"measurement rates must be non-negative, got ({self.Gamma1}, {self.Gamma2})"
            )

    @classmethod
    def joint(cls, gamma: float, s: float = 1.0) -> "MeasurementRates":
        if gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {gamma}")
        if not s > 0:
            raise ValueError(f"s must be positive, got {s}")
        return cls(gamma * s, gamma / s)

    @classmethod
    def position_only(cls, Gamma1: float) -> "MeasurementRates":
        return cls(Gamma1, 0.0)

    @classmethod
    def momentum_only(cls, Gamma2: float) -> "MeasurementRates":
        return cls(0.0, Gamma2)

    @property
    def mode(self) -> str:
        if self.Gamma1 > 0 and self.Gamma2 > 0:
            return "joint"
        if self.Gamma1 > 0:
            return "position"
        if self.Gamma2 > 0:
            return "momentum"
        return "none"

    @property
    def gamma(self) -> float:
        return float(np.sqrt(self.Gamma1 * self.Gamma2))

    @property
    def s(self) -> float:
        """Squeezing of the measured quadratures, sqrt(Gamma1 / Gamma2)."""
        return float(np.sqrt(self.Gamma1 / self.Gamma2))


class NoiseIncrement(NamedTuple):
    dW1: float
    dW2: float

    @property
    def dxi(self) -> complex:
        return complex(self.dW1, self.dW2) / np.sqrt(2.0)

    @classmethod
    def draw(cls, rng: np.random.Generator, dt: float) -> "NoiseIncrement":
        dw = rng.standard_normal(2) * np.sqrt(dt)
        return cls(float(dw[0]), float(dw[1]))


class StepResult(NamedTuple):
    state: StateVector
    norm_drift: float


def trajectory_rng(seed: int, trajectory: int) -> np.random.Generator:
    """Counter-based stream owned by one trajectory, independent of scheduling."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trajectory])))


def build_hamiltonian(
    params: DrivenHamiltonianParams,
    t: float,
    ladder: LadderOps,
    frame: FrameCenter,
) -> np.ndarray:
    """H(t) in the frame-local basis with x_lab = x + x0, p_lab = p + p0."""
    eye = np.eye(ladder.n_max + 1)
    x_lab = ladder.x + frame.x0 * eye
    p_lab = ladder.p + frame.p0 * eye
    x2 = x_lab @ x_lab
    return (
        params.a * (p_lab @ p_lab)
        + params.b * x2
        + params.c * (x2 @ x2)
        + params.drive(t) * x_lab
    )


class SplitOperatorPropagator:
    """
    Strang splitting exp(-iV dt/2h) exp(-iK dt/h) exp(-iV dt/2h) using the
    eigenbases of the truncated x and p matrices. The x-to-p basis change is
    precomputed, so a step costs four dense products.
    """

    def __init__(self, params: DrivenHamiltonianParams, ladder: LadderOps):
        self.params = params
        self.hbar = ladder.hs.hbar
        self.x_eig, self.x_vecs = eigh(ladder.x)
        self.p_eig, self.p_vecs = eigh(ladder.p)
        self.x_vecs_h = self.x_vecs.conj().T
        self.p_vecs_h = self.p_vecs.conj().T
        self.x_to_p = self.p_vecs_h @ self.x_vecs
        self.p_to_x = self.x_to_p.conj().T

    def evolve(self, psi: StateVector, t: float, dt: float) -> StateVector:
        params = self.params
        x = self.x_eig + psi.frame.x0
        p = self.p_eig + psi.frame.p0
        half_potential = np.exp(
            -0.5j * dt / self.hbar * params.potential(x, t + 0.5 * dt)
        )
        kinetic = np.exp(-1j * dt / self.hbar * params.a * p**2)

        in_x = half_potential * (self.x_vecs_h @ psi.amps)
        in_p = kinetic * (self.x_to_p @ in_x)
        in_x = half_potential * (self.p_to_x @ in_p)
        amps = self.x_vecs @ in_x
        return StateVector(amps, psi.frame)


class MatrixPropagator:
    """exp(-i H(t + dt/2) dt / hbar) from the dense Hamiltonian matrix."""

    def __init__(self, params: DrivenHamiltonianParams, ladder: LadderOps):
        self.params = params
        self.ladder = ladder

    def evolve(self, psi: StateVector, t: float, dt: float) -> StateVector:
        h = build_hamiltonian(self.params, t + 0.5 * dt, self.ladder, psi.frame)
        u = expm(-1j * dt / self.ladder.hs.hbar * h)
        return StateVector(u @ psi.amps, psi.frame)


def _unitary_part(psi: StateVector, H: Any, t: float, dt: float, hbar: float):
    if H is None:
        return psi
    if hasattr(H, "evolve"):
        return H.evolve(psi, t, dt)
    u = expm(-1j * dt / hbar * np.asarray(H))
    return StateVector(u @ psi.amps, psi.frame)


def _finish(amps: np.ndarray, frame: FrameCenter) -> StepResult:
    norm = float(np.linalg.norm(amps))
    return StepResult(StateVector.normalized(amps, frame), abs(norm - 1.0))


def _centred(op: np.ndarray, amps: np.ndarray):
    """(op - <op>) psi and the real expectation <op>."""
    op_psi = op @ amps
    mean = float(np.real(np.vdot(amps, op_psi)))
    return op_psi - mean * amps, mean


def sse_step(
    psi: StateVector,
    H: Any,
    rates: MeasurementRates,
    dt: float,
    noise: NoiseIncrement,
    ladder: LadderOps,
    t: float = 0.0,
) -> StepResult:
    """
    One conditional step under joint measurement.

    H may be None, a Hamiltonian matrix, or a propagator with evolve(psi, t, dt).
    The measurement part is

        -gamma (A^dag A + 1/2) psi dt + sqrt(gamma) (A^dag dxi + A dxi^*) psi

    with A = a - <a> built from the measured quadratures (s = sqrt(Gamma1/Gamma2)).
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    psi = _unitary_part(psi, H, t, dt, ladder.hs.hbar)
    mode = rates.mode
    if mode == "none":
        return StepResult(StateVector.normalized(psi.amps, psi.frame), abs(psi.norm - 1.0))
    if mode != "joint":
        Gamma = rates.Gamma1 if mode == "position" else rates.Gamma2
        quadrature = ladder.x if mode == "position" else ladder.p
        dW = noise.dW1 if mode == "position" else noise.dW2
        return _single_quadrature(psi, quadrature, Gamma, dt, dW, ladder.hs.hbar)

    hbar = ladder.hs.hbar
    gamma = rates.gamma
    root_s = np.sqrt(rates.s)
    scale = 1.0 / np.sqrt(2.0 * hbar)
    amps = psi.amps
    dx_psi, x_mean = _centred(ladder.x, amps)
    dp_psi, p_mean = _centred(ladder.p, amps)
    a_psi = scale * (root_s * dx_psi + 1j * dp_psi / root_s)
    adag_psi = scale * (root_s * dx_psi - 1j * dp_psi / root_s)

    dx_a = ladder.x @ a_psi - x_mean * a_psi
    dp_a = ladder.p @ a_psi - p_mean * a_psi
    adag_a_psi = scale * (root_s * dx_a - 1j * dp_a / root_s)

    dxi = noise.dxi
    new = (
        amps
        - gamma * (adag_a_psi + 0.5 * amps) * dt
        + np.sqrt(gamma) * (adag_psi * dxi + a_psi * np.conj(dxi))
    )
    return _finish(new, psi.frame)


def _single_quadrature(
    psi: StateVector,
    quadrature: np.ndarray,
    Gamma: float,
    dt: float,
    dW: float,
    hbar: float,
) -> StepResult:
    amps = psi.amps
    d_psi, mean = _centred(quadrature, amps)
    d2_psi = quadrature @ d_psi - mean * d_psi
    new = amps - Gamma / (2.0 * hbar) * d2_psi * dt + np.sqrt(Gamma / hbar) * d_psi * dW
    return _finish(new, psi.frame)


def position_only_step(
    psi: StateVector,
    H: Any,
    Gamma: float,
    dt: float,
    dW: float,
    ladder: LadderOps,
    t: float = 0.0,
) -> StepResult:
    """Continuous position measurement: drift -(Gamma/2h) dx^2, noise sqrt(Gamma/h) dx dW."""
    psi = _unitary_part(psi, H, t, dt, ladder.hs.hbar)
    if Gamma == 0:
        return StepResult(StateVector.normalized(psi.amps, psi.frame), abs(psi.norm - 1.0))
    return _single_quadrature(psi, ladder.x, Gamma, dt, dW, ladder.hs.hbar)


def momentum_only_step(
    psi: StateVector,
    H: Any,
    Gamma: float,
    dt: float,
    dW: float,
    ladder: LadderOps,
    t: float = 0.0,
) -> StepResult:
    psi = _unitary_part(psi, H, t, dt, ladder.hs.hbar)
    if Gamma == 0:
        return StepResult(StateVector.normalized(psi.amps, psi.frame), abs(psi.norm - 1.0))
    return _single_quadrature(psi, ladder.p, Gamma, dt, dW, ladder.hs.hbar)


RECORD_COLUMNS = (
    "t",
    "mean_x",
    "mean_p",
    "Vx",
    "Vp",
    "Cxp",
    "dX1",
    "dX2",
    "X1",
    "X2",
    "norm_drift",
)


@dataclass
class MeasurementRecord:
    """
    Conditional moments and readout increments of one trajectory.

    Rows are written every `stride` steps; dX1 and dX2 hold the sum of the
    increments since the previous row and norm_drift the largest per-step drift.
    Unmeasured quadratures carry nan increments.
    """

    stride: int = 1
    rows: List[List[float]] = field(default_factory=list)

    def append(self, t: float, moments, dX1: float, dX2: float, norm_drift: float):
        X1 = dX1 + (self.rows[-1][8] if self.rows else 0.0)
        X2 = dX2 + (self.rows[-1][9] if self.rows else 0.0)
        self.rows.append([t, *moments, dX1, dX2, X1, X2, norm_drift])

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(-1, len(RECORD_COLUMNS))

    def column(self, name: str) -> np.ndarray:
        return self.as_array()[:, RECORD_COLUMNS.index(name)]

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    @property
    def total_variance(self) -> np.ndarray:
        return self.column("Vx") + self.column("Vp")


class TrajectoryResult(NamedTuple):
    final: StateVector
    record: MeasurementRecord
    snapshots: Dict[float, StateVector]
    recenterings: int


def run_trajectory(
    initial: StateVector,
    params: DrivenHamiltonianParams,
    rates: MeasurementRates,
    dt: float,
    t_final: float,
    rng: np.random.Generator,
    ladder: LadderOps,
    recenter_threshold: Optional[float] = DEFAULT_RECENTER_THRESHOLD,
    snapshot_interval: Optional[float] = None,
    record_stride: int = 1,
    propagator: Any = None,
    trajectory: Optional[int] = None,
) -> TrajectoryResult:
    """
    Integrate one conditional trajectory from `initial` to t_final.

    The same Gaussian increments drive the state and the readout record
    dX1 = <x> dt + (1/2) sqrt(hbar/Gamma1) dW1 (and likewise dX2 with <p>).
    `recenter_threshold=None` keeps the initial frame.

    Raises:
        TruncationOverflowError: with the time and trajectory attached
    """
    steps = step_count(dt, t_final)
    snapshot_every = (
        step_count(dt, snapshot_interval) if snapshot_interval else None
    )
    if snapshot_every == 0:
        raise ValueError("snapshot_interval must be at least one step")
    if propagator is None and params != DrivenHamiltonianParams():
        propagator = SplitOperatorPropagator(params, ladder)

    hbar = ladder.hs.hbar
    mode = rates.mode
    noise_x = 0.5 * np.sqrt(hbar / rates.Gamma1) if rates.Gamma1 > 0 else np.nan
    noise_p = 0.5 * np.sqrt(hbar / rates.Gamma2) if rates.Gamma2 > 0 else np.nan

    psi = initial
    record = MeasurementRecord(stride=record_stride)
    record.append(0.0, phase_space_moments(psi, ladder), 0.0, 0.0, 0.0)
    snapshots: Dict[float, StateVector] = {}
    if snapshot_every:
        snapshots[0.0] = psi
    acc_x = acc_p = 0.0
    worst_drift = 0.0
    recenterings = 0

    for k in range(steps):
        t = k * dt
        dw = rng.standard_normal(2) * np.sqrt(dt) if mode != "none" else (0.0, 0.0)
        noise = NoiseIncrement(float(dw[0]), float(dw[1]))
        try:
            psi_u = _unitary_part(psi, propagator, t, dt, hbar)
            mean_x = float(np.real(np.vdot(psi_u.amps, ladder.x @ psi_u.amps))) + psi_u.frame.x0
            mean_p = float(np.real(np.vdot(psi_u.amps, ladder.p @ psi_u.amps))) + psi_u.frame.p0
            psi, drift = sse_step(psi_u, None, rates, dt, noise, ladder, t)
            check_tail(np.abs(psi.amps) ** 2, "sse step")
            if recenter_threshold is not None and abs(
                local_displacement(psi, ladder)
            ) > recenter_threshold:
                m = phase_space_moments(psi, ladder)
                psi = recenter(psi, FrameCenter(m.mean_x, m.mean_p), ladder.hs)
                recenterings += 1
        except TruncationOverflowError as e:
            raise TruncationOverflowError(str(e.args[0]), t + dt, trajectory) from e

        acc_x += mean_x * dt + noise_x * noise.dW1
        acc_p += mean_p * dt + noise_p * noise.dW2
        worst_drift = max(worst_drift, drift)
        done = k + 1
        if done % record_stride == 0 or done == steps:
            record.append(done * dt, phase_space_moments(psi, ladder), acc_x, acc_p, worst_drift)
            acc_x = acc_p = 0.0
            worst_drift = 0.0
        if snapshot_every and done % snapshot_every == 0:
            snapshots[round(done * dt, 12)] = psi

    logger.debug(
        "trajectory %s finished: %d steps, %d recenterings", trajectory, steps, recenterings
    )
    return TrajectoryResult(psi, record, snapshots, recenterings)


def run_ensemble(
    initial: StateVector,
    params: DrivenHamiltonianParams,
    rates: MeasurementRates,
    dt: float,
    t_final: float,
    seed: int,
    n_trajectories: int,
    ladder: LadderOps,
    max_workers: int = 4,
    progress: bool = True,
    **trajectory_kwargs,
) -> List[Dict[str, Any]]:
    """
    Run trajectories 0..n-1 in a thread pool, each on trajectory_rng(seed, k).

    Returns one result dict per trajectory, ordered by index:
    {'index', 'success', 'error', 'time', 'duration', 'result'}.
    """
    propagator = (
        SplitOperatorPropagator(params, ladder)
        if params != DrivenHamiltonianParams()
        else None
    )

    def work(index: int) -> Dict[str, Any]:
        result = {
            'index': index,
            'success': False,
            'error': None,
            'time': None,
            'start_time': time.time(),
            'result': None,
        }
        try:
            result['result'] = run_trajectory(
                initial,
                params,
                rates,
                dt,
                t_final,
                trajectory_rng(seed, index),
                ladder,
                propagator=propagator,
                trajectory=index,
                **trajectory_kwargs,
            )
            result['success'] = True
        except SimulationError as e:
            result['error'] = str(e)
            result['time'] = getattr(e, 'time', None)
            logger.warning(f"Trajectory {index} failed: {e}")
        result['duration'] = time.time() - result['start_time']
        return result

    results = []
    successful = 0
    failed = 0
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = {executor.submit(work, k): k for k in range(n_trajectories)}
        with tqdm(
            total=n_trajectories, desc="Trajectories", unit="traj", disable=not progress
        ) as pbar:
            for future in as_completed(futures):
                result = future.result()
                results.append(result)
                if result['success']:
                    successful += 1
                else:
                    failed += 1
                pbar.set_postfix({'Success': successful, 'Failed': failed})
                pbar.update(1)

    results.sort(key=lambda r: r['index'])
    return results


def ensemble_moments(results: Sequence[Dict[str, Any]]) -> np.ndarray:
    """Mean record rows over successful trajectories, in index order."""
    arrays = [r['result'].record.as_array() for r in results if r['success']]
    if not arrays:
        raise SimulationError("no successful trajectories to average")
    return np.mean(np.stack(arrays), axis=0)


def ensemble_projector_average(
    states: Sequence[StateVector], frame: FrameCenter, hs, n_max: Optional[int] = None
) -> DensityMatrix:
    """
    Average of |psi><psi| over states, each moved into the common frame.

    With n_max set, every state is first padded to that basis size, so members
    sitting far from the common frame still fit after the move.
    """
    if not states:
        raise SimulationError("no states to average")
    total = None
    for psi in states:
        if n_max is not None:
            psi = psi.padded(n_max)
        rho = DensityMatrix.from_state(recenter(psi, frame, hs)).mat
        total = rho if total is None else total + rho
    return DensityMatrix(total / len(states), frame)
