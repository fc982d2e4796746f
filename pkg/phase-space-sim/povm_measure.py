#!/usr/bin/env python3
"""
Joint position-momentum measurement of finite strength sigma.

The resolution operator of outcome chi is the normal-ordered Gaussian

    U_sigma(chi) = pi^-1/2 (2 sigma / (sigma^2 + 1)) :exp[-k (a^dag - chi^*)(a - chi)]:

with k = 2 / (sigma^2 + 1). sigma = 1 projects onto coherent states; large
sigma barely disturbs the state. Outcomes are complex numbers in the
a-convention; readout_from_outcome converts them to (x1, x2).
"""

import logging
from dataclasses import dataclass
from typing import Any, List, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from fock_core import (
    LAB_FRAME,
    DensityMatrix,
    FrameCenter,
    HbarS,
    LadderOps,
    SimulationError,
    StateVector,
    TAIL_FRACTION,
    TAIL_THRESHOLD,
    TruncationOverflowError,
    build_ladder,
    check_tail,
    coherent_amplitudes,
    local_displacement,
    phase_space_moments,
    recenter,
)

logger = logging.getLogger(__name__)

MIN_PROBABILITY = 1e-300


class InvalidStrengthError(SimulationError, ValueError):
    pass


class DegenerateOutcomeError(SimulationError):
    """The requested outcome has (numerically) zero probability."""


@dataclass(frozen=True)
class MeasurementStrength:
    sigma: float

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 1.0:
            raise InvalidStrengthError(
                f"measurement strength sigma must be >= 1, got {self.sigma}"
            )

    @property
    def kraus_prefactor(self) -> float:
        return 2.0 * self.sigma / (self.sigma**2 + 1.0) / np.sqrt(np.pi)

    @property
    def kraus_rate(self) -> float:
        """k of the resolution operator."""
        return 2.0 / (self.sigma**2 + 1.0)

    @property
    def kraus_ratio(self) -> float:
        """Diagonal ratio (sigma^2 - 1) / (sigma^2 + 1) of U_sigma(0)."""
        return (self.sigma**2 - 1.0) / (self.sigma**2 + 1.0)

    @property
    def effect_rate(self) -> float:
        """k of the effect density, (2 sigma / (sigma^2 + 1))^2."""
        return (2.0 * self.sigma / (self.sigma**2 + 1.0)) ** 2

    @property
    def noise_variance(self) -> float:
        """Excess E|chi|^2 of the outcome over <a a^dag>."""
        return ((self.sigma**2 - 1.0) / (2.0 * self.sigma)) ** 2


@dataclass(frozen=True)
class Outcome:
    chi: complex

    def __post_init__(self):
        if not np.isfinite(self.chi):
            raise ValueError(f"outcome must be finite, got {self.chi}")
        object.__setattr__(self, "chi", complex(self.chi))

    @property
    def chi1(self) -> float:
        return self.chi.real

    @property
    def chi2(self) -> float:
        return self.chi.imag

    def readout(self, hs: HbarS) -> Tuple[float, float]:
        return readout_from_outcome(self.chi, hs)


Strength = Union[MeasurementStrength, float]


def as_strength(sigma: Strength) -> MeasurementStrength:
    if isinstance(sigma, MeasurementStrength):
        return sigma
    return MeasurementStrength(float(sigma))


def readout_from_outcome(chi: complex, hs: HbarS) -> Tuple[float, float]:
    """Meter readouts (x1, x2) belonging to the outcome chi."""
    return hs.to_xp(complex(chi))


def outcome_from_readout(x1: float, x2: float, hs: HbarS) -> complex:
    return complex(hs.to_alpha(x1, x2))


def equivalent_rate(sigma: Strength, delta_t: float) -> float:
    """Continuous-limit measurement rate gamma = 1 / (delta_t sigma^2)."""
    return 1.0 / (delta_t * as_strength(sigma).sigma ** 2)


def _raising_exponential(beta: np.ndarray, n_max: int) -> np.ndarray:
    """exp(beta a^dag) on levels 0..n_max; broadcasts over the shape of beta."""
    levels = np.arange(n_max + 1)
    gap = levels[:, None] - levels[None, :]
    lower = gap >= 0
    safe_gap = np.where(lower, gap, 0)
    log_weight = 0.5 * (gammaln(levels + 1)[:, None] - gammaln(levels + 1)[None, :])
    log_weight = log_weight - gammaln(safe_gap + 1)
    weight = np.where(lower, np.exp(log_weight), 0.0)
    beta = np.asarray(beta, dtype=complex)
    powers = np.ones(beta.shape + (n_max + 1,), dtype=complex)
    powers[..., 1:] = np.cumprod(
        np.broadcast_to(beta[..., None], beta.shape + (n_max,)), axis=-1
    )
    return np.where(lower, powers[..., safe_gap], 0.0) * weight


def normal_ordered_gaussian(chi: Union[complex, np.ndarray], k: float, n_max: int):
    """
    Matrix elements of :exp[-k (a^dag - chi^*)(a - chi)]: for levels 0..n_max.

    Uses the factorization exp(-k|chi|^2) exp(k chi a^dag) (1-k)^(a^dag a)
    exp(k chi^* a), which is exact on the kept levels.
    """
    chi = np.asarray(chi, dtype=complex)
    raising = _raising_exponential(k * chi, n_max)
    ratio = (1.0 - k) ** np.arange(n_max + 1)
    middle = raising * ratio
    mat = middle @ np.conj(np.swapaxes(raising, -1, -2))
    return np.exp(-k * np.abs(chi) ** 2)[..., None, None] * mat


def _frame_offset(frame: FrameCenter, hs: Optional[HbarS]) -> complex:
    if frame == LAB_FRAME:
        return 0j
    if hs is None:
        raise ValueError("a displaced frame needs hs to convert its centre")
    return complex(frame.alpha(hs))


def _local_outcome(chi: complex, frame: FrameCenter, hs: Optional[HbarS]) -> complex:
    return complex(chi) - _frame_offset(frame, hs)


def _check_outcome_range(chi_local: complex, n_max: int, context: str) -> None:
    """Outcomes far outside the basis produce operators the basis cannot hold."""
    start = int(np.floor(TAIL_FRACTION * n_max))
    mass = float(poisson.sf(start, abs(chi_local) ** 2))
    if mass > TAIL_THRESHOLD:
        raise TruncationOverflowError(
            f"{context}: outcome |chi|^2={abs(chi_local) ** 2:.3g} is outside "
            f"the truncation bound of N={n_max}"
        )


def resolution_operator(
    chi: complex,
    sigma: Strength,
    n_max: int,
    hs: Optional[HbarS] = None,
    frame: FrameCenter = LAB_FRAME,
    check_range: bool = True,
) -> np.ndarray:
    """Kraus operator U_sigma(chi) in the frame-local number basis."""
    strength = as_strength(sigma)
    chi_local = _local_outcome(chi, frame, hs)
    if check_range:
        _check_outcome_range(chi_local, n_max, "resolution_operator")
    return strength.kraus_prefactor * normal_ordered_gaussian(
        chi_local, strength.kraus_rate, n_max
    )


def resolution_at_origin(sigma: Strength, n_max: int) -> np.ndarray:
    """U_sigma(0), diagonal with ratio (sigma^2 - 1)/(sigma^2 + 1)."""
    strength = as_strength(sigma)
    return np.diag(
        strength.kraus_prefactor * strength.kraus_ratio ** np.arange(n_max + 1)
    ).astype(complex)


def effect_density(
    chi: complex,
    sigma: Strength,
    n_max: int,
    hs: Optional[HbarS] = None,
    frame: FrameCenter = LAB_FRAME,
    check_range: bool = True,
) -> np.ndarray:
    """F_sigma(chi) = U^dag U = pi^-1 k_F :exp[-k_F (a^dag - chi^*)(a - chi)]:."""
    strength = as_strength(sigma)
    chi_local = _local_outcome(chi, frame, hs)
    if check_range:
        _check_outcome_range(chi_local, n_max, "effect_density")
    k = strength.effect_rate
    return (k / np.pi) * normal_ordered_gaussian(chi_local, k, n_max)


def outcome_probability(
    psi: StateVector, chi: complex, sigma: Strength, hs: Optional[HbarS] = None
) -> float:
    """Prob(chi) = <psi|F_sigma(chi)|psi>, density with respect to d^2 chi."""
    kraus = resolution_operator(chi, sigma, psi.n_max, hs, psi.frame, check_range=False)
    return float(np.linalg.norm(kraus @ psi.amps) ** 2)


class OutcomeSampler:
    """
    Draws outcomes of the sigma measurement on a fixed state.

    Prob_sigma is the Husimi density Q/pi convolved with a complex Gaussian of
    mean |eta|^2 = ((sigma^2 - 1) / 2 sigma)^2, so a draw is a grid-inverted Q
    sample plus independent Gaussian noise.
    """

    def __init__(
        self,
        psi: StateVector,
        sigma: Strength,
        hs: Optional[HbarS] = None,
        grid_points: int = 256,
        span: float = 6.0,
    ):
        if not psi.is_normalized():
            raise SimulationError(f"cannot sample from a state with norm {psi.norm}")
        self.strength = as_strength(sigma)
        self.offset = _frame_offset(psi.frame, hs)
        self.grid_points = grid_points
        self._build_table(psi, span)

    def _build_table(self, psi: StateVector, span: float) -> None:
        ladder_a = np.diag(np.sqrt(np.arange(1, psi.n_max + 1, dtype=float)), k=1)
        amps = psi.amps
        a_psi = ladder_a @ amps
        mean = complex(np.vdot(amps, a_psi))
        a2 = complex(np.vdot(amps, ladder_a @ a_psi))
        anti = float(np.real(np.vdot(a_psi, a_psi))) + 1.0
        # antinormal moments of Q / pi
        var_re = 0.25 * (2.0 * np.real(a2) + 2.0 * anti) - mean.real**2
        var_im = 0.25 * (2.0 * anti - 2.0 * np.real(a2)) - mean.imag**2
        std_re = np.sqrt(max(var_re, 1e-12))
        std_im = np.sqrt(max(var_im, 1e-12))

        n = self.grid_points
        self.re_edges = np.linspace(mean.real - span * std_re, mean.real + span * std_re, n + 1)
        self.im_edges = np.linspace(mean.imag - span * std_im, mean.imag + span * std_im, n + 1)
        re_mid = 0.5 * (self.re_edges[1:] + self.re_edges[:-1])
        im_mid = 0.5 * (self.im_edges[1:] + self.im_edges[:-1])
        chi_grid = re_mid[None, :] + 1j * im_mid[:, None]

        overlaps = coherent_amplitudes(chi_grid, psi.n_max).conj() @ amps
        weights = (np.abs(overlaps) ** 2).ravel()
        total = weights.sum()
        if not total > 0:
            raise SimulationError("Husimi density vanished on the sampling grid")
        self.cdf = np.cumsum(weights) / total
        self.cdf[-1] = 1.0

    def sample_local(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        """Outcomes relative to the state's frame centre."""
        n = self.grid_points
        cells = np.searchsorted(self.cdf, rng.random(size), side="right")
        cells = np.minimum(cells, n * n - 1)
        rows, cols = np.divmod(cells, n)
        re = self.re_edges[cols] + rng.random(size) * (self.re_edges[cols + 1] - self.re_edges[cols])
        im = self.im_edges[rows] + rng.random(size) * (self.im_edges[rows + 1] - self.im_edges[rows])
        noise_std = np.sqrt(0.5 * self.strength.noise_variance)
        re = re + noise_std * rng.standard_normal(size)
        im = im + noise_std * rng.standard_normal(size)
        return re + 1j * im

    def sample(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        return self.sample_local(rng, size) + self.offset


def sample_outcome(
    psi: StateVector,
    sigma: Strength,
    rng: np.random.Generator,
    hs: Optional[HbarS] = None,
) -> Outcome:
    sampler = OutcomeSampler(psi, sigma, hs)
    return Outcome(complex(sampler.sample(rng, 1)[0]))


def apply_measurement(
    psi: StateVector,
    outcome: Union[Outcome, complex],
    sigma: Strength,
    hs: Optional[HbarS] = None,
) -> StateVector:
    """Collapse psi onto U_sigma(chi)|psi>, renormalized, in the same frame."""
    chi = outcome.chi if isinstance(outcome, Outcome) else complex(outcome)
    kraus = resolution_operator(chi, sigma, psi.n_max, hs, psi.frame, check_range=False)
    amps = kraus @ psi.amps
    prob = float(np.real(np.vdot(amps, amps)))
    if not prob > MIN_PROBABILITY:
        raise DegenerateOutcomeError(
            f"outcome chi={chi:.4g} has probability density {prob:.3e}"
        )
    amps = amps / np.sqrt(prob)
    check_tail(np.abs(amps) ** 2, "apply_measurement")
    return StateVector.normalized(amps, psi.frame)


class ReadoutMoments(NamedTuple):
    mean_x1: float
    mean_x2: float
    mean_x1_sq: float
    mean_x2_sq: float


def readout_moments(
    psi: StateVector, sigma: Strength, ladder: LadderOps
) -> ReadoutMoments:
    """Predicted first and second moments of the lab-frame readouts (x1, x2)."""
    strength = as_strength(sigma)
    hs = ladder.hs
    moments = phase_space_moments(psi, ladder)
    excess = (1.0 + strength.sigma**4) / (4.0 * strength.sigma**2)
    return ReadoutMoments(
        moments.mean_x,
        moments.mean_p,
        moments.Vx + moments.mean_x**2 + hs.hbar / hs.s * excess,
        moments.Vp + moments.mean_p**2 + hs.hbar * hs.s * excess,
    )


def average_channel(
    rho: DensityMatrix,
    sigma: Strength,
    grid_points: int = 161,
    span: float = 6.0,
) -> DensityMatrix:
    """
    Nonselective measurement: integral of U rho U^dag over outcomes.

    Quadrature on a square grid around the state; entries are exact on the
    kept levels up to quadrature error, so rho should leave headroom at the top.
    """
    strength = as_strength(sigma)
    n_max = rho.mat.shape[0] - 1
    k = strength.kraus_rate
    a = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1)
    centre = complex(np.trace(rho.mat @ a))
    spread = float(np.real(np.trace(rho.mat @ a @ a.T)))
    half = span * np.sqrt(0.5 / k) + 2.0 * np.sqrt(spread + 1.0)
    axis = np.linspace(-half, half, grid_points)
    step = axis[1] - axis[0]

    result = np.zeros_like(rho.mat)
    for im in axis:
        chis = centre + axis + 1j * im
        kraus = strength.kraus_prefactor * normal_ordered_gaussian(chis, k, n_max)
        result += np.einsum(
            "kij,jl,kml->im", kraus, rho.mat, kraus.conj(), optimize=True
        )
    return DensityMatrix(result * step * step, rho.frame)


class RepeatedMeasurementResult(NamedTuple):
    state: StateVector
    outcomes: np.ndarray
    times: np.ndarray
    moments: List[Tuple[float, float, float, float, float]]


def repeated_measurement_run(
    psi0: StateVector,
    sigma: Strength,
    delta_t: float,
    n_steps: int,
    rng: np.random.Generator,
    hs: HbarS,
    propagator: Optional[Any] = None,
    recenter_threshold: float = 1.0,
) -> RepeatedMeasurementResult:
    """
    Discrete-time measurement sequence: evolve for delta_t, measure, update.

    `propagator` is anything with evolve(psi, t, dt) (None means H = 0). For
    large sigma the run approaches continuous measurement at the rate
    equivalent_rate(sigma, delta_t).
    """
    ladder = build_ladder(psi0.n_max, hs)
    psi = psi0
    outcomes = np.empty(n_steps, dtype=complex)
    times = delta_t * np.arange(1, n_steps + 1)
    moments = []
    for step in range(n_steps):
        t = step * delta_t
        if propagator is not None:
            psi = propagator.evolve(psi, t, delta_t)
        outcome = sample_outcome(psi, sigma, rng, hs)
        psi = apply_measurement(psi, outcome, sigma, hs)
        outcomes[step] = outcome.chi
        if abs(local_displacement(psi, ladder)) > recenter_threshold:
            m = phase_space_moments(psi, ladder)
            psi = recenter(psi, FrameCenter(m.mean_x, m.mean_p), hs)
        moments.append(tuple(phase_space_moments(psi, ladder)))
    logger.debug("repeated measurement run finished after %d steps", n_steps)
    return RepeatedMeasurementResult(psi, outcomes, times, moments)
