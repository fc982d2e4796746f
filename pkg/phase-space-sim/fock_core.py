#!/usr/bin/env python3
"""
Truncated Fock-space algebra for a single continuously measured mode.

States live in a local moving number basis |n> = D(alpha0)|n>_lab, n = 0..N,
where alpha0 is the complex centre of the current FrameCenter. Operators are
stored frame-local; only the expectation accessors add the frame offsets back.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.linalg import eigvalsh, expm
from scipy.sparse.linalg import expm_multiply
from scipy.stats import poisson

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-12
TAIL_THRESHOLD = 1e-8
TAIL_FRACTION = 0.9


class SimulationError(Exception):
    """Base class for numeric failures raised by the simulator."""


class BasisTooSmallError(SimulationError, ValueError):
    pass


class DimensionMismatchError(SimulationError, ValueError):
    pass


class TruncationOverflowError(SimulationError):
    """Probability mass reached the top of the truncated basis."""

    def __init__(
        self,
        message: str,
        time: Optional[float] = None,
        trajectory: Optional[int] = None,
    ):
        super().__init__(message)
        self.time = time
        self.trajectory = trajectory

    def __str__(self):
        parts = [super().__str__()]
        if self.trajectory is not None:
            parts.append(f"trajectory={self.trajectory}")
        if self.time is not None:
            parts.append(f"t={self.time:.6g}")
        return " ".join(parts)


@dataclass(frozen=True)
class HbarS:
    hbar: float
    s: float = 1.0

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if not self.s > 0:
            raise ValueError(f"s must be positive, got {self.s}")

    def to_alpha(self, x: float, p: float) -> complex:
        """Phase-space point (x, p) -> complex amplitude in the a convention."""
        return (np.sqrt(self.s) * x + 1j * p / np.sqrt(self.s)) / np.sqrt(
            2.0 * self.hbar
        )

    def to_xp(self, alpha: complex) -> Tuple[float, float]:
        scale = np.sqrt(2.0 * self.hbar)
        return (
            float(scale * alpha.real / np.sqrt(self.s)),
            float(scale * alpha.imag * np.sqrt(self.s)),
        )


@dataclass(frozen=True)
class FrameCenter:
    x0: float = 0.0
    p0: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.x0) and np.isfinite(self.p0)):
            raise ValueError(f"frame centre must be finite, got ({self.x0}, {self.p0})")

    def alpha(self, hs: HbarS) -> complex:
        return hs.to_alpha(self.x0, self.p0)


LAB_FRAME = FrameCenter(0.0, 0.0)


@dataclass(frozen=True, eq=False)
class StateVector:
    amps: np.ndarray
    frame: FrameCenter = LAB_FRAME

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex)
        if amps.ndim != 1 or amps.size < 2:
            raise BasisTooSmallError(
                f"state needs at least 2 amplitudes, got shape {amps.shape}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def normalized(cls, amps: np.ndarray, frame: FrameCenter = LAB_FRAME):
        amps = np.asarray(amps, dtype=complex)
        norm = np.linalg.norm(amps)
        if not norm > 0 or not np.isfinite(norm):
            raise SimulationError(f"cannot normalize state with norm {norm}")
        return cls(amps / norm, frame)

    @property
    def n_max(self) -> int:
        return self.amps.size - 1

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def is_normalized(self, tol: float = 1e-10) -> bool:
        return abs(self.norm - 1.0) <= tol

    def padded(self, n_max: int) -> "StateVector":
        """The same state in the frame's basis extended to levels 0..n_max."""
        if n_max < self.n_max:
            raise DimensionMismatchError(f"cannot pad N={self.n_max} down to N={n_max}")
        amps = np.zeros(n_max + 1, dtype=complex)
        amps[: self.amps.size] = self.amps
        return StateVector(amps, self.frame)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    mat: np.ndarray
    frame: FrameCenter = LAB_FRAME

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatchError(f"density matrix must be square, got {mat.shape}")
        object.__setattr__(self, "mat", mat)

    @classmethod
    def from_state(cls, psi: StateVector) -> "DensityMatrix":
        return cls(np.outer(psi.amps, psi.amps.conj()), psi.frame)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.mat))

    def purity(self) -> float:
        return float(np.real(np.trace(self.mat @ self.mat)))

    def min_eigenvalue(self) -> float:
        return float(eigvalsh(0.5 * (self.mat + self.mat.conj().T))[0])

    def padded(self, n_max: int) -> "DensityMatrix":
        size = self.mat.shape[0]
        if n_max + 1 < size:
            raise DimensionMismatchError(f"cannot pad N={size - 1} down to N={n_max}")
        mat = np.zeros((n_max + 1, n_max + 1), dtype=complex)
        mat[:size, :size] = self.mat
        return DensityMatrix(mat, self.frame)

    def validate(self, tol: float = 1e-10) -> None:
        """Raise SimulationError if the matrix is not a valid density operator."""
        if np.max(np.abs(self.mat - self.mat.conj().T)) > tol:
            raise SimulationError("density matrix is not Hermitian")
        if abs(self.trace - 1.0) > tol:
            raise SimulationError(f"density matrix trace is {self.trace}")
        if self.min_eigenvalue() < -tol:
            raise SimulationError("density matrix has negative eigenvalues")

    def recenter(self, new_frame: FrameCenter, hs: HbarS) -> "DensityMatrix":
        if new_frame == self.frame:
            return self
        # D rho D^dag = D (D rho)^dag for Hermitian rho; the frame phase cancels
        zeta = self.frame.alpha(hs) - new_frame.alpha(hs)
        half = displace(self.mat, zeta, "density matrix recentering")
        mat = displace(half.conj().T, zeta, "density matrix recentering")
        check_tail(np.real(np.diag(mat)), "density matrix recentering")
        return DensityMatrix(mat, new_frame)


class LadderOps(NamedTuple):
    a: np.ndarray
    adag: np.ndarray
    x: np.ndarray
    p: np.ndarray
    hs: HbarS

    @property
    def n_max(self) -> int:
        return self.a.shape[0] - 1

    @property
    def number(self) -> np.ndarray:
        return self.adag @ self.a


class HusimiGrid(NamedTuple):
    x_min: float
    x_max: float
    p_min: float
    p_max: float
    n_x: int = 201
    n_p: int = 201

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        return (
            np.linspace(self.x_min, self.x_max, self.n_x),
            np.linspace(self.p_min, self.p_max, self.n_p),
        )

    @classmethod
    def around(cls, x: float, p: float, half_width: float, points: int = 201):
        return cls(
            x - half_width, x + half_width, p - half_width, p + half_width, points, points
        )


def build_ladder(n_max: int, hs: HbarS) -> LadderOps:
    """Lowering, raising, position and momentum matrices on levels 0..n_max."""
    if n_max < 1:
        raise BasisTooSmallError(f"basis needs N >= 1, got N={n_max}")

    a = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)
    adag = a.conj().T
    x = np.sqrt(hs.hbar / (2.0 * hs.s)) * (a + adag)
    p = 1j * np.sqrt(hs.hbar * hs.s / 2.0) * (adag - a)
    return LadderOps(a, adag, x, p, hs)


def tail_mass(populations: np.ndarray) -> float:
    """Probability above 0.9 N, the region where truncation corrupts dynamics."""
    n_max = populations.size - 1
    start = int(np.floor(TAIL_FRACTION * n_max)) + 1
    return float(np.sum(populations[start:]))


def check_tail(populations: np.ndarray, context: str) -> None:
    mass = tail_mass(populations)
    if mass > TAIL_THRESHOLD:
        raise TruncationOverflowError(
            f"{context}: tail mass {mass:.3e} above level "
            f"{int(np.floor(TAIL_FRACTION * (populations.size - 1)))} exceeds "
            f"{TAIL_THRESHOLD:g}"
        )


def _check_poisson_tail(mean_number: float, n_max: int, context: str) -> None:
    start = int(np.floor(TAIL_FRACTION * n_max))
    mass = float(poisson.sf(start, mean_number))
    if mass > TAIL_THRESHOLD:
        raise TruncationOverflowError(
            f"{context}: |zeta|^2={mean_number:.3g} leaves tail mass {mass:.3e} "
            f"beyond level {start} (N={n_max})"
        )


def coherent_amplitudes(alpha: Union[complex, np.ndarray], n_max: int) -> np.ndarray:
    """
    Untruncated-series coefficients <n|alpha> for n = 0..n_max.

    Accepts an array of alphas and returns shape alpha.shape + (n_max + 1,).
    Built by the recursion c_n = c_{n-1} alpha / sqrt(n) to stay finite for
    large |alpha|.
    """
    alpha = np.asarray(alpha, dtype=complex)
    out = np.empty(alpha.shape + (n_max + 1,), dtype=complex)
    out[..., 0] = np.exp(-0.5 * np.abs(alpha) ** 2)
    for n in range(1, n_max + 1):
        out[..., n] = out[..., n - 1] * alpha / np.sqrt(n)
    return out


def coherent_state(
    alpha: complex,
    n_max: int,
    frame: FrameCenter = LAB_FRAME,
    hs: Optional[HbarS] = None,
) -> StateVector:
    """
    Coherent state |alpha> (lab amplitude) expressed in the given frame.

    The frame offset alpha0 is taken from hs; the lab frame needs no hs.
    """
    if n_max < 1:
        raise BasisTooSmallError(f"basis needs N >= 1, got N={n_max}")
    if hs is None and frame != LAB_FRAME:
        raise ValueError("a displaced frame needs hs to convert its centre")
    offset = frame.alpha(hs) if hs is not None else 0.0
    local = complex(alpha) - offset
    _check_poisson_tail(abs(local) ** 2, n_max, "coherent_state")
    return StateVector.normalized(coherent_amplitudes(local, n_max), frame)


def coherent_state_at(
    x: float, p: float, n_max: int, hs: HbarS, centered: bool = True
) -> StateVector:
    """Coherent state centred at lab (x, p); by default in the frame sitting on it."""
    frame = FrameCenter(x, p) if centered else LAB_FRAME
    return coherent_state(hs.to_alpha(x, p), n_max, frame, hs)


def displacement_operator(zeta: complex, n_max: int) -> np.ndarray:
    """D(zeta) = exp(zeta a^dag - zeta^* a) on the truncated space."""
    _check_poisson_tail(abs(zeta) ** 2, n_max, "displacement_operator")
    a = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)
    if zeta == 0:
        return np.eye(n_max + 1, dtype=complex)
    return expm(zeta * a.conj().T - np.conj(zeta) * a)


def displacement_generator(zeta: complex, n_max: int) -> sparse.csr_matrix:
    """Sparse zeta a^dag - zeta^* a; bidiagonal in the number basis."""
    root = np.sqrt(np.arange(1, n_max + 1, dtype=float))
    return sparse.diags(
        [zeta * root, -np.conj(zeta) * root], [-1, 1], format="csr", dtype=complex
    )


def displace(
    amps: np.ndarray, zeta: complex, context: str = "displace"
) -> np.ndarray:
    """
    D(zeta) applied to a vector (or to each column of a matrix) via a Krylov
    exponential action, so the dense operator is never formed.
    """
    n_max = amps.shape[0] - 1
    _check_poisson_tail(abs(zeta) ** 2, n_max, context)
    if zeta == 0:
        return np.array(amps, dtype=complex)
    return expm_multiply(displacement_generator(zeta, n_max), amps)


def squeeze_operator(zeta: complex, n_max: int) -> np.ndarray:
    """S(zeta) = exp((zeta^* a^2 - zeta a^dag^2) / 2) on the truncated space."""
    a = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(complex)
    a2 = a @ a
    return expm(0.5 * (np.conj(zeta) * a2 - zeta * a2.conj().T))


def recenter(psi: StateVector, new_frame: FrameCenter, hs: HbarS) -> StateVector:
    if new_frame == psi.frame:
        return psi
    alpha_old = psi.frame.alpha(hs)
    alpha_new = new_frame.alpha(hs)
    # D(-b) D(a) = exp(i Im(b^* a)) D(a - b)
    phase = np.exp(1j * np.imag(np.conj(alpha_new) * alpha_old))
    amps = phase * displace(psi.amps, alpha_old - alpha_new, "recenter")
    check_tail(np.abs(amps) ** 2, "recenter")
    logger.debug(
        "recentered frame (%.4f, %.4f) -> (%.4f, %.4f)",
        psi.frame.x0,
        psi.frame.p0,
        new_frame.x0,
        new_frame.p0,
    )
    return StateVector.normalized(amps, new_frame)


def _check_dims(op: np.ndarray, size: int) -> None:
    if op.shape != (size, size):
        raise DimensionMismatchError(
            f"operator of shape {op.shape} cannot act on a state of size {size}"
        )


def expect(op: np.ndarray, psi: StateVector) -> complex:
    """<psi|op|psi> with op given frame-local."""
    _check_dims(op, psi.amps.size)
    return complex(np.vdot(psi.amps, op @ psi.amps))


def expect_x(psi: StateVector, ladder: LadderOps) -> float:
    return float(np.real(expect(ladder.x, psi))) + psi.frame.x0


def expect_p(psi: StateVector, ladder: LadderOps) -> float:
    return float(np.real(expect(ladder.p, psi))) + psi.frame.p0


def local_displacement(psi: StateVector, ladder: LadderOps) -> complex:
    """<a_local>, the offset of the state from its frame centre."""
    return expect(ladder.a, psi)


class PhaseSpaceMoments(NamedTuple):
    mean_x: float
    mean_p: float
    Vx: float
    Vp: float
    Cxp: float

    @property
    def total_variance(self) -> float:
        return self.Vx + self.Vp


def phase_space_moments(psi: StateVector, ladder: LadderOps) -> PhaseSpaceMoments:
    """Lab-frame means plus the (frame independent) second central moments."""
    _check_dims(ladder.x, psi.amps.size)
    amps = psi.amps
    x_psi = ladder.x @ amps
    p_psi = ladder.p @ amps
    mx = float(np.real(np.vdot(amps, x_psi)))
    mp = float(np.real(np.vdot(amps, p_psi)))
    vx = float(np.real(np.vdot(x_psi, x_psi))) - mx * mx
    vp = float(np.real(np.vdot(p_psi, p_psi))) - mp * mp
    cxp = float(np.real(np.vdot(x_psi, p_psi))) - mx * mp
    return PhaseSpaceMoments(mx + psi.frame.x0, mp + psi.frame.p0, vx, vp, cxp)


def squeezed_gaussian_state(
    Vx: float,
    Vp: float,
    Cxp: float,
    n_max: int,
    hs: HbarS,
    frame: FrameCenter = LAB_FRAME,
    tol: float = 1e-9,
) -> StateVector:
    """
    Pure Gaussian state centred on the frame with the requested covariances.

    Requires Vx Vp - Cxp^2 = hbar^2 / 4; mixed covariances have no state vector.
    """
    var_x = Vx * hs.s / hs.hbar
    var_p = Vp / (hs.s * hs.hbar)
    cov = Cxp / hs.hbar
    if abs(var_x * var_p - cov * cov - 0.25) > tol:
        raise ValueError(
            f"moments ({Vx}, {Vp}, {Cxp}) do not describe a pure Gaussian state "
            f"for hbar={hs.hbar}"
        )
    r = 0.5 * np.arcsinh(np.hypot(var_p - var_x, 2.0 * cov))
    theta = np.arctan2(-2.0 * cov, var_p - var_x)
    vacuum = np.zeros(n_max + 1, dtype=complex)
    vacuum[0] = 1.0
    amps = squeeze_operator(r * np.exp(1j * theta), n_max) @ vacuum
    check_tail(np.abs(amps) ** 2, "squeezed_gaussian_state")
    return StateVector.normalized(amps, frame)


def husimi_q(
    state: Union[StateVector, DensityMatrix], grid: HusimiGrid, hs: HbarS
) -> np.ndarray:
    """
    Q(chi) = <chi|rho|chi> on a lab-frame (x, p) grid, shape (n_p, n_x).

    Rows follow p, columns follow x. Evaluated one row at a time so large
    bases do not materialise a (n_p, n_x, N + 1) array.
    """
    xs, ps = grid.axes()
    xx, pp = np.meshgrid(xs, ps)
    chi_local = hs.to_alpha(xx, pp) - state.frame.alpha(hs)
    q = np.empty(chi_local.shape)
    for row, chi in enumerate(chi_local):
        if isinstance(state, StateVector):
            bras = coherent_amplitudes(chi, state.n_max).conj()
            q[row] = np.abs(bras @ state.amps) ** 2
        else:
            bras = coherent_amplitudes(chi, state.mat.shape[0] - 1).conj()
            q[row] = np.real(np.sum((bras @ state.mat) * bras.conj(), axis=1))
    return np.clip(q, 0.0, 1.0)


def husimi_normalization(q: np.ndarray, grid: HusimiGrid, hs: HbarS) -> float:
    """pi^-1 * integral Q d^2chi as a Riemann sum; d^2chi = dx dp / (2 hbar)."""
    xs, ps = grid.axes()
    dx = xs[1] - xs[0]
    dp = ps[1] - ps[0]
    return float(np.sum(q) * dx * dp / (2.0 * hs.hbar) / np.pi)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix, hs: HbarS) -> float:
    if sigma.frame != rho.frame:
        sigma = sigma.recenter(rho.frame, hs)
    if rho.mat.shape != sigma.mat.shape:
        raise DimensionMismatchError(
            f"cannot compare {rho.mat.shape} with {sigma.mat.shape}"
        )
    diff = rho.mat - sigma.mat
    return float(0.5 * np.sum(np.abs(eigvalsh(0.5 * (diff + diff.conj().T)))))
