#!/usr/bin/env python3
"""
Tests for fock_core.py
"""

import sys
import unittest
from pathlib import Path

import numpy as np

sys.path.append(str(Path(__file__).parent.parent / "phase-space-sim"))

from fock_core import (
    BasisTooSmallError,
    DensityMatrix,
    DimensionMismatchError,
    FrameCenter,
    HbarS,
    HusimiGrid,
    SimulationError,
    StateVector,
    TruncationOverflowError,
    build_ladder,
    check_tail,
    coherent_state,
    coherent_state_at,
    displace,
    displacement_operator,
    expect,
    expect_p,
    expect_x,
    husimi_normalization,
    husimi_q,
    phase_space_moments,
    recenter,
    squeezed_gaussian_state,
    tail_mass,
    trace_distance,
)


class TestLadderOperators(unittest.TestCase):
    """Test cases for the truncated operator matrices."""

    def test_canonical_commutator_below_top_level(self):
        """[x, p] = i hbar on every level except the truncation edge."""
        for hbar, s in [(1.0, 1.0), (0.05, 1.0), (0.3, 2.5)]:
            with self.subTest(hbar=hbar, s=s):
                ladder = build_ladder(20, HbarS(hbar, s))
                comm = ladder.x @ ladder.p - ladder.p @ ladder.x
                np.testing.assert_allclose(
                    comm[:-1, :-1], 1j * hbar * np.eye(20), atol=1e-12
                )

    def test_number_operator_is_diagonal(self):
        """a^dag a has eigenvalues 0..N."""
        ladder = build_ladder(8, HbarS(1.0))
        np.testing.assert_allclose(np.diag(ladder.number).real, np.arange(9), atol=1e-12)

    def test_basis_too_small(self):
        """N < 1 is rejected."""
        with self.assertRaises(BasisTooSmallError):
            build_ladder(0, HbarS(1.0))
        with self.assertRaises(BasisTooSmallError):
            StateVector(np.array([1.0]))

    def test_invalid_units(self):
        """hbar and s must be positive."""
        with self.assertRaises(ValueError):
            HbarS(0.0)
        with self.assertRaises(ValueError):
            HbarS(1.0, -1.0)


class TestCoherentStates(unittest.TestCase):
    """Test cases for coherent states and their moments."""

    def setUp(self):
        """Set up test fixtures."""
        self.hs = HbarS(1.0, 1.0)
        self.ladder = build_ladder(40, self.hs)

    def test_alpha_round_trip(self):
        """(x, p) -> alpha -> (x, p) for non-unit s."""
        hs = HbarS(0.05, 2.0)
        x, p = hs.to_xp(hs.to_alpha(-2.0, 1.0))
        self.assertAlmostEqual(x, -2.0, places=12)
        self.assertAlmostEqual(p, 1.0, places=12)

    def test_lab_frame_moments(self):
        """A lab-frame coherent state has the requested means and vacuum noise."""
        psi = coherent_state_at(0.3, -0.2, 40, self.hs, centered=False)
        m = phase_space_moments(psi, self.ladder)

        self.assertTrue(psi.is_normalized())
        self.assertAlmostEqual(m.mean_x, 0.3, places=10)
        self.assertAlmostEqual(m.mean_p, -0.2, places=10)
        self.assertAlmostEqual(m.Vx, 0.5, places=10)
        self.assertAlmostEqual(m.Vp, 0.5, places=10)
        self.assertAlmostEqual(m.Cxp, 0.0, places=10)

    def test_centred_frame_holds_vacuum(self):
        """In the frame on its own centre a coherent state is the vacuum."""
        hs = HbarS(0.05)
        psi = coherent_state_at(-2.0, 1.0, 30, hs)
        self.assertEqual(psi.frame, FrameCenter(-2.0, 1.0))
        self.assertAlmostEqual(abs(psi.amps[0]), 1.0, places=12)

        m = phase_space_moments(psi, build_ladder(30, hs))
        self.assertAlmostEqual(m.mean_x, -2.0, places=12)
        self.assertAlmostEqual(m.total_variance, 0.05, places=12)

    def test_amplitudes_are_read_only(self):
        """States are immutable values."""
        psi = coherent_state(0.1, 10)
        with self.assertRaises(ValueError):
            psi.amps[0] = 0.0

    def test_displaced_frame_needs_units(self):
        """A non-lab frame cannot be used without hbar and s."""
        with self.assertRaises(ValueError):
            coherent_state(0.1, 10, FrameCenter(1.0, 0.0))

    def test_large_amplitude_overflows_basis(self):
        """|alpha|^2 = 50 does not fit in 21 levels."""
        with self.assertRaises(TruncationOverflowError):
            coherent_state(np.sqrt(50.0), 20)

    def test_expect_dimension_mismatch(self):
        """Operators of the wrong size are rejected."""
        psi = coherent_state(0.1, 10)
        with self.assertRaises(DimensionMismatchError):
            expect(self.ladder.x, psi)


class TestDisplacementAndExpectations(unittest.TestCase):
    """Test cases for D(zeta), the overlap law and expectation accessors."""

    def test_displacement_basics(self):
        np.testing.assert_array_equal(displacement_operator(0.0, 10), np.eye(11))
        d = displacement_operator(0.5 + 0.3j, 40)
        np.testing.assert_allclose(d @ d.conj().T, np.eye(41), atol=1e-9)
        np.testing.assert_allclose(d[:, 0], coherent_state(0.5 + 0.3j, 40).amps, atol=1e-10)

    def test_displacement_composition(self):
        """D(beta)|alpha> = exp((alpha^* beta - alpha beta^*)/2) |alpha + beta>."""
        alpha, beta = 0.4, 0.2j
        moved = displacement_operator(beta, 40) @ coherent_state(alpha, 40).amps
        phase = np.exp(0.5 * (np.conj(alpha) * beta - alpha * np.conj(beta)))
        np.testing.assert_allclose(moved, phase * coherent_state(alpha + beta, 40).amps, atol=1e-8)

    def test_displace_matches_dense_operator(self):
        """The Krylov action agrees with the dense exponential on vectors and matrices."""
        rng = np.random.default_rng(12)
        amps = rng.standard_normal(41) + 1j * rng.standard_normal(41)
        amps[30:] = 0.0
        zeta = 0.7 - 0.4j
        dense = displacement_operator(zeta, 40)
        np.testing.assert_allclose(displace(amps, zeta), dense @ amps, atol=1e-10)

        block = rng.standard_normal((41, 3)) + 0j
        block[30:] = 0.0
        np.testing.assert_allclose(displace(block, zeta), dense @ block, atol=1e-10)
        np.testing.assert_array_equal(displace(amps, 0.0), amps)

    def test_displace_checks_the_basis(self):
        with self.assertRaises(TruncationOverflowError):
            displace(np.eye(21, 1, dtype=complex)[:, 0], 5.0)

    def test_coherent_overlap_law(self):
        for alpha, beta in [(0.3, -0.5j), (1.2 + 0.4j, -0.8 + 1.1j), (2.0, 1.5 - 1.0j)]:
            with self.subTest(alpha=alpha, beta=beta):
                numeric = np.vdot(coherent_state(alpha, 40).amps, coherent_state(beta, 40).amps)
                exact = np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * abs(beta) ** 2 + np.conj(alpha) * beta)
                self.assertAlmostEqual(numeric, exact, places=8)

    def test_expectations(self):
        ladder = build_ladder(40, HbarS(1.0))
        self.assertAlmostEqual(expect(ladder.number, coherent_state(0.0, 40)), 0.0)
        self.assertAlmostEqual(expect(ladder.a, coherent_state(1.0 + 1.0j, 40)), 1.0 + 1.0j, places=10)

        hs = HbarS(0.05)
        psi = coherent_state_at(-2.0, 1.0, 30, hs)
        ladder = build_ladder(30, hs)
        self.assertAlmostEqual(expect_x(psi, ladder), -2.0, places=12)
        self.assertAlmostEqual(expect_p(psi, ladder), 1.0, places=12)


class TestRecentering(unittest.TestCase):
    """Test cases for moving the number basis."""

    def setUp(self):
        """Set up test fixtures."""
        self.hs = HbarS(1.0)
        self.ladder = build_ladder(40, self.hs)

    def test_recenter_onto_state(self):
        """Moving the frame onto a coherent state leaves the vacuum up to phase."""
        psi = coherent_state_at(1.0, 0.5, 40, self.hs, centered=False)
        moved = recenter(psi, FrameCenter(1.0, 0.5), self.hs)
        self.assertAlmostEqual(abs(moved.amps[0]), 1.0, places=8)

    def test_recenter_preserves_moments(self):
        """Lab-frame moments do not depend on the frame."""
        psi = squeezed_gaussian_state(0.25, 1.0, 0.0, 40, self.hs, FrameCenter(0.4, -0.3))
        before = phase_space_moments(psi, self.ladder)
        after = phase_space_moments(recenter(psi, FrameCenter(0.9, 0.2), self.hs), self.ladder)
        for name, b, a in zip(before._fields, before, after):
            with self.subTest(moment=name):
                self.assertAlmostEqual(a, b, places=7)

    def test_recenter_matches_direct_construction(self):
        """Recentering agrees with building the state in the target frame."""
        target = FrameCenter(0.5, 0.5)
        alpha = self.hs.to_alpha(0.8, 0.1)
        moved = recenter(coherent_state(alpha, 40), target, self.hs)
        direct = coherent_state(alpha, 40, target, self.hs)
        self.assertAlmostEqual(abs(np.vdot(direct.amps, moved.amps)), 1.0, places=8)

    def test_recenter_same_frame_is_identity(self):
        psi = coherent_state(0.2, 10)
        self.assertIs(recenter(psi, psi.frame, self.hs), psi)

    def test_density_matrix_recenter(self):
        """Recentering a density matrix keeps trace and purity."""
        rho = DensityMatrix.from_state(coherent_state(0.3 + 0.1j, 40))
        moved = rho.recenter(FrameCenter(0.5, 0.0), self.hs)
        self.assertAlmostEqual(moved.trace.real, 1.0, places=8)
        self.assertAlmostEqual(moved.purity(), 1.0, places=8)

    def test_density_matrix_recenter_matches_state(self):
        """Moving rho and moving psi before forming the projector agree."""
        psi = squeezed_gaussian_state(0.5, 0.58, 0.2, 40, self.hs, FrameCenter(0.2, -0.1))
        target = FrameCenter(-0.4, 0.6)
        moved = DensityMatrix.from_state(psi).recenter(target, self.hs)
        expected = DensityMatrix.from_state(recenter(psi, target, self.hs))
        self.assertEqual(moved.frame, target)
        np.testing.assert_allclose(moved.mat, expected.mat, atol=1e-9)

    def test_padding_keeps_the_state(self):
        """A padded state has the same moments and moves without edge effects."""
        psi = coherent_state_at(0.5, -0.2, 20, self.hs)
        wide = psi.padded(60)
        self.assertEqual(wide.n_max, 60)
        self.assertEqual(wide.frame, psi.frame)
        before = phase_space_moments(psi, build_ladder(20, self.hs))
        after = phase_space_moments(wide, build_ladder(60, self.hs))
        for name, b, a in zip(before._fields, before, after):
            with self.subTest(moment=name):
                self.assertAlmostEqual(a, b, places=12)

        rho = DensityMatrix.from_state(psi).padded(60)
        np.testing.assert_allclose(rho.mat, DensityMatrix.from_state(wide).mat)
        with self.assertRaises(DimensionMismatchError):
            wide.padded(20)
        with self.assertRaises(DimensionMismatchError):
            rho.padded(20)


class TestGaussianStates(unittest.TestCase):
    """Test cases for squeezed Gaussian states."""

    def test_squeezed_moments(self):
        """The requested pure covariance is reproduced."""
        hs = HbarS(1.0)
        psi = squeezed_gaussian_state(0.25, 1.0, 0.0, 40, hs)
        m = phase_space_moments(psi, build_ladder(40, hs))
        self.assertAlmostEqual(m.Vx, 0.25, places=8)
        self.assertAlmostEqual(m.Vp, 1.0, places=8)
        self.assertAlmostEqual(m.Cxp, 0.0, places=8)

    def test_localized_squeezing_needs_a_large_basis(self):
        """
        A pure state with V_x + V_p = 10 hbar (what joint measurement holds
        in the double well) has a tanh(r)^n number tail: it overflows 65
        levels but fits the 321 used for the driven runs.
        """
        hs = HbarS(0.05)
        stretch = 10.0 + np.sqrt(99.0)  # e^{2r} with cosh 2r = 10
        Vx = 0.5 * hs.hbar * stretch
        Vp = 0.5 * hs.hbar / stretch
        with self.assertRaises(TruncationOverflowError):
            squeezed_gaussian_state(Vx, Vp, 0.0, 64, hs)
        psi = squeezed_gaussian_state(Vx, Vp, 0.0, 320, hs)
        m = phase_space_moments(psi, build_ladder(320, hs))
        self.assertAlmostEqual(m.total_variance / hs.hbar, 10.0, places=6)
        self.assertLess(tail_mass(np.abs(psi.amps) ** 2), 1e-8)

    def test_mixed_moments_rejected(self):
        """Moments above the uncertainty bound have no state vector."""
        with self.assertRaises(ValueError):
            squeezed_gaussian_state(1.0, 1.0, 0.0, 20, HbarS(1.0))


class TestTruncationMonitor(unittest.TestCase):
    """Test cases for the tail-mass monitor."""

    def test_tail_mass_region(self):
        """Only levels above floor(0.9 N) count."""
        populations = np.zeros(11)
        populations[9] = 0.5
        populations[10] = 0.25
        self.assertEqual(tail_mass(populations), 0.25)

    def test_check_tail_raises(self):
        populations = np.zeros(11)
        populations[10] = 1e-6
        with self.assertRaises(TruncationOverflowError):
            check_tail(populations, "test")
        check_tail(np.eye(11)[0], "test")

    def test_overflow_message_carries_context(self):
        """Trajectory index and time are part of the message."""
        error = TruncationOverflowError("tail too big", time=1.25, trajectory=3)
        self.assertIn("trajectory=3", str(error))
        self.assertIn("t=1.25", str(error))
        self.assertIsInstance(error, SimulationError)


class TestHusimiAndDistance(unittest.TestCase):
    """Test cases for Husimi grids and trace distances."""

    def setUp(self):
        """Set up test fixtures."""
        self.hs = HbarS(0.05)
        self.psi = coherent_state_at(0.2, -0.1, 30, self.hs)

    def test_husimi_normalization(self):
        """pi^-1 * integral Q d^2chi is one for a well-covered state."""
        grid = HusimiGrid.around(0.2, -0.1, 1.0, 201)
        q = husimi_q(self.psi, grid, self.hs)
        self.assertEqual(q.shape, (201, 201))
        self.assertAlmostEqual(husimi_normalization(q, grid, self.hs), 1.0, places=3)

    def test_husimi_peak_and_orientation(self):
        """Rows follow p, columns follow x, and the peak sits on the centre."""
        grid = HusimiGrid(-0.3, 0.7, -0.6, 0.4, 101, 51)
        q = husimi_q(self.psi, grid, self.hs)
        self.assertEqual(q.shape, (51, 101))
        row, col = np.unravel_index(np.argmax(q), q.shape)
        xs, ps = grid.axes()
        self.assertAlmostEqual(xs[col], 0.2, places=6)
        self.assertAlmostEqual(ps[row], -0.1, places=6)
        self.assertAlmostEqual(q[row, col], 1.0, places=8)

    def test_husimi_of_density_matrix(self):
        """Pure density matrices give the same Q as their state."""
        grid = HusimiGrid.around(0.2, -0.1, 0.5, 21)
        np.testing.assert_allclose(
            husimi_q(DensityMatrix.from_state(self.psi), grid, self.hs),
            husimi_q(self.psi, grid, self.hs),
            atol=1e-12,
        )

    def test_trace_distance(self):
        """Identical states are 0 apart, orthogonal ones 1."""
        rho = DensityMatrix.from_state(self.psi)
        self.assertAlmostEqual(trace_distance(rho, rho, self.hs), 0.0, places=12)

        one = np.zeros(31, dtype=complex)
        one[1] = 1.0
        other = DensityMatrix.from_state(StateVector(one, self.psi.frame))
        self.assertAlmostEqual(trace_distance(rho, other, self.hs), 1.0, places=12)

    def test_trace_distance_across_frames(self):
        """The second argument is moved into the first one's frame."""
        hs = HbarS(1.0)
        psi = coherent_state(0.3, 40)
        rho = DensityMatrix.from_state(psi)
        moved = DensityMatrix.from_state(recenter(psi, FrameCenter(0.2, 0.1), hs))
        self.assertAlmostEqual(trace_distance(rho, moved, hs), 0.0, places=7)

    def test_validate_rejects_bad_trace(self):
        with self.assertRaises(SimulationError):
            DensityMatrix(2.0 * np.eye(3) / 3.0).validate()


if __name__ == '__main__':
    unittest.main()
