#!/usr/bin/env python3
"""
Tests for classical_dynamics.py
"""

import sys
import unittest
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).parent.parent / "phase-space-sim"))

from classical_dynamics import (
    DivergenceError,
    DrivenHamiltonianParams,
    PhasePoint,
    classify_orbit,
    classify_seeds,
    energy,
    hamilton_rhs,
    integrate_classical,
    nearest_neighbor_spread,
    poincare_map,
    twin_separation,
)

INTEGRABLE = DrivenHamiltonianParams(a=5.0, b=5.0, c=1.0)
CHAOTIC = DrivenHamiltonianParams(a=5.0, b=-8.0, c=1.0, d=15.0, omega=2.0 * np.pi)


class TestHamiltonian(unittest.TestCase):
    """Test cases for parameters and Hamilton's equations."""

    def test_rhs_at_known_point(self):
        """dx/dt = 2 a p, dp/dt = -(2 b x + 4 c x^3 + d cos(omega t))."""
        rhs = hamilton_rhs(PhasePoint(-2.0, 1.0), CHAOTIC, 0.0)
        np.testing.assert_allclose(rhs, [10.0, -(32.0 - 32.0 + 15.0)])

    def test_rhs_is_vectorized(self):
        """A batch of points gives the same rows as single points."""
        batch = np.array([[-2.0, 1.0], [0.5, -0.3], [1.5, 2.0]])
        stacked = hamilton_rhs(batch, CHAOTIC, 0.37)
        for row, point in zip(stacked, batch):
            np.testing.assert_allclose(row, hamilton_rhs(point, CHAOTIC, 0.37))

    def test_energy(self):
        self.assertAlmostEqual(float(energy((-2.0, 1.0), INTEGRABLE)), 5.0 + 20.0 + 16.0)
        self.assertTrue(INTEGRABLE.is_autonomous)
        self.assertFalse(CHAOTIC.is_autonomous)

    def test_negative_quartic_warns(self):
        with self.assertLogs('classical_dynamics', level='WARNING'):
            DrivenHamiltonianParams(a=1.0, c=-1.0)

    def test_non_finite_point_rejected(self):
        with self.assertRaises(ValueError):
            PhasePoint(float('nan'), 0.0)


class TestIntegration(unittest.TestCase):
    """Test cases for the RK4 trajectories."""

    def test_harmonic_oracle_and_order(self):
        """H = p^2 + x^2 rotates at angular frequency 2; errors fall as dt^4."""
        params = DrivenHamiltonianParams(a=1.0, b=1.0)
        errors = []
        for dt in (0.1, 0.05, 0.025):
            run = integrate_classical((1.0, 0.5), params, dt, 1.0)
            exact_x = np.cos(2.0) + 0.5 * np.sin(2.0)
            exact_p = 0.5 * np.cos(2.0) - np.sin(2.0)
            errors.append(np.hypot(run.x[-1] - exact_x, run.p[-1] - exact_p))
        for coarse, fine in zip(errors, errors[1:]):
            self.assertGreater(coarse / fine, 13.0)
            self.assertLess(coarse / fine, 19.0)

    def test_energy_conservation(self):
        """Undriven energy drifts by less than 1e-9 relative over one time unit."""
        run = integrate_classical((-2.0, 1.0), INTEGRABLE, 1e-4, 1.0, stride=100)
        e = energy(np.column_stack([run.x, run.p]), INTEGRABLE)
        self.assertLess(np.max(np.abs(e - e[0])) / e[0], 1e-9)

    def test_time_reversal(self):
        """Flipping p and integrating again returns to the mirrored start."""
        forward = integrate_classical((-2.0, 1.0), INTEGRABLE, 1e-4, 1.0)
        end = forward.point(-1)
        back = integrate_classical((end.x, -end.p), INTEGRABLE, 1e-4, 1.0)
        self.assertAlmostEqual(back.x[-1], -2.0, places=7)
        self.assertAlmostEqual(back.p[-1], -1.0, places=7)

    def test_stride_sampling(self):
        """Rows sit every stride steps and always include the end point."""
        run = integrate_classical((0.1, 0.0), INTEGRABLE, 0.01, 0.25, stride=10)
        np.testing.assert_allclose(run.times, [0.0, 0.1, 0.2, 0.25])

    def test_divergence(self):
        """An inverted quartic escapes and is reported with its time."""
        params = DrivenHamiltonianParams(a=1.0, c=-1.0)
        with self.assertRaises(DivergenceError) as ctx:
            integrate_classical((2.0, 0.0), params, 1e-3, 5.0)
        self.assertIsNotNone(ctx.exception.time)
        self.assertLess(ctx.exception.time, 5.0)


class TestPoincare(unittest.TestCase):
    """Test cases for stroboscopic sections and orbit classification."""

    def test_strobes_match_continuous_run(self):
        """Strobe k sits on the continuous trajectory at t = k T."""
        strobes = poincare_map([[-2.0, 1.0]], CHAOTIC, 1.0, 2, dt=1e-3)
        self.assertEqual(strobes.shape, (1, 2, 2))
        run = integrate_classical((-2.0, 1.0), CHAOTIC, 1e-3, 2.0, stride=1000)
        np.testing.assert_allclose(strobes[0, 0], [run.x[1], run.p[1]], rtol=1e-9, atol=1e-9)
        np.testing.assert_allclose(strobes[0, 1], [run.x[2], run.p[2]], rtol=1e-9, atol=1e-9)

    def test_invalid_period(self):
        with self.assertRaises(ValueError):
            poincare_map([[0.0, 0.0]], CHAOTIC, 0.0, 5)

    def test_spread_of_curve_and_cloud(self):
        """Points on a curve have small spread; scattered points are near 1."""
        angles = np.linspace(0.0, 2.0 * np.pi, 400, endpoint=False)
        circle = np.column_stack([np.cos(angles), np.sin(angles)])
        cloud = np.random.default_rng(5).uniform(-1.0, 1.0, (400, 2))

        self.assertLess(nearest_neighbor_spread(circle), 0.5)
        self.assertGreater(nearest_neighbor_spread(cloud), 0.7)
        self.assertEqual(classify_orbit(circle), "regular")
        self.assertEqual(classify_orbit(cloud), "chaotic")

    def test_spread_needs_points(self):
        with self.assertRaises(ValueError):
            nearest_neighbor_spread(np.zeros((2, 2)))

    @pytest.mark.slow
    def test_integrable_orbit_is_regular(self):
        """An undriven orbit strobes onto its energy curve."""
        strobes = poincare_map([[-2.0, 1.0]], INTEGRABLE, 1.0, 400, dt=2.5e-3)
        self.assertEqual(classify_seeds(strobes), ["regular"])

    @pytest.mark.slow
    def test_driven_section_has_sea_and_islands(self):
        """The default start lies in the chaotic sea; high-energy orbits stay regular."""
        seeds = [[-2.0, 1.0], [4.5, 0.0], [-4.5, 0.0], [0.0, 7.0], [0.0, -7.0]]
        labels = classify_seeds(poincare_map(seeds, CHAOTIC, 1.0, 500, dt=1e-3))
        self.assertEqual(labels[0], "chaotic")
        self.assertIn("regular", labels[1:])


class TestTwinSeparation(unittest.TestCase):
    """Test cases for nearby-trajectory separation."""

    def test_initial_offset(self):
        sep = twin_separation((-2.0, 1.0), CHAOTIC, 1e-6, 1e-3, 1.0, stride=100)
        self.assertAlmostEqual(sep.distance[0], 1e-6, delta=1e-12)
        self.assertEqual(len(sep.times), 11)

    def test_free_motion_separation_is_constant(self):
        """With H = a p^2 an x offset neither grows nor shrinks."""
        params = DrivenHamiltonianParams(a=1.0)
        sep = twin_separation((0.0, 1.0), params, 1e-3, 1e-2, 1.0, stride=10)
        np.testing.assert_allclose(sep.distance, 1e-3, rtol=1e-9)

    @pytest.mark.slow
    def test_chaotic_twins_separate(self):
        """A 1e-6 offset in the chaotic sea grows to O(1) by t = 30."""
        sep = twin_separation((-2.0, 1.0), CHAOTIC, 1e-6, 1e-3, 30.0, stride=100)
        self.assertGreater(np.max(sep.distance), 0.5)


if __name__ == '__main__':
    unittest.main()
