#!/usr/bin/env python3
"""
Tests for lindblad_oracle.py
"""

import sys
import unittest
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).parent.parent / "phase-space-sim"))

from classical_dynamics import DrivenHamiltonianParams
from fock_core import (
    LAB_FRAME,
    DensityMatrix,
    DimensionMismatchError,
    FrameCenter,
    HbarS,
    build_ladder,
    coherent_state,
    coherent_state_at,
    trace_distance,
)
from lindblad_oracle import (
    LindbladGenerator,
    StepTooLargeError,
    ladder_form_rhs,
    lindblad_rhs,
    moments_from_density,
    propagate,
)
from sse_integrator import (
    MeasurementRates,
    ensemble_projector_average,
    run_ensemble,
)

FREE = DrivenHamiltonianParams()


def vacuum(n_max):
    return DensityMatrix.from_state(coherent_state(0.0, n_max))


class TestGenerator(unittest.TestCase):
    """Test cases for the master-equation right-hand side."""

    def setUp(self):
        """Set up test fixtures."""
        self.hs = HbarS(1.0)
        self.ladder = build_ladder(10, self.hs)

    def test_vacuum_rhs(self):
        """With H = 0 the vacuum loses population to level one at rate gamma."""
        gen = LindbladGenerator(FREE, MeasurementRates.joint(0.7), self.ladder)
        expected = np.zeros((11, 11), dtype=complex)
        expected[0, 0] = -0.7
        expected[1, 1] = 0.7
        np.testing.assert_allclose(lindblad_rhs(vacuum(10), gen, 0.0), expected, atol=1e-14)

    def test_quadrature_and_ladder_forms_agree(self):
        """Both forms match for states with no weight on the top level."""
        rng = np.random.default_rng(4)
        block = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        mat = np.zeros((11, 11), dtype=complex)
        mat[:6, :6] = block @ block.conj().T
        rho = DensityMatrix(mat / np.trace(mat))

        params = DrivenHamiltonianParams(a=5.0, b=-8.0, c=1.0)
        for s in (1.0, 2.0):
            with self.subTest(s=s):
                ladder = build_ladder(10, HbarS(1.0, s))
                gen = LindbladGenerator(params, MeasurementRates.joint(0.4, s), ladder)
                H = gen.hamiltonian(0.0, LAB_FRAME)
                np.testing.assert_allclose(
                    lindblad_rhs(rho, gen, 0.0)[:5, :5],
                    ladder_form_rhs(rho, H, 0.4, ladder)[:5, :5],
                    atol=1e-12,
                )

    def test_rhs_matches_dense_commutators(self):
        """The banded products reproduce the master equation written with dense matrices."""
        hs = HbarS(0.3, 1.5)
        ladder = build_ladder(12, hs)
        frame = FrameCenter(-0.7, 0.4)
        params = DrivenHamiltonianParams(a=2.0, b=-3.0, c=0.5, d=4.0, omega=3.0)
        gen = LindbladGenerator(params, MeasurementRates(0.6, 0.2), ladder)

        rng = np.random.default_rng(9)
        block = rng.standard_normal((13, 13)) + 1j * rng.standard_normal((13, 13))
        mat = block @ block.conj().T
        mat /= np.trace(mat)

        t = 0.37
        H = gen.hamiltonian(t, frame)
        x, p = ladder.x, ladder.p
        expected = (
            -1j / hs.hbar * (H @ mat - mat @ H)
            - 0.6 / (2.0 * hs.hbar) * (x @ x @ mat - 2.0 * x @ mat @ x + mat @ x @ x)
            - 0.2 / (2.0 * hs.hbar) * (p @ p @ mat - 2.0 * p @ mat @ p + mat @ p @ p)
        )
        np.testing.assert_allclose(gen.rhs_matrix(mat, t, frame), expected, atol=1e-10)

    def test_rhs_is_traceless(self):
        gen = LindbladGenerator(
            DrivenHamiltonianParams(a=1.0, b=1.0, d=2.0), MeasurementRates(0.3, 0.8), self.ladder
        )
        rho = DensityMatrix.from_state(coherent_state(0.4 - 0.3j, 10))
        self.assertAlmostEqual(abs(np.trace(lindblad_rhs(rho, gen, 0.2))), 0.0, places=12)

    def test_dimension_mismatch(self):
        gen = LindbladGenerator(FREE, MeasurementRates.joint(1.0), self.ladder)
        with self.assertRaises(DimensionMismatchError):
            lindblad_rhs(vacuum(5), gen, 0.0)


class TestPropagation(unittest.TestCase):
    """Test cases for RK4 propagation of rho."""

    def setUp(self):
        """Set up test fixtures."""
        self.hs = HbarS(1.0)
        self.ladder = build_ladder(30, self.hs)

    def test_unconditional_heating(self):
        """With H = 0 the variances grow as Vx + hbar Gamma2 t and Vp + hbar Gamma1 t."""
        gen = LindbladGenerator(FREE, MeasurementRates(0.3, 0.5), self.ladder)
        series = propagate(vacuum(30), gen, 1e-3, 0.5, sample_every=100)
        moments = series.moments(self.ladder)

        np.testing.assert_allclose(series.times, [0.0, 0.1, 0.2, 0.3, 0.4, 0.5], atol=1e-12)
        np.testing.assert_allclose(moments[:, 2], 0.5 + 0.5 * series.times, atol=1e-6)
        np.testing.assert_allclose(moments[:, 3], 0.5 + 0.3 * series.times, atol=1e-6)
        np.testing.assert_allclose(moments[:, [0, 1, 4]], 0.0, atol=1e-10)
        for rho in series.states:
            self.assertAlmostEqual(rho.trace.real, 1.0, places=10)
        self.assertTrue(np.all(np.diff(series.purity()) < 0))

    def test_harmonic_rotation_with_recentering(self):
        """Without measurement the means follow the classical orbit as the basis moves."""
        params = DrivenHamiltonianParams(a=1.0, b=1.0)
        gen = LindbladGenerator(params, MeasurementRates(), self.ladder)
        rho0 = DensityMatrix.from_state(coherent_state_at(1.5, 0.0, 30, self.hs))
        series = propagate(rho0, gen, 1e-3, 0.75, sample_every=750, recenter_threshold=0.5)

        final = series.states[-1]
        m = moments_from_density(final, self.ladder)
        self.assertAlmostEqual(m.mean_x, 1.5 * np.cos(1.5), delta=1e-4)
        self.assertAlmostEqual(m.mean_p, -1.5 * np.sin(1.5), delta=1e-4)
        self.assertNotEqual(final.frame, rho0.frame)
        self.assertGreater(final.purity(), 0.999)

    def test_oversized_step_is_reported(self):
        """RK4 far outside its stability region trips the positivity monitor."""
        gen = LindbladGenerator(FREE, MeasurementRates.joint(1.0), self.ladder)
        with self.assertRaises(StepTooLargeError) as ctx:
            propagate(vacuum(30), gen, 1.0, 20.0, monitor_every=1)
        self.assertIsNotNone(ctx.exception.time)

    def test_substeps_follow_the_generator(self):
        """Large driven bases get several RK4 substeps; substepping equals a finer grid."""
        hs = HbarS(0.05)
        chaotic = DrivenHamiltonianParams(a=5.0, b=-8.0, c=1.0, d=15.0, omega=2.0 * np.pi)
        wide = LindbladGenerator(chaotic, MeasurementRates.joint(0.7), build_ladder(160, hs))
        self.assertGreater(wide.stable_substeps(1e-4, FrameCenter(-2.0, 1.0)), 1)

        gen = LindbladGenerator(FREE, MeasurementRates.joint(1.0), self.ladder)
        self.assertEqual(gen.stable_substeps(1e-3, LAB_FRAME), 1)

        small = build_ladder(20, hs)
        gen = LindbladGenerator(chaotic, MeasurementRates.joint(0.7), small)
        rho0 = DensityMatrix.from_state(coherent_state_at(-2.0, 1.0, 20, hs))
        coarse = propagate(rho0, gen, 4e-4, 0.02, substeps=4).states[-1]
        fine = propagate(rho0, gen, 1e-4, 0.02).states[-1]
        np.testing.assert_allclose(coarse.mat, fine.mat, atol=1e-9)

        automatic = propagate(rho0, gen, 0.02, 0.02, substeps=None).states[-1]
        self.assertAlmostEqual(automatic.trace.real, 1.0, places=8)
        np.testing.assert_allclose(automatic.mat, fine.mat, atol=1e-5)

    def test_series_lookup(self):
        gen = LindbladGenerator(FREE, MeasurementRates.joint(1.0), self.ladder)
        series = propagate(vacuum(30), gen, 0.01, 0.3, sample_every=10)
        self.assertIs(series.at(0.21), series.states[2])
        self.assertIs(series.at(1.0), series.states[-1])


class TestAgreementWithTrajectories(unittest.TestCase):
    """The averaged conditional states reproduce the master equation."""

    @pytest.mark.slow
    def test_ensemble_average_matches_master_equation(self):
        hs = HbarS(1.0)
        ladder = build_ladder(30, hs)
        rates = MeasurementRates.joint(1.0)
        psi0 = coherent_state(0.0, 30)

        gen = LindbladGenerator(FREE, rates, ladder)
        rho = propagate(DensityMatrix.from_state(psi0), gen, 1e-3, 0.5).states[-1]

        results = run_ensemble(
            psi0, FREE, rates, 1e-3, 0.5, 21, 200, ladder,
            max_workers=4, progress=False, snapshot_interval=0.5,
        )
        states = [r['result'].snapshots[0.5] for r in results if r['success']]
        self.assertEqual(len(states), 200)
        averaged = ensemble_projector_average(states, LAB_FRAME, hs)

        expected = moments_from_density(rho, ladder)
        observed = moments_from_density(averaged, ladder)
        self.assertAlmostEqual(expected.Vx, 1.0, places=6)
        self.assertAlmostEqual(observed.Vx, expected.Vx, delta=0.2)
        self.assertAlmostEqual(observed.Vp, expected.Vp, delta=0.2)
        self.assertAlmostEqual(observed.mean_x, 0.0, delta=0.25)

    @pytest.mark.slow
    def test_driven_double_well_trace_distance(self):
        """
        Projector average of 2000 jointly measured trajectories in the driven
        double well against the master equation at t = 0.5.
        """
        hs = HbarS(0.05)
        params = DrivenHamiltonianParams(a=5.0, b=-8.0, c=1.0, d=15.0, omega=2.0 * np.pi)
        rates = MeasurementRates.joint(1.0 / np.sqrt(2.0))

        # the mixed state is wider than any single trajectory
        wide = build_ladder(256, hs)
        rho0 = DensityMatrix.from_state(coherent_state_at(-2.0, 1.0, 256, hs))
        gen = LindbladGenerator(params, rates, wide)
        rho = propagate(
            rho0, gen, 1e-4, 0.5, sample_every=5000, recenter_threshold=1.0, substeps=None
        ).states[-1]

        ladder = build_ladder(192, hs)
        results = run_ensemble(
            coherent_state_at(-2.0, 1.0, 192, hs), params, rates, 1e-4, 0.5, 7, 2000, ladder,
            max_workers=8, progress=False, snapshot_interval=0.5,
        )
        states = [r['result'].snapshots[0.5] for r in results if r['success']]
        self.assertEqual(len(states), 2000)

        average = ensemble_projector_average(states, rho.frame, hs, n_max=384)
        self.assertLessEqual(trace_distance(rho.padded(384), average, hs), 0.05)


if __name__ == '__main__':
    unittest.main()
