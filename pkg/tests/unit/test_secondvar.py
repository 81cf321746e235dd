from unittest import TestCase, main

import numpy as np

from expr import parse_field
from geometry import ControlSystem, adjoint_along, reference_trajectory
from integrators import ControlGrid
from operators import CoefficientField, operator_conjugate_time
from presets import chain_n3, const4, martinet
from secondvar import (
    RestrictionMode,
    calibrate_coefficients,
    constraint_rows,
    conjugate_time_search,
    fd_oracle,
    first_variation_matrix,
    form_at,
    hessian_form,
    restricted_smallest_eig,
    signed_smallest_eig
)

class SecondVariationTest(TestCase):

    """
    Implementation of unit tests for the first variation and the Hessian form.

    """

    def test_first_variation_of_chain(self):
        """
        GIVEN X = x2 d/dx1, Y = d/dx2 started at the origin.
        WHEN  the user computes dE on the hat basis.
        THEN  its rows must be int (T - s) phi_j and int phi_j.

        """
        system = ControlSystem(parse_field(['x2', '0'], 2), parse_field(['0', '1'], 2))
        traj = reference_trajectory(system, np.zeros(2), 2.0, 50)

        de = first_variation_matrix(traj, system, 8)

        grid = ControlGrid(2.0, 8)
        widths = np.diff(grid.nodes)
        left = np.append(0.0, widths)
        right = np.append(widths, 0.0)

        mass = 0.5 * (left + right)
        moment = grid.nodes * mass + (right ** 2 - left ** 2) / 6.0

        np.testing.assert_allclose(de[1], mass, atol=1e-12)
        np.testing.assert_allclose(de[0], 2.0 * mass - moment, atol=1e-12)

    def test_hessian_matches_fd_oracle(self):
        """
        GIVEN the Martinet reference trajectory on [0, 1].
        WHEN  the user compares Q(v, v) with the second difference of
              <p(T), x_{hv}(T)> for 20 random controls.
        THEN  the relative error must stay below 1e-3.

        """
        system = martinet(alpha=1.0).system()
        traj, qfd = form_at(system, np.zeros(3), 1.0, 200, 16)

        rng = np.random.default_rng(3)
        controls = rng.normal(size=(20, qfd.size))

        oracle = fd_oracle(system, traj, controls, 1e-3, qfd.grid)
        values = np.array([qfd.value(v) for v in controls])

        np.testing.assert_array_less(np.abs(values - oracle) / np.abs(oracle), 1e-3)

    def test_abnormal_first_variation(self):
        """
        GIVEN the Martinet reference trajectory.
        WHEN  the user assembles the Hessian form.
        THEN  p(T) must annihilate every column of dE.

        """
        _, qfd = form_at(martinet().system(), np.zeros(3), 1.0, 200, 16)

        self.assertLess(qfd.abnormal_residual, 1e-10)
        np.testing.assert_allclose(qfd.final_adjoint, [0.0, 0.0, 1.0], atol=1e-12)

    def test_calibrated_coefficient(self):
        """
        GIVEN the Martinet system with alpha = 1 and several beta, gamma, and
              the chain-n3 preset.
        WHEN  the user calibrates the coefficient b from the Hessian form.
        THEN  b must be 1/2 within 5e-3 in every case.

        """
        systems = [
            martinet(alpha=1.0).system(),
            martinet(alpha=1.0, beta=0.3, gamma=-0.2).system(),
            chain_n3().system()
        ]

        for system in systems:
            traj, qfd = form_at(system, np.zeros(3), 1.0, 200, 32)

            coeffs, residual = calibrate_coefficients(qfd, traj, system)

            self.assertAlmostEqual(coeffs.matrix[0, 0], 0.5, delta=5e-3)
            self.assertLess(residual, 0.05)

    def test_const4_sign_changes(self):
        """
        GIVEN the const4 preset.
        WHEN  the user evaluates the restricted smallest eigenvalue around
              pi (FREE) and 2 pi (FIXED).
        THEN  it must be nonnegative before and negative after.

        """
        system = const4().system()
        cases = ((RestrictionMode.FREE, np.pi, 0.05), (RestrictionMode.FIXED, 2.0 * np.pi, 0.1))

        for mode, crossing, gap in cases:
            _, before = form_at(system, np.zeros(4), crossing - gap, 400, 64)
            _, after = form_at(system, np.zeros(4), crossing + gap, 400, 64)

            self.assertGreaterEqual(signed_smallest_eig(before, mode), 0.0, mode.value)
            self.assertLess(signed_smallest_eig(after, mode), 0.0, mode.value)

    def test_restricted_eigenvector(self):
        """
        GIVEN the const4 form past t_cc.
        WHEN  the user takes the FREE minimizer.
        THEN  its end-point displacement must be parallel to X(T), its cone
              coordinate must have a unit norm and it must realize lambda_min.

        """
        _, qfd = form_at(const4().system(), np.zeros(4), 3.5, 400, 32)

        value, v = restricted_smallest_eig(qfd, RestrictionMode.FREE)

        shift = qfd.first_variation @ v
        np.testing.assert_allclose(constraint_rows(qfd, RestrictionMode.FREE).T @ shift, 0.0, atol=1e-10)
        self.assertAlmostEqual(v @ qfd.cone_gram @ v, 1.0, places=8)
        self.assertAlmostEqual(qfd.value(v), value, places=8)
        self.assertLess(value, 0.0)

    def test_smallest_eigenvalue_is_nonincreasing(self):
        """
        GIVEN the Martinet and const4 presets on 32 increasing horizons.
        WHEN  the user computes the restricted smallest eigenvalues.
        THEN  they must be nonincreasing within 1e-9 in both modes and the
              FREE one must never exceed the FIXED one.

        """
        cases = ((martinet(alpha=1.0).system(), 3, 10.0), (const4().system(), 4, 8.0))

        for system, n, horizon_max in cases:
            values = {mode: [] for mode in RestrictionMode}
            for horizon in horizon_max * np.arange(1, 33) / 32:
                _, qfd = form_at(system, np.zeros(n), horizon, 200, 32)
                for mode in RestrictionMode:
                    values[mode].append(restricted_smallest_eig(qfd, mode)[0])

            for mode, seq in values.items():
                self.assertLessEqual(np.max(np.diff(seq)), 1e-9, (n, mode.value))
            free, fixed = (np.array(values[m]) for m in (RestrictionMode.FREE, RestrictionMode.FIXED))
            self.assertTrue(np.all(free <= fixed + 1e-9), n)

    def test_chain_eigenvalue_matches_operator(self):
        """
        GIVEN the chain-n3 preset (b = 1/2), for which Q = 2 Q1.
        WHEN  the user computes the FIXED smallest eigenvalue at T = 2.
        THEN  it must be twice b pi^2 / T^2, the first eigenvalue of D1.

        """
        _, qfd = form_at(chain_n3().system(), np.zeros(3), 2.0, 200, 64)

        value, _ = restricted_smallest_eig(qfd, RestrictionMode.FIXED)

        self.assertAlmostEqual(value, 2.0 * 0.5 * np.pi ** 2 / 4.0, delta=1e-2)

    def test_chain_has_no_conjugate_time(self):
        """
        GIVEN the chain-n3 preset, whose Hessian form is positive.
        WHEN  the user searches a conjugate time up to T = 3.
        THEN  no crossing must be found.

        """
        result = conjugate_time_search(
            chain_n3().system(),
            np.zeros(3),
            RestrictionMode.FREE,
            3.0,
            tol=1e-2,
            m=16,
            samples=100
        )

        self.assertFalse(result.found)
        self.assertEqual(result.status, 'none')

    def test_control_grid_below_dimension(self):
        """
        GIVEN a control grid with fewer cells than the dimension.
        WHEN  the user assembles the Hessian form.
        THEN  a ValueError must be raised.

        """
        system = const4().system()
        traj = adjoint_along(reference_trajectory(system, np.zeros(4), 1.0, 50), system)

        with self.assertRaises(ValueError):
            hessian_form(traj, system, 3)

class ConjugateTimeSearchTest(TestCase):

    """
    Implementation of unit tests for the control-route conjugate-time search.

    """

    def test_const4_conjugate_times(self):
        """
        GIVEN the const4 preset, with t_cc = pi and t_c = 2 pi.
        WHEN  the user searches both conjugate times on the control route.
        THEN  they must match within 1e-3 and agree with the operator route
              within 2e-3.

        """
        system = const4().system()
        coeffs = CoefficientField.constant(4, const4().coefficients, label='const4')

        for mode, which, expected in ((RestrictionMode.FREE, 'D2', np.pi),
                                      (RestrictionMode.FIXED, 'D1', 2.0 * np.pi)):
            result = conjugate_time_search(system, np.zeros(4), mode, 8.0, tol=1e-4,
                                           m=64, samples=400)
            operator = operator_conjugate_time(coeffs, which, 8.0, tol=1e-4, grid=2000)

            self.assertTrue(result.found, mode.value)
            self.assertAlmostEqual(result.estimate, expected, delta=1e-3)
            self.assertAlmostEqual(result.estimate, operator.estimate, delta=2e-3)

    def test_martinet_has_no_conjugate_time(self):
        """
        GIVEN the Martinet preset, whose Hessian form stays positive.
        WHEN  the user searches both conjugate times up to T = 10.
        THEN  none must be found.

        """
        for mode in RestrictionMode:
            result = conjugate_time_search(martinet(alpha=1.0).system(), np.zeros(3), mode,
                                           10.0, tol=1e-3, m=32, samples=200)

            self.assertEqual(result.status, 'none', mode.value)

    def test_mesh_convergence(self):
        """
        GIVEN the const4 preset.
        WHEN  the user doubles the control grid from 64 to 128 cells.
        THEN  the first conjugate time must move by at most the bracket width.

        """
        estimates = [
            conjugate_time_search(const4().system(), np.zeros(4), RestrictionMode.FREE, 4.0,
                                  tol=1e-4, m=m, samples=400).estimate
            for m in (64, 128)
        ]

        self.assertLessEqual(abs(estimates[1] - estimates[0]), 1e-4)

if __name__ == "__main__":
    main()
