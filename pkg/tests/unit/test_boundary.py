from unittest import TestCase, main

import numpy as np

from boundary import (
    BoundaryCase,
    boundary_curve,
    boundary_sweep,
    compute_A,
    gram_matrix,
    kernel_family,
    martinet_closed_form,
    mirrored_kernel,
    solve_kernel_bvp
)
from errors import BoundaryDataError, CoefficientError, SingularBoundaryProblemError
from operators import CoefficientField

CONST4 = CoefficientField.constant(4, [[-1.0, 0.0], [0.0, 1.0]], label='const4')
CHAIN3 = CoefficientField.constant(3, [[0.5]], label='chain-n3')

def const4_contact(horizon):
    return 1.0 / (2.0 * (np.tan(horizon / 2.0) - horizon / 2.0))

class BoundaryTest(TestCase):

    """
    Implementation of unit tests for the kernel functions and the contact
    coefficient A_T.

    """

    def test_const4_contact_coefficient(self):
        """
        GIVEN the const4 coefficients.
        WHEN  the user computes A_T at T = 1 and T = 4.
        THEN  it must match 1 / (2 (tan(T/2) - T/2)): about 10.7985 and
              -0.119473.

        """
        for horizon, expected in ((1.0, 10.7985), (4.0, -0.119473)):
            value = compute_A(CONST4, horizon, 1000)

            self.assertAlmostEqual(value, const4_contact(horizon), delta=1e-3 * abs(expected))
            self.assertAlmostEqual(value, expected, delta=1e-3 * abs(expected))

    def test_chain_contact_coefficient(self):
        """
        GIVEN b = 1/2 (n = 3), whose kernel function is J = t / T.
        WHEN  the user computes A_T at T = 2.
        THEN  A_T must be b / T = 0.25 and J must be linear.

        """
        profile = kernel_family(CHAIN3, 2.0, 400)[0]

        self.assertAlmostEqual(profile.energy(), 0.25, places=10)
        np.testing.assert_allclose(profile.values, profile.times / 2.0, atol=1e-12)

    def test_kernel_function_boundary_data(self):
        """
        GIVEN the const4 coefficients at T = 2.
        WHEN  the user solves the kernel family.
        THEN  J_0 must start at 0 and end at 1, and the discrete residual must
              be small.

        """
        family = kernel_family(CONST4, 2.0, 1000)

        self.assertEqual(len(family), 2)
        for profile in family:
            self.assertLess(profile.residual, 1e-6)

        self.assertAlmostEqual(family[0].values[0], 0.0, places=12)
        self.assertAlmostEqual(family[0].values[-1], 1.0, places=12)
        self.assertAlmostEqual(family[1].values[-1], 0.0, places=12)

    def test_gram_matrix(self):
        """
        GIVEN the const4 coefficients at T = 2.
        WHEN  the user computes the Gram matrix of the kernel functions.
        THEN  it must be symmetric with A_T in its first entry.

        """
        gram = gram_matrix(CONST4, 2.0, 1000)

        self.assertEqual(gram.shape, (2, 2))
        self.assertEqual(gram[0, 1], gram[1, 0])
        self.assertAlmostEqual(gram[0, 0], compute_A(CONST4, 2.0, 1000), places=12)

    def test_mirrored_kernel(self):
        """
        GIVEN constant coefficients, invariant under t -> T - t.
        WHEN  the user solves the mirrored kernel function.
        THEN  it must be the time reversal of J_0 with the same energy.

        """
        for coeffs in (CONST4, CHAIN3):
            direct = kernel_family(coeffs, 2.0, 400)[0]
            mirrored = mirrored_kernel(coeffs, 2.0, 0, 400)

            np.testing.assert_allclose(mirrored.values, direct.values[::-1], atol=1e-6)
            self.assertAlmostEqual(mirrored.energy(), direct.energy(), delta=1e-5 * abs(direct.energy()))

    def test_singular_beyond_fixed_conjugate_time(self):
        """
        GIVEN the const4 coefficients, for which t_c = 2 pi.
        WHEN  the user solves the kernel problem at T = 7.
        THEN  a SingularBoundaryProblemError must be raised.

        """
        with self.assertRaises(SingularBoundaryProblemError):
            compute_A(CONST4, 7.0, 1000)

    def test_bad_boundary_data(self):
        """
        GIVEN end data with the wrong number of derivatives.
        WHEN  the user solves the kernel problem.
        THEN  a BoundaryDataError must be raised.

        """
        with self.assertRaises(BoundaryDataError):
            solve_kernel_bvp(CONST4, 1.0, [0.0], [1.0, 0.0], 500)

    def test_boundary_curves(self):
        """
        GIVEN A_T = 0.5 at T = 1.
        WHEN  the user samples the predicted curves on [0.75, 1.25].
        THEN  the affine curve must be the parabola on both sides and the SR
              curve must vanish for x1 <= T.

        """
        affine = boundary_curve(0.5, 1.0, (0.75, 1.25), BoundaryCase.AFFINE, points=11)
        sr = boundary_curve(0.5, 1.0, (0.75, 1.25), BoundaryCase.SR, points=11)

        np.testing.assert_allclose(affine.xn, 0.5 * (affine.x1 - 1.0) ** 2)
        self.assertTrue(np.all(sr.xn[sr.x1 <= 1.0] == 0.0))
        np.testing.assert_allclose(sr.xn[sr.x1 > 1.0], 0.5 * (sr.x1[sr.x1 > 1.0] - 1.0) ** 2)
        self.assertIn(1.0, affine.x1)
        self.assertEqual(sr.to_dict()['case'], 'SR')

        with self.assertRaises(ValueError):
            boundary_curve(0.5, 2.0, (0.75, 1.25), BoundaryCase.AFFINE)

    def test_martinet_closed_form(self):
        """
        GIVEN the Martinet metric.
        WHEN  the user evaluates the closed-form contact coefficient.
        THEN  it must be 1 / (2 T alpha^2) and alpha = 0 must be rejected.

        """
        value, branch = martinet_closed_form(1.0, 1.0)

        self.assertEqual(value, 0.5)
        self.assertEqual(branch['exponent'], 3)
        self.assertAlmostEqual(martinet_closed_form(2.0, 0.5)[0], 0.25)

        with self.assertRaises(CoefficientError):
            martinet_closed_form(0.0, 1.0)

        with self.assertRaises(ValueError):
            martinet_closed_form(1.0, 0.0)

    def test_sweep_sign_law(self):
        """
        GIVEN the const4 coefficients, with t_cc = pi and t_c = 2 pi.
        WHEN  the user sweeps A_T over horizons in [1, 6].
        THEN  A_T must be positive before pi, negative after and decreasing.

        """
        sweep = boundary_sweep(CONST4, np.linspace(1.0, 6.0, 12), np.pi, 1000)

        self.assertTrue(sweep.sign_law)
        self.assertTrue(sweep.decreasing)
        self.assertEqual(len(sweep.to_dict()['A_T']), 12)

if __name__ == "__main__":
    main()
