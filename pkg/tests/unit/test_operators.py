from unittest import TestCase, main

import numpy as np

from errors import CoefficientError, ProfileTooCoarseError
from operators import (
    CoefficientField,
    SampledProfile,
    assemble,
    eig_inequality_check,
    fd_weights,
    operator_conjugate_time,
    quadratic_value,
    smallest_eigenvalue,
    spectrum
)

CONST4 = CoefficientField.constant(4, [[-1.0, 0.0], [0.0, 1.0]], label='const4')
CHAIN3 = CoefficientField.constant(3, [[0.5]], label='chain-n3')

def _quintic(horizon, a, b, samples=401):
    """
    Profile t^2 (T - t)^2 (a + b t) and its derivative, clamped to first order
    at both ends.

    """
    t = np.linspace(0.0, horizon, samples)
    xi = np.polynomial.Polynomial([0.0, 0.0, 1.0]) * \
        np.polynomial.Polynomial([horizon, -1.0]) ** 2 * np.polynomial.Polynomial([a, b])

    return t, xi(t), xi.deriv()(t)

class OperatorsTest(TestCase):

    """
    Implementation of unit tests for the discretized operators D1, D2 and the
    forms Q1, Q2.

    """

    def test_fd_weights(self):
        """
        GIVEN the centered 3-point stencil.
        WHEN  the user computes the first and second derivative weights.
        THEN  the classical weights must be returned.

        """
        np.testing.assert_allclose(fd_weights([-1, 0, 1], 1), [-0.5, 0.0, 0.5], atol=1e-15)
        np.testing.assert_allclose(fd_weights([-1, 0, 1], 2), [1.0, -2.0, 1.0], atol=1e-14)

    def test_structural_identity(self):
        """
        GIVEN 100 random profiles clamped to first order at both ends.
        WHEN  the user evaluates Q1 on xi and Q2 on xi'.
        THEN  both values must agree up to 1e-8 (relative).

        """
        rng = np.random.default_rng(11)

        for _ in range(100):
            horizon = rng.uniform(0.5, 4.0)
            t, xi, dxi = _quintic(horizon, *rng.normal(size=2))

            q1 = quadratic_value(CONST4, SampledProfile(t, xi), 'Q1')
            q2 = quadratic_value(CONST4, SampledProfile(t, dxi), 'Q2')

            self.assertLessEqual(abs(q1 - q2) / max(abs(q1), 1e-12), 1e-8)

    def test_quadratic_value_chain(self):
        """
        GIVEN b = 1/2 and xi = t (T - t) on [0, 1].
        WHEN  the user evaluates Q1.
        THEN  the value must be b int (T - 2t)^2 = 1/6.

        """
        t = np.linspace(0.0, 1.0, 201)

        value = quadratic_value(CHAIN3, SampledProfile(t, t * (1.0 - t)), 'Q1')

        self.assertAlmostEqual(value, 1.0 / 6.0, places=10)

    def test_profile_too_coarse(self):
        """
        GIVEN a profile with fewer samples than the interpolation requires.
        WHEN  the user evaluates a form on it.
        THEN  a ProfileTooCoarseError must be raised.

        """
        t = np.linspace(0.0, 1.0, 6)

        with self.assertRaises(ProfileTooCoarseError):
            quadratic_value(CHAIN3, SampledProfile(t, t * (1.0 - t)), 'Q1')

    def test_pairing_converges_to_quadrature(self):
        """
        GIVEN smooth clamped profiles on chain-n3 and const4.
        WHEN  the user halves the mesh of the discrete pairing (xi, D1 xi).
        THEN  the error against the quadrature value must decay with an
              observed order of at least 1.8.

        """
        cases = (
            (CONST4, 3.0, lambda t: t ** 2 * (3.0 - t) ** 2 * (1.0 + 0.5 * t)),
            (CHAIN3, 2.0, lambda t: t * (2.0 - t) * (1.0 - t + t ** 3))
        )

        for coeffs, horizon, profile in cases:
            fine = np.linspace(0.0, horizon, 4001)
            exact = quadratic_value(coeffs, SampledProfile(fine, profile(fine)), 'Q1')

            errors = []
            for grid in (50, 100, 200):
                op = assemble(coeffs, 'D1', grid, horizon)
                errors.append(abs(op.pairing(profile(op.times)) - exact))

            orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
            self.assertGreaterEqual(np.min(orders), 1.8, coeffs.label)

    def test_chain_spectrum(self):
        """
        GIVEN b = 1/2 (n = 3), where D1 = -b d^2/dt^2 with Dirichlet ends.
        WHEN  the user computes its smallest eigenvalue.
        THEN  it must approach b pi^2 / T^2 and the eigenprofile must be
              mass-normalized.

        """
        op = assemble(CHAIN3, 'D1', 2000, 2.0)

        values, profiles = spectrum(op, 2)

        self.assertAlmostEqual(values[0], 0.5 * np.pi ** 2 / 4.0, places=5)
        self.assertAlmostEqual(values[1], 0.5 * 4.0 * np.pi ** 2 / 4.0, places=4)
        self.assertAlmostEqual(np.sum(op.mass * op.restrict(profiles[0]) ** 2), 1.0, places=10)

    def test_const4_conjugate_times(self):
        """
        GIVEN the constant coefficients b11 = -1, b22 = 1.
        WHEN  the user locates the first zero crossings of D2 and D1.
        THEN  t_cc must be pi and t_c must be 2 pi within 1e-3.

        """
        t_cc = operator_conjugate_time(CONST4, 'D2', 8.0, tol=1e-4, grid=2000)
        t_c = operator_conjugate_time(CONST4, 'D1', 8.0, tol=1e-4, grid=2000)

        self.assertTrue(t_cc.found)
        self.assertTrue(t_c.found)
        self.assertAlmostEqual(t_cc.estimate, np.pi, delta=1e-3)
        self.assertAlmostEqual(t_c.estimate, 2.0 * np.pi, delta=1e-3)
        self.assertTrue(t_cc.monotone and t_c.monotone)

    def test_chain_has_no_conjugate_time(self):
        """
        GIVEN b = 1/2 (n = 3).
        WHEN  the user scans D2 and D1 up to T = 10.
        THEN  no crossing must be found.

        """
        for which in ('D1', 'D2'):
            result = operator_conjugate_time(CHAIN3, which, 10.0, grid=500)

            self.assertFalse(result.found)
            self.assertEqual(result.estimate, np.inf)
            self.assertTrue(np.all(result.values > 0.0))

    def test_eigenvalue_lemma(self):
        """
        GIVEN both presets on 32 horizons below t_c.
        WHEN  the user computes lambda_1 (D1) and mu_1 (D2).
        THEN  lambda_1 must be nonincreasing and lambda_1 > 2 mu_1 / T^2.

        """
        cases = (
            (CONST4, np.linspace(0.5, 6.0, 32)),
            (CHAIN3, np.linspace(0.5, 10.0, 32))
        )

        for coeffs, horizons in cases:
            checks = [eig_inequality_check(coeffs, T, 1000) for T in horizons]

            lam = np.array([c[0] for c in checks])
            self.assertTrue(np.all(np.diff(lam) <= 0.0), coeffs.label)
            self.assertTrue(all(c[2] for c in checks), coeffs.label)

    def test_scaling_preserves_crossing(self):
        """
        GIVEN a coefficient field and a positive multiple of it.
        WHEN  the user computes the smallest eigenvalue of D2.
        THEN  it must scale by the factor.

        """
        doubled = CONST4.scaled(2.0)

        self.assertAlmostEqual(
            smallest_eigenvalue(doubled, 'D2', 2.0, 400),
            2.0 * smallest_eigenvalue(CONST4, 'D2', 2.0, 400),
            places=10
        )
        np.testing.assert_allclose(doubled.matrix, [[-2.0, 0.0], [0.0, 2.0]])

    def test_coefficient_table(self):
        """
        GIVEN a sampled coefficient table.
        WHEN  the user builds a field from it.
        THEN  the values must interpolate the samples, the matrix must be
              symmetric and horizons beyond the table must be rejected.

        """
        times = np.linspace(0.0, 2.0, 9)
        field_ = CoefficientField.from_table(4, times, {
            'b11': -np.ones(9),
            'b12': 0.1 * times,
            'b22': 1.0 + times ** 2
        })

        values = field_.values([0.75])[0]
        self.assertAlmostEqual(values[0, 1], 0.075)
        self.assertAlmostEqual(values[1, 0], 0.075)
        self.assertAlmostEqual(values[1, 1], 1.5625)

        with self.assertRaises(CoefficientError):
            field_.check(3.0)

    def test_invalid_coefficients(self):
        """
        GIVEN coefficients breaking the field invariants.
        WHEN  the user builds or checks the field.
        THEN  a CoefficientError must be raised.

        """
        with self.assertRaises(CoefficientError):
            CoefficientField.constant(4, [[1.0, 0.5], [0.0, 1.0]])

        with self.assertRaises(CoefficientError):
            CoefficientField.constant(3, [[-1.0]]).check(1.0)

        with self.assertRaises(CoefficientError):
            CoefficientField.constant(2, [[]])

        with self.assertRaises(CoefficientError):
            CoefficientField.from_table(3, [0.0, 1.0], {'b21': [1.0, 1.0]})

if __name__ == "__main__":
    main()
