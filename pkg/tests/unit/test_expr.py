from unittest import TestCase, main

import numpy as np

from errors import (
    DimensionMismatchError,
    ExprSyntaxError,
    JetEvaluationError,
    UnknownIdentifierError
)
from expr import eval_jet, parse_expr, parse_field
from jet import hessian, jacobian

class ExprTest(TestCase):

    """
    Implementation of unit tests for the expression language.

    """

    def test_evaluate_polynomial_and_functions(self):
        """
        GIVEN an expression mixing powers, products and functions.
        WHEN  the user evaluates it on a batch of points.
        THEN  the values must match the direct numpy computation.

        """
        tree = parse_expr('x1^2*x2 - sin(x3) + exp(0) / 2', 3)
        points = np.array([[1.0, 2.0, 0.0], [0.5, -1.0, 0.3]])

        expected = points[:, 0] ** 2 * points[:, 1] - np.sin(points[:, 2]) + 0.5

        np.testing.assert_allclose(tree.evaluate(points), expected, rtol=1e-15)

    def test_precedence_and_unary_minus(self):
        """
        GIVEN expressions relying on operator precedence.
        WHEN  the user evaluates them.
        THEN  '^' must bind tighter than unary minus and '*' tighter than '+'.

        """
        point = np.array([[3.0]])

        self.assertEqual(parse_expr('-x1^2', 1).evaluate(point)[0], -9.0)
        self.assertEqual(parse_expr('1 + 2*x1', 1).evaluate(point)[0], 7.0)
        self.assertEqual(parse_expr('(1 + 2)*x1', 1).evaluate(point)[0], 9.0)
        self.assertEqual(parse_expr('1/(1 + (-0.5)*x1)', 1).evaluate(point)[0], -2.0)

    def test_syntax_error_offset(self):
        """
        GIVEN a malformed expression.
        WHEN  the user parses it.
        THEN  an ExprSyntaxError carrying the offset of the failure must be
              raised.

        """
        with self.assertRaises(ExprSyntaxError) as ctx:
            parse_expr('x1 + * x2', 2)

        self.assertEqual(ctx.exception.offset, 5)

        with self.assertRaises(ExprSyntaxError):
            parse_expr('(x1 + x2', 2)

        with self.assertRaises(ExprSyntaxError):
            parse_expr('x1^1.5', 1)

    def test_unknown_identifier(self):
        """
        GIVEN expressions with names other than x1..xn and the functions.
        WHEN  the user parses them.
        THEN  an UnknownIdentifierError must be raised.

        """
        with self.assertRaises(UnknownIdentifierError) as ctx:
            parse_expr('x1 + y', 3)

        self.assertEqual(ctx.exception.offset, 5)
        self.assertEqual(ctx.exception.name, 'y')

        with self.assertRaises(UnknownIdentifierError):
            parse_expr('x4', 3)

        with self.assertRaises(UnknownIdentifierError):
            parse_expr('x0', 3)

    def test_dimension_mismatch(self):
        """
        GIVEN a field with fewer components than the dimension.
        WHEN  the user parses it.
        THEN  a DimensionMismatchError must be raised.

        """
        with self.assertRaises(DimensionMismatchError):
            parse_field(['1', '0'], 3)

    def test_near_zero_divisor(self):
        """
        GIVEN a quotient whose denominator vanishes at the evaluation point.
        WHEN  the user evaluates it numerically or on jets.
        THEN  a JetEvaluationError must be raised.

        """
        field_ = parse_field(['1/(x1 - 1)'], 1)

        with self.assertRaises(JetEvaluationError):
            field_.evaluate(np.array([[1.0]]))

        with self.assertRaises(JetEvaluationError):
            eval_jet(field_, np.array([1.0]), 2)

    def test_sqrt_at_zero_on_jets(self):
        """
        GIVEN sqrt(x1) at x1 = 0.
        WHEN  the user evaluates it on plain values and on jets of order 1.
        THEN  the value must be 0 but the jet must be rejected.

        """
        field_ = parse_field(['sqrt(x1)'], 1)

        self.assertEqual(field_.evaluate(np.array([[0.0]]))[0, 0], 0.0)

        with self.assertRaises(JetEvaluationError):
            eval_jet(field_, np.array([0.0]), 1)

    def test_jet_coefficients(self):
        """
        GIVEN the component x1^2 x2 at (1, 2, 0).
        WHEN  the user evaluates it on jets of order 2.
        THEN  the coefficients must be the Taylor coefficients d^a f / a!.

        """
        field_ = parse_field(['x1^2*x2', '0', 'sin(x3)'], 3)
        jet = eval_jet(field_, np.array([1.0, 2.0, 0.0]), 2)[0]

        self.assertAlmostEqual(float(jet.value), 2.0)
        self.assertAlmostEqual(float(jet.coefficient((1, 0, 0))), 4.0)
        self.assertAlmostEqual(float(jet.coefficient((0, 1, 0))), 1.0)
        self.assertAlmostEqual(float(jet.coefficient((2, 0, 0))), 2.0)
        self.assertAlmostEqual(float(jet.coefficient((1, 1, 0))), 2.0)
        self.assertAlmostEqual(float(jet.coefficient((0, 2, 0))), 0.0)

    def test_jacobian_and_hessian(self):
        """
        GIVEN a field evaluated on a batch of base points.
        WHEN  the user reads the Jacobian and the Hessian off its jets.
        THEN  they must match the analytic derivatives at every point.

        """
        field_ = parse_field(['x1*x2', 'cos(x1)', 'x2^3'], 3)
        points = np.array([[0.3, -1.2, 0.0], [1.0, 0.5, 2.0]])
        jets = eval_jet(field_, points, 2)

        jac = jacobian(jets)
        hess = hessian(jets)

        for k, (x1, x2, _) in enumerate(points):
            np.testing.assert_allclose(jac[k], [
                [x2, x1, 0.0],
                [-np.sin(x1), 0.0, 0.0],
                [0.0, 3.0 * x2 ** 2, 0.0]
            ], atol=1e-14)
            np.testing.assert_allclose(hess[k, 0], [[0, 1, 0], [1, 0, 0], [0, 0, 0]], atol=1e-14)
            self.assertAlmostEqual(hess[k, 1, 0, 0], -np.cos(x1))
            self.assertAlmostEqual(hess[k, 2, 1, 1], 6.0 * x2)

    def test_jets_agree_with_plain_evaluation(self):
        """
        GIVEN a nonlinear field.
        WHEN  the user evaluates it on jets of any order.
        THEN  the jet values must equal the plain values.

        """
        field_ = parse_field(['exp(x1)*sqrt(1 + x2^2)', 'x1/(2 + x2)'], 2)
        points = np.array([[0.1, 0.2], [-0.7, 1.5]])

        for order in (0, 1, 3):
            values = np.stack([j.value for j in eval_jet(field_, points, order)], axis=-1)
            np.testing.assert_array_equal(values, field_.evaluate(points))

    def test_jets_exact_on_polynomials(self):
        """
        GIVEN random cubic polynomials in three variables.
        WHEN  the user evaluates them on jets of order 3 at a random point.
        THEN  the Taylor sum of the jet must reproduce the polynomial at
              other points.

        """
        rng = np.random.default_rng(7)
        monomials = [(i, j, k) for i in range(4) for j in range(4) for k in range(4)
                     if i + j + k <= 3]

        for _ in range(5):
            coeffs = rng.integers(-4, 5, size=len(monomials)).astype(float)
            text = ' + '.join('{}*x1^{}*x2^{}*x3^{}'.format(c, *m)
                              for c, m in zip(coeffs, monomials))
            field_ = parse_field([text, '0', '0'], 3)
            base = rng.uniform(-1.0, 1.0, 3)
            jet = eval_jet(field_, base, 3)[0]

            for point in rng.uniform(-2.0, 2.0, (4, 3)):
                taylor = sum(jet.coeffs[k] * np.prod((point - base) ** np.array(a))
                             for a, k in jet.space.index_of.items())
                self.assertAlmostEqual(taylor, float(field_.evaluate(point)[0]), places=9)

    def test_first_order_jets_match_central_differences(self):
        """
        GIVEN a field built from sin, cos, exp, sqrt and a quotient.
        WHEN  the user evaluates it on jets of order 1 at several points.
        THEN  the degree-1 coefficients must match central differences.

        """
        field_ = parse_field([
            'sin(x1*x2) + exp(x3)/(2 + x1)',
            'sqrt(1 + x1^2 + x2^2)*cos(x3)',
            'x1^3 - x2/(3 + x3^2)'
        ], 3)
        points = np.array([[0.3, -0.8, 0.1], [-1.1, 0.4, 1.3], [0.9, 1.7, -0.6]])
        h = 1e-6

        jac = jacobian(eval_jet(field_, points, 1))

        for k, point in enumerate(points):
            for i in range(3):
                step = np.zeros(3)
                step[i] = h
                column = (field_.evaluate(point + step) - field_.evaluate(point - step)) / (2.0 * h)
                np.testing.assert_allclose(jac[k][:, i], column, atol=1e-8)

    def test_printed_field_parses_back(self):
        """
        GIVEN a field using every operator, function and a scientific constant.
        WHEN  the user prints its components and parses them again.
        THEN  the new field must equal the original one.

        """
        field_ = parse_field([
            '-x1 + 2.5e-3*x2^3 - (x3 - 1)/4',
            'sin(cos(x1)) * exp(-x2) + sqrt(x3^2 + 1)',
            '((x1))^0 - -x2'
        ], 3, 'X')

        self.assertEqual(parse_field(field_.texts(), 3, 'X'), field_)

if __name__ == "__main__":
    main()
