"""
Kernel functions of D1, the contact coefficient A_T = Q1(J) and the predicted
boundary curves of the accessibility sets near the abnormal end-point.

"""
from dataclasses import dataclass, field
from enum import Enum
import logging

import numpy as np
from scipy.interpolate import BPoly
from scipy.sparse.linalg import spsolve

from errors import (
    BoundaryDataError,
    CoefficientError,
    SingularBoundaryProblemError,
    error_map
)
from operators import assemble, spectrum

logger = logging.getLogger(__name__)

class BoundaryCase(Enum):
    AFFINE = 'AFFINE'
    SR = 'SR'

@dataclass(frozen=True, eq=False)
class KernelProfile:

    """
    Implementation of a solution J of D1 J = 0 with prescribed end data: a
    polynomial lifting of the data plus a discrete correction vanishing with
    its clamped derivatives at both ends.

    """

    horizon: float
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    lifting: BPoly = field(repr=False)
    correction: np.ndarray = field(repr=False)
    operator: object = field(repr=False)
    residual: float = 0.0

    def terms(self):
        """
        Derivatives entering q1 at the evaluation points of the operator.

        :returns: Array (n - 2, n_eval).

        """
        op = self.operator
        exact = np.stack([self.lifting.derivative(d)(op.eval_times) if d else
                          self.lifting(op.eval_times) for d in op.orders])

        return exact + op.form_terms(self.correction)

    def energy(self, other=None):
        """
        Discrete bilinear value Q1(J, K) with the quadrature of the operator.

        :other: Second KernelProfile on the same operator (defaults to self).
        :returns: The value.

        """
        left = self.terms()
        right = left if other is None else other.terms()
        op = self.operator

        return float(np.einsum('e,ae,eab,be->', op.weights, left, op.coefficients, right))

def solve_kernel_bvp(coeffs, horizon, left, right, grid=2000):
    """
    Solve D1 J = 0 on [0, T] with J^(k)(0) = left[k], J^(k)(T) = right[k],
    k = 0..n-3.

    :coeffs: The CoefficientField.
    :horizon: Final time T (below t_c).
    :left: Derivative values at t = 0.
    :right: Derivative values at t = T.
    :grid: Number of grid intervals.
    :returns: The KernelProfile.

    """
    r = coeffs.size
    for data in (left, right):
        if len(data) != r:
            raise BoundaryDataError(error_map['boundary_data'].format(r, len(data)))

    op = assemble(coeffs, 'D1', grid, horizon)

    lowest = spectrum(op, 1)[0][0]
    if lowest <= 0.0:
        raise SingularBoundaryProblemError(error_map['singular'].format(horizon))

    lifting = BPoly.from_derivatives(
        [0.0, horizon],
        [np.asarray(left, dtype=float), np.asarray(right, dtype=float)]
    )

    exact = np.stack([lifting.derivative(d)(op.eval_times) if d else lifting(op.eval_times)
                      for d in op.orders])
    weighted = np.einsum('e,eab,be->ae', op.weights, op.coefficients, exact)
    load = sum(d.T @ w for d, w in zip(op.derivatives, weighted))

    if np.any(load):
        correction = spsolve(op.stiffness.tocsc(), -load)
        residual = float(np.linalg.norm(op.stiffness @ correction + load) / np.linalg.norm(load))
    else:
        correction = np.zeros(op.dof)
        residual = 0.0

    times = op.times
    values = lifting(times) + op.extend(correction)
    logger.debug('kernel BVP: T=%g, lambda_1=%.6e, residual %.2e', horizon, lowest, residual)

    return KernelProfile(horizon, times, values, lifting, correction, op, residual)

def kernel_family(coeffs, horizon, grid=2000):
    """
    Kernel functions J_i, i = 0..n-3: zero data at t = 0 and
    J_i^(k)(T) = delta_ik.

    :returns: List of KernelProfile.

    """
    r = coeffs.size
    return [
        solve_kernel_bvp(coeffs, horizon, np.zeros(r), np.eye(r)[i], grid)
        for i in range(r)
    ]

def mirrored_kernel(coeffs, horizon, i, grid=2000):
    """
    Mirrored kernel function: J^(k)(0) = delta_ik and zero data at t = T.

    """
    r = coeffs.size
    return solve_kernel_bvp(coeffs, horizon, np.eye(r)[i], np.zeros(r), grid)

def compute_A(coeffs, horizon, grid=2000):
    """
    Contact coefficient A_T = Q1(J), J(0..) = 0 and J^(k)(T) = delta_0k.

    :coeffs: The CoefficientField.
    :horizon: Final time T (below t_c).
    :grid: Number of grid intervals.
    :returns: A_T.

    """
    return kernel_family(coeffs, horizon, grid)[0].energy()

def gram_matrix(coeffs, horizon, grid=2000, family=None):
    """
    Symmetric matrix A_ij = Q1(J_i, J_j) of the kernel functions.

    :family: Already solved kernel functions J_i (solved when missing).
    :returns: Array (n - 2, n - 2).

    """
    if family is None:
        family = kernel_family(coeffs, horizon, grid)
    r = len(family)

    out = np.zeros((r, r))
    for i in range(r):
        for j in range(i, r):
            out[i, j] = out[j, i] = family[i].energy(family[j])

    return out

@dataclass(frozen=True, eq=False)
class BoundaryCurve:

    """
    Implementation of the predicted contact curve of the boundary with the
    abnormal direction, sampled over an x1 window.

    """

    horizon: float
    coefficient: float
    case: BoundaryCase
    x1: np.ndarray = field(repr=False)
    xn: np.ndarray = field(repr=False)
    profile: object = field(default=None, repr=False)

    def rows(self):
        return zip(self.x1, self.xn)

    def to_dict(self):
        return {
            'T': self.horizon,
            'A_T': self.coefficient,
            'case': self.case.value
        }

def boundary_curve(coefficient, horizon, window, case, points=201, profile=None):
    """
    Sample xn = A_T (x1 - T)^2, restricted to x1 >= T in the SR case.

    :coefficient: A_T.
    :horizon: Final time T.
    :window: (x1_min, x1_max) containing T.
    :case: The BoundaryCase.
    :points: Number of samples (T is always added).
    :profile: Optional KernelProfile stored with the curve.
    :returns: The BoundaryCurve.

    """
    low, high = window
    if not low <= horizon <= high:
        raise ValueError('window [{}, {}] does not contain T = {}'.format(low, high, horizon))

    x1 = np.union1d(np.linspace(low, high, points), [horizon])
    xn = coefficient * (x1 - horizon) ** 2
    if case is BoundaryCase.SR:
        xn = np.where(x1 <= horizon, 0.0, xn)

    return BoundaryCurve(float(horizon), float(coefficient), case, x1, xn, profile)

def martinet_closed_form(alpha, horizon):
    """
    Contacts of the Martinet sphere: branch 1 z = (x - T)^2 / (2 T alpha^2),
    branch 2 z ~ (x - T)^3 / 6 for small T.

    :alpha: Metric parameter (nonzero).
    :horizon: Final time T > 0.
    :returns: (A_T, description of branch 2).

    """
    if alpha == 0:
        raise CoefficientError(
            error_map['coefficient'].format('alpha = 0 violates the assumptions')
        )
    if horizon <= 0:
        raise ValueError('the horizon must be positive, got {}'.format(horizon))

    branch = {'side': 'x1 <= T', 'exponent': 3, 'coefficient': 1.0 / 6.0, 'regime': 'T -> 0'}

    return 1.0 / (2.0 * horizon * alpha ** 2), branch

@dataclass
class BoundarySweep:
    horizons: np.ndarray
    values: np.ndarray
    decreasing: bool
    sign_law: bool

    def to_dict(self):
        return {
            'horizons': self.horizons.tolist(),
            'A_T': self.values.tolist(),
            'decreasing': self.decreasing,
            'sign_law': self.sign_law
        }

def boundary_sweep(coeffs, horizons, t_cc=np.inf, grid=2000):
    """
    A_T over a grid of horizons below t_c, with the sign law against t_cc and
    strict decrease.

    :coeffs: The CoefficientField.
    :horizons: Increasing horizons, all below t_c.
    :t_cc: First conjugate time of D2 (inf when there is none).
    :grid: Number of grid intervals.
    :returns: The BoundarySweep.

    """
    horizons = np.asarray(horizons, dtype=float)
    values = np.array([compute_A(coeffs, T, grid) for T in horizons])

    expected = np.where(horizons < t_cc, 1.0, -1.0)
    sign_law = bool(np.all(np.sign(values) == expected))
    decreasing = bool(np.all(np.diff(values) < 0.0))

    if not sign_law:
        logger.warning('A_T sign law violated on the sweep')

    return BoundarySweep(horizons, values, decreasing, sign_law)
