"""
First variation and intrinsic second derivative of the end-point mapping along
the reference trajectory, on a hat-function control basis.

For a control perturbation v the first variation solves
d1' = A d1 + v b (A = DX(gamma), b = Y(gamma)), and

    Q(v, w) = int d1_v' H d1_w + v g.d1_w + w g.d1_v dt

with H = sum_k lambda_k D^2 X_k, g = DY^T lambda and lambda' = -A^T lambda,
lambda(T) = p(T), so that Q(v, v) = p(T).d^2E_T(0)(v, v).

"""
from dataclasses import dataclass, field
from enum import Enum
import logging

import numpy as np
from scipy.integrate import solve_ivp, trapezoid
from scipy.linalg import cholesky, eigh, null_space, solve_triangular

from crossing import locate_crossing
from errors import (
    AssumptionFailure,
    CoefficientError,
    EmptyKernelError,
    IntegrationError,
    error_map
)
from expr import eval_jet
from geometry import (
    ad_sequence,
    adjoint_along,
    check_assumptions,
    reference_trajectory
)
from integrators import ControlGrid
from jet import hessian, jacobian
from operators import CoefficientField

logger = logging.getLogger(__name__)

# eigenvalues below -SIGN_TOLERANCE * max |eigenvalue| count as negative
SIGN_TOLERANCE = 1e-10

# relative xi-norm below which restricted directions are dropped
CONE_CUTOFF = 1e-12

class RestrictionMode(Enum):
    FIXED = 'FIXED'
    FREE = 'FREE'

@dataclass(frozen=True, eq=False)
class QuadraticFormData:

    """
    Implementation of the discretized first variation dE (n x m) and Hessian
    form Q (m x m) on the hat basis of a control grid.

    """

    horizon: float
    grid: ControlGrid = field(repr=False)
    first_variation: np.ndarray = field(repr=False)
    hessian: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    final_adjoint: np.ndarray = field(repr=False)
    final_drift: np.ndarray = field(repr=False)
    variations: np.ndarray = field(default=None, repr=False)
    multipliers: np.ndarray = field(default=None, repr=False)
    cone_gram: np.ndarray = field(default=None, repr=False)
    abnormal_residual: float = 0.0

    @property
    def size(self):
        return self.grid.size

    def value(self, v, w=None):
        """
        Evaluate the Hessian form on nodal control values.

        :v: Nodal values (size,).
        :w: Nodal values of the second argument (defaults to v).
        :returns: Q(v, w).

        """
        w = v if w is None else w
        return float(np.asarray(v) @ self.hessian @ np.asarray(w))

def _values(jets):
    return np.stack([j.value for j in jets], axis=-1)

class _Coefficients:

    """
    Implementation of the variational coefficients sampled at the RK4 stage
    times: step nodes and step midpoints.

    """

    def __init__(self, traj, system, grid, second_order):
        nodes = grid.step_nodes
        mids = grid.midpoints
        times = np.concatenate([nodes, mids])
        states = traj.state_at(times)

        x_jets = eval_jet(system.drift, states, 2 if second_order else 1)
        y_jets = eval_jet(system.control, states, 1)

        split = len(nodes)
        self.jac = np.split(jacobian(x_jets), [split])
        self.field = np.split(_values(y_jets), [split])

        if second_order:
            self.hess = np.split(hessian(x_jets), [split])
            self.control_jac = np.split(jacobian(y_jets), [split])

        cells = np.append(grid.step_cell, grid.step_cell[-1])
        self.hats = (
            grid.basis_matrix(nodes, cells),
            grid.basis_matrix(mids, grid.step_cell)
        )

    def node(self, name, i):
        return getattr(self, name)[0][i]

    def mid(self, name, i):
        return getattr(self, name)[1][i]

def _multipliers(coeffs, grid, final):
    """
    Integrate lambda' = -A^T lambda backward from lambda(T) = final.

    :returns: (lambda at step nodes, lambda at step midpoints).

    """
    steps = grid.steps
    h = grid.step_sizes
    nodes = np.zeros((steps + 1, len(final)))
    nodes[-1] = final

    def rhs(jac, lam):
        return -jac.T @ lam

    for i in range(steps - 1, -1, -1):
        lam = nodes[i + 1]
        k1 = rhs(coeffs.node('jac', i + 1), lam)
        k2 = rhs(coeffs.mid('jac', i), lam - 0.5 * h[i] * k1)
        k3 = rhs(coeffs.mid('jac', i), lam - 0.5 * h[i] * k2)
        k4 = rhs(coeffs.node('jac', i), lam - h[i] * k3)
        nodes[i] = lam - h[i] / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    # cubic Hermite midpoint values
    slopes = -np.einsum('lki,lk->li', coeffs.jac[0], nodes)
    mids = 0.5 * (nodes[:-1] + nodes[1:]) + h[:, None] / 8.0 * (slopes[:-1] - slopes[1:])

    return nodes, mids

def _sweep(traj, system, grid, second_order):
    """
    Forward RK4 sweep of the first variations of every basis element and, when
    requested, of the Hessian form.

    :returns: (variation history (steps + 1, n, m), Q or None, lambda at nodes or None).

    """
    coeffs = _Coefficients(traj, system, grid, second_order)
    n, m = traj.n, grid.size
    h = grid.step_sizes

    if second_order:
        lam_nodes, lam_mids = _multipliers(coeffs, grid, traj.final_adjoint)
        curv = (
            np.einsum('lk,lkij->lij', lam_nodes, coeffs.hess[0]),
            np.einsum('lk,lkij->lij', lam_mids, coeffs.hess[1])
        )
        grad = (
            np.einsum('lki,lk->li', coeffs.control_jac[0], lam_nodes),
            np.einsum('lki,lk->li', coeffs.control_jac[1], lam_mids)
        )
    else:
        lam_nodes = None

    def stage(where, i, var):
        jac = coeffs.jac[where][i]
        hat = coeffs.hats[where][i]
        dvar = jac @ var + np.outer(coeffs.field[where][i], hat)
        if not second_order:
            return dvar, None

        dq = var.T @ curv[where][i] @ var
        cross = np.outer(hat, grad[where][i] @ var)
        return dvar, dq + cross + cross.T

    history = np.zeros((grid.steps + 1, n, m))
    q = np.zeros((m, m)) if second_order else None
    var = history[0]

    for i in range(grid.steps):
        k1, q1 = stage(0, i, var)
        k2, q2 = stage(1, i, var + 0.5 * h[i] * k1)
        k3, q3 = stage(1, i, var + 0.5 * h[i] * k2)
        k4, q4 = stage(0, i + 1, var + h[i] * k3)

        var = var + h[i] / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if second_order:
            q += h[i] / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4)

        history[i + 1] = var

    if not np.all(np.isfinite(history[-1])):
        raise IntegrationError(error_map['integration'].format('variational blow-up'))

    if second_order:
        q = 0.5 * (q + q.T)

    return history, q, lam_nodes

def _coframe(system, states, adjoint):
    """
    Covector e1* along the trajectory: <e1*, X> = 1, e1* orthogonal to
    ad^k X.Y (k <= n - 3) and to the adjoint.

    :returns: Array (len(states), n).

    """
    n = states.shape[-1]
    drift = system.drift.evaluate(states)
    cone = ad_sequence(system.drift, system.control, states, max(n - 3, 0))[..., :n - 2, :]

    frame = np.concatenate([drift[:, None, :], cone, adjoint[:, None, :]], axis=1)
    rhs = np.zeros((len(states), n))
    rhs[:, 0] = 1.0

    return np.linalg.solve(frame, rhs[..., None])[..., 0]

def first_variation_matrix(traj, system, m):
    """
    End-point displacement of every hat basis element.

    :traj: TrajectoryData with adjoint.
    :system: The ControlSystem.
    :m: Number of uniform control cells.
    :returns: Matrix dE of shape (n, grid.size).

    """
    grid = ControlGrid(traj.horizon, m)
    history, _, _ = _sweep(traj, system, grid, second_order=False)

    return history[-1]

def hessian_form(traj, system, m):
    """
    Assemble dE and the Hessian form Q on the hat basis.

    :traj: TrajectoryData with adjoint.
    :system: The ControlSystem.
    :m: Number of uniform control cells (m >= n).
    :returns: The QuadraticFormData.

    """
    if m < traj.n:
        raise ValueError('control grid of {} cells below dimension {}'.format(m, traj.n))

    grid = ControlGrid(traj.horizon, m)
    history, q, lam = _sweep(traj, system, grid, second_order=True)

    de = history[-1]
    p = traj.final_adjoint
    times = grid.step_nodes
    cone = np.einsum('li,lim->lm', _coframe(system, traj.state_at(times), lam), history)
    cone_gram = trapezoid(cone[:, :, None] * cone[:, None, :], x=times, axis=0)

    residual = float(np.max(np.abs(p @ de)) / max(np.max(np.abs(de)), 1e-300))
    logger.debug('hessian form: T=%g, %d basis functions, |p.dE| / |dE| = %.2e',
                 traj.horizon, grid.size, residual)

    return QuadraticFormData(
        horizon=traj.horizon,
        grid=grid,
        first_variation=de,
        hessian=q,
        weights=grid.gram(),
        final_adjoint=p,
        final_drift=traj.drift_values[-1],
        variations=history,
        multipliers=lam,
        cone_gram=0.5 * (cone_gram + cone_gram.T),
        abnormal_residual=residual
    )

def constraint_rows(qfd, mode):
    """
    Directions whose end-point displacement a restriction mode annihilates.

    :qfd: The QuadraticFormData.
    :mode: The RestrictionMode.
    :returns: Orthonormal columns of shape (n, n - 1) (FIXED) or (n, n - 2) (FREE).

    """
    p = qfd.final_adjoint
    if mode is RestrictionMode.FIXED:
        return null_space(p[None, :])

    return null_space(np.vstack([qfd.final_drift, p]))

def restricted_basis(qfd, mode):
    """
    Basis of the restricted kernel, orthonormal for the control L2 product.

    :qfd: The QuadraticFormData.
    :mode: The RestrictionMode.
    :returns: Matrix Z of shape (size, k) with Z^T W Z = I.

    """
    rows = constraint_rows(qfd, mode).T @ qfd.first_variation
    kernel = null_space(rows)
    if kernel.shape[1] == 0:
        raise EmptyKernelError(error_map['kernel'].format(mode.value))

    gram = kernel.T @ qfd.weights @ kernel
    upper = cholesky(gram, lower=False)

    return solve_triangular(upper, kernel.T, trans='T').T

def restricted_smallest_eig(qfd, mode):
    """
    Smallest eigenvalue of Q on the restricted kernel, measured by the L2 norm
    of the cone coordinate xi = <e1*, d1>.

    Directions whose xi-norm is below CONE_CUTOFF of the largest one are
    dropped: their Rayleigh quotient is large and positive.

    :qfd: The QuadraticFormData.
    :mode: The RestrictionMode.
    :returns: (lambda_min, nodal values of the eigenvector, unit xi-norm).

    """
    basis = restricted_basis(qfd, mode)
    reduced = basis.T @ qfd.hessian @ basis
    norm = basis.T @ qfd.cone_gram @ basis

    weights, frame = eigh(0.5 * (norm + norm.T))
    keep = weights > CONE_CUTOFF * weights[-1]
    scaled = frame[:, keep] / np.sqrt(weights[keep])

    values, vectors = eigh(scaled.T @ reduced @ scaled)
    logger.debug('%s: lambda_min = %.6e on %d of %d kernel directions',
                 mode.value, values[0], np.count_nonzero(keep), basis.shape[1])

    return float(values[0]), basis @ scaled @ vectors[:, 0]

def signed_smallest_eig(qfd, mode):
    """
    Smallest restricted eigenvalue with numerical noise around 0 removed.

    :returns: lambda_min when clearly negative, max(lambda_min, 0) otherwise.

    """
    basis = restricted_basis(qfd, mode)
    reduced = basis.T @ qfd.hessian @ basis
    values = eigh(0.5 * (reduced + reduced.T), eigvals_only=True)

    if values[0] < -SIGN_TOLERANCE * np.max(np.abs(values)):
        return float(values[0])

    return max(float(values[0]), 0.0)

def form_at(system, x0, horizon, samples, m, rank_tol=1e-7):
    """
    Reference trajectory, adjoint and Hessian form at one horizon.

    :returns: (TrajectoryData, QuadraticFormData).

    """
    traj = adjoint_along(reference_trajectory(system, x0, horizon, samples), system, rank_tol)
    return traj, hessian_form(traj, system, m)

def conjugate_time_search(system, x0, mode, horizon_max, tol=1e-4, m=64, samples=400,
                          assumption_tol=1e-6, rank_tol=1e-7, progress=None):
    """
    First horizon where the restricted Hessian acquires a negative direction.

    :system: The ControlSystem.
    :x0: Initial state.
    :mode: RestrictionMode.FREE (t_cc) or RestrictionMode.FIXED (t_c).
    :horizon_max: Largest scanned horizon.
    :tol: Width of the returned bracket.
    :m: Number of uniform control cells.
    :samples: Number of trajectory grid intervals.
    :assumption_tol: Tolerance of the assumption gate on [0, horizon_max].
    :rank_tol: Relative singular-value threshold.
    :progress: Optional callable (done, total) of the coarse scan.
    :returns: The ConjugateTimeResult.

    """
    traj = reference_trajectory(system, x0, horizon_max, samples)
    report = check_assumptions(traj, system, assumption_tol, rank_tol)
    if not report.passed:
        raise AssumptionFailure(report)

    def evaluate(horizon):
        _, qfd = form_at(system, x0, horizon, samples, m, rank_tol)
        return signed_smallest_eig(qfd, mode)

    return locate_crossing(evaluate, horizon_max, tol, mode.value, progress=progress)

def _integrate_batch(system, grid, x0, controls):
    """
    Integrate x' = X(x) + u Y(x) for a batch of piecewise-linear controls,
    cell by cell.

    :controls: Nodal values, shape (B, size).
    :returns: Final states, shape (B, n).

    """
    n = system.n
    batch = len(controls)
    state = np.tile(np.asarray(x0, dtype=float), batch)

    for c in range(grid.size - 1):
        t0, t1 = grid.nodes[c], grid.nodes[c + 1]
        left, right = controls[:, c], controls[:, c + 1]

        def rhs(t, x):
            x = x.reshape(batch, n)
            u = left + (right - left) * (t - t0) / (t1 - t0)
            dx = system.drift.evaluate(x) + u[:, None] * system.control.evaluate(x)
            return dx.ravel()

        sol = solve_ivp(rhs, (t0, t1), state, method='DOP853', rtol=1e-12, atol=1e-13)
        if sol.status != 0:
            raise IntegrationError(error_map['integration'].format(sol.message))
        state = sol.y[:, -1]

    return state.reshape(batch, n)

def fd_oracle(system, traj, v, h, grid):
    """
    Central second difference of <p(T), x_{hv}(T)> along the nonlinear flow.

    :system: The ControlSystem.
    :traj: TrajectoryData with adjoint.
    :v: Nodal control values on the grid, shape (size,) or (k, size).
    :h: Step h > 0.
    :grid: The ControlGrid of v.
    :returns: The oracle value (array of k values for a batch).

    """
    if h <= 0:
        raise ValueError('the step must be positive, got {}'.format(h))

    v = np.atleast_2d(np.asarray(v, dtype=float))
    batch = np.vstack([np.zeros(grid.size), h * v, -h * v])

    ends = _integrate_batch(system, grid, traj.samples[0], batch) @ traj.final_adjoint
    k = len(v)
    out = (ends[1:k + 1] + ends[k + 1:] - 2.0 * ends[0]) / h ** 2

    return out if k > 1 else float(out[0])

def calibrate_coefficients(qfd, traj, system):
    """
    Fit the coefficient b of a three-dimensional system from the Hessian form:
    Q = 2 Q1(xi) = 2 b int xi'^2 on the FREE kernel, xi being the cone
    coordinate dual to X of the first variation.

    :qfd: The QuadraticFormData (with variation history).
    :traj: TrajectoryData with adjoint.
    :system: The ControlSystem.
    :returns: (CoefficientField, relative fit residual).

    """
    n = traj.n
    if n != 3:
        raise CoefficientError(error_map['coefficient'].format(
            'calibration needs n = 3, got {}'.format(n)
        ))

    grid = qfd.grid
    times = grid.step_nodes
    states = traj.state_at(times)

    dual = _coframe(system, states, qfd.multipliers)

    jac = jacobian(eval_jet(system.drift, states, 1))
    rate = np.gradient(dual, times, axis=0) + np.einsum('lki,lk->li', jac, dual)
    slope = np.einsum('li,lim->lm', rate, qfd.variations)

    energy = trapezoid(slope[:, :, None] * slope[:, None, :], x=times, axis=0)

    basis = restricted_basis(qfd, RestrictionMode.FREE)
    q = basis.T @ qfd.hessian @ basis
    g = basis.T @ energy @ basis

    b = float(np.sum(q * g) / (2.0 * np.sum(g * g)))
    residual = float(np.linalg.norm(q - 2.0 * b * g) / np.linalg.norm(q))
    logger.info('calibrated coefficient b = %.10g (relative residual %.2e)', b, residual)

    return CoefficientField.constant(3, [[b]], label='calibrated'), residual
