"""
Finite-difference realization of the operators D1 (on F1, order 2(n - 2)) and
D2 (on F2, order 2(n - 3)) through their energy forms

    Q1(xi) = int sum_{i,j=1..n-2} b_ij xi^(i) xi^(j) dt
    Q2(xi) = int sum_{i,j=1..n-2} b_ij xi^(i-1) xi^(j-1) dt

so that D1 = -d/dt D2 d/dt and Q1(xi) = Q2(xi').

The unknowns are nodal values on a uniform grid of [0, T]. Clamped conditions
xi^(i)(0) = xi^(i)(T) = 0 for i below the top derivative order are imposed
strongly: end values are eliminated and the ghost values needed by the
centered stencils are extrapolated with polynomials that satisfy them.

"""
from collections import namedtuple
from dataclasses import dataclass, field
from math import factorial
import logging

import numpy as np
from scipy import sparse
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline, make_interp_spline
from scipy.linalg import eig_banded

from crossing import locate_crossing
from errors import CoefficientError, ProfileTooCoarseError, error_map

logger = logging.getLogger(__name__)

OPERATORS = ('D1', 'D2')
FORMS = ('Q1', 'Q2')

# samples of the coefficient field checked for positivity
_CHECK_SAMPLES = 201

# interior values used to extrapolate each ghost node
_GHOST_FIT = 2

SampledProfile = namedtuple('SampledProfile', 'times values')

class CoefficientField:

    """
    Implementation of the symmetric coefficient functions b_ij(t),
    i, j = 1..n-2, shared by q1 (derivatives 1..n-2) and q2 (derivatives
    0..n-3).

    """

    def __init__(self, n, sampler, t_end=np.inf, label='custom', matrix=None):
        """
        Initialize the field internal data.

        :n: Dimension of the state space (n >= 3).
        :sampler: Callable t -> array (len(t), n - 2, n - 2).
        :t_end: Largest time where the field is defined.
        :label: Description stored in the reports.
        :matrix: The constant matrix, for constant fields.

        """
        if n < 3:
            raise CoefficientError(
                error_map['coefficient'].format('dimension {} < 3'.format(n))
            )

        self.__n = n
        self.__sampler = sampler
        self.__t_end = t_end
        self.__label = label
        self.__matrix = matrix

    @classmethod
    def constant(cls, n, matrix, label='constant'):
        """
        Build a field of constant coefficients.

        :n: Dimension of the state space.
        :matrix: Symmetric (n - 2) x (n - 2) matrix (a scalar when n = 3).
        :label: Description stored in the reports.
        :returns: The CoefficientField.

        """
        matrix = np.array(matrix, dtype=float).reshape(n - 2, n - 2)
        if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-14):
            raise CoefficientError(error_map['coefficient'].format('not symmetric'))

        def sampler(t):
            return np.broadcast_to(matrix, (len(t),) + matrix.shape)

        return cls(n, sampler, label=label, matrix=matrix)

    @classmethod
    def from_table(cls, n, times, columns, label='table'):
        """
        Build a field from sampled coefficients, interpolated by cubic splines.

        :n: Dimension of the state space.
        :times: Increasing sample times starting at 0.
        :columns: Dictionary 'bij' -> samples (i <= j); missing entries are 0.
        :label: Description stored in the reports.
        :returns: The CoefficientField.

        """
        r = n - 2
        times = np.asarray(times, dtype=float)
        if len(times) < 2 or np.any(np.diff(times) <= 0.0):
            raise CoefficientError(
                error_map['coefficient'].format('table times must increase')
            )

        splines = {}
        for name, samples in columns.items():
            i, j = _entry(name, r)
            splines[(min(i, j), max(i, j))] = CubicSpline(times, np.asarray(samples, dtype=float))

        def sampler(t):
            out = np.zeros((len(t), r, r))
            for (i, j), spline in splines.items():
                out[:, i, j] = spline(t)
                out[:, j, i] = out[:, i, j]
            return out

        return cls(n, sampler, t_end=times[-1], label=label)

    @property
    def n(self):
        return self.__n

    @property
    def size(self):
        return self.__n - 2

    @property
    def label(self):
        return self.__label

    @property
    def matrix(self):
        return self.__matrix

    def values(self, t):
        """
        Evaluate the coefficients.

        :t: Array of times.
        :returns: Array of shape (len(t), n - 2, n - 2).

        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.asarray(self.__sampler(t), dtype=float)

    def scaled(self, factor):
        """
        Multiply every coefficient by a positive factor.

        :factor: The factor.
        :returns: A new CoefficientField.

        """
        sampler = self.__sampler
        matrix = None if self.__matrix is None else factor * self.__matrix

        return CoefficientField(
            self.__n,
            lambda t: factor * np.asarray(sampler(t)),
            self.__t_end,
            '{}*{}'.format(factor, self.__label),
            matrix
        )

    def check(self, horizon):
        """
        Verify the field on [0, T]: defined there and with a positive top
        coefficient.

        :horizon: Final time T.

        """
        if horizon > self.__t_end * (1.0 + 1e-12):
            raise CoefficientError(error_map['coefficient'].format(
                'defined up to t = {}, horizon {}'.format(self.__t_end, horizon)
            ))

        t = np.linspace(0.0, horizon, _CHECK_SAMPLES)
        top = self.values(t)[:, -1, -1]
        if np.any(top <= 0.0):
            k = int(np.argmax(top <= 0.0))
            raise CoefficientError(error_map['coefficient'].format(
                'top coefficient {} <= 0 at t = {}'.format(top[k], t[k])
            ))

    def to_dict(self):
        out = {'label': self.__label, 'n': self.__n}
        if self.__matrix is not None:
            out['matrix'] = self.__matrix.tolist()

        return out

def _entry(name, r):
    if len(name) != 3 or name[0] != 'b' or not name[1:].isdigit():
        raise CoefficientError(
            error_map['coefficient'].format('bad column \'{}\''.format(name))
        )

    i, j = int(name[1]) - 1, int(name[2]) - 1
    if not (0 <= i < r and 0 <= j < r):
        raise CoefficientError(
            error_map['coefficient'].format('entry {} out of range'.format(name))
        )

    return i, j

def fd_weights(offsets, order):
    """
    Finite-difference weights on arbitrary offsets.

    :offsets: Stencil offsets in units of the grid step.
    :order: Derivative order (< number of offsets).
    :returns: Weights w such that sum w_k f(x + o_k h) = h^order f^(order)(x) + ...

    """
    offsets = np.asarray(offsets, dtype=float)
    size = len(offsets)
    vander = np.vander(offsets, size, increasing=True).T

    rhs = np.zeros(size)
    rhs[order] = factorial(order)

    return np.linalg.solve(vander, rhs)

def _stencil(order, staggered):
    # smallest centered stencil: odd size at nodes, even size at midpoints
    size = order + 1
    if size % 2 != (0 if staggered else 1):
        size += 1

    offsets = np.arange(size) - (size - 1) / 2.0
    return offsets, fd_weights(offsets, order)

def _layout(n, which):
    """
    Derivative orders of a form.

    :returns: (orders, top) where orders[a] is the derivative paired with
              coefficient row a and top the highest order.

    """
    shift = 1 if which in ('D1', 'Q1') else 0
    orders = [a + shift for a in range(n - 2)]

    return orders, orders[-1]

@dataclass(frozen=True, eq=False)
class OperatorMatrix:

    """
    Implementation of an assembled operator: symmetric stiffness realizing the
    energy form, lumped L2 mass, and the pieces needed to apply the form to
    arbitrary nodal data.

    """

    which: str
    horizon: float
    grid: int
    stiffness: sparse.csr_matrix = field(repr=False)
    mass: np.ndarray = field(repr=False)
    unknowns: np.ndarray = field(repr=False)
    derivatives: list = field(repr=False)
    weights: np.ndarray = field(repr=False)
    coefficients: np.ndarray = field(repr=False)
    eval_times: np.ndarray = field(repr=False)
    orders: tuple = ()
    boundary: str = ''

    @property
    def step(self):
        return self.horizon / self.grid

    @property
    def times(self):
        return np.linspace(0.0, self.horizon, self.grid + 1)

    @property
    def dof(self):
        return len(self.unknowns)

    @property
    def bandwidth(self):
        coo = self.stiffness.tocoo()
        return int(np.max(np.abs(coo.col - coo.row))) if coo.nnz else 0

    def restrict(self, nodal):
        """
        Take the unknowns out of nodal values.

        :nodal: Array (..., grid + 1).
        :returns: Array (..., dof).

        """
        return np.asarray(nodal, dtype=float)[..., self.unknowns]

    def extend(self, x):
        """
        Nodal values of a vector of unknowns (clamped end values are 0).

        :x: Array (..., dof).
        :returns: Array (..., grid + 1).

        """
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (self.grid + 1,))
        out[..., self.unknowns] = x

        return out

    def pairing(self, nodal, other=None):
        """
        Discrete bilinear pairing (xi, D eta) of nodal profiles.

        :nodal: Nodal values of xi.
        :other: Nodal values of eta (defaults to xi).
        :returns: The pairing.

        """
        x = self.restrict(nodal)
        y = x if other is None else self.restrict(other)

        return float(x @ (self.stiffness @ y))

    def form_terms(self, x):
        """
        Discrete derivatives of a vector of unknowns at the evaluation points.

        :x: Array (dof,).
        :returns: Array (len(orders), n_eval).

        """
        return np.stack([d @ x for d in self.derivatives])

def assemble(coeffs, which, grid, horizon):
    """
    Assemble D1 or D2 at a horizon.

    :coeffs: The CoefficientField.
    :which: 'D1' or 'D2'.
    :grid: Number of uniform grid intervals.
    :horizon: Final time T.
    :returns: The OperatorMatrix.

    """
    if which not in OPERATORS:
        raise ValueError('unknown operator \'{}\''.format(which))

    coeffs.check(horizon)

    orders, top = _layout(coeffs.n, which)
    if grid < max(4, 2 * (top + _GHOST_FIT)):
        raise ValueError('grid of {} intervals too small for {}'.format(grid, which))

    h = horizon / grid
    staggered = top % 2 == 1

    if staggered:
        centers = np.arange(grid) + 0.5
        weights = np.full(grid, h)
    else:
        centers = np.arange(grid + 1, dtype=float)
        weights = np.full(grid + 1, h)
        weights[[0, -1]] = 0.5 * h

    stencils = [_stencil(d, staggered) for d in orders]
    ghosts = int(round(max(-(centers[0] + s[0][0]) for s in stencils)))
    ghosts = max(ghosts, 0)

    if top >= 1:
        unknowns = np.arange(1, grid)
    else:
        unknowns = np.arange(grid + 1)

    extension = _extension(grid, ghosts, unknowns, top)

    n_eval = len(centers)
    derivatives = []
    for d, (offsets, w) in zip(orders, stencils):
        cols = np.rint(centers[:, None] + offsets[None, :]).astype(int) + ghosts
        rows = np.repeat(np.arange(n_eval), len(offsets))
        data = np.tile(w / h ** d, n_eval)
        diff = sparse.csr_matrix(
            (data, (rows, cols.ravel())),
            shape=(n_eval, grid + 1 + 2 * ghosts)
        )
        derivatives.append((diff @ extension).tocsr())

    eval_times = centers * h
    values = coeffs.values(eval_times)

    stiffness = None
    for a, left in enumerate(derivatives):
        for b, right in enumerate(derivatives):
            scale = weights * values[:, a, b]
            if not np.any(scale):
                continue
            term = left.T @ sparse.diags(scale) @ right
            stiffness = term if stiffness is None else stiffness + term
    stiffness = 0.5 * (stiffness + stiffness.T)

    mass = np.full(grid + 1, h)
    mass[[0, -1]] = 0.5 * h
    mass = mass[unknowns]

    clamped = ', '.join('xi^({})'.format(i) for i in range(top))
    boundary = '{} = 0 at t = 0 and t = T'.format(clamped) if top else 'natural'

    logger.debug('%s: T=%g, grid=%d, top order %d, %d ghosts', which, horizon, grid, top, ghosts)

    return OperatorMatrix(
        which=which,
        horizon=float(horizon),
        grid=grid,
        stiffness=stiffness.tocsr(),
        mass=mass,
        unknowns=unknowns,
        derivatives=derivatives,
        weights=weights,
        coefficients=values,
        eval_times=eval_times,
        orders=tuple(orders),
        boundary=boundary
    )

def _extension(grid, ghosts, unknowns, top):
    """
    Sparse map from the unknowns to nodal values on the ghost-extended grid.

    """
    rows, cols, data = [], [], []
    column = {node: k for k, node in enumerate(unknowns)}

    for node, k in column.items():
        rows.append(node + ghosts)
        cols.append(k)
        data.append(1.0)

    if ghosts:
        # ghost xi_{-k} from xi_1..xi_p through the basis s^top .. s^(top+p-1)
        fit = np.arange(1, _GHOST_FIT + 1, dtype=float)
        powers = top + np.arange(_GHOST_FIT)
        vander = fit[:, None] ** powers[None, :]
        at_ghost = (-np.arange(1, ghosts + 1, dtype=float))[:, None] ** powers[None, :]
        extrapolate = np.linalg.solve(vander.T, at_ghost.T).T

        for k in range(ghosts):
            for j in range(_GHOST_FIT):
                rows.append(ghosts - (k + 1))
                cols.append(column[j + 1])
                data.append(extrapolate[k, j])

                rows.append(grid + ghosts + k + 1)
                cols.append(column[grid - (j + 1)])
                data.append(extrapolate[k, j])

    return sparse.csr_matrix(
        (data, (rows, cols)),
        shape=(grid + 1 + 2 * ghosts, len(unknowns))
    )

def spectrum(op, k=1):
    """
    Smallest eigenpairs of stiffness against mass.

    :op: The OperatorMatrix.
    :k: Number of eigenpairs.
    :returns: (eigenvalues (k,), mass-orthonormal nodal eigenprofiles (k, grid + 1)).

    """
    if not 1 <= k <= op.dof:
        raise ValueError('{} eigenpairs requested, {} degrees of freedom'.format(k, op.dof))

    scale = 1.0 / np.sqrt(op.mass)
    scaled = sparse.diags(scale) @ op.stiffness @ sparse.diags(scale)
    band = op.bandwidth

    coo = sparse.triu(scaled).tocoo()
    banded = np.zeros((band + 1, op.dof))
    banded[band + coo.row - coo.col, coo.col] = coo.data

    values, vectors = eig_banded(
        banded,
        lower=False,
        select='i',
        select_range=(0, k - 1),
        check_finite=False
    )

    return values, op.extend((vectors * scale[:, None]).T)

def quadratic_value(coeffs, profile, which):
    """
    Quadrature value of Q1 or Q2 on a sampled profile.

    :coeffs: The CoefficientField.
    :profile: SampledProfile on a uniform grid of [0, T].
    :which: 'Q1' or 'Q2'.
    :returns: The integral of q1 (or q2).

    """
    if which not in FORMS:
        raise ValueError('unknown form \'{}\''.format(which))

    orders, top = _layout(coeffs.n, which)
    times = np.asarray(profile.times, dtype=float)
    values = np.asarray(profile.values, dtype=float)

    degree = max(5, top + 1)
    if degree % 2 == 0:
        degree += 1
    required = 2 * (degree + 1)
    if len(times) < required:
        raise ProfileTooCoarseError(error_map['coarse'].format(len(times), required))

    spline = make_interp_spline(times, values, k=degree)
    terms = np.stack([spline(times, nu=d) for d in orders])
    b = coeffs.values(times)

    integrand = np.einsum('at,tab,bt->t', terms, b, terms)

    return float(simpson(integrand, x=times))

def smallest_eigenvalue(coeffs, which, horizon, grid):
    return float(spectrum(assemble(coeffs, which, grid, horizon), 1)[0][0])

def operator_conjugate_time(coeffs, which, horizon_max, tol=1e-4, grid=2000, progress=None):
    """
    First horizon where the smallest eigenvalue of D1 (or D2) crosses zero.

    :coeffs: The CoefficientField, evaluable on [0, horizon_max].
    :which: 'D1' (gives t_c) or 'D2' (gives t_cc).
    :horizon_max: Largest scanned horizon.
    :tol: Width of the returned bracket.
    :grid: Number of grid intervals at every horizon.
    :progress: Optional callable (done, total) of the coarse scan.
    :returns: The ConjugateTimeResult.

    """
    return locate_crossing(
        lambda horizon: smallest_eigenvalue(coeffs, which, horizon, grid),
        horizon_max,
        tol,
        which,
        progress=progress
    )

def eig_inequality_check(coeffs, horizon, grid=2000):
    """
    Compare the smallest eigenvalues of D1 and D2: lambda1 > 2 mu1 / T^2.

    :coeffs: The CoefficientField.
    :horizon: Final time T (below t_c).
    :grid: Number of grid intervals.
    :returns: (lambda1, mu1, verdict).

    """
    lam = smallest_eigenvalue(coeffs, 'D1', horizon, grid)
    mu = smallest_eigenvalue(coeffs, 'D2', horizon, grid)

    return lam, mu, bool(lam > 2.0 * mu / horizon ** 2)
