from functools import lru_cache
from math import factorial

import numpy as np

def _monomials(n, degree):
    """
    Enumerate the multi-indices of n variables with a given total degree.

    The enumeration order only depends on (n, degree), so the degree blocks of a
    space of order m are a prefix of the blocks of any space of higher order.

    """
    if n == 1:
        yield (degree,)
        return

    for first in range(degree, -1, -1):
        for rest in _monomials(n - 1, degree - first):
            yield (first,) + rest

class JetSpace:

    """
    Implementation of the multi-index bookkeeping of jets in n variables
    truncated at a given order. Instances are shared through JetSpace.get.

    """

    def __init__(self, n, order):
        """
        Initialize the tables of the space.

        :n: Number of variables.
        :order: Truncation order.

        """
        self.n = n
        self.order = order

        indices = []
        self.offsets = [0]
        for degree in range(order + 1):
            indices.extend(_monomials(n, degree))
            self.offsets.append(len(indices))

        self.indices = np.array(indices, dtype=int).reshape(-1, n)
        self.size = len(indices)
        self.index_of = {idx: k for k, idx in enumerate(indices)}

        # product table, pairs sorted by the index of the product monomial
        pairs = []
        for i, left in enumerate(indices):
            for j, right in enumerate(indices):
                if sum(left) + sum(right) <= order:
                    target = tuple(a + b for a, b in zip(left, right))
                    pairs.append((self.index_of[target], i, j))
        pairs.sort()

        targets = np.array([p[0] for p in pairs], dtype=int)
        self.pair_left = np.array([p[1] for p in pairs], dtype=int)
        self.pair_right = np.array([p[2] for p in pairs], dtype=int)
        self.segments = np.searchsorted(targets, np.arange(self.size))

        # d/dx_i maps the space of order m onto the space of order m - 1
        self.derivative_src = []
        self.derivative_fac = []
        lower = indices[:self.offsets[order]] if order > 0 else []
        for var in range(n):
            src = []
            fac = []
            for beta in lower:
                alpha = list(beta)
                alpha[var] += 1
                src.append(self.index_of[tuple(alpha)])
                fac.append(float(alpha[var]))
            self.derivative_src.append(np.array(src, dtype=int))
            self.derivative_fac.append(np.array(fac))

    @staticmethod
    @lru_cache(maxsize=None)
    def get(n, order):
        """
        Get the shared space for (n, order).

        :n: Number of variables.
        :order: Truncation order.
        :returns: The JetSpace instance.

        """
        return JetSpace(n, order)

class Jet:

    """
    Implementation of a truncated multivariate Taylor expansion. The coefficient
    of the monomial x^a is d^a f / a!. Coefficient tables may carry leading batch
    dimensions, one jet per base point.

    """

    __slots__ = ('space', 'coeffs')

    def __init__(self, space, coeffs):
        """
        Initialize the jet internal data.

        :space: The JetSpace of the jet.
        :coeffs: Coefficient table of shape (..., space.size).

        """
        self.space = space
        self.coeffs = coeffs

    @classmethod
    def constant(cls, space, value):
        """
        Build a constant jet.

        :space: The JetSpace of the jet.
        :value: Scalar or array of base values.
        :returns: The constant jet.

        """
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros(value.shape + (space.size,))
        coeffs[..., 0] = value

        return cls(space, coeffs)

    @classmethod
    def variable(cls, space, point, var):
        """
        Build the jet of the coordinate function x_{var+1} at a point.

        :space: The JetSpace of the jet.
        :point: Base point(s), shape (..., n).
        :var: Zero-based coordinate index.
        :returns: The coordinate jet.

        """
        point = np.asarray(point, dtype=float)
        coeffs = np.zeros(point.shape[:-1] + (space.size,))
        coeffs[..., 0] = point[..., var]
        if space.order > 0:
            coeffs[..., 1 + var] = 1.0

        return cls(space, coeffs)

    @property
    def order(self):
        return self.space.order

    @property
    def value(self):
        return self.coeffs[..., 0]

    def coefficient(self, multi_index):
        """
        Get the coefficient of a monomial.

        :multi_index: Tuple of exponents.
        :returns: The coefficient (array over the batch dimensions).

        """
        return self.coeffs[..., self.space.index_of[tuple(multi_index)]]

    def truncate(self, order):
        """
        Drop the terms above a given order.

        :order: The new truncation order.
        :returns: The truncated jet.

        """
        space = JetSpace.get(self.space.n, order)
        return Jet(space, self.coeffs[..., :space.size])

    def derivative(self, var):
        """
        Differentiate the jet with respect to one coordinate.

        :var: Zero-based coordinate index.
        :returns: Jet of the partial derivative, one order lower.

        """
        if self.order == 0:
            raise ValueError('cannot differentiate a jet of order 0')

        sp = self.space
        return Jet(
            JetSpace.get(sp.n, sp.order - 1),
            self.coeffs[..., sp.derivative_src[var]] * sp.derivative_fac[var]
        )

    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        return Jet.constant(self.space, other)

    def __neg__(self):
        return Jet(self.space, -self.coeffs)

    def __add__(self, other):
        other = self._coerce(other)
        return Jet(self.space, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        return Jet(self.space, self.coeffs - other.coeffs)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.space, self.coeffs * np.asarray(other)[..., None])

        sp = self.space
        prod = self.coeffs[..., sp.pair_left] * other.coeffs[..., sp.pair_right]

        return Jet(sp, np.add.reduceat(prod, sp.segments, axis=-1))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        num, den = np.broadcast_arrays(self.coeffs, other.coeffs)
        sp = self.space

        b0 = den[..., 0]
        tail = Jet(sp, den.copy())
        tail.coeffs[..., 0] = 0.0

        out = np.zeros(num.shape)
        out[..., 0] = num[..., 0] / b0
        for degree in range(1, sp.order + 1):
            lo, hi = sp.offsets[degree], sp.offsets[degree + 1]
            acc = (tail * Jet(sp, out)).coeffs
            out[..., lo:hi] = (num[..., lo:hi] - acc[..., lo:hi]) / b0[..., None]

        return Jet(sp, out)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def compose(self, derivatives):
        """
        Compose a scalar function with the jet.

        :derivatives: Sequence of f^(k)(a0) / k! for k = 0..order, each an array
                      over the batch dimensions.
        :returns: Jet of f(self).

        """
        sp = self.space
        result = Jet.constant(sp, derivatives[0])

        if sp.order == 0:
            return result

        nilpotent = Jet(sp, self.coeffs.copy())
        nilpotent.coeffs[..., 0] = 0.0

        power = Jet.constant(sp, np.ones(self.coeffs.shape[:-1]))
        for k in range(1, sp.order + 1):
            power = power * nilpotent
            result = result + power * derivatives[k]

        return result

def exp(jet):
    value = np.exp(jet.value)
    return jet.compose([value / factorial(k) for k in range(jet.order + 1)])

def sin(jet):
    s, c = np.sin(jet.value), np.cos(jet.value)
    cycle = (s, c, -s, -c)
    return jet.compose([cycle[k % 4] / factorial(k) for k in range(jet.order + 1)])

def cos(jet):
    s, c = np.sin(jet.value), np.cos(jet.value)
    cycle = (c, -s, -c, s)
    return jet.compose([cycle[k % 4] / factorial(k) for k in range(jet.order + 1)])

def sqrt(jet):
    a0 = jet.value
    root = np.sqrt(a0)

    derivatives = [root]
    gain = 1.0
    for k in range(1, jet.order + 1):
        gain *= (0.5 - (k - 1)) / k
        derivatives.append(gain * root / a0 ** k)

    return jet.compose(derivatives)

def jacobian(jets):
    """
    Read the Jacobian off the degree-1 blocks of component jets.

    :jets: Sequence of component jets (order >= 1) of a vector field.
    :returns: Array of shape (..., len(jets), n).

    """
    n = jets[0].space.n
    return np.stack([j.coeffs[..., 1:n + 1] for j in jets], axis=-2)

def hessian(jets):
    """
    Read the second derivatives off the degree-2 blocks of component jets.

    :jets: Sequence of component jets (order >= 2) of a vector field.
    :returns: Array of shape (..., len(jets), n, n).

    """
    sp = jets[0].space
    n = sp.n
    coeffs = np.stack([j.coeffs for j in jets], axis=-2)
    out = np.zeros(coeffs.shape[:-1] + (n, n))

    for k in range(sp.offsets[2], sp.offsets[3]):
        nz = np.nonzero(sp.indices[k])[0]
        if len(nz) == 1:
            i = nz[0]
            out[..., i, i] = 2.0 * coeffs[..., k]
        else:
            i, j = nz
            out[..., i, j] = coeffs[..., k]
            out[..., j, i] = coeffs[..., k]

    return out
