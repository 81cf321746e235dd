"""
Lie brackets along the reference trajectory, the corank-1 adjoint and the
verification of the assumptions H0..H4.

Bracket convention: [V, W] = DW.V - DV.W, so that ad X.Y = [X, Y].

"""
from dataclasses import dataclass, field, replace
import logging

import numpy as np
from scipy.integrate import solve_ivp
from scipy.spatial.distance import pdist, squareform

from errors import (
    CorankError,
    InsufficientOrderError,
    IntegrationError,
    OrientationError,
    error_map
)
from expr import eval_jet

logger = logging.getLogger(__name__)

HYPOTHESES = ('H0', 'H1', 'H2', 'H3', 'H4')

@dataclass(frozen=True)
class ControlSystem:

    """
    Implementation of the single-input affine system x' = X(x) + u Y(x).

    """

    drift: object
    control: object
    name: str = 'system'

    @property
    def n(self):
        return self.drift.n

def bracket_jets(v_jets, w_jets):
    """
    Bracket of two fields given by their jets at the same base points.

    :v_jets: Component jets of V.
    :w_jets: Component jets of W.
    :returns: Component jets of [V, W], one order below the lower input order.

    """
    order = min(v_jets[0].order, w_jets[0].order)
    if order == 0:
        raise InsufficientOrderError(error_map['order'].format(1, 0))

    v = [j.truncate(order) for j in v_jets]
    w = [j.truncate(order) for j in w_jets]
    low_v = [j.truncate(order - 1) for j in v]
    low_w = [j.truncate(order - 1) for j in w]
    n = len(v)

    out = []
    for k in range(n):
        acc = None
        for i in range(n):
            term = w[k].derivative(i) * low_v[i] - v[k].derivative(i) * low_w[i]
            acc = term if acc is None else acc + term
        out.append(acc)

    return out

def lie_bracket_at(v_field, w_field, point, order):
    """
    Jet of the bracket [V, W] at a point.

    :v_field: The VectorFieldExpr V.
    :w_field: The VectorFieldExpr W.
    :point: Base point (or batch of base points).
    :order: Requested order of the bracket jet.
    :returns: List of n Jets.

    """
    return bracket_jets(
        eval_jet(v_field, point, order + 1),
        eval_jet(w_field, point, order + 1)
    )

def _values(jets):
    return np.stack([j.value for j in jets], axis=-1)

def ad_sequence(drift, control, point, kmax, order=None):
    """
    Iterated brackets ad^k X.Y at a point, k = 0..kmax.

    :drift: The VectorFieldExpr X.
    :control: The VectorFieldExpr Y.
    :point: Base point, shape (n,), or batch (..., n).
    :kmax: Largest bracket depth.
    :order: Jet order budget (defaults to kmax).
    :returns: Array of shape (..., kmax + 1, n).

    """
    budget = kmax if order is None else order
    if budget < kmax:
        raise InsufficientOrderError(error_map['order'].format(kmax, budget))

    x_jets = eval_jet(drift, point, kmax)
    current = eval_jet(control, point, kmax)

    entries = [_values(current)]
    for _ in range(kmax):
        current = bracket_jets(x_jets, current)
        entries.append(_values(current))

    return np.stack(entries, axis=-2)

def ad2_control(drift, control, point):
    """
    Value of ad^2 Y.X = [Y, [Y, X]] at a point.

    :drift: The VectorFieldExpr X.
    :control: The VectorFieldExpr Y.
    :point: Base point (or batch).
    :returns: Array of shape (..., n).

    """
    x_jets = eval_jet(drift, point, 2)
    y_jets = eval_jet(control, point, 2)

    return _values(bracket_jets(y_jets, bracket_jets(y_jets, x_jets)))

@dataclass(frozen=True, eq=False)
class TrajectoryData:

    """
    Implementation of the sampled reference trajectory: gamma on a uniform grid,
    the cone bases K(t_k), the next bracket (closure check) and, once filled, the
    unit adjoint p(t_k).

    """

    horizon: float
    times: np.ndarray
    samples: np.ndarray
    cone: np.ndarray
    closure: np.ndarray
    drift_values: np.ndarray
    dense: object = field(repr=False, compare=False)
    adjoint: np.ndarray = None
    hamiltonian_residual: float = None

    @property
    def n(self):
        return self.samples.shape[1]

    @property
    def final_state(self):
        return self.samples[-1]

    @property
    def final_adjoint(self):
        return self.adjoint[-1]

    def state_at(self, t):
        """
        Evaluate gamma at arbitrary times through the dense output.

        :t: Scalar or array of times in [0, T].
        :returns: Array of shape (n,) or (len(t), n).

        """
        t = np.asarray(t, dtype=float)
        out = self.dense(np.clip(t, 0.0, self.horizon))

        return out.T if t.ndim else out

def reference_trajectory(system, x0, horizon, samples):
    """
    Integrate gamma' = X(gamma), gamma(0) = x0, and sample it on a uniform grid.

    :system: The ControlSystem.
    :x0: Initial state.
    :horizon: Final time T > 0.
    :samples: Number of grid intervals M >= 2.
    :returns: TrajectoryData without adjoint.

    """
    if horizon <= 0:
        raise ValueError('the horizon must be positive, got {}'.format(horizon))
    if samples < 2:
        raise ValueError('at least 2 grid intervals are required')

    x0 = np.asarray(x0, dtype=float)
    drift = system.drift

    sol = solve_ivp(
        lambda _, x: drift.evaluate(x),
        (0.0, horizon),
        x0,
        method='DOP853',
        rtol=1e-12,
        atol=1e-12,
        dense_output=True
    )
    if sol.status != 0:
        raise IntegrationError(error_map['integration'].format(sol.message))

    times = np.linspace(0.0, horizon, samples + 1)
    states = sol.sol(times).T
    if not np.all(np.isfinite(states)):
        raise IntegrationError(error_map['integration'].format('blow-up'))

    n = system.n
    brackets = ad_sequence(drift, system.control, states, n - 1)

    logger.debug('reference trajectory: T=%g, M=%d, %d rhs evaluations',
                 horizon, samples, sol.nfev)

    return TrajectoryData(
        horizon=float(horizon),
        times=times,
        samples=states,
        cone=brackets[:, :n - 1],
        closure=brackets[:, n - 1],
        drift_values=drift.evaluate(states),
        dense=sol.sol
    )

def adjoint_along(traj, system, rank_tol=1e-7):
    """
    Fill the adjoint: the unit annihilator of K(t_k), oriented continuously
    with <p, ad^2 Y.X(gamma)> > 0.

    :traj: TrajectoryData from reference_trajectory.
    :system: The ControlSystem.
    :rank_tol: Relative singular-value threshold of the rank decisions.
    :returns: TrajectoryData with the adjoint filled.

    """
    n = traj.n
    vectors = np.concatenate([traj.cone, traj.closure[:, None, :]], axis=1)

    _, sing, vh = np.linalg.svd(vectors)
    scale = np.maximum(sing[:, :1], np.finfo(float).tiny)
    rank = np.sum(sing > rank_tol * scale, axis=1)

    bad = np.nonzero(rank != n - 1)[0]
    if len(bad):
        k = bad[0]
        raise CorankError(
            error_map['corank'].format(rank[k], traj.times[k], n - 1)
        )

    p = vh[:, -1, :].copy()
    for k in range(1, len(p)):
        dot = p[k] @ p[k - 1]
        if abs(dot) < 0.5:
            raise OrientationError(error_map['orientation'].format(traj.times[k]))
        if dot < 0.0:
            p[k] = -p[k]

    legendre = ad2_control(system.drift, system.control, traj.samples[0])
    sign = p[0] @ legendre
    if abs(sign) <= rank_tol * np.linalg.norm(legendre):
        # degenerate Legendre term, fall back to the dominant component
        sign = p[0][np.argmax(np.abs(p[0]))]
    if sign < 0.0:
        p = -p

    drift_norm = np.maximum(np.linalg.norm(traj.drift_values, axis=1), 1e-300)
    residual = float(np.max(np.abs(np.sum(p * traj.drift_values, axis=1)) / drift_norm))
    logger.debug('adjoint: max |<p, X>| / |X| = %.3e', residual)

    return replace(traj, adjoint=p, hamiltonian_residual=residual)

def _span_distance(vectors, target, rank_tol):
    """
    Relative distance of target vectors to the span of vector sets.

    :vectors: Array (K, k, n) of spanning sets.
    :target: Array (K, n).
    :rank_tol: Relative singular-value threshold.
    :returns: Array (K,) of |target - proj(target)| / |target|.

    """
    out = np.zeros(len(target))

    for k, (basis, vec) in enumerate(zip(vectors, target)):
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            continue

        u, sing, _ = np.linalg.svd(basis.T, full_matrices=False)
        if sing.size == 0 or sing[0] == 0.0:
            out[k] = 1.0
            continue

        q = u[:, sing > rank_tol * sing[0]]
        out[k] = np.linalg.norm(vec - q @ (q.T @ vec)) / norm

    return out

@dataclass
class AssumptionReport:

    """
    Implementation of the verdicts of H0..H4 with their worst margins and the
    first grid time where each fails.

    """

    tolerance: float
    rank_tolerance: float
    verdicts: dict
    margins: dict
    failing_time: dict

    @property
    def passed(self):
        return all(self.verdicts[h] for h in HYPOTHESES)

    def first_failure(self):
        """
        Get the first failing assumption.

        :returns: Its name, or None when every assumption passes.

        """
        for name in HYPOTHESES:
            if not self.verdicts[name]:
                return name

        return None

    def to_dict(self):
        return {
            'passed': self.passed,
            'first_failure': self.first_failure(),
            'tolerance': self.tolerance,
            'rank_tolerance': self.rank_tolerance,
            'verdicts': dict(self.verdicts),
            'margins': {k: float(v) for k, v in self.margins.items()},
            'failing_time': dict(self.failing_time)
        }

def _first_time(times, mask):
    idx = np.nonzero(mask)[0]
    return float(times[idx[0]]) if len(idx) else None

def check_assumptions(traj, system, tol=1e-6, rank_tol=1e-7):
    """
    Verify H0..H4 on the grid of the trajectory.

    :traj: TrajectoryData (cone bases filled).
    :system: The ControlSystem.
    :tol: Distance-to-span tolerance of H2, H3 and H4.
    :rank_tol: Relative singular-value threshold of H1.
    :returns: The AssumptionReport.

    """
    n = traj.n
    times = traj.times
    verdicts, margins, failing = {}, {}, {}

    # H0: no self-approach of gamma beyond neighbouring samples
    steps = np.linalg.norm(np.diff(traj.samples, axis=0), axis=1)
    steps = np.append(steps, steps[-1])
    dist = squareform(pdist(traj.samples))
    local = np.maximum.outer(steps, steps)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(local > 0.0, dist / local, 0.0)
    idx = np.arange(len(times))
    ratio[np.abs(idx[:, None] - idx[None, :]) < 2] = np.inf
    worst = np.min(ratio, axis=1)
    margins['H0'] = float(np.min(worst))
    verdicts['H0'] = bool(margins['H0'] > 1.0)
    failing['H0'] = _first_time(times, worst <= 1.0)

    # H1: K has rank n - 1 and the next bracket stays inside it
    sing = np.linalg.svd(traj.cone, compute_uv=False)
    rank_ratio = sing[:, -1] / np.maximum(sing[:, 0], np.finfo(float).tiny)
    scale = np.maximum(sing[:, 0], np.finfo(float).tiny)
    closure = _span_distance(traj.cone, traj.closure, rank_tol)
    closure *= np.linalg.norm(traj.closure, axis=1) / scale
    h1_fail = (rank_ratio <= rank_tol) | (closure > tol)
    margins['H1'] = float(np.min(rank_ratio))
    margins['H1_closure'] = float(np.max(closure))
    verdicts['H1'] = bool(not np.any(h1_fail))
    failing['H1'] = _first_time(times, h1_fail)

    # H2: ad^2 Y.X leaves K
    legendre = ad2_control(system.drift, system.control, traj.samples)
    d2 = _span_distance(traj.cone, legendre, rank_tol)
    d2[np.linalg.norm(legendre, axis=1) == 0.0] = 0.0
    margins['H2'] = float(np.min(d2))
    verdicts['H2'] = bool(np.all(d2 > tol))
    failing['H2'] = _first_time(times, d2 <= tol)

    # H3: X leaves span{ad^k X.Y, k <= n - 3}
    if n >= 3:
        d3 = _span_distance(traj.cone[:, :n - 2], traj.drift_values, rank_tol)
    else:
        d3 = np.ones(len(times))
    d3[np.linalg.norm(traj.drift_values, axis=1) == 0.0] = 0.0
    margins['H3'] = float(np.min(d3))
    verdicts['H3'] = bool(np.all(d3 > tol))
    failing['H3'] = _first_time(times, d3 <= tol)

    # H4: X stays in K
    d4 = _span_distance(traj.cone, traj.drift_values, rank_tol)
    margins['H4'] = float(np.max(d4))
    verdicts['H4'] = bool(np.all(d4 <= tol))
    failing['H4'] = _first_time(times, d4 > tol)

    report = AssumptionReport(tol, rank_tol, verdicts, margins, failing)
    logger.info('assumptions: %s', ', '.join(
        '{}={}'.format(h, 'ok' if verdicts[h] else 'FAIL') for h in HYPOTHESES
    ))

    return report
