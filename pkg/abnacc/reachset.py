"""
Monte Carlo clouds of the constrained accessibility sets, their projection on
the adapted coordinates (x1, xn), empirical contact fits and the explicit
L2-sector perturbation of the sub-Riemannian problem.

Sample i of a cloud draws its control from the stream
default_rng(SeedSequence(seed, spawn_key=(i,))), so a cloud does not depend on
the number of workers and a larger cloud extends a smaller one.

"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import logging

import numpy as np

from errors import (
    ConstraintViolationError,
    CorankError,
    DegenerateFitError,
    InsufficientDataError,
    SectorRegimeError,
    error_map
)
from integrators import rk4_cells

logger = logging.getLogger(__name__)

AFFINE_FAMILIES = ('bang', 'smooth', 'kernel')
SR_FAMILIES = ('unit', 'slow', 'frozen', 'lifted')

CELLS = 100
SUBSTEPS = 8
MIN_BINS = 8
POINTS_PER_BIN = 5
ENVELOPE_DECADES = 2

# pointwise constraint slack
_SLACK = 1e-12

@dataclass(frozen=True, eq=False)
class SampleCloud:

    """
    Implementation of a sampled accessibility set: end-points with the
    descriptors of the controls that reached them.

    """

    case: str
    horizon: float
    constraint: float
    seed: int
    points: np.ndarray = field(repr=False)
    families: np.ndarray = field(repr=False)
    amplitudes: np.ndarray = field(repr=False)
    sup_distance: np.ndarray = field(repr=False)
    l2_distance: np.ndarray = field(repr=False)
    reparam_error: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return len(self.points)

    def family_counts(self):
        names, counts = np.unique(self.families, return_counts=True)
        return {str(k): int(v) for k, v in zip(names, counts)}

@dataclass
class Envelope:
    side: str
    x1: np.ndarray
    xn: np.ndarray
    floor: np.ndarray

    def __len__(self):
        return len(self.x1)

@dataclass
class ContactFit:

    """
    Implementation of a log-log fit xn = coefficient * |x1 - T|^exponent of an
    envelope branch.

    """

    side: str
    exponent: float
    coefficient: float
    residual: float
    bins: int
    window: tuple

    def to_dict(self):
        return {
            'side': self.side,
            'exponent': self.exponent,
            'coefficient': self.coefficient,
            'residual': self.residual,
            'bins': self.bins,
            'window': list(self.window)
        }

@dataclass
class SectorResult:
    epsilon: float
    end_point: np.ndarray
    x1: float
    xn: float
    norm_error: float
    sup_distance: float
    l2_distance: float
    l1_dv: float
    l1_du: float

    def to_dict(self):
        return {
            'epsilon': self.epsilon,
            'x1': self.x1,
            'xn': self.xn,
            'norm_error': self.norm_error,
            'sup_distance': self.sup_distance,
            'l2_distance': self.l2_distance,
            'l1_dv': self.l1_dv,
            'l1_du': self.l1_du
        }

@dataclass
class SectorSweep:
    results: list
    slope: float
    coefficient: float
    residual: float

    @property
    def l2_decreasing(self):
        dist = [r.l2_distance for r in sorted(self.results, key=lambda r: r.epsilon)]
        return bool(np.all(np.diff(dist) > 0.0))

    @property
    def sup_bounded(self):
        return bool(min(r.sup_distance for r in self.results) >= 1.0)

    def to_dict(self):
        return {
            'slope': self.slope,
            'coefficient': self.coefficient,
            'residual': self.residual,
            'l2_decreasing': self.l2_decreasing,
            'sup_bounded': self.sup_bounded,
            'results': [r.to_dict() for r in self.results]
        }

def sample_stream(seed, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))

def _amplitude(rng, top):
    # log-uniform over three decades below the constraint
    return top * 10.0 ** rng.uniform(-3.0, 0.0)

def _bang(rng, cells, amplitude):
    mids = (np.arange(cells) + 0.5) / cells
    switches = np.sort(rng.uniform(0.0, 1.0, rng.integers(1, 6)))
    sign = rng.choice((-1.0, 1.0)) * (-1.0) ** np.searchsorted(switches, mids)

    return amplitude * sign

def _smooth(rng, cells, amplitude):
    mids = (np.arange(cells) + 0.5) / cells
    modes = np.arange(1, rng.integers(2, 5))
    weights = rng.normal(size=len(modes))
    shape = np.sin(np.pi * np.outer(mids, modes)) @ weights

    return amplitude * shape / np.max(np.abs(shape))

def _tracking(rng, cells, horizon, eta, kernel):
    """
    Control whose primitive tracks a multiple of the kernel target profile
    under |u| <= eta.

    """
    dt = horizon / cells
    scale = _amplitude(rng, 0.5 * eta * horizon) * rng.choice((-1.0, 1.0))
    target = scale * np.interp(dt * np.arange(1, cells + 1), kernel[0], kernel[1])

    out = np.zeros(cells)
    primitive = 0.0
    for k in range(cells):
        out[k] = np.clip((target[k] - primitive) / dt, -eta, eta)
        primitive += out[k] * dt

    return out

def affine_control(seed, index, horizon, eta, cells=CELLS, kernel=None):
    """
    Draw the piecewise-constant affine control of one sample.

    :seed: Cloud seed.
    :index: Sample index.
    :horizon: Final time T.
    :eta: Bound |u| <= eta.
    :cells: Number of control cells.
    :kernel: Optional (times, values) target of the control primitive, max 1.
    :returns: (family, amplitude, values (cells,)).

    """
    rng = sample_stream(seed, index)
    families = AFFINE_FAMILIES if kernel is not None else AFFINE_FAMILIES[:2]
    family = families[rng.integers(len(families))]

    if family == 'kernel':
        values = _tracking(rng, cells, horizon, eta, kernel)
    elif family == 'bang':
        values = _bang(rng, cells, _amplitude(rng, eta))
    else:
        values = _smooth(rng, cells, _amplitude(rng, eta))

    return family, float(np.max(np.abs(values), initial=0.0)), values

def affine_to_sr(w, alpha=None):
    """
    Lift affine controls to sub-Riemannian pairs (v, u) = (1, w) / sqrt(1 + w^2).

    :w: Array of affine control values.
    :alpha: Optional sector constraint to verify.
    :returns: (v, u) arrays of the shape of w.

    """
    w = np.asarray(w, dtype=float)
    norm = np.sqrt(1.0 + w ** 2)
    v, u = 1.0 / norm, w / norm

    if np.max(np.abs(v ** 2 + u ** 2 - 1.0), initial=0.0) > _SLACK:
        raise ConstraintViolationError(error_map['constraint'].format('v^2 + u^2 != 1'))
    if alpha is not None:
        _check_sr(v, u, alpha)

    return v, u

def sr_control(seed, index, horizon, alpha, cells=CELLS):
    """
    Draw the piecewise-constant sub-Riemannian control pair of one sample.

    :returns: (family, amplitude, v (cells,), u (cells,)).

    """
    rng = sample_stream(seed, index)
    family = SR_FAMILIES[rng.integers(len(SR_FAMILIES))]

    if family == 'frozen':
        u = np.zeros(cells)
        v = np.full(cells, rng.uniform(1.0 - alpha, 1.0))
    elif family == 'lifted':
        bound = alpha / np.sqrt(1.0 - alpha ** 2)
        pick = _bang if rng.uniform() < 0.5 else _smooth
        v, u = affine_to_sr(pick(rng, cells, _amplitude(rng, bound)))
    else:
        pick = _bang if rng.uniform() < 0.5 else _smooth
        u = pick(rng, cells, _amplitude(rng, alpha))
        v = np.sqrt(1.0 - u ** 2)
        if family == 'slow':
            low = 1.0 - alpha
            v = low + (v - low) * rng.uniform(size=cells)

    return family, float(np.max(np.abs(u), initial=0.0)), v, u

def _check_affine(u, eta):
    excess = np.max(np.abs(u), initial=0.0) - eta
    if excess > _SLACK * max(eta, 1.0):
        raise ConstraintViolationError(
            error_map['constraint'].format('|u| exceeds eta = {} by {}'.format(eta, excess))
        )

def _check_sr(v, u, alpha):
    if np.any(v ** 2 + u ** 2 > 1.0 + _SLACK):
        raise ConstraintViolationError(error_map['constraint'].format('v^2 + u^2 > 1'))
    if np.any(v < 1.0 - alpha - _SLACK) or np.any(v > 1.0 + _SLACK):
        raise ConstraintViolationError(
            error_map['constraint'].format('v outside [1 - alpha, 1]')
        )
    if np.any(np.abs(u) > alpha + _SLACK):
        raise ConstraintViolationError(error_map['constraint'].format('|u| > alpha'))

def _affine_rhs(system):
    def rhs(x, u):
        return system.drift.evaluate(x) + u[:, None] * system.control.evaluate(x)
    return rhs

def _sr_rhs(system):
    def rhs(x, pair):
        v, u = pair
        return v[:, None] * system.drift.evaluate(x) + u[:, None] * system.control.evaluate(x)
    return rhs

def _affine_chunk(task):
    system, x0, horizon, eta, seed, indices, cells, kernel = task

    drawn = [affine_control(seed, i, horizon, eta, cells, kernel) for i in indices]
    controls = np.array([d[2] for d in drawn]).reshape(len(indices), cells)
    _check_affine(controls, eta)

    dt = horizon / cells
    x = np.tile(np.asarray(x0, dtype=float), (len(indices), 1))
    ends = rk4_cells(_affine_rhs(system), x, np.full(cells, dt), controls.T, SUBSTEPS)

    return (
        ends,
        [d[0] for d in drawn],
        [d[1] for d in drawn],
        np.max(np.abs(controls), axis=1),
        np.sqrt(np.sum(controls ** 2, axis=1) * dt)
    )

def _sr_chunk(task):
    system, x0, horizon, alpha, seed, indices, cells = task

    drawn = [sr_control(seed, i, horizon, alpha, cells) for i in indices]
    v = np.array([d[2] for d in drawn]).reshape(len(indices), cells)
    u = np.array([d[3] for d in drawn]).reshape(len(indices), cells)
    _check_sr(v, u, alpha)

    dt = horizon / cells
    x = np.tile(np.asarray(x0, dtype=float), (len(indices), 1))
    ends = rk4_cells(_sr_rhs(system), x, np.full(cells, dt), list(zip(v.T, u.T)), SUBSTEPS)

    # same end-points along the affine time s, ds/dt = v, with w = u / v
    w = u / v
    _check_affine(w, alpha / (1.0 - alpha))
    again = rk4_cells(_affine_rhs(system), x, (v * dt).T, w.T, SUBSTEPS)

    return (
        ends,
        [d[0] for d in drawn],
        [d[1] for d in drawn],
        np.maximum(np.max(np.abs(v - 1.0), axis=1), np.max(np.abs(u), axis=1)),
        np.sqrt(np.sum((v - 1.0) ** 2 + u ** 2, axis=1) * dt),
        np.max(np.abs(again - ends), axis=1)
    )

def _run(worker, tasks, workers):
    if workers <= 1 or len(tasks) == 1:
        return [worker(t) for t in tasks]

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, tasks))

def _chunks(count, workers):
    size = max(256, -(-count // (4 * max(workers, 1))))
    return [range(lo, min(lo + size, count)) for lo in range(0, count, size)]

def sample_affine(system, x0, horizon, eta, count, seed, kernel=None, cells=CELLS,
                  workers=1, progress=None):
    """
    Sample the end-points of x' = X + u Y under |u| <= eta.

    :system: The ControlSystem.
    :x0: Initial state.
    :horizon: Final time T.
    :eta: Control bound (eta = 0 gives the reference end-point only).
    :count: Number of samples N >= 1.
    :seed: Cloud seed.
    :kernel: Optional (times, values) target profile of the kernel family.
    :cells: Number of control cells.
    :workers: Number of worker processes.
    :progress: Optional callable (done, total).
    :returns: The SampleCloud.

    """
    if count < 1:
        raise ValueError('at least one sample is required')
    if eta < 0:
        raise ValueError('the control bound must be nonnegative')

    tasks = [
        (system, x0, horizon, eta, seed, chunk, cells, kernel)
        for chunk in _chunks(count, workers)
    ]
    parts = _gather(_affine_chunk, tasks, workers, count, progress)

    logger.info('affine cloud: %d samples, T=%g, eta=%g', count, horizon, eta)

    return SampleCloud(
        case='AFFINE',
        horizon=float(horizon),
        constraint=float(eta),
        seed=seed,
        points=np.concatenate([p[0] for p in parts]),
        families=np.array(sum((p[1] for p in parts), [])),
        amplitudes=np.array(sum((p[2] for p in parts), [])),
        sup_distance=np.concatenate([p[3] for p in parts]),
        l2_distance=np.concatenate([p[4] for p in parts])
    )

def sample_sr(system, x0, horizon, alpha, count, seed, cells=CELLS, workers=1, progress=None):
    """
    Sample the end-points of x' = v X + u Y under v^2 + u^2 <= 1,
    1 - alpha <= v <= 1 and |u| <= alpha, with the reparametrization check.

    :system: The ControlSystem.
    :x0: Initial state.
    :horizon: Final time T.
    :alpha: Sector constraint, 0 < alpha < 1.
    :count: Number of samples N >= 1.
    :seed: Cloud seed.
    :cells: Number of control cells.
    :workers: Number of worker processes.
    :progress: Optional callable (done, total).
    :returns: The SampleCloud.

    """
    if not 0.0 < alpha < 1.0:
        raise ValueError('the sector constraint must lie in (0, 1), got {}'.format(alpha))
    if count < 1:
        raise ValueError('at least one sample is required')

    tasks = [
        (system, x0, horizon, alpha, seed, chunk, cells)
        for chunk in _chunks(count, workers)
    ]
    parts = _gather(_sr_chunk, tasks, workers, count, progress)

    reparam = np.concatenate([p[5] for p in parts])
    logger.info('SR cloud: %d samples, T=%g, alpha=%g, max reparametrization error %.2e',
                count, horizon, alpha, np.max(reparam))

    return SampleCloud(
        case='SR',
        horizon=float(horizon),
        constraint=float(alpha),
        seed=seed,
        points=np.concatenate([p[0] for p in parts]),
        families=np.array(sum((p[1] for p in parts), [])),
        amplitudes=np.array(sum((p[2] for p in parts), [])),
        sup_distance=np.concatenate([p[3] for p in parts]),
        l2_distance=np.concatenate([p[4] for p in parts]),
        reparam_error=reparam
    )

def _gather(worker, tasks, workers, count, progress):
    parts = []
    done = 0
    for part in _run(worker, tasks, workers):
        parts.append(part)
        done += len(part[0])
        if progress:
            progress(done, count)

    return parts

def dual_frame(traj):
    """
    Covector e1* with <e1*, X> = 1, orthogonal to ad^k X.Y (k <= n - 3) and to
    p at the final time.

    :traj: TrajectoryData with adjoint.
    :returns: Array (n,).

    """
    n = traj.n
    frame = np.vstack([
        traj.drift_values[-1],
        traj.cone[-1][:n - 2],
        traj.final_adjoint
    ])

    sing = np.linalg.svd(frame, compute_uv=False)
    if sing[-1] <= 1e-10 * sing[0]:
        raise CorankError(error_map['corank'].format(n - 1, traj.horizon, n))

    rhs = np.zeros(n)
    rhs[0] = 1.0

    return np.linalg.solve(frame, rhs)

def adapted_projection(points, traj):
    """
    Linear adapted coordinates x1 = T + <e1*, x - gamma(T)>, xn = <p(T), x - gamma(T)>.

    :points: SampleCloud or array (N, n) of end-points.
    :traj: TrajectoryData with adjoint.
    :returns: Array (N, 2).

    """
    if isinstance(points, SampleCloud):
        points = points.points

    shift = np.atleast_2d(points) - traj.final_state
    x1 = traj.horizon + shift @ dual_frame(traj)
    xn = shift @ traj.final_adjoint

    return np.column_stack([x1, xn])

def local_min_xn(projected, horizon, radius):
    """
    Smallest xn among projected points within a radius of (T, 0).

    :returns: The minimum (inf when no point is that close).

    """
    near = np.hypot(projected[:, 0] - horizon, projected[:, 1]) <= radius
    return float(np.min(projected[near, 1])) if np.any(near) else np.inf

def empirical_envelope(projected, horizon, side, bins=16, window=None):
    """
    Lower envelope of xn over logarithmic bins of |x1 - T| on one side of T.

    The bins cover ENVELOPE_DECADES decades below the window (below the
    farthest point when there is no window); each one keeps its minimizer and
    a noise floor, the 1st percentile of |xn| over its points.

    :projected: Array (N, 2) of adapted points.
    :horizon: Final time T.
    :side: '+' (x1 > T) or '-' (x1 < T).
    :bins: Number of bins.
    :window: Optional largest |x1 - T|.
    :returns: The Envelope (bin minimizers, increasing |x1 - T|).

    """
    dist = projected[:, 0] - horizon
    if side == '-':
        dist = -dist
    elif side != '+':
        raise ValueError('unknown side \'{}\''.format(side))

    keep = dist > 0.0
    if window is not None:
        keep &= dist <= window
    top = window if window is not None else (np.max(dist[keep]) if np.any(keep) else 0.0)
    keep &= dist >= top * 10.0 ** -ENVELOPE_DECADES

    required = bins * POINTS_PER_BIN
    if np.count_nonzero(keep) < required:
        raise InsufficientDataError(
            error_map['data'].format(np.count_nonzero(keep), side, required)
        )

    dist = dist[keep]
    xn = projected[keep, 1]
    x1 = projected[keep, 0]

    edges = np.geomspace(top * 10.0 ** -ENVELOPE_DECADES, top, bins + 1)
    which = np.clip(np.searchsorted(edges, dist, side='right') - 1, 0, bins - 1)

    env_x1, env_xn, floor = [], [], []
    for b in range(bins):
        members = np.nonzero(which == b)[0]
        if len(members):
            best = members[np.argmin(xn[members])]
            env_x1.append(x1[best])
            env_xn.append(xn[best])
            floor.append(np.percentile(np.abs(xn[members]), 1))

    return Envelope(side, np.array(env_x1), np.array(env_xn), np.array(floor))

def fit_contact(envelope, horizon):
    """
    Fit xn = c |x1 - T|^k on an envelope, each bin clamped away from 0 by its
    noise floor.

    :envelope: The Envelope.
    :horizon: Final time T.
    :returns: The ContactFit.

    """
    dist = envelope.x1 - horizon
    if not (np.all(dist > 0.0) or np.all(dist < 0.0)):
        raise DegenerateFitError(error_map['fit'].format('envelope on both sides of T'))

    dist = np.abs(dist)
    clamped = np.maximum(envelope.xn, envelope.floor)
    keep = clamped > 0.0
    if np.count_nonzero(keep) < MIN_BINS:
        raise DegenerateFitError(error_map['fit'].format(
            '{} bins above zero, {} required'.format(np.count_nonzero(keep), MIN_BINS)
        ))

    lx, ly = np.log(dist[keep]), np.log(clamped[keep])
    if np.ptp(lx) == 0.0:
        raise DegenerateFitError(error_map['fit'].format('single abscissa'))
    if np.ptp(ly) == 0.0:
        raise DegenerateFitError(error_map['fit'].format('flat envelope'))

    (slope, intercept), res, _, _, _ = np.polyfit(lx, ly, 1, full=True)
    residual = float(np.sqrt(res[0] / len(lx))) if len(res) else 0.0
    logger.debug('contact fit %s: exponent %.4f, coefficient %.4g', envelope.side, slope, np.exp(intercept))

    return ContactFit(
        side=envelope.side,
        exponent=float(slope),
        coefficient=float(np.exp(intercept)),
        residual=residual,
        bins=int(np.count_nonzero(keep)),
        window=(float(np.min(dist[keep])), float(np.max(dist[keep])))
    )

def sector_perturbation(system, traj, horizon, epsilon, substeps=200):
    """
    End-point of the L2-close control: v flips to -sqrt(1 - eps^2) on
    [(T - eps) / 2, (T + eps) / 2] with u = +eps then -eps on the half windows.

    :system: The ControlSystem (sub-Riemannian frame X, Y).
    :traj: TrajectoryData with adjoint at horizon T.
    :horizon: Final time T > 2 eps.
    :epsilon: Perturbation size, 0 < eps < 1/2.
    :substeps: RK4 steps per segment.
    :returns: The SectorResult.

    """
    if not 0.0 < epsilon < 0.5:
        raise ValueError('epsilon must lie in (0, 1/2), got {}'.format(epsilon))
    if horizon <= 2.0 * epsilon:
        raise ValueError('the horizon must exceed 2 epsilon')

    flipped = -np.sqrt(1.0 - epsilon ** 2)
    durations = np.array([horizon - epsilon, epsilon, epsilon, horizon - epsilon]) / 2.0
    v = np.array([1.0, flipped, flipped, 1.0])
    u = np.array([0.0, epsilon, -epsilon, 0.0])

    norm_error = float(np.max(np.abs(v ** 2 + u ** 2 - 1.0)))
    if norm_error > _SLACK:
        raise ConstraintViolationError(
            error_map['constraint'].format('|(v + dv)^2 + du^2 - 1| = {}'.format(norm_error))
        )

    params = [(np.array([a]), np.array([b])) for a, b in zip(v, u)]
    end = rk4_cells(_sr_rhs(system), traj.samples[0], durations, params, substeps)[0]
    x1, xn = adapted_projection(end, traj)[0]

    dv = v - np.array([1.0, -1.0, -1.0, 1.0])
    return SectorResult(
        epsilon=float(epsilon),
        end_point=end,
        x1=float(x1),
        xn=float(xn),
        norm_error=norm_error,
        sup_distance=float(max(np.max(np.abs(v - 1.0)), np.max(np.abs(u)))),
        l2_distance=float(np.sqrt(np.sum(((v - 1.0) ** 2 + u ** 2) * durations))),
        l1_dv=float(np.sum(np.abs(dv) * durations)),
        l1_du=float(np.sum(np.abs(u) * durations))
    )

def sector_sweep(system, traj, horizon, epsilons):
    """
    Sector perturbations over a range of sizes and the log-log slope of |xn|.

    :system: The ControlSystem.
    :traj: TrajectoryData with adjoint at horizon T.
    :horizon: Final time T.
    :epsilons: At least 5 distinct sizes spanning a factor 4 or more.
    :returns: The SectorSweep.

    """
    eps = np.asarray(epsilons, dtype=float)
    if len(np.unique(eps)) != len(eps):
        raise DegenerateFitError(error_map['fit'].format('duplicate epsilon values'))
    if len(eps) < 5 or np.max(eps) < 4.0 * np.min(eps):
        raise DegenerateFitError(
            error_map['fit'].format('need 5 epsilon values spanning a factor 4')
        )

    results = [sector_perturbation(system, traj, horizon, e) for e in np.sort(eps)]
    for r in results:
        if r.xn >= 0.0:
            raise SectorRegimeError(r.epsilon, r.xn, results)

    lx = np.log([r.epsilon for r in results])
    ly = np.log([-r.xn for r in results])
    (slope, intercept), res, _, _, _ = np.polyfit(lx, ly, 1, full=True)
    logger.info('sector sweep: slope %.4f over %d sizes', slope, len(results))

    return SectorSweep(
        results=results,
        slope=float(slope),
        coefficient=float(-np.exp(intercept)),
        residual=float(np.sqrt(res[0] / len(lx))) if len(res) else 0.0
    )
