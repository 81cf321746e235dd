from dataclasses import dataclass, field
import logging

import numpy as np

from utils import Utils

logger = logging.getLogger(__name__)

PRESCAN = 32

@dataclass
class ConjugateTimeResult:

    """
    Implementation of a conjugate-time bracket, with the coarse scan that
    produced it.

    """

    mode: str
    bracket_low: float
    bracket_high: float
    status: str
    horizons: np.ndarray = field(default=None, repr=False)
    values: np.ndarray = field(default=None, repr=False)
    monotone: bool = True

    @property
    def found(self):
        return self.status == 'found'

    @property
    def estimate(self):
        """
        Get the midpoint of the bracket.

        :returns: The conjugate time estimate, or inf when none was found.

        """
        if not self.found:
            return np.inf

        return 0.5 * (self.bracket_low + self.bracket_high)

    def to_dict(self):
        return {
            'mode': self.mode,
            'bracket_low': self.bracket_low,
            'bracket_high': self.bracket_high,
            'status': self.status
        }

def locate_crossing(evaluate, horizon_max, tol, mode, prescan=PRESCAN, progress=None):
    """
    Locate the first horizon where a smallest eigenvalue turns negative: coarse
    scan of `prescan` horizons, then bisection of the first sign change.

    :evaluate: Callable T -> smallest eigenvalue at horizon T.
    :horizon_max: Upper end of the scanned horizons.
    :tol: Width of the returned bracket.
    :mode: Label stored in the result.
    :prescan: Number of horizons of the coarse scan.
    :progress: Optional callable (done, total).
    :returns: The ConjugateTimeResult.

    """
    horizons = Utils.horizon_grid(horizon_max, prescan)
    values = np.empty(prescan)

    for k, horizon in enumerate(horizons):
        values[k] = evaluate(horizon)
        if progress:
            progress(k + 1, prescan)

    negative = np.nonzero(values < 0.0)[0]
    if not len(negative):
        logger.info('%s: no crossing in (0, %g]', mode, horizon_max)
        return ConjugateTimeResult(mode, float(horizon_max), None, 'none', horizons, values)

    first = negative[0]
    monotone = bool(np.all(values[first:] < 0.0))
    if not monotone:
        # the bisection below still brackets the first sign change of the scan
        logger.warning('%s: non-monotone smallest eigenvalue on the coarse scan', mode)

    low = float(horizons[first - 1]) if first > 0 else 0.0
    high = float(horizons[first])
    while high - low > tol:
        mid = 0.5 * (low + high)
        if evaluate(mid) < 0.0:
            high = mid
        else:
            low = mid
        logger.debug('%s: bracket [%.8f, %.8f]', mode, low, high)

    return ConjugateTimeResult(mode, low, high, 'found', horizons, values, monotone)
