import numpy as np

class Utils:

    """
    Implementation of the utils class, which contains a set of utilitary methods.

    """

    @staticmethod
    def horizon_grid(horizon_max, count=32):
        """
        Get the uniform grid of horizons of a coarse scan.

        :horizon_max: Largest horizon.
        :count: Number of horizons.
        :returns: Array (count,) ending at horizon_max.

        """
        return horizon_max * np.arange(1, count + 1) / count

    @staticmethod
    def kernel_target(profile):
        """
        Get the target of the kernel control family from a kernel profile.

        The primitive of the control is the derivative of order n - 2 of the
        cone coordinate, so it tracks J^(n-2), the top term of Q1.

        :profile: KernelProfile (J_0).
        :returns: (times, values) scaled to a unit maximum.

        """
        top = profile.terms()[-1]
        peak = np.max(np.abs(top))
        if peak == 0.0:
            return None

        return profile.operator.eval_times, top / peak

    @staticmethod
    def window(horizon, eta):
        """
        Get the x1 window of the contact fits, honoring x1 - T = o(eta).

        :horizon: Final time T.
        :eta: Affine control bound.
        :returns: Largest |x1 - T| used by the envelopes.

        """
        return eta ** 2 * horizon

    @staticmethod
    def conjugate_value(result):
        """
        Get the reported value of a conjugate time.

        :result: ConjugateTimeResult.
        :returns: The estimate, or 'none' when no crossing was found.

        """
        return result.estimate if result.found else 'none'
