
# error mapping of the application.
error_map = {
    'syntax': 'Syntax error at offset {}: {}',
    'identifier': 'Unknown identifier \'{}\' at offset {}',
    'dimension': 'Dimension mismatch: expected {} components, got {}',
    'divisor': 'Near-zero divisor in \'{}\' at point {}',
    'sqrt': 'Nonpositive argument of sqrt in \'{}\' at point {}',
    'order': 'Insufficient jet order: {} required, {} available',
    'integration': 'Integration failed: {}',
    'corank': 'corank-1 failure: cone rank {} at t = {} (expected {})',
    'orientation': 'Adjoint orientation flip impossible at t = {}',
    'kernel': 'Empty kernel for restriction {} (control grid too small)',
    'coefficient': 'Invalid coefficient field: {}',
    'coarse': 'Profile too coarse: {} samples, {} required',
    'singular': 'Singular boundary value problem at T = {} (at or beyond t_c)',
    'boundary_data': 'Boundary data must hold {} values per end, got {}',
    'data': 'Insufficient data: {} points on side {}, {} required',
    'fit': 'Degenerate regression: {}',
    'constraint': 'Control constraint violated: {}',
    'sector': 'Sector regime failure: xn = {} at epsilon = {}',
    'config': 'Malformed configuration: {}',
    'assumption': 'Assumption {} fails at t = {}',
    'unknown': 'Unknown error'
}

class AbnaccError(RuntimeError):

    """
    Base class of every error raised by the numerical modules.

    """
    pass

class ExprSyntaxError(AbnaccError):

    """
    Implementation of the syntax error of the expression language.

    """

    def __init__(self, offset, msg):
        """
        Initialize the error internal data.

        :offset: Character offset of the failure in the input text.
        :msg: Description of the failure.

        """
        super().__init__(error_map['syntax'].format(offset, msg))

        self.offset = offset

class UnknownIdentifierError(ExprSyntaxError):

    """
    Implementation of the error raised for names other than x1..xn and the
    supported functions.

    """

    def __init__(self, offset, name):
        """
        Initialize the error internal data.

        :offset: Character offset of the identifier.
        :name: The offending identifier.

        """
        super().__init__(offset, 'unknown identifier \'{}\''.format(name))

        self.name = name

class DimensionMismatchError(AbnaccError):
    pass

class JetEvaluationError(AbnaccError):

    """
    Implementation of the error raised when an expression node cannot be
    evaluated (near-zero divisor, invalid sqrt argument).

    """

    def __init__(self, key, node, point):
        """
        Initialize the error internal data.

        :key: Key of the message in the error map.
        :node: Text of the failing node.
        :point: Base point where the evaluation failed.

        """
        super().__init__(error_map[key].format(node, point))

        self.node = node
        self.point = point

class InsufficientOrderError(AbnaccError):
    pass

class IntegrationError(AbnaccError):
    pass

class CorankError(AbnaccError):
    pass

class OrientationError(AbnaccError):
    pass

class EmptyKernelError(AbnaccError):
    pass

class CoefficientError(AbnaccError):
    pass

class ProfileTooCoarseError(AbnaccError):
    pass

class SingularBoundaryProblemError(AbnaccError):
    pass

class BoundaryDataError(AbnaccError):
    pass

class InsufficientDataError(AbnaccError):
    pass

class DegenerateFitError(AbnaccError):
    pass

class ConstraintViolationError(AbnaccError):
    pass

class SectorRegimeError(AbnaccError):

    """
    Implementation of the error raised when a sector sweep leaves the
    negative-xn regime.

    """

    def __init__(self, epsilon, xn, results):
        """
        Initialize the error internal data.

        :epsilon: First perturbation size with xn >= 0.
        :xn: The offending end-point coordinate.
        :results: All the computed sector results.

        """
        super().__init__(error_map['sector'].format(xn, epsilon))

        self.results = results

class ConfigError(AbnaccError):
    pass

class AssumptionFailure(AbnaccError):

    """
    Implementation of the error raised by the pipeline when the assumption
    gate fails.

    """

    def __init__(self, report):
        """
        Initialize the error internal data.

        :report: The failing assumption report.

        """
        name = report.first_failure()
        super().__init__(
            error_map['assumption'].format(name, report.failing_time[name])
        )

        self.report = report
