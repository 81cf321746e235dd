from errors import ConfigError, error_map
from expr import parse_field
from geometry import ControlSystem

class PresetDesc:

    """
    Implementation of the class responsible to represent a shipped system: its
    vector fields, initial point, run defaults and known coefficients.

    """

    def __init__(self, name, dimension, drift, control, defaults, coefficients=None,
                 params=None):
        """
        Initialize the preset description internal data.

        :name: Name of the preset.
        :dimension: Dimension n of the state space.
        :drift: Component expressions of X.
        :control: Component expressions of Y.
        :defaults: Section -> {key: value} of the run defaults.
        :coefficients: Constant (n - 2) x (n - 2) matrix, or None when the
                       coefficients must be calibrated from the Hessian.
        :params: Parameters the expressions were built from.

        """
        self.__name = name
        self.__dimension = dimension
        self.__drift = list(drift)
        self.__control = list(control)
        self.__defaults = defaults
        self.__coefficients = coefficients
        self.__params = dict(params or {})

    @property
    def name(self):
        """
        Get the name of the preset.

        :returns: The preset name.

        """
        return self.__name

    @property
    def dimension(self):
        return self.__dimension

    @property
    def drift(self):
        """
        Get the component expressions of the drift X.

        :returns: A list of n expression strings.

        """
        return list(self.__drift)

    @property
    def control(self):
        """
        Get the component expressions of the control field Y.

        :returns: A list of n expression strings.

        """
        return list(self.__control)

    @property
    def x0(self):
        return [0.0] * self.__dimension

    @property
    def defaults(self):
        """
        Get the run defaults of the preset.

        :returns: A dictionary section -> {key: value}.

        """
        return {k: dict(v) for k, v in self.__defaults.items()}

    @property
    def coefficients(self):
        return self.__coefficients

    @property
    def params(self):
        return dict(self.__params)

    def system(self):
        """
        Build the control system of the preset.

        :returns: The ControlSystem.

        """
        n = self.__dimension
        return ControlSystem(
            parse_field(self.__drift, n, 'X'),
            parse_field(self.__control, n, 'Y'),
            self.__name
        )

def martinet(alpha=1.0, beta=0.0, gamma=0.0):
    """
    Martinet frame X = (1 + alpha y)^-1 (d/dx + y^2/2 d/dz),
    Y = (1 + beta x + gamma y)^-1 d/dy, orthonormal for the metric
    (1 + alpha y)^2 dx^2 + (1 + beta x + gamma y)^2 dy^2.

    """
    drift = [
        '1/(1 + ({})*x2)'.format(alpha),
        '0',
        'x2^2/(2*(1 + ({})*x2))'.format(alpha)
    ]
    control = ['0', '1/(1 + ({})*x1 + ({})*x2)'.format(beta, gamma), '0']
    defaults = {
        'horizon': {'horizon': 1.0, 'small_horizon': 0.2, 'scan_max': 10.0},
        'constraint': {'eta': 0.5, 'sr_alpha': 0.3}
    }

    return PresetDesc('martinet', 3, drift, control, defaults,
                      params={'alpha': alpha, 'beta': beta, 'gamma': gamma})

def const4():
    """
    Four-dimensional system with constant coefficients b11 = -1, b22 = 1, for
    which t_cc = pi and t_c = 2 pi.

    """
    drift = ['1 + x2', 'x3', '0', 'x3^2 - x2^2']
    control = ['0', '0', '1', '0']
    defaults = {
        'horizon': {'horizon': 4.0, 'small_horizon': 1.0, 'scan_max': 8.0},
        'constraint': {'eta': 0.5, 'sr_alpha': 0.3}
    }

    return PresetDesc('const4', 4, drift, control, defaults,
                      coefficients=[[-1.0, 0.0], [0.0, 1.0]])

def chain_n3():
    """
    Three-dimensional chain with the constant coefficient b = 1/2.

    """
    drift = ['1 + x2', '0', 'x2^2/2']
    control = ['0', '1', '0']
    defaults = {
        'horizon': {'horizon': 1.0, 'small_horizon': 0.2, 'scan_max': 10.0},
        'constraint': {'eta': 0.5, 'sr_alpha': 0.3}
    }

    return PresetDesc('chain-n3', 3, drift, control, defaults, coefficients=[[0.5]])

# preset name -> (builder, accepted parameters)
PRESETS = {
    'martinet': (martinet, ('alpha', 'beta', 'gamma')),
    'const4': (const4, ()),
    'chain-n3': (chain_n3, ())
}

def get_preset(name, **params):
    """
    Get a shipped preset.

    :name: Name of the preset.
    :params: Preset parameters (martinet: alpha, beta, gamma).
    :returns: The PresetDesc.

    """
    if name not in PRESETS:
        raise ConfigError(error_map['config'].format(
            'unknown preset \'{}\' (known: {})'.format(name, ', '.join(sorted(PRESETS)))
        ))

    builder, accepted = PRESETS[name]
    unknown = set(params) - set(accepted)
    if unknown:
        raise ConfigError(error_map['config'].format(
            'preset \'{}\' takes no parameter {}'.format(name, ', '.join(sorted(unknown)))
        ))

    return builder(**params)
