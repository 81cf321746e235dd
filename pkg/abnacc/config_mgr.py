from configparser import ConfigParser, Error as ParserError
from dataclasses import asdict, dataclass, field
from hashlib import sha256
from json import dumps
from os.path import dirname, isabs, isfile, join
import logging

import numpy as np

from errors import ConfigError, error_map
from expr import parse_field
from geometry import ControlSystem
from operators import CoefficientField
from presets import get_preset

logger = logging.getLogger(__name__)

def _config_error(msg):
    return ConfigError(error_map['config'].format(msg))

@dataclass(frozen=True)
class SystemConfig:

    """
    Implementation of the resolved run configuration: the system, horizons,
    constraints, grids, tolerances and Monte Carlo settings.

    """

    dimension: int
    drift: tuple
    control: tuple
    x0: tuple
    horizon: float
    small_horizon: float
    scan_max: float
    eta: float
    sr_alpha: float
    trajectory_grid: int
    control_grid: int
    operator_grid: int
    rank_tol: float
    assumption_tol: float
    conjugate_tol: float
    seed: int
    samples: int
    threads: int
    epsilons: tuple
    preset: str = None
    params: dict = field(default_factory=dict)
    coefficients: tuple = None
    table: dict = None

    def system(self):
        """
        Build the control system of the configuration.

        :returns: The ControlSystem.

        """
        return ControlSystem(
            parse_field(list(self.drift), self.dimension, 'X'),
            parse_field(list(self.control), self.dimension, 'Y'),
            self.preset or 'custom'
        )

    def coefficient_field(self):
        """
        Get the coefficient field of the configuration.

        :returns: The CoefficientField, or None when it must be calibrated.

        """
        if self.table is not None:
            columns = {k: v for k, v in self.table.items() if k != 't'}
            return CoefficientField.from_table(self.dimension, self.table['t'], columns)
        if self.coefficients is not None:
            return CoefficientField.constant(self.dimension, self.coefficients,
                                             label=self.preset or 'config')

        return None

    def tolerances(self):
        return {
            'rank': self.rank_tol,
            'assumption': self.assumption_tol,
            'conjugate': self.conjugate_tol
        }

    def to_dict(self):
        out = asdict(self)
        for key in ('drift', 'control', 'x0', 'epsilons'):
            out[key] = list(out[key])
        if self.coefficients is not None:
            out['coefficients'] = [list(row) for row in self.coefficients]

        return out

    def digest(self):
        """
        Get the hash of the configuration.

        :returns: SHA-256 hex digest of the canonical JSON rendering.

        """
        text = dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return sha256(text.encode('utf-8')).hexdigest()

class ConfigMgr:

    """
    Implementation of the class responsible for the loading of the
    configuration files.

    """

    defaults = {
        'horizon': {'horizon': 1.0, 'small_horizon': 0.2, 'scan_max': 10.0},
        'constraint': {'eta': 0.5, 'sr_alpha': 0.3},
        'grids': {'trajectory': 400, 'control': 64, 'operator': 2000},
        'tolerances': {'rank': 1e-7, 'assumption': 1e-6, 'conjugate': 1e-4},
        'run': {
            'seed': 7,
            'samples': 20000,
            'threads': 1,
            'epsilons': '0.05, 0.1, 0.15, 0.2, 0.3, 0.4'
        }
    }

    system_keys = {'preset', 'alpha', 'beta', 'gamma', 'dimension', 'drift', 'control', 'x0'}

    # smallest accepted grid sizes
    min_grids = {'trajectory': 2, 'control': 8, 'operator': 16}

    @classmethod
    def load(cls, path, seed_override=None, threads=None):
        """
        Load and validate a configuration file.

        :path: Path of the INI file.
        :seed_override: Seed replacing the configured one.
        :threads: Worker count replacing the configured one.
        :returns: The SystemConfig.

        """
        if not isfile(path):
            raise _config_error('the config file \'{}\' was not found!'.format(path))

        parser = ConfigParser(inline_comment_prefixes=(';', '#'))
        try:
            parser.read(path)
        except ParserError as err:
            raise _config_error(str(err).replace('\n', ' '))

        return cls.parse(parser, dirname(path), seed_override, threads)

    @classmethod
    def parse(cls, parser, base_dir='.', seed_override=None, threads=None):
        """
        Resolve a parsed configuration against the preset and global defaults.

        :parser: The ConfigParser.
        :base_dir: Directory relative table paths are resolved from.
        :seed_override: Seed replacing the configured one.
        :threads: Worker count replacing the configured one.
        :returns: The SystemConfig.

        """
        system = dict(parser['system']) if parser.has_section('system') else {}
        defaults = {k: dict(v) for k, v in cls.defaults.items()}

        unknown = sorted(set(system) - cls.system_keys)
        if unknown:
            raise _config_error('unknown key(s) in [system]: {}'.format(', '.join(unknown)))

        has_preset = 'preset' in system
        has_exprs = any(k in system for k in ('drift', 'control', 'dimension'))
        if has_preset == has_exprs:
            raise _config_error('exactly one of preset or drift/control expressions is required')

        preset = None
        coefficients = None
        params = {}
        if has_preset:
            params = {
                k: cls._float('system', k, system[k])
                for k in ('alpha', 'beta', 'gamma') if k in system
            }
            preset = get_preset(system['preset'], **params)
            for section, values in preset.defaults.items():
                defaults[section].update(values)

            n = preset.dimension
            drift, control, x0 = preset.drift, preset.control, preset.x0
            coefficients = preset.coefficients
            params = preset.params
        else:
            for key in ('dimension', 'drift', 'control'):
                if key not in system:
                    raise _config_error('missing key \'{}\' in [system]'.format(key))
            n = cls._int('system', 'dimension', system['dimension'])
            drift = cls._split(system['drift'])
            control = cls._split(system['control'])
            x0 = ([cls._float('system', 'x0', v) for v in cls._split(system['x0'])]
                  if 'x0' in system else [0.0] * n)
            if len(x0) != n:
                raise _config_error('x0 has {} components, expected {}'.format(len(x0), n))

        def get(section, key):
            if parser.has_option(section, key):
                return parser.get(section, key)
            return defaults[section][key]

        grids = {
            k: cls._int('grids', k, get('grids', k)) for k in cls.defaults['grids']
        }
        for k, low in cls.min_grids.items():
            if grids[k] < low:
                raise _config_error('grid \'{}\' = {} is below {}'.format(k, grids[k], low))

        tolerances = {
            k: cls._float('tolerances', k, get('tolerances', k))
            for k in cls.defaults['tolerances']
        }
        for k, v in tolerances.items():
            if not v > 0.0:
                raise _config_error('tolerance \'{}\' must be positive'.format(k))

        horizon = {
            k: cls._float('horizon', k, get('horizon', k)) for k in cls.defaults['horizon']
        }
        for k, v in horizon.items():
            if not v > 0.0:
                raise _config_error('\'{}\' must be positive'.format(k))

        eta = cls._float('constraint', 'eta', get('constraint', 'eta'))
        sr_alpha = cls._float('constraint', 'sr_alpha', get('constraint', 'sr_alpha'))
        if eta < 0.0:
            raise _config_error('eta must be nonnegative')
        if not 0.0 < sr_alpha < 1.0:
            raise _config_error('sr_alpha must lie in (0, 1)')

        seed = cls._int('run', 'seed', get('run', 'seed'))
        if seed_override is not None:
            seed = int(seed_override)
        workers = cls._int('run', 'threads', get('run', 'threads'))
        if threads is not None:
            workers = int(threads)
        samples = cls._int('run', 'samples', get('run', 'samples'))
        if samples < 1 or workers < 1:
            raise _config_error('samples and threads must be positive')
        epsilons = tuple(
            cls._float('run', 'epsilons', v) for v in get('run', 'epsilons').split(',')
        )

        table = None
        if parser.has_section('coefficients'):
            coefficients, table = cls._coefficients(parser['coefficients'], n, base_dir)

        config = SystemConfig(
            dimension=n,
            drift=tuple(drift),
            control=tuple(control),
            x0=tuple(float(v) for v in x0),
            horizon=horizon['horizon'],
            small_horizon=horizon['small_horizon'],
            scan_max=horizon['scan_max'],
            eta=eta,
            sr_alpha=sr_alpha,
            trajectory_grid=grids['trajectory'],
            control_grid=grids['control'],
            operator_grid=grids['operator'],
            rank_tol=tolerances['rank'],
            assumption_tol=tolerances['assumption'],
            conjugate_tol=tolerances['conjugate'],
            seed=seed,
            samples=samples,
            threads=workers,
            epsilons=epsilons,
            preset=preset.name if preset else None,
            params=params,
            coefficients=None if coefficients is None else
                tuple(tuple(float(v) for v in row) for row in coefficients),
            table=table
        )
        logger.debug('configuration %s resolved (n=%d)', config.digest()[:12], n)

        return config

    @classmethod
    def _coefficients(cls, section, n, base_dir):
        """
        Read the [coefficients] section: constants bij or a CSV table.

        :returns: (matrix or None, table columns or None).

        """
        section = dict(section)
        r = n - 2

        if 'table' in section:
            path = section['table']
            if not isabs(path):
                path = join(base_dir, path)
            if not isfile(path):
                raise _config_error('the coefficient table \'{}\' was not found!'.format(path))

            data = np.genfromtxt(path, delimiter=',', names=True)
            if 't' not in data.dtype.names:
                raise _config_error('the coefficient table has no \'t\' column')

            return None, {k: [float(v) for v in np.atleast_1d(data[k])] for k in data.dtype.names}

        matrix = np.zeros((r, r))
        for key, value in section.items():
            if len(key) != 3 or key[0] != 'b' or not key[1:].isdigit():
                raise _config_error('unknown coefficient \'{}\''.format(key))
            i, j = int(key[1]) - 1, int(key[2]) - 1
            if not (0 <= i < r and 0 <= j < r):
                raise _config_error('coefficient \'{}\' outside 1..{}'.format(key, r))
            matrix[i, j] = matrix[j, i] = cls._float('coefficients', key, value)

        return matrix.tolist(), None

    @staticmethod
    def _split(text):
        return [part.strip() for part in text.split(';') if part.strip()]

    @staticmethod
    def _float(section, key, value):
        try:
            return float(value)
        except (TypeError, ValueError):
            raise _config_error('[{}] {} = \'{}\' is not a number'.format(section, key, value))

    @staticmethod
    def _int(section, key, value):
        try:
            return int(value)
        except (TypeError, ValueError):
            raise _config_error('[{}] {} = \'{}\' is not an integer'.format(section, key, value))
