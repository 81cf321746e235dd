from unittest import TestCase, main

from errors import ConfigError
from presets import PRESETS, get_preset

class PresetsTest(TestCase):

    """
    Implementation of unit tests for the shipped presets.

    """

    def test_get_presets(self):
        """
        GIVEN the names of the shipped presets.
        WHEN  the user retrieves them.
        THEN  each one must build a system of its dimension.

        """
        for name in PRESETS:
            preset = get_preset(name)

            self.assertEqual(preset.name, name)
            self.assertEqual(preset.system().n, preset.dimension)
            self.assertEqual(preset.x0, [0.0] * preset.dimension)

    def test_martinet_parameters(self):
        """
        GIVEN Martinet parameters.
        WHEN  the user retrieves the preset.
        THEN  they must be stored and written into the fields.

        """
        preset = get_preset('martinet', alpha=2.0, gamma=-0.5)

        self.assertEqual(preset.params, {'alpha': 2.0, 'beta': 0.0, 'gamma': -0.5})
        self.assertIn('(2.0)', preset.drift[0])
        self.assertIn('(-0.5)', preset.control[1])
        self.assertIsNone(preset.coefficients)

    def test_defaults_are_copies(self):
        """
        GIVEN a preset.
        WHEN  the user modifies its defaults.
        THEN  a new retrieval must not see the change.

        """
        get_preset('const4').defaults['horizon']['horizon'] = 99.0

        self.assertEqual(get_preset('const4').defaults['horizon']['horizon'], 4.0)

    def test_unknown_preset_or_parameter(self):
        """
        GIVEN an unknown preset, or a parameter the preset does not take.
        WHEN  the user retrieves it.
        THEN  a ConfigError must be raised.

        """
        with self.assertRaises(ConfigError):
            get_preset('heisenberg')

        with self.assertRaises(ConfigError):
            get_preset('const4', alpha=1.0)

if __name__ == "__main__":
    main()
