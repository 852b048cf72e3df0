from django.test import SimpleTestCase, override_settings

from ..emdp import WalkerModel
from ..serializers import ExternalRegionSerializer, RunConfigSerializer, WalkerModelSerializer


class TestRunConfigSerializer(SimpleTestCase):
    def test_defaults(self):
        """Test missing values come from the settings"""
        serializer = RunConfigSerializer(data={'model': 'walker.json'})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        config = serializer.validated_data
        self.assertEqual(config['mode'], 'interval')
        self.assertEqual(config['samples_per_axis'], 5)
        self.assertEqual(config['tol'], 1e-9)
        self.assertIsNone(config['external'])

    @override_settings(IMDP_BOUNDS={'WIDTHS': [0.2, 0.1], 'MC_RUNS': 50})
    def test_settings_override(self):
        """Test IMDP_BOUNDS entries replace the built-in defaults"""
        serializer = RunConfigSerializer(data={'model': 'walker.json'})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.validated_data['widths'], [0.2, 0.1])
        self.assertEqual(serializer.validated_data['mc_runs'], 50)
        self.assertEqual(serializer.validated_data['mc_horizon'], 200)

    def test_explicit_values_win(self):
        """Test values given in the document are kept"""
        serializer = RunConfigSerializer(data={'model': 'walker.json', 'widths': [0.1], 'mc_seed': 7})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.validated_data['widths'], [0.1])
        self.assertEqual(serializer.validated_data['mc_seed'], 7)

    def test_widths_must_nest(self):
        """Test widths that do not subdivide each other"""
        for widths in ([0.1, 0.04], [0.1, -0.05], [0.05, 0.1]):
            serializer = RunConfigSerializer(data={'model': 'walker.json', 'widths': widths})
            self.assertFalse(serializer.is_valid())
            self.assertIn('widths', serializer.errors)

    def test_invalid_mode(self):
        """Test unknown credal modes"""
        serializer = RunConfigSerializer(data={'model': 'walker.json', 'mode': 'exact'})
        self.assertFalse(serializer.is_valid())
        self.assertIn('mode', serializer.errors)


class TestWalkerModelSerializer(SimpleTestCase):
    def setUp(self):
        self.document = WalkerModel.default().to_document()

    def test_valid_document(self):
        """Test the default model document validates"""
        serializer = WalkerModelSerializer(data=self.document)
        self.assertTrue(serializer.is_valid(), serializer.errors)

    def test_goal_outside_domain(self):
        """Test terminal boxes must lie inside the domain"""
        self.document['goal'] = {'lo': [1.0, 0.0], 'hi': [1.5, 1.0]}
        serializer = WalkerModelSerializer(data=self.document)
        self.assertFalse(serializer.is_valid())
        self.assertIn('goal', serializer.errors)

    def test_duplicate_action_names(self):
        """Test action names must be unique"""
        self.document['actions'][1]['name'] = self.document['actions'][0]['name']
        serializer = WalkerModelSerializer(data=self.document)
        self.assertFalse(serializer.is_valid())
        self.assertIn('actions', serializer.errors)

    def test_drift_dimension(self):
        """Test drifts must match the domain dimension"""
        self.document['actions'][0]['drift'] = [0.1, 0.1, 0.1]
        self.assertFalse(WalkerModelSerializer(data=self.document).is_valid())

    def test_noise_positive(self):
        """Test the noise half-width must be positive"""
        self.document['actions'][0]['noise_half_width'] = 0.0
        self.assertFalse(WalkerModelSerializer(data=self.document).is_valid())


class TestExternalRegionSerializer(SimpleTestCase):
    def test_string_fields(self):
        """Test CSV strings are parsed into floats"""
        serializer = ExternalRegionSerializer(data={'lo': ['0.0', '0.1'], 'hi': ['0.1', '0.2'],
                                                    'action': 'slow', 'value': '3.5'})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.validated_data['lo'], [0.0, 0.1])
        self.assertEqual(serializer.validated_data['value'], 3.5)

    def test_value_optional(self):
        """Test rows without a learned cost"""
        serializer = ExternalRegionSerializer(data={'lo': [0, 0], 'hi': [1, 1], 'action': 'fast', 'value': None})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertIsNone(serializer.validated_data['value'])

    def test_empty_region(self):
        """Test regions need positive extent"""
        serializer = ExternalRegionSerializer(data={'lo': [0, 0], 'hi': [0, 1], 'action': 'fast'})
        self.assertFalse(serializer.is_valid())
