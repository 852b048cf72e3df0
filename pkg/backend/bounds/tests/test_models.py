import hashlib

from django.test import TransactionTestCase

from ..models import ExperimentRun


class TestExperimentRun(TransactionTestCase):
    def setUp(self):
        """Set up test data"""
        self.model_hash = hashlib.sha256(b'walker').hexdigest()

    def create(self, **kwargs):
        fields = {
            'config_hash': hashlib.sha256(b'config').hexdigest(),
            'model_hash': self.model_hash,
            'widths': [0.1, 0.05],
            'output_dir': '/tmp/out',
        }
        fields.update(kwargs)
        return ExperimentRun.objects.create(**fields)

    def test_run_creation(self):
        """Test basic run creation"""
        run = self.create()
        self.assertIsNotNone(run.id)
        self.assertEqual(run.status, 'running')
        self.assertEqual(run.mode, 'interval')
        self.assertEqual(run.summary, {})
        self.assertIn('running', str(run))

    def test_finish(self):
        """Test finishing a run stores status and summary"""
        run = self.create()
        run.finish('completed', {'converged': True})
        run.refresh_from_db()
        self.assertEqual(run.status, 'completed')
        self.assertEqual(run.summary, {'converged': True})

        run.finish('failed')
        run.refresh_from_db()
        self.assertEqual(run.summary, {'converged': True})

    def test_search_functionality(self):
        """Test run search by hash prefix, mode and status"""
        run1 = self.create()
        run2 = self.create(mode='candidates', model_hash=hashlib.sha256(b'other').hexdigest())
        run2.finish('not-converged')

        results = ExperimentRun.search(model_hash=self.model_hash[:8])
        self.assertEqual(results.count(), 1)
        self.assertEqual(results.first(), run1)

        results = ExperimentRun.search(mode='candidates')
        self.assertEqual(list(results), [run2])

        results = ExperimentRun.search(status='not-converged')
        self.assertEqual(list(results), [run2])

        self.assertEqual(ExperimentRun.search().count(), 2)
