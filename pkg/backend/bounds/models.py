import logging
import uuid

from django.db import models

logger = logging.getLogger(__name__)


class ExperimentRun(models.Model):
    """Registry entry of one ``experiment`` command invocation.

    Attributes:
        id (UUIDField): Primary key, auto-generated UUID
        created_at (datetime): Start of the run
        config_hash (str): SHA-256 of the canonical run configuration
        model_hash (str): SHA-256 of the canonical model document
        widths (list): Grid widths of the refinement sequence
        mode (str): Credal mode, 'interval' or 'candidates'
        output_dir (str): Directory holding the artifact bundle
        status (str): 'running', 'completed', 'not-converged' or 'failed'
        summary (dict): The machine-readable experiment summary
    """

    STATUS_CHOICES = [
        ('running', 'Running'),
        ('completed', 'Completed'),
        ('not-converged', 'Not converged'),
        ('failed', 'Failed'),
    ]
    MODE_CHOICES = [('interval', 'Interval'), ('candidates', 'Candidates')]

    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    created_at = models.DateTimeField(auto_now_add=True)
    config_hash = models.CharField(max_length=64)
    model_hash = models.CharField(max_length=64)
    widths = models.JSONField(default=list)
    mode = models.CharField(max_length=20, choices=MODE_CHOICES, default='interval')
    output_dir = models.CharField(max_length=500)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES, default='running')
    summary = models.JSONField(default=dict, blank=True)

    class Meta:
        indexes = [
            models.Index(fields=['model_hash'], name='bounds_expe_model_h_3f1c2a_idx'),
            models.Index(fields=['created_at'], name='bounds_expe_created_8d0b7e_idx'),
        ]
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.mode} run {self.id} ({self.status})"

    def finish(self, status, summary=None):
        self.status = status
        if summary is not None:
            self.summary = summary
        self.save(update_fields=['status', 'summary'])
        logger.info(f"Run {self.id} finished with status {status}")

    @classmethod
    def search(cls, **kwargs):
        """Filter runs.

        Args:
            **kwargs: Search parameters
                model_hash (str): Model fingerprint (prefix match)
                mode (str): Credal mode
                status (str): Run status

        Returns:
            QuerySet: Matching runs, newest first
        """
        queryset = cls.objects.all()
        model_hash = kwargs.get('model_hash')
        if model_hash:
            queryset = queryset.filter(model_hash__startswith=model_hash)
        mode = kwargs.get('mode')
        if mode:
            queryset = queryset.filter(mode=mode)
        status = kwargs.get('status')
        if status:
            queryset = queryset.filter(status=status)
        return queryset
