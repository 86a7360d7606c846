import uuid

from django.db import models


class RunRecord(models.Model):
    """
    Ledger entry for one task or figure run
    """
    STATUS_CHOICES = [
        ('COMPLETED', 'Completed'),
        ('FAILED', 'Failed'),
    ]

    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    task = models.CharField(max_length=20)
    figure = models.CharField(max_length=10, null=True, blank=True)
    seed = models.PositiveIntegerField(default=0)
    status = models.CharField(max_length=10, choices=STATUS_CHOICES)
    output_dir = models.CharField(max_length=500, blank=True)
    config = models.JSONField()
    manifest = models.JSONField(null=True, blank=True)
    error = models.TextField(blank=True)
    duration_s = models.FloatField(default=0.0)
    created_at = models.DateTimeField(auto_now_add=True)

    def __str__(self):
        label = self.figure or self.task
        return f"{label} (seed {self.seed}) - {self.status}"

    class Meta:
        db_table = 'run_records'
        ordering = ['-created_at']
