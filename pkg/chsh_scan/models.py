from django.db import models


class SweepRun(models.Model):
    config_hash = models.CharField(max_length=64, db_index=True)
    seed = models.BigIntegerField(null=True, blank=True)
    code_version = models.CharField(max_length=20)
    parameter = models.CharField(max_length=50, blank=True)
    gridpoints = models.IntegerField(default=0)
    failures = models.IntegerField(default=0)
    status = models.CharField(max_length=20, choices=[
            ('complete', 'Complete'),
            ('partial', 'Partial'),
        ], default='complete')
    report = models.JSONField(default=dict)
    created_at = models.DateTimeField(auto_now_add=True)

    def __str__(self):
        return f"Sweep {self.config_hash[:12]} ({self.gridpoints} gridpoints, {self.status})"

    class Meta:
        verbose_name = "Sweep Run"
        verbose_name_plural = "Sweep Runs"
        ordering = ['-created_at']
        indexes = [models.Index(fields=['config_hash', 'seed'], name='chsh_scan_sweep_hash_seed_idx')]
