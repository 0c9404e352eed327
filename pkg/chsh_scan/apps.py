from django.apps import AppConfig


class ChshScanConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'chsh_scan'
    verbose_name = 'CHSH parameter sweeps'
