from django.apps import AppConfig


class WorldviewsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'worldviews'
    verbose_name = 'Causal worldviews'
