from django.apps import AppConfig


class ConfidenceConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'confidence'
    verbose_name = 'Confidence'
