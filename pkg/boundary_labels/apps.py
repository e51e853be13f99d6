from django.apps import AppConfig


class BoundaryLabelsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'boundary_labels'
    verbose_name = 'Boundary Labels'
