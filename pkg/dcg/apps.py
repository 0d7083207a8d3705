from django.apps import AppConfig


class DcgConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'dcg'
    verbose_name = 'Descriptor-conditioned gradients MAP-Elites'
