from django.apps import AppConfig


class PartialsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'partials'
    verbose_name = 'Mixed partial derivative checks'
