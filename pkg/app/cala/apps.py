from django.apps import AppConfig


class CalaConfig(AppConfig):
    name = 'cala'
    verbose_name = 'CaLa model'
