from django.apps import AppConfig


class DagridConfig(AppConfig):
    name = 'dagrid'
    verbose_name = 'Directed accumulator grids'
